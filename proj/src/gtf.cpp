#include "gepc/gtf.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <vector>

namespace gepc {
namespace {

constexpr std::array<char, 4> kMagic{'G', 'T', 'F', '1'};
// Upper bound on entries a GTF header may declare (2^31 - 1 floats).
constexpr std::uint64_t kMaxEntries = std::numeric_limits<std::int32_t>::max();

static_assert(std::endian::native == std::endian::little,
              "GTF I/O assumes a little-endian host");

std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int k = 0; k < 4; ++k) out.push_back(static_cast<unsigned char>(v >> (8 * k)));
}

}  // namespace

Field read_gtf(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  const std::string where = path.string();
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic.data(), 4) != 0) {
    throw Error(ErrorCode::kBadMagic, where + ": missing GTF1 magic");
  }
  if (bytes.size() < 20) throw Error(ErrorCode::kTruncatedPayload, where + ": truncated header");
  const std::uint32_t ndim = read_u32(bytes.data() + 4);
  if (ndim != 3) {
    throw Error(ErrorCode::kDimensionOverflow,
                where + ": ndim must be 3, got " + std::to_string(ndim));
  }
  const std::uint32_t c = read_u32(bytes.data() + 8);
  const std::uint32_t h = read_u32(bytes.data() + 12);
  const std::uint32_t w = read_u32(bytes.data() + 16);
  const std::uint64_t count = static_cast<std::uint64_t>(c) * h * w;
  if (c == 0 || h == 0 || w == 0 || c > kMaxEntries || h > kMaxEntries || w > kMaxEntries ||
      count > kMaxEntries) {
    throw Error(ErrorCode::kDimensionOverflow, where + ": unsupported dimensions " +
                                                   std::to_string(c) + "x" + std::to_string(h) +
                                                   "x" + std::to_string(w));
  }
  if (bytes.size() - 20 < count * 4) {
    throw Error(ErrorCode::kTruncatedPayload,
                where + ": expected " + std::to_string(count) + " floats, found " +
                    std::to_string((bytes.size() - 20) / 4));
  }
  Field::Storage data(static_cast<Eigen::Index>(count));
  for (std::uint64_t n = 0; n < count; ++n) {
    const std::uint32_t bits = read_u32(bytes.data() + 20 + 4 * n);
    data[static_cast<Eigen::Index>(n)] = std::bit_cast<float>(bits);
  }
  return Field(Shape{static_cast<int>(c), static_cast<int>(h), static_cast<int>(w)},
               std::move(data));
}

void write_gtf(const Field& field, const std::filesystem::path& path) {
  std::vector<unsigned char> out;
  out.reserve(20 + 4 * static_cast<std::size_t>(field.size()));
  out.insert(out.end(), kMagic.begin(), kMagic.end());
  put_u32(out, 3);
  put_u32(out, static_cast<std::uint32_t>(field.channels()));
  put_u32(out, static_cast<std::uint32_t>(field.height()));
  put_u32(out, static_cast<std::uint32_t>(field.width()));
  for (double v : field.array()) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  os.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (!os) throw Error(ErrorCode::kIo, "short write to " + path.string());
}

}  // namespace gepc
