#include "gepc/gmm_io.hpp"

#include <cmath>
#include <fstream>
#include <optional>

#include "gepc/gtf.hpp"
#include "gepc/kvfile.hpp"

namespace gepc {
namespace {

Field read_values(const std::string& value, const Shape& shape, bool allow_scalar,
                  const std::filesystem::path& base, const std::string& what) {
  if (value.rfind("gtf:", 0) == 0) {
    Field f = read_gtf(base / value.substr(4));
    if (!(f.shape() == shape)) {
      throw Error(ErrorCode::kShapeMismatch, what + ": " + to_string(f.shape()) + " vs " +
                                                 to_string(shape));
    }
    return f;
  }
  if (value.rfind("const:", 0) == 0) return Field::constant(shape, parse_double(value.substr(6)));
  const auto list = parse_double_list(value);
  if (allow_scalar && list.size() == 1) return Field::constant(shape, list[0]);
  if (static_cast<std::ptrdiff_t>(list.size()) != shape.size()) {
    throw Error(ErrorCode::kShapeMismatch,
                what + ": expected " + std::to_string(shape.size()) + " values, got " +
                    std::to_string(list.size()));
  }
  Field f(shape);
  for (std::size_t n = 0; n < list.size(); ++n) f.array()[static_cast<Eigen::Index>(n)] = list[n];
  return f;
}

void write_values(std::ostream& out, const Field& f, bool allow_scalar) {
  const double first = f.array()[0];
  if (allow_scalar && (f.array() == first).all()) {
    out << format_double(first);
    return;
  }
  for (Eigen::Index n = 0; n < f.size(); ++n) {
    if (n) out << ',';
    out << format_double(f.array()[n]);
  }
}

}  // namespace

GmmSpec read_gmm_spec(const std::filesystem::path& path) {
  const KvFile kv = KvFile::load(path);
  const auto base = path.parent_path();
  if (kv.get_or("format", "") != "gepc-gmm-1") {
    throw Error(ErrorCode::kConfig, path.string() + ": expected format = gepc-gmm-1");
  }
  const auto dims = parse_int_list(kv.require("shape"));
  if (dims.size() != 3) throw Error(ErrorCode::kConfig, path.string() + ": shape needs C,H,W");
  const Shape shape{dims[0], dims[1], dims[2]};

  struct Partial {
    double weight = -1.0;
    std::optional<Field> mean;
    std::optional<Field> variance;
  };
  std::vector<Partial> parts;
  for (const auto& e : kv.entries()) {
    if (e.section_index < 0) continue;
    if (e.section != "component") kv.fail(e, "unknown section [" + e.section + "]");
    if (static_cast<int>(parts.size()) <= e.section_index) parts.resize(e.section_index + 1);
    auto& p = parts[static_cast<std::size_t>(e.section_index)];
    if (e.key == "weight") {
      p.weight = parse_double(e.value);
    } else if (e.key == "mean") {
      p.mean = read_values(e.value, shape, false, base, "mean");
    } else if (e.key == "variance") {
      p.variance = read_values(e.value, shape, true, base, "variance");
    } else {
      kv.fail(e, "unknown component key '" + e.key + "'");
    }
  }
  GmmSpec spec;
  double total = 0.0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    auto& p = parts[k];
    if (p.weight <= 0.0 || !p.mean || !p.variance) {
      throw Error(ErrorCode::kConfig, path.string() + ": component " + std::to_string(k) +
                                          " needs weight > 0, mean and variance");
    }
    total += p.weight;
    spec.weights.push_back(p.weight);
    spec.components.push_back(GaussianSpec{std::move(*p.mean), std::move(*p.variance)});
  }
  if (spec.components.empty()) throw Error(ErrorCode::kConfig, path.string() + ": no components");
  if (std::abs(total - 1.0) > 1e-9) {
    throw Error(ErrorCode::kConfig, path.string() + ": weights sum to " + format_double(total));
  }
  for (auto& w : spec.weights) w /= total;
  spec.validate();
  return spec;
}

void write_gmm_spec(const GmmSpec& spec, const std::filesystem::path& path) {
  spec.validate();
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  const Shape& s = spec.shape();
  out << "format = gepc-gmm-1\n";
  out << "shape = " << s.channels << ',' << s.height << ',' << s.width << '\n';
  for (std::size_t k = 0; k < spec.components.size(); ++k) {
    out << "[component]\nweight = " << format_double(spec.weights[k]) << "\nmean = ";
    write_values(out, spec.components[k].mean, false);
    out << "\nvariance = ";
    write_values(out, spec.components[k].variance, true);
    out << '\n';
  }
  if (!out) throw Error(ErrorCode::kIo, "write failed: " + path.string());
}

}  // namespace gepc
