#pragma once

#include <filesystem>

#include "gepc/tensor.hpp"

namespace gepc {

// GTF: little-endian "GTF1", u32 ndim (= 3), u32 C, H, W, then C*H*W binary32
// values in (c, i, j) order. No padding, no checksum.
//
// Errors: kBadMagic, kTruncatedPayload, kDimensionOverflow, kIo.
Field read_gtf(const std::filesystem::path& path);
void write_gtf(const Field& field, const std::filesystem::path& path);

}  // namespace gepc
