#pragma once

#include <filesystem>

#include "gepc/scorefield.hpp"

namespace gepc {

// GMM spec file:
//
//   format = gepc-gmm-1
//   shape = C,H,W
//   [component]
//   weight = 0.25
//   mean = <C*H*W numbers> | const:<v> | gtf:<path relative to the file>
//   variance = <one number (isotropic)> | <C*H*W numbers> | gtf:<path>
//
// Weights are renormalised on read when they sum to 1 within 1e-9.
GmmSpec read_gmm_spec(const std::filesystem::path& path);
void write_gmm_spec(const GmmSpec& spec, const std::filesystem::path& path);

}  // namespace gepc
