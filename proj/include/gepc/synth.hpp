#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "gepc/scorefield.hpp"
#include "gepc/tensor.hpp"

namespace gepc {

struct DatasetSpec {
  enum class Kind { kInvariantGmm, kShifted, kAnisotropic, kCustomGtfDir };

  Kind kind = Kind::kInvariantGmm;
  Shape shape{3, 8, 8};
  std::size_t n = 100;
  std::uint64_t seed = 1;          // sample streams
  std::uint64_t mixture_seed = 1;  // base means (shared by ID and shifted OOD)
  int components = 4;
  double component_std = 0.3;
  double mean_scale = 0.5;
  double shift_norm = 1.0;         // kShifted
  std::uint64_t shift_seed = 1;    // direction of the shift vector
  double aniso_left = 1.0;         // kAnisotropic: variance factor ramps
  double aniso_right = 1.0;        //   from left (j = 0) to right (j = W-1)
  std::filesystem::path source_dir;  // kCustomGtfDir

  std::string kind_name() const;
  void validate() const;
  /// FNV-1a over the canonical key = value rendering.
  std::string hash() const;
};

DatasetSpec::Kind parse_dataset_kind(const std::string& s);

/// Base (unsymmetrised) mixture drawn once from mixture_seed.
GmmSpec base_mixture(const DatasetSpec& spec);

/// Symmetrised base mixture under the default group of the shape.
GmmSpec invariant_mixture(const DatasetSpec& spec);

/// The mixture the spec samples from (invariant, shifted or anisotropic).
/// Not defined for kCustomGtfDir.
GmmSpec generating_mixture(const DatasetSpec& spec);

/// Fixed shift vector: seeded direction scaled to shift_norm.
Field shift_vector(const DatasetSpec& spec);

struct Dataset {
  std::vector<Field> samples;
  std::vector<std::string> names;
};

/// Deterministic given the spec; sample i uses the stream (seed, i).
Dataset generate(const DatasetSpec& spec);

/// Writes manifest.txt and sample_00000.gtf...; manifest records the spec hash.
void write_dataset(const Dataset& data, const DatasetSpec& spec, const std::filesystem::path& dir);

/// Reads a dataset directory through its manifest.
Dataset load_dataset(const std::filesystem::path& dir);

std::string sample_file_name(std::size_t index);

}  // namespace gepc
