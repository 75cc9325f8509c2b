#include "gepc/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "gepc/gtf.hpp"
#include "gepc/kvfile.hpp"
#include "gepc/rng.hpp"

namespace gepc {
namespace {

std::size_t pick_component(const std::vector<double>& weights, double u) {
  std::size_t k = 0;
  for (; k + 1 < weights.size(); ++k) {
    if (u < weights[k]) break;
    u -= weights[k];
  }
  return k;
}

double aniso_factor(const DatasetSpec& spec, int j) {
  if (spec.shape.width == 1) return spec.aniso_left;
  const double frac = static_cast<double>(j) / (spec.shape.width - 1);
  return spec.aniso_left + (spec.aniso_right - spec.aniso_left) * frac;
}

}  // namespace

std::string DatasetSpec::kind_name() const {
  switch (kind) {
    case Kind::kInvariantGmm: return "invariant_gmm";
    case Kind::kShifted: return "shifted";
    case Kind::kAnisotropic: return "anisotropic";
    case Kind::kCustomGtfDir: return "custom-gtf-dir";
  }
  return "?";
}

DatasetSpec::Kind parse_dataset_kind(const std::string& s) {
  if (s == "invariant_gmm") return DatasetSpec::Kind::kInvariantGmm;
  if (s == "shifted") return DatasetSpec::Kind::kShifted;
  if (s == "anisotropic") return DatasetSpec::Kind::kAnisotropic;
  if (s == "custom-gtf-dir") return DatasetSpec::Kind::kCustomGtfDir;
  throw Error(ErrorCode::kConfig, "unknown dataset kind '" + s + "'");
}

void DatasetSpec::validate() const {
  if (n < 1) throw Error(ErrorCode::kInvalidArgument, "dataset needs n >= 1");
  if (shape.channels < 1 || shape.height < 1 || shape.width < 1) {
    throw Error(ErrorCode::kInvalidArgument, "dataset shape must be positive");
  }
  if (kind == Kind::kCustomGtfDir) {
    if (source_dir.empty()) throw Error(ErrorCode::kConfig, "custom-gtf-dir needs a source directory");
    return;
  }
  if (components < 1 || !(component_std > 0.0) || !(mean_scale >= 0.0) || !(shift_norm >= 0.0) ||
      !(aniso_left > 0.0) || !(aniso_right > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "invalid synthetic mixture parameters");
  }
}

std::string DatasetSpec::hash() const {
  std::string canon = "kind=" + kind_name() + ";shape=" + to_string(shape) +
                      ";n=" + std::to_string(n) + ";seed=" + std::to_string(seed) +
                      ";mixture_seed=" + std::to_string(mixture_seed) +
                      ";components=" + std::to_string(components) +
                      ";component_std=" + format_double(component_std) +
                      ";mean_scale=" + format_double(mean_scale) +
                      ";shift_norm=" + format_double(shift_norm) +
                      ";shift_seed=" + std::to_string(shift_seed) +
                      ";aniso_left=" + format_double(aniso_left) +
                      ";aniso_right=" + format_double(aniso_right) +
                      ";source_dir=" + source_dir.generic_string();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : canon) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

GmmSpec base_mixture(const DatasetSpec& spec) {
  spec.validate();
  GmmSpec out;
  const double var = spec.component_std * spec.component_std;
  for (int k = 0; k < spec.components; ++k) {
    CounterRng rng(spec.mixture_seed ^ seed_domain::kSynthMixture, static_cast<std::uint64_t>(k));
    Field mean = rng.normal_field(spec.shape);
    mean *= spec.mean_scale;
    out.components.push_back(GaussianSpec::isotropic(std::move(mean), var));
    out.weights.push_back(1.0 / spec.components);
  }
  return out;
}

GmmSpec invariant_mixture(const DatasetSpec& spec) {
  return symmetrize(base_mixture(spec), default_group(spec.shape.height, spec.shape.width));
}

Field shift_vector(const DatasetSpec& spec) {
  CounterRng rng(spec.shift_seed ^ seed_domain::kSynthShift, 0);
  Field dir = rng.normal_field(spec.shape);
  if (spec.shift_norm == 0.0) return Field(spec.shape);
  dir *= spec.shift_norm / std::sqrt(sq_norm(dir));
  return dir;
}

GmmSpec generating_mixture(const DatasetSpec& spec) {
  if (spec.kind == DatasetSpec::Kind::kCustomGtfDir) {
    throw Error(ErrorCode::kInvalidArgument, "custom datasets have no generating mixture");
  }
  GmmSpec mix = invariant_mixture(spec);
  if (spec.kind == DatasetSpec::Kind::kShifted) {
    const Field shift = shift_vector(spec);
    for (auto& c : mix.components) c.mean += shift;
  } else if (spec.kind == DatasetSpec::Kind::kAnisotropic) {
    for (auto& c : mix.components)
      for (int ch = 0; ch < spec.shape.channels; ++ch)
        for (int i = 0; i < spec.shape.height; ++i)
          for (int j = 0; j < spec.shape.width; ++j) c.variance(ch, i, j) *= aniso_factor(spec, j);
  }
  return mix;
}

Dataset generate(const DatasetSpec& spec) {
  spec.validate();
  Dataset out;
  if (spec.kind == DatasetSpec::Kind::kCustomGtfDir) {
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(spec.source_dir)) {
      if (e.path().extension() == ".gtf") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    if (files.size() < spec.n) {
      throw Error(ErrorCode::kInsufficientData, spec.source_dir.string() + " holds " +
                                                    std::to_string(files.size()) + " GTF files, need " +
                                                    std::to_string(spec.n));
    }
    for (std::size_t i = 0; i < spec.n; ++i) {
      out.samples.push_back(read_gtf(files[i]));
      if (!(out.samples.back().shape() == out.samples.front().shape())) {
        throw Error(ErrorCode::kShapeMismatch, files[i].string() + ": shape differs from first sample");
      }
      out.names.push_back(sample_file_name(i));
    }
    return out;
  }
  const GmmSpec mix = invariant_mixture(spec);
  const Field shift = spec.kind == DatasetSpec::Kind::kShifted ? shift_vector(spec) : Field(spec.shape);
  for (std::size_t i = 0; i < spec.n; ++i) {
    CounterRng rng(spec.seed ^ seed_domain::kSynthSamples, i);
    const auto& comp = mix.components[pick_component(mix.weights, rng.uniform())];
    Field x(spec.shape);
    for (int ch = 0; ch < spec.shape.channels; ++ch)
      for (int r = 0; r < spec.shape.height; ++r)
        for (int j = 0; j < spec.shape.width; ++j) {
          double var = comp.variance(ch, r, j);
          if (spec.kind == DatasetSpec::Kind::kAnisotropic) var *= aniso_factor(spec, j);
          x(ch, r, j) = comp.mean(ch, r, j) + std::sqrt(var) * rng.normal();
        }
    if (spec.kind == DatasetSpec::Kind::kShifted) x += shift;
    out.samples.push_back(std::move(x));
    out.names.push_back(sample_file_name(i));
  }
  return out;
}

std::string sample_file_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "sample_%05zu.gtf", index);
  return buf;
}

void write_dataset(const Dataset& data, const DatasetSpec& spec, const std::filesystem::path& dir) {
  if (data.samples.empty()) throw Error(ErrorCode::kInsufficientData, "empty dataset");
  std::filesystem::create_directories(dir);
  std::ofstream manifest(dir / "manifest.txt");
  if (!manifest) throw Error(ErrorCode::kIo, "cannot write " + (dir / "manifest.txt").string());
  const Shape& s = data.samples.front().shape();
  manifest << "format = gepc-dataset-1\nkind = " << spec.kind_name() << "\nspec_hash = " << spec.hash()
           << "\nshape = " << s.channels << ',' << s.height << ',' << s.width
           << "\nn = " << data.samples.size() << '\n';
  for (std::size_t i = 0; i < data.samples.size(); ++i) {
    const std::string name = i < data.names.size() ? data.names[i] : sample_file_name(i);
    write_gtf(data.samples[i], dir / name);
    manifest << "file = " << name << '\n';
  }
  if (!manifest) throw Error(ErrorCode::kIo, "manifest write failed in " + dir.string());
}

Dataset load_dataset(const std::filesystem::path& dir) {
  const auto manifest = dir / "manifest.txt";
  if (!std::filesystem::exists(manifest)) {
    throw Error(ErrorCode::kIo, "no manifest.txt in " + dir.string());
  }
  const KvFile kv = KvFile::load(manifest);
  if (kv.get_or("format", "") != "gepc-dataset-1") {
    throw Error(ErrorCode::kConfig, manifest.string() + ": expected format = gepc-dataset-1");
  }
  Dataset out;
  for (const auto& e : kv.entries()) {
    if (e.key != "file") continue;
    out.samples.push_back(read_gtf(dir / e.value));
    if (!(out.samples.back().shape() == out.samples.front().shape())) {
      throw Error(ErrorCode::kShapeMismatch, e.value + ": shape differs from first sample");
    }
    out.names.push_back(e.value);
  }
  const int n = kv.get_int("n", static_cast<int>(out.samples.size()));
  if (out.samples.empty() || static_cast<std::size_t>(n) != out.samples.size()) {
    throw Error(ErrorCode::kInsufficientData, manifest.string() + ": sample count mismatch");
  }
  return out;
}

}  // namespace gepc
