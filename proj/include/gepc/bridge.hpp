#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gepc/schedule.hpp"
#include "gepc/scorefield.hpp"

namespace gepc {

// File-pair protocol with an external denoiser process.
//
// Request `request-<id>.gtf` stacks N inputs of shape C x H x W along the
// channel axis (C' = N * C). `request-<id>.meta`:
//
//   n = N
//   c = C
//   want = score | eps
//   t_index = t_1,...,t_N
//   sigma_t = s_1,...,s_N
//
// The server answers with `response-<id>.gtf` (same stacking) holding
// eps_theta or -eps_theta / sigma_t, or `response-<id>.err` with a one-line
// reason.

struct BridgeRequest {
  std::string id;
  std::vector<Field> inputs;
  std::vector<int> t_index;
  std::vector<double> sigma;
  bool want_score = true;
};

void write_request(const std::filesystem::path& dir, const BridgeRequest& request);
BridgeRequest read_request(const std::filesystem::path& dir, const std::string& id);

/// Response payload if present; throws kBridge if the server left an .err.
std::optional<std::vector<Field>> read_response(const std::filesystem::path& dir,
                                                const std::string& id, const Shape& item_shape,
                                                std::size_t count);

Field stack_channels(const std::vector<Field>& items);
std::vector<Field> unstack_channels(const Field& stacked, const Shape& item_shape, std::size_t count);

/// Score field answered by the bridge. Each eval_batch is one request; after
/// writing it, `command` (if non-empty; `{dir}` and `{id}` are substituted) is
/// run through the shell, then the
/// response is polled for until `timeout`.
class BridgeScore final : public ScoreField {
 public:
  BridgeScore(std::filesystem::path dir, NoiseSchedule schedule, std::string command = {},
              std::chrono::milliseconds timeout = std::chrono::seconds(60));

  std::vector<Field> eval_batch(std::span<const Field> xs, int t,
                                std::span<const EvalKey> keys) const override;
  bool concurrent() const override { return false; }

 private:
  std::filesystem::path dir_;
  NoiseSchedule schedule_;
  std::string command_;
  std::chrono::milliseconds timeout_;
  mutable std::atomic<std::uint64_t> next_id_{0};
};

}  // namespace gepc
