#include "gepc/bridge.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <thread>

#include "gepc/gtf.hpp"
#include "gepc/kvfile.hpp"

namespace gepc {
namespace {

std::filesystem::path request_gtf(const std::filesystem::path& dir, const std::string& id) {
  return dir / ("request-" + id + ".gtf");
}
std::filesystem::path request_meta(const std::filesystem::path& dir, const std::string& id) {
  return dir / ("request-" + id + ".meta");
}
std::filesystem::path response_gtf(const std::filesystem::path& dir, const std::string& id) {
  return dir / ("response-" + id + ".gtf");
}
std::filesystem::path response_err(const std::filesystem::path& dir, const std::string& id) {
  return dir / ("response-" + id + ".err");
}

std::string replace_all(std::string s, const std::string& from, const std::string& to) {
  for (auto pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
    s.replace(pos, from.size(), to);
  }
  return s;
}

}  // namespace

Field stack_channels(const std::vector<Field>& items) {
  if (items.empty()) throw Error(ErrorCode::kInvalidArgument, "nothing to stack");
  const Shape& s = items.front().shape();
  Field out(Shape{s.channels * static_cast<int>(items.size()), s.height, s.width});
  for (std::size_t k = 0; k < items.size(); ++k) {
    items[k].require_same_shape(items.front());
    out.array().segment(static_cast<Eigen::Index>(k) * s.size(), s.size()) = items[k].array();
  }
  return out;
}

std::vector<Field> unstack_channels(const Field& stacked, const Shape& item_shape, std::size_t count) {
  const Shape want{item_shape.channels * static_cast<int>(count), item_shape.height, item_shape.width};
  if (!(stacked.shape() == want)) {
    throw Error(ErrorCode::kShapeMismatch, "stacked payload " + to_string(stacked.shape()) +
                                               ", expected " + to_string(want));
  }
  std::vector<Field> out;
  for (std::size_t k = 0; k < count; ++k) {
    Field f(item_shape);
    f.array() = stacked.array().segment(static_cast<Eigen::Index>(k) * item_shape.size(), item_shape.size());
    out.push_back(std::move(f));
  }
  return out;
}

void write_request(const std::filesystem::path& dir, const BridgeRequest& req) {
  const std::size_t n = req.inputs.size();
  if (n == 0 || req.t_index.size() != n || req.sigma.size() != n) {
    throw Error(ErrorCode::kBridge, "request " + req.id + ": per-item lists must match the input count");
  }
  for (double s : req.sigma) {
    if (!(s > 0.0)) throw Error(ErrorCode::kBridge, "request " + req.id + ": sigma_t must be > 0");
  }
  std::filesystem::create_directories(dir);
  std::filesystem::remove(response_gtf(dir, req.id));
  std::filesystem::remove(response_err(dir, req.id));
  write_gtf(stack_channels(req.inputs), request_gtf(dir, req.id));
  // Meta goes last and via rename so a polling server never sees half a request.
  const auto tmp = dir / ("request-" + req.id + ".meta.tmp");
  {
    std::ofstream meta(tmp);
    meta << "n = " << n << "\nc = " << req.inputs.front().channels()
         << "\nwant = " << (req.want_score ? "score" : "eps") << "\nt_index = ";
    for (std::size_t k = 0; k < n; ++k) meta << (k ? "," : "") << req.t_index[k];
    meta << "\nsigma_t = ";
    for (std::size_t k = 0; k < n; ++k) meta << (k ? "," : "") << format_double(req.sigma[k]);
    meta << '\n';
    if (!meta) throw Error(ErrorCode::kIo, "cannot write " + tmp.string());
  }
  std::filesystem::rename(tmp, request_meta(dir, req.id));
}

BridgeRequest read_request(const std::filesystem::path& dir, const std::string& id) {
  const KvFile kv = KvFile::load(request_meta(dir, id));
  BridgeRequest req;
  req.id = id;
  const int n = kv.get_int("n", 0);
  const std::string want = kv.require("want");
  if (want != "score" && want != "eps") throw Error(ErrorCode::kBridge, "want must be score|eps");
  req.want_score = want == "score";
  req.t_index = parse_int_list(kv.require("t_index"));
  req.sigma = parse_double_list(kv.require("sigma_t"));
  const Field stacked = read_gtf(request_gtf(dir, id));
  if (n < 1 || req.t_index.size() != static_cast<std::size_t>(n) ||
      req.sigma.size() != static_cast<std::size_t>(n) || stacked.channels() % n != 0) {
    throw Error(ErrorCode::kBridge, "request " + id + ": meta counts do not match the payload");
  }
  const int c = kv.get_int("c", stacked.channels() / n);
  if (c * n != stacked.channels()) throw Error(ErrorCode::kBridge, "request " + id + ": c * n != C'");
  req.inputs = unstack_channels(stacked, Shape{c, stacked.height(), stacked.width()},
                                static_cast<std::size_t>(n));
  return req;
}

std::optional<std::vector<Field>> read_response(const std::filesystem::path& dir, const std::string& id,
                                                const Shape& item_shape, std::size_t count) {
  if (std::filesystem::exists(response_err(dir, id))) {
    std::ifstream in(response_err(dir, id));
    std::string reason;
    std::getline(in, reason);
    throw Error(ErrorCode::kBridge, "bridge rejected request " + id + ": " + reason);
  }
  if (!std::filesystem::exists(response_gtf(dir, id))) return std::nullopt;
  return unstack_channels(read_gtf(response_gtf(dir, id)), item_shape, count);
}

BridgeScore::BridgeScore(std::filesystem::path dir, NoiseSchedule schedule, std::string command,
                         std::chrono::milliseconds timeout)
    : dir_(std::move(dir)), schedule_(std::move(schedule)), command_(std::move(command)), timeout_(timeout) {}

std::vector<Field> BridgeScore::eval_batch(std::span<const Field> xs, int t,
                                           std::span<const EvalKey>) const {
  if (xs.empty()) return {};
  schedule_.require_step(t);
  char id[32];
  std::snprintf(id, sizeof id, "%08llu", static_cast<unsigned long long>(next_id_++));
  BridgeRequest req;
  req.id = id;
  req.inputs.assign(xs.begin(), xs.end());
  req.t_index.assign(xs.size(), t);
  req.sigma.assign(xs.size(), schedule_.sigma(t));
  req.want_score = true;
  write_request(dir_, req);

  if (!command_.empty()) {
    const std::string cmd = replace_all(replace_all(command_, "{dir}", dir_.string()), "{id}", req.id);
    if (std::system(cmd.c_str()) != 0) {
      throw Error(ErrorCode::kBridge, "bridge command failed: " + cmd);
    }
  }
  const auto deadline = std::chrono::steady_clock::now() + timeout_;
  std::optional<Error> partial;
  while (true) {
    // A response file can be caught mid-write; retry until the deadline.
    try {
      if (auto out = read_response(dir_, req.id, xs.front().shape(), xs.size())) {
        for (const auto& f : *out) {
          if (!f.all_finite()) throw Error(ErrorCode::kDegenerate, "bridge returned non-finite scores");
        }
        return std::move(*out);
      }
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kTruncatedPayload && e.code() != ErrorCode::kBadMagic) throw;
      partial = e;
    }
    if (std::chrono::steady_clock::now() > deadline) {
      if (partial) throw *partial;
      throw Error(ErrorCode::kBridge, "timed out waiting for response-" + req.id);
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
}

}  // namespace gepc
