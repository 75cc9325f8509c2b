#include <gtest/gtest.h>

#include <atomic>
#include <cstring>
#include <thread>

#include "gepc/bridge.hpp"
#include "gepc/gepc.hpp"
#include "gepc/gtf.hpp"
#include "test_util.hpp"

namespace gepc {
namespace {

using testing::TempDir;

// Minimal stand-in for the external server: eps_theta = value everywhere.
// Responses are written beside the final name and renamed into place.
void serve_constant(const std::filesystem::path& dir, const std::string& id, double value) {
  const auto err = dir / ("response-" + id + ".err");
  try {
    const BridgeRequest req = read_request(dir, id);
    std::vector<Field> out;
    for (std::size_t k = 0; k < req.inputs.size(); ++k) {
      const double v = req.want_score ? -value / req.sigma[k] : value;
      out.push_back(Field::constant(req.inputs[k].shape(), v));
    }
    const auto tmp = dir / ("response-" + id + ".gtf.tmp");
    write_gtf(stack_channels(out), tmp);
    std::filesystem::rename(tmp, dir / ("response-" + id + ".gtf"));
  } catch (const std::exception& e) {
    testing::spit(err, std::string(e.what()) + "\n");
  }
}

std::string self_path() { return std::filesystem::read_symlink("/proc/self/exe").string(); }

// Background responder polling for request metas.
class StubServer {
 public:
  StubServer(std::filesystem::path dir, double value) : dir_(std::move(dir)), value_(value) {
    thread_ = std::thread([this] {
      while (!stop_) {
        for (const auto& e : std::filesystem::directory_iterator(dir_)) {
          const std::string name = e.path().filename().string();
          if (name.rfind("request-", 0) != 0 || e.path().extension() != ".meta") continue;
          const std::string id = name.substr(8, name.size() - 8 - 5);
          if (std::filesystem::exists(dir_ / ("response-" + id + ".gtf"))) continue;
          serve_constant(dir_, id, value_);
          ++served_;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(1));
      }
    });
  }
  ~StubServer() {
    stop_ = true;
    thread_.join();
  }
  int served() const { return served_; }

 private:
  std::filesystem::path dir_;
  double value_;
  std::atomic<bool> stop_{false};
  std::atomic<int> served_{0};
  std::thread thread_;
};

TEST(Bridge, StackingRoundtrip) {
  const std::vector<Field> items{testing::random_field({2, 3, 3}, 1), testing::random_field({2, 3, 3}, 2)};
  const Field stacked = stack_channels(items);
  EXPECT_EQ(stacked.shape(), (Shape{4, 3, 3}));
  const auto back = unstack_channels(stacked, {2, 3, 3}, 2);
  EXPECT_EQ(testing::max_abs_diff(back[1], items[1]), 0.0);
  EXPECT_THROW(unstack_channels(stacked, {3, 3, 3}, 2), Error);
}

TEST(Bridge, RequestRoundtrip) {
  TempDir dir;
  BridgeRequest req;
  req.id = "00000007";
  req.inputs = {testing::random_field({1, 2, 2}, 3).cast<float>().cast<double>(),
                testing::random_field({1, 2, 2}, 4).cast<float>().cast<double>()};
  req.t_index = {5, 15};
  req.sigma = {0.25, 0.5};
  req.want_score = false;
  write_request(dir.path(), req);
  EXPECT_FALSE(std::filesystem::exists(dir / "request-00000007.meta.tmp"));
  const BridgeRequest back = read_request(dir.path(), "00000007");
  EXPECT_EQ(back.t_index, req.t_index);
  EXPECT_EQ(back.sigma, req.sigma);
  EXPECT_FALSE(back.want_score);
  ASSERT_EQ(back.inputs.size(), 2u);
  EXPECT_EQ(testing::max_abs_diff(back.inputs[1], req.inputs[1]), 0.0);
}

TEST(Bridge, RequestValidation) {
  TempDir dir;
  BridgeRequest req;
  req.id = "x";
  req.inputs = {Field(Shape{1, 1, 1})};
  req.t_index = {1};
  req.sigma = {0.0};
  EXPECT_THROW(write_request(dir.path(), req), Error);
  req.sigma = {0.1, 0.2};
  EXPECT_THROW(write_request(dir.path(), req), Error);
}

TEST(Bridge, StubScoreIsMinusEpsOverSigma) {
  TempDir dir;
  BridgeRequest req;
  req.id = "a";
  req.inputs = {testing::random_field({1, 2, 2}, 5)};
  req.t_index = {100};
  req.sigma = {0.5};
  write_request(dir.path(), req);
  serve_constant(dir.path(), "a", 1.0);
  const auto out = read_response(dir.path(), "a", {1, 2, 2}, 1);
  ASSERT_TRUE(out.has_value());
  EXPECT_EQ((*out)[0].array().minCoeff(), -2.0);
  EXPECT_EQ((*out)[0].array().maxCoeff(), -2.0);

  req.id = "b";
  req.want_score = false;
  write_request(dir.path(), req);
  serve_constant(dir.path(), "b", 1.0);
  EXPECT_EQ((*read_response(dir.path(), "b", {1, 2, 2}, 1))[0].array().maxCoeff(), 1.0);
}

TEST(Bridge, MalformedMetaProducesErrorFile) {
  TempDir dir;
  BridgeRequest req;
  req.id = "m";
  req.inputs = {Field(Shape{1, 2, 2}), Field(Shape{1, 2, 2})};
  req.t_index = {1, 1};
  req.sigma = {0.5, 0.5};
  write_request(dir.path(), req);
  testing::spit(dir / "request-m.meta", "n = 3\nwant = score\nt_index = 1,1,1\nsigma_t = 0.5,0.5,0.5\n");
  serve_constant(dir.path(), "m", 1.0);
  EXPECT_TRUE(std::filesystem::exists(dir / "response-m.err"));
  EXPECT_FALSE(std::filesystem::exists(dir / "response-m.gtf"));
  try {
    read_response(dir.path(), "m", {1, 2, 2}, 2);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kBridge);
  }
}

TEST(Bridge, MissingResponseIsEmpty) {
  TempDir dir;
  EXPECT_FALSE(read_response(dir.path(), "none", {1, 1, 1}, 1).has_value());
}

TEST(Bridge, ScoreFieldWithPollingServer) {
  TempDir dir;
  const auto sched = default_schedule();
  StubServer server(dir.path(), 1.0);
  BridgeScore field(dir.path(), sched, {}, std::chrono::seconds(20));
  const std::vector<Field> xs{testing::random_field({2, 3, 3}, 6), testing::random_field({2, 3, 3}, 7)};
  const auto out = field.eval_batch(xs, 136, {});
  ASSERT_EQ(out.size(), 2u);
  EXPECT_NEAR(out[1].array().maxCoeff(), -1.0 / sched.sigma(136), 1e-6);
  EXPECT_NEAR(out[1].array().minCoeff(), -1.0 / sched.sigma(136), 1e-6);
  EXPECT_FALSE(field.concurrent());
}

TEST(Bridge, ScoreFieldWithCommand) {
  TempDir dir;
  const auto sched = default_schedule();
  BridgeScore field(dir.path(), sched, self_path() + " --serve-constant {dir} {id} 1", std::chrono::seconds(20));
  const Field x = testing::random_field({1, 2, 2}, 8);
  const Field s = eval_score(field, x, 15);
  EXPECT_NEAR(s.array().maxCoeff(), -1.0 / sched.sigma(15), 1e-6 / sched.sigma(15));
}

TEST(Bridge, TimeoutAndFailingCommand) {
  TempDir dir;
  BridgeScore silent(dir.path(), default_schedule(), {}, std::chrono::milliseconds(30));
  try {
    eval_score(silent, Field(Shape{1, 1, 1}), 5);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kBridge);
  }
  BridgeScore broken(dir.path(), default_schedule(), "false", std::chrono::milliseconds(30));
  EXPECT_THROW(eval_score(broken, Field(Shape{1, 1, 1}), 5), Error);
}

TEST(Bridge, TabulatedReplayOfConstantStubIsEquivariant) {
  // Record every (sample, g, t) evaluation through the bridge, then replay
  // them from disk: the constant field transports to itself, so GEPC is 0.
  TempDir dir;
  const auto sched = default_schedule();
  const Shape shape{1, 4, 4};
  GepcConfig cfg;
  cfg.group = default_group(4, 4);
  cfg.timesteps = {5, 15};
  cfg.weights = GepcConfig::uniform_weights(2);
  cfg.features = {FeatureKind::kS, FeatureKind::kCos, FeatureKind::kPair};
  const Field x0 = testing::random_field(shape, 9);
  const NoiseSource noise{3, 0};

  std::filesystem::create_directories(dir / "bridge");
  StubServer server(dir / "bridge", 1.0);
  BridgeScore field(dir / "bridge", sched, {}, std::chrono::seconds(20));
  TabulatedScore tab;
  for (int t : cfg.timesteps) {
    const Field xt = forward_sample(sched, x0, t, noise.eps(shape, 0));
    std::vector<Field> inputs{xt};
    for (const auto& g : cfg.group.elements) inputs.push_back(apply(g, xt));
    const auto scores = field.eval_batch(inputs, t, {});
    for (std::size_t k = 0; k < scores.size(); ++k) {
      write_gtf(scores[k], dir / TabulatedScore::file_name(0, static_cast<int>(k), t));
    }
  }
  const TabulatedScore replay = TabulatedScore::load(dir.path());
  EXPECT_EQ(replay.size(), 2u * (1 + cfg.group.size()));
  const GepcResult r = gepc_score(replay, sched, x0, cfg, noise);
  EXPECT_LE(std::abs(r.score), 1e-10);
  EXPECT_LE(r.features.at(15, FeatureKind::kCos), 1e-10);
  EXPECT_LE(r.features.at(15, FeatureKind::kPair), 1e-10);
  EXPECT_EQ(r.ledger.forward, 16);
}

}  // namespace
}  // namespace gepc

int main(int argc, char** argv) {
  if (argc == 5 && std::strcmp(argv[1], "--serve-constant") == 0) {
    gepc::serve_constant(argv[2], argv[3], std::stod(argv[4]));
    return 0;
  }
  ::testing::InitGoogleTest(&argc, argv);
  return RUN_ALL_TESTS();
}
