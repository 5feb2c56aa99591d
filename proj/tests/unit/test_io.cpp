#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "posedp/binary_io.hpp"
#include "posedp/config.hpp"
#include "posedp/dataset_io.hpp"
#include "posedp/harness.hpp"

using namespace posedp;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "posedp_unit";
  fs::create_directories(dir);
  return dir / name;
}

ExperimentConfig tiny_config() {
  ExperimentConfig c;
  c.hidden_width = 16;
  c.depth = 1;
  c.embed_dim = 8;
  c.epochs = 2;
  c.batch_size = 32;
  c.demo_episodes = 3;
  c.diffusion_steps = 10;
  c.grid_resolution = 8;
  return c;
}

}  // namespace

TEST(BinaryIo, PrimitivesRoundTripLittleEndian) {
  std::stringstream buf;
  BinaryWriter w(buf);
  w.u32(0x01020304u);
  w.u64(0x0102030405060708ull);
  w.f32(-1.5f);
  w.text("hello");
  const std::vector<float> v{1.0f, 2.0f, 3.0f};
  w.floats(v);
  const std::string raw = buf.str();
  EXPECT_EQ(static_cast<unsigned char>(raw[0]), 0x04);
  BinaryReader r(buf);
  EXPECT_EQ(r.u32(), 0x01020304u);
  EXPECT_EQ(r.u64(), 0x0102030405060708ull);
  EXPECT_EQ(r.f32(), -1.5f);
  EXPECT_EQ(r.text(), "hello");
  EXPECT_EQ(r.floats(), v);
  EXPECT_THROW(r.u32(), std::runtime_error);
}

TEST(BinaryIo, LengthCheckedFloats) {
  std::stringstream buf;
  BinaryWriter(buf).floats(std::vector<float>{1.0f, 2.0f});
  BinaryReader r(buf);
  EXPECT_THROW(r.floats(3, "stats"), std::runtime_error);
}

TEST(Dataset, SaveLoadRoundTrip) {
  const Dataset d = generate_demonstrations(TaskSpec::late_reveal_push(3), 2,
                                            TrackerConfig::calibrated(1), 4, 8);
  const fs::path path = scratch("roundtrip.bin");
  save_dataset(d, path);
  const Dataset back = load_dataset(path);
  EXPECT_EQ(back.task.name(), d.task.name());
  EXPECT_EQ(back.task.reveal_frame, 3);
  EXPECT_EQ(back.grid_resolution, 8);
  EXPECT_EQ(back.action_min, d.action_min);
  EXPECT_EQ(back.action_max, d.action_max);
  ASSERT_EQ(back.episodes.size(), d.episodes.size());
  for (std::size_t e = 0; e < d.episodes.size(); ++e) {
    const auto& a = d.episodes[e];
    const auto& b = back.episodes[e];
    EXPECT_EQ(a.seed, b.seed);
    ASSERT_EQ(a.frames.size(), b.frames.size());
    for (std::size_t t = 0; t < a.frames.size(); ++t) {
      EXPECT_EQ(a.frames[t].robot_state, b.frames[t].robot_state);
      EXPECT_EQ(a.frames[t].grid.pixels, b.frames[t].grid.pixels);
      EXPECT_EQ(a.frames[t].action, b.frames[t].action);
      EXPECT_EQ(encode_pose(a.frames[t].gt_poses[0]), encode_pose(b.frames[t].gt_poses[0]));
      EXPECT_EQ(encode_pose(a.frames[t].est_poses[0]), encode_pose(b.frames[t].est_poses[0]));
    }
  }
  std::ifstream sidecar(path.string() + ".jsonl");
  std::string line;
  int lines = 0;
  while (std::getline(sidecar, line)) ++lines;
  EXPECT_EQ(lines, 3);
}

TEST(Dataset, RejectsWrongMagic) {
  const fs::path path = scratch("garbage.bin");
  std::ofstream(path) << "not a dataset";
  EXPECT_THROW(load_dataset(path), std::runtime_error);
  EXPECT_THROW(load_dataset(scratch("missing.bin")), std::runtime_error);
}

TEST(Checkpoint, RoundTripPreservesEverythingAndSampling) {
  ExperimentConfig cfg = tiny_config();
  const Dataset d = generate_demonstrations(cfg.task, cfg.demo_episodes, cfg.effective_tracker(),
                                            cfg.data_seed, cfg.grid_resolution);
  const Checkpoint ck = train(cfg, d);
  const fs::path path = scratch("model.ckpt");
  save_checkpoint(ck, path);
  const Checkpoint back = load_checkpoint(path);

  EXPECT_EQ(to_text(back.config), to_text(ck.config));
  EXPECT_EQ(back.action_min, ck.action_min);
  EXPECT_EQ(back.obs_min, ck.obs_min);
  EXPECT_EQ(back.obs_max, ck.obs_max);
  EXPECT_EQ(back.metrics.epoch_loss, ck.metrics.epoch_loss);
  EXPECT_EQ(back.metrics.epoch_seconds, ck.metrics.epoch_seconds);
  ASSERT_TRUE(back.ema.has_value());
  for (std::size_t i = 0; i < ck.params.tensors().size(); ++i) {
    const auto a = ck.params.tensors()[i].data();
    const auto b = back.params.tensors()[i].data();
    EXPECT_TRUE(std::equal(a.begin(), a.end(), b.begin(), b.end()));
  }

  const NoiseSchedule schedule = cfg.schedule();
  const std::vector<float> cond(static_cast<std::size_t>(ck.policy_params().config().cond_width()), 0.2f);
  auto sample = [&](const Checkpoint& c) {
    const EpsPredictor pred = [&](std::span<const float> x, int k, std::span<const float> cnd) {
      const int steps[1] = {k};
      const Tensor eps = predict_noise(c.policy_params(),
                                       Tensor::from_data({1, x.size()}, {x.begin(), x.end()}), steps,
                                       Tensor::from_data({1, cnd.size()}, {cnd.begin(), cnd.end()}));
      return std::vector<float>(eps.data().begin(), eps.data().end());
    };
    Rng rng(99);
    const ActionChunk chunk = ddpm_sample(pred, cond, cfg.prediction_horizon, kActionDim, schedule, rng);
    return std::vector<float>(chunk.values().begin(), chunk.values().end());
  };
  EXPECT_EQ(sample(ck), sample(back));
}

TEST(Checkpoint, RejectsTruncatedFile) {
  const fs::path path = scratch("truncated.ckpt");
  std::ofstream(path, std::ios::binary) << std::string("PDPCKPT\0", 8);
  EXPECT_THROW(load_checkpoint(path), std::runtime_error);
}

TEST(Config, ParsesDottedKeysCommentsAndWhitespace) {
  const auto kv = parse_key_values("# comment\n  task.id = stack  \n\nseed.data=5 # trailing\n");
  EXPECT_EQ(kv.at("task.id"), "stack");
  EXPECT_EQ(kv.at("seed.data"), "5");
  EXPECT_THROW(parse_key_values("novalue\n"), std::invalid_argument);
}

TEST(Config, AppliesKnownKeysAndRejectsUnknown) {
  const ExperimentConfig c = parse_config(
      "task.id = push_to_goal\ntask.reveal_frame = 6\nobs.mode = est_pose\n"
      "model.hidden_width = 40\ntrain.epochs = 3\nseed.train = 9\ntracker.sigma_pos = 0\n");
  EXPECT_EQ(c.task.name(), "push_to_goal_late");
  EXPECT_EQ(c.task.reveal_frame, 6);
  EXPECT_EQ(c.mode, ObservationMode::est_pose);
  EXPECT_EQ(c.hidden_width, 40);
  EXPECT_EQ(c.epochs, 3);
  EXPECT_EQ(c.train_seed, 9u);
  EXPECT_EQ(c.tracker.sigma_pos, 0.0);
  EXPECT_THROW(parse_config("model.colour = red\n"), std::invalid_argument);
  EXPECT_THROW(parse_config("train.epochs = many\n"), std::invalid_argument);
}

TEST(Config, TextRoundTrip) {
  ExperimentConfig c = tiny_config();
  c.mode = ObservationMode::grid_image;
  c.task = TaskSpec::stack();
  c.eval_seed = 1234;
  const ExperimentConfig back = parse_config(to_text(c));
  EXPECT_EQ(to_text(back), to_text(c));
}

TEST(Config, ValidatesHorizons) {
  ExperimentConfig c;
  c.action_horizon = c.prediction_horizon + 1;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = ExperimentConfig{};
  c.obs_horizon = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(Config, FrameWidthPerMode) {
  ExperimentConfig c;
  c.task = TaskSpec::stack();
  EXPECT_EQ(c.frame_width(), kRobotStateDim + 8 * 2);
  c.mode = ObservationMode::grid_image;
  c.grid_resolution = 16;
  EXPECT_EQ(c.frame_width(), 16 * 16 + kRobotStateDim);
}
