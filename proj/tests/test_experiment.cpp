#include <doctest.h>

#include "stcl/error.hpp"
#include "stcl/experiment.hpp"
#include "test_support.hpp"

using namespace stcl;

TEST_CASE("config: INI round trip") {
  ExperimentConfig c;
  c.conv_channels = {8, 16};
  c.lr = 0.0125;
  c.mode = "space";
  c.denominator = "with_positive";
  c.walk.probabilities[0] = 0.5;
  c.probe.seed = 77;
  const auto text = to_ini(c);
  CHECK(config_from_ini(text) == c);

  TempDir dir("cfg");
  save_config(c, dir / "config.ini");
  CHECK(load_config(dir / "config.ini") == c);
  CHECK_THROWS_AS(load_config(dir / "missing.ini"), ConfigError);
}

TEST_CASE("config: parsing rules") {
  CHECK(config_from_ini("") == ExperimentConfig{});
  CHECK(config_from_ini("# comment\n[train]\nlr = 0.2\n").lr == 0.2);
  CHECK_THROWS_AS(config_from_ini("[train]\nlearning_rate = 0.2\n"), ConfigError);
  CHECK_THROWS_AS(config_from_ini("[nope]\nx = 1\n"), ConfigError);
  CHECK_THROWS_AS(config_from_ini("lr = 0.2\n"), ConfigError);
  CHECK_THROWS_AS(config_from_ini("[train]\nepochs = many\n"), ConfigError);
}

TEST_CASE("config: overrides and keys") {
  ExperimentConfig c;
  apply_override(c, "train.tau=0.07");
  apply_override(c, "encoder.conv_channels=4,8,16");
  apply_override(c, "pairing.mode=time");
  CHECK(c.tau == 0.07);
  CHECK(c.conv_channels == std::vector<int>{4, 8, 16});
  CHECK(c.mode == "time");
  CHECK_THROWS_AS(apply_override(c, "train.tau"), ConfigError);
  CHECK_THROWS_AS(apply_override(c, "train.nothing=1"), ConfigError);

  const auto keys = config_keys();
  CHECK(keys.front() == "scene.seed");
  CHECK(keys.back() == "output.jobs");
  CHECK(std::find(keys.begin(), keys.end(), "train.denominator") != keys.end());
  CHECK(std::find(keys.begin(), keys.end(), "walk.persistence") != keys.end());
}

TEST_CASE("config: validation") {
  ExperimentConfig c;
  CHECK_NOTHROW(c.validate());
  auto bad = c;
  bad.test_walk_seed = bad.train_walk_seed;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.mode = "spacetime";
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.denominator = "all";
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.jobs = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.probe.min_fraction = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);

  const auto t = c.train_config("space", 9);
  CHECK(t.seed == 9);
  CHECK(std::holds_alternative<SpaceMode>(t.pairing));
  CHECK(std::holds_alternative<StandardMode>(c.pairing("standard")));
}

TEST_CASE("pipeline: probe views and small pretrain") {
  ExperimentConfig c;
  c.render.width = c.render.height = 24;
  c.train_frames = 32;
  c.test_frames = 16;
  c.conv_channels = {4, 8};
  c.hidden_dim = 16;
  c.feat_dim = 8;
  c.augment.output_size = 16;
  c.batch_size = 8;
  c.queue_size = 16;
  c.epochs = 1;
  c.probe.epochs = 2;
  c.t_max = 0.05;  // keep negatives available in a 32-frame walk
  const Scene scene = build_scene(c);
  const auto train = build_dataset(c, scene, false), test = build_dataset(c, scene, true);
  CHECK(train.frames.size() == 32);
  CHECK(test.frames.size() == 16);
  CHECK_FALSE(train.trajectory.poses == test.trajectory.poses);

  const auto v = probe_view(train.frames[0], 16);
  CHECK(v.width == 16);
  CHECK(v.height == 16);

  TempDir dir("pipe");
  const auto out = pretrain_and_probe(c, "time", 3, 0, train, test, dir / "run");
  CHECK(out.accuracy >= 0.0);
  CHECK(out.accuracy <= 100.0);
  for (const char* f : {"config.ini", "metrics.jsonl", "checkpoint.ckpt", "run.json"})
    CHECK(std::filesystem::exists(std::filesystem::path(dir / "run") / f));
  CHECK(load_config(dir / "run/config.ini").mode == "time");
  const auto again = pretrain_and_probe(c, "time", 3, 0, train, test, "");
  CHECK(again.encoder_checksum == out.encoder_checksum);
  CHECK(again.accuracy == out.accuracy);
}
