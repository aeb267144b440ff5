#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "stcl/contrast.hpp"
#include "stcl/probe.hpp"
#include "stcl/trajectory.hpp"

namespace stcl {

/// Every knob of a run. Serialized as an INI-style file (sections of
/// key = value lines) into each output directory.
struct ExperimentConfig {
  std::int64_t scene_seed = 1;
  SceneConfig scene;
  MotionParams motion;
  WalkPolicy walk;

  int train_frames = 2000;
  std::uint64_t train_walk_seed = 101;
  int test_frames = 1000;
  std::uint64_t test_walk_seed = 202;
  int light_base = 0;
  int light_period = 0;

  RenderConfig render;
  AugmentConfig augment;

  std::vector<int> conv_channels{16, 32, 64, 128};
  int hidden_dim = 128;
  int feat_dim = 64;

  std::string mode = "standard";
  double t_max = 10.0;
  double d_max = 0.2;
  double a_max = 3.0;

  int epochs = 100;
  int batch_size = 64;
  double lr = 0.05;
  double sgd_momentum = 0.9;
  double key_momentum = 0.99;
  std::size_t queue_size = 1024;
  double tau = 0.2;
  std::string denominator = "negatives_only";
  std::int64_t max_steps = 0;
  std::uint64_t seed = 0;

  ProbeConfig probe;

  std::string out_dir = "out";
  int jobs = 1;

  void validate() const;
  bool operator==(const ExperimentConfig&) const = default;

  PairingMode pairing(const std::string& mode_key) const;
  TrainConfig train_config(const std::string& mode_key, std::uint64_t run_seed) const;
};

std::string to_ini(const ExperimentConfig& config);
/// Unknown sections or keys are errors; missing keys keep their defaults.
ExperimentConfig config_from_ini(const std::string& text);
ExperimentConfig load_config(const std::string& path);
void save_config(const ExperimentConfig& config, const std::string& path);
/// Applies "section.key=value".
void apply_override(ExperimentConfig& config, const std::string& assignment);
/// All "section.key" names, in file order.
std::vector<std::string> config_keys();

// ---- pipeline ------------------------------------------------------------

Scene build_scene(const ExperimentConfig& config);
/// `test` selects the held-out walk (its own seed and length).
Trajectory build_trajectory(const ExperimentConfig& config, const Scene& scene, bool test);
Dataset build_dataset(const ExperimentConfig& config, const Scene& scene, bool test);

/// Unaugmented encoder input for a frame (centered square, resized).
FloatImage probe_view(const Image& frame, int size);

/// Pooled backbone features and labels for every frame of a dataset.
ProbeSplit probe_split(const nn::ParamSet<float>& params, const Dataset& ds, const ProbeConfig& config);

/// Pretrains the query encoder. When `run_dir` is non-empty, writes the
/// resolved config, metrics.jsonl, checkpoint.ckpt and run.json there.
nn::ParamSet<float> pretrain(const ExperimentConfig& config, const std::string& mode_key, std::uint64_t run_seed,
                             const Dataset& train, const std::string& run_dir);

struct RunOutcome {
  std::string mode;
  std::uint64_t seed = 0;
  double accuracy = 0.0;
  std::uint64_t encoder_checksum = 0;
};

/// pretrain() followed by a linear probe; run.json gains the probe result.
RunOutcome pretrain_and_probe(const ExperimentConfig& config, const std::string& mode_key, std::uint64_t run_seed,
                              std::uint64_t probe_seed, const Dataset& train, const Dataset& test,
                              const std::string& run_dir);

/// Every mode x `runs` seeds (config.seed + r) on the same datasets and probe
/// seeds. Rows are ordered as `modes`. Runs execute on config.jobs threads.
std::vector<ProbeResult> evaluate(const ExperimentConfig& config, const std::vector<std::string>& modes, int runs,
                                  const Dataset& train, const Dataset& test, const std::string& out_dir,
                                  const std::function<void(const RunOutcome&)>& on_run = {});

}  // namespace stcl
