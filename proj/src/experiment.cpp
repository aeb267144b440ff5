#include "stcl/experiment.hpp"

#include <atomic>
#include <charconv>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "stcl/error.hpp"

namespace stcl {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

template <class C, class F>
void visit_fields(C& c, F&& f) {
  f("scene", "seed", c.scene_seed);
  f("scene", "rooms", c.scene.room_count);
  f("scene", "min_objects", c.scene.min_objects);
  f("scene", "max_objects", c.scene.max_objects);
  f("scene", "categories", c.scene.categories);
  f("scene", "width", c.scene.width);
  f("scene", "depth", c.scene.depth);
  f("scene", "wall_height", c.scene.wall_height);
  f("scene", "lighting_presets", c.scene.lighting_presets);

  f("motion", "step_len", c.motion.step_len);
  f("motion", "rot_step", c.motion.rot_step);
  f("motion", "jump_height", c.motion.jump_height);
  f("motion", "jump_steps", c.motion.jump_steps);
  f("motion", "agent_radius", c.motion.agent_radius);
  f("motion", "eye_height", c.motion.eye_height);
  f("motion", "dt", c.motion.dt);

  for (std::size_t i = 0; i < kNavCommandCount; ++i)
    f("walk", std::string(to_string(static_cast<NavCommand>(i))), c.walk.probabilities[i]);
  f("walk", "persistence", c.walk.persistence);

  f("trajectory", "train_frames", c.train_frames);
  f("trajectory", "train_seed", c.train_walk_seed);
  f("trajectory", "test_frames", c.test_frames);
  f("trajectory", "test_seed", c.test_walk_seed);
  f("trajectory", "light_base", c.light_base);
  f("trajectory", "light_period", c.light_period);

  f("render", "width", c.render.width);
  f("render", "height", c.render.height);
  f("render", "fov", c.render.fov_deg);

  f("augment", "crop_scale_lo", c.augment.crop_scale_lo);
  f("augment", "crop_scale_hi", c.augment.crop_scale_hi);
  f("augment", "flip_prob", c.augment.flip_prob);
  f("augment", "jitter", c.augment.jitter_strength);
  f("augment", "grayscale_prob", c.augment.grayscale_prob);
  f("augment", "output_size", c.augment.output_size);

  f("encoder", "conv_channels", c.conv_channels);
  f("encoder", "hidden_dim", c.hidden_dim);
  f("encoder", "feat_dim", c.feat_dim);

  f("pairing", "mode", c.mode);
  f("pairing", "t_max", c.t_max);
  f("pairing", "d_max", c.d_max);
  f("pairing", "a_max", c.a_max);

  f("train", "epochs", c.epochs);
  f("train", "batch_size", c.batch_size);
  f("train", "lr", c.lr);
  f("train", "sgd_momentum", c.sgd_momentum);
  f("train", "key_momentum", c.key_momentum);
  f("train", "queue_size", c.queue_size);
  f("train", "tau", c.tau);
  f("train", "denominator", c.denominator);
  f("train", "max_steps", c.max_steps);
  f("train", "seed", c.seed);

  f("probe", "epochs", c.probe.epochs);
  f("probe", "lr", c.probe.lr);
  f("probe", "batch_size", c.probe.batch_size);
  f("probe", "min_fraction", c.probe.min_fraction);
  f("probe", "seed", c.probe.seed);

  f("output", "dir", c.out_dir);
  f("output", "jobs", c.jobs);
}

std::string format_value(const std::string& v) { return v; }
std::string format_value(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}
std::string format_value(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}
template <class T>
  requires std::is_integral_v<T>
std::string format_value(T v) {
  return std::to_string(v);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& text) {
  throw ConfigError(key + ": invalid value '" + text + "'");
}

template <class T>
  requires std::is_arithmetic_v<T>
void parse_value(const std::string& key, const std::string& text, T& out) {
  T v{};
  const char* end = text.data() + text.size();
  const auto r = std::from_chars(text.data(), end, v);
  if (r.ec != std::errc() || r.ptr != end) bad_value(key, text);
  out = v;
}
void parse_value(const std::string&, const std::string& text, std::string& out) { out = text; }
void parse_value(const std::string& key, const std::string& text, std::vector<int>& out) {
  std::vector<int> v;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    int x = 0;
    parse_value(key, item, x);
    v.push_back(x);
  }
  if (v.empty()) bad_value(key, text);
  out = std::move(v);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r\n") - b + 1);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << text;
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  ExperimentConfig c;
  visit_fields(c, [&](const std::string& s, const std::string& k, auto&) { keys.push_back(s + "." + k); });
  return keys;
}

std::string to_ini(const ExperimentConfig& config) {
  std::string out;
  std::string section;
  ExperimentConfig c = config;
  visit_fields(c, [&](const std::string& s, const std::string& k, auto& v) {
    if (s != section) {
      out += (section.empty() ? "[" : "\n[") + s + "]\n";
      section = s;
    }
    out += k + " = " + format_value(v) + "\n";
  });
  return out;
}

ExperimentConfig config_from_ini(const std::string& text) {
  boost::property_tree::ptree tree;
  std::istringstream in(text);
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(std::string("config syntax error: ") + e.what());
  }
  const auto known = config_keys();
  const std::set<std::string> known_set(known.begin(), known.end());
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw ConfigError("config key '" + section + "' is outside any section");
    for (const auto& [key, value] : body)
      if (!known_set.count(section + "." + key)) throw ConfigError("unknown config key " + section + "." + key);
  }
  ExperimentConfig c;
  visit_fields(c, [&](const std::string& s, const std::string& k, auto& v) {
    if (const auto node = tree.get_child_optional(boost::property_tree::ptree::path_type(s + "\x1f" + k, '\x1f')))
      parse_value(s + "." + k, trim(node->data()), v);
  });
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_ini(ss.str());
}

void save_config(const ExperimentConfig& config, const std::string& path) { write_text(path, to_ini(config)); }

void apply_override(ExperimentConfig& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("override '" + assignment + "' is not of the form section.key=value");
  const std::string name = trim(assignment.substr(0, eq));
  const std::string value = trim(assignment.substr(eq + 1));
  bool found = false;
  visit_fields(config, [&](const std::string& s, const std::string& k, auto& v) {
    if (s + "." + k == name) {
      parse_value(name, value, v);
      found = true;
    }
  });
  if (!found) throw ConfigError("unknown config key " + name);
}

PairingMode ExperimentConfig::pairing(const std::string& mode_key) const {
  return make_mode(mode_key, t_max, d_max, a_max);
}

TrainConfig ExperimentConfig::train_config(const std::string& mode_key, std::uint64_t run_seed) const {
  TrainConfig t;
  t.epochs = epochs;
  t.batch_size = batch_size;
  t.lr = lr;
  t.sgd_momentum = sgd_momentum;
  t.key_momentum = key_momentum;
  t.queue_size = queue_size;
  t.loss.tau = tau;
  t.loss.denominator = parse_denominator(denominator);
  t.pairing = pairing(mode_key);
  t.augment = augment;
  t.arch.input_size = augment.output_size;
  t.arch.in_channels = 3;
  t.arch.conv_channels = conv_channels;
  t.arch.hidden_dim = hidden_dim;
  t.arch.feat_dim = feat_dim;
  t.seed = run_seed;
  t.max_steps = max_steps;
  return t;
}

void ExperimentConfig::validate() const {
  scene.validate();
  motion.validate();
  walk.validate();
  render.validate();
  if (train_frames < 1 || test_frames < 1) throw ConfigError("trajectory frame counts must be >= 1");
  if (train_walk_seed == test_walk_seed) throw ConfigError("train and test trajectories need different seeds");
  if (light_period < 0) throw ConfigError("trajectory.light_period must be >= 0");
  if (light_base < 0 || light_base >= scene.lighting_presets)
    throw ConfigError("trajectory.light_base must name an existing lighting preset");
  train_config(mode, seed).validate();
  probe.validate();
  if (jobs < 1) throw ConfigError("output.jobs must be >= 1");
}

Scene build_scene(const ExperimentConfig& config) { return generate_scene(config.scene_seed, config.scene); }

Trajectory build_trajectory(const ExperimentConfig& config, const Scene& scene, bool test) {
  Trajectory t = random_walk(scene, test ? config.test_walk_seed : config.train_walk_seed,
                             test ? config.test_frames : config.train_frames, config.motion, config.walk);
  t.lighting_schedule = lighting_schedule(t.poses.size(), config.light_base, config.light_period,
                                          static_cast<int>(scene.lighting_presets.size()));
  return t;
}

Dataset build_dataset(const ExperimentConfig& config, const Scene& scene, bool test) {
  return replay(scene, build_trajectory(config, scene, test), config.render, config.jobs);
}

FloatImage probe_view(const Image& frame, int size) {
  AugmentDraw d;
  const int side = std::min(frame.width, frame.height);
  d.crop_side = side;
  d.crop_x = (frame.width - side) / 2.0;
  d.crop_y = (frame.height - side) / 2.0;
  AugmentConfig cfg;
  cfg.output_size = size;
  return apply_augment(frame, d, cfg);
}

ProbeSplit probe_split(const nn::ParamSet<float>& params, const Dataset& ds, const ProbeConfig& config) {
  const auto labels = derive_labels(ds.labels, ds.scene.category_count, config.min_fraction);
  const std::size_t len = params.arch().input_len();
  ProbeSplit s;
  s.dim = static_cast<std::size_t>(params.arch().pooled_dim());
  constexpr std::size_t kChunk = 64;
  for (std::size_t start = 0; start < ds.size(); start += kChunk) {
    const std::size_t n = std::min(kChunk, ds.size() - start);
    std::vector<float> in(n * len);
    for (std::size_t b = 0; b < n; ++b) {
      const FloatImage v = probe_view(ds.frames[start + b], params.arch().input_size);
      std::copy(v.data.begin(), v.data.end(), in.begin() + static_cast<std::ptrdiff_t>(b * len));
    }
    const auto f = nn::pooled_features<float>(params, in);
    s.features.insert(s.features.end(), f.begin(), f.end());
  }
  for (const auto& l : labels) s.labels.push_back(l.label);
  return s;
}

namespace {
json run_meta(const TrainConfig& tc, const std::string& mode_key) {
  json meta;
  meta["mode"] = mode_key;
  meta["model"] = mode_label(tc.pairing);
  meta["seed"] = tc.seed;
  if (const auto* t = std::get_if<TimeMode>(&tc.pairing)) meta["pairing"] = {{"t_max", t->t_max}};
  if (const auto* s = std::get_if<SpaceMode>(&tc.pairing)) meta["pairing"] = {{"d_max", s->d_max}, {"a_max", s->a_max}};
  meta["denominator"] = to_string(tc.loss.denominator);
  meta["tau"] = tc.loss.tau;
  meta["key_momentum"] = tc.key_momentum;
  meta["queue_size"] = tc.queue_size;
  meta["optimizer"] = {{"type", "sgd"}, {"lr", tc.lr}, {"momentum", tc.sgd_momentum}, {"schedule", "constant"}};
  meta["backbone"] = tc.arch.to_json();
  return meta;
}
}  // namespace

nn::ParamSet<float> pretrain(const ExperimentConfig& config, const std::string& mode_key, std::uint64_t run_seed,
                             const Dataset& train, const std::string& run_dir) {
  const TrainConfig tc = config.train_config(mode_key, run_seed);
  const auto metas = frame_metas(train.trajectory.poses);
  Trainer trainer(tc, train.frames, metas);

  std::ofstream metrics;
  if (!run_dir.empty()) {
    fs::create_directories(run_dir);
    ExperimentConfig resolved = config;
    resolved.mode = mode_key;
    resolved.seed = run_seed;
    save_config(resolved, (fs::path(run_dir) / "config.ini").string());
    metrics.open(fs::path(run_dir) / "metrics.jsonl", std::ios::binary);
    if (!metrics) throw IoError("cannot write metrics in " + run_dir);
  }
  trainer.run([&](const StepMetrics& m) {
    if (metrics.is_open()) metrics << m.to_json_line() << '\n';
  });
  if (!run_dir.empty()) {
    const json meta = run_meta(tc, mode_key);
    trainer.save_checkpoint((fs::path(run_dir) / "checkpoint.ckpt").string(), meta);
    write_text((fs::path(run_dir) / "run.json").string(), meta.dump(2) + "\n");
  }
  return trainer.state().query;
}

RunOutcome pretrain_and_probe(const ExperimentConfig& config, const std::string& mode_key, std::uint64_t run_seed,
                              std::uint64_t probe_seed, const Dataset& train, const Dataset& test,
                              const std::string& run_dir) {
  const nn::ParamSet<float> encoder = pretrain(config, mode_key, run_seed, train, run_dir);
  const std::uint64_t before = encoder.checksum();
  ProbeConfig pc = config.probe;
  pc.seed = probe_seed;
  const ProbeSplit a = probe_split(encoder, train, pc);
  ProbeSplit b = probe_split(encoder, test, pc);
  const std::size_t dropped = drop_unseen_classes(a, b);
  RunOutcome out;
  out.mode = mode_key;
  out.seed = run_seed;
  out.accuracy = linear_probe(a, b, train.scene.category_count + 1, pc);
  out.encoder_checksum = encoder.checksum();
  if (out.encoder_checksum != before) throw Error("probe modified the encoder parameters");

  if (!run_dir.empty()) {
    json meta = run_meta(config.train_config(mode_key, run_seed), mode_key);
    meta["top1"] = out.accuracy;
    meta["probe"] = {{"protocol", "frozen linear probe"},
                     {"features", "pooled backbone output"},
                     {"epochs", pc.epochs},
                     {"lr", pc.lr},
                     {"seed", pc.seed},
                     {"min_fraction", pc.min_fraction},
                     {"test_split", "separate trajectory"},
                     {"test_examples", b.size()},
                     {"test_dropped_unseen_class", dropped}};
    write_text((fs::path(run_dir) / "run.json").string(), meta.dump(2) + "\n");
  }
  return out;
}

std::vector<ProbeResult> evaluate(const ExperimentConfig& config, const std::vector<std::string>& modes, int runs,
                                  const Dataset& train, const Dataset& test, const std::string& out_dir,
                                  const std::function<void(const RunOutcome&)>& on_run) {
  if (runs < 1) throw ConfigError("runs must be >= 1");
  if (modes.empty()) throw ConfigError("at least one mode is required");
  for (const auto& m : modes) config.pairing(m);

  struct Task {
    std::size_t mode;
    int run;
  };
  std::vector<Task> tasks;
  for (std::size_t m = 0; m < modes.size(); ++m)
    for (int r = 0; r < runs; ++r) tasks.push_back({m, r});
  std::vector<std::vector<double>> acc(modes.size(), std::vector<double>(static_cast<std::size_t>(runs)));

  std::atomic<std::size_t> next{0};
  std::mutex mu;
  std::exception_ptr failure;
  auto worker = [&] {
    for (std::size_t t = next++; t < tasks.size(); t = next++) {
      {
        std::lock_guard lock(mu);
        if (failure) return;
      }
      const Task& task = tasks[t];
      const std::uint64_t seed = config.seed + static_cast<std::uint64_t>(task.run);
      const std::uint64_t probe_seed = config.probe.seed + static_cast<std::uint64_t>(task.run);
      std::string dir;
      if (!out_dir.empty())
        dir = (fs::path(out_dir) / modes[task.mode] / ("seed_" + std::to_string(seed))).string();
      try {
        const RunOutcome o = pretrain_and_probe(config, modes[task.mode], seed, probe_seed, train, test, dir);
        std::lock_guard lock(mu);
        acc[task.mode][static_cast<std::size_t>(task.run)] = o.accuracy;
        if (on_run) on_run(o);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const int n_threads = std::max(1, std::min<int>(config.jobs, static_cast<int>(tasks.size())));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  std::vector<ProbeResult> rows;
  for (std::size_t m = 0; m < modes.size(); ++m)
    rows.push_back(ProbeResult::from_runs(mode_label(config.pairing(modes[m])), acc[m]));
  return rows;
}

}  // namespace stcl
