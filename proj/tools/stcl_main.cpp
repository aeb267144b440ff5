// stcl: command-line driver for scene generation, recording, dataset
// rendering, pretraining and probing.
//
// Exit codes: 0 ok, 1 internal failure, 2 configuration or missing input,
// 3 generation failure, 4 network, 64 usage.

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "stcl/error.hpp"
#include "stcl/experiment.hpp"
#include "stcl/kernels.hpp"
#include "stcl/recorder.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace stcl;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitGeneration = 3;
constexpr int kExitNetwork = 4;
constexpr int kExitUsage = 64;

RecorderServer* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string kernels;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "Experiment config file (INI)");
  cmd->add_option("--set", c.overrides, "Override a config value: section.key=value");
  cmd->add_option("--kernels", c.kernels, "Kernel backend: scalar|avx2");
}

ExperimentConfig resolve(const Common& c) {
  ExperimentConfig cfg;
  if (!c.config_path.empty()) {
    if (!fs::exists(c.config_path)) throw ConfigError("missing input: " + c.config_path);
    cfg = load_config(c.config_path);
  }
  for (const auto& o : c.overrides) apply_override(cfg, o);
  if (!c.kernels.empty()) {
    bool ok = false;
    for (auto b : kernels::available_backends())
      if (kernels::backend_name(b) == c.kernels) {
        kernels::set_backend(b);
        ok = true;
      }
    if (!ok) throw ConfigError("kernel backend '" + c.kernels + "' is not available");
  }
  return cfg;
}

void require_path(const std::string& path) {
  if (!fs::exists(path)) throw ConfigError("missing input: " + path);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

std::vector<std::string> split_modes(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

Dataset load_dataset_checked(const std::string& dir) {
  require_path(dir);
  require_path((fs::path(dir) / "manifest.json").string());
  return load_dataset(dir);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spatiotemporal contrastive pretraining toolkit"};
  app.require_subcommand(1);
  Common common;

  // gen-scene
  auto* gen = app.add_subcommand("gen-scene", "Generate a procedural scene");
  std::int64_t gen_seed = 0;
  std::string gen_out;
  gen->add_option("--seed", gen_seed, "Scene seed")->required();
  gen->add_option("--out", gen_out, "Output directory")->required();
  add_common(gen, common);

  // record
  auto* rec = app.add_subcommand("record", "Record an algorithmic random-walk trajectory");
  std::string rec_scene, rec_out;
  int rec_steps = 0;
  std::uint64_t rec_seed = 0;
  rec->add_option("--scene", rec_scene, "Scene JSON")->required();
  rec->add_option("--steps", rec_steps, "Number of poses")->required();
  rec->add_option("--seed", rec_seed, "Walk seed")->required();
  rec->add_option("--out", rec_out, "Output directory")->required();
  add_common(rec, common);

  // serve
  auto* srv = app.add_subcommand("serve", "Serve the interactive recorder over WebSocket");
  std::string srv_scene, srv_out, srv_address = "127.0.0.1";
  unsigned short srv_port = 8765;
  bool srv_once = false;
  std::uint64_t srv_seed = 0;
  srv->add_option("--scene", srv_scene, "Scene JSON")->required();
  srv->add_option("--port", srv_port, "TCP port")->required();
  srv->add_option("--out", srv_out, "Directory for recorded trajectories")->required();
  srv->add_option("--address", srv_address, "Listen address");
  srv->add_option("--seed", srv_seed, "Seed for the start pose");
  srv->add_flag("--once", srv_once, "Exit after the first session ends");
  add_common(srv, common);

  // render-dataset
  auto* rd = app.add_subcommand("render-dataset", "Render frames and category maps for a trajectory");
  std::string rd_scene, rd_traj, rd_out;
  rd->add_option("--scene", rd_scene, "Scene JSON")->required();
  rd->add_option("--trajectory", rd_traj, "Trajectory JSON lines")->required();
  rd->add_option("--out", rd_out, "Dataset directory")->required();
  add_common(rd, common);

  // pretrain
  auto* pt = app.add_subcommand("pretrain", "Momentum-contrast pretraining on a rendered dataset");
  std::string pt_mode, pt_dataset, pt_out;
  std::optional<std::uint64_t> pt_seed;
  pt->add_option("--mode", pt_mode, "standard|time|space")->required();
  pt->add_option("--dataset", pt_dataset, "Dataset directory")->required();
  pt->add_option("--out", pt_out, "Run directory")->required();
  pt->add_option("--seed", pt_seed, "Run seed (default: train.seed)");
  add_common(pt, common);

  // probe
  auto* pr = app.add_subcommand("probe", "Linear probe on frozen encoder features");
  std::string pr_ckpt, pr_train, pr_test, pr_out;
  pr->add_option("--checkpoint", pr_ckpt, "Checkpoint written by pretrain")->required();
  pr->add_option("--train", pr_train, "Training dataset directory")->required();
  pr->add_option("--test", pr_test, "Test dataset directory")->required();
  pr->add_option("--out", pr_out, "Output directory")->required();
  add_common(pr, common);

  // compare
  auto* cmp = app.add_subcommand("compare", "Pretrain and probe every mode over several seeds");
  std::string cmp_modes = "standard,time,space", cmp_out, cmp_train, cmp_test;
  int cmp_runs = 3;
  std::optional<int> cmp_jobs;
  cmp->add_option("--modes", cmp_modes, "Comma-separated modes");
  cmp->add_option("--runs", cmp_runs, "Runs per mode");
  cmp->add_option("--out", cmp_out, "Output directory")->required();
  cmp->add_option("--train", cmp_train, "Existing training dataset (default: render from config)");
  cmp->add_option("--test", cmp_test, "Existing test dataset (default: render from config)");
  cmp->add_option("--jobs", cmp_jobs, "Parallel runs");
  add_common(cmp, common);

  // pairs
  auto* pa = app.add_subcommand("pairs", "Write the positive-pair manifest of a dataset");
  std::string pa_dataset, pa_mode, pa_out;
  bool pa_all = false;
  std::uint64_t pa_seed = 0;
  pa->add_option("--dataset", pa_dataset, "Dataset directory")->required();
  pa->add_option("--mode", pa_mode, "standard|time|space")->required();
  pa->add_option("--out", pa_out, "Output JSON-lines file")->required();
  pa->add_flag("--all", pa_all, "List every admissible pair instead of one sampled positive");
  pa->add_option("--seed", pa_seed, "Sampling seed");
  add_common(pa, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    ExperimentConfig cfg = resolve(common);

    if (*gen) {
      cfg.scene_seed = gen_seed;
      cfg.validate();
      const Scene scene = build_scene(cfg);
      fs::create_directories(gen_out);
      save_scene(scene, (fs::path(gen_out) / "scene.json").string());
      save_config(cfg, (fs::path(gen_out) / "config.ini").string());
      std::cout << (fs::path(gen_out) / "scene.json").string() << "\n";
    } else if (*rec) {
      require_path(rec_scene);
      if (rec_steps < 1) throw ConfigError("--steps must be >= 1");
      cfg.train_frames = rec_steps;
      cfg.train_walk_seed = rec_seed;
      if (cfg.test_walk_seed == rec_seed) cfg.test_walk_seed = rec_seed + 1;
      const Scene scene = load_scene(rec_scene);
      cfg.scene_seed = scene.seed;
      cfg.validate();
      const Trajectory t = build_trajectory(cfg, scene, false);
      fs::create_directories(rec_out);
      save_trajectory(t, (fs::path(rec_out) / "trajectory.jsonl").string());
      save_config(cfg, (fs::path(rec_out) / "config.ini").string());
      std::cout << (fs::path(rec_out) / "trajectory.jsonl").string() << "\n";
    } else if (*srv) {
      require_path(srv_scene);
      cfg.validate();
      RecorderOptions o;
      o.address = srv_address;
      o.port = srv_port;
      o.out_dir = srv_out;
      o.render = cfg.render;
      o.motion = cfg.motion;
      o.start_seed = srv_seed;
      o.light = cfg.light_base;
      o.once = srv_once;
      RecorderServer server(load_scene(srv_scene), o);
      fs::create_directories(srv_out);
      save_config(cfg, (fs::path(srv_out) / "config.ini").string());
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cout << "listening on ws://" << srv_address << ":" << server.port() << "/session" << std::endl;
      server.run();
      g_server = nullptr;
      for (const auto& f : server.written_files()) std::cout << f << "\n";
    } else if (*rd) {
      require_path(rd_scene);
      require_path(rd_traj);
      cfg.validate();
      const Scene scene = load_scene(rd_scene);
      const Trajectory t = load_trajectory(rd_traj, cfg.motion.dt);
      const Dataset ds = replay(scene, t, cfg.render, cfg.jobs);
      save_dataset(ds, rd_out);
      save_config(cfg, (fs::path(rd_out) / "config.ini").string());
      std::cout << rd_out << ": " << ds.size() << " frames\n";
    } else if (*pt) {
      cfg.mode = pt_mode;
      if (pt_seed) cfg.seed = *pt_seed;
      cfg.validate();
      const Dataset ds = load_dataset_checked(pt_dataset);
      pretrain(cfg, pt_mode, cfg.seed, ds, pt_out);
      std::cout << (fs::path(pt_out) / "checkpoint.ckpt").string() << "\n";
    } else if (*pr) {
      require_path(pr_ckpt);
      cfg.validate();
      const Dataset train = load_dataset_checked(pr_train);
      const Dataset test = load_dataset_checked(pr_test);
      const nn::ParamSet<float> encoder = nn::import_params(nn::read_tensor_file(pr_ckpt), "query.");
      const ProbeSplit a = probe_split(encoder, train, cfg.probe);
      ProbeSplit b = probe_split(encoder, test, cfg.probe);
      const std::size_t dropped = drop_unseen_classes(a, b);
      const double acc = linear_probe(a, b, train.scene.category_count + 1, cfg.probe);
      const auto file = nn::read_tensor_file(pr_ckpt);
      const std::string model = file.meta.value("model", std::string("encoder"));
      const ProbeResult r = ProbeResult::from_runs(model, {acc});
      fs::create_directories(pr_out);
      json meta = {{"checkpoint", pr_ckpt},
                   {"protocol", "frozen linear probe"},
                   {"features", "pooled backbone output"},
                   {"test_dropped_unseen_class", dropped}};
      write_text(fs::path(pr_out) / "probe.json", results_json({r}, meta).dump(2) + "\n");
      save_config(cfg, (fs::path(pr_out) / "config.ini").string());
      std::cout << results_table({r});
    } else if (*cmp) {
      if (cmp_jobs) cfg.jobs = *cmp_jobs;
      cfg.validate();
      const auto modes = split_modes(cmp_modes);
      fs::create_directories(cmp_out);
      save_config(cfg, (fs::path(cmp_out) / "config.ini").string());
      Dataset train, test;
      if (!cmp_train.empty() || !cmp_test.empty()) {
        if (cmp_train.empty() || cmp_test.empty()) throw ConfigError("--train and --test must be given together");
        train = load_dataset_checked(cmp_train);
        test = load_dataset_checked(cmp_test);
      } else {
        const Scene scene = build_scene(cfg);
        train = build_dataset(cfg, scene, false);
        test = build_dataset(cfg, scene, true);
      }
      const auto rows = evaluate(cfg, modes, cmp_runs, train, test, cmp_out, [](const RunOutcome& o) {
        std::cerr << o.mode << " seed " << o.seed << ": top-1 " << o.accuracy << "%\n";
      });
      json meta = {{"probe", "frozen linear probe on pooled backbone features"},
                   {"test_split", "separate trajectory"},
                   {"runs", cmp_runs},
                   {"base_seed", cfg.seed}};
      write_text(fs::path(cmp_out) / "results.json", results_json(rows, meta).dump(2) + "\n");
      write_text(fs::path(cmp_out) / "results.txt", results_table(rows));
      std::cout << results_table(rows);
    } else if (*pa) {
      const Dataset ds = load_dataset_checked(pa_dataset);
      const PairingMode mode = cfg.pairing(pa_mode);
      const auto metas = frame_metas(ds.trajectory.poses);
      Rng rng(pa_seed);
      if (const auto parent = fs::path(pa_out).parent_path(); !parent.empty()) fs::create_directories(parent);
      write_text(pa_out, pair_manifest(mode, metas, rng, pa_all));
    }
  } catch (const PlacementError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitGeneration;
  } catch (const NetworkError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNetwork;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
