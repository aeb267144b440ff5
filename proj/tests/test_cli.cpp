#include <doctest.h>

#include <sys/wait.h>

#include <boost/asio.hpp>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "stcl/experiment.hpp"
#include "test_support.hpp"

namespace fs = std::filesystem;

namespace {

const TempDir& work() {
  static TempDir dir("cli");
  return dir;
}

int stcl_run(const std::string& args) {
  const std::string cmd = "cd '" + work().path.string() + "' && '" STCL_CLI_PATH "' " + args + " >log.txt 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string log_text() {
  std::ifstream in(work() / "log.txt");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string slurp(const std::string& rel) {
  std::ifstream in(work() / rel);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const std::string kSmall =
    " --set render.width=24 --set render.height=24 --set encoder.conv_channels=4,8 --set encoder.hidden_dim=16"
    " --set encoder.feat_dim=8 --set augment.output_size=16 --set train.batch_size=8 --set train.queue_size=16"
    " --set train.epochs=1 --set probe.epochs=2 --set trajectory.train_frames=40 --set trajectory.test_frames=20";

}  // namespace

TEST_CASE("cli: usage and configuration errors") {
  CHECK(stcl_run("") == 64);
  CHECK(stcl_run("gen-scene --out x") == 64);
  CHECK(stcl_run("bogus") == 64);
  CHECK(stcl_run("--help") == 0);
  CHECK(stcl_run("gen-scene --seed 1 --out bad --set scene.categories=1") == 2);
  CHECK(log_text().find("scene.categories") != std::string::npos);
  CHECK(stcl_run("gen-scene --seed 1 --out bad --set scene.colour=red") == 2);
  CHECK(stcl_run("gen-scene --seed 1 --out bad --config nowhere.ini") == 2);
  CHECK(stcl_run("gen-scene --seed 1 --out bad --set scene.width=3 --set scene.depth=3 --set scene.rooms=1"
                 " --set scene.min_objects=40 --set scene.max_objects=40") == 3);
  CHECK(stcl_run("render-dataset --scene none.json --trajectory none.jsonl --out ds") == 2);
  CHECK(log_text().find("none.json") != std::string::npos);
  CHECK(stcl_run("pretrain --mode space --dataset nowhere --out run") == 2);
  CHECK(log_text().find("nowhere") != std::string::npos);
}

TEST_CASE("cli: end-to-end pipeline") {
  REQUIRE(stcl_run("gen-scene --seed 3 --out scene") == 0);
  CHECK(fs::exists(work() / "scene/scene.json"));
  CHECK(fs::exists(work() / "scene/config.ini"));
  REQUIRE(stcl_run("record --scene scene/scene.json --steps 40 --seed 5 --out walk") == 0);
  REQUIRE(stcl_run("record --scene scene/scene.json --steps 20 --seed 6 --out walk_test") == 0);
  REQUIRE(stcl_run("render-dataset --scene scene/scene.json --trajectory walk/trajectory.jsonl --out train" + kSmall) ==
          0);
  REQUIRE(stcl_run("render-dataset --scene scene/scene.json --trajectory walk_test/trajectory.jsonl --out test" +
                   kSmall) == 0);
  CHECK(fs::exists(work() / "train/manifest.json"));

  REQUIRE(stcl_run("pretrain --mode space --dataset train --out run --seed 2" + kSmall) == 0);
  for (const char* f : {"config.ini", "metrics.jsonl", "checkpoint.ckpt", "run.json"})
    CHECK(fs::exists(fs::path(work() / "run") / f));
  const auto cfg = stcl::load_config(work() / "run/config.ini");
  CHECK(cfg.mode == "space");
  CHECK(cfg.seed == 2);
  CHECK(cfg.conv_channels == std::vector<int>{4, 8});

  REQUIRE(stcl_run("probe --checkpoint run/checkpoint.ckpt --train train --test test --out probe" + kSmall) == 0);
  const auto probe = nlohmann::json::parse(slurp("probe/probe.json"));
  CHECK(probe["rows"].size() == 1);
  CHECK(probe["rows"][0]["single_run"] == true);
  CHECK(probe["meta"].contains("test_dropped_unseen_class"));

  REQUIRE(stcl_run("pairs --dataset train --mode time --out pairs/time.jsonl --all") == 0);
  const auto lines = slurp("pairs/time.jsonl");
  CHECK(std::count(lines.begin(), lines.end(), '\n') > 40);

  // Every queued frame of a 40-step walk lies within the default t_max.
  CHECK(stcl_run("compare --modes time --runs 1 --train train --test test --out cmp_bad" + kSmall) == 1);
  CHECK(log_text().find("query 0 has no negatives") != std::string::npos);
  REQUIRE(stcl_run("compare --modes standard,time --runs 2 --train train --test test --out cmp --jobs 2"
                   " --set pairing.t_max=0.05" + kSmall) == 0);
  const auto results = nlohmann::json::parse(slurp("cmp/results.json"));
  REQUIRE(results["rows"].size() == 2);
  CHECK(results["rows"][0]["model"] == "Standard MoCo");
  CHECK(results["rows"][1]["N"] == 2);
  CHECK(slurp("cmp/results.txt").find("top-1 acc.") != std::string::npos);
  CHECK(stcl_run("compare --modes standard --runs 1 --train train --out cmp2" + kSmall) == 2);
}

TEST_CASE("cli: serve reports a busy port") {
  REQUIRE(stcl_run("gen-scene --seed 3 --out scene") == 0);
  boost::asio::io_context io;
  boost::asio::ip::tcp::acceptor holder(io, {boost::asio::ip::make_address("127.0.0.1"), 0});
  const auto port = holder.local_endpoint().port();
  CHECK(stcl_run("serve --scene scene/scene.json --out rec --port " + std::to_string(port)) == 4);
  CHECK(stcl_run("serve --scene missing.json --out rec --port 1") == 2);
}
