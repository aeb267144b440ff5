#include <doctest.h>

#include <cmath>

#include "stcl/error.hpp"
#include "stcl/probe.hpp"
#include "stcl/rng.hpp"

using namespace stcl;

namespace {

CategoryMap map_of(std::vector<int> ids) {
  CategoryMap m(static_cast<int>(ids.size()), 1);
  m.ids = std::move(ids);
  return m;
}

ProbeSplit clusters(int classes, std::size_t per_class, double spread, Rng& rng) {
  ProbeSplit s;
  s.dim = 4;
  for (int c = 0; c < classes; ++c)
    for (std::size_t i = 0; i < per_class; ++i) {
      s.labels.push_back(c);
      for (std::size_t d = 0; d < s.dim; ++d)
        s.features.push_back((d == static_cast<std::size_t>(c) % s.dim ? 3.0 * (1 + c / 4) : 0.0) + spread * rng.normal());
    }
  return s;
}

}  // namespace

TEST_CASE("view label: plurality, ties, background") {
  CHECK(view_label(map_of({0, 0, 1, -1}), 3, 0.15) == 0);
  CHECK(view_label(map_of({2, 1, 2, 1, -1, -1}), 3, 0.15) == 1);  // tie goes to the smaller id
  CHECK(view_label(map_of({-1, -1, -1, -1, -1, -1, -1, 2}), 3, 0.15) == 3);  // 12.5% < 15%
  CHECK(view_label(map_of({-1, -1, -1, -1, -1, 2}), 3, 0.15) == 2);
  CHECK(view_label(map_of({-1, -1}), 3, 0.15) == 3);
  CHECK_THROWS_AS(view_label(map_of({5}), 3, 0.15), ValidationError);
  CHECK_THROWS_AS(view_label(CategoryMap{}, 3, 0.15), ValidationError);

  const std::vector<CategoryMap> maps{map_of({1, 1}), map_of({-1, -1})};
  const auto labels = derive_labels(maps, 2, 0.5);
  REQUIRE(labels.size() == 2);
  CHECK(labels[0].frame == 0);
  CHECK(labels[0].label == 1);
  CHECK(labels[1].label == 2);
  CHECK_THROWS_AS(derive_labels(maps, 2, 1.0), ConfigError);
}

TEST_CASE("linear probe separates clusters and respects train classes") {
  Rng rng(5);
  const auto train = clusters(4, 60, 0.3, rng), test = clusters(4, 40, 0.3, rng);
  ProbeConfig cfg;
  CHECK(linear_probe(train, test, 4, cfg) == doctest::Approx(100.0));
  CHECK(linear_probe(train, test, 4, cfg) == linear_probe(train, test, 4, cfg));

  ProbeSplit partial;
  partial.dim = train.dim;
  for (std::size_t i = 0; i < train.size(); ++i)
    if (train.labels[i] != 2) {
      partial.labels.push_back(train.labels[i]);
      partial.features.insert(partial.features.end(), train.features.begin() + static_cast<long>(i * 4),
                              train.features.begin() + static_cast<long>(i * 4 + 4));
    }
  CHECK_THROWS_AS(linear_probe(partial, test, 4, cfg), ValidationError);

  auto filtered = test;
  CHECK(drop_unseen_classes(partial, filtered) == 40);
  CHECK(filtered.size() == 120);
  CHECK(filtered.features.size() == 120 * 4);
  for (int l : filtered.labels) CHECK(l != 2);
  // Kept rows keep their own features.
  CHECK(filtered.features[0] == test.features[0]);
  CHECK(filtered.features[80 * 4] == test.features[120 * 4]);
  CHECK(linear_probe(partial, filtered, 4, cfg) == doctest::Approx(100.0));
  CHECK(drop_unseen_classes(train, filtered) == 0);

  auto bad = test;
  bad.dim = 3;
  CHECK_THROWS_AS(linear_probe(train, bad, 4, cfg), ShapeError);
  cfg.lr = 0.0;
  CHECK_THROWS_AS(linear_probe(train, test, 4, cfg), ConfigError);
}

TEST_CASE("constant features do not break z-scoring") {
  ProbeSplit s;
  s.dim = 2;
  for (int i = 0; i < 20; ++i) {
    s.labels.push_back(i % 2);
    s.features.push_back(1.0);
    s.features.push_back(i % 2 ? 1.0 : -1.0);
  }
  CHECK(linear_probe(s, s, 2, ProbeConfig{}) == doctest::Approx(100.0));
}

TEST_CASE("results: aggregation, json, table") {
  const auto r = ProbeResult::from_runs("Space", {80.0, 82.0, 84.0});
  CHECK(r.mean == doctest::Approx(82.0));
  CHECK(r.std_dev == doctest::Approx(2.0));  // sample std
  CHECK_FALSE(r.single_run);
  const auto one = ProbeResult::from_runs("Time", {70.0});
  CHECK(one.single_run);
  CHECK(one.std_dev == 0.0);
  CHECK_THROWS_AS(ProbeResult::from_runs("x", {}), ConfigError);

  const auto j = results_json({r, one}, {{"note", "t"}});
  CHECK(j["rows"][0]["N"] == 3);
  CHECK(j["rows"][1]["single_run"] == true);
  CHECK_FALSE(j["rows"][0].contains("single_run"));
  CHECK(j["meta"]["note"] == "t");
  const auto back = results_from_json(nlohmann::json::parse(j.dump()));
  REQUIRE(back.size() == 2);
  CHECK(back[0].model == "Space");
  CHECK(back[0].runs == r.runs);
  CHECK(back[1].single_run);

  const auto table = results_table({r, one});
  CHECK(table.find("Model") == 0);
  CHECK(table.find("top-1 acc.") != std::string::npos);
  CHECK(table.find("Std Dev") != std::string::npos);
  CHECK(table.find("82.00") != std::string::npos);
  CHECK(table.find("(single run)") != std::string::npos);
}
