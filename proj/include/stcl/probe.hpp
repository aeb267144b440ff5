#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stcl/render.hpp"

namespace stcl {

struct ProbeConfig {
  int epochs = 30;
  double lr = 0.1;
  int batch_size = 64;
  double min_fraction = 0.15;
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const ProbeConfig&) const = default;
};

struct LabeledExample {
  std::size_t frame = 0;
  int label = 0;  // category id, or category_count for background
};

/// Most frequent category (ties to the smaller id); background when the
/// winner covers less than min_fraction of the pixels.
int view_label(const CategoryMap& map, int category_count, double min_fraction);

std::vector<LabeledExample> derive_labels(std::span<const CategoryMap> maps, int category_count, double min_fraction);

/// Row-major [n, dim] features with one label each.
struct ProbeSplit {
  std::vector<double> features;
  std::size_t dim = 0;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
};

/// Removes test examples whose class never occurs in `train`; returns how
/// many were removed.
std::size_t drop_unseen_classes(const ProbeSplit& train, ProbeSplit& test);

/// Multinomial logistic regression on z-scored features (train statistics),
/// trained by minibatch gradient descent. Returns test top-1 accuracy in
/// percent. Throws ValidationError when a test class never occurs in train.
double linear_probe(const ProbeSplit& train, const ProbeSplit& test, int class_count, const ProbeConfig& config);

struct ProbeResult {
  std::string model;
  std::vector<double> runs;  // accuracy per run, percent, in seed order
  double mean = 0.0;
  double std_dev = 0.0;  // sample std; 0 for a single run
  bool single_run = false;

  static ProbeResult from_runs(std::string model, std::vector<double> runs);
  nlohmann::json to_json() const;
};

/// {"rows":[{"model","N","top1_mean","top1_std","runs",...}], ...}
nlohmann::json results_json(const std::vector<ProbeResult>& rows, const nlohmann::json& meta = nlohmann::json::object());
std::vector<ProbeResult> results_from_json(const nlohmann::json& j);
/// Plain-text table: Model, N, top-1 acc., Std Dev.
std::string results_table(const std::vector<ProbeResult>& rows);

}  // namespace stcl
