#include "stcl/probe.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>

#include "stcl/error.hpp"
#include "stcl/rng.hpp"

namespace stcl {

using json = nlohmann::json;

void ProbeConfig::validate() const {
  if (epochs < 1) throw ConfigError("probe.epochs must be >= 1");
  if (!(lr > 0.0)) throw ConfigError("probe.lr must be > 0");
  if (batch_size < 1) throw ConfigError("probe.batch_size must be >= 1");
  if (!(min_fraction > 0.0 && min_fraction < 1.0)) throw ConfigError("probe.min_fraction must be in (0, 1)");
}

int view_label(const CategoryMap& map, int category_count, double min_fraction) {
  if (map.ids.empty()) throw ValidationError("empty category map");
  std::vector<std::size_t> counts(static_cast<std::size_t>(category_count), 0);
  for (int id : map.ids) {
    if (id < 0) continue;
    if (id >= category_count) throw ValidationError("category id " + std::to_string(id) + " out of range");
    ++counts[static_cast<std::size_t>(id)];
  }
  int best = 0;
  for (int c = 1; c < category_count; ++c)
    if (counts[c] > counts[best]) best = c;
  const double frac = static_cast<double>(counts[best]) / static_cast<double>(map.ids.size());
  return frac >= min_fraction ? best : category_count;
}

std::vector<LabeledExample> derive_labels(std::span<const CategoryMap> maps, int category_count, double min_fraction) {
  if (category_count < 1) throw ConfigError("category_count must be >= 1");
  if (!(min_fraction > 0.0 && min_fraction < 1.0)) throw ConfigError("min_fraction must be in (0, 1)");
  std::vector<LabeledExample> out(maps.size());
  for (std::size_t i = 0; i < maps.size(); ++i) {
    if (maps[i].ids.empty()) throw ValidationError("frame " + std::to_string(i) + " has no category map");
    out[i] = {i, view_label(maps[i], category_count, min_fraction)};
  }
  return out;
}

std::size_t drop_unseen_classes(const ProbeSplit& train, ProbeSplit& test) {
  const std::set<int> seen(train.labels.begin(), train.labels.end());
  ProbeSplit kept;
  kept.dim = test.dim;
  for (std::size_t i = 0; i < test.size(); ++i) {
    if (!seen.count(test.labels[i])) continue;
    kept.labels.push_back(test.labels[i]);
    kept.features.insert(kept.features.end(), test.features.begin() + static_cast<std::ptrdiff_t>(i * test.dim),
                         test.features.begin() + static_cast<std::ptrdiff_t>((i + 1) * test.dim));
  }
  const std::size_t dropped = test.size() - kept.size();
  test = std::move(kept);
  return dropped;
}

double linear_probe(const ProbeSplit& train, const ProbeSplit& test, int class_count, const ProbeConfig& config) {
  config.validate();
  const std::size_t dim = train.dim;
  if (dim == 0 || train.features.size() != train.size() * dim || test.dim != dim ||
      test.features.size() != test.size() * dim)
    throw ShapeError("linear_probe: feature shapes are inconsistent");
  if (train.size() == 0 || test.size() == 0) throw ValidationError("linear_probe: empty split");
  const auto k = static_cast<std::size_t>(class_count);
  std::set<int> seen(train.labels.begin(), train.labels.end());
  for (int l : train.labels)
    if (l < 0 || l >= class_count) throw ValidationError("train label " + std::to_string(l) + " out of range");
  for (int l : test.labels) {
    if (l < 0 || l >= class_count) throw ValidationError("test label " + std::to_string(l) + " out of range");
    if (!seen.count(l)) throw ValidationError("class " + std::to_string(l) + " is absent from the training split");
  }

  // z-score with training statistics.
  std::vector<double> mean(dim, 0.0), inv_std(dim, 0.0);
  for (std::size_t i = 0; i < train.size(); ++i)
    for (std::size_t d = 0; d < dim; ++d) mean[d] += train.features[i * dim + d];
  for (auto& m : mean) m /= static_cast<double>(train.size());
  for (std::size_t d = 0; d < dim; ++d) {
    double v = 0.0;
    for (std::size_t i = 0; i < train.size(); ++i) {
      const double x = train.features[i * dim + d] - mean[d];
      v += x * x;
    }
    const double sd = std::sqrt(v / static_cast<double>(train.size()));
    inv_std[d] = sd > 1e-12 ? 1.0 / sd : 0.0;
  }
  auto normalize = [&](const ProbeSplit& s) {
    std::vector<double> out(s.features.size());
    for (std::size_t i = 0; i < s.size(); ++i)
      for (std::size_t d = 0; d < dim; ++d)
        out[i * dim + d] = (s.features[i * dim + d] - mean[d]) * inv_std[d];
    return out;
  };
  const std::vector<double> xtr = normalize(train);
  const std::vector<double> xte = normalize(test);

  std::vector<double> w(k * dim, 0.0), b(k, 0.0), gw(k * dim), gb(k), logits(k);
  auto scores = [&](const double* x) {
    for (std::size_t c = 0; c < k; ++c) {
      double s = b[c];
      for (std::size_t d = 0; d < dim; ++d) s += w[c * dim + d] * x[d];
      logits[c] = s;
    }
  };

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const Rng base(config.seed);
  const auto bs = static_cast<std::size_t>(config.batch_size);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    Rng r = base.child(static_cast<std::uint64_t>(epoch));
    r.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += bs) {
      const std::size_t n = std::min(bs, order.size() - start);
      std::fill(gw.begin(), gw.end(), 0.0);
      std::fill(gb.begin(), gb.end(), 0.0);
      for (std::size_t t = start; t < start + n; ++t) {
        const double* x = xtr.data() + order[t] * dim;
        scores(x);
        const double mx = *std::max_element(logits.begin(), logits.end());
        double z = 0.0;
        for (auto& l : logits) z += (l = std::exp(l - mx));
        for (std::size_t c = 0; c < k; ++c) {
          const double g = logits[c] / z - (static_cast<int>(c) == train.labels[order[t]] ? 1.0 : 0.0);
          gb[c] += g;
          for (std::size_t d = 0; d < dim; ++d) gw[c * dim + d] += g * x[d];
        }
      }
      const double step = config.lr / static_cast<double>(n);
      for (std::size_t i = 0; i < w.size(); ++i) w[i] -= step * gw[i];
      for (std::size_t c = 0; c < k; ++c) b[c] -= step * gb[c];
    }
  }

  std::size_t correct = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    scores(xte.data() + i * dim);
    const auto pred = static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin());
    correct += pred == test.labels[i] ? 1 : 0;
  }
  return 100.0 * static_cast<double>(correct) / static_cast<double>(test.size());
}

ProbeResult ProbeResult::from_runs(std::string model, std::vector<double> runs) {
  if (runs.empty()) throw ConfigError("a probe result needs at least one run");
  ProbeResult r;
  r.model = std::move(model);
  r.runs = std::move(runs);
  const auto n = static_cast<double>(r.runs.size());
  r.mean = std::accumulate(r.runs.begin(), r.runs.end(), 0.0) / n;
  r.single_run = r.runs.size() == 1;
  if (!r.single_run) {
    double ss = 0.0;
    for (double x : r.runs) ss += (x - r.mean) * (x - r.mean);
    r.std_dev = std::sqrt(ss / (n - 1.0));
  }
  return r;
}

json ProbeResult::to_json() const {
  json j;
  j["model"] = model;
  j["N"] = runs.size();
  j["top1_mean"] = mean;
  j["top1_std"] = std_dev;
  j["runs"] = runs;
  if (single_run) j["single_run"] = true;
  return j;
}

json results_json(const std::vector<ProbeResult>& rows, const json& meta) {
  json j;
  j["rows"] = json::array();
  for (const auto& r : rows) j["rows"].push_back(r.to_json());
  if (!meta.empty()) j["meta"] = meta;
  return j;
}

std::vector<ProbeResult> results_from_json(const json& j) {
  std::vector<ProbeResult> out;
  for (const auto& row : j.at("rows"))
    out.push_back(ProbeResult::from_runs(row.at("model").get<std::string>(), row.at("runs").get<std::vector<double>>()));
  return out;
}

std::string results_table(const std::vector<ProbeResult>& rows) {
  std::string out;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-16s %3s  %-12s %s\n", "Model", "N", "top-1 acc.", "Std Dev");
  out += buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%-16s %3zu  %-12.2f %.2f%s\n", r.model.c_str(), r.runs.size(), r.mean, r.std_dev,
                  r.single_run ? " (single run)" : "");
    out += buf;
  }
  return out;
}

}  // namespace stcl
