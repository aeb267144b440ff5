#include "stcl/pairing.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "stcl/error.hpp"

namespace stcl {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};

std::string mode_key(const PairingMode& mode) {
  return std::visit(Overloaded{[](const StandardMode&) { return std::string("standard"); },
                               [](const TimeMode&) { return std::string("time"); },
                               [](const SpaceMode&) { return std::string("space"); }},
                    mode);
}

std::string mode_label(const PairingMode& mode) {
  return std::visit(Overloaded{[](const StandardMode&) { return std::string("Standard MoCo"); },
                               [](const TimeMode&) { return std::string("Time MoCo"); },
                               [](const SpaceMode&) { return std::string("Space MoCo"); }},
                    mode);
}

PairingMode make_mode(const std::string& key, double t_max, double d_max, double a_max) {
  PairingMode mode;
  if (key == "standard") {
    mode = StandardMode{};
  } else if (key == "time") {
    mode = TimeMode{t_max};
  } else if (key == "space") {
    mode = SpaceMode{d_max, a_max};
  } else {
    throw ConfigError("unknown pairing mode '" + key + "' (expected standard|time|space)");
  }
  validate_mode(mode);
  return mode;
}

void validate_mode(const PairingMode& mode) {
  if (const auto* t = std::get_if<TimeMode>(&mode); t && !(t->t_max > 0.0))
    throw ConfigError("time threshold must be > 0");
  if (const auto* s = std::get_if<SpaceMode>(&mode); s && !(s->d_max > 0.0 && s->a_max > 0.0))
    throw ConfigError("space thresholds must be > 0");
}

double circular_yaw_distance(double a_deg, double b_deg) {
  const double d = std::fmod(std::abs(a_deg - b_deg), 360.0);
  return d > 180.0 ? 360.0 - d : d;
}

bool is_similar(const PairingMode& mode, const FrameMeta& a, const FrameMeta& b) {
  return std::visit(Overloaded{[&](const StandardMode&) { return a.instance == b.instance; },
                               [&](const TimeMode& m) { return std::abs(a.pose.t - b.pose.t) <= m.t_max; },
                               [&](const SpaceMode& m) {
                                 return norm(a.pose.position - b.pose.position) <= m.d_max &&
                                        circular_yaw_distance(a.pose.yaw, b.pose.yaw) <= m.a_max;
                               }},
                    mode);
}

PairAssignment select_positive(const PairingMode& mode, std::size_t query_index, std::span<const FrameMeta> records,
                               Rng& rng) {
  PairAssignment out{query_index, query_index, false};
  if (std::holds_alternative<StandardMode>(mode)) return out;
  std::vector<std::size_t> candidates;
  for (std::size_t j = 0; j < records.size(); ++j)
    if (j != query_index && is_similar(mode, records[query_index], records[j])) candidates.push_back(j);
  if (candidates.empty()) {
    out.fallback_used = true;
    return out;
  }
  out.positive_index = candidates[rng.below(candidates.size())];
  return out;
}

std::vector<std::uint8_t> negative_mask(const PairingMode& mode, const FrameMeta& query,
                                        std::span<const FrameMeta> queue_meta) {
  std::vector<std::uint8_t> mask(queue_meta.size());
  for (std::size_t k = 0; k < queue_meta.size(); ++k) mask[k] = is_similar(mode, query, queue_meta[k]) ? 0 : 1;
  return mask;
}

PositiveIndex::PositiveIndex(const PairingMode& mode, std::span<const FrameMeta> records)
    : standard_(std::holds_alternative<StandardMode>(mode)), candidates_(records.size()) {
  if (standard_) return;
  for (std::size_t i = 0; i < records.size(); ++i)
    for (std::size_t j = i + 1; j < records.size(); ++j)
      if (is_similar(mode, records[i], records[j])) {
        candidates_[i].push_back(j);
        candidates_[j].push_back(i);
      }
  // Each list must be in increasing order to match select_positive's draws.
  for (auto& c : candidates_) std::sort(c.begin(), c.end());
}

PairAssignment PositiveIndex::select(std::size_t query_index, Rng& rng) const {
  PairAssignment out{query_index, query_index, false};
  if (standard_) return out;
  const auto& c = candidates_.at(query_index);
  if (c.empty()) {
    out.fallback_used = true;
    return out;
  }
  out.positive_index = c[rng.below(c.size())];
  return out;
}

std::string pair_manifest(const PairingMode& mode, std::span<const FrameMeta> records, Rng& rng, bool all_candidates) {
  const std::string key = mode_key(mode);
  std::string out;
  auto line = [&](std::size_t i, std::size_t j, bool fallback) {
    nlohmann::json l;
    l["i"] = i;
    l["j"] = j;
    l["mode"] = key;
    l["fallback"] = fallback;
    out += l.dump();
    out += '\n';
  };
  const PositiveIndex index(mode, records);
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (all_candidates && !index.standard() && !index.candidates(i).empty()) {
      for (std::size_t j : index.candidates(i)) line(i, j, false);
    } else if (all_candidates) {
      line(i, i, !index.standard());
    } else {
      const auto a = index.select(i, rng);
      line(a.query_index, a.positive_index, a.fallback_used);
    }
  }
  return out;
}

std::vector<FrameMeta> frame_metas(std::span<const Pose> poses) {
  std::vector<FrameMeta> out(poses.size());
  for (std::size_t i = 0; i < poses.size(); ++i) out[i] = {poses[i], static_cast<std::int64_t>(i)};
  return out;
}

}  // namespace stcl
