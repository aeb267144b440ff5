#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "stcl/pose.hpp"
#include "stcl/rng.hpp"

namespace stcl {

/// Instance discrimination: a view is only similar to views of the same frame.
struct StandardMode {
  bool operator==(const StandardMode&) const = default;
};

/// Similar iff timestamps are within t_max seconds.
struct TimeMode {
  double t_max = 10.0;
  bool operator==(const TimeMode&) const = default;
};

/// Similar iff positions are within d_max meters (3D) AND headings are
/// within a_max degrees (circular).
struct SpaceMode {
  double d_max = 0.2;
  double a_max = 3.0;
  bool operator==(const SpaceMode&) const = default;
};

using PairingMode = std::variant<StandardMode, TimeMode, SpaceMode>;

/// "standard" | "time" | "space"
std::string mode_key(const PairingMode& mode);
/// "Standard MoCo" | "Time MoCo" | "Space MoCo"
std::string mode_label(const PairingMode& mode);
/// Parses a mode key; thresholds are taken from the arguments.
PairingMode make_mode(const std::string& key, double t_max, double d_max, double a_max);
/// Throws ConfigError if a threshold is not positive.
void validate_mode(const PairingMode& mode);

/// Navigational record of one view plus its source-frame id.
struct FrameMeta {
  Pose pose;
  std::int64_t instance = 0;
};

/// Smallest absolute difference between two headings, in [0, 180].
double circular_yaw_distance(double a_deg, double b_deg);

/// Symmetric; inclusive thresholds.
bool is_similar(const PairingMode& mode, const FrameMeta& a, const FrameMeta& b);

struct PairAssignment {
  std::size_t query_index = 0;
  std::size_t positive_index = 0;
  bool fallback_used = false;
};

/// Standard: the query itself. Time/Space: uniform over the other frames
/// within threshold, or the query itself with fallback_used when none exist.
PairAssignment select_positive(const PairingMode& mode, std::size_t query_index, std::span<const FrameMeta> records,
                               Rng& rng);

/// mask[k] is true iff queue entry k is a negative for the query (outside
/// every threshold). Within-threshold entries are neither positive nor negative.
std::vector<std::uint8_t> negative_mask(const PairingMode& mode, const FrameMeta& query,
                                        std::span<const FrameMeta> queue_meta);

/// Precomputed admissible positives for every frame; select() is equivalent
/// to select_positive but O(1) per draw.
class PositiveIndex {
 public:
  PositiveIndex(const PairingMode& mode, std::span<const FrameMeta> records);

  PairAssignment select(std::size_t query_index, Rng& rng) const;
  const std::vector<std::size_t>& candidates(std::size_t query_index) const { return candidates_[query_index]; }
  std::size_t size() const { return candidates_.size(); }
  bool standard() const { return standard_; }

 private:
  bool standard_ = false;
  std::vector<std::vector<std::size_t>> candidates_;
};

/// One JSON line per pair: {"i","j","mode","fallback"}. With
/// `all_candidates`, every admissible (i, j) pair is listed (fallback false)
/// plus a self pair for frames without candidates; otherwise one sampled
/// assignment per frame.
std::string pair_manifest(const PairingMode& mode, std::span<const FrameMeta> records, Rng& rng, bool all_candidates);

/// Frame metadata for a trajectory: instance id = frame index.
std::vector<FrameMeta> frame_metas(std::span<const Pose> poses);

}  // namespace stcl
