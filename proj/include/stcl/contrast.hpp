#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "stcl/augment.hpp"
#include "stcl/nn.hpp"
#include "stcl/pairing.hpp"

namespace stcl {

/// Fixed-capacity FIFO of key features with the navigational record of the
/// frame each key was encoded from. Index 0 is the oldest entry.
class KeyQueue {
 public:
  KeyQueue() = default;
  KeyQueue(std::size_t capacity, std::size_t dim);

  void enqueue(std::span<const float> key, const FrameMeta& meta);

  std::size_t size() const { return size_; }
  std::size_t capacity() const { return capacity_; }
  std::size_t dim() const { return dim_; }
  std::span<const float> key(std::size_t i) const;
  const FrameMeta& meta(std::size_t i) const;

  /// [size, dim], oldest first.
  std::vector<float> keys() const;
  std::vector<FrameMeta> metas() const;

 private:
  std::size_t slot(std::size_t i) const { return (head_ + i) % capacity_; }

  std::size_t capacity_ = 0;
  std::size_t dim_ = 0;
  std::size_t head_ = 0;
  std::size_t size_ = 0;
  std::vector<float> keys_;
  std::vector<FrameMeta> meta_;
};

enum class Denominator { NegativesOnly, WithPositive };

std::string to_string(Denominator d);
Denominator parse_denominator(const std::string& s);

struct LossConfig {
  double tau = 0.2;
  Denominator denominator = Denominator::NegativesOnly;

  void validate() const;
};

template <class T>
struct LossResult {
  T loss = 0;                 // mean over the batch
  std::vector<T> per_query;   // [B]
  std::vector<T> pos_sim;     // [B] q_i . k_pos_i
  std::vector<T> grad_q;      // [B, dim]
  std::vector<T> grad_k_pos;  // [B, dim]
};

/// l_i = -q_i.k_i / tau + logsumexp(D_i), D_i = { q_i.n_a / tau : mask_i[a] }
/// plus the positive logit in WithPositive mode. `negatives` is [Q, dim],
/// `masks` is [B, Q] (nonzero = negative). Throws DegenerateBatchError when a
/// query has no negative.
template <class T>
LossResult<T> info_nce(std::span<const T> q, std::span<const T> k_pos, std::size_t dim, std::span<const T> negatives,
                       std::span<const std::uint8_t> masks, const LossConfig& config);

struct TrainConfig {
  int epochs = 100;
  int batch_size = 64;
  double lr = 0.05;
  double sgd_momentum = 0.9;
  double key_momentum = 0.99;
  std::size_t queue_size = 1024;
  LossConfig loss;
  PairingMode pairing = StandardMode{};
  AugmentConfig augment;
  nn::EncoderArch arch;
  std::uint64_t seed = 0;
  /// Stop after this many steps; 0 runs every epoch.
  std::int64_t max_steps = 0;

  void validate() const;
};

struct StepMetrics {
  std::int64_t step = 0;
  double loss = 0.0;
  double pos_sim = 0.0;
  double fallback_frac = 0.0;

  /// {"step","loss","pos_sim","fallback_frac"}
  std::string to_json_line() const;
};

struct TrainState {
  nn::ParamSet<float> query;
  nn::ParamSet<float> key;
  nn::ParamSet<float> velocity;
  KeyQueue queue;
  std::int64_t step = 0;
};

/// Owns the training state for one pretraining run over a fixed set of frames.
/// Every random draw comes from a stream derived from (seed, purpose, step),
/// so a run and a resumed run see the same draws.
class Trainer {
 public:
  Trainer(const TrainConfig& config, std::span<const Image> frames, std::span<const FrameMeta> metas);

  /// Encodes min(K, N) distinct random frames with the key encoder.
  void warm_up();

  /// One iteration on the given frame indices.
  StepMetrics train_step(std::span<const std::size_t> batch);

  /// Frame order for one epoch.
  std::vector<std::size_t> epoch_order(int epoch) const;
  std::int64_t steps_per_epoch() const;
  std::int64_t total_steps() const;

  /// Runs from the current step to total_steps(), warming up first if the
  /// queue is empty.
  void run(const std::function<void(const StepMetrics&)>& on_step = {});

  const TrainState& state() const { return state_; }
  TrainState& state() { return state_; }
  const TrainConfig& config() const { return config_; }

  /// Parameters, optimizer velocity, queue contents and the step counter.
  void save_checkpoint(const std::string& path, const nlohmann::json& extra_meta = nlohmann::json::object()) const;
  void load_checkpoint(const std::string& path);

 private:
  FloatImage view(std::size_t frame, Rng& rng) const;

  TrainConfig config_;
  std::span<const Image> frames_;
  std::span<const FrameMeta> metas_;
  PositiveIndex positives_;
  TrainState state_;
};

}  // namespace stcl
