#include "stcl/contrast.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "stcl/error.hpp"

namespace stcl {

using json = nlohmann::json;

namespace {
enum Stream : std::uint64_t { kInit = 0, kWarmUp = 1, kOrder = 2, kStep = 3 };
}

KeyQueue::KeyQueue(std::size_t capacity, std::size_t dim)
    : capacity_(capacity), dim_(dim), keys_(capacity * dim), meta_(capacity) {
  if (capacity == 0 || dim == 0) throw ConfigError("key queue capacity and dimension must be >= 1");
}

void KeyQueue::enqueue(std::span<const float> key, const FrameMeta& meta) {
  if (key.size() != dim_) throw ShapeError("key dimension " + std::to_string(key.size()) + " != queue dimension " +
                                           std::to_string(dim_));
  std::size_t s;
  if (size_ < capacity_) {
    s = slot(size_);
    ++size_;
  } else {
    s = head_;
    head_ = (head_ + 1) % capacity_;
  }
  std::copy(key.begin(), key.end(), keys_.begin() + static_cast<std::ptrdiff_t>(s * dim_));
  meta_[s] = meta;
}

std::span<const float> KeyQueue::key(std::size_t i) const {
  if (i >= size_) throw ShapeError("queue index out of range");
  return {keys_.data() + slot(i) * dim_, dim_};
}

const FrameMeta& KeyQueue::meta(std::size_t i) const {
  if (i >= size_) throw ShapeError("queue index out of range");
  return meta_[slot(i)];
}

std::vector<float> KeyQueue::keys() const {
  std::vector<float> out(size_ * dim_);
  for (std::size_t i = 0; i < size_; ++i) std::copy_n(keys_.data() + slot(i) * dim_, dim_, out.data() + i * dim_);
  return out;
}

std::vector<FrameMeta> KeyQueue::metas() const {
  std::vector<FrameMeta> out(size_);
  for (std::size_t i = 0; i < size_; ++i) out[i] = meta_[slot(i)];
  return out;
}

std::string to_string(Denominator d) { return d == Denominator::NegativesOnly ? "negatives_only" : "with_positive"; }

Denominator parse_denominator(const std::string& s) {
  if (s == "negatives_only") return Denominator::NegativesOnly;
  if (s == "with_positive") return Denominator::WithPositive;
  throw ConfigError("unknown denominator mode '" + s + "' (expected negatives_only|with_positive)");
}

void LossConfig::validate() const {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw ConfigError("temperature tau must be > 0");
}

template <class T>
LossResult<T> info_nce(std::span<const T> q, std::span<const T> k_pos, std::size_t dim, std::span<const T> negatives,
                       std::span<const std::uint8_t> masks, const LossConfig& config) {
  config.validate();
  if (dim == 0 || q.size() % dim != 0 || k_pos.size() != q.size() || negatives.size() % dim != 0)
    throw ShapeError("info_nce: inconsistent q / k_pos / negatives shapes");
  const std::size_t batch = q.size() / dim;
  const std::size_t n_neg = negatives.size() / dim;
  if (masks.size() != batch * n_neg) throw ShapeError("info_nce: mask length must equal batch * queue size");
  const T tau = static_cast<T>(config.tau);
  const bool with_pos = config.denominator == Denominator::WithPositive;

  LossResult<T> r;
  r.per_query.resize(batch);
  r.pos_sim.resize(batch);
  r.grad_q.assign(batch * dim, T(0));
  r.grad_k_pos.assign(batch * dim, T(0));
  std::vector<T> logits(n_neg);
  const T inv_b = T(1) / static_cast<T>(batch);
  T total = 0;

  for (std::size_t i = 0; i < batch; ++i) {
    const T* qi = q.data() + i * dim;
    const T* ki = k_pos.data() + i * dim;
    const std::uint8_t* mi = masks.data() + i * n_neg;
    T pos = 0;
    for (std::size_t d = 0; d < dim; ++d) pos += qi[d] * ki[d];
    const T pos_logit = pos / tau;

    bool any = false;
    T mx = with_pos ? pos_logit : -std::numeric_limits<T>::infinity();
    for (std::size_t a = 0; a < n_neg; ++a) {
      if (!mi[a]) continue;
      const T* na = negatives.data() + a * dim;
      T s = 0;
      for (std::size_t d = 0; d < dim; ++d) s += qi[d] * na[d];
      logits[a] = s / tau;
      mx = std::max(mx, logits[a]);
      any = true;
    }
    if (!any) throw DegenerateBatchError("query " + std::to_string(i) + " has no negatives after masking", i);

    T sum = with_pos ? std::exp(pos_logit - mx) : T(0);
    for (std::size_t a = 0; a < n_neg; ++a)
      if (mi[a]) sum += std::exp(logits[a] - mx);
    const T lse = mx + std::log(sum);
    const T loss = -pos_logit + lse;
    r.per_query[i] = loss;
    r.pos_sim[i] = pos;
    total += loss;

    T* gq = r.grad_q.data() + i * dim;
    T* gk = r.grad_k_pos.data() + i * dim;
    const T p_pos = with_pos ? std::exp(pos_logit - lse) : T(0);
    const T c_pos = (p_pos - T(1)) * inv_b / tau;
    for (std::size_t d = 0; d < dim; ++d) {
      gq[d] = c_pos * ki[d];
      gk[d] = c_pos * qi[d];
    }
    for (std::size_t a = 0; a < n_neg; ++a) {
      if (!mi[a]) continue;
      const T w = std::exp(logits[a] - lse) * inv_b / tau;
      const T* na = negatives.data() + a * dim;
      for (std::size_t d = 0; d < dim; ++d) gq[d] += w * na[d];
    }
  }
  r.loss = total * inv_b;
  return r;
}

template LossResult<float> info_nce(std::span<const float>, std::span<const float>, std::size_t,
                                    std::span<const float>, std::span<const std::uint8_t>, const LossConfig&);
template LossResult<double> info_nce(std::span<const double>, std::span<const double>, std::size_t,
                                     std::span<const double>, std::span<const std::uint8_t>, const LossConfig&);

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("train.epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (!(lr > 0.0)) throw ConfigError("train.lr must be > 0");
  if (!(sgd_momentum >= 0.0 && sgd_momentum < 1.0)) throw ConfigError("train.sgd_momentum must be in [0, 1)");
  if (!(key_momentum > 0.0 && key_momentum < 1.0)) throw ConfigError("train.key_momentum must be in (0, 1)");
  if (queue_size < 1) throw ConfigError("train.queue_size must be >= 1");
  if (max_steps < 0) throw ConfigError("train.max_steps must be >= 0");
  loss.validate();
  validate_mode(pairing);
  augment.validate();
  arch.validate();
  if (augment.output_size != arch.input_size)
    throw ConfigError("augment output size must equal the encoder input size");
  if (arch.in_channels != 3) throw ConfigError("encoder must take 3 input channels");
}

std::string StepMetrics::to_json_line() const {
  nlohmann::ordered_json j;
  j["step"] = step;
  j["loss"] = loss;
  j["pos_sim"] = pos_sim;
  j["fallback_frac"] = fallback_frac;
  return j.dump();
}

Trainer::Trainer(const TrainConfig& config, std::span<const Image> frames, std::span<const FrameMeta> metas)
    : config_(config), frames_(frames), metas_(metas), positives_(config.pairing, metas) {
  config_.validate();
  if (frames.empty()) throw ConfigError("pretraining needs at least one frame");
  if (frames.size() != metas.size()) throw ShapeError("frame and metadata counts differ");
  state_.query = nn::ParamSet<float>(config_.arch);
  Rng init = Rng(config_.seed).child(kInit);
  state_.query.init(init);
  state_.key = state_.query;
  state_.velocity = nn::ParamSet<float>(config_.arch);
  state_.queue = KeyQueue(config_.queue_size, static_cast<std::size_t>(config_.arch.feat_dim));
}

FloatImage Trainer::view(std::size_t frame, Rng& rng) const { return augment(frames_[frame], config_.augment, rng); }

void Trainer::warm_up() {
  const Rng base = Rng(config_.seed).child(kWarmUp);
  Rng order_rng = base.child(0);
  std::vector<std::size_t> order(frames_.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  order_rng.shuffle(order);
  order.resize(std::min(order.size(), config_.queue_size));

  const std::size_t len = config_.arch.input_len();
  const auto chunk = static_cast<std::size_t>(config_.batch_size);
  const auto dim = static_cast<std::size_t>(config_.arch.feat_dim);
  for (std::size_t start = 0; start < order.size(); start += chunk) {
    const std::size_t n = std::min(chunk, order.size() - start);
    std::vector<float> in(n * len);
    for (std::size_t b = 0; b < n; ++b) {
      Rng r = base.child(1 + start + b);
      const FloatImage v = view(order[start + b], r);
      std::copy(v.data.begin(), v.data.end(), in.begin() + static_cast<std::ptrdiff_t>(b * len));
    }
    const auto out = nn::forward<float>(state_.key, in, false);
    for (std::size_t b = 0; b < n; ++b)
      state_.queue.enqueue(std::span<const float>(out.normalized).subspan(b * dim, dim), metas_[order[start + b]]);
  }
}

StepMetrics Trainer::train_step(std::span<const std::size_t> batch) {
  if (batch.empty()) throw ShapeError("train_step needs a non-empty batch");
  if (state_.queue.size() == 0) throw ConfigError("train_step needs a non-empty key queue; run warm_up first");
  const std::size_t n = batch.size();
  const std::size_t len = config_.arch.input_len();
  const auto dim = static_cast<std::size_t>(config_.arch.feat_dim);
  const Rng base = Rng(config_.seed).child(kStep).child(static_cast<std::uint64_t>(state_.step));

  std::vector<float> q_in(n * len), k_in(n * len);
  std::vector<std::size_t> positive(n);
  std::size_t fallbacks = 0;
  for (std::size_t b = 0; b < n; ++b) {
    const std::size_t i = batch[b];
    if (i >= frames_.size()) throw ShapeError("batch frame index out of range");
    Rng r = base.child(b);
    const PairAssignment a = positives_.select(i, r);
    positive[b] = a.positive_index;
    fallbacks += a.fallback_used ? 1 : 0;
    const FloatImage qv = view(i, r);
    const FloatImage kv = view(a.positive_index, r);
    std::copy(qv.data.begin(), qv.data.end(), q_in.begin() + static_cast<std::ptrdiff_t>(b * len));
    std::copy(kv.data.begin(), kv.data.end(), k_in.begin() + static_cast<std::ptrdiff_t>(b * len));
  }

  auto fq = nn::forward<float>(state_.query, q_in, true);
  const auto fk = nn::forward<float>(state_.key, k_in, false);

  const std::vector<float> negatives = state_.queue.keys();
  const std::vector<FrameMeta> queue_meta = state_.queue.metas();
  std::vector<std::uint8_t> masks;
  masks.reserve(n * queue_meta.size());
  for (std::size_t b = 0; b < n; ++b) {
    const auto m = negative_mask(config_.pairing, metas_[batch[b]], queue_meta);
    masks.insert(masks.end(), m.begin(), m.end());
  }
  const auto loss = info_nce<float>(fq.normalized, fk.normalized, dim, negatives, masks, config_.loss);

  const auto grads = nn::backward<float>(state_.query, *fq.tape, loss.grad_q);
  nn::sgd_step<float>(state_.query, grads, static_cast<float>(config_.lr), static_cast<float>(config_.sgd_momentum),
                      state_.velocity);
  nn::momentum_update<float>(state_.key, state_.query, static_cast<float>(config_.key_momentum));
  for (std::size_t b = 0; b < n; ++b)
    state_.queue.enqueue(std::span<const float>(fk.normalized).subspan(b * dim, dim), metas_[positive[b]]);

  StepMetrics m;
  m.step = state_.step;
  m.loss = loss.loss;
  double ps = 0.0;
  for (float s : loss.pos_sim) ps += s;
  m.pos_sim = ps / static_cast<double>(n);
  m.fallback_frac = static_cast<double>(fallbacks) / static_cast<double>(n);
  ++state_.step;
  return m;
}

std::vector<std::size_t> Trainer::epoch_order(int epoch) const {
  std::vector<std::size_t> order(frames_.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng r = Rng(config_.seed).child(kOrder).child(static_cast<std::uint64_t>(epoch));
  r.shuffle(order);
  return order;
}

std::int64_t Trainer::steps_per_epoch() const {
  const auto b = static_cast<std::int64_t>(config_.batch_size);
  return (static_cast<std::int64_t>(frames_.size()) + b - 1) / b;
}

std::int64_t Trainer::total_steps() const {
  const std::int64_t all = steps_per_epoch() * config_.epochs;
  return config_.max_steps > 0 ? std::min(all, config_.max_steps) : all;
}

void Trainer::run(const std::function<void(const StepMetrics&)>& on_step) {
  if (state_.queue.size() == 0) warm_up();
  const std::int64_t spe = steps_per_epoch();
  const auto bs = static_cast<std::size_t>(config_.batch_size);
  int cached_epoch = -1;
  std::vector<std::size_t> order;
  while (state_.step < total_steps()) {
    const int epoch = static_cast<int>(state_.step / spe);
    if (epoch != cached_epoch) {
      order = epoch_order(epoch);
      cached_epoch = epoch;
    }
    const auto start = static_cast<std::size_t>(state_.step % spe) * bs;
    const std::size_t end = std::min(order.size(), start + bs);
    const auto m = train_step(std::span<const std::size_t>(order).subspan(start, end - start));
    if (on_step) on_step(m);
  }
}

namespace {
json meta_to_json(const FrameMeta& m) {
  return {{"step", m.pose.step},
          {"t", m.pose.t},
          {"pos", {m.pose.position.x, m.pose.position.y, m.pose.position.z}},
          {"yaw", m.pose.yaw},
          {"jump_phase", m.pose.jump_phase},
          {"instance", m.instance}};
}

FrameMeta meta_from_json(const json& j) {
  FrameMeta m;
  m.pose.step = j.at("step").get<std::int64_t>();
  m.pose.t = j.at("t").get<double>();
  const auto p = j.at("pos");
  m.pose.position = {p.at(0).get<double>(), p.at(1).get<double>(), p.at(2).get<double>()};
  m.pose.yaw = j.at("yaw").get<double>();
  m.pose.jump_phase = j.at("jump_phase").get<int>();
  m.instance = j.at("instance").get<std::int64_t>();
  return m;
}
}  // namespace

void Trainer::save_checkpoint(const std::string& path, const json& extra_meta) const {
  auto tensors = nn::export_params(state_.query, "query.");
  for (auto& t : nn::export_params(state_.key, "key.")) tensors.push_back(std::move(t));
  for (auto& t : nn::export_params(state_.velocity, "velocity.")) tensors.push_back(std::move(t));
  tensors.push_back({"queue.keys", {state_.queue.size(), state_.queue.dim()}, state_.queue.keys()});
  json meta = extra_meta;
  meta["step"] = state_.step;
  meta["queue_capacity"] = state_.queue.capacity();
  json qm = json::array();
  for (const auto& m : state_.queue.metas()) qm.push_back(meta_to_json(m));
  meta["queue_meta"] = std::move(qm);
  nn::write_tensor_file(path, config_.arch, tensors, meta);
}

void Trainer::load_checkpoint(const std::string& path) {
  const nn::TensorFile f = nn::read_tensor_file(path);
  if (!(f.arch == config_.arch)) throw ConfigError(path + ": checkpoint architecture differs from the configuration");
  try {
    state_.query = nn::import_params(f, "query.");
    state_.key = nn::import_params(f, "key.");
    state_.velocity = nn::import_params(f, "velocity.");
    state_.step = f.meta.at("step").get<std::int64_t>();
    const auto capacity = f.meta.at("queue_capacity").get<std::size_t>();
    if (capacity != config_.queue_size) throw ConfigError(path + ": checkpoint queue capacity differs");
    const auto& keys = f.get("queue.keys");
    const auto& qm = f.meta.at("queue_meta");
    const std::size_t dim = static_cast<std::size_t>(config_.arch.feat_dim);
    if (keys.values.size() != qm.size() * dim) throw IoError(path + ": queue keys and metadata disagree");
    state_.queue = KeyQueue(capacity, dim);
    for (std::size_t i = 0; i < qm.size(); ++i)
      state_.queue.enqueue(std::span<const float>(keys.values).subspan(i * dim, dim), meta_from_json(qm[i]));
  } catch (const json::exception& e) {
    throw IoError(path + ": malformed checkpoint metadata: " + e.what());
  }
}

}  // namespace stcl
