#include "stcl/nn.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "stcl/error.hpp"
#include "stcl/kernels.hpp"

namespace stcl::nn {
namespace {

using json = nlohmann::json;

template <class T>
void check_finite(std::span<const T> v, const std::string& layer) {
  for (T x : v)
    if (!std::isfinite(x)) throw NumericError("non-finite activation in layer " + layer);
}

// 3x3 kernel, stride 2, padding 1.
template <class T>
void im2col(const T* in, int channels, int side, int out_side, T* col) {
  const std::size_t p_count = static_cast<std::size_t>(out_side) * out_side;
  for (int c = 0; c < channels; ++c)
    for (int ky = 0; ky < 3; ++ky)
      for (int kx = 0; kx < 3; ++kx) {
        T* row = col + (static_cast<std::size_t>(c) * 9 + ky * 3 + kx) * p_count;
        for (int oy = 0; oy < out_side; ++oy) {
          const int iy = 2 * oy + ky - 1;
          for (int ox = 0; ox < out_side; ++ox) {
            const int ix = 2 * ox + kx - 1;
            row[oy * out_side + ox] = (iy < 0 || iy >= side || ix < 0 || ix >= side)
                                          ? T(0)
                                          : in[(static_cast<std::size_t>(c) * side + iy) * side + ix];
          }
        }
      }
}

template <class T>
void col2im(const T* col, int channels, int side, int out_side, T* in) {
  const std::size_t p_count = static_cast<std::size_t>(out_side) * out_side;
  std::memset(in, 0, sizeof(T) * static_cast<std::size_t>(channels) * side * side);
  for (int c = 0; c < channels; ++c)
    for (int ky = 0; ky < 3; ++ky)
      for (int kx = 0; kx < 3; ++kx) {
        const T* row = col + (static_cast<std::size_t>(c) * 9 + ky * 3 + kx) * p_count;
        for (int oy = 0; oy < out_side; ++oy) {
          const int iy = 2 * oy + ky - 1;
          if (iy < 0 || iy >= side) continue;
          for (int ox = 0; ox < out_side; ++ox) {
            const int ix = 2 * ox + kx - 1;
            if (ix < 0 || ix >= side) continue;
            in[(static_cast<std::size_t>(c) * side + iy) * side + ix] += row[oy * out_side + ox];
          }
        }
      }
}

std::uint64_t fnv1a(const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Backbone for one sample; returns the pooled vector. Fills `tape` if given.
template <class T>
void backbone_sample(const ParamSet<T>& params, const T* input, T* pooled,
                     std::vector<typename Tape<T>::ConvSample>* tape) {
  const auto& k = kernels::active<T>();
  const EncoderArch& arch = params.arch();
  std::vector<T> act(input, input + arch.input_len());
  std::vector<T> col, pre;
  int side = arch.input_size;
  int channels = arch.in_channels;
  for (std::size_t l = 0; l < arch.conv_channels.size(); ++l) {
    const int out_side = arch.output_side(l);
    const int out_ch = arch.conv_channels[l];
    const std::size_t p_count = static_cast<std::size_t>(out_side) * out_side;
    const std::size_t kdim = static_cast<std::size_t>(channels) * 9;
    col.resize(kdim * p_count);
    im2col(act.data(), channels, side, out_side, col.data());
    pre.resize(static_cast<std::size_t>(out_ch) * p_count);
    const auto bias = params.tensor(params.conv_bias(l));
    for (int c = 0; c < out_ch; ++c) std::fill_n(pre.data() + c * p_count, p_count, bias[c]);
    k.gemm(out_ch, p_count, kdim, params.tensor(params.conv_weight(l)).data(), kdim, col.data(), p_count, pre.data(),
           p_count, true);
    check_finite<T>(pre, "conv" + std::to_string(l));
    act.resize(pre.size());
    k.relu(pre.size(), pre.data(), act.data());
    if (tape) (*tape)[l] = {col, pre};
    side = out_side;
    channels = out_ch;
  }
  const std::size_t p_count = static_cast<std::size_t>(side) * side;
  for (int c = 0; c < channels; ++c) {
    T s = 0;
    for (std::size_t p = 0; p < p_count; ++p) s += act[c * p_count + p];
    pooled[c] = s / static_cast<T>(p_count);
  }
}

}  // namespace

void EncoderArch::validate() const {
  if (input_size < 1 || in_channels < 1) throw ConfigError("encoder input must be non-empty");
  if (conv_channels.empty()) throw ConfigError("encoder needs at least one conv block");
  for (int c : conv_channels)
    if (c < 1) throw ConfigError("conv channel counts must be >= 1");
  if (hidden_dim < 1) throw ConfigError("encoder hidden_dim must be >= 1");
  if (feat_dim < 2) throw ConfigError("encoder feat_dim must be >= 2");
}

int EncoderArch::output_side(std::size_t layer) const {
  int side = input_size;
  for (std::size_t l = 0; l <= layer; ++l) side = (side - 1) / 2 + 1;
  return side;
}

json EncoderArch::to_json() const {
  return {{"input_size", input_size},
          {"in_channels", in_channels},
          {"conv_channels", conv_channels},
          {"hidden_dim", hidden_dim},
          {"feat_dim", feat_dim}};
}

EncoderArch EncoderArch::from_json(const json& j) {
  EncoderArch a;
  a.input_size = j.at("input_size").get<int>();
  a.in_channels = j.at("in_channels").get<int>();
  a.conv_channels = j.at("conv_channels").get<std::vector<int>>();
  a.hidden_dim = j.at("hidden_dim").get<int>();
  a.feat_dim = j.at("feat_dim").get<int>();
  a.validate();
  return a;
}

template <class T>
ParamSet<T>::ParamSet(const EncoderArch& arch) : arch_(arch) {
  arch_.validate();
  std::size_t offset = 0;
  auto add = [&](std::string name, std::vector<std::size_t> shape) {
    std::size_t n = 1;
    for (auto s : shape) n *= s;
    layout_.push_back({std::move(name), std::move(shape), offset, n});
    offset += n;
  };
  std::size_t in_ch = static_cast<std::size_t>(arch_.in_channels);
  for (std::size_t l = 0; l < arch_.conv_channels.size(); ++l) {
    const auto out = static_cast<std::size_t>(arch_.conv_channels[l]);
    add("conv" + std::to_string(l) + ".weight", {out, in_ch, 3, 3});
    add("conv" + std::to_string(l) + ".bias", {out});
    in_ch = out;
  }
  const auto pooled = static_cast<std::size_t>(arch_.pooled_dim());
  const auto hidden = static_cast<std::size_t>(arch_.hidden_dim);
  const auto feat = static_cast<std::size_t>(arch_.feat_dim);
  add("head.fc1.weight", {hidden, pooled});
  add("head.fc1.bias", {hidden});
  add("head.fc2.weight", {feat, hidden});
  add("head.fc2.bias", {feat});
  data_.assign(offset, T(0));
}

template <class T>
std::size_t ParamSet<T>::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < layout_.size(); ++i)
    if (layout_[i].name == name) return i;
  throw ShapeError("no parameter tensor named " + name);
}

template <class T>
void ParamSet<T>::init(Rng& rng) {
  for (std::size_t i = 0; i < layout_.size(); ++i) {
    auto t = tensor(i);
    const auto& shape = layout_[i].shape;
    if (shape.size() == 1) {
      std::fill(t.begin(), t.end(), T(0));
      continue;
    }
    std::size_t fan_in = 1;
    for (std::size_t d = 1; d < shape.size(); ++d) fan_in *= shape[d];
    const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (auto& v : t) v = static_cast<T>(stddev * rng.normal());
  }
}

template <class T>
void ParamSet<T>::fill(T value) {
  std::fill(data_.begin(), data_.end(), value);
}

template <class T>
std::uint64_t ParamSet<T>::checksum() const {
  return fnv1a(data_.data(), data_.size() * sizeof(T));
}

template <class T>
ForwardResult<T> forward(const ParamSet<T>& params, std::span<const T> inputs, bool keep_tape) {
  const EncoderArch& arch = params.arch();
  const std::size_t in_len = arch.input_len();
  if (in_len == 0 || inputs.size() % in_len != 0)
    throw ShapeError("forward: input length is not a multiple of the encoder input size");
  const std::size_t batch = inputs.size() / in_len;
  const auto& k = kernels::active<T>();
  const auto pooled_dim = static_cast<std::size_t>(arch.pooled_dim());
  const auto hidden = static_cast<std::size_t>(arch.hidden_dim);
  const auto feat = static_cast<std::size_t>(arch.feat_dim);

  ForwardResult<T> r;
  r.batch = batch;
  r.pooled.assign(batch * pooled_dim, T(0));
  Tape<T> tape;
  if (keep_tape) tape.conv.assign(batch, std::vector<typename Tape<T>::ConvSample>(arch.conv_channels.size()));
  for (std::size_t b = 0; b < batch; ++b)
    backbone_sample(params, inputs.data() + b * in_len, r.pooled.data() + b * pooled_dim,
                    keep_tape ? &tape.conv[b] : nullptr);

  // Head, batched: rows are samples. Bias rows seed each accumulation.
  std::vector<T> w1t(pooled_dim * hidden), w2t(hidden * feat);
  kernels::transpose(hidden, pooled_dim, params.tensor(params.fc1_weight()).data(), w1t.data());
  kernels::transpose(feat, hidden, params.tensor(params.fc2_weight()).data(), w2t.data());
  std::vector<T> h1_pre(batch * hidden), h1(batch * hidden), z(batch * feat);
  const auto b1 = params.tensor(params.fc1_bias());
  const auto b2 = params.tensor(params.fc2_bias());
  for (std::size_t b = 0; b < batch; ++b) {
    std::copy(b1.begin(), b1.end(), h1_pre.begin() + b * hidden);
    std::copy(b2.begin(), b2.end(), z.begin() + b * feat);
  }
  k.gemm(batch, hidden, pooled_dim, r.pooled.data(), pooled_dim, w1t.data(), hidden, h1_pre.data(), hidden, true);
  check_finite<T>(h1_pre, "head.fc1");
  k.relu(h1_pre.size(), h1_pre.data(), h1.data());
  k.gemm(batch, feat, hidden, h1.data(), hidden, w2t.data(), feat, z.data(), feat, true);
  check_finite<T>(z, "head.fc2");

  r.normalized.resize(batch * feat);
  std::vector<T> norms(batch);
  for (std::size_t b = 0; b < batch; ++b) {
    T ss = 0;
    for (std::size_t j = 0; j < feat; ++j) ss += z[b * feat + j] * z[b * feat + j];
    const T n = std::sqrt(ss);
    if (!(n > T(0)) || !std::isfinite(n)) throw NumericError("zero or non-finite norm in layer head.normalize");
    norms[b] = n;
    for (std::size_t j = 0; j < feat; ++j) r.normalized[b * feat + j] = z[b * feat + j] / n;
  }
  if (keep_tape) {
    tape.batch = batch;
    tape.pooled = r.pooled;
    tape.h1_pre = std::move(h1_pre);
    tape.h1 = std::move(h1);
    tape.z_norm = std::move(norms);
    tape.normalized = r.normalized;
    r.tape = std::move(tape);
  }
  return r;
}

template <class T>
std::vector<T> pooled_features(const ParamSet<T>& params, std::span<const T> inputs) {
  const std::size_t in_len = params.arch().input_len();
  if (inputs.size() % in_len != 0) throw ShapeError("pooled_features: input length mismatch");
  const std::size_t batch = inputs.size() / in_len;
  const auto pooled_dim = static_cast<std::size_t>(params.arch().pooled_dim());
  std::vector<T> out(batch * pooled_dim);
  for (std::size_t b = 0; b < batch; ++b)
    backbone_sample<T>(params, inputs.data() + b * in_len, out.data() + b * pooled_dim, nullptr);
  return out;
}

template <class T>
ParamSet<T> backward(const ParamSet<T>& params, const Tape<T>& tape, std::span<const T> grad_normalized) {
  const EncoderArch& arch = params.arch();
  const auto& k = kernels::active<T>();
  const std::size_t batch = tape.batch;
  const auto pooled_dim = static_cast<std::size_t>(arch.pooled_dim());
  const auto hidden = static_cast<std::size_t>(arch.hidden_dim);
  const auto feat = static_cast<std::size_t>(arch.feat_dim);
  if (grad_normalized.size() != batch * feat || tape.conv.size() != batch)
    throw ShapeError("backward: gradient/tape shape mismatch");

  ParamSet<T> grads(arch);

  // d/dz of z/||z||: (I - v v^T) g / ||z||.
  std::vector<T> dz(batch * feat);
  for (std::size_t b = 0; b < batch; ++b) {
    const T* v = tape.normalized.data() + b * feat;
    const T* g = grad_normalized.data() + b * feat;
    T radial = 0;
    for (std::size_t j = 0; j < feat; ++j) radial += v[j] * g[j];
    for (std::size_t j = 0; j < feat; ++j) dz[b * feat + j] = (g[j] - radial * v[j]) / tape.z_norm[b];
  }

  // fc2
  std::vector<T> dzt(feat * batch);
  kernels::transpose(batch, feat, dz.data(), dzt.data());
  k.gemm(feat, hidden, batch, dzt.data(), batch, tape.h1.data(), hidden, grads.tensor(grads.fc2_weight()).data(),
         hidden, false);
  auto db2 = grads.tensor(grads.fc2_bias());
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t j = 0; j < feat; ++j) db2[j] += dz[b * feat + j];
  std::vector<T> dh1(batch * hidden);
  k.gemm(batch, hidden, feat, dz.data(), feat, params.tensor(params.fc2_weight()).data(), hidden, dh1.data(), hidden,
         false);
  k.relu_backward(dh1.size(), tape.h1_pre.data(), dh1.data(), dh1.data());

  // fc1
  std::vector<T> dh1t(hidden * batch);
  kernels::transpose(batch, hidden, dh1.data(), dh1t.data());
  k.gemm(hidden, pooled_dim, batch, dh1t.data(), batch, tape.pooled.data(), pooled_dim,
         grads.tensor(grads.fc1_weight()).data(), pooled_dim, false);
  auto db1 = grads.tensor(grads.fc1_bias());
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t j = 0; j < hidden; ++j) db1[j] += dh1[b * hidden + j];
  std::vector<T> dpooled(batch * pooled_dim);
  k.gemm(batch, pooled_dim, hidden, dh1.data(), hidden, params.tensor(params.fc1_weight()).data(), pooled_dim,
         dpooled.data(), pooled_dim, false);

  // Transposed conv weights, shared across samples.
  const std::size_t layers = arch.conv_channels.size();
  std::vector<std::vector<T>> wt(layers);
  for (std::size_t l = 0; l < layers; ++l) {
    const auto out_ch = static_cast<std::size_t>(arch.conv_channels[l]);
    const auto kdim = static_cast<std::size_t>(l == 0 ? arch.in_channels : arch.conv_channels[l - 1]) * 9;
    wt[l].resize(out_ch * kdim);
    kernels::transpose(out_ch, kdim, params.tensor(params.conv_weight(l)).data(), wt[l].data());
  }

  std::vector<T> dact, dpre, colt, dcol;
  for (std::size_t b = 0; b < batch; ++b) {
    // Global average pool.
    const int last_side = arch.output_side(layers - 1);
    const std::size_t last_p = static_cast<std::size_t>(last_side) * last_side;
    dact.assign(pooled_dim * last_p, T(0));
    for (std::size_t c = 0; c < pooled_dim; ++c) {
      const T g = dpooled[b * pooled_dim + c] / static_cast<T>(last_p);
      std::fill_n(dact.data() + c * last_p, last_p, g);
    }
    for (std::size_t li = layers; li-- > 0;) {
      const auto& saved = tape.conv[b][li];
      const auto out_ch = static_cast<std::size_t>(arch.conv_channels[li]);
      const auto in_ch = static_cast<std::size_t>(li == 0 ? arch.in_channels : arch.conv_channels[li - 1]);
      const int out_side = arch.output_side(li);
      const int in_side = li == 0 ? arch.input_size : arch.output_side(li - 1);
      const std::size_t p_count = static_cast<std::size_t>(out_side) * out_side;
      const std::size_t kdim = in_ch * 9;

      dpre.resize(out_ch * p_count);
      k.relu_backward(dpre.size(), saved.pre.data(), dact.data(), dpre.data());
      colt.resize(p_count * kdim);
      kernels::transpose(kdim, p_count, saved.col.data(), colt.data());
      k.gemm(out_ch, kdim, p_count, dpre.data(), p_count, colt.data(), kdim,
             grads.tensor(grads.conv_weight(li)).data(), kdim, true);
      auto db = grads.tensor(grads.conv_bias(li));
      for (std::size_t c = 0; c < out_ch; ++c) {
        T s = 0;
        for (std::size_t p = 0; p < p_count; ++p) s += dpre[c * p_count + p];
        db[c] += s;
      }
      if (li == 0) break;
      dcol.resize(kdim * p_count);
      k.gemm(kdim, p_count, out_ch, wt[li].data(), out_ch, dpre.data(), p_count, dcol.data(), p_count, false);
      dact.resize(in_ch * static_cast<std::size_t>(in_side) * in_side);
      col2im(dcol.data(), static_cast<int>(in_ch), in_side, out_side, dact.data());
    }
  }
  return grads;
}

template <class T>
void sgd_step(ParamSet<T>& params, const ParamSet<T>& grads, T lr, T momentum, ParamSet<T>& velocity) {
  if (!(lr >= T(0))) throw ConfigError("sgd learning rate must be >= 0");
  if (!(momentum >= T(0) && momentum < T(1))) throw ConfigError("sgd momentum must be in [0, 1)");
  if (grads.flat().size() != params.flat().size() || velocity.flat().size() != params.flat().size())
    throw ShapeError("sgd_step: parameter/gradient size mismatch");
  for (T g : grads.flat())
    if (!std::isfinite(g)) throw NumericError("non-finite gradient passed to sgd_step");
  kernels::active<T>().sgd_momentum(params.flat().size(), lr, momentum, grads.flat().data(), velocity.flat().data(),
                                    params.flat().data());
}

template <class T>
void momentum_update(ParamSet<T>& theta_k, const ParamSet<T>& theta_q, T m) {
  if (!(theta_k.arch() == theta_q.arch())) throw ShapeError("momentum_update: architectures differ");
  if (!(m > T(0) && m < T(1))) throw ConfigError("key momentum must be in (0, 1)");
  kernels::active<T>().axpby(theta_k.flat().size(), T(1) - m, theta_q.flat().data(), m, theta_k.flat().data());
}

template class ParamSet<float>;
template class ParamSet<double>;
template ForwardResult<float> forward(const ParamSet<float>&, std::span<const float>, bool);
template ForwardResult<double> forward(const ParamSet<double>&, std::span<const double>, bool);
template std::vector<float> pooled_features(const ParamSet<float>&, std::span<const float>);
template std::vector<double> pooled_features(const ParamSet<double>&, std::span<const double>);
template ParamSet<float> backward(const ParamSet<float>&, const Tape<float>&, std::span<const float>);
template ParamSet<double> backward(const ParamSet<double>&, const Tape<double>&, std::span<const double>);
template void sgd_step(ParamSet<float>&, const ParamSet<float>&, float, float, ParamSet<float>&);
template void sgd_step(ParamSet<double>&, const ParamSet<double>&, double, double, ParamSet<double>&);
template void momentum_update(ParamSet<float>&, const ParamSet<float>&, float);
template void momentum_update(ParamSet<double>&, const ParamSet<double>&, double);

// ---- checkpoint files ----------------------------------------------------

namespace {
constexpr char kMagic[8] = {'S', 'T', 'C', 'L', 'C', 'K', 'P', 'T'};

void put_u32(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

void put_f32(std::string& out, float f) {
  std::uint32_t u;
  std::memcpy(&u, &f, 4);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((u >> (8 * i)) & 0xff));
}

float get_f32(const unsigned char* p) {
  const std::uint32_t u = static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
                          (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
  float f;
  std::memcpy(&f, &u, 4);
  return f;
}
}  // namespace

void write_tensor_file(const std::string& path, const EncoderArch& arch, const std::vector<NamedTensor>& tensors,
                       const json& meta) {
  json header;
  header["arch"] = arch.to_json();
  header["dtype"] = "f32";
  header["endianness"] = "little";
  header["tensors"] = json::array();
  std::string payload;
  for (const auto& t : tensors) {
    std::size_t n = 1;
    for (auto s : t.shape) n *= s;
    if (n != t.values.size()) throw ShapeError("tensor " + t.name + " has " + std::to_string(t.values.size()) +
                                               " values but shape implies " + std::to_string(n));
    header["tensors"].push_back({{"name", t.name}, {"shape", t.shape}});
    for (float v : t.values) put_f32(payload, v);
  }
  header["meta"] = meta;
  const std::string h = header.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out.write(kMagic, sizeof(kMagic));
  put_u32(out, static_cast<std::uint32_t>(h.size()));
  out << h << payload;
  if (!out) throw IoError("write failed: " + path);
}

TensorFile read_tensor_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string bytes = ss.str();
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  if (bytes.size() < 12 || std::memcmp(p, kMagic, 8) != 0) throw IoError(path + " is not a checkpoint file");
  const std::uint32_t hlen = static_cast<std::uint32_t>(p[8]) | (static_cast<std::uint32_t>(p[9]) << 8) |
                             (static_cast<std::uint32_t>(p[10]) << 16) | (static_cast<std::uint32_t>(p[11]) << 24);
  if (bytes.size() < 12 + static_cast<std::size_t>(hlen)) throw IoError(path + ": truncated header");
  TensorFile f;
  std::size_t off = 12 + hlen;
  try {
    const json header = json::parse(bytes.substr(12, hlen));
    if (header.at("dtype") != "f32" || header.at("endianness") != "little")
      throw IoError(path + ": unsupported dtype/endianness");
    f.arch = EncoderArch::from_json(header.at("arch"));
    f.meta = header.value("meta", json::object());
    for (const auto& t : header.at("tensors")) {
      NamedTensor nt;
      nt.name = t.at("name").get<std::string>();
      nt.shape = t.at("shape").get<std::vector<std::size_t>>();
      std::size_t n = 1;
      for (auto s : nt.shape) n *= s;
      if (bytes.size() < off + 4 * n) throw IoError(path + ": truncated payload for " + nt.name);
      nt.values.resize(n);
      for (std::size_t i = 0; i < n; ++i) nt.values[i] = get_f32(p + off + 4 * i);
      off += 4 * n;
      f.tensors.push_back(std::move(nt));
    }
  } catch (const json::exception& e) {
    throw IoError(path + ": malformed checkpoint header: " + e.what());
  }
  return f;
}

const NamedTensor& TensorFile::get(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return t;
  throw IoError("checkpoint has no tensor named " + name);
}

std::vector<NamedTensor> export_params(const ParamSet<float>& params, const std::string& prefix) {
  std::vector<NamedTensor> out;
  for (std::size_t i = 0; i < params.tensors().size(); ++i) {
    const auto& info = params.tensors()[i];
    const auto v = params.tensor(i);
    out.push_back({prefix + info.name, info.shape, std::vector<float>(v.begin(), v.end())});
  }
  return out;
}

ParamSet<float> import_params(const TensorFile& file, const std::string& prefix) {
  ParamSet<float> params(file.arch);
  for (std::size_t i = 0; i < params.tensors().size(); ++i) {
    const auto& info = params.tensors()[i];
    const NamedTensor& t = file.get(prefix + info.name);
    if (t.shape != info.shape) throw ShapeError("checkpoint tensor " + t.name + " has the wrong shape");
    std::copy(t.values.begin(), t.values.end(), params.tensor(i).begin());
  }
  return params;
}

void save_params(const ParamSet<float>& params, const std::string& path) {
  write_tensor_file(path, params.arch(), export_params(params), json::object());
}

ParamSet<float> load_params(const std::string& path) { return import_params(read_tensor_file(path)); }

}  // namespace stcl::nn
