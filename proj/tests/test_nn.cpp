#include <doctest.h>

#include <cmath>
#include <fstream>
#include <limits>

#include "oracles.hpp"
#include "stcl/error.hpp"
#include "stcl/kernels.hpp"
#include "stcl/nn.hpp"
#include "stcl/rng.hpp"
#include "test_support.hpp"

using namespace stcl;
using namespace stcl::nn;

namespace {

EncoderArch small_arch() {
  EncoderArch a;
  a.input_size = 12;
  a.conv_channels = {4, 6};
  a.hidden_dim = 10;
  a.feat_dim = 5;
  return a;
}

template <class T>
std::vector<T> random_inputs(const EncoderArch& a, std::size_t batch, Rng& rng) {
  std::vector<T> v(batch * a.input_len());
  for (auto& x : v) x = static_cast<T>(rng.uniform());
  return v;
}

template <class T>
ParamSet<T> random_params(const EncoderArch& a, std::uint64_t seed) {
  ParamSet<T> p(a);
  Rng rng(seed);
  p.init(rng);
  for (std::size_t t = 0; t < p.tensors().size(); ++t)
    if (p.tensors()[t].shape.size() == 1)
      for (auto& v : p.tensor(t)) v = static_cast<T>(rng.uniform(-0.1, 0.1));
  return p;
}

}  // namespace

TEST_CASE("parameter layout") {
  const EncoderArch a;
  ParamSet<float> p(a);
  const auto& t = p.tensors();
  REQUIRE(t.size() == 12);
  CHECK(t[0].name == "conv0.weight");
  CHECK(t[0].shape == std::vector<std::size_t>{16, 3, 3, 3});
  CHECK(t[7].name == "conv3.bias");
  CHECK(t[8].name == "head.fc1.weight");
  CHECK(t[8].shape == std::vector<std::size_t>{128, 128});
  CHECK(t[10].shape == std::vector<std::size_t>{64, 128});
  CHECK(p.index_of("head.fc2.bias") == 11);
  std::size_t total = 0;
  for (const auto& info : t) {
    CHECK(info.offset == total);
    total += info.size;
  }
  CHECK(total == p.flat().size());
  CHECK(a.output_side(0) == 32);
  CHECK(a.output_side(3) == 4);
}

TEST_CASE("He initialization with zero biases") {
  ParamSet<double> p(EncoderArch{});
  Rng rng(1);
  p.init(rng);
  const auto w = p.tensor(p.conv_weight(3));
  double s2 = 0.0;
  for (double v : w) s2 += v * v;
  CHECK(std::sqrt(s2 / static_cast<double>(w.size())) == doctest::Approx(std::sqrt(2.0 / (64 * 9))).epsilon(0.03));
  for (double v : p.tensor(p.fc1_bias())) CHECK(v == 0.0);
  const auto c = p.checksum();
  p.flat()[5] += 1e-9;
  CHECK(p.checksum() != c);
}

TEST_CASE("forward: unit outputs, batch independence, pooled tap") {
  const EncoderArch a = small_arch();
  const auto p = random_params<double>(a, 3);
  Rng rng(4);
  const auto in = random_inputs<double>(a, 3, rng);
  const auto all = forward<double>(p, in, false);
  REQUIRE(all.normalized.size() == 3u * 5u);
  for (std::size_t b = 0; b < 3; ++b) {
    double n = 0.0;
    for (std::size_t d = 0; d < 5; ++d) n += all.normalized[b * 5 + d] * all.normalized[b * 5 + d];
    CHECK(n == doctest::Approx(1.0));
    const std::span<const double> one(in.data() + b * a.input_len(), a.input_len());
    const auto single = forward<double>(p, one, false);
    for (std::size_t d = 0; d < 5; ++d) CHECK(single.normalized[d] == all.normalized[b * 5 + d]);
  }
  CHECK(pooled_features<double>(p, in) == all.pooled);
  CHECK_FALSE(all.tape.has_value());
  CHECK(forward<double>(p, in, true).tape.has_value());
}

TEST_CASE("forward agrees with a direct-loop reference") {
  EncoderArch a = small_arch();
  a.input_size = 17;
  const auto p = random_params<double>(a, 5);
  Rng rng(6);
  const auto in = random_inputs<double>(a, 1, rng);
  std::vector<double> k(5, 0.0), neg(5, 0.0);
  k[0] = 1.0;
  neg[1] = 1.0;
  oracle::RefNet ref(p, in, k, neg, {1}, 0.2, false);
  const auto out = forward<double>(p, in, false);
  for (std::size_t d = 0; d < 5; ++d) CHECK(out.normalized[d] == doctest::Approx(ref.output(d)).epsilon(1e-12));
}

TEST_CASE("float and double paths agree") {
  const EncoderArch a = small_arch();
  const auto pd = random_params<double>(a, 7);
  const auto pf = pd.cast<float>();
  Rng rng(8);
  const auto in = random_inputs<double>(a, 2, rng);
  const std::vector<float> inf(in.begin(), in.end());
  const auto od = forward<double>(pd, in, false);
  const auto of = forward<float>(pf, inf, false);
  for (std::size_t i = 0; i < od.normalized.size(); ++i) CHECK(of.normalized[i] == doctest::Approx(od.normalized[i]).epsilon(1e-4));
}

TEST_CASE("backward matches central differences") {
  const EncoderArch a = small_arch();
  auto p = random_params<double>(a, 9);
  Rng rng(10);
  const auto in = random_inputs<double>(a, 2, rng);
  // Loss: fixed linear functional of the normalized outputs.
  std::vector<double> w(2 * 5);
  for (auto& x : w) x = rng.uniform(-1, 1);
  auto loss = [&](const ParamSet<double>& q) {
    const auto o = forward<double>(q, in, false);
    double s = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * o.normalized[i];
    return s;
  };
  const auto f = forward<double>(p, in, true);
  const auto g = backward<double>(p, *f.tape, w);
  const double eps = 1e-6;
  double worst = 0.0;
  for (std::size_t i = 0; i < p.flat().size(); ++i) {
    const double saved = p.flat()[i];
    p.flat()[i] = saved + eps;
    const double lp = loss(p);
    p.flat()[i] = saved - eps;
    const double lm = loss(p);
    p.flat()[i] = saved;
    const double num = (lp - lm) / (2 * eps);
    worst = std::max(worst, std::abs(num - g.flat()[i]));
  }
  CHECK(worst < 1e-7);
}

TEST_CASE("non-finite activations name the layer") {
  const EncoderArch a = small_arch();
  auto p = random_params<float>(a, 11);
  Rng rng(12);
  auto in = random_inputs<float>(a, 1, rng);
  in[0] = std::numeric_limits<float>::quiet_NaN();
  try {
    forward<float>(p, in, false);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("conv0") != std::string::npos);
  }
  CHECK_THROWS_AS(forward<float>(p, std::vector<float>(7), false), ShapeError);
}

TEST_CASE("sgd with momentum and the key update") {
  EncoderArch a = small_arch();
  ParamSet<double> p(a), g(a), v(a);
  p.fill(1.0);
  g.fill(0.5);
  v.fill(0.0);
  sgd_step<double>(p, g, 0.1, 0.9, v);
  CHECK(v.flat()[0] == 0.5);
  CHECK(p.flat()[0] == doctest::Approx(0.95));
  sgd_step<double>(p, g, 0.1, 0.9, v);
  CHECK(v.flat()[3] == doctest::Approx(0.95));
  CHECK(p.flat()[3] == doctest::Approx(0.855));

  ParamSet<double> k(a), q(a);
  k.fill(1.0);
  q.fill(0.0);
  momentum_update<double>(k, q, 0.99);
  CHECK(k.flat()[0] == doctest::Approx(0.99));
  CHECK_THROWS_AS(momentum_update<double>(k, q, 1.0), ConfigError);

  g.flat()[2] = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(sgd_step<double>(p, g, 0.1, 0.9, v), NumericError);
  g.fill(0.5);
  CHECK_THROWS_AS(sgd_step<double>(p, g, -0.1, 0.9, v), ConfigError);
  CHECK_THROWS_AS(sgd_step<double>(p, g, 0.1, 1.0, v), ConfigError);
}

TEST_CASE("training kernels agree across backends") {
  const EncoderArch a = small_arch();
  const auto p = random_params<float>(a, 13);
  Rng rng(14);
  const auto in = random_inputs<float>(a, 4, rng);
  std::vector<float> w(4 * 5);
  for (auto& x : w) x = static_cast<float>(rng.uniform(-1, 1));
  const kernels::Backend before = kernels::active_backend();
  std::vector<std::vector<float>> outs, grads;
  for (kernels::Backend b : kernels::available_backends()) {
    kernels::set_backend(b);
    const auto f = forward<float>(p, in, true);
    outs.push_back(f.normalized);
    const auto g = backward<float>(p, *f.tape, w);
    grads.emplace_back(g.flat().begin(), g.flat().end());
  }
  kernels::set_backend(before);
  for (std::size_t i = 1; i < outs.size(); ++i) {
    for (std::size_t j = 0; j < outs[0].size(); ++j) CHECK(outs[i][j] == doctest::Approx(outs[0][j]).epsilon(1e-5));
    for (std::size_t j = 0; j < grads[0].size(); ++j)
      CHECK(std::abs(grads[i][j] - grads[0][j]) <= 1e-5f * (1.0f + std::abs(grads[0][j])));
  }
}

TEST_CASE("checkpoint files round trip") {
  TempDir dir("nn");
  const auto p = random_params<float>(small_arch(), 15);
  save_params(p, dir / "p.ckpt");
  CHECK(load_params(dir / "p.ckpt") == p);
  {
    std::ifstream in(dir / "p.ckpt", std::ios::binary);
    char magic[8];
    in.read(magic, 8);
    CHECK(std::string(magic, 8) == "STCLCKPT");
  }
  write_tensor_file(dir / "t.ckpt", p.arch(), export_params(p, "query."), {{"step", 7}});
  const TensorFile f = read_tensor_file(dir / "t.ckpt");
  CHECK(f.meta.at("step") == 7);
  CHECK(import_params(f, "query.") == p);
  CHECK_THROWS_AS(import_params(f, "key."), IoError);
  {
    std::ofstream out(dir / "bad.ckpt", std::ios::binary);
    out << "NOTACKPT....";
  }
  CHECK_THROWS_AS(read_tensor_file(dir / "bad.ckpt"), IoError);
  CHECK_THROWS_AS(read_tensor_file(dir / "missing.ckpt"), IoError);
}
