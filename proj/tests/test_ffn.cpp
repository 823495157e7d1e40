#include "waml/ffn.hpp"

#include <cmath>

#include "doctest.h"
#include "oracles/scalar_model_oracle.hpp"
#include "waml/gradcheck.hpp"
#include "waml/model.hpp"

using namespace waml;
using D = Tensor<double>;

namespace {

D random_tensor(Rng& rng, int64_t r, int64_t c, bool grad = false) {
  D t = D::zeros(r, c, grad);
  for (int64_t i = 0; i < t.size(); ++i) t.data()[i] = rng.symmetric(1.0);
  return t;
}

oracle::FfnWeights as_oracle(const FfnLayerParams<double>& p) {
  oracle::FfnWeights w;
  const int64_t d = p.w1.rows();
  const int64_t h = p.w1.cols();
  w.w1.assign(static_cast<size_t>(d), oracle::Row(static_cast<size_t>(h)));
  w.w2.assign(static_cast<size_t>(h), oracle::Row(static_cast<size_t>(d)));
  for (int64_t i = 0; i < d; ++i) {
    for (int64_t j = 0; j < h; ++j) w.w1[static_cast<size_t>(i)][static_cast<size_t>(j)] = p.w1.at(i, j);
  }
  for (int64_t i = 0; i < h; ++i) {
    for (int64_t j = 0; j < d; ++j) w.w2[static_cast<size_t>(i)][static_cast<size_t>(j)] = p.w2.at(i, j);
  }
  w.b1.assign(p.b1.data(), p.b1.data() + h);
  w.b2.assign(p.b2.data(), p.b2.data() + d);
  w.ln_gain.assign(p.ln_gain.data(), p.ln_gain.data() + d);
  w.ln_bias.assign(p.ln_bias.data(), p.ln_bias.data() + d);
  w.beta = p.beta.item();
  return w;
}

double row_norm(const D& t, int64_t v) {
  double sq = 0.0;
  for (int64_t j = 0; j < t.cols(); ++j) sq += t.at(v, j) * t.at(v, j);
  return std::sqrt(sq);
}

}  // namespace

TEST_CASE("beta=0 makes the block an exact identity") {
  Rng rng(1);
  HeadConfig cfg;
  cfg.dropout_rate = 0.0;
  FfnLayerParams<double> p = init_ffn_layer<double>(6, cfg, rng);
  p.beta.data()[0] = 0.0;
  D x = random_tensor(rng, 4, 6);
  Tape<double> tape;
  D out = ffn_layer(tape, x, p, cfg, false, 0);
  CHECK(out.values() == x.values());
}

TEST_CASE("zero W1 collapses the branch to normalized b2") {
  Rng rng(2);
  HeadConfig cfg;
  cfg.dropout_rate = 0.0;
  cfg.beta_init = 0.25;
  FfnLayerParams<double> p = init_ffn_layer<double>(4, cfg, rng);
  std::fill(p.w1.values().begin(), p.w1.values().end(), 0.0);
  std::fill(p.b1.values().begin(), p.b1.values().end(), 0.0);
  p.b2 = D::from(1, 4, {3, 0, 4, 0});  // norm 5

  D x = random_tensor(rng, 2, 4);
  Tape<double> tape;
  D out = ffn_layer(tape, x, p, cfg, false, 0);
  // x2 = gelu(0) = 0, x3 = b2, residual = x + beta * b2/|b2|.
  for (int64_t i = 0; i < 2; ++i) {
    CHECK(out.at(i, 0) == doctest::Approx(x.at(i, 0) + 0.25 * 0.6));
    CHECK(out.at(i, 1) == doctest::Approx(x.at(i, 1)));
    CHECK(out.at(i, 2) == doctest::Approx(x.at(i, 2) + 0.25 * 0.8));
    CHECK(out.at(i, 3) == doctest::Approx(x.at(i, 3)));
  }
}

TEST_CASE("random block agrees with the scalar oracle to 1e-10") {
  Rng rng(3);
  HeadConfig cfg;
  cfg.dropout_rate = 0.0;
  FfnLayerParams<double> p = init_ffn_layer<double>(4, cfg, rng);
  D x = random_tensor(rng, 3, 4);

  Tape<double> tape;
  D out = ffn_layer(tape, x, p, cfg, false, 0);

  oracle::FfnWeights w = as_oracle(p);
  for (int64_t i = 0; i < 3; ++i) {
    oracle::Row xi(4);
    for (int64_t j = 0; j < 4; ++j) xi[static_cast<size_t>(j)] = x.at(i, j);
    oracle::Row expected = oracle::ffn_block_row(xi, w);
    for (int64_t j = 0; j < 4; ++j) {
      CHECK(std::abs(out.at(i, j) - expected[static_cast<size_t>(j)]) < 1e-10);
    }
  }
}

TEST_CASE("head forward: J=0 and all-beta-zero reduce to row normalization") {
  Rng rng(4);
  HeadConfig cfg;
  cfg.layers = 0;
  D e0 = random_tensor(rng, 5, 6);
  Tape<double> tape;
  D out = head_forward(tape, e0, std::span<const FfnLayerParams<double>>{}, cfg, false, 0);
  D expected = row_l2_normalize(tape, e0);
  CHECK(out.values() == expected.values());

  HeadConfig cfg3;
  cfg3.layers = 3;
  cfg3.dropout_rate = 0.0;
  std::vector<FfnLayerParams<double>> layers;
  for (int j = 0; j < 3; ++j) {
    layers.push_back(init_ffn_layer<double>(6, cfg3, rng));
    layers.back().beta.data()[0] = 0.0;
  }
  D out3 = head_forward(tape, e0, std::span<const FfnLayerParams<double>>(layers), cfg3, false, 0);
  CHECK(out3.values() == expected.values());
}

TEST_CASE("three-layer head matches the composed scalar oracle") {
  Rng rng(5);
  HeadConfig cfg;
  cfg.layers = 3;
  cfg.dropout_rate = 0.0;
  cfg.final_l2_norm = true;
  std::vector<FfnLayerParams<double>> layers;
  for (int j = 0; j < 3; ++j) layers.push_back(init_ffn_layer<double>(4, cfg, rng));
  D e0 = random_tensor(rng, 2, 4);

  Tape<double> tape;
  D out = head_forward(tape, e0, std::span<const FfnLayerParams<double>>(layers), cfg, false, 0);

  for (int64_t i = 0; i < 2; ++i) {
    oracle::Row x(4);
    for (int64_t j = 0; j < 4; ++j) x[static_cast<size_t>(j)] = e0.at(i, j);
    for (int j = 0; j < 3; ++j) x = oracle::ffn_block_row(x, as_oracle(layers[static_cast<size_t>(j)]));
    x = oracle::normalized(x);
    for (int64_t j = 0; j < 4; ++j) {
      CHECK(out.at(i, j) == doctest::Approx(x[static_cast<size_t>(j)]).epsilon(1e-10));
    }
  }
}

TEST_CASE("final norm contract and residual dominance") {
  Rng rng(6);
  HeadConfig cfg;
  cfg.layers = 3;
  cfg.dropout_rate = 0.0;
  std::vector<FfnLayerParams<double>> layers;
  double beta_sum = 0.0;
  for (int j = 0; j < 3; ++j) {
    layers.push_back(init_ffn_layer<double>(8, cfg, rng));
    beta_sum += std::abs(layers.back().beta.item());
  }
  D e0 = random_tensor(rng, 6, 8);
  Tape<double> tape;

  // Norm contract with the final normalization on.
  D out = head_forward(tape, e0, std::span<const FfnLayerParams<double>>(layers), cfg, false, 0);
  for (int64_t v = 0; v < 6; ++v) {
    CHECK(row_norm(out, v) == doctest::Approx(1.0).epsilon(1e-6));
  }

  // Before the final norm, the output stays within sum(|beta_j|) of the input.
  HeadConfig raw = cfg;
  raw.final_l2_norm = false;
  D pre = head_forward(tape, e0, std::span<const FfnLayerParams<double>>(layers), raw, false, 0);
  for (int64_t v = 0; v < 6; ++v) {
    double sq = 0.0;
    for (int64_t j = 0; j < 8; ++j) {
      const double dlt = pre.at(v, j) - e0.at(v, j);
      sq += dlt * dlt;
    }
    CHECK(std::sqrt(sq) <= beta_sum + 1e-9);
  }
}

TEST_CASE("dropout: deterministic per seed, disabled at inference") {
  Rng rng(7);
  HeadConfig cfg;
  cfg.layers = 1;
  cfg.dropout_rate = 0.4;
  std::vector<FfnLayerParams<double>> layers = {init_ffn_layer<double>(6, cfg, rng)};
  D x = random_tensor(rng, 8, 6);
  Tape<double> tape;
  auto span = std::span<const FfnLayerParams<double>>(layers);

  D a = head_forward(tape, x, span, cfg, true, 1234);
  D b = head_forward(tape, x, span, cfg, true, 1234);
  CHECK(a.values() == b.values());
  D c = head_forward(tape, x, span, cfg, true, 999);
  CHECK(a.values() != c.values());

  // Inference ignores dropout entirely.
  D inf1 = head_forward(tape, x, span, cfg, false, 1234);
  D inf2 = head_forward(tape, x, span, cfg, false, 42);
  CHECK(inf1.values() == inf2.values());
}

TEST_CASE("all FFN parameter gradients pass finite differences") {
  Rng rng(8);
  HeadConfig cfg;
  cfg.layers = 2;
  cfg.dropout_rate = 0.0;
  ModelParams<double> params;
  for (int j = 0; j < 2; ++j) params.ffn.push_back(init_ffn_layer<double>(4, cfg, rng));
  D x = random_tensor(rng, 3, 4);

  auto forward = [&](Tape<double>& tape) {
    D out = head_forward(tape, x, std::span<const FfnLayerParams<double>>(params.ffn), cfg, false, 0);
    return mean_all(tape, mul(tape, out, out));
  };
  auto report = finite_difference_check(forward, params.named());
  CHECK(report.max_rel_err < 1e-5);
  CHECK(report.entries_checked > 100);
}
