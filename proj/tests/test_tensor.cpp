#include "waml/tensor.hpp"

#include <cmath>

#include "doctest.h"
#include "waml/common.hpp"
#include "waml/gradcheck.hpp"

using namespace waml;
using D = Tensor<double>;

namespace {

D random_tensor(Rng& rng, int64_t r, int64_t c, bool grad = true) {
  D t = D::zeros(r, c, grad);
  for (int64_t i = 0; i < t.size(); ++i) t.data()[i] = rng.symmetric(1.0);
  return t;
}

// FD check for a loss built from a single op applied to random inputs.
template <typename MakeLoss>
double op_fd_error(uint64_t seed, std::vector<std::pair<int64_t, int64_t>> shapes, MakeLoss make) {
  Rng rng(seed);
  std::vector<std::pair<std::string, D>> params;
  for (size_t i = 0; i < shapes.size(); ++i) {
    params.emplace_back("in" + std::to_string(i), random_tensor(rng, shapes[i].first, shapes[i].second));
  }
  auto forward = [&](Tape<double>& tape) {
    std::vector<D> ins;
    for (auto& [name, t] : params) ins.push_back(t);
    return make(tape, ins);
  };
  return finite_difference_check(forward, params).max_rel_err;
}

// Weighted sum against a fixed random direction makes scalar losses that
// exercise every output entry.
D random_projection_loss(Tape<double>& tape, const D& x, uint64_t seed) {
  Rng rng(seed);
  D w = D::zeros(x.rows(), x.cols());
  for (int64_t i = 0; i < w.size(); ++i) w.data()[i] = rng.symmetric(1.0);
  return sum_all(tape, mul(tape, x, w));
}

}  // namespace

TEST_CASE("matmul forward") {
  Tape<double> tape;
  D id = D::from(2, 2, {1, 0, 0, 1});
  D a = D::from(2, 2, {1, 2, 3, 4});
  D prod = matmul(tape, id, a);
  for (int64_t i = 0; i < 4; ++i) CHECK(prod.data()[i] == a.data()[i]);

  D b = D::from(2, 1, {5, 6});
  D c = matmul(tape, a, b);
  CHECK(c.at(0, 0) == doctest::Approx(17));  // 1*5 + 2*6
  CHECK(c.at(1, 0) == doctest::Approx(39));  // 3*5 + 4*6

  CHECK_THROWS_AS(matmul(tape, a, D::from(3, 1, {1, 2, 3})), DataError);
}

TEST_CASE("grad of sum(A*B) wrt A is ones * B^T") {
  Rng rng(1);
  D a = random_tensor(rng, 3, 4);
  D b = random_tensor(rng, 4, 2, false);
  Tape<double> tape;
  D loss = sum_all(tape, matmul(tape, a, b));
  tape.backward(loss);
  for (int64_t i = 0; i < 3; ++i) {
    for (int64_t k = 0; k < 4; ++k) {
      double expected = 0.0;
      for (int64_t j = 0; j < 2; ++j) expected += b.at(k, j);
      CHECK(a.grad()[i * 4 + k] == doctest::Approx(expected));
    }
  }
}

TEST_CASE("elementwise identities") {
  Tape<double> tape;
  Rng rng(2);
  D a = random_tensor(rng, 3, 3, false);
  D zero = D::zeros(3, 3);
  D sum = add(tape, a, zero);
  D one_scaled = scale(tape, a, 1.0);
  for (int64_t i = 0; i < a.size(); ++i) {
    CHECK(sum.data()[i] == a.data()[i]);
    CHECK(one_scaled.data()[i] == a.data()[i]);
  }
}

TEST_CASE("row normalize examples") {
  Tape<double> tape;
  D a = D::from(2, 2, {3, 4, 0, 0});
  D n = row_l2_normalize(tape, a);
  CHECK(n.at(0, 0) == doctest::Approx(0.6));
  CHECK(n.at(0, 1) == doctest::Approx(0.8));
  CHECK(n.at(1, 0) == 0.0);  // zero row stays zero
  CHECK(n.at(1, 1) == 0.0);
}

TEST_CASE("layer norm examples") {
  Tape<double> tape;
  D gain = D::from(1, 2, {1, 1});
  D bias = D::from(1, 2, {0, 0});

  D constant = D::from(1, 2, {5, 5});
  D z = layer_norm(tape, constant, gain, bias);
  CHECK(z.at(0, 0) == doctest::Approx(0.0).epsilon(1e-5));
  CHECK(z.at(0, 1) == doctest::Approx(0.0).epsilon(1e-5));

  // Row [1,3]: mean 2, biased std 1 -> [-1, 1].
  D row = D::from(1, 2, {1, 3});
  D out = layer_norm(tape, row, gain, bias);
  CHECK(out.at(0, 0) == doctest::Approx(-1.0));
  CHECK(out.at(0, 1) == doctest::Approx(1.0));
}

TEST_CASE("gelu endpoints") {
  Tape<double> tape;
  D x = D::from(1, 3, {0.0, 10.0, -10.0});
  D y = gelu(tape, x);
  CHECK(y.at(0, 0) == 0.0);
  CHECK(std::abs(y.at(0, 1) - 10.0) < 1e-6);
  CHECK(std::abs(y.at(0, 2)) < 1e-6);
}

TEST_CASE("segment sum examples and dense oracle") {
  Tape<double> tape;
  D rows = D::from(3, 1, {1, 2, 3});
  D s = segment_sum(tape, rows, {0, 0, 1}, 2);
  CHECK(s.at(0, 0) == 3.0);
  CHECK(s.at(1, 0) == 3.0);

  D s3 = segment_sum(tape, rows, {0, 0, 1}, 3);
  CHECK(s3.at(2, 0) == 0.0);  // empty segment

  CHECK_THROWS_AS(segment_sum(tape, rows, {0, 0, 5}, 3), DataError);

  // Dense one-hot-matrix multiply oracle on a random instance.
  Rng rng(3);
  D vals = random_tensor(rng, 8, 4, false);
  std::vector<int64_t> seg;
  for (int i = 0; i < 8; ++i) seg.push_back(static_cast<int64_t>(rng.below(5)));
  D got = segment_sum(tape, vals, seg, 5);
  D onehot = D::zeros(5, 8);
  for (int i = 0; i < 8; ++i) onehot.at(seg[static_cast<size_t>(i)], i) = 1.0;
  D expected = matmul(tape, onehot, vals);
  for (int64_t i = 0; i < got.size(); ++i) {
    CHECK(got.data()[i] == doctest::Approx(expected.data()[i]));
  }
}

TEST_CASE("gather rows: identity, duplicates, oracle") {
  Tape<double> tape;
  Rng rng(4);
  D a = random_tensor(rng, 4, 3);

  std::vector<int64_t> all = {0, 1, 2, 3};
  D same = gather_rows(tape, a, all);
  for (int64_t i = 0; i < a.size(); ++i) CHECK(same.data()[i] == a.data()[i]);

  // Duplicate index: backward doubles that row's grad.
  a.zero_grad();
  Tape<double> t2;
  D dup = gather_rows(t2, a, {2, 2});
  D loss = sum_all(t2, dup);
  t2.backward(loss);
  for (int64_t j = 0; j < 3; ++j) {
    CHECK(a.grad()[2 * 3 + j] == doctest::Approx(2.0));
    CHECK(a.grad()[0 * 3 + j] == 0.0);
  }

  // Random gather against direct indexing.
  std::vector<int64_t> idx = {3, 0, 0, 2, 1};
  D picked = gather_rows(tape, a, idx);
  for (size_t k = 0; k < idx.size(); ++k) {
    for (int64_t j = 0; j < 3; ++j) {
      CHECK(picked.at(static_cast<int64_t>(k), j) == a.at(idx[k], j));
    }
  }
  CHECK_THROWS_AS(gather_rows(tape, a, {9}), DataError);
}

TEST_CASE("backward basics") {
  Rng rng(5);
  D a = random_tensor(rng, 3, 4);

  // loss = sum(a) -> grad all ones.
  Tape<double> tape;
  D loss = sum_all(tape, a);
  tape.backward(loss);
  for (int64_t i = 0; i < a.size(); ++i) CHECK(a.grad()[i] == 1.0);

  // Second forward+backward without zeroing doubles the grads.
  Tape<double> tape2;
  D loss2 = sum_all(tape2, a);
  tape2.backward(loss2);
  for (int64_t i = 0; i < a.size(); ++i) CHECK(a.grad()[i] == 2.0);

  // Non-scalar loss is an error.
  Tape<double> tape3;
  D y = scale(tape3, a, 2.0);
  CHECK_THROWS_AS(tape3.backward(y), NumericalError);
}

TEST_CASE("ops do not mutate inputs and reruns are bit-identical") {
  Rng rng(6);
  D a = random_tensor(rng, 4, 4);
  D b = random_tensor(rng, 4, 4);
  std::vector<double> a_before = a.values();
  std::vector<double> b_before = b.values();
  Tape<double> tape;
  D c1 = matmul(tape, a, b);
  D c2 = matmul(tape, a, b);
  CHECK(a.values() == a_before);
  CHECK(b.values() == b_before);
  CHECK(c1.values() == c2.values());

  D n1 = row_l2_normalize(tape, a);
  D n2 = row_l2_normalize(tape, a);
  CHECK(n1.values() == n2.values());
  CHECK(a.values() == a_before);
}

TEST_CASE("non-finite forward values raise a numerical error") {
  Tape<double> tape;
  D big = D::from(1, 2, {1e308, 1e308});
  CHECK_THROWS_AS(matmul_nt(tape, big, big), NumericalError);
}

TEST_CASE("finite-difference checks across every differentiable op") {
  // Tolerance from the op contract: rel err < 1e-4 at 64-bit, step 1e-5.
  auto mm = op_fd_error(11, {{3, 4}, {4, 2}}, [](Tape<double>& t, std::vector<D>& in) {
    return random_projection_loss(t, matmul(t, in[0], in[1]), 101);
  });
  CHECK(mm < 1e-4);

  auto mmnt = op_fd_error(12, {{3, 4}, {5, 4}}, [](Tape<double>& t, std::vector<D>& in) {
    return random_projection_loss(t, matmul_nt(t, in[0], in[1]), 102);
  });
  CHECK(mmnt < 1e-4);

  auto addsub = op_fd_error(13, {{3, 4}, {3, 4}}, [](Tape<double>& t, std::vector<D>& in) {
    return random_projection_loss(t, sub(t, add(t, in[0], in[1]), in[1]), 103);
  });
  CHECK(addsub < 1e-4);

  auto mul_fd = op_fd_error(14, {{3, 4}, {3, 4}}, [](Tape<double>& t, std::vector<D>& in) {
    return random_projection_loss(t, mul(t, in[0], in[1]), 104);
  });
  CHECK(mul_fd < 1e-4);

  auto broadcast = op_fd_error(15, {{3, 4}, {1, 4}}, [](Tape<double>& t, std::vector<D>& in) {
    return random_projection_loss(t, add_row_broadcast(t, in[0], in[1]), 105);
  });
  CHECK(broadcast < 1e-4);

  auto aff = op_fd_error(16, {{3, 4}}, [](Tape<double>& t, std::vector<D>& in) {
    return random_projection_loss(t, affine(t, in[0], -1.7, 0.3), 106);
  });
  CHECK(aff < 1e-4);

  auto scl = op_fd_error(17, {{3, 4}, {1, 1}}, [](Tape<double>& t, std::vector<D>& in) {
    return random_projection_loss(t, scale_by(t, in[0], in[1]), 107);
  });
  CHECK(scl < 1e-4);

  auto sg = op_fd_error(18, {{3, 4}}, [](Tape<double>& t, std::vector<D>& in) {
    return random_projection_loss(t, sigmoid(t, in[0]), 108);
  });
  CHECK(sg < 1e-4);

  auto gl = op_fd_error(19, {{3, 4}}, [](Tape<double>& t, std::vector<D>& in) {
    return random_projection_loss(t, gelu(t, in[0]), 109);
  });
  CHECK(gl < 1e-4);

  auto rl = op_fd_error(20, {{3, 4}}, [](Tape<double>& t, std::vector<D>& in) {
    return random_projection_loss(t, relu(t, in[0]), 110);
  });
  CHECK(rl < 1e-4);

  // Contract example: 4x8 normalize, rel err < 1e-5.
  auto norm_fd = op_fd_error(21, {{4, 8}}, [](Tape<double>& t, std::vector<D>& in) {
    return random_projection_loss(t, row_l2_normalize(t, in[0]), 111);
  });
  CHECK(norm_fd < 1e-5);

  auto ln = op_fd_error(22, {{3, 4}, {1, 4}, {1, 4}}, [](Tape<double>& t, std::vector<D>& in) {
    return random_projection_loss(t, layer_norm(t, in[0], in[1], in[2]), 112);
  });
  CHECK(ln < 1e-5);

  auto seg = op_fd_error(23, {{6, 3}}, [](Tape<double>& t, std::vector<D>& in) {
    return random_projection_loss(t, segment_sum(t, in[0], {0, 1, 1, 2, 0, 2}, 3), 113);
  });
  CHECK(seg < 1e-4);

  auto gat = op_fd_error(24, {{5, 3}}, [](Tape<double>& t, std::vector<D>& in) {
    return random_projection_loss(t, gather_rows(t, in[0], {4, 0, 0, 2}), 114);
  });
  CHECK(gat < 1e-4);

  auto rs = op_fd_error(25, {{4, 3}}, [](Tape<double>& t, std::vector<D>& in) {
    return random_projection_loss(t, row_scale(t, in[0], {0.5, -1.0, 0.0, 2.0}), 115);
  });
  CHECK(rs < 1e-4);

  auto cc = op_fd_error(26, {{2, 3}, {3, 3}}, [](Tape<double>& t, std::vector<D>& in) {
    return random_projection_loss(t, concat_rows(t, in[0], in[1]), 116);
  });
  CHECK(cc < 1e-4);

  auto rd = op_fd_error(27, {{4, 3}, {4, 3}}, [](Tape<double>& t, std::vector<D>& in) {
    return random_projection_loss(t, row_dot(t, in[0], in[1]), 117);
  });
  CHECK(rd < 1e-4);

  auto tk = op_fd_error(28, {{4, 5}}, [](Tape<double>& t, std::vector<D>& in) {
    return random_projection_loss(t, take_per_row(t, in[0], {1, 0, 4, 2}), 118);
  });
  CHECK(tk < 1e-4);

  auto lse = op_fd_error(29, {{4, 5}}, [](Tape<double>& t, std::vector<D>& in) {
    return random_projection_loss(t, row_logsumexp_excluding(t, in[0], {2, -1, 0, 4}), 119);
  });
  CHECK(lse < 1e-4);

  auto mn = op_fd_error(30, {{4, 5}}, [](Tape<double>& t, std::vector<D>& in) {
    return mean_all(t, sigmoid(t, in[0]));
  });
  CHECK(mn < 1e-4);
}

TEST_CASE("logsumexp stability and exclusion semantics") {
  Tape<double> tape;
  // Max-shift handles large logits without overflow.
  D big = D::from(1, 3, {1000.0, 999.0, 998.0});
  D lse = row_logsumexp_excluding(tape, big, {-1});
  CHECK(lse.at(0, 0) == doctest::Approx(1000.0 + std::log(1.0 + std::exp(-1.0) + std::exp(-2.0))));

  // Excluding the only large entry changes the result accordingly.
  D lse2 = row_logsumexp_excluding(tape, big, {0});
  CHECK(lse2.at(0, 0) == doctest::Approx(999.0 + std::log(1.0 + std::exp(-1.0))));

  // A 1-column row with its only entry excluded has no summands.
  D one = D::from(1, 1, {3.0});
  CHECK_THROWS_AS(row_logsumexp_excluding(tape, one, {0}), NumericalError);
}

TEST_CASE("disabled tape records nothing") {
  Rng rng(31);
  D a = random_tensor(rng, 3, 3);
  Tape<double> tape;
  tape.set_enabled(false);
  D out = row_l2_normalize(tape, a);
  CHECK(tape.size() == 0);
  CHECK_FALSE(out.requires_grad());
}
