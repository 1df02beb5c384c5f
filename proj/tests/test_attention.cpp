#include <doctest.h>

#include <cmath>
#include <random>

#include "vitality/attention.hpp"

using namespace vitality::attention;
using vitality::linalg::alloc_stats::reset;
using vitality::linalg::alloc_stats::snapshot;
using vitality::linalg::max_abs_diff;
using vitality::linalg::SingularDenominatorError;

namespace {

AttentionInputs worked_example() {
  return AttentionInputs(Matrix{{1}, {0}}, Matrix{{1}, {0}}, Matrix{{2}, {4}});
}

AttentionInputs random_inputs(std::size_t n, std::size_t d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto q = random_gaussian(n, d, rng, 0.0, 0.3);
  auto k = random_gaussian(n, d, rng, 0.0, 0.3);
  auto v = random_gaussian(n, d, rng);
  return AttentionInputs(std::move(q), std::move(k), std::move(v));
}

// Direct exp(q.k / sqrt d) weighting, no max subtraction.
Matrix naive_softmax_attention(const AttentionInputs& in) {
  const auto n = in.tokens(), d = in.dim();
  Matrix z(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> w(n);
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t c = 0; c < d; ++c) s += in.q(i, c) * in.k(j, c);
      w[j] = std::exp(s / std::sqrt(double(d)));
      total += w[j];
    }
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t c = 0; c < d; ++c) z(i, c) += w[j] / total * in.v(j, c);
  }
  return z;
}

Matrix column_means(const Matrix& v) {
  Matrix out(v.rows(), v.cols());
  for (std::size_t c = 0; c < v.cols(); ++c) {
    double s = 0.0;
    for (std::size_t r = 0; r < v.rows(); ++r) s += v(r, c);
    for (std::size_t r = 0; r < v.rows(); ++r) out(r, c) = s / double(v.rows());
  }
  return out;
}

}  // namespace

TEST_CASE("inputs validate shapes") {
  CHECK_THROWS_AS(AttentionInputs(Matrix(3, 2), Matrix(3, 2), Matrix(2, 2)),
                  vitality::linalg::ShapeError);
  CHECK_THROWS_AS(AttentionInputs(Matrix(3, 2), Matrix(3, 3), Matrix(3, 2)),
                  vitality::linalg::ShapeError);
}

TEST_CASE("softmax row is stable and normalized") {
  const std::vector<double> big{1000.0, 1001.0, 999.0};
  const auto p = softmax(big);
  double s = 0.0;
  for (double x : p) {
    CHECK(std::isfinite(x));
    s += x;
  }
  CHECK(s == doctest::Approx(1.0).epsilon(1e-15));
  const auto shifted = softmax(std::vector<double>{0.0, 1.0, -1.0});
  for (std::size_t i = 0; i < 3; ++i) CHECK(p[i] == doctest::Approx(shifted[i]).epsilon(1e-14));
}

TEST_CASE("softmax attention worked example") {
  const auto z = softmax_attention(worked_example());
  const double e = std::exp(1.0);
  CHECK(z(0, 0) == doctest::Approx((2 * e + 4) / (e + 1)).epsilon(1e-14));
  CHECK(z(0, 0) == doctest::Approx(2.5379).epsilon(1e-4));
  CHECK(z(1, 0) == doctest::Approx(3.0).epsilon(1e-14));
  CHECK(max_abs_diff(mean_centered_softmax_attention(worked_example()), z) < 1e-12);
}

TEST_CASE("softmax attention matches naive oracle") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto in = random_inputs(5 + seed, 3 + seed % 4, seed);
    CHECK(max_abs_diff(softmax_attention(in), naive_softmax_attention(in)) < 1e-12);
  }
}

TEST_CASE("softmax degenerate cases") {
  const auto in = random_inputs(8, 4, 42);
  const AttentionInputs constant_v(in.q, in.k, Matrix(8, 4, 1.75));
  const auto z = softmax_attention(constant_v);
  for (double x : z.values()) CHECK(x == doctest::Approx(1.75).epsilon(1e-14));

  const AttentionInputs zero_q(Matrix(8, 4), in.k, in.v);
  CHECK(max_abs_diff(softmax_attention(zero_q), column_means(in.v)) < 1e-12);

  const AttentionInputs constant_k(in.q, Matrix(8, 4, 0.4), in.v);
  CHECK(max_abs_diff(mean_centered_softmax_attention(constant_k), column_means(in.v)) < 1e-12);
}

TEST_CASE("mean-centering does not change softmax attention") {
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    std::mt19937_64 rng(seed);
    // Keys with a large common offset make the shift visible in raw scores.
    auto k = random_gaussian(8, 4, rng, 3.0, 1.0);
    const AttentionInputs in(random_gaussian(8, 4, rng), std::move(k), random_gaussian(8, 4, rng));
    CHECK(max_abs_diff(softmax_attention(in), mean_centered_softmax_attention(in)) < 1e-9);
  }
}

TEST_CASE("taylor linear worked example intermediates") {
  const auto r = taylor_attention_linear(worked_example());
  CHECK(r.inter.k_hat == Matrix{{0.5}, {-0.5}});
  CHECK(r.inter.g == Matrix{{-1}});
  CHECK(r.inter.k_hat_sum == Vector{0});
  CHECK(r.inter.v_sum == Vector{6});
  CHECK(r.inter.t_d == Vector{2, 2});
  CHECK(r.inter.t_n == Matrix{{5}, {6}});
  CHECK(max_abs_diff(r.z, Matrix{{2.5}, {3.0}}) < 1e-12);
  CHECK(max_abs_diff(taylor_attention_quadratic(worked_example()), Matrix{{2.5}, {3.0}}) < 1e-12);
}

TEST_CASE("taylor linear equals quadratic oracle") {
  std::mt19937_64 pick(2024);
  std::uniform_int_distribution<std::size_t> nd(4, 64), dd(2, 32);
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto in = random_inputs(nd(pick), dd(pick), seed);
    CHECK(max_abs_diff(taylor_attention_linear(in).z, taylor_attention_quadratic(in)) < 1e-9);
  }
}

TEST_CASE("taylor degenerate cases") {
  const auto in = random_inputs(16, 8, 5);
  const AttentionInputs constant_k(in.q, Matrix(16, 8, -0.3), in.v);
  const auto r = taylor_attention_linear(constant_k);
  for (double x : r.inter.g.values()) CHECK(x == 0.0);
  CHECK(max_abs_diff(r.z, column_means(in.v)) < 1e-12);

  const AttentionInputs zero_q(Matrix(16, 8), in.k, in.v);
  CHECK(max_abs_diff(taylor_attention_quadratic(zero_q), column_means(in.v)) < 1e-12);
  CHECK(max_abs_diff(taylor_attention_linear(zero_q).z, column_means(in.v)) < 1e-12);
}

TEST_CASE("taylor is first-order close to softmax for weak similarities") {
  const auto in = random_inputs(32, 8, 9);
  AttentionInputs weak(in.q, in.k, in.v);
  for (std::size_t i = 0; i < 32; ++i)
    for (std::size_t c = 0; c < 8; ++c) weak.q(i, c) *= 0.05;
  CHECK(max_abs_diff(taylor_attention_linear(weak).z, softmax_attention(weak)) < 1e-3);
}

TEST_CASE("taylor denominator is n sqrt(d) once keys are centered") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto in = random_inputs(12, 6, seed);
    const auto r = taylor_attention_linear(in);
    for (double t : r.inter.t_d.values()) CHECK(t == doctest::Approx(12 * std::sqrt(6.0)));
  }
}

TEST_CASE("singular divisor is rejected") {
  CHECK_THROWS_AS(vitality::linalg::diag_inv_scale_rows(Vector{0.0, 1.0}, Matrix{{1}, {1}}),
                  SingularDenominatorError);
}

TEST_CASE("mha_forward") {
  std::mt19937_64 rng(17);
  const auto x = random_gaussian(10, 4, rng, 0.0, 0.5);
  const ProjectionWeights eye{Matrix::identity(4), Matrix::identity(4), Matrix::identity(4),
                              Matrix::identity(4)};
  const std::vector<ProjectionWeights> one{eye};
  CHECK(max_abs_diff(mha_forward(x, one, Kernel::Softmax),
                     softmax_attention(AttentionInputs(x, x, x))) < 1e-12);

  std::vector<ProjectionWeights> three;
  for (int i = 0; i < 3; ++i) {
    three.push_back({random_gaussian(64, 64, rng, 0.0, 0.02), random_gaussian(64, 64, rng, 0.0, 0.02),
                     random_gaussian(64, 64, rng, 0.0, 0.02), random_gaussian(64, 64, rng, 0.0, 0.02)});
  }
  const auto big = random_gaussian(196, 192, rng);
  const auto out = mha_forward(big, three, Kernel::Taylor);
  CHECK(out.rows() == 196);
  CHECK(out.cols() == 192);

  const std::vector<ProjectionWeights> w{{random_gaussian(4, 4, rng, 0.0, 0.3),
                                          random_gaussian(4, 4, rng, 0.0, 0.3),
                                          random_gaussian(4, 4, rng), random_gaussian(4, 4, rng)}};
  const AttentionInputs projected(vitality::linalg::matmul(x, w[0].w_q),
                                  vitality::linalg::matmul(x, w[0].w_k),
                                  vitality::linalg::matmul(x, w[0].w_v));
  const auto oracle = vitality::linalg::matmul(taylor_attention_quadratic(projected), w[0].w_o);
  CHECK(max_abs_diff(mha_forward(x, w, Kernel::Taylor), oracle) < 1e-9);

  CHECK_THROWS_AS(mha_forward(Matrix(4, 5), three, Kernel::Softmax), vitality::linalg::ShapeError);
  CHECK_THROWS_AS(mha_forward(x, std::vector<ProjectionWeights>{}, Kernel::Softmax),
                  vitality::linalg::ShapeError);
}

TEST_CASE("random_gaussian is seed-deterministic") {
  std::mt19937_64 a(99), b(99);
  CHECK(random_gaussian(5, 3, a) == random_gaussian(5, 3, b));
}

namespace {
std::size_t peak_aux_bytes(bool linear, std::size_t n, std::size_t d) {
  const auto in = random_inputs(n, d, n);
  reset();
  const auto base = snapshot().live_bytes;
  if (linear) {
    (void)taylor_attention_linear(in);
  } else {
    (void)taylor_attention_quadratic(in);
  }
  return snapshot().peak_bytes - base;
}
}  // namespace

TEST_CASE("linear path memory grows linearly, quadratic oracle quadratically") {
  const std::size_t d = 4;
  for (std::size_t n : {128, 256}) {
    const double lin = double(peak_aux_bytes(true, 2 * n, d)) / double(peak_aux_bytes(true, n, d));
    const double quad =
        double(peak_aux_bytes(false, 2 * n, d)) / double(peak_aux_bytes(false, n, d));
    CHECK(lin <= 2.2);
    CHECK(quad >= 3.5);
  }
  // The linear path never allocates an n x n block.
  const auto in = random_inputs(512, d, 1);
  reset();
  (void)taylor_attention_linear(in);
  CHECK(snapshot().largest_block < 512 * 512 * sizeof(double) / 8);
}
