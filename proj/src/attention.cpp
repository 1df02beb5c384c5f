#include "vitality/attention.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace vitality::attention {

using linalg::ShapeError;
using linalg::SingularDenominatorError;

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

// Z = softmax(Q K^T / sqrt(d)) V, one score row at a time.
Matrix softmax_with_keys(const Matrix& q, const Matrix& k, const Matrix& v) {
  const std::size_t n = q.rows();
  const double scale = 1.0 / std::sqrt(static_cast<double>(q.cols()));
  Matrix z(n, v.cols());
  std::vector<double> scores(k.rows());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < k.rows(); ++j) scores[j] = dot(q.row(i), k.row(j)) * scale;
    const auto weights = softmax(scores);
    auto out = z.row(i);
    for (std::size_t j = 0; j < k.rows(); ++j) {
      auto vj = v.row(j);
      for (std::size_t c = 0; c < v.cols(); ++c) out[c] += weights[j] * vj[c];
    }
  }
  return z;
}

Matrix head_slice(const Matrix& x, std::size_t head, std::size_t d) {
  Matrix s(x.rows(), d);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto src = x.row(r).subspan(head * d, d);
    std::copy(src.begin(), src.end(), s.row(r).begin());
  }
  return s;
}

}  // namespace

AttentionInputs::AttentionInputs(Matrix q_in, Matrix k_in, Matrix v_in)
    : q(std::move(q_in)), k(std::move(k_in)), v(std::move(v_in)) {
  if (q.rows() != k.rows() || q.rows() != v.rows() || q.cols() != k.cols() ||
      q.cols() != v.cols()) {
    throw ShapeError("attention inputs must share dims: Q " + q.shape_string() + ", K " +
                     k.shape_string() + ", V " + v.shape_string());
  }
}

std::vector<double> softmax(std::span<const double> scores) {
  std::vector<double> out(scores.begin(), scores.end());
  if (out.empty()) return out;
  const double mx = *std::max_element(out.begin(), out.end());
  double sum = 0.0;
  for (double& x : out) {
    x = std::exp(x - mx);
    sum += x;
  }
  for (double& x : out) x /= sum;
  return out;
}

Matrix softmax_attention(const AttentionInputs& inp) {
  return softmax_with_keys(inp.q, inp.k, inp.v);
}

Matrix mean_centered_softmax_attention(const AttentionInputs& inp) {
  const auto centered = linalg::mean_center_cols(inp.k);
  return softmax_with_keys(inp.q, centered.k_hat, inp.v);
}

TaylorResult taylor_attention_linear(const AttentionInputs& inp) {
  const std::size_t n = inp.tokens();
  const std::size_t d = inp.dim();
  const double sqrt_d = std::sqrt(static_cast<double>(d));

  // Step 1
  auto [k_hat, k_bar] = linalg::mean_center_cols(inp.k);
  // Step 2
  Matrix g = linalg::matmul_tn(k_hat, inp.v);
  // Step 3
  Vector k_hat_sum = linalg::col_sum(k_hat);
  Vector v_sum = linalg::col_sum(inp.v);

  // Step 4
  Vector t_d(n);
  const double base = static_cast<double>(n) * sqrt_d;
  for (std::size_t i = 0; i < n; ++i) t_d[i] = base + dot(inp.q.row(i), k_hat_sum.values());

  // Step 5
  Matrix t_n = linalg::matmul(inp.q, g);
  for (std::size_t i = 0; i < n; ++i) {
    auto r = t_n.row(i);
    for (std::size_t j = 0; j < d; ++j) r[j] += sqrt_d * v_sum[j];
  }

  // Step 6
  Matrix z = linalg::diag_inv_scale_rows(t_d, t_n);

  return {std::move(z),
          {std::move(k_hat), std::move(g), std::move(k_hat_sum), std::move(v_sum),
           std::move(t_d), std::move(t_n)}};
}

Matrix taylor_attention_quadratic(const AttentionInputs& inp) {
  const std::size_t n = inp.tokens();
  const std::size_t d = inp.dim();
  const double sqrt_d = std::sqrt(static_cast<double>(d));

  // Centering recomputed here from column means rather than via linalg.
  std::vector<double> mean(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) mean[j] += inp.k(i, j);
  for (double& m : mean) m /= static_cast<double>(n);
  Matrix k_hat(n, d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) k_hat(i, j) = inp.k(i, j) - mean[j];

  Matrix weights(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) weights(i, j) = sqrt_d + dot(inp.q.row(i), k_hat.row(j));

  Matrix z(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    auto w = weights.row(i);
    const double denom = std::accumulate(w.begin(), w.end(), 0.0);
    if (std::abs(denom) < linalg::kSingularThreshold) throw SingularDenominatorError(i, denom);
    auto out = z.row(i);
    for (std::size_t j = 0; j < n; ++j) {
      auto vj = inp.v.row(j);
      for (std::size_t c = 0; c < d; ++c) out[c] += w[j] * vj[c];
    }
    for (double& x : out) x /= denom;
  }
  return z;
}

Matrix mha_forward(const Matrix& x, std::span<const ProjectionWeights> heads, Kernel kernel) {
  if (heads.empty()) throw ShapeError("mha_forward: at least one head is required");
  const std::size_t h = heads.size();
  if (x.cols() % h != 0) {
    throw ShapeError("mha_forward: input " + x.shape_string() + " not divisible into " +
                     std::to_string(h) + " heads");
  }
  const std::size_t d = x.cols() / h;
  for (std::size_t i = 0; i < h; ++i) {
    for (const Matrix* w : {&heads[i].w_q, &heads[i].w_k, &heads[i].w_v, &heads[i].w_o}) {
      if (w->rows() != d || w->cols() != d) {
        throw ShapeError("mha_forward: head " + std::to_string(i) + " weight " +
                         w->shape_string() + " does not match head dim " + std::to_string(d));
      }
    }
  }

  Matrix out(x.rows(), x.cols());
  for (std::size_t i = 0; i < h; ++i) {
    const Matrix xh = head_slice(x, i, d);
    AttentionInputs inp(linalg::matmul(xh, heads[i].w_q), linalg::matmul(xh, heads[i].w_k),
                        linalg::matmul(xh, heads[i].w_v));
    const Matrix z = kernel == Kernel::Softmax ? softmax_attention(inp)
                                               : taylor_attention_linear(inp).z;
    const Matrix o = linalg::matmul(z, heads[i].w_o);
    for (std::size_t r = 0; r < x.rows(); ++r) {
      auto src = o.row(r);
      std::copy(src.begin(), src.end(), out.row(r).begin() + static_cast<std::ptrdiff_t>(i * d));
    }
  }
  return out;
}

Matrix random_gaussian(std::size_t rows, std::size_t cols, std::mt19937_64& rng, double mean,
                       double stddev) {
  std::normal_distribution<double> dist(mean, stddev);
  Matrix m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (double& x : m.row(r)) x = dist(rng);
  return m;
}

}  // namespace vitality::attention
