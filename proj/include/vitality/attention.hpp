#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "vitality/linalg.hpp"

namespace vitality::attention {

using linalg::Matrix;
using linalg::Vector;

// Q, K, V for a single head. All three are n x d.
struct AttentionInputs {
  Matrix q;
  Matrix k;
  Matrix v;

  AttentionInputs(Matrix q_in, Matrix k_in, Matrix v_in);
  std::size_t tokens() const { return q.rows(); }
  std::size_t dim() const { return q.cols(); }
};

struct ProjectionWeights {
  Matrix w_q;
  Matrix w_k;
  Matrix w_v;
  Matrix w_o;

  std::size_t dim() const { return w_q.rows(); }
};

struct TaylorIntermediates {
  Matrix k_hat;      // n x d, mean-centered keys
  Matrix g;          // d x d, global context K_hat^T V
  Vector k_hat_sum;  // d
  Vector v_sum;      // d
  Vector t_d;        // n, Taylor denominator
  Matrix t_n;        // n x d, Taylor numerator
};

struct TaylorResult {
  Matrix z;
  TaylorIntermediates inter;
};

enum class Kernel { Softmax, Taylor };

// Numerically stable softmax of a single score row (max-subtracted).
std::vector<double> softmax(std::span<const double> scores);

Matrix softmax_attention(const AttentionInputs& inp);

// Softmax attention evaluated with K_hat in place of K. Identical output to
// softmax_attention since each score row only shifts by a constant.
Matrix mean_centered_softmax_attention(const AttentionInputs& inp);

// Linear-complexity first-order Taylor attention:
//   K_bar = (1/n) 1^T K,  K_hat = K - 1 K_bar
//   G = K_hat^T V
//   k_hat_sum = 1^T K_hat,  v_sum = 1^T V
//   t_D = n*sqrt(d) 1 + Q k_hat_sum^T
//   T_N = sqrt(d) (1 v_sum) + Q G
//   Z = diag^{-1}(t_D) T_N
// Never allocates an n x n buffer. Throws SingularDenominatorError if any
// |t_D[i]| < 1e-12.
TaylorResult taylor_attention_linear(const AttentionInputs& inp);

// Brute-force oracle for the linear form: builds the full n x n first-order
// map W[i][j] = sqrt(d) + q_i . k_hat_j, normalizes each row by its sum and
// multiplies by V.
Matrix taylor_attention_quadratic(const AttentionInputs& inp);

// Multi-head attention. x is n x (h*d); head i reads feature block
// [i*d, (i+1)*d) of x and writes the same block of the output.
Matrix mha_forward(const Matrix& x, std::span<const ProjectionWeights> heads, Kernel kernel);

Matrix random_gaussian(std::size_t rows, std::size_t cols, std::mt19937_64& rng,
                       double mean = 0.0, double stddev = 1.0);

}  // namespace vitality::attention
