#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace smear::tsne {

/// Row-major n x n matrix of joint probabilities.
struct AffinityMatrix {
  std::size_t n = 0;
  std::vector<double> p;

  double operator()(std::size_t i, std::size_t j) const { return p[i * n + j]; }
};

/// Throws std::logic_error unless P is symmetric, non-negative, sums to 1
/// within tol and has a zero diagonal.
void check_invariants(const AffinityMatrix& P, double tol = 1e-9);

struct Calibration {
  double beta = 1.0;     // precision 1 / (2 sigma^2)
  double sigma = 0.0;
  double entropy_bits = 0.0;
  int iterations = 0;
  bool converged = false;
};

inline constexpr double kPerplexityTolerance = 1e-5;

/// Binary search on the Gaussian precision so the conditional distribution
/// over `sq_distances` (squared distances to every other point) has entropy
/// log2(perplexity) within `tol` bits. The search also keeps going until 2^H
/// is within kPerplexityTolerance of the target, so large perplexities meet
/// the same absolute bound. On non-convergence the best iterate is returned
/// with converged = false.
Calibration calibrate_sigma(std::span<const double> sq_distances, double perplexity,
                            double tol = 1e-5, int max_iter = 64);

/// Conditional probabilities p_{j|i} for the calibrated precision.
std::vector<double> conditional_row(std::span<const double> sq_distances, double beta);

inline constexpr double kProbabilityFloor = 1e-12;

/// Symmetrized Gaussian affinities (p_{j|i} + p_{i|j}) / 2n. Off-diagonal
/// entries are floored at kProbabilityFloor and renormalized.
AffinityMatrix joint_probabilities(const std::vector<std::vector<double>>& X,
                                   double perplexity = 30.0, double tol = 1e-5, int max_iter = 64);

/// Student-t (one degree of freedom) affinities of a 2-D embedding, Y row-major n x 2.
AffinityMatrix student_affinities(std::span<const double> Y, std::size_t n);

/// sum P log(P / Q) in nats, with 0 log 0 = 0 and Q floored at kProbabilityFloor.
double kl_divergence(std::span<const double> P, std::span<const double> Q);
double kl_divergence(const AffinityMatrix& P, const AffinityMatrix& Q);

/// KL(P || Q(Y)) and its gradient 4 sum_j (p_ij - q_ij)(y_i - y_j) / (1 + |y_i - y_j|^2).
double embedding_kl(const AffinityMatrix& P, std::span<const double> Y);
std::vector<double> kl_gradient(const AffinityMatrix& P, std::span<const double> Y,
                                double exaggeration = 1.0);

struct Params {
  double perplexity = 30.0;
  int iterations = 1000;
  double early_exaggeration = 12.0;
  int exaggeration_iters = 250;
  double learning_rate = 200.0;
  double initial_momentum = 0.5;
  double final_momentum = 0.8;
  int momentum_switch_iter = 250;
  double init_stddev = 1e-4;
  std::uint64_t seed = 0;
};

struct Embedding {
  std::size_t n = 0;
  std::vector<double> y;  // row-major n x 2
  std::vector<std::string> labels;
  std::vector<double> kl_trace;  // KL before the first step, then after each iteration
};

/// Exact t-SNE by gradient descent with momentum and per-coordinate gains.
/// `labels` are carried through untouched (may be empty).
Embedding embed(const std::vector<std::vector<double>>& X, const Params& params,
                std::vector<std::string> labels = {});

}  // namespace smear::tsne
