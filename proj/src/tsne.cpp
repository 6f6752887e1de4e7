#include "smear/tsne.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "smear/rng.hpp"

namespace smear::tsne {

namespace {

// Entropy in bits of the distribution p_j ∝ exp(-beta * d_j).
double entropy_bits(std::span<const double> d, double beta, std::vector<double>& p) {
  p.resize(d.size());
  double z = 0;
  for (std::size_t j = 0; j < d.size(); ++j) {
    p[j] = std::exp(-beta * d[j]);
    z += p[j];
  }
  double h = 0;
  for (auto& v : p) {
    v /= z;
    if (v > 0) h -= v * std::log2(v);
  }
  return h;
}

std::vector<std::vector<double>> squared_distances(const std::vector<std::vector<double>>& X) {
  const std::size_t n = X.size();
  std::vector<std::vector<double>> d(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double s = 0;
      for (std::size_t k = 0; k < X[i].size(); ++k) {
        const double t = X[i][k] - X[j][k];
        s += t * t;
      }
      d[i][j] = d[j][i] = s;
    }
  }
  return d;
}

// Fills num (1 / (1 + |yi - yj|^2), zero diagonal) and returns its sum.
double student_kernel(std::span<const double> Y, std::size_t n, std::vector<double>& num) {
  num.assign(n * n, 0.0);
  double z = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double dx = Y[2 * i] - Y[2 * j];
      const double dy = Y[2 * i + 1] - Y[2 * j + 1];
      const double v = 1.0 / (1.0 + dx * dx + dy * dy);
      num[i * n + j] = num[j * n + i] = v;
      z += 2 * v;
    }
  }
  return z;
}

}  // namespace

void check_invariants(const AffinityMatrix& P, double tol) {
  if (P.p.size() != P.n * P.n) throw std::logic_error("affinity matrix has the wrong size");
  double sum = 0;
  for (std::size_t i = 0; i < P.n; ++i) {
    if (P(i, i) != 0.0) throw std::logic_error("affinity matrix has a non-zero diagonal");
    for (std::size_t j = 0; j < P.n; ++j) {
      const double v = P(i, j);
      if (!(v >= 0.0) || !std::isfinite(v)) throw std::logic_error("negative or non-finite affinity");
      if (v != P(j, i)) throw std::logic_error("affinity matrix is not symmetric");
      sum += v;
    }
  }
  if (std::abs(sum - 1.0) > tol) throw std::logic_error("affinities do not sum to 1");
}

Calibration calibrate_sigma(std::span<const double> sq_distances, double perplexity, double tol,
                            int max_iter) {
  const std::size_t m = sq_distances.size();
  if (m < 2) throw std::invalid_argument("calibration needs at least 3 points");
  if (!(perplexity > 0.0) || perplexity >= static_cast<double>(m + 1)) {
    throw std::invalid_argument("perplexity must lie in (0, n)");
  }

  // Search in units of the mean shifted distance so the result is scale free.
  const double dmin = *std::min_element(sq_distances.begin(), sq_distances.end());
  std::vector<double> d(m);
  double scale = 0;
  for (std::size_t j = 0; j < m; ++j) {
    d[j] = sq_distances[j] - dmin;
    scale += d[j];
  }
  scale /= static_cast<double>(m);
  if (scale > 0) {
    for (auto& v : d) v /= scale;
  } else {
    scale = 1.0;
  }

  const double target = std::log2(perplexity);
  std::vector<double> p;
  double beta = 1.0, lo = 0.0, hi = std::numeric_limits<double>::infinity();
  Calibration best;
  double best_err = std::numeric_limits<double>::infinity();
  for (int it = 1; it <= max_iter; ++it) {
    const double h = entropy_bits(d, beta, p);
    const double err = std::abs(h - target);
    if (err < best_err) {
      best_err = err;
      best.beta = beta;
      best.entropy_bits = h;
      best.iterations = it;
    }
    if (err <= tol && std::abs(std::exp2(h) - perplexity) <= kPerplexityTolerance) break;
    if (h > target) {
      lo = beta;
      beta = std::isinf(hi) ? beta * 2.0 : 0.5 * (lo + hi);
    } else {
      hi = beta;
      beta = 0.5 * (lo + hi);
    }
  }
  best.converged = best_err <= tol;
  best.beta /= scale;
  best.sigma = std::sqrt(1.0 / (2.0 * best.beta));
  return best;
}

std::vector<double> conditional_row(std::span<const double> sq_distances, double beta) {
  const double dmin = *std::min_element(sq_distances.begin(), sq_distances.end());
  std::vector<double> p(sq_distances.size());
  double z = 0;
  for (std::size_t j = 0; j < p.size(); ++j) {
    p[j] = std::exp(-beta * (sq_distances[j] - dmin));
    z += p[j];
  }
  for (auto& v : p) v /= z;
  return p;
}

AffinityMatrix joint_probabilities(const std::vector<std::vector<double>>& X, double perplexity,
                                   double tol, int max_iter) {
  const std::size_t n = X.size();
  if (n < 3) throw std::invalid_argument("t-SNE needs at least 3 points");
  for (const auto& row : X) {
    if (row.size() != X.front().size()) throw std::invalid_argument("inconsistent feature dimension");
  }
  const auto dist = squared_distances(X);
  std::vector<double> cond(n * n, 0.0);
  std::vector<double> row(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0, k = 0; j < n; ++j) {
      if (j != i) row[k++] = dist[i][j];
    }
    const auto cal = calibrate_sigma(row, perplexity, tol, max_iter);
    const auto p = conditional_row(row, cal.beta);
    for (std::size_t j = 0, k = 0; j < n; ++j) {
      if (j != i) cond[i * n + j] = p[k++];
    }
  }

  AffinityMatrix P{n, std::vector<double>(n * n, 0.0)};
  double sum = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = std::max((cond[i * n + j] + cond[j * n + i]) / (2.0 * n), kProbabilityFloor);
      P.p[i * n + j] = P.p[j * n + i] = v;
      sum += 2 * v;
    }
  }
  for (auto& v : P.p) v /= sum;
  return P;
}

AffinityMatrix student_affinities(std::span<const double> Y, std::size_t n) {
  if (Y.size() != 2 * n) throw std::invalid_argument("embedding size mismatch");
  AffinityMatrix Q{n, {}};
  const double z = student_kernel(Y, n, Q.p);
  for (auto& v : Q.p) v /= z;
  return Q;
}

double kl_divergence(std::span<const double> P, std::span<const double> Q) {
  if (P.size() != Q.size()) throw std::invalid_argument("distribution size mismatch");
  double kl = 0;
  for (std::size_t k = 0; k < P.size(); ++k) {
    if (P[k] <= 0) continue;
    kl += P[k] * std::log(P[k] / std::max(Q[k], kProbabilityFloor));
  }
  return std::max(kl, 0.0);
}

double kl_divergence(const AffinityMatrix& P, const AffinityMatrix& Q) {
  if (P.n != Q.n) throw std::invalid_argument("affinity matrix size mismatch");
  return kl_divergence(std::span<const double>(P.p), std::span<const double>(Q.p));
}

double embedding_kl(const AffinityMatrix& P, std::span<const double> Y) {
  return kl_divergence(P, student_affinities(Y, P.n));
}

std::vector<double> kl_gradient(const AffinityMatrix& P, std::span<const double> Y,
                                double exaggeration) {
  const std::size_t n = P.n;
  if (Y.size() != 2 * n) throw std::invalid_argument("embedding size mismatch");
  std::vector<double> num;
  const double z = student_kernel(Y, n, num);
  std::vector<double> g(2 * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double w = (exaggeration * P(i, j) - num[i * n + j] / z) * num[i * n + j];
      g[2 * i] += 4.0 * w * (Y[2 * i] - Y[2 * j]);
      g[2 * i + 1] += 4.0 * w * (Y[2 * i + 1] - Y[2 * j + 1]);
    }
  }
  return g;
}

Embedding embed(const std::vector<std::vector<double>>& X, const Params& params,
                std::vector<std::string> labels) {
  if (params.iterations < 0) throw std::invalid_argument("iterations must be >= 0");
  if (!labels.empty() && labels.size() != X.size()) {
    throw std::invalid_argument("label count does not match point count");
  }
  const auto P = joint_probabilities(X, params.perplexity);
  const std::size_t n = P.n;

  Embedding out;
  out.n = n;
  out.labels = std::move(labels);
  out.y.resize(2 * n);
  Rng rng(params.seed);
  for (auto& v : out.y) v = rng.normal(0.0, params.init_stddev);

  std::vector<double> update(2 * n, 0.0), gains(2 * n, 1.0), num;
  out.kl_trace.reserve(static_cast<std::size_t>(params.iterations) + 1);
  out.kl_trace.push_back(embedding_kl(P, out.y));

  for (int it = 0; it < params.iterations; ++it) {
    const double exaggeration = it < params.exaggeration_iters ? params.early_exaggeration : 1.0;
    const double momentum =
        it < params.momentum_switch_iter ? params.initial_momentum : params.final_momentum;
    const auto grad = kl_gradient(P, out.y, exaggeration);
    for (std::size_t k = 0; k < grad.size(); ++k) {
      if (!std::isfinite(grad[k])) {
        throw std::runtime_error("t-SNE gradient became non-finite at iteration " +
                                 std::to_string(it) + " (coordinate " + std::to_string(k) + ")");
      }
      gains[k] = (grad[k] > 0) != (update[k] > 0) ? gains[k] + 0.2 : std::max(gains[k] * 0.8, 0.01);
      update[k] = momentum * update[k] - params.learning_rate * gains[k] * grad[k];
      out.y[k] += update[k];
    }
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i) {
      mx += out.y[2 * i];
      my += out.y[2 * i + 1];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      out.y[2 * i] -= mx;
      out.y[2 * i + 1] -= my;
    }
    out.kl_trace.push_back(embedding_kl(P, out.y));
  }
  return out;
}

}  // namespace smear::tsne
