#ifndef INVLMP_INVERSE_HPP_
#define INVLMP_INVERSE_HPP_

#include <cmath>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "invlmp/grid.hpp"
#include "invlmp/market.hpp"
#include "invlmp/observation.hpp"

namespace invlmp {

BlockLayout layout_of(const BlockEdges& edges);

/// Prices reconstructed from one observation. Entries outside `free_mask`
/// are zero.
struct RecoverySample {
  long observation_id = 0;
  Vector c0;
  std::vector<bool> free_mask;
  /// Free blocks sharing a bus with another free block: they all receive the
  /// same LMP and cannot be told apart.
  std::vector<bool> tied;
};

/// c0 = lambda (1_n - S' 1_m) + S' omega, restricted to free blocks.
template <typename DerivedS, typename DerivedW>
Eigen::Matrix<typename DerivedW::Scalar, Eigen::Dynamic, 1> reconstruct_prices(
    typename DerivedW::Scalar lambda, const Eigen::MatrixBase<DerivedW>& omega,
    const Eigen::MatrixBase<DerivedS>& incidence) {
  using Vec = Eigen::Matrix<typename DerivedW::Scalar, Eigen::Dynamic, 1>;
  const Vec ones_gap = Vec::Ones(incidence.cols()) - incidence.transpose() * Vec::Ones(incidence.rows());
  return lambda * ones_gap + incidence.transpose() * omega;
}

RecoverySample recover_sample(const MarketObservation& obs, const Grid& grid, const BlockEdges& edges,
                              const std::vector<bool>& free_mask);

/// Free-block identification followed by reconstruction.
std::vector<RecoverySample> recover_samples(const std::vector<MarketObservation>& obs, const Grid& grid,
                                            const BlockEdges& edges, double tol = kBindTol);

/// Valid (free) reconstructed prices per flat block.
struct TrainingSet {
  std::vector<std::vector<double>> values;
  std::vector<std::vector<long>> ids;

  int n_blocks() const { return static_cast<int>(values.size()); }
  long count(int k) const { return static_cast<long>(values[k].size()); }
  std::vector<long> counts() const;
  int n_active() const;
  Vector samples(int k) const { return Eigen::Map<const Vector>(values[k].data(), count(k)); }
};

TrainingSet assemble_training_set(const std::vector<RecoverySample>& samples, int n_blocks);

/// Mean of |samples - c|^p.
template <typename Derived>
typename Derived::Scalar block_loss(const Eigen::MatrixBase<Derived>& samples, typename Derived::Scalar c,
                                    double p) {
  if (samples.size() == 0) return 0;
  return (samples.array() - c).abs().pow(p).mean();
}

/// Subgradient of block_loss in c; zero residuals contribute 0.
template <typename Derived>
typename Derived::Scalar block_loss_gradient(const Eigen::MatrixBase<Derived>& samples,
                                             typename Derived::Scalar c, double p) {
  using Scalar = typename Derived::Scalar;
  if (samples.size() == 0) return 0;
  Scalar g = 0;
  for (Eigen::Index i = 0; i < samples.size(); ++i) {
    const Scalar r = c - samples(i);
    if (r != Scalar(0)) g += p * std::pow(std::abs(r), p - 1.0) * (r > 0 ? 1 : -1);
  }
  return g / static_cast<Scalar>(samples.size());
}

/// ||x||_p^p.
template <typename Derived>
typename Derived::Scalar pnorm_pow(const Eigen::MatrixBase<Derived>& x, double p) {
  return x.array().abs().pow(p).sum();
}

/// Sum over blocks of the per-block mean loss; blocks without data add 0.
double training_loss(const TrainingSet& training, const Vector& c, double p);

struct GdConfig {
  double p = 1.0;
  long iterations = 1000;
  double eta = 0.05;
  /// eta = c_bar^(2-p) / (p sqrt(T)) per block.
  bool auto_eta = false;
  /// Magnitude bound; 0 derives it from the data and the initial point.
  double c_bar = 0.0;
  std::optional<std::pair<double, double>> bounds;
  /// Empty: midpoint of `bounds`.
  Vector init;
  /// Keep every k-th iterate in the trajectory (the last one is always kept).
  long trajectory_stride = 1;

  void validate() const;
};

struct GdResult {
  Vector c_hat;
  /// Running average of the iterates c^0..c^{T-1}.
  Vector c_avg;
  std::vector<long> trajectory_iterations;
  std::vector<Vector> trajectory;
  double final_loss = 0.0;
  double average_loss = 0.0;
  double eta = 0.0;
  double c_bar = 0.0;
  /// n p c_bar^p / sqrt(T) with n = blocks that have data, and with n = all.
  double bound_active = 0.0;
  double bound_all = 0.0;
};

GdResult gd_recover(const TrainingSet& training, const GdConfig& config);

/// Per-block sample mean; NaN where a block has no data.
Vector closed_form_l2(const TrainingSet& training);

/// Per-block lower and upper median: the minimisers of the l1 loss.
std::vector<std::pair<double, double>> median_intervals(const TrainingSet& training);

double error_bound(int n_blocks, double p, double c_bar, long iterations);

/// Every block lands in exactly one bucket: recovered (free at least once),
/// non_free (its generator was free at another block but this block never),
/// never_marginal (its generator was never free at any block).
struct RecoveryAccounting {
  long total = 0;
  long recovered = 0;
  long non_free = 0;
  long never_marginal = 0;
  double rate() const { return total ? static_cast<double>(recovered) / total : 0.0; }
  bool consistent() const { return recovered + non_free + never_marginal == total; }
};

RecoveryAccounting recovery_accounting(const TrainingSet& training, const BlockLayout& layout);

// ---------------------------------------------------------------------------
// Generalised inverse optimisation for  min w'x  s.t.  A x >= b.
// w is normalised to sum |w| = 1 with w >= 0.

struct GioPdResult {
  LpStatus status = LpStatus::kInfeasible;
  Vector w;
  Vector xi;
  /// Minimum l1 perturbation of x0 that closes the duality gap.
  Vector eps;
  double eps_norm = 0.0;
};

/// Requires A x0 >= b. Solves one LP per candidate coordinate of the
/// perturbation and keeps the smallest.
GioPdResult gio_pd_solve(const Matrix& a, const Vector& b, const Vector& x0, const LpOptions& options = {});

struct GioKktResult {
  LpStatus status = LpStatus::kInfeasible;
  Vector w;
  Vector xi;
  Vector eps_stat;
  Vector eps_comp;
  double objective = 0.0;
};

GioKktResult gio_kkt_solve(const Matrix& a, const Vector& b, const Vector& x0, const LpOptions& options = {});

/// Exact (slack-free) inverse feasibility tests.
bool io_pd_feasible(const Matrix& a, const Vector& b, const Vector& x0, double tol = 1e-7);
bool io_kkt_feasible(const Matrix& a, const Vector& b, const Vector& x0, double tol = 1e-7);

}  // namespace invlmp

#endif  // INVLMP_INVERSE_HPP_
