#ifndef INVLMP_MARKET_HPP_
#define INVLMP_MARKET_HPP_

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "invlmp/grid.hpp"
#include "invlmp/lp.hpp"

namespace invlmp {

/// Piecewise-constant offer of one generator. `edges` has n_blocks + 1
/// entries partitioning [x_min, x_max]; `prices` are $/MWh per block.
struct OfferCurve {
  Vector edges;
  Vector prices;
  /// $/h charged whenever the unit is committed.
  double no_load_cost = 0.0;

  int n_blocks() const { return static_cast<int>(prices.size()); }
  double width(int j) const { return edges(j + 1) - edges(j); }
  void validate() const;
};

using Offers = std::vector<OfferCurve>;

/// Flattened generator-block indexing shared by the forward and inverse models.
struct BlockLayout {
  std::vector<int> offset;  // n_gens + 1 entries
  std::vector<int> gen_of;  // generator of each flat block

  explicit BlockLayout(const Offers& offers);
  explicit BlockLayout(const std::vector<int>& blocks_per_gen);
  int total() const { return offset.back(); }
  int n_gens() const { return static_cast<int>(offset.size()) - 1; }
  int index(int gen, int block) const { return offset[gen] + block; }
};

/// Concatenated block prices in BlockLayout order.
Vector flat_prices(const Offers& offers);

/// m x total-blocks incidence: column b has a 1 at the bus of its generator.
Matrix block_bus_incidence(const Grid& grid, const BlockLayout& layout);

struct ReserveConfig {
  double up = 0.0;    // MW
  double down = 0.0;  // MW
};

struct RampConfig {
  Vector up;    // MW/h per generator
  Vector down;  // MW/h per generator
};

/// Tolerance (MW) for binding classification, shared with the inverse model.
inline constexpr double kBindTol = 1e-6;

/// Fixed-commitment clearing outcome with all multipliers in the
/// nonnegative convention. Block duals are per flat block.
struct DispatchResult {
  LpStatus status = LpStatus::kInfeasible;
  std::vector<int> u;
  Vector load;       // e, MW per bus
  Vector x;          // MW per generator
  Vector y;          // MW per block above x_min
  Vector flow;       // MW per line
  double lambda = 0.0;
  Vector alpha;      // per block
  Vector beta;       // per block
  Vector mu;         // per line, upper flow limit
  Vector nu;         // per line, lower flow limit
  Vector omega;      // per bus
  double objective = 0.0;
  double dual_objective = 0.0;

  // Reserve model only (empty otherwise).
  Vector r_up, r_down;
  Vector alpha_gen, beta_gen;
  double theta_up = 0.0, theta_down = 0.0;

  // Ramping model only: multipliers of the ramp rows ending at this hour
  // and the net ramp term entering each generator's stationarity.
  Vector phi_up, phi_down, ramp_term;

  LpCertificate certificate;
  bool optimal() const { return status == LpStatus::kOptimal; }
};

/// Thrown when the market cannot be cleared (infeasible or solver failure).
class ClearingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct MarketOptions {
  MilpOptions milp;
  /// Start without line rows and add violated ones until the dispatch is
  /// feasible. Same optimum, much smaller LPs on large sparse-flow grids.
  bool lazy_lines = true;
};

/// Unit commitment MILP. Throws ClearingError when load exceeds capacity or
/// the network cannot be served.
std::vector<int> clear_uc(const Grid& grid, const Offers& offers, const Vector& load,
                          const MarketOptions& options = {});

DispatchResult solve_dcopf(const Grid& grid, const Offers& offers, const Vector& load,
                           const std::vector<int>& commitment, const MarketOptions& options = {});

/// UC followed by the fixed-commitment pricing LP.
DispatchResult clear_market(const Grid& grid, const Offers& offers, const Vector& load,
                            const MarketOptions& options = {});

DispatchResult solve_dcopf_reserves(const Grid& grid, const Offers& offers, const Vector& load,
                                    const std::vector<int>& commitment, const ReserveConfig& reserves,
                                    const MarketOptions& options = {});

/// omega = lambda 1 - ptdf' (mu - nu).
template <typename DerivedMu, typename DerivedNu, typename DerivedPhi>
Eigen::Matrix<typename DerivedMu::Scalar, Eigen::Dynamic, 1> compute_lmps(
    typename DerivedMu::Scalar lambda, const Eigen::MatrixBase<DerivedMu>& mu,
    const Eigen::MatrixBase<DerivedNu>& nu, const Eigen::MatrixBase<DerivedPhi>& ptdf) {
  using Scalar = typename DerivedMu::Scalar;
  return Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Constant(ptdf.cols(), lambda) -
         ptdf.transpose() * (mu - nu);
}

/// LMPs written through the offer prices: the reference price is eliminated
/// with the stationarity condition averaged over all blocks.
template <typename DerivedC, typename DerivedA, typename DerivedB, typename DerivedMu,
          typename DerivedNu, typename DerivedPhi, typename DerivedS>
Eigen::Matrix<typename DerivedC::Scalar, Eigen::Dynamic, 1> compute_lmps_from_prices(
    const Eigen::MatrixBase<DerivedC>& c, const Eigen::MatrixBase<DerivedA>& alpha,
    const Eigen::MatrixBase<DerivedB>& beta, const Eigen::MatrixBase<DerivedMu>& mu,
    const Eigen::MatrixBase<DerivedNu>& nu, const Eigen::MatrixBase<DerivedPhi>& ptdf,
    const Eigen::MatrixBase<DerivedS>& incidence) {
  using Scalar = typename DerivedC::Scalar;
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  const Eigen::Index m = ptdf.cols();
  const Scalar inv_n = Scalar(1) / Scalar(c.size());
  const Vec congestion = ptdf.transpose() * (mu - nu);
  const Scalar avg = inv_n * (c + alpha - beta).sum();
  const Scalar shift = inv_n * (incidence.transpose() * congestion).sum();
  return Vec::Constant(m, avg + shift) - congestion;
}

struct KktReport {
  double primal = 0.0;
  double stationarity = 0.0;
  double complementarity = 0.0;
  double dual_sign = 0.0;
  /// Per-block |stationarity| residual.
  Vector stationarity_by_block;
  double max() const;
};

/// Checks the plain DCOPF optimality conditions on a dispatch. Reserve and
/// ramp multipliers are ignored on purpose, so a reserve- or ramp-constrained
/// dispatch shows residuals exactly where those limits bind.
KktReport kkt_residuals(const Grid& grid, const Offers& offers, const DispatchResult& dispatch);

/// Multi-period SCUC with reserves and ramping. One DispatchResult per hour.
struct ScucResult {
  std::vector<DispatchResult> hours;
  double objective = 0.0;
  long nodes = 0;
  bool proven_optimal = false;
};

struct ScucOptions {
  MarketOptions market;
  int max_line_rounds = 20;
};

ScucResult clear_scuc_ramping(const Grid& grid, const Offers& offers, const std::vector<Vector>& load_profile,
                              const ReserveConfig& reserves, const RampConfig& ramps,
                              const ScucOptions& options = {});

/// Which limits bind on committed generator-hours.
struct BindingStats {
  long only_power = 0;
  long only_ramp = 0;
  long both = 0;
  long neither = 0;
  long total() const { return only_power + only_ramp + both + neither; }
};

/// Per committed generator-hour: power limits bind when x + r_up reaches
/// u x_max or x - r_down reaches u x_min; ramp limits bind when any ramp row
/// containing that hour's output is tight.
BindingStats binding_statistics(const Grid& grid, const ScucResult& result, const RampConfig& ramps);

}  // namespace invlmp

#endif  // INVLMP_MARKET_HPP_
