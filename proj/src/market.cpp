#include "invlmp/market.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace invlmp {

void OfferCurve::validate() const {
  if (prices.size() < 1) throw InputError("offer: needs at least one block");
  if (edges.size() != prices.size() + 1) throw InputError("offer: edges must have n_blocks + 1 entries");
  for (int j = 0; j < n_blocks(); ++j) {
    if (!(width(j) > 0.0)) throw InputError("offer: zero-width block");
  }
}

BlockLayout::BlockLayout(const Offers& offers) {
  offset.push_back(0);
  for (std::size_t k = 0; k < offers.size(); ++k) {
    for (int j = 0; j < offers[k].n_blocks(); ++j) gen_of.push_back(static_cast<int>(k));
    offset.push_back(offset.back() + offers[k].n_blocks());
  }
}

BlockLayout::BlockLayout(const std::vector<int>& blocks_per_gen) {
  offset.push_back(0);
  for (std::size_t k = 0; k < blocks_per_gen.size(); ++k) {
    for (int j = 0; j < blocks_per_gen[k]; ++j) gen_of.push_back(static_cast<int>(k));
    offset.push_back(offset.back() + blocks_per_gen[k]);
  }
}

Vector flat_prices(const Offers& offers) {
  const BlockLayout layout(offers);
  Vector c(layout.total());
  for (int k = 0; k < layout.n_gens(); ++k) c.segment(layout.offset[k], offers[k].n_blocks()) = offers[k].prices;
  return c;
}

Matrix block_bus_incidence(const Grid& grid, const BlockLayout& layout) {
  Matrix s = Matrix::Zero(grid.n_buses, layout.total());
  for (int b = 0; b < layout.total(); ++b) s(grid.generators[layout.gen_of[b]].bus, b) = 1.0;
  return s;
}

double KktReport::max() const { return std::max({primal, stationarity, complementarity, dual_sign}); }

namespace {

void check_inputs(const Grid& grid, const Offers& offers, const Vector& load) {
  if (static_cast<int>(offers.size()) != grid.n_gens()) throw InputError("offers: one curve per generator required");
  if (load.size() != grid.n_buses) throw InputError("load: length differs from n_buses");
  for (int k = 0; k < grid.n_gens(); ++k) {
    offers[k].validate();
    const auto& g = grid.generators[k];
    if (std::abs(offers[k].edges(0) - g.x_min) > 1e-9 ||
        std::abs(offers[k].edges(offers[k].n_blocks()) - g.x_max) > 1e-9) {
      throw InputError("offer: block edges of " + g.name + " must span [x_min, x_max]");
    }
  }
}

struct Row {
  std::vector<std::pair<int, double>> coef;
  Sense sense;
  double rhs;
};

/// Index bookkeeping for the T-hour clearing model.
class Model {
 public:
  Model(const Grid& grid, const Offers& offers, const std::vector<Vector>& loads, bool reserves, bool ramps)
      : grid_(grid),
        offers_(offers),
        layout_(offers),
        loads_(loads),
        reserves_(reserves),
        ramps_(ramps),
        hours_(static_cast<int>(loads.size())),
        n_(grid.n_gens()),
        nb_(layout_.total()) {
    stride_ = n_ + nb_ + (reserves_ ? 2 * n_ : 0) + (ramps_ ? 2 * n_ : 0);
    ptdf_gen_ = grid.ptdf * grid.gen_bus_incidence();
    lines_.assign(hours_, {});
    line_rows_.assign(hours_, std::vector<std::pair<int, int>>(grid.n_lines(), {-1, -1}));
  }

  int hours() const { return hours_; }
  int num_vars() const { return hours_ * stride_; }
  int u(int t, int k) const { return t * stride_ + k; }
  int y(int t, int b) const { return t * stride_ + n_ + b; }
  int r_up(int t, int k) const { return t * stride_ + n_ + nb_ + k; }
  int r_down(int t, int k) const { return t * stride_ + 2 * n_ + nb_ + k; }
  int v(int t, int k) const { return t * stride_ + n_ + nb_ + (reserves_ ? 2 * n_ : 0) + k; }
  int w(int t, int k) const { return v(t, k) + n_; }

  const BlockLayout& layout() const { return layout_; }
  const Matrix& ptdf_gen() const { return ptdf_gen_; }

  std::vector<std::vector<int>>& lines() { return lines_; }

  void include_all_lines() {
    for (auto& set : lines_) {
      set.resize(grid_.n_lines());
      std::iota(set.begin(), set.end(), 0);
    }
  }

  MilpProblem build(const ReserveConfig& reserves, const RampConfig* ramps) {
    rows_.clear();
    const Vector xmin = grid_.gen_min();
    const Vector xmax = grid_.gen_max();
    LpProblem lp = LpProblem::with_vars(num_vars());
    MilpProblem mp;
    balance_.assign(hours_, -1);
    gen_max_.assign(hours_, std::vector<int>(n_, -1));
    gen_min_.assign(hours_, std::vector<int>(n_, -1));
    res_up_.assign(hours_, -1);
    res_down_.assign(hours_, -1);
    ramp_up_.assign(hours_, std::vector<int>(n_, -1));
    ramp_down_.assign(hours_, std::vector<int>(n_, -1));
    for (int t = 0; t < hours_; ++t) {
      for (int k = 0; k < n_; ++k) {
        lp.cost(u(t, k)) = offers_[k].no_load_cost;
        lp.var_upper(u(t, k)) = 1.0;
        mp.binaries.push_back(u(t, k));
        for (int j = 0; j < offers_[k].n_blocks(); ++j) {
          const int b = layout_.index(k, j);
          lp.cost(y(t, b)) = offers_[k].prices(j);
          lp.var_upper(y(t, b)) = offers_[k].width(j);
        }
        if (ramps_) {
          lp.var_upper(v(t, k)) = t == 0 ? 0.0 : 1.0;
          lp.var_upper(w(t, k)) = t == 0 ? 0.0 : 1.0;
          if (t > 0) {
            mp.binaries.push_back(v(t, k));
            mp.binaries.push_back(w(t, k));
          }
        }
      }
      // x_k = x_min u_k + sum of its blocks.
      auto add_output = [&](Row& row, int tt, int k, double scale) {
        if (xmin(k) != 0.0) row.coef.emplace_back(u(tt, k), scale * xmin(k));
        for (int b = layout_.offset[k]; b < layout_.offset[k + 1]; ++b) row.coef.emplace_back(y(tt, b), scale);
      };

      Row bal{{}, Sense::kEqual, loads_[t].sum()};
      for (int k = 0; k < n_; ++k) add_output(bal, t, k, 1.0);
      balance_[t] = push(bal);

      for (int k = 0; k < n_; ++k) {
        Row up{{}, Sense::kLessEqual, 0.0};
        for (int b = layout_.offset[k]; b < layout_.offset[k + 1]; ++b) up.coef.emplace_back(y(t, b), 1.0);
        if (reserves_) up.coef.emplace_back(r_up(t, k), 1.0);
        up.coef.emplace_back(u(t, k), -(xmax(k) - xmin(k)));
        gen_max_[t][k] = push(up);
        if (reserves_) {
          Row lo{{}, Sense::kGreaterEqual, 0.0};
          for (int b = layout_.offset[k]; b < layout_.offset[k + 1]; ++b) lo.coef.emplace_back(y(t, b), 1.0);
          lo.coef.emplace_back(r_down(t, k), -1.0);
          gen_min_[t][k] = push(lo);
        }
      }
      if (reserves_) {
        Row ru{{}, Sense::kGreaterEqual, reserves.up};
        Row rd{{}, Sense::kGreaterEqual, reserves.down};
        for (int k = 0; k < n_; ++k) {
          ru.coef.emplace_back(r_up(t, k), 1.0);
          rd.coef.emplace_back(r_down(t, k), 1.0);
        }
        res_up_[t] = push(ru);
        res_down_[t] = push(rd);
      }

      const Vector base_flow = grid_.ptdf * loads_[t];
      std::fill(line_rows_[t].begin(), line_rows_[t].end(), std::pair<int, int>{-1, -1});
      for (int i : lines_[t]) {
        Row hi{{}, Sense::kLessEqual, grid_.lines[i].limit + base_flow(i)};
        for (int k = 0; k < n_; ++k) {
          if (ptdf_gen_(i, k) != 0.0) add_output(hi, t, k, ptdf_gen_(i, k));
        }
        Row lo = hi;
        lo.sense = Sense::kGreaterEqual;
        lo.rhs = -grid_.lines[i].limit + base_flow(i);
        line_rows_[t][i] = {push(hi), push(lo)};
      }

      if (ramps_ && t > 0) {
        for (int k = 0; k < n_; ++k) {
          Row up{{}, Sense::kLessEqual, 0.0};
          add_output(up, t, k, 1.0);
          add_output(up, t - 1, k, -1.0);
          if (reserves_) {
            up.coef.emplace_back(r_up(t, k), 1.0);
            up.coef.emplace_back(r_down(t - 1, k), 1.0);
          }
          up.coef.emplace_back(u(t - 1, k), -ramps->up(k));
          up.coef.emplace_back(v(t, k), -xmin(k));
          ramp_up_[t][k] = push(up);

          Row dn{{}, Sense::kLessEqual, 0.0};
          add_output(dn, t - 1, k, 1.0);
          add_output(dn, t, k, -1.0);
          if (reserves_) {
            dn.coef.emplace_back(r_up(t - 1, k), 1.0);
            dn.coef.emplace_back(r_down(t, k), 1.0);
          }
          dn.coef.emplace_back(u(t, k), -ramps->down(k));
          dn.coef.emplace_back(w(t, k), -xmin(k));
          ramp_down_[t][k] = push(dn);

          Row logic{{{v(t, k), 1.0}, {w(t, k), -1.0}, {u(t, k), -1.0}, {u(t - 1, k), 1.0}}, Sense::kEqual, 0.0};
          push(logic);
          Row once{{{v(t, k), 1.0}, {w(t, k), 1.0}}, Sense::kLessEqual, 1.0};
          push(once);
        }
      }
    }
    lp.constraint_matrix = Matrix::Zero(static_cast<Eigen::Index>(rows_.size()), num_vars());
    lp.rhs.resize(static_cast<Eigen::Index>(rows_.size()));
    for (std::size_t r = 0; r < rows_.size(); ++r) {
      for (auto [j, a] : rows_[r].coef) lp.constraint_matrix(static_cast<Eigen::Index>(r), j) += a;
      lp.rhs(static_cast<Eigen::Index>(r)) = rows_[r].rhs;
      lp.senses.push_back(rows_[r].sense);
    }
    mp.lp = std::move(lp);
    return mp;
  }

  /// Adds lines whose flow at `primal` exceeds the limit. Returns how many.
  int add_violated_lines(const Vector& primal) {
    int added = 0;
    for (int t = 0; t < hours_; ++t) {
      const Vector flow = grid_.ptdf * (grid_.gen_bus_incidence() * output(primal, t) - loads_[t]);
      for (int i = 0; i < grid_.n_lines(); ++i) {
        const double lim = grid_.lines[i].limit;
        if (std::abs(flow(i)) > lim + 1e-7 * std::max(1.0, lim) && line_rows_[t][i].first < 0 &&
            std::find(lines_[t].begin(), lines_[t].end(), i) == lines_[t].end()) {
          lines_[t].push_back(i);
          ++added;
        }
      }
      std::sort(lines_[t].begin(), lines_[t].end());
    }
    return added;
  }

  Vector output(const Vector& primal, int t) const {
    Vector x(n_);
    for (int k = 0; k < n_; ++k) {
      x(k) = grid_.generators[k].x_min * primal(u(t, k));
      for (int b = layout_.offset[k]; b < layout_.offset[k + 1]; ++b) x(k) += primal(y(t, b));
    }
    return x;
  }

  DispatchResult extract(const MilpProblem& mp, const LpSolution& s, int t) const {
    DispatchResult d;
    d.status = s.status;
    d.load = loads_[t];
    d.certificate = certify(mp.lp, s);
    d.dual_objective = s.dual_objective;
    d.u.resize(n_);
    for (int k = 0; k < n_; ++k) d.u[k] = s.primal(u(t, k)) > 0.5 ? 1 : 0;
    d.y.resize(nb_);
    for (int b = 0; b < nb_; ++b) d.y(b) = s.primal(y(t, b));
    d.x = output(s.primal, t);
    d.flow = grid_.ptdf * (grid_.gen_bus_incidence() * d.x - d.load);
    d.objective = 0.0;
    for (int k = 0; k < n_; ++k) d.objective += offers_[k].no_load_cost * s.primal(u(t, k));
    for (int b = 0; b < nb_; ++b) d.objective += mp.lp.cost(y(t, b)) * d.y(b);
    if (hours_ == 1) d.objective = s.objective;

    d.lambda = s.duals(balance_[t]);
    d.mu = Vector::Zero(grid_.n_lines());
    d.nu = Vector::Zero(grid_.n_lines());
    for (int i = 0; i < grid_.n_lines(); ++i) {
      if (line_rows_[t][i].first >= 0) {
        d.mu(i) = s.duals(line_rows_[t][i].first);
        d.nu(i) = s.duals(line_rows_[t][i].second);
      }
    }
    d.omega = compute_lmps(d.lambda, d.mu, d.nu, grid_.ptdf);

    Vector gamma(n_);
    for (int k = 0; k < n_; ++k) gamma(k) = s.duals(gen_max_[t][k]);
    Vector beta_gen = Vector::Zero(n_);
    if (reserves_) {
      d.r_up.resize(n_);
      d.r_down.resize(n_);
      for (int k = 0; k < n_; ++k) {
        d.r_up(k) = s.primal(r_up(t, k));
        d.r_down(k) = s.primal(r_down(t, k));
        beta_gen(k) = s.duals(gen_min_[t][k]);
      }
      d.alpha_gen = gamma;
      d.beta_gen = beta_gen;
      d.theta_up = s.duals(res_up_[t]);
      d.theta_down = s.duals(res_down_[t]);
    }
    if (ramps_) {
      d.phi_up = Vector::Zero(n_);
      d.phi_down = Vector::Zero(n_);
      d.ramp_term = Vector::Zero(n_);
      for (int k = 0; k < n_; ++k) {
        if (t > 0) {
          d.phi_up(k) = s.duals(ramp_up_[t][k]);
          d.phi_down(k) = s.duals(ramp_down_[t][k]);
          d.ramp_term(k) += d.phi_up(k) - d.phi_down(k);
        }
        if (t + 1 < hours_) d.ramp_term(k) += s.duals(ramp_down_[t + 1][k]) - s.duals(ramp_up_[t + 1][k]);
      }
    }

    // Block multipliers of the plain model. The generator-level rows are
    // folded into the block duals only where the plain output limit itself
    // is tight.
    d.alpha.resize(nb_);
    d.beta.resize(nb_);
    const Vector xmin = grid_.gen_min();
    const Vector xmax = grid_.gen_max();
    for (int b = 0; b < nb_; ++b) {
      const int k = layout_.gen_of[b];
      const double rc = s.reduced_costs(y(t, b));
      d.alpha(b) = std::max(-rc, 0.0);
      d.beta(b) = std::max(rc, 0.0);
      if (!reserves_ || d.x(k) >= d.u[k] * xmax(k) - kBindTol) d.alpha(b) += gamma(k);
      if (reserves_ && d.x(k) <= d.u[k] * xmin(k) + kBindTol) d.beta(b) += beta_gen(k);
    }
    return d;
  }

 private:
  int push(Row row) {
    rows_.push_back(std::move(row));
    return static_cast<int>(rows_.size()) - 1;
  }

  const Grid& grid_;
  const Offers& offers_;
  BlockLayout layout_;
  std::vector<Vector> loads_;
  bool reserves_;
  bool ramps_;
  int hours_;
  int n_;
  int nb_;
  int stride_ = 0;
  Matrix ptdf_gen_;
  std::vector<Row> rows_;
  std::vector<std::vector<int>> lines_;
  std::vector<std::vector<std::pair<int, int>>> line_rows_;
  std::vector<int> balance_, res_up_, res_down_;
  std::vector<std::vector<int>> gen_max_, gen_min_, ramp_up_, ramp_down_;
};

void fix_commitment(MilpProblem& mp, const Model& model, const std::vector<int>& commitment, int t) {
  for (int k = 0; k < static_cast<int>(commitment.size()); ++k) {
    if (commitment[k] != 0 && commitment[k] != 1) throw InputError("commitment: entries must be 0 or 1");
    mp.lp.var_lower(model.u(t, k)) = commitment[k];
    mp.lp.var_upper(model.u(t, k)) = commitment[k];
  }
}

std::string capacity_message(const Grid& grid, const Vector& load) {
  std::ostringstream os;
  os << "total load " << load.sum() << " MW vs total capacity " << grid.gen_max().sum() << " MW";
  return os.str();
}

/// Solves the LP with lines added lazily (or all lines when not lazy).
LpSolution solve_with_lines(Model& model, const std::vector<std::vector<int>>* commitment,
                            const ReserveConfig& reserves, const RampConfig* ramps, const MarketOptions& opt,
                            MilpProblem& mp) {
  if (!opt.lazy_lines) model.include_all_lines();
  for (;;) {
    mp = model.build(reserves, ramps);
    if (commitment) {
      for (int t = 0; t < model.hours(); ++t) fix_commitment(mp, model, (*commitment)[t], t);
    }
    LpSolution s = solve_lp(mp.lp, opt.milp.lp);
    if (!s.optimal() || !opt.lazy_lines || model.add_violated_lines(s.primal) == 0) return s;
  }
}

}  // namespace

std::vector<int> clear_uc(const Grid& grid, const Offers& offers, const Vector& load, const MarketOptions& opt) {
  check_inputs(grid, offers, load);
  if (load.sum() > grid.gen_max().sum() + 1e-9) throw ClearingError("unit commitment infeasible: " + capacity_message(grid, load));
  Model model(grid, offers, {load}, false, false);
  if (!opt.lazy_lines) model.include_all_lines();
  for (;;) {
    const MilpProblem mp = model.build({}, nullptr);
    const MilpSolution s = solve_milp(mp, opt.milp);
    if (!s.has_incumbent()) {
      throw ClearingError("unit commitment infeasible (network limits): " + capacity_message(grid, load));
    }
    if (!opt.lazy_lines || model.add_violated_lines(s.lp.primal) == 0) {
      std::vector<int> u(grid.n_gens());
      for (int k = 0; k < grid.n_gens(); ++k) u[k] = s.assignment[k];
      return u;
    }
  }
}

DispatchResult solve_dcopf(const Grid& grid, const Offers& offers, const Vector& load,
                           const std::vector<int>& commitment, const MarketOptions& opt) {
  check_inputs(grid, offers, load);
  if (static_cast<int>(commitment.size()) != grid.n_gens()) throw InputError("commitment: length differs from n_gens");
  Model model(grid, offers, {load}, false, false);
  MilpProblem mp;
  const std::vector<std::vector<int>> fixed{commitment};
  const LpSolution s = solve_with_lines(model, &fixed, {}, nullptr, opt, mp);
  if (!s.optimal()) {
    DispatchResult d;
    d.status = s.status;
    d.u = commitment;
    d.load = load;
    return d;
  }
  return model.extract(mp, s, 0);
}

DispatchResult clear_market(const Grid& grid, const Offers& offers, const Vector& load, const MarketOptions& opt) {
  const std::vector<int> u = clear_uc(grid, offers, load, opt);
  DispatchResult d = solve_dcopf(grid, offers, load, u, opt);
  if (!d.optimal()) throw ClearingError("pricing LP failed: " + to_string(d.status));
  return d;
}

DispatchResult solve_dcopf_reserves(const Grid& grid, const Offers& offers, const Vector& load,
                                    const std::vector<int>& commitment, const ReserveConfig& reserves,
                                    const MarketOptions& opt) {
  check_inputs(grid, offers, load);
  if (static_cast<int>(commitment.size()) != grid.n_gens()) throw InputError("commitment: length differs from n_gens");
  if (reserves.up < 0.0 || reserves.down < 0.0) throw InputError("reserves: requirements must be nonnegative");
  Model model(grid, offers, {load}, true, false);
  MilpProblem mp;
  const std::vector<std::vector<int>> fixed{commitment};
  const LpSolution s = solve_with_lines(model, &fixed, reserves, nullptr, opt, mp);
  if (!s.optimal()) {
    DispatchResult d;
    d.status = s.status;
    d.u = commitment;
    d.load = load;
    return d;
  }
  return model.extract(mp, s, 0);
}

KktReport kkt_residuals(const Grid& grid, const Offers& offers, const DispatchResult& d) {
  const BlockLayout layout(offers);
  const Vector c = flat_prices(offers);
  const Matrix pg = grid.ptdf * grid.gen_bus_incidence();
  KktReport r;
  const Vector xmin = grid.gen_min();

  // Primal feasibility, with flows recomputed from x.
  r.primal = std::abs(d.x.sum() - d.load.sum());
  const Vector flow = grid.ptdf * (grid.gen_bus_incidence() * d.x - d.load);
  for (int i = 0; i < grid.n_lines(); ++i) {
    r.primal = std::max(r.primal, std::abs(flow(i)) - grid.lines[i].limit);
  }
  for (int k = 0; k < grid.n_gens(); ++k) {
    const double sum = xmin(k) * d.u[k] + d.y.segment(layout.offset[k], offers[k].n_blocks()).sum();
    r.primal = std::max(r.primal, std::abs(d.x(k) - sum));
    for (int j = 0; j < offers[k].n_blocks(); ++j) {
      const double yb = d.y(layout.index(k, j));
      r.primal = std::max({r.primal, -yb, yb - d.u[k] * offers[k].width(j)});
    }
  }

  const Vector cong = pg.transpose() * (d.mu - d.nu);
  r.stationarity_by_block.resize(layout.total());
  for (int b = 0; b < layout.total(); ++b) {
    const int k = layout.gen_of[b];
    const int j = b - layout.offset[k];
    const double res = c(b) - d.lambda + d.alpha(b) - d.beta(b) + cong(k);
    r.stationarity_by_block(b) = std::abs(res);
    r.stationarity = std::max(r.stationarity, std::abs(res));
    r.complementarity = std::max(r.complementarity, std::abs(d.alpha(b) * (d.u[k] * offers[k].width(j) - d.y(b))));
    r.complementarity = std::max(r.complementarity, std::abs(d.beta(b) * d.y(b)));
    r.dual_sign = std::max({r.dual_sign, -d.alpha(b), -d.beta(b)});
  }
  for (int i = 0; i < grid.n_lines(); ++i) {
    const double lim = grid.lines[i].limit;
    r.complementarity = std::max(r.complementarity, std::abs(d.mu(i) * (lim - flow(i))));
    r.complementarity = std::max(r.complementarity, std::abs(d.nu(i) * (flow(i) + lim)));
    r.dual_sign = std::max({r.dual_sign, -d.mu(i), -d.nu(i)});
  }
  r.primal = std::max(r.primal, 0.0);
  return r;
}

ScucResult clear_scuc_ramping(const Grid& grid, const Offers& offers, const std::vector<Vector>& profile,
                              const ReserveConfig& reserves, const RampConfig& ramps, const ScucOptions& opt) {
  if (profile.size() < 2) throw InputError("load_profile: horizon must be at least 2 hours");
  for (const auto& e : profile) check_inputs(grid, offers, e);
  if (ramps.up.size() != grid.n_gens() || ramps.down.size() != grid.n_gens()) {
    throw InputError("ramps: one rate per generator required");
  }
  const double cap = grid.gen_max().sum();
  for (std::size_t t = 0; t < profile.size(); ++t) {
    if (profile[t].sum() + reserves.up > cap + 1e-9) {
      throw ClearingError("SCUC infeasible at hour " + std::to_string(t + 1) + ": " +
                          capacity_message(grid, profile[t]) + " plus reserve " + std::to_string(reserves.up));
    }
  }
  Model model(grid, offers, profile, true, true);
  const int hours = static_cast<int>(profile.size());
  MarketOptions lp_opt = opt.market;

  // Seed the line set from the relaxation, then iterate on the MILP.
  MilpProblem mp;
  const LpSolution relax = solve_with_lines(model, nullptr, reserves, &ramps, lp_opt, mp);
  if (!relax.optimal()) {
    // Locate the first hour that cannot be served on its own.
    for (int t = 0; t < hours; ++t) {
      Model single(grid, offers, {profile[t]}, true, false);
      MilpProblem one;
      if (!solve_with_lines(single, nullptr, reserves, nullptr, lp_opt, one).optimal()) {
        throw ClearingError("SCUC infeasible at hour " + std::to_string(t + 1));
      }
    }
    throw ClearingError("SCUC infeasible: ramping limits cannot be met over the horizon");
  }
  ScucResult out;
  for (int round = 0; round < opt.max_line_rounds; ++round) {
    mp = model.build(reserves, &ramps);
    const MilpSolution s = solve_milp(mp, opt.market.milp);
    out.nodes += s.nodes;
    if (!s.has_incumbent()) throw ClearingError("SCUC infeasible: no commitment satisfies the horizon");
    if (opt.market.lazy_lines && model.add_violated_lines(s.lp.primal) > 0) continue;
    if (!s.lp.optimal()) throw ClearingError("SCUC pricing LP failed: " + to_string(s.lp.status));
    out.objective = s.objective;
    out.proven_optimal = s.status == MilpStatus::kOptimal;
    for (int t = 0; t < hours; ++t) out.hours.push_back(model.extract(mp, s.lp, t));
    return out;
  }
  throw ClearingError("SCUC: line constraint generation did not settle");
}

BindingStats binding_statistics(const Grid& grid, const ScucResult& result, const RampConfig& ramps) {
  BindingStats st;
  const int hours = static_cast<int>(result.hours.size());
  const Vector xmin = grid.gen_min();
  const Vector xmax = grid.gen_max();
  auto ramp_up_tight = [&](int t, int k) {
    if (t <= 0 || t >= hours) return false;
    const auto& a = result.hours[t - 1];
    const auto& b = result.hours[t];
    const int v = std::max(b.u[k] - a.u[k], 0);
    const double lhs = b.x(k) + b.r_up(k) - a.x(k) + a.r_down(k);
    return lhs >= ramps.up(k) * a.u[k] + v * xmin(k) - kBindTol;
  };
  auto ramp_down_tight = [&](int t, int k) {
    if (t <= 0 || t >= hours) return false;
    const auto& a = result.hours[t - 1];
    const auto& b = result.hours[t];
    const int w = std::max(a.u[k] - b.u[k], 0);
    const double lhs = a.x(k) + a.r_up(k) - b.x(k) + b.r_down(k);
    return lhs >= ramps.down(k) * b.u[k] + w * xmin(k) - kBindTol;
  };
  for (int t = 0; t < hours; ++t) {
    const auto& h = result.hours[t];
    for (int k = 0; k < grid.n_gens(); ++k) {
      if (h.u[k] == 0) continue;
      const bool power = h.x(k) + h.r_up(k) >= xmax(k) - kBindTol || h.x(k) - h.r_down(k) <= xmin(k) + kBindTol;
      const bool ramp = ramp_up_tight(t, k) || ramp_down_tight(t, k) || ramp_up_tight(t + 1, k) ||
                        ramp_down_tight(t + 1, k);
      if (power && ramp) ++st.both;
      else if (power) ++st.only_power;
      else if (ramp) ++st.only_ramp;
      else ++st.neither;
    }
  }
  return st;
}

}  // namespace invlmp
