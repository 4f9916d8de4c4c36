#include "bsnoma/power_allocation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <stdexcept>

namespace bsnoma {

namespace {

constexpr int kBisectionCap = 400;
constexpr double kStagnationDelta = 1e-12;
constexpr int kStagnationRun = 3;
constexpr double kSlackTolerance = 1e-8;  // relative to the constraint's right-hand side
constexpr double kTightTolerance = 1e-6;  // over-met constraint that still carries a multiplier
constexpr double kRateSlack = 1e-6;

// Coefficients of the separable power subproblem: per user the objective is
// base * p - 2 numerator * sqrt(p) plus terms independent of p.
struct Subproblem {
  RealVector numerator;  // a Re(c h^H w)
  RealVector base;       // sum of a |c|^2 |h^H w_n|^2 over users that p_k interferes with (and k itself)
};

Subproblem subproblem(const AuxState& aux, const EffectiveGains& gains) {
  const int k_total = gains.user_count();
  Subproblem sp;
  sp.numerator.resize(k_total);
  sp.base.resize(k_total);
  RealVector weighted(k_total);
  for (int k = 0; k < k_total; ++k) {
    sp.numerator[k] = aux.weight[k] * std::real(aux.equalizer[k] * gains.own_coefficient(k));
    weighted[k] = aux.weight[k] * std::norm(aux.equalizer[k]);
  }
  for (int n = 0; n < gains.beam_count(); ++n) {
    double total = 0.0;
    for (int u = 0; u < k_total; ++u) total += weighted[u] * gains.gain(u, n);
    // members of beam n are listed strongest first; the stronger ones have
    // already cancelled k's signal, so they drop out of k's sum
    double stronger = 0.0;
    for (int k : gains.members(n)) {
      sp.base[k] = total - stronger;
      stronger += weighted[k] * gains.gain(k, n);
    }
  }
  return sp;
}

// Contribution of the rate multipliers to tau of every user.
RealVector multiplier_terms(const EffectiveGains& gains, double sinr_target, const RealVector& mu) {
  const int k_total = gains.user_count();
  RealVector out = RealVector::Zero(k_total);
  if (mu.size() == 0 || mu.isZero(0.0)) return out;
  for (int n = 0; n < gains.beam_count(); ++n) {
    double total = 0.0;
    for (int u = 0; u < k_total; ++u) total += mu[u] * gains.gain(u, n);
    double up_to_k = 0.0;
    for (int k : gains.members(n)) {
      up_to_k += mu[k] * gains.gain(k, n);
      out[k] = -mu[k] * gains.own_gain(k) + sinr_target * (total - up_to_k);
    }
  }
  return out;
}

RealVector stationary_powers(const Subproblem& sp, const RealVector& shift, double lambda) {
  RealVector p(sp.numerator.size());
  for (Eigen::Index k = 0; k < p.size(); ++k) {
    if (sp.numerator[k] <= 0.0) {
      p[k] = 0.0;
      continue;
    }
    const double tau = sp.base[k] + shift[k] + lambda;
    p[k] = tau > 0.0 ? std::pow(sp.numerator[k] / tau, 2) : std::numeric_limits<double>::infinity();
  }
  return p;
}

double floor_of(const Subproblem& sp, const RealVector& shift) {
  double floor = 0.0;
  for (Eigen::Index k = 0; k < sp.numerator.size(); ++k) {
    if (sp.numerator[k] > 0.0) floor = std::max(floor, -(sp.base[k] + shift[k]));
  }
  return floor;
}

struct BudgetSolution {
  RealVector powers;
  double lambda = 0.0;
};

// Smallest lambda >= floor with sum p(lambda) <= P; the result always sits on
// the feasible side of the budget.
BudgetSolution solve_budget(const Subproblem& sp, const RealVector& shift, double total_power, double tolerance) {
  const double floor = floor_of(sp, shift);
  BudgetSolution sol;
  if (floor == 0.0) {
    sol.powers = stationary_powers(sp, shift, 0.0);
    if (sol.powers.allFinite() && sol.powers.sum() <= total_power) return sol;
  }
  // tau_k >= numerator_k sqrt(K / P) caps every p_k at P / K
  const double k_total = static_cast<double>(sp.numerator.size());
  double hi = floor;
  for (Eigen::Index k = 0; k < sp.numerator.size(); ++k) {
    if (sp.numerator[k] > 0.0) hi = std::max(hi, sp.numerator[k] * std::sqrt(k_total / total_power) - (sp.base[k] + shift[k]));
  }
  double lo = floor;
  RealVector p_hi = stationary_powers(sp, shift, hi);
  for (int it = 0; it < kBisectionCap && total_power - p_hi.sum() > tolerance * total_power; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    RealVector p_mid = stationary_powers(sp, shift, mid);
    if (p_mid.allFinite() && p_mid.sum() <= total_power) {
      hi = mid;
      p_hi = std::move(p_mid);
    } else {
      lo = mid;
    }
  }
  sol.powers = std::move(p_hi);
  sol.lambda = hi;
  return sol;
}

// Row k of the linear rate constraints A p >= eta sigma^2:
// |h_k^H w_k|^2 p_k - eta * (interference coefficients of every other p).
RealMatrix rate_constraint_matrix(const EffectiveGains& gains, double eta) {
  const int k_total = gains.user_count();
  RealMatrix a = RealMatrix::Zero(k_total, k_total);
  for (int k = 0; k < k_total; ++k) {
    const UserSlot& s = gains.slot(k);
    a(k, k) = gains.own_gain(k);
    for (int i = 0; i < k_total; ++i) {
      if (i == k) continue;
      const UserSlot& o = gains.slot(i);
      if (o.beam == s.beam) {
        if (o.rank < s.rank) a(k, i) = -eta * gains.own_gain(k);
      } else {
        a(k, i) = -eta * gains.gain(k, o.beam);
      }
    }
  }
  return a;
}

}  // namespace

double OptimizerConfig::sinr_target() const { return std::exp2(min_rate) - 1.0; }

void OptimizerConfig::validate() const {
  if (max_iterations < 0) throw std::invalid_argument("optimizer: iteration cap must be >= 0");
  if (!(min_rate >= 0.0)) throw std::invalid_argument("optimizer: minimum rate must be >= 0");
  if (!(dual_tolerance > 0.0)) throw std::invalid_argument("optimizer: dual tolerance must be > 0");
  if (outer_cap < 1) throw std::invalid_argument("optimizer: outer cap must be >= 1");
}

ComplexVector update_c(const EffectiveGains& gains, const RealVector& powers, double noise_variance) {
  ComplexVector c(gains.user_count());
  for (int k = 0; k < gains.user_count(); ++k) {
    const double xi = interference_term(k, gains, powers, noise_variance);
    const Complex q = gains.own_coefficient(k);
    c[k] = std::conj(std::sqrt(powers[k]) * q) / (powers[k] * std::norm(q) + xi);
  }
  return c;
}

RealVector minimum_mse(const EffectiveGains& gains, const RealVector& powers, double noise_variance) {
  RealVector e(gains.user_count());
  for (int k = 0; k < gains.user_count(); ++k) {
    const double xi = interference_term(k, gains, powers, noise_variance);
    const double signal = powers[k] * gains.own_gain(k);
    e[k] = 1.0 - signal / (signal + xi);
  }
  return e;
}

RealVector update_a(const EffectiveGains& gains, const RealVector& powers, double noise_variance) {
  return minimum_mse(gains, powers, noise_variance).cwiseInverse();
}

double mse(int k, Complex equalizer, const EffectiveGains& gains, const RealVector& powers, double noise_variance) {
  const double xi = interference_term(k, gains, powers, noise_variance);
  return std::norm(1.0 - equalizer * std::sqrt(powers[k]) * gains.own_coefficient(k)) + std::norm(equalizer) * xi;
}

AuxState make_aux_state(const EffectiveGains& gains, const RealVector& powers, double noise_variance, int iteration) {
  AuxState aux;
  aux.powers = powers;
  aux.equalizer = update_c(gains, powers, noise_variance);
  aux.mse = minimum_mse(gains, powers, noise_variance);
  aux.weight = aux.mse.cwiseInverse();
  aux.iteration = iteration;
  return aux;
}

RealVector powers_for_multipliers(const AuxState& aux, const EffectiveGains& gains, double sinr_target, double lambda,
                                  const RealVector& mu) {
  const Subproblem sp = subproblem(aux, gains);
  return stationary_powers(sp, multiplier_terms(gains, sinr_target, mu), lambda);
}

double lambda_floor(const AuxState& aux, const EffectiveGains& gains, double sinr_target, const RealVector& mu) {
  return floor_of(subproblem(aux, gains), multiplier_terms(gains, sinr_target, mu));
}

PowerStep update_p(const AuxState& aux, const EffectiveGains& gains, const OptimizerConfig& config, const LinkBudget& budget) {
  const int k_total = gains.user_count();
  const Subproblem sp = subproblem(aux, gains);
  const double eta = config.sinr_target();
  const double omega = eta * budget.noise_variance;

  PowerStep step;
  step.mu = RealVector::Zero(k_total);

  if (eta == 0.0) {
    BudgetSolution sol = solve_budget(sp, RealVector::Zero(k_total), budget.total_power_mw, config.dual_tolerance);
    step.powers = std::move(sol.powers);
    step.lambda = sol.lambda;
    step.rounds = 1;
    return step;
  }

  // Multipliers by projected Newton on the dual. With y = (lambda, mu) and
  // tau = base + C y, the dual objective to minimize is
  //   phi(y) = sum b^2 / tau + y . (P, -omega),   y >= 0,
  // whose gradient is the vector of constraint slacks at p = (b / tau)^2.
  const RealMatrix a = rate_constraint_matrix(gains, eta);
  RealMatrix c(k_total, k_total + 1);
  c.col(0).setOnes();
  c.rightCols(k_total) = -a.transpose();
  RealVector r0(k_total + 1);
  r0[0] = budget.total_power_mw;
  r0.tail(k_total).setConstant(-omega);
  const RealVector& b = sp.numerator;

  auto tau_of = [&](const RealVector& y) -> RealVector { return sp.base + c * y; };
  auto in_domain = [&](const RealVector& tau) {
    for (int u = 0; u < k_total; ++u)
      if (b[u] > 0.0 ? !(tau[u] > 0.0) : tau[u] < 0.0) return false;
    return true;
  };
  auto phi = [&](const RealVector& y, const RealVector& tau) {
    double v = r0.dot(y);
    for (int u = 0; u < k_total; ++u)
      if (b[u] > 0.0) v += b[u] * b[u] / tau[u];
    return v;
  };
  auto powers_at = [&](const RealVector& tau) {
    RealVector p = RealVector::Zero(k_total);
    for (int u = 0; u < k_total; ++u)
      if (b[u] > 0.0) p[u] = std::pow(b[u] / tau[u], 2);
    return p;
  };

  RealVector y = RealVector::Zero(k_total + 1);
  y[0] = solve_budget(sp, RealVector::Zero(k_total), budget.total_power_mw, config.dual_tolerance).lambda;
  RealVector tau = tau_of(y);
  RealVector p = powers_at(tau);

  // KKT residual of (y, p): budget and rate slacks relative to their
  // right-hand sides, two-sided where the multiplier is positive.
  auto residual = [&](const RealVector& yv, const RealVector& pv) {
    const RealVector grad = r0 - c.transpose() * pv;
    double r = (yv[0] > 0.0 ? std::abs(grad[0]) : std::max(0.0, -grad[0])) / budget.total_power_mw /
               config.dual_tolerance;
    for (int k = 0; k < k_total; ++k) {
      const double rhs = a(k, k) * pv[k] - grad[k + 1];
      const double slack = grad[k + 1] / rhs;
      r = std::max(r, slack < 0.0 ? -slack / kSlackTolerance : yv[k + 1] > 0.0 ? slack / kTightTolerance : 0.0);
    }
    return r;  // <= 1 means converged
  };
  auto targets_met = [&](const RealVector& pv) {
    const RealVector grad = r0 - c.transpose() * pv;
    for (int k = 0; k < k_total; ++k)
      if (grad[k + 1] < -kSlackTolerance * (a(k, k) * pv[k] - grad[k + 1])) return false;
    return true;
  };

  int round = 0;
  for (; round < config.outer_cap; ++round) {
    const double res = residual(y, p);
    if (res <= 1.0) break;
    const RealVector grad = r0 - c.transpose() * p;

    RealVector h = RealVector::Zero(k_total);
    for (int u = 0; u < k_total; ++u)
      if (b[u] > 0.0) h[u] = 2.0 * p[u] / tau[u];
    const RealMatrix hess = c.transpose() * h.asDiagonal() * c;

    // Variables pinned at zero whose gradient pushes them further down stay
    // out of the Newton system and take a scaled gradient step.
    std::vector<int> free_set;
    RealVector d = RealVector::Zero(k_total + 1);
    for (int i = 0; i <= k_total; ++i) {
      if (y[i] <= 0.0 && grad[i] > 0.0) d[i] = -grad[i] / std::max(hess(i, i), 1e-300);
      else free_set.push_back(i);
    }
    if (!free_set.empty()) {
      const int f = static_cast<int>(free_set.size());
      RealMatrix hf(f, f);
      RealVector gf(f);
      double diag = 0.0;
      for (int i = 0; i < f; ++i) {
        gf[i] = grad[free_set[i]];
        for (int j = 0; j < f; ++j) hf(i, j) = hess(free_set[i], free_set[j]);
        diag = std::max(diag, hf(i, i));
      }
      hf.diagonal().array() += 1e-12 * std::max(diag, 1e-300);
      const RealVector df = hf.ldlt().solve(-gf);
      for (int i = 0; i < f; ++i) d[free_set[i]] = df[i];
    }

    const double current = phi(y, tau);
    bool moved = false;
    for (double alpha = 1.0; alpha > 1e-12; alpha *= 0.5) {
      const RealVector trial = (y + alpha * d).cwiseMax(0.0);
      const RealVector trial_tau = tau_of(trial);
      if (!in_domain(trial_tau)) continue;
      // phi alone cannot see progress below its rounding level, so a step
      // that keeps phi flat but shrinks the KKT residual is taken as well.
      const double value = phi(trial, trial_tau);
      const RealVector trial_p = powers_at(trial_tau);
      if (value <= current + 1e-4 * grad.dot(trial - y) ||
          (value <= current + 1e-13 * std::abs(current) && residual(trial, trial_p) < res)) {
        moved = trial != y;
        y = trial;
        tau = trial_tau;
        p = trial_p;
        break;
      }
    }
    if (!moved) break;
  }

  // Newton stops once phi is flat to machine precision; the budget may then
  // be exceeded by ~1e-9 relative, which a uniform scale-down removes while
  // moving every SINR by the same relative amount.
  if (p.sum() > budget.total_power_mw) p *= budget.total_power_mw / p.sum();
  step.constraints_met = targets_met(p);
  step.powers = p;
  step.lambda = y[0];
  step.mu = y.tail(k_total);
  step.rounds = round;
  return step;
}

bool min_rate_feasible(const EffectiveGains& gains, const LinkBudget& budget, double min_rate) {
  const double eta = std::exp2(min_rate) - 1.0;
  if (eta == 0.0) return true;
  const RealMatrix a = rate_constraint_matrix(gains, eta);
  const RealVector rhs = RealVector::Constant(gains.user_count(), eta * budget.noise_variance);
  const RealVector p = a.fullPivLu().solve(rhs);
  if (!p.allFinite() || (a * p - rhs).norm() > 1e-9 * rhs.norm()) return false;
  return (p.array() > 0.0).all() && p.sum() <= budget.total_power_mw;
}

PowerAllocation allocate(const EffectiveGains& gains, const LinkBudget& budget, const OptimizerConfig& config) {
  config.validate();
  budget.validate();
  if (gains.user_count() == 0) throw InvalidDimension("allocate: no users");

  PowerAllocation out;
  out.powers = gains.equal_powers(budget.total_power_mw);
  out.mu = RealVector::Zero(gains.user_count());

  // unreachable rate targets: plain sum rate, flagged infeasible below
  OptimizerConfig effective = config;
  const bool reachable = min_rate_feasible(gains, budget, config.min_rate);
  if (!reachable) effective.min_rate = 0.0;

  int stagnant = 0;
  for (int t = 1; t <= effective.max_iterations; ++t) {
    const AuxState aux = make_aux_state(gains, out.powers, budget.noise_variance, t);
    PowerStep step = update_p(aux, gains, effective, budget);
    out.powers = std::move(step.powers);
    out.lambda = step.lambda;
    out.mu = std::move(step.mu);
    out.iterations_used = t;

    const double value = sum_rate(gains, out.powers, budget).sum_rate;
    if (!out.trace.empty() && value - out.trace.back() < kStagnationDelta) ++stagnant;
    else stagnant = 0;
    out.trace.push_back(value);
    if (stagnant >= kStagnationRun) break;
  }

  out.feasible = reachable;
  if (config.min_rate > 0.0 && out.feasible) {
    const RateReport report = sum_rate(gains, out.powers, budget);
    out.feasible = (report.rate.array() >= config.min_rate - kRateSlack).all();
  }
  return out;
}

double mmse_identity(double sinr) { return 1.0 / (1.0 + sinr); }

WeightOptimum weight_subproblem_check(double b, std::span<const double> grid) {
  if (!(b > 0.0)) throw std::invalid_argument("weight_subproblem_check: b must be > 0");
  if (grid.empty()) throw std::invalid_argument("weight_subproblem_check: empty grid");
  WeightOptimum best{0.0, -std::numeric_limits<double>::infinity()};
  for (double a : grid) {
    if (!(a > 0.0)) throw std::invalid_argument("weight_subproblem_check: grid values must be positive");
    const double f = -a * b / std::numbers::ln2 + std::log2(a) + 1.0 / std::numbers::ln2;
    if (f > best.max) best = {a, f};
  }
  return best;
}

}  // namespace bsnoma
