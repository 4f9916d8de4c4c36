#pragma once

#include <span>
#include <vector>

#include "bsnoma/rate_metrics.hpp"
#include "bsnoma/types.hpp"

namespace bsnoma {

// Sum-rate maximization under a total power budget and per-user minimum
// rates. The rate of every user is rewritten through its MMSE receiver,
//   R = max_c max_{a>0} ( -a e(c, p) / ln2 + log2 a + 1/ln2 ),
// and the equalizers c, the weights a and the powers p are optimized in
// turn. The p-block is convex; it is solved through its KKT conditions
// with a bisection on the budget multiplier lambda and a multiplier mu per
// rate constraint.

struct OptimizerConfig {
  int max_iterations = 20;        // T_max
  double min_rate = 0.0;          // R_min, bps/Hz
  double dual_tolerance = 1e-10;  // relative budget residual of the lambda search
  int outer_cap = 50;             // Newton steps of the multiplier search per power step

  /// 2^R_min - 1
  double sinr_target() const;
  void validate() const;
};

struct AuxState {
  ComplexVector equalizer;  // c
  RealVector weight;        // a = 1 / e^o
  RealVector mse;           // e^o
  RealVector powers;        // p used to build c and a
  int iteration = 0;
};

struct PowerStep {
  RealVector powers;
  double lambda = 0.0;
  RealVector mu;
  bool constraints_met = true;
  int rounds = 0;
};

struct PowerAllocation {
  RealVector powers;
  std::vector<double> trace;  // sum rate after each iteration
  double lambda = 0.0;
  RealVector mu;
  bool feasible = true;
  int iterations_used = 0;
};

/// MMSE equalizer per user: (sqrt(p) h^H w)^* / (p |h^H w|^2 + xi).
ComplexVector update_c(const EffectiveGains& gains, const RealVector& powers, double noise_variance);

/// Minimum MSE per user, 1 - p|h^H w|^2 / (p|h^H w|^2 + xi).
RealVector minimum_mse(const EffectiveGains& gains, const RealVector& powers, double noise_variance);

/// a = 1 / e^o.
RealVector update_a(const EffectiveGains& gains, const RealVector& powers, double noise_variance);

/// MSE of user k for an arbitrary equalizer c.
double mse(int k, Complex equalizer, const EffectiveGains& gains, const RealVector& powers, double noise_variance);

/// c, a and e^o for the given powers.
AuxState make_aux_state(const EffectiveGains& gains, const RealVector& powers, double noise_variance, int iteration = 0);

/// Closed-form stationary powers for fixed multipliers,
/// p = (a Re(c h^H w) / tau)^2. Cells with a non-positive numerator get 0.
/// Requires every tau of a positive-numerator cell to be positive.
RealVector powers_for_multipliers(const AuxState& aux, const EffectiveGains& gains, double sinr_target, double lambda,
                                  const RealVector& mu);

/// Smallest lambda for which powers_for_multipliers is finite.
double lambda_floor(const AuxState& aux, const EffectiveGains& gains, double sinr_target, const RealVector& mu);

/// Solves the convex power subproblem for fixed c and a.
PowerStep update_p(const AuxState& aux, const EffectiveGains& gains, const OptimizerConfig& config, const LinkBudget& budget);

/// True when the per-user minimum rate can be met within the budget. Solves
/// the linear "exactly at target" system; it is feasible iff that solution
/// is positive and fits the budget.
bool min_rate_feasible(const EffectiveGains& gains, const LinkBudget& budget, double min_rate);

/// Full iterative allocation, starting from an equal split P/K.
PowerAllocation allocate(const EffectiveGains& gains, const LinkBudget& budget, const OptimizerConfig& config);

/// 1 / (1 + gamma)
double mmse_identity(double sinr);

struct WeightOptimum {
  double argmax = 0.0;
  double max = 0.0;
};

/// Evaluates f(a) = -a b / ln2 + log2 a + 1/ln2 over `grid` (positive values).
WeightOptimum weight_subproblem_check(double b, std::span<const double> grid);

}  // namespace bsnoma
