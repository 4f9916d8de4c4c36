#pragma once

#include <vector>

#include "bsnoma/beam_selection.hpp"
#include "bsnoma/precoding.hpp"
#include "bsnoma/types.hpp"

namespace bsnoma {

/// All powers in milliwatts. The SNR point is referenced to the average
/// per-user transmit power: noise = (P / users) / 10^(snr_db / 10).
/// Passing users = 1 gives the total-power reference.
struct LinkBudget {
  double noise_variance = 1.0;
  double total_power_mw = 32.0;
  double snr_db = 0.0;

  static LinkBudget from_snr(double total_power_mw, double snr_db, int users = 1);
  void validate() const;
};

struct PowerModel {
  double rf_chain_mw = 300.0;
  double switch_mw = 5.0;
  double baseband_mw = 200.0;
};

/// Position of one served user inside the grouping.
struct UserSlot {
  int beam = 0;  // slot n in Gamma
  int rank = 0;  // m, 0 = strongest (decodes everyone else in the beam)
  int user = 0;  // original user index k
};

/// Flattened view of a grouping under a precoder. Users are numbered in
/// beam order, then SIC order; every per-user vector in this library uses
/// that numbering.
class EffectiveGains {
 public:
  EffectiveGains(const BeamGrouping& grouping, const Precoder& precoder);
  /// Direct construction from a coefficient table, mainly for tests.
  EffectiveGains(std::vector<UserSlot> slots, ComplexMatrix coefficients);

  int user_count() const { return static_cast<int>(slots_.size()); }
  int beam_count() const { return static_cast<int>(coeff_.cols()); }
  const UserSlot& slot(int k) const { return slots_[k]; }
  const std::vector<UserSlot>& slots() const { return slots_; }
  /// Flat indices of the members of beam n, in SIC order.
  const std::vector<int>& members(int beam) const { return members_[beam]; }

  /// h_k^H w_j
  Complex coefficient(int k, int beam) const { return coeff_(k, beam); }
  /// |h_k^H w_j|^2
  double gain(int k, int beam) const { return gain_(k, beam); }
  /// |h_k^H w_{n(k)}|^2
  double own_gain(int k) const { return gain_(k, slots_[k].beam); }
  Complex own_coefficient(int k) const { return coeff_(k, slots_[k].beam); }

  /// Total power of every beam.
  RealVector beam_power(const RealVector& powers) const;
  /// Equal split of `total_power` over all users.
  RealVector equal_powers(double total_power) const;

 private:
  void index();

  std::vector<UserSlot> slots_;
  std::vector<std::vector<int>> members_;
  ComplexMatrix coeff_;
  RealMatrix gain_;
};

struct RateReport {
  RealVector sinr;           // gamma
  RealVector interference;   // xi, noise included
  RealVector rate;           // log2(1 + gamma)
  double sum_rate = 0.0;
  int rf_chains = 0;
};

/// Post-SIC interference plus noise seen by user k:
/// own gain * (power of stronger users in the beam) + sum over other beams
/// of cross gain * beam power + noise.
double interference_term(int k, const EffectiveGains& gains, const RealVector& powers, double noise_variance);

double sinr(int k, const EffectiveGains& gains, const RealVector& powers, double noise_variance);

RateReport sum_rate(const EffectiveGains& gains, const RealVector& powers, const LinkBudget& budget);

/// Sum rate over total consumed power in bps/Hz/W (mW inputs converted).
double energy_efficiency(double sum_rate, int rf_chains, const LinkBudget& budget, const PowerModel& model);

}  // namespace bsnoma
