#include "bsnoma/rate_metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace bsnoma {

LinkBudget LinkBudget::from_snr(double total_power_mw, double snr_db, int users) {
  if (users < 1) throw std::invalid_argument("link budget: SNR reference needs at least one user");
  LinkBudget b;
  b.total_power_mw = total_power_mw;
  b.snr_db = snr_db;
  b.noise_variance = total_power_mw / users / std::pow(10.0, snr_db / 10.0);
  b.validate();
  return b;
}

void LinkBudget::validate() const {
  if (!(noise_variance > 0.0) || !std::isfinite(noise_variance)) throw std::invalid_argument("link budget: noise variance must be > 0");
  if (!(total_power_mw > 0.0) || !std::isfinite(total_power_mw)) throw std::invalid_argument("link budget: total power must be > 0");
}

EffectiveGains::EffectiveGains(const BeamGrouping& grouping, const Precoder& precoder) {
  const int n_rf = grouping.rf_chains();
  if (precoder.weights.cols() != n_rf || precoder.weights.rows() != n_rf) {
    throw InvalidDimension("EffectiveGains: precoder does not match grouping");
  }
  const int k_total = grouping.user_count();
  ComplexMatrix stacked(n_rf, k_total);
  slots_.reserve(k_total);
  for (int n = 0; n < n_rf; ++n) {
    for (int m = 0; m < static_cast<int>(grouping.sets[n].size()); ++m) {
      const auto& gu = grouping.sets[n][m];
      stacked.col(static_cast<Eigen::Index>(slots_.size())) = gu.channel;
      slots_.push_back({n, m, gu.user});
    }
  }
  coeff_ = stacked.adjoint() * precoder.weights;
  index();
}

EffectiveGains::EffectiveGains(std::vector<UserSlot> slots, ComplexMatrix coefficients)
    : slots_(std::move(slots)), coeff_(std::move(coefficients)) {
  if (coeff_.rows() != static_cast<Eigen::Index>(slots_.size())) throw InvalidDimension("EffectiveGains: one coefficient row per user");
  index();
}

void EffectiveGains::index() {
  gain_ = coeff_.cwiseAbs2();
  members_.assign(coeff_.cols(), {});
  for (int k = 0; k < user_count(); ++k) {
    const auto& s = slots_[k];
    if (s.beam < 0 || s.beam >= beam_count()) throw InvalidDimension("EffectiveGains: user slot outside the beam range");
    members_[s.beam].push_back(k);
  }
  for (const auto& list : members_) {
    for (std::size_t i = 0; i < list.size(); ++i) {
      if (slots_[list[i]].rank != static_cast<int>(i)) throw InvalidGrouping("EffectiveGains: ranks must be 0..|S_n|-1 in order");
    }
  }
}

RealVector EffectiveGains::beam_power(const RealVector& powers) const {
  RealVector out = RealVector::Zero(beam_count());
  for (int k = 0; k < user_count(); ++k) out[slots_[k].beam] += powers[k];
  return out;
}

RealVector EffectiveGains::equal_powers(double total_power) const {
  return RealVector::Constant(user_count(), total_power / user_count());
}

double interference_term(int k, const EffectiveGains& gains, const RealVector& powers, double noise_variance) {
  const UserSlot& s = gains.slot(k);
  double stronger = 0.0;
  for (int i : gains.members(s.beam)) {
    if (gains.slot(i).rank >= s.rank) break;
    stronger += powers[i];
  }
  double xi = gains.own_gain(k) * stronger;
  for (int j = 0; j < gains.beam_count(); ++j) {
    if (j == s.beam) continue;
    double beam_total = 0.0;
    for (int i : gains.members(j)) beam_total += powers[i];
    xi += gains.gain(k, j) * beam_total;
  }
  return xi + noise_variance;
}

double sinr(int k, const EffectiveGains& gains, const RealVector& powers, double noise_variance) {
  return gains.own_gain(k) * powers[k] / interference_term(k, gains, powers, noise_variance);
}

RateReport sum_rate(const EffectiveGains& gains, const RealVector& powers, const LinkBudget& budget) {
  if (powers.size() != gains.user_count()) throw InvalidDimension("sum_rate: one power per user required");
  const int k_total = gains.user_count();
  RateReport report;
  report.sinr.resize(k_total);
  report.interference.resize(k_total);
  report.rate.resize(k_total);
  report.rf_chains = gains.beam_count();
  for (int k = 0; k < k_total; ++k) {
    const double xi = interference_term(k, gains, powers, budget.noise_variance);
    const double gamma = gains.own_gain(k) * powers[k] / xi;
    report.interference[k] = xi;
    report.sinr[k] = gamma;
    report.rate[k] = std::log2(1.0 + gamma);
    report.sum_rate += report.rate[k];
  }
  return report;
}

double energy_efficiency(double sum_rate, int rf_chains, const LinkBudget& budget, const PowerModel& model) {
  const double consumed_mw = budget.total_power_mw + rf_chains * model.rf_chain_mw + rf_chains * model.switch_mw + model.baseband_mw;
  return sum_rate / (consumed_mw * 1e-3);
}

}  // namespace bsnoma
