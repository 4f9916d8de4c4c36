#include "bsnoma/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace bsnoma {

std::string_view to_string(Scheme scheme) {
  switch (scheme) {
    case Scheme::noma: return "noma";
    case Scheme::oma: return "oma";
    case Scheme::beamspace_mimo: return "beamspace_mimo";
    case Scheme::fully_digital: return "fully_digital";
  }
  return "unknown";
}

Scheme parse_scheme(std::string_view text) {
  for (Scheme s : {Scheme::noma, Scheme::oma, Scheme::beamspace_mimo, Scheme::fully_digital}) {
    if (text == to_string(s)) return s;
  }
  throw std::invalid_argument("unknown scheme '" + std::string(text) + "'");
}

SchemeResult fully_digital_zf(const ComplexMatrix& spatial, const LinkBudget& budget) {
  budget.validate();
  const Eigen::Index n = spatial.rows();
  const Eigen::Index k = spatial.cols();
  if (k == 0 || k > n) throw InvalidDimension("fully_digital_zf: need 1 <= K <= N");

  const Eigen::JacobiSVD<ComplexMatrix> svd(spatial);
  const auto& s = svd.singularValues();
  const double condition = s[k - 1] > 0.0 ? s[0] / s[k - 1] : std::numeric_limits<double>::infinity();
  if (!(condition * condition <= kMaxGramCondition)) {
    throw PrecodingFailure("fully_digital_zf: spatial channel is rank deficient", condition * condition);
  }

  // W = H (H^H H)^-1
  const ComplexMatrix gram = spatial.adjoint() * spatial;
  ComplexMatrix w = spatial * gram.ldlt().solve(ComplexMatrix::Identity(k, k));
  for (Eigen::Index c = 0; c < k; ++c) w.col(c).normalize();

  const ComplexMatrix coeff = spatial.adjoint() * w;  // (k, j) = h_k^H w_j
  const double p = budget.total_power_mw / static_cast<double>(k);
  SchemeResult out;
  out.scheme = Scheme::fully_digital;
  out.rf_chains = static_cast<int>(n);
  out.served_users = static_cast<int>(k);
  out.user_rates.resize(k);
  for (Eigen::Index u = 0; u < k; ++u) {
    double leak = 0.0;
    for (Eigen::Index j = 0; j < k; ++j) {
      if (j != u) leak += std::norm(coeff(u, j)) * p;
    }
    const double gamma = std::norm(coeff(u, u)) * p / (leak + budget.noise_variance);
    out.user_rates[u] = std::log2(1.0 + gamma);
    out.sum_rate += out.user_rates[u];
  }
  return out;
}

BeamAssignment greedy_distinct_assignment(const BeamspaceChannel& beamspace) {
  const auto& h = beamspace.matrix;
  const int n = beamspace.beams();
  const int k = beamspace.users();
  if (k > n) throw InvalidDimension("beamspace MIMO: more users than beams");

  std::vector<int> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return h.col(a).squaredNorm() > h.col(b).squaredNorm(); });

  std::vector<bool> taken(n, false);
  std::vector<int> user_beam(k, -1);
  for (int u : order) {
    int best = -1;
    double best_mag = -1.0;
    for (int b = 0; b < n; ++b) {
      if (taken[b]) continue;
      const double mag = std::abs(h(b, u));
      if (mag > best_mag) {
        best_mag = mag;
        best = b;
      }
    }
    taken[best] = true;
    user_beam[u] = best;
  }
  return make_assignment(std::move(user_beam));
}

SchemeResult beamspace_mimo_single_user(const BeamspaceChannel& beamspace, const LinkBudget& budget) {
  budget.validate();
  const BeamAssignment assignment = greedy_distinct_assignment(beamspace);
  const BeamGrouping grouping = group_users(assignment, beamspace);
  const Precoder precoder = zf_precoder(equivalent_channel_strongest(grouping));
  const EffectiveGains gains(grouping, precoder);
  const RateReport report = sum_rate(gains, gains.equal_powers(budget.total_power_mw), budget);

  SchemeResult out;
  out.scheme = Scheme::beamspace_mimo;
  out.sum_rate = report.sum_rate;
  out.rf_chains = grouping.rf_chains();
  out.served_users = gains.user_count();
  out.user_rates.assign(beamspace.users(), 0.0);
  for (int k = 0; k < gains.user_count(); ++k) out.user_rates[gains.slot(k).user] = report.rate[k];
  return out;
}

SchemeResult mimo_oma(const BeamGrouping& grouping, const Precoder& precoder, const LinkBudget& budget) {
  budget.validate();
  const EffectiveGains gains(grouping, precoder);
  const int n_rf = gains.beam_count();
  const double beam_power = budget.total_power_mw / n_rf;

  SchemeResult out;
  out.scheme = Scheme::oma;
  out.rf_chains = n_rf;
  out.served_users = gains.user_count();
  out.user_rates.assign(gains.user_count(), 0.0);
  for (int k = 0; k < gains.user_count(); ++k) {
    const int n = gains.slot(k).beam;
    double inter = 0.0;
    for (int j = 0; j < n_rf; ++j) {
      if (j != n) inter += gains.gain(k, j) * beam_power;
    }
    const double share = 1.0 / static_cast<double>(gains.members(n).size());
    const double rate = share * std::log2(1.0 + gains.own_gain(k) * beam_power / (inter + budget.noise_variance));
    out.user_rates[gains.slot(k).user] = rate;
    out.sum_rate += rate;
  }
  return out;
}

}  // namespace bsnoma
