#pragma once

#include <string_view>
#include <vector>

#include "bsnoma/beam_selection.hpp"
#include "bsnoma/channel_model.hpp"
#include "bsnoma/precoding.hpp"
#include "bsnoma/rate_metrics.hpp"

namespace bsnoma {

enum class Scheme { noma, oma, beamspace_mimo, fully_digital };

std::string_view to_string(Scheme scheme);
Scheme parse_scheme(std::string_view text);

struct SchemeResult {
  Scheme scheme = Scheme::noma;
  double sum_rate = 0.0;
  int rf_chains = 0;
  int served_users = 0;
  std::vector<double> user_rates;  // indexed by original user index
};

/// ZF on the N x K spatial channel with one RF chain per antenna and an
/// equal power split. Throws PrecodingFailure when H is rank deficient.
SchemeResult fully_digital_zf(const ComplexMatrix& spatial, const LinkBudget& budget);

/// One user per beam. Users in order of decreasing beamspace norm claim
/// their strongest beam not yet taken, so N_RF = K. ZF on the reduced K x K
/// channel, equal power.
SchemeResult beamspace_mimo_single_user(const BeamspaceChannel& beamspace, const LinkBudget& budget);

/// Beam choice used by beamspace_mimo_single_user.
BeamAssignment greedy_distinct_assignment(const BeamspaceChannel& beamspace);

/// Users sharing a beam split it orthogonally in equal fractions 1/|S_n|;
/// each beam radiates P / N_RF while active and interferes at that level.
SchemeResult mimo_oma(const BeamGrouping& grouping, const Precoder& precoder, const LinkBudget& budget);

}  // namespace bsnoma
