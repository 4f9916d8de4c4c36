#pragma once

#include <string_view>

#include "bsnoma/beam_selection.hpp"
#include "bsnoma/types.hpp"

namespace bsnoma {

enum class EquivalentKind { strongest, svd };

std::string_view to_string(EquivalentKind kind);
/// Accepts "strongest" or "svd"; throws std::invalid_argument otherwise.
EquivalentKind parse_equivalent_kind(std::string_view text);

/// One representative channel per beam, N_RF x N_RF.
struct EquivalentChannel {
  ComplexMatrix matrix;
  EquivalentKind kind = EquivalentKind::strongest;
};

struct Precoder {
  ComplexMatrix weights;  // unit-norm columns w_n
  EquivalentChannel source;
  double condition = 1.0;  // 2-norm condition number of source.matrix
};

struct SingularPair {
  ComplexVector vector;  // unit norm, largest-magnitude entry real positive
  double value = 0.0;
  int iterations = 0;
};

/// Condition of H^H H above which zero-forcing is refused.
inline constexpr double kMaxGramCondition = 1e12;

/// Column n is h_{1,n}, the first (strongest) user of beam n.
EquivalentChannel equivalent_channel_strongest(const BeamGrouping& grouping);

/// Dominant left singular pair of `m` by power iteration on m m^H.
/// Starts from a real positive vector, restarts once from a seeded random
/// vector if the iterate stagnates, stops at 1e-12 change or 10000 steps.
/// When the top two singular values coincide any vector of the dominant
/// subspace is returned. Throws DegenerateChannel on a zero matrix.
SingularPair top_left_singular_vector(const ComplexMatrix& m);

/// Column n is H_n conj(u_n), u_n the dominant left singular vector of H_n^T.
EquivalentChannel equivalent_channel_svd(const BeamGrouping& grouping);

EquivalentChannel equivalent_channel(const BeamGrouping& grouping, EquivalentKind kind);

/// W~ = H~ (H~^H H~)^-1, columns normalized. For square H~ this is H~^-H,
/// which is what gets solved (LU plus one refinement step).
/// Throws PrecodingFailure when cond(H~^H H~) exceeds kMaxGramCondition.
Precoder zf_precoder(const EquivalentChannel& equivalent);

}  // namespace bsnoma
