#pragma once

#include <vector>

#include "bsnoma/channel_model.hpp"
#include "bsnoma/types.hpp"

namespace bsnoma {

struct Precoder;

// Beam indices are 0-based rows of the N-beam grid. "Slots" are positions
// inside the selected set Gamma, i.e. RF-chain indices 0..N_RF-1.

struct BeamAssignment {
  std::vector<int> user_beam;  // dominant beam of user k
  std::vector<int> selected;   // Gamma, distinct, ascending

  int rf_chains() const { return static_cast<int>(selected.size()); }
  int user_count() const { return static_cast<int>(user_beam.size()); }
  /// Position of `beam` in Gamma, or -1.
  int slot_of(int beam) const;
  bool has_conflict() const { return rf_chains() < user_count(); }
};

/// Builds Gamma from an arbitrary per-user beam choice.
BeamAssignment make_assignment(std::vector<int> user_beam);

struct GroupedUser {
  int user = 0;           // original user index k
  ComplexVector channel;  // h_{m,n}: column k of the beamspace matrix restricted to Gamma
};

struct BeamGrouping {
  std::vector<int> beams;                      // Gamma
  std::vector<std::vector<GroupedUser>> sets;  // S_n per slot, SIC order (first = strongest)

  int rf_chains() const { return static_cast<int>(beams.size()); }
  int user_count() const;
};

/// Per-user argmax of |beamspace|, lowest beam index on ties.
/// Throws DegenerateChannel naming the user if a column is all zero.
BeamAssignment select_beams(const BeamspaceChannel& beamspace);

/// Splits users into per-beam sets ordered by decreasing reduced-channel
/// norm (lower user index first on ties) and extracts the Gamma rows.
BeamGrouping group_users(const BeamAssignment& assignment, const BeamspaceChannel& beamspace);

struct BeamOrder {
  int slot = 0;
  std::vector<double> gains;     // |h_{m,n}^H w_n| in current order
  bool violated = false;         // some gain exceeds its predecessor
  std::vector<int> permutation;  // new position i takes current member permutation[i]
};

struct OrderReport {
  std::vector<BeamOrder> beams;

  int violations() const;
};

/// Checks that equivalent gains |h_{m,n}^H w_n| are non-increasing in m.
OrderReport verify_order(const BeamGrouping& grouping, const Precoder& precoder);

/// Reorders the violated beams of `grouping` per the report.
BeamGrouping apply_order(const BeamGrouping& grouping, const OrderReport& report);

}  // namespace bsnoma
