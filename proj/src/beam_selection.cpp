#include "bsnoma/beam_selection.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "bsnoma/precoding.hpp"

namespace bsnoma {

int BeamAssignment::slot_of(int beam) const {
  const auto it = std::lower_bound(selected.begin(), selected.end(), beam);
  if (it == selected.end() || *it != beam) return -1;
  return static_cast<int>(it - selected.begin());
}

BeamAssignment make_assignment(std::vector<int> user_beam) {
  BeamAssignment out;
  out.selected = user_beam;
  std::sort(out.selected.begin(), out.selected.end());
  out.selected.erase(std::unique(out.selected.begin(), out.selected.end()), out.selected.end());
  out.user_beam = std::move(user_beam);
  return out;
}

int BeamGrouping::user_count() const {
  int total = 0;
  for (const auto& set : sets) total += static_cast<int>(set.size());
  return total;
}

BeamAssignment select_beams(const BeamspaceChannel& beamspace) {
  const auto& h = beamspace.matrix;
  if (h.rows() == 0 || h.cols() == 0) throw InvalidDimension("select_beams: empty beamspace channel");
  std::vector<int> user_beam(h.cols());
  for (Eigen::Index k = 0; k < h.cols(); ++k) {
    int best = -1;
    double best_mag = 0.0;
    for (Eigen::Index n = 0; n < h.rows(); ++n) {
      const double mag = std::abs(h(n, k));
      if (mag > best_mag) {
        best_mag = mag;
        best = static_cast<int>(n);
      }
    }
    if (best < 0) throw DegenerateChannel("select_beams: user " + std::to_string(k) + " has an all-zero beamspace channel");
    user_beam[k] = best;
  }
  return make_assignment(std::move(user_beam));
}

BeamGrouping group_users(const BeamAssignment& assignment, const BeamspaceChannel& beamspace) {
  const auto& h = beamspace.matrix;
  if (assignment.user_count() != h.cols()) throw InvalidDimension("group_users: assignment/user count mismatch");

  BeamGrouping out;
  out.beams = assignment.selected;
  out.sets.resize(out.beams.size());
  const int n_rf = assignment.rf_chains();

  for (int k = 0; k < assignment.user_count(); ++k) {
    const int slot = assignment.slot_of(assignment.user_beam[k]);
    if (slot < 0) throw InvalidGrouping("group_users: user beam missing from the selected set");
    GroupedUser gu;
    gu.user = k;
    gu.channel.resize(n_rf);
    for (int r = 0; r < n_rf; ++r) gu.channel[r] = h(out.beams[r], k);
    out.sets[slot].push_back(std::move(gu));
  }
  for (auto& set : out.sets) {
    // users were appended in index order, so stable_sort keeps lower index first on ties
    std::stable_sort(set.begin(), set.end(), [](const GroupedUser& a, const GroupedUser& b) {
      return a.channel.squaredNorm() > b.channel.squaredNorm();
    });
  }
  return out;
}

int OrderReport::violations() const {
  return static_cast<int>(std::count_if(beams.begin(), beams.end(), [](const BeamOrder& b) { return b.violated; }));
}

OrderReport verify_order(const BeamGrouping& grouping, const Precoder& precoder) {
  const auto& w = precoder.weights;
  if (w.cols() != grouping.rf_chains()) throw InvalidDimension("verify_order: precoder/grouping size mismatch");
  OrderReport report;
  report.beams.reserve(grouping.sets.size());
  for (int n = 0; n < grouping.rf_chains(); ++n) {
    BeamOrder order;
    order.slot = n;
    for (const auto& member : grouping.sets[n]) order.gains.push_back(std::abs(member.channel.dot(w.col(n))));
    for (std::size_t m = 1; m < order.gains.size(); ++m) {
      if (order.gains[m] > order.gains[m - 1]) order.violated = true;
    }
    order.permutation.resize(order.gains.size());
    std::iota(order.permutation.begin(), order.permutation.end(), 0);
    std::stable_sort(order.permutation.begin(), order.permutation.end(),
                     [&](int a, int b) { return order.gains[a] > order.gains[b]; });
    report.beams.push_back(std::move(order));
  }
  return report;
}

BeamGrouping apply_order(const BeamGrouping& grouping, const OrderReport& report) {
  BeamGrouping out = grouping;
  for (const auto& order : report.beams) {
    if (!order.violated) continue;
    const auto& current = grouping.sets.at(order.slot);
    auto& target = out.sets.at(order.slot);
    for (std::size_t i = 0; i < order.permutation.size(); ++i) target[i] = current[order.permutation[i]];
  }
  return out;
}

}  // namespace bsnoma
