#include "bsnoma/precoding.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "bsnoma/random.hpp"

namespace bsnoma {

namespace {

constexpr double kPowerTolerance = 1e-12;
constexpr int kPowerIterationCap = 10000;

void fix_phase(ComplexVector& v) {
  Eigen::Index idx = 0;
  v.cwiseAbs().maxCoeff(&idx);
  const double mag = std::abs(v[idx]);
  if (mag > 0.0) v *= std::conj(v[idx]) / mag;
}

struct PowerRun {
  ComplexVector vector;
  int iterations = 0;
  bool converged = false;
};

PowerRun power_iterate(const ComplexMatrix& gram, ComplexVector v, int budget) {
  PowerRun run;
  for (int it = 1; it <= budget; ++it) {
    ComplexVector next = gram * v;
    const double norm = next.norm();
    run.iterations = it;
    if (norm == 0.0) {
      run.vector = v;
      return run;  // start vector orthogonal to the range
    }
    next /= norm;
    fix_phase(next);
    const double change = (next - v).norm();
    v = std::move(next);
    if (change <= kPowerTolerance) {
      run.converged = true;
      break;
    }
  }
  run.vector = std::move(v);
  return run;
}

}  // namespace

std::string_view to_string(EquivalentKind kind) {
  return kind == EquivalentKind::strongest ? "strongest" : "svd";
}

EquivalentKind parse_equivalent_kind(std::string_view text) {
  if (text == "strongest") return EquivalentKind::strongest;
  if (text == "svd") return EquivalentKind::svd;
  throw std::invalid_argument("unknown equivalent-channel variant '" + std::string(text) + "'");
}

EquivalentChannel equivalent_channel_strongest(const BeamGrouping& grouping) {
  const int n_rf = grouping.rf_chains();
  EquivalentChannel out{ComplexMatrix(n_rf, n_rf), EquivalentKind::strongest};
  for (int n = 0; n < n_rf; ++n) {
    if (grouping.sets[n].empty()) throw InvalidGrouping("equivalent channel: beam slot " + std::to_string(n) + " has no users");
    out.matrix.col(n) = grouping.sets[n].front().channel;
  }
  return out;
}

SingularPair top_left_singular_vector(const ComplexMatrix& m) {
  if (m.size() == 0) throw InvalidDimension("top_left_singular_vector: empty matrix");
  const double scale = m.cwiseAbs().maxCoeff();
  if (scale == 0.0) throw DegenerateChannel("top_left_singular_vector: zero matrix");

  // work on a rescaled copy so tiny channels do not underflow the tolerance
  const ComplexMatrix gram = (m / scale) * (m / scale).adjoint();
  const Eigen::Index rows = gram.rows();

  ComplexVector start = ComplexVector::Constant(rows, Complex(1.0 / std::sqrt(static_cast<double>(rows)), 0.0));
  PowerRun run = power_iterate(gram, start, kPowerIterationCap);

  const auto rayleigh = [&](const ComplexVector& v) { return std::real(v.dot(gram * v)); };
  const auto residual = [&](const ComplexVector& v) { return (gram * v - rayleigh(v) * v).norm(); };

  if (!run.converged || residual(run.vector) > 1e-8 * std::max(rayleigh(run.vector), 1e-300)) {
    RandomStream rng(derive_seed(0x5eedULL, static_cast<std::uint64_t>(rows), static_cast<std::uint64_t>(m.cols())));
    ComplexVector restart(rows);
    for (Eigen::Index i = 0; i < rows; ++i) restart[i] = Complex(rng.standard_normal(), rng.standard_normal());
    restart.normalize();
    PowerRun second = power_iterate(gram, restart, kPowerIterationCap);
    second.iterations += run.iterations;
    if (rayleigh(second.vector) >= rayleigh(run.vector)) run = std::move(second);
    else run.iterations = second.iterations;
  }

  SingularPair out;
  out.vector = run.vector / run.vector.norm();
  fix_phase(out.vector);
  out.value = scale * std::sqrt(std::max(rayleigh(out.vector), 0.0));
  out.iterations = run.iterations;
  return out;
}

EquivalentChannel equivalent_channel_svd(const BeamGrouping& grouping) {
  const int n_rf = grouping.rf_chains();
  EquivalentChannel out{ComplexMatrix(n_rf, n_rf), EquivalentKind::svd};
  for (int n = 0; n < n_rf; ++n) {
    const auto& set = grouping.sets[n];
    if (set.empty()) throw InvalidGrouping("equivalent channel: beam slot " + std::to_string(n) + " has no users");
    ComplexMatrix stacked(n_rf, static_cast<Eigen::Index>(set.size()));  // H_n
    for (std::size_t m = 0; m < set.size(); ++m) stacked.col(m) = set[m].channel;
    const SingularPair top = top_left_singular_vector(stacked.transpose());
    out.matrix.col(n) = stacked * top.vector.conjugate();
  }
  return out;
}

EquivalentChannel equivalent_channel(const BeamGrouping& grouping, EquivalentKind kind) {
  return kind == EquivalentKind::strongest ? equivalent_channel_strongest(grouping) : equivalent_channel_svd(grouping);
}

Precoder zf_precoder(const EquivalentChannel& equivalent) {
  const ComplexMatrix& h = equivalent.matrix;
  if (h.rows() == 0 || h.rows() != h.cols()) throw InvalidDimension("zf_precoder: equivalent channel must be square and non-empty");

  const Eigen::JacobiSVD<ComplexMatrix> svd(h);
  const auto& s = svd.singularValues();
  const double smax = s[0];
  const double smin = s[s.size() - 1];
  const double condition = smin > 0.0 ? smax / smin : std::numeric_limits<double>::infinity();
  if (!(condition * condition <= kMaxGramCondition)) {
    throw PrecodingFailure("zf_precoder: equivalent channel is ill-conditioned (cond(H^H H) = " +
                               std::to_string(condition * condition) + ")",
                           condition * condition);
  }

  const Eigen::Index n = h.rows();
  const ComplexMatrix gram_t = h.adjoint();
  const Eigen::PartialPivLU<ComplexMatrix> lu(gram_t);
  const ComplexMatrix identity = ComplexMatrix::Identity(n, n);
  ComplexMatrix w = lu.solve(identity);
  w += lu.solve(identity - gram_t * w);

  const double leakage = (gram_t * w - identity).cwiseAbs().maxCoeff();
  if (!(leakage <= 1e-8)) {
    throw PrecodingFailure("zf_precoder: H^H W deviates from identity by " + std::to_string(leakage), condition * condition);
  }

  Precoder out;
  out.weights = w;
  for (Eigen::Index c = 0; c < n; ++c) out.weights.col(c) /= w.col(c).norm();
  out.source = equivalent;
  out.condition = condition;
  return out;
}

}  // namespace bsnoma
