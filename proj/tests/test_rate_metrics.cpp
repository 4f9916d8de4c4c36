#include <doctest.h>

#include <cmath>

#include "bsnoma/channel_model.hpp"
#include "bsnoma/harness.hpp"
#include "bsnoma/rate_metrics.hpp"

using namespace bsnoma;

namespace {

// beam 0: users 0 (strong), 1 (weak); beam 1: user 2
EffectiveGains two_beam_three_user() {
  ComplexMatrix c(3, 2);
  c << 2.0, 0.5, 1.0, 0.3, 0.2, 1.5;
  return EffectiveGains({{0, 0, 0}, {0, 1, 1}, {1, 0, 2}}, c);
}

struct RandomInstance {
  BeamGrouping grouping;
  Precoder precoder;
};

RandomInstance random_instance(RandomStream& rng, const std::vector<int>& sizes) {
  RandomInstance r;
  const int nrf = static_cast<int>(sizes.size());
  int user = 0;
  for (int n = 0; n < nrf; ++n) {
    r.grouping.beams.push_back(n);
    r.grouping.sets.emplace_back();
    for (int m = 0; m < sizes[n]; ++m) {
      ComplexVector h(nrf);
      for (auto& x : h) x = sample_complex_gaussian(rng, 1.0);
      r.grouping.sets[n].push_back({user++, h});
    }
  }
  r.precoder.weights = ComplexMatrix(nrf, nrf);
  for (int n = 0; n < nrf; ++n) {
    for (int i = 0; i < nrf; ++i) r.precoder.weights(i, n) = sample_complex_gaussian(rng, 1.0);
    r.precoder.weights.col(n).normalize();
  }
  return r;
}

// Rates straight from h and w: the signal of user m in beam n, minus the
// stronger users it cannot cancel, minus everything from other beams.
std::vector<double> reference_rates(const RandomInstance& r, const std::vector<std::vector<double>>& p, double noise) {
  const auto& sets = r.grouping.sets;
  const ComplexMatrix& w = r.precoder.weights;
  std::vector<double> out;
  for (std::size_t n = 0; n < sets.size(); ++n) {
    for (std::size_t m = 0; m < sets[n].size(); ++m) {
      const ComplexVector& h = sets[n][m].channel;
      const double own = std::norm(h.dot(w.col(n)));
      double denom = noise;
      for (std::size_t i = 0; i < m; ++i) denom += own * p[n][i];
      for (std::size_t j = 0; j < sets.size(); ++j) {
        if (j == n) continue;
        const double cross = std::norm(h.dot(w.col(j)));
        for (double pj : p[j]) denom += cross * pj;
      }
      out.push_back(std::log2(1.0 + own * p[n][m] / denom));
    }
  }
  return out;
}

}  // namespace

TEST_CASE("link budget") {
  CHECK(LinkBudget::from_snr(32.0, 10.0).noise_variance == doctest::Approx(3.2).epsilon(1e-14));
  CHECK(LinkBudget::from_snr(32.0, 0.0).noise_variance == doctest::Approx(32.0).epsilon(1e-14));
  CHECK(LinkBudget::from_snr(32.0, 10.0, 32).noise_variance == doctest::Approx(0.1).epsilon(1e-14));
  CHECK(LinkBudget::from_snr(32.0, 20.0, 16).noise_variance == doctest::Approx(0.02).epsilon(1e-14));
  CHECK_THROWS_AS(LinkBudget::from_snr(32.0, 10.0, 0), std::invalid_argument);
  CHECK_THROWS(LinkBudget::from_snr(0.0, 10.0));
  LinkBudget b;
  b.noise_variance = 0.0;
  CHECK_THROWS(b.validate());
}

TEST_CASE("interference term") {
  SUBCASE("single user is noise only") {
    ComplexMatrix c(1, 1);
    c << Complex(0.7, -0.2);
    const EffectiveGains g({{0, 0, 0}}, c);
    RealVector p(1);
    p << 5.0;
    CHECK(interference_term(0, g, p, 0.3) == doctest::Approx(0.3));
    CHECK(sinr(0, g, p, 0.3) == doctest::Approx(std::norm(c(0, 0)) * 5.0 / 0.3));
  }
  SUBCASE("hand-expanded two beams, three users") {
    const EffectiveGains g = two_beam_three_user();
    RealVector p(3);
    p << 1.0, 2.0, 3.0;
    // user 0: other beam 0.5^2 * 3
    CHECK(interference_term(0, g, p, 0.1) == doctest::Approx(0.85).epsilon(1e-14));
    // user 1: stronger user 1^2 * 1, other beam 0.3^2 * 3
    CHECK(interference_term(1, g, p, 0.1) == doctest::Approx(1.37).epsilon(1e-14));
    // user 2: beam 0 carries 1 + 2
    CHECK(interference_term(2, g, p, 0.1) == doctest::Approx(0.22).epsilon(1e-14));
    CHECK(sinr(1, g, p, 0.1) == doctest::Approx(2.0 / 1.37).epsilon(1e-14));
  }
  SUBCASE("first user under zero-forcing sees noise only") {
    ComplexMatrix c(3, 2);
    c << 1.3, 0.0, 0.4, 0.2, 0.0, 0.9;
    const EffectiveGains g({{0, 0, 0}, {0, 1, 1}, {1, 0, 2}}, c);
    RealVector p(3);
    p << 1.0, 2.0, 3.0;
    CHECK(interference_term(0, g, p, 0.5) == 0.5);
    CHECK(interference_term(2, g, p, 0.5) == 0.5);
  }
}

TEST_CASE("sinr") {
  const EffectiveGains g = two_beam_three_user();
  RealVector p(3);
  p << 1.0, 0.0, 3.0;
  CHECK(sinr(1, g, p, 0.1) == 0.0);

  // own power doubles, nothing else changes: gamma doubles
  ComplexMatrix c(2, 2);
  c << 1.5, 0.0, 0.0, 0.8;
  const EffectiveGains iso({{0, 0, 0}, {1, 0, 1}}, c);
  RealVector q(2);
  q << 1.0, 2.0;
  const double before = sinr(0, iso, q, 0.4);
  CHECK(sinr(0, iso, 2.0 * q, 0.4) == doctest::Approx(2.0 * before).epsilon(1e-14));
}

TEST_CASE("sum rate") {
  SUBCASE("K=1 at gamma=1") {
    ComplexMatrix c(1, 1);
    c << 1.0;
    const EffectiveGains g({{0, 0, 0}}, c);
    LinkBudget b;
    b.noise_variance = 2.0;
    RealVector p(1);
    p << 2.0;
    const RateReport r = sum_rate(g, p, b);
    CHECK(r.sum_rate == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(r.rf_chains == 1);
  }
  SUBCASE("zero power") {
    const EffectiveGains g = two_beam_three_user();
    LinkBudget b;
    CHECK(sum_rate(g, RealVector::Zero(3), b).sum_rate == 0.0);
  }
  SUBCASE("random instances against a direct computation from h and w") {
    RandomStream rng(41);
    for (int trial = 0; trial < 100; ++trial) {
      const RandomInstance r = random_instance(rng, {3, 1, 2});
      const EffectiveGains g(r.grouping, r.precoder);
      std::vector<std::vector<double>> p(3);
      RealVector flat(6);
      int k = 0;
      for (int n = 0; n < 3; ++n)
        for (std::size_t m = 0; m < r.grouping.sets[n].size(); ++m) {
          p[n].push_back(rng.uniform(0.0, 4.0));
          flat[k++] = p[n].back();
        }
      LinkBudget b;
      b.noise_variance = rng.uniform(0.05, 2.0);
      const RateReport rep = sum_rate(g, flat, b);
      const std::vector<double> ref = reference_rates(r, p, b.noise_variance);
      double total = 0.0;
      for (int i = 0; i < 6; ++i) {
        CHECK(std::abs(rep.rate[i] - ref[i]) < 1e-12);
        CHECK(rep.rate[i] == doctest::Approx(std::log2(1.0 + rep.sinr[i])).epsilon(1e-14));
        CHECK(rep.sinr[i] >= 0.0);
        total += ref[i];
      }
      CHECK(std::abs(rep.sum_rate - total) < 1e-11);
      CHECK(rep.rf_chains == 3);
    }
  }
}

TEST_CASE("SIC never hurts") {
  RandomStream rng(43);
  for (int trial = 0; trial < 100; ++trial) {
    const RandomInstance r = random_instance(rng, {3, 2});
    const EffectiveGains g(r.grouping, r.precoder);
    RealVector p(5);
    for (auto& x : p) x = rng.uniform(0.0, 3.0);
    const double noise = 0.2;
    for (int k = 0; k < 5; ++k) {
      double weaker = 0.0;
      for (int i : g.members(g.slot(k).beam))
        if (g.slot(i).rank > g.slot(k).rank) weaker += p[i];
      const double without_sic = interference_term(k, g, p, noise) + g.own_gain(k) * weaker;
      CHECK(sinr(k, g, p, noise) >= g.own_gain(k) * p[k] / without_sic);
    }
  }
}

TEST_CASE("more noise lowers every positive sinr") {
  RandomStream rng(47);
  const RandomInstance r = random_instance(rng, {2, 2, 1});
  const EffectiveGains g(r.grouping, r.precoder);
  RealVector p(5);
  p << 1.0, 2.0, 0.5, 0.0, 3.0;
  for (int k = 0; k < 5; ++k) {
    const double lo = sinr(k, g, p, 0.1), hi = sinr(k, g, p, 0.2);
    if (p[k] > 0.0)
      CHECK(hi < lo);
    else
      CHECK(hi == 0.0);
    CHECK(std::isfinite(lo));
  }
}

TEST_CASE("scaling P at fixed SNR leaves sinr unchanged") {
  RandomStream rng(53);
  const RandomInstance r = random_instance(rng, {2, 1, 2});
  const EffectiveGains g(r.grouping, r.precoder);
  for (int users : {1, 5}) {
    const LinkBudget b1 = LinkBudget::from_snr(32.0, 15.0, users);
    const LinkBudget b2 = LinkBudget::from_snr(64.0, 15.0, users);
    const RealVector p = g.equal_powers(32.0);
    const RateReport r1 = sum_rate(g, p, b1), r2 = sum_rate(g, 2.0 * p, b2);
    for (int k = 0; k < 5; ++k) CHECK(r1.sinr[k] == doctest::Approx(r2.sinr[k]).epsilon(1e-12));
  }
}

TEST_CASE("energy efficiency") {
  const LinkBudget b = LinkBudget::from_snr(32.0, 10.0);
  const PowerModel m;
  // 0.032 + 32 * 0.305 + 0.2 = 9.992 W
  CHECK(energy_efficiency(100.0, 32, b, m) == doctest::Approx(100.0 / 9.992).epsilon(1e-13));
  CHECK(energy_efficiency(100.0, 32, b, m) == doctest::Approx(10.008).epsilon(1e-4));
  // 0.032 + 256 * 0.305 + 0.2 = 78.312 W
  CHECK(energy_efficiency(100.0, 256, b, m) == doctest::Approx(100.0 / 78.312).epsilon(1e-13));
  CHECK(energy_efficiency(0.0, 32, b, m) == 0.0);
}

TEST_CASE("equal powers and beam power") {
  const EffectiveGains g = two_beam_three_user();
  const RealVector eq = g.equal_powers(32.0);
  for (double x : eq) CHECK(x == doctest::Approx(32.0 / 3.0));
  RealVector p(3);
  p << 1.0, 2.0, 3.0;
  const RealVector bp = g.beam_power(p);
  CHECK(bp[0] == 3.0);
  CHECK(bp[1] == 3.0);
  CHECK(g.members(0) == std::vector<int>{0, 1});
  CHECK_THROWS_AS(EffectiveGains({{0, 1, 0}}, ComplexMatrix::Ones(1, 1)), InvalidGrouping);
  CHECK_THROWS_AS(EffectiveGains({{2, 0, 0}}, ComplexMatrix::Ones(1, 1)), InvalidDimension);
}
