#include "bsnoma/channel_model.hpp"

#include <cmath>
#include <cstring>
#include <numbers>
#include <string>

namespace bsnoma {

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t trial, std::uint64_t stream) noexcept {
  // splitmix64 finalizer applied over the three counters in turn
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  std::uint64_t s = mix(master);
  s = mix(s ^ trial);
  s = mix(s ^ (stream + 0x632be59bd9b4e019ULL));
  return s;
}

void ChannelParams::validate() const {
  if (antennas < 2) throw InvalidDimension("channel: antenna count must be >= 2");
  if (users < 1) throw InvalidDimension("channel: user count must be >= 1");
  if (nlos_paths < 0) throw std::invalid_argument("channel: NLoS path count must be >= 0");
  if (!(los_variance > 0.0)) throw std::invalid_argument("channel: LoS variance must be > 0");
  if (!(nlos_variance >= 0.0)) throw std::invalid_argument("channel: NLoS variance must be >= 0");
  if (!(direction_min < direction_max)) throw std::invalid_argument("channel: empty direction range");
}

ComplexVector steering_vector(double theta, int antennas) {
  if (antennas < 1) throw InvalidDimension("steering_vector: antenna count must be >= 1");
  const double scale = 1.0 / std::sqrt(static_cast<double>(antennas));
  const double centre = 0.5 * (antennas - 1);
  ComplexVector a(antennas);
  for (int i = 0; i < antennas; ++i) {
    const double phase = -2.0 * std::numbers::pi * theta * (i - centre);
    a[i] = std::polar(scale, phase);
  }
  return a;
}

ComplexVector reconstruct_channel(const std::vector<PathRecord>& paths, int antennas) {
  ComplexVector h = ComplexVector::Zero(antennas);
  for (const auto& path : paths) h += path.gain * steering_vector(path.direction, antennas);
  return h;
}

Complex sample_complex_gaussian(RandomStream& rng, double variance) {
  const double x = rng.standard_normal();
  const double y = rng.standard_normal();
  const double s = std::sqrt(variance / 2.0);
  return {s * x, s * y};
}

UserChannel sample_user_channel(const ChannelParams& params, RandomStream& rng) {
  params.validate();
  UserChannel user;
  user.paths.reserve(params.nlos_paths + 1);
  for (int l = 0; l <= params.nlos_paths; ++l) {
    const double variance = l == 0 ? params.los_variance : params.nlos_variance;
    PathRecord path;
    path.gain = sample_complex_gaussian(rng, variance);
    path.direction = rng.uniform(params.direction_min, params.direction_max);
    user.paths.push_back(path);
  }
  user.spatial = reconstruct_channel(user.paths, params.antennas);
  return user;
}

LensMatrix lens_transform_matrix(int antennas) {
  if (antennas < 2) throw InvalidDimension("lens_transform_matrix: antenna count must be >= 2");
  const int n = antennas;
  LensMatrix lens;
  lens.grid.resize(n);
  lens.transform.resize(n, n);
  for (int i = 0; i < n; ++i) lens.grid[i] = (i - 0.5 * (n - 1)) / n;

  // Entry (r, c) = conj(a(grid_r))[c] = exp(+j 2 pi grid_r m_c) / sqrt(N).
  // grid_r * m_c = (2r - N + 1)(2c - N + 1) / (4N): reduce the integer
  // numerator modulo 4N so the phase is exact before calling sin/cos.
  const long long period = 4LL * n;
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      long long num = static_cast<long long>(2 * r - n + 1) * (2 * c - n + 1);
      num %= period;
      if (num < 0) num += period;
      const double phase = 2.0 * std::numbers::pi * static_cast<double>(num) / static_cast<double>(period);
      lens.transform(r, c) = std::polar(scale, phase);
    }
  }
  return lens;
}

BeamspaceChannel to_beamspace(const ComplexMatrix& spatial, const LensMatrix& lens) {
  if (spatial.rows() != lens.transform.cols()) {
    throw InvalidDimension("to_beamspace: channel has " + std::to_string(spatial.rows()) +
                           " rows but lens is " + std::to_string(lens.transform.cols()) + " wide");
  }
  return BeamspaceChannel{lens.transform * spatial};
}

ChannelRealization draw_realization(const ChannelParams& params, const LensMatrix& lens,
                                    std::uint64_t master_seed, std::uint64_t trial) {
  params.validate();
  if (lens.size() != params.antennas) throw InvalidDimension("draw_realization: lens size mismatch");
  ChannelRealization out;
  out.users.reserve(params.users);
  out.spatial.resize(params.antennas, params.users);
  for (int k = 0; k < params.users; ++k) {
    RandomStream rng(derive_seed(master_seed, trial, static_cast<std::uint64_t>(k)));
    out.users.push_back(sample_user_channel(params, rng));
    out.spatial.col(k) = out.users.back().spatial;
  }
  out.beamspace = to_beamspace(out.spatial, lens);
  return out;
}

std::uint64_t ChannelRealization::fingerprint() const {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  const auto* bytes = reinterpret_cast<const unsigned char*>(spatial.data());
  const std::size_t count = static_cast<std::size_t>(spatial.size()) * sizeof(Complex);
  for (std::size_t i = 0; i < count; ++i) {
    hash ^= bytes[i];
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

}  // namespace bsnoma
