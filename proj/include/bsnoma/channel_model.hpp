#pragma once

#include <cstdint>
#include <vector>

#include "bsnoma/random.hpp"
#include "bsnoma/types.hpp"

namespace bsnoma {

// Saleh-Valenzuela channels for an N-element ULA, expressed directly in
// spatial directions theta = (d / wavelength) sin(phi) with d = wavelength / 2,
// so theta lives in [-1/2, 1/2] and the DFT grid below is orthonormal.

struct ChannelParams {
  int antennas = 256;        // N
  int users = 32;            // K
  int nlos_paths = 2;        // L
  double los_variance = 1.0;
  double nlos_variance = 0.1;
  double direction_min = -0.5;
  double direction_max = 0.5;

  /// Throws InvalidDimension / std::invalid_argument on bad values.
  void validate() const;
};

struct PathRecord {
  Complex gain;      // beta
  double direction;  // theta
};

struct UserChannel {
  ComplexVector spatial;          // h_k, length N
  std::vector<PathRecord> paths;  // LoS first, then the L NLoS paths
};

struct LensMatrix {
  ComplexMatrix transform;     // U, N x N; row n is a(grid[n])^H
  std::vector<double> grid;    // predefined directions, ascending

  int size() const { return static_cast<int>(grid.size()); }
};

struct BeamspaceChannel {
  ComplexMatrix matrix;  // N x K, column k = U h_k

  int beams() const { return static_cast<int>(matrix.rows()); }
  int users() const { return static_cast<int>(matrix.cols()); }
};

struct ChannelRealization {
  std::vector<UserChannel> users;
  ComplexMatrix spatial;  // N x K
  BeamspaceChannel beamspace;

  /// FNV-1a over the raw bytes of the spatial matrix.
  std::uint64_t fingerprint() const;
};

/// Array response with the symmetric index set {i - (N-1)/2}, unit norm.
ComplexVector steering_vector(double theta, int antennas);

/// Sums beta * a(theta) over the stored paths.
ComplexVector reconstruct_channel(const std::vector<PathRecord>& paths, int antennas);

/// Circularly-symmetric CN(0, variance): (x + jy) / sqrt(2) * sqrt(variance).
Complex sample_complex_gaussian(RandomStream& rng, double variance);

UserChannel sample_user_channel(const ChannelParams& params, RandomStream& rng);

LensMatrix lens_transform_matrix(int antennas);

BeamspaceChannel to_beamspace(const ComplexMatrix& spatial, const LensMatrix& lens);

/// One full realization for all K users. User k draws from
/// derive_seed(master, trial, k), so the first K' users of a K-user draw are
/// identical to a K'-user draw on the same (master, trial).
ChannelRealization draw_realization(const ChannelParams& params, const LensMatrix& lens,
                                    std::uint64_t master_seed, std::uint64_t trial);

}  // namespace bsnoma
