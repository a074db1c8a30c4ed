#pragma once

#include "facefit/grids.hpp"
#include "facefit/rng.hpp"

namespace facefit {

// Multi-octave value noise on a square grid, zero-mean-ish, in [-amp, amp].
// base_lattice sets the coarsest octave's frequency.
inline ScalarGrid value_noise_grid(int n, Rng rng, int octaves = 4, Real amplitude = 1.0,
                                   int base_lattice = 4) {
  ScalarGrid out(n, 0.0);
  Real amp = amplitude * 0.5;
  int lattice = base_lattice;
  for (int o = 0; o < octaves; ++o) {
    ScalarGrid coarse(lattice + 1);
    for (Index i = 0; i < coarse.texels(); ++i) coarse.data()[i] = rng.uniform(-1.0, 1.0);
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x) {
        const Real u = (x + 0.5) / n, v = (y + 0.5) / n;
        out.at(x, y) += amp * coarse.sample(u, v);
      }
    amp *= 0.5;
    lattice *= 2;
  }
  return out;
}

inline ColorGrid value_noise_colorgrid(int n, Rng rng, int octaves = 4, Real amplitude = 1.0,
                                       int base_lattice = 4) {
  ColorGrid out(n);
  for (int c = 0; c < 3; ++c) {
    const ScalarGrid ch = value_noise_grid(n, rng.stream("channel", std::uint64_t(c)), octaves,
                                           amplitude, base_lattice);
    out.data().col(c) = ch.data();
  }
  return out;
}

}  // namespace facefit
