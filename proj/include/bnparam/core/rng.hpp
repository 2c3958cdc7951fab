// Copyright 2026 The bnparam Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef BNPARAM_CORE_RNG_HPP
#define BNPARAM_CORE_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <span>

namespace bnp {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// 53-bit uniform in [0, 1).
inline double bits_to_unit(std::uint64_t bits) {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

/// Stateless uniform keyed on (seed, a, b). Used where a draw must depend on
/// its coordinates only, never on how many draws came before it.
inline double keyed_uniform(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ (a * 0xd1b54a32d192ed03ULL));
  h = splitmix64(h ^ (b * 0x8cb92ba72f3d8dd7ULL));
  return bits_to_unit(h);
}

/// Seeded generator. The distribution transforms are written out here rather
/// than taken from <random> so streams are identical across standard
/// libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

  double uniform() { return bits_to_unit(engine_()); }

  /// Standard exponential; a flat Dirichlet row is a normalized vector of
  /// these.
  double exponential() {
    double u;
    do {
      u = uniform();
    } while (u <= 0.0);
    return -std::log(u);
  }

  /// Index drawn from a discrete distribution given by `probs` (need not be
  /// exactly normalized).
  std::size_t categorical(std::span<const double> probs) {
    double total = 0.0;
    for (double p : probs) total += p;
    const double u = uniform() * total;
    double acc = 0.0;
    for (std::size_t k = 0; k < probs.size(); ++k) {
      acc += probs[k];
      if (u < acc) return k;
    }
    // Round-off fell past the last bucket: return the last positive entry.
    for (std::size_t k = probs.size(); k-- > 0;)
      if (probs[k] > 0.0) return k;
    return 0;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace bnp

#endif  // BNPARAM_CORE_RNG_HPP
