// SPDX-License-Identifier: Apache-2.0
//
// ctxcsi: context-conditioned channel statistics prediction and AP selection
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#ifndef CTXCSI_RNG_HPP
#define CTXCSI_RNG_HPP

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>

namespace ctxcsi {

// Seeded random stream with bit-level double extraction. The mt19937_64
// output sequence is fixed by the C++ standard and the conversions below
// avoid std::*_distribution, so a given seed reproduces the same values on
// every conforming platform.
class Rng {
  public:
    explicit Rng(uint64_t seed) : eng_(seed) {}

    uint64_t next_u64() { return eng_(); }

    // uniform in [0, 1)
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // standard normal, Box-Muller with two fresh uniforms per call
    double normal() {
        double u1 = (static_cast<double>(eng_() >> 11) + 1.0) * 0x1.0p-53; // (0, 1]
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    // circularly-symmetric complex normal with E|x|^2 = 1
    std::complex<double> cnormal() {
        double re = normal();
        double im = normal();
        return {re * 0.7071067811865476, im * 0.7071067811865476};
    }

    // Independent substream id from (seed, stream, substream), splitmix64 mixing.
    static uint64_t derive(uint64_t seed, uint64_t stream, uint64_t substream = 0) {
        uint64_t x = splitmix64(seed);
        x = splitmix64(x ^ splitmix64(stream ^ 0x9e3779b97f4a7c15ULL));
        x = splitmix64(x ^ splitmix64(substream ^ 0xbf58476d1ce4e5b9ULL));
        return x;
    }

  private:
    static uint64_t splitmix64(uint64_t x) {
        x += 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

    std::mt19937_64 eng_;
};

} // namespace ctxcsi

#endif
