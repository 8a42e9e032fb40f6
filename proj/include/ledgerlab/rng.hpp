#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace ledgerlab {

/// Seeded generator with distribution helpers that produce the same stream
/// on every platform. The std:: distributions are implementation-defined, so
/// only the engine is taken from the standard library.
class Rng
{
public:
   explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

   /// Independent stream derived from (seed, stream id) via splitmix64.
   static Rng derive(std::uint64_t seed, std::uint64_t stream)
   {
      std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
      z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
      z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
      return Rng(z ^ (z >> 31));
   }

   std::uint64_t next_u64() { return engine_(); }

   /// Uniform integer in [0, bound). bound must be > 0.
   std::uint64_t below(std::uint64_t bound)
   {
      // Lemire-style rejection keeps the result unbiased.
      const std::uint64_t threshold = (0 - bound) % bound;
      for (;;) {
         const std::uint64_t r = engine_();
         if (r >= threshold)
            return r % bound;
      }
   }

   /// Uniform double in [0, 1) with 53 bits of precision.
   double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

   bool bernoulli(double p) { return uniform01() < p; }

   /// Exponential variate with the given mean.
   double exponential(double mean) { return -mean * std::log1p(-uniform01()); }

private:
   std::mt19937_64 engine_;
};

} // namespace ledgerlab
