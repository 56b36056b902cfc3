#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace mftg {

// splitmix64, used to derive independent stream seeds from one master seed.
inline std::uint64_t split_seed(std::uint64_t master, std::uint64_t stream) {
  std::uint64_t z = master + 0x9E3779B97F4A7C15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// mt19937_64 with hand-rolled variate transforms. The standard distribution
// templates are implementation defined, these are not.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), gen_(seed) {}

  std::uint64_t bits() { return gen_(); }

  // uniform on [0, 1)
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // uniform on {0, ..., n-1}
  std::size_t index(std::size_t n) {
    return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n;
  }

  double exponential(double rate) { return -std::log1p(-uniform()) / rate; }

  // Dirichlet(1,...,1): normalized unit exponentials.
  std::vector<double> simplex_point(std::size_t n) {
    std::vector<double> w(n);
    double total = 0.0;
    for (auto& x : w) {
      x = -std::log1p(-uniform());
      total += x;
    }
    for (auto& x : w) x /= total;
    return w;
  }

  // Child stream independent of how much this generator has been consumed.
  Rng fork(std::uint64_t stream) const { return Rng(split_seed(seed_, stream)); }

 private:
  std::uint64_t seed_;
  std::mt19937_64 gen_;
};

}  // namespace mftg
