#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>

namespace psgan {

// Deterministic random source. All sampling goes through the explicit
// methods below rather than std::*_distribution so that streams are
// reproducible and the full state round-trips through checkpoints.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : eng_(seed) {}

  std::uint64_t raw() { return eng_(); }

  // Uniform in [0,1) with 53 random bits.
  double uniform() {
    return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0,n).
  std::uint64_t uniform_int(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("Rng::uniform_int: n must be > 0");
    std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = eng_();
    } while (x >= limit);
    return x % n;
  }

  // Box-Muller without caching: exactly two raw draws per call.
  double normal(double mu, double sigma) {
    double u1 = uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log1p(-u1));  // u1 in [0,1) => 1-u1 in (0,1]
    return mu + sigma * r * std::cos(2.0 * M_PI * u2);
  }

  // Derive an independent child stream.
  Rng fork() { return Rng(eng_() ^ 0x9e3779b97f4a7c15ull); }

  std::string state() const {
    std::ostringstream os;
    os << eng_;
    return os.str();
  }

  void set_state(const std::string& s) {
    std::istringstream is(s);
    is >> eng_;
    if (is.fail()) throw std::invalid_argument("Rng::set_state: bad state string");
  }

  bool operator==(const Rng& other) const { return eng_ == other.eng_; }

 private:
  std::mt19937_64 eng_;
};

}  // namespace psgan
