#pragma once

#include <cmath>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>

namespace peohoi {

// ---------------------------------------------------------------------------
// Errors. Validation-type errors map to CLI exit code 1, the rest to 2.
// ---------------------------------------------------------------------------

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DimError : Error { using Error::Error; };      // tensor shape disagreement
struct SchemaError : Error { using Error::Error; };   // malformed input file
struct ConfigError : Error { using Error::Error; };   // invalid configuration
struct UsageError : Error { using Error::Error; };    // API called out of order
struct IoError : Error { using Error::Error; };
struct NumericError : Error { using Error::Error; };  // non-finite values

inline bool is_validation_error(const std::exception& e) {
  return dynamic_cast<const DimError*>(&e) != nullptr ||
         dynamic_cast<const SchemaError*>(&e) != nullptr ||
         dynamic_cast<const ConfigError*>(&e) != nullptr ||
         dynamic_cast<const UsageError*>(&e) != nullptr;
}

template <typename... Args>
std::string strf(Args&&... args) {
  std::ostringstream os;
  (os << ... << args);
  return os.str();
}

// ---------------------------------------------------------------------------
// Deterministic seeding. All randomness flows from one root seed; sub-streams
// are derived by hashing a label, so adding a consumer never shifts another
// consumer's stream.
// ---------------------------------------------------------------------------

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline uint64_t fnv1a64(std::string_view s) {
  uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline uint64_t seed_for(uint64_t root, std::string_view label) {
  return splitmix64(root ^ fnv1a64(label));
}

// ---------------------------------------------------------------------------
// Rng: mt19937_64 with hand-rolled variate generation so that streams are
// identical across standard-library implementations.
// ---------------------------------------------------------------------------

class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed ? seed : 0x853c49e6748fea9bULL) {}

  uint64_t next() {
    // xorshift* keeps the state tiny and the sequence fully specified here.
    uint64_t x = state_;
    x ^= x >> 12;
    x ^= x << 25;
    x ^= x >> 27;
    state_ = x;
    return x * 0x2545f4914f6cdd1dULL;
  }

  // uniform in [0, 1)
  double uniform() { return double(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // uniform integer in [0, n)
  int uniform_int(int n) {
    if (n <= 0) throw UsageError("uniform_int: n must be positive");
    return int(uniform() * n) % n;
  }

  // standard normal, Box-Muller with caching
  double normal() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 1e-300) u1 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * 3.14159265358979323846 * u2;
    cached_ = r * std::sin(a);
    have_cached_ = true;
    return r * std::cos(a);
  }

  bool bernoulli(double p) { return uniform() < p; }

 private:
  uint64_t state_;
  bool have_cached_ = false;
  double cached_ = 0.0;
};

}  // namespace peohoi
