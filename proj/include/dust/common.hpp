#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>

namespace dust {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Absolute margin used for all open-interval membership checks on statistic
// and parameter domains.
inline constexpr double kDomainEps = 1e-12;

// A candidate is dropped only when its dual bound clears Q_t + beta by this
// much, so ties (worst-case inputs) always survive.
inline constexpr double kPruneSlack = 1e-10;

//======================================================================
// error taxonomy
//======================================================================

struct Error : std::runtime_error {
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// value outside an open statistic or parameter domain
struct DomainError : Error { using Error::Error; };
// segment cost has no finite minimiser (boundary mean with diverging limit)
struct DegenerateSegment : Error { using Error::Error; };
struct EmptySegment : Error { using Error::Error; };
struct IndexError : Error { using Error::Error; };
// read past the filled Q watermark, or write out of order
struct StateError : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };
struct SingularSystem : Error { using Error::Error; };
struct TieBreakUnsupported : Error { using Error::Error; };
struct InfeasiblePenalty : Error { using Error::Error; };
struct SolveError : Error { using Error::Error; };
struct CorruptState : Error { using Error::Error; };

//======================================================================
// intervals
//======================================================================

// Open interval; +-inf endpoints mean unbounded.
struct Interval {
  double lo = -kInf;
  double hi = kInf;

  bool contains_strict(double x, double eps = kDomainEps) const {
    return x > lo + eps && x < hi - eps;
  }
  bool contains_closure(double x, double eps = kDomainEps) const {
    return x >= lo - eps && x <= hi + eps;
  }
};

//======================================================================
// rng
//======================================================================

// Seedable 64-bit generator. All distribution transforms in this library are
// written out explicitly (inverse CDF for the discrete families, Box-Muller
// for normals), so a fixed seed reproduces the same stream on any build.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // uniform on [0, 1)
  double u01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  // uniform on [lo, hi)
  double uniform(double lo, double hi) { return lo + (hi - lo) * u01(); }

 private:
  std::mt19937_64 gen_;
};

// Cheap stateless mixer for deriving per-run seeds from (base seed, index).
inline std::uint64_t mix_seed(std::uint64_t base, std::uint64_t index) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace dust
