#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace epy {

// A random stream identified by (seed, index). Streams with different indices
// are independent for all practical purposes; each stream also owns a monotone
// counter used to mint fresh labels, so labels never repeat within a stream.
class Stream {
 public:
  explicit Stream(std::uint64_t seed, std::uint64_t index = 0);

  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  // Uniform integer in [0, bound); bound must be positive.
  std::uint64_t below(std::uint64_t bound);

  // log of a Gamma(shape, 1) variate. Stable for arbitrarily small shapes,
  // where the variate itself underflows.
  double log_gamma(double shape);
  double gamma(double shape);
  // Beta(a, b). A zero shape gives the degenerate limit (b == 0 -> 1, a == 0 -> 0).
  double beta(double a, double b);
  // Dirichlet with possibly-zero parameters; zero parameters get weight exactly 0.
  std::vector<double> dirichlet(std::span<const double> params);

  std::uint64_t next_label() { return ++label_counter_; }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::uint64_t label_counter_ = 0;
};

}  // namespace epy
