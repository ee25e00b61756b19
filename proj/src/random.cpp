#include "epy/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "epy/error.hpp"

namespace epy {

namespace {

std::mt19937_64 seeded_engine(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                    0x9e3779b9u};
  return std::mt19937_64(seq);
}

}  // namespace

Stream::Stream(std::uint64_t seed, std::uint64_t index) : engine_(seeded_engine(seed, index)) {}

double Stream::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

std::uint64_t Stream::below(std::uint64_t bound) {
  if (bound == 0) throw DomainError("Stream::below: bound must be positive");
  // Lemire's nearly-divisionless rejection method.
  unsigned __int128 m = static_cast<unsigned __int128>(engine_()) * bound;
  auto low = static_cast<std::uint64_t>(m);
  if (low < bound) {
    const std::uint64_t threshold = (0 - bound) % bound;
    while (low < threshold) {
      m = static_cast<unsigned __int128>(engine_()) * bound;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

double Stream::log_gamma(double shape) {
  if (!(shape > 0.0)) throw DomainError("Stream::log_gamma: shape must be positive");
  if (shape >= 1.0) {
    std::gamma_distribution<double> dist(shape, 1.0);
    return std::log(dist(engine_));
  }
  // G(a) = G(a + 1) * U^(1/a)
  std::gamma_distribution<double> dist(shape + 1.0, 1.0);
  const double g = dist(engine_);
  double u = uniform();
  while (u == 0.0) u = uniform();
  return std::log(g) + std::log(u) / shape;
}

double Stream::gamma(double shape) { return std::exp(log_gamma(shape)); }

double Stream::beta(double a, double b) {
  if (a < 0.0 || b < 0.0 || (a == 0.0 && b == 0.0))
    throw DomainError("Stream::beta: shapes must be nonnegative and not both zero");
  if (b == 0.0) return 1.0;
  if (a == 0.0) return 0.0;
  const double lx = log_gamma(a);
  const double ly = log_gamma(b);
  return 1.0 / (1.0 + std::exp(ly - lx));
}

std::vector<double> Stream::dirichlet(std::span<const double> params) {
  std::vector<double> logs(params.size(), -std::numeric_limits<double>::infinity());
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i] < 0.0) throw DomainError("Stream::dirichlet: negative parameter");
    if (params[i] > 0.0) {
      logs[i] = log_gamma(params[i]);
      top = std::max(top, logs[i]);
    }
  }
  if (top == -std::numeric_limits<double>::infinity())
    throw DomainError("Stream::dirichlet: all parameters are zero");
  std::vector<double> w(params.size(), 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i] > 0.0) {
      w[i] = std::exp(logs[i] - top);
      total += w[i];
    }
  }
  for (double& x : w) x /= total;
  return w;
}

}  // namespace epy
