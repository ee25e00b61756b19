#pragma once

#include <cmath>

namespace epy::detail {

// Reentrant log-Gamma for positive arguments (std::lgamma writes signgam).
inline double lgamma_pos(double x) {
  int sign = 0;
  return ::lgamma_r(x, &sign);
}

}  // namespace epy::detail
