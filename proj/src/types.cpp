#include "kroncov/types.hpp"

#include <omp.h>

#include <algorithm>
#include <cstdlib>

namespace kroncov {

std::string SpatialGrid::to_string() const {
  std::string s;
  for (std::size_t i = 0; i < extents.size(); ++i) {
    if (i > 0) s += 'x';
    s += std::to_string(extents[i]);
  }
  return s;
}

int effective_threads() {
  static const int cached = [] {
    int n = omp_get_max_threads();
    if (const char* env = std::getenv("KRONCOV_THREADS")) {
      int cap = std::atoi(env);
      if (cap >= 1) n = std::min(n, cap);
    }
    return std::max(1, n);
  }();
  return cached;
}

}  // namespace kroncov
