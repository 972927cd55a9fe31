#include "geoxplain/parallel.hpp"

#include <omp.h>

#include <algorithm>

namespace geoxplain::par {

namespace {
int g_max_threads = 0;
}

void set_max_threads(int n) {
  g_max_threads = std::max(0, n);
  if (g_max_threads > 0) {
    omp_set_num_threads(g_max_threads);
  }
}

int max_threads() {
  if (g_max_threads > 0) return g_max_threads;
  return omp_get_max_threads();
}

bool enabled() { return max_threads() > 1 && omp_in_parallel() == 0; }

}  // namespace geoxplain::par
