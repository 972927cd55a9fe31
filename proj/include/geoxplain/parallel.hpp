#pragma once

namespace geoxplain::par {

// 0 restores the hardware default.
void set_max_threads(int n);
int max_threads();

// True when a parallel region would actually help: more than one thread
// configured and we are not already inside an OpenMP region (per-image
// fan-out owns the threads; nested kernels then run serially).
bool enabled();

}  // namespace geoxplain::par
