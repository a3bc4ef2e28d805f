#pragma once

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace radargest {

// Training allocates and frees many multi-megabyte buffers per step. Keeping
// them on the heap instead of fresh mmap pages avoids repeated page faults.
inline void tune_allocator() {
#if defined(__GLIBC__)
  static const bool done = [] {
    mallopt(M_MMAP_THRESHOLD, 256 << 20);
    mallopt(M_TRIM_THRESHOLD, 1 << 30);
    mallopt(M_TOP_PAD, 64 << 20);
    return true;
  }();
  (void)done;
#endif
}

}  // namespace radargest
