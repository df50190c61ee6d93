#pragma once

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace gcl {

// Training allocates and frees many same-sized n×n temporaries per step.
// Keeping them on the heap instead of fresh mmap regions avoids a page-fault
// storm on every allocation. No-op outside glibc.
inline void prefer_heap_reuse() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
  mallopt(M_TOP_PAD, 64 << 20);
#endif
}

}  // namespace gcl
