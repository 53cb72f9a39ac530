#pragma once

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace swat {

/// The theorem-2 networks allocate dense temporaries of tens of MB per
/// forward pass. With glibc defaults each one is mmap'ed and unmapped
/// again, and the page faults cost as much as the arithmetic. Keeping
/// freed blocks on the heap avoids that. No-op elsewhere.
inline void keep_freed_memory() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
}

}  // namespace swat
