#pragma once

#include <cstddef>
#include <cstdint>

#if defined(__linux__)
#include <sys/mman.h>
#include <unistd.h>
#endif

namespace mcsolve::detail {

/// Best-effort request to back a large buffer with huge pages. Tables that
/// are probed at random spread across thousands of 4 KiB pages, so every
/// lookup drags a TLB page walk behind it; huge pages shrink that to a
/// handful of entries. No-op (regular pages remain) when the kernel or the
/// policy declines, or below a few MiB where walks are rare anyway.
inline void hint_huge_pages(void* data, std::size_t bytes) {
#if defined(__linux__)
  if (data == nullptr || bytes < (std::size_t{4} << 20)) return;
  const auto page = static_cast<std::uintptr_t>(::sysconf(_SC_PAGESIZE));
  const auto addr = reinterpret_cast<std::uintptr_t>(data);
  const std::uintptr_t lo = (addr + page - 1) & ~(page - 1);
  const std::uintptr_t hi = (addr + bytes) & ~(page - 1);
  if (hi <= lo) return;
  auto* base = reinterpret_cast<void*>(lo);
  const std::size_t len = hi - lo;
  ::madvise(base, len, MADV_HUGEPAGE);
#if defined(MADV_COLLAPSE)
  ::madvise(base, len, MADV_COLLAPSE);  // synchronous when supported
#endif
#else
  (void)data;
  (void)bytes;
#endif
}

}  // namespace mcsolve::detail
