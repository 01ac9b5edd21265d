#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace mcsolve {

/// Items are processed in fixed blocks of this many consecutive indices.
/// Estimators accumulate into per-block storage and combine the blocks in
/// index order afterwards, so the floating-point reduction tree depends
/// only on the item count — never on thread count or scheduling. This is
/// what makes multi-threaded runs bytewise identical to serial ones.
inline constexpr std::size_t kReductionBlock = 1024;

inline std::size_t block_count(std::size_t n_items) {
  return (n_items + kReductionBlock - 1) / kReductionBlock;
}

/// Number of worker threads actually used for a request of `threads`
/// (0 means "ask the hardware").
unsigned effective_threads(unsigned threads);

/// Runs fn(block_index, begin, end) for every block of [0, n_items).
/// Blocks are claimed from a shared counter; fn must only touch state
/// owned by its block. Exceptions are captured and rethrown on the caller.
template <typename BlockFn>
void run_blocks(std::size_t n_items, unsigned threads, BlockFn&& fn) {
  const std::size_t blocks = block_count(n_items);
  if (blocks == 0) return;

  unsigned workers = effective_threads(threads);
  if (workers > blocks) workers = static_cast<unsigned>(blocks);

  auto body = [&](std::size_t b) {
    const std::size_t begin = b * kReductionBlock;
    const std::size_t end = std::min(begin + kReductionBlock, n_items);
    fn(b, begin, end);
  };

  if (workers <= 1) {
    for (std::size_t b = 0; b < blocks; ++b) body(b);
    return;
  }

  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned t = 0; t < workers; ++t) {
    pool.emplace_back([&] {
      while (!failed.load(std::memory_order_relaxed)) {
        std::size_t b = next.fetch_add(1, std::memory_order_relaxed);
        if (b >= blocks) return;
        try {
          body(b);
        } catch (...) {
          if (!failed.exchange(true)) error = std::current_exception();
          return;
        }
      }
    });
  }
  for (std::thread& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace mcsolve
