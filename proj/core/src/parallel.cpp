#include "mcsolve/parallel.hpp"

namespace mcsolve {

unsigned effective_threads(unsigned threads) {
  if (threads != 0) return threads;
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

}  // namespace mcsolve
