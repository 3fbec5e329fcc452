#ifndef SEQMC_PARALLEL_HPP
#define SEQMC_PARALLEL_HPP

#include <atomic>
#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace seqmc {

inline unsigned worker_thread_count() {
  if (const char* env = std::getenv("SEQMC_THREADS")) {
    long v = std::strtol(env, nullptr, 10);
    if (v >= 1) {
      return static_cast<unsigned>(v);
    }
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1u : hw;
}

/// Runs fn(chunk, begin, end) over [0, n) split into `chunks` contiguous
/// ranges. Chunk boundaries depend only on (n, chunks), never on the thread
/// count, so reductions combined in chunk order are bit-reproducible.
inline void parallel_chunks(std::size_t n, std::size_t chunks,
                            const std::function<void(std::size_t, std::size_t, std::size_t)>& fn) {
  if (n == 0) {
    return;
  }
  if (chunks > n) {
    chunks = n;
  }
  unsigned threads = worker_thread_count();
  if (threads > chunks) {
    threads = static_cast<unsigned>(chunks);
  }
  auto bounds = [n, chunks](std::size_t c) { return c * n / chunks; };
  if (threads <= 1) {
    for (std::size_t c = 0; c < chunks; ++c) {
      fn(c, bounds(c), bounds(c + 1));
    }
    return;
  }
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      std::size_t c = next.fetch_add(1);
      if (c >= chunks) {
        return;
      }
      fn(c, bounds(c), bounds(c + 1));
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back(worker);
  }
  for (auto& t : pool) {
    t.join();
  }
}

}  // namespace seqmc

#endif
