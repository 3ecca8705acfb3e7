#include "surad/parallel.hpp"

#include <atomic>
#include <algorithm>
#include <exception>
#include <thread>
#include <vector>

namespace surad {

namespace {
std::atomic<int> g_workers{static_cast<int>(std::thread::hardware_concurrency())};
constexpr std::size_t kDefaultChunk = 64;
}  // namespace

void set_worker_count(int n) {
  if (n <= 0) n = static_cast<int>(std::thread::hardware_concurrency());
  g_workers.store(std::max(1, n));
}

int worker_count() { return std::max(1, g_workers.load()); }

std::size_t chunk_count(std::size_t n, std::size_t chunk_size) {
  return chunk_size == 0 ? 0 : (n + chunk_size - 1) / chunk_size;
}

void parallel_chunks(std::size_t n, std::size_t chunk_size,
                     const std::function<void(std::size_t, std::size_t, std::size_t)>& fn) {
  if (n == 0) return;
  const std::size_t chunks = chunk_count(n, chunk_size);
  const std::size_t workers =
      std::min<std::size_t>(static_cast<std::size_t>(worker_count()), chunks);

  auto run_chunk = [&](std::size_t c) {
    const std::size_t begin = c * chunk_size;
    const std::size_t end = std::min(n, begin + chunk_size);
    fn(c, begin, end);
  };

  if (workers <= 1) {
    for (std::size_t c = 0; c < chunks; ++c) run_chunk(c);
    return;
  }

  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::atomic<bool> failed{false};
  auto worker = [&]() {
    for (;;) {
      const std::size_t c = next.fetch_add(1);
      if (c >= chunks || failed.load()) return;
      try {
        run_chunk(c);
      } catch (...) {
        if (!failed.exchange(true)) error = std::current_exception();
        return;
      }
    }
  };

  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (failed.load() && error) std::rethrow_exception(error);
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  parallel_chunks(n, kDefaultChunk,
                  [&](std::size_t, std::size_t begin, std::size_t end) {
                    for (std::size_t i = begin; i < end; ++i) fn(i);
                  });
}

}  // namespace surad
