#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

// Deterministic work sharing. Ranges are cut into fixed-size chunks that do
// not depend on the thread count; reductions store one partial per chunk and
// combine them in chunk order, so results are bit-identical for any number
// of threads.

namespace dpf {

inline unsigned effective_threads(unsigned requested) {
  if (requested == 0) {
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
  }
  return requested;
}

namespace detail {

constexpr std::size_t kChunk = 1024;

template <typename Body>
void run_chunks(std::size_t n, unsigned threads, Body&& body) {
  if (n == 0) return;
  const std::size_t n_chunks = (n + kChunk - 1) / kChunk;
  if (threads <= 1 || n_chunks == 1) {
    for (std::size_t c = 0; c < n_chunks; ++c)
      body(c, c * kChunk, std::min(n, (c + 1) * kChunk));
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::atomic<bool> failed{false};
  auto worker = [&] {
    for (;;) {
      const std::size_t c = next.fetch_add(1, std::memory_order_relaxed);
      if (c >= n_chunks || failed.load(std::memory_order_relaxed)) return;
      try {
        body(c, c * kChunk, std::min(n, (c + 1) * kChunk));
      } catch (...) {
        if (!failed.exchange(true)) error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  const unsigned spawn = std::min<std::size_t>(threads, n_chunks);
  pool.reserve(spawn - 1);
  for (unsigned i = 1; i < spawn; ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace detail

// body(i) for i in [0, n); iterations must be independent.
template <typename Body>
void parallel_for(std::size_t n, unsigned threads, Body&& body) {
  detail::run_chunks(n, threads, [&](std::size_t, std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) body(i);
  });
}

// chunk_sum(begin, end) -> double; partials combined in chunk order.
template <typename ChunkSum>
double parallel_reduce_add(std::size_t n, unsigned threads, ChunkSum&& chunk_sum) {
  if (n == 0) return 0.0;
  const std::size_t n_chunks = (n + detail::kChunk - 1) / detail::kChunk;
  std::vector<double> partials(n_chunks, 0.0);
  detail::run_chunks(n, threads, [&](std::size_t c, std::size_t b, std::size_t e) {
    partials[c] = chunk_sum(b, e);
  });
  double total = 0.0;
  for (double p : partials) total += p;
  return total;
}

// chunk_accum(begin, end, acc) adds into a zeroed width-length buffer; the
// per-chunk buffers are added into out (not cleared here) in chunk order.
template <typename ChunkAccum>
void parallel_reduce_vec(std::size_t n, unsigned threads, std::size_t width,
                         double* out, ChunkAccum&& chunk_accum) {
  if (n == 0) return;
  const std::size_t n_chunks = (n + detail::kChunk - 1) / detail::kChunk;
  std::vector<double> partials(n_chunks * width, 0.0);
  detail::run_chunks(n, threads, [&](std::size_t c, std::size_t b, std::size_t e) {
    chunk_accum(b, e, partials.data() + c * width);
  });
  for (std::size_t c = 0; c < n_chunks; ++c) {
    const double* p = partials.data() + c * width;
    for (std::size_t j = 0; j < width; ++j) out[j] += p[j];
  }
}

}  // namespace dpf
