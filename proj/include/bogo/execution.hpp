#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "params.hpp"

namespace bogo {

using Engine = std::mt19937_64;

/**
 * Independent generator for draw `index` of stream `stream`. Depends only on
 * (seed, stream, index), so results do not depend on how draws are spread
 * over threads.
 */
inline Engine path_stream(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  auto lo = [](std::uint64_t v) { return static_cast<std::uint32_t>(v & 0xffffffffu); };
  auto hi = [](std::uint64_t v) { return static_cast<std::uint32_t>(v >> 32); };
  std::seed_seq seq{lo(seed), hi(seed), lo(stream), hi(stream), lo(index), hi(index)};
  return Engine(seq);
}

/// 0 means: BOGO_THREADS if set, else 1.
inline unsigned resolve_threads(unsigned requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("BOGO_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v > 0) return static_cast<unsigned>(v);
    } catch (...) {
    }
    throw ParameterError(std::string("BOGO_THREADS must be a positive integer, got '") + env + "'");
  }
  return 1;
}

/**
 * Calls fn(begin, end) for consecutive chunks of [0, n). Chunk boundaries are
 * fixed by `chunk` alone; threads only change who runs them.
 */
template <class Fn>
void parallel_chunks(std::size_t n, std::size_t chunk, unsigned threads, Fn&& fn) {
  if (chunk == 0) throw ParameterError("chunk size must be positive");
  const std::size_t n_chunks = (n + chunk - 1) / chunk;
  threads = std::max(1u, threads);
  if (threads == 1 || n_chunks <= 1) {
    for (std::size_t c = 0; c < n_chunks; ++c) fn(c * chunk, std::min(n, (c + 1) * chunk));
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr err;
  std::mutex err_mu;
  auto worker = [&] {
    for (;;) {
      const std::size_t c = next.fetch_add(1);
      if (c >= n_chunks) return;
      try {
        fn(c * chunk, std::min(n, (c + 1) * chunk));
      } catch (...) {
        std::lock_guard lk(err_mu);
        if (!err) err = std::current_exception();
        next.store(n_chunks);
      }
    }
  };
  std::vector<std::thread> pool;
  const unsigned t = static_cast<unsigned>(std::min<std::size_t>(threads, n_chunks));
  for (unsigned i = 0; i < t; ++i) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (err) std::rethrow_exception(err);
}

}  // namespace bogo
