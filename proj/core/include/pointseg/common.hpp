#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace pointseg {

// Configuration rejected before any work was done.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A prompt/segmenter backend failed or is unknown.
struct BackendError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Dense row-major image. Index order is (row, col) = (v, u).
template <typename T>
struct Image {
  int width = 0;
  int height = 0;
  std::vector<T> data;

  Image() = default;
  Image(int w, int h, T fill = T{}) : width(w), height(h), data(static_cast<size_t>(w) * h, fill) {}

  T& operator()(int row, int col) { return data[static_cast<size_t>(row) * width + col]; }
  const T& operator()(int row, int col) const { return data[static_cast<size_t>(row) * width + col]; }
  bool in_bounds(int row, int col) const {
    return row >= 0 && row < height && col >= 0 && col < width;
  }
  size_t pixel_count() const { return data.size(); }
  bool operator==(const Image&) const = default;
};

// splitmix64; used to derive independent per-task seeds from one master seed
// so results never depend on thread scheduling.
inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline uint64_t mix_seed(uint64_t seed, uint64_t stream) {
  return splitmix64(seed ^ splitmix64(stream));
}

inline uint64_t mix_seed(uint64_t seed, uint64_t a, uint64_t b) {
  return mix_seed(mix_seed(seed, a), b);
}

inline uint64_t mix_seed(uint64_t seed, uint64_t a, uint64_t b, uint64_t c) {
  return mix_seed(mix_seed(seed, a, b), c);
}

inline int resolve_thread_count(int requested) {
  if (requested > 0) return requested;
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

// Runs fn(i) for i in [0, n). Tasks are indexed and side-effect-free except
// for writes to caller-owned per-index slots, so the result is identical for
// any thread count.
inline void parallel_for(size_t n, int threads, const std::function<void(size_t)>& fn) {
  threads = resolve_thread_count(threads);
  if (threads <= 1 || n <= 1) {
    for (size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::atomic<size_t> next{0};
  size_t workers = std::min<size_t>(static_cast<size_t>(threads), n);
  pool.reserve(workers);
  for (size_t t = 0; t < workers; ++t) {
    pool.emplace_back([&] {
      for (;;) {
        size_t i = next.fetch_add(1);
        if (i >= n) return;
        fn(i);
      }
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace pointseg
