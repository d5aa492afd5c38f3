#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <mutex>
#include <random>
#include <thread>
#include <vector>

namespace sdgame {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Independent engine for (seed, path, channel). Channel 0 carries the
/// Gaussian increments, channel 1 the exit-correction uniforms, so variants
/// that differ only in one stream keep the other aligned.
inline std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t path, std::uint64_t channel) {
  std::uint64_t s = seed;
  std::uint64_t key = splitmix64(s);
  s = key ^ (path * 0xd1b54a32d192ed03ULL);
  key = splitmix64(s);
  s = key ^ (channel * 0x8cb92ba72f3d8dd7ULL);
  return std::mt19937_64(splitmix64(s));
}

inline int resolve_threads(int requested) {
  if (requested > 0) return requested;
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

/// Runs fn(i) for i in [0, n) on contiguous chunks. Results must be written
/// by index; the first exception is rethrown after all workers join.
template <class Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(resolve_threads(threads)), std::max<std::size_t>(n, 1));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::exception_ptr failure;
  std::mutex lock;
  std::vector<std::thread> pool;
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w * chunk; i < std::min(n, (w + 1) * chunk); ++i) fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> g(lock);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

class KahanSum {
 public:
  void add(double x) {
    const double y = x - carry_;
    const double t = sum_ + y;
    carry_ = (t - sum_) - y;
    sum_ = t;
  }
  double value() const { return sum_; }

 private:
  double sum_ = 0.0;
  double carry_ = 0.0;
};

/// Mean and standard error from compensated sums around the first sample.
class RunningStats {
 public:
  void add(double x) {
    if (n_ == 0) shift_ = x;
    ++n_;
    sum_.add(x - shift_);
    sq_.add((x - shift_) * (x - shift_));
  }
  std::size_t count() const { return n_; }
  double mean() const { return n_ ? shift_ + sum_.value() / n_ : 0.0; }
  double variance() const {
    if (n_ < 2) return 0.0;
    const double m = sum_.value() / n_;
    return std::max(0.0, (sq_.value() - n_ * m * m) / (n_ - 1));
  }
  double standard_error() const { return n_ ? std::sqrt(variance() / n_) : 0.0; }

 private:
  std::size_t n_ = 0;
  double shift_ = 0.0;
  KahanSum sum_;
  KahanSum sq_;
};

}  // namespace sdgame
