#pragma once

#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <random>
#include <thread>
#include <vector>

namespace bavart {

/// SplitMix64 finalizer; used to derive well-separated seeds for named streams.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Seed for the stream identified by (master, a, b, c). Streams are a pure
/// function of their ids, so results never depend on which thread drew them.
constexpr std::uint64_t stream_seed(std::uint64_t master, std::uint64_t a,
                                    std::uint64_t b = 0,
                                    std::uint64_t c = 0) noexcept {
  return mix64(mix64(mix64(mix64(master) ^ a) ^ (b + 0x632be59bd9b4e019ULL)) ^
               (c + 0x85157af5ULL));
}

class Rng {
 public:
  using engine_type = std::mt19937_64;

  explicit Rng(std::uint64_t seed = 0x5eedULL) : engine_(seed) {}

  static Rng stream(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0,
                    std::uint64_t c = 0) {
    return Rng(stream_seed(master, a, b, c));
  }

  /// Uniform on the open interval (0, 1).
  double uniform() {
    double u;
    do {
      u = std::generate_canonical<double, 53>(engine_);
    } while (u <= 0.0);
    return u;
  }

  double normal() { return std::normal_distribution<double>{}(engine_); }
  double normal(double mean, double sd) { return mean + sd * normal(); }

  /// Gamma with shape/rate parameterisation.
  double gamma(double shape, double rate) {
    return std::gamma_distribution<double>{shape, 1.0 / rate}(engine_);
  }

  /// Inverse gamma: 1/X with X ~ Gamma(shape, rate).
  double inv_gamma(double shape, double rate) { return 1.0 / gamma(shape, rate); }

  double beta(double a, double b) {
    const double x = gamma(a, 1.0);
    const double y = gamma(b, 1.0);
    return x / (x + y);
  }

  /// Uniform integer in [0, n).
  std::size_t index(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>{0, n - 1}(engine_);
  }

  /// Draw an index with probability proportional to `weights`.
  std::size_t categorical(const double* weights, std::size_t n) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) total += weights[i];
    double u = uniform() * total;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      if (u < weights[i]) return i;
      u -= weights[i];
    }
    return n - 1;
  }

  engine_type& engine() noexcept { return engine_; }

 private:
  engine_type engine_;
};

/// Run fn(i) for i in [0, n) on up to `threads` workers with a static
/// block partition. Each index must own its state (and RNG stream). The
/// first exception thrown by any worker is rethrown on the caller.
inline void parallel_for(std::size_t n, unsigned threads,
                         const std::function<void(std::size_t)>& fn) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  const std::size_t workers = std::min<std::size_t>(threads, n);
  std::vector<std::exception_ptr> errors(workers);
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < n; i += workers) fn(i);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace bavart
