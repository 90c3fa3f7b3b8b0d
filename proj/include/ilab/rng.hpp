#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

namespace ilab {

std::uint64_t mix64(std::uint64_t x);

// Counter-based stream: output i is mix64(key + i * golden).
class RngStream {
 public:
  RngStream() = default;
  explicit RngStream(std::uint64_t key) : key_(key) {}

  // Stream `stream` of run `run` under root seed `root`.
  static RngStream derive(std::uint64_t root, std::uint64_t run, std::uint64_t stream);

  std::uint64_t next_u64();
  // Uniform on [0,1) with 53 random bits.
  double uniform();
  // Uniform integer in [0,n).
  std::size_t below(std::size_t n);
  // Inverse-CDF draw over probs in index order; zero-mass entries are never returned.
  std::size_t categorical(std::span<const double> probs);
  // Standard exponential variate.
  double exponential();

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

}  // namespace ilab
