#include "ilab/rng.hpp"

#include <cmath>

namespace ilab {

namespace {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
}

std::uint64_t mix64(std::uint64_t x) {
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

RngStream RngStream::derive(std::uint64_t root, std::uint64_t run, std::uint64_t stream) {
  std::uint64_t k = mix64(root + 0x2545F4914F6CDD1DULL);
  k = mix64(k ^ (run * kGolden + 0x632BE59BD9B4E019ULL));
  k = mix64(k ^ (stream * 0xD1B54A32D192ED03ULL + 0x8CB92BA72F3D8DD7ULL));
  return RngStream(k);
}

std::uint64_t RngStream::next_u64() {
  ++counter_;
  return mix64(key_ + counter_ * kGolden);
}

double RngStream::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

std::size_t RngStream::below(std::size_t n) {
  if (n <= 1) return 0;
  // Lemire's multiply-shift with rejection.
  const unsigned __int128 m0 = static_cast<unsigned __int128>(next_u64()) * n;
  std::uint64_t lo = static_cast<std::uint64_t>(m0);
  unsigned __int128 m = m0;
  if (lo < n) {
    const std::uint64_t threshold = (0 - static_cast<std::uint64_t>(n)) % n;
    while (lo < threshold) {
      m = static_cast<unsigned __int128>(next_u64()) * n;
      lo = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::size_t>(m >> 64);
}

std::size_t RngStream::categorical(std::span<const double> probs) {
  const double u = uniform();
  double cum = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t j = 0; j < probs.size(); ++j) {
    if (probs[j] <= 0.0) continue;
    cum += probs[j];
    last_positive = j;
    if (u < cum) return j;
  }
  return last_positive;
}

double RngStream::exponential() { return -std::log1p(-uniform()); }

}  // namespace ilab
