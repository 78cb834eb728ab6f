#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>

namespace karma {

// Deterministic RNG. All randomness in the library flows through explicitly
// seeded instances of this class; sub-streams are derived from a root seed so
// one manifest seed reproduces an entire run.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // splitmix64 step, used to derive independent sub-stream seeds
  static std::uint64_t derive(std::uint64_t root, std::uint64_t stream) {
    std::uint64_t z = root + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
  static Rng child(std::uint64_t root, std::uint64_t stream) {
    return Rng(derive(root, stream));
  }

  // uniform in [0, 1), 53-bit resolution, engine-portable
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // uniform integer in [0, n), rejection-free enough for our sizes
  int uniform_int(int n) {
    if (n <= 0) throw std::invalid_argument("uniform_int: n must be positive");
    const std::uint64_t span = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
    std::uint64_t v;
    do {
      v = engine_();
    } while (v >= limit);
    return static_cast<int>(v % span);
  }

  bool bernoulli(double p) { return uniform() < p; }

  // sample an index from unnormalized non-negative weights
  int sample(std::span<const double> weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    if (total <= 0.0) throw std::runtime_error("sample: zero total weight");
    double u = uniform() * total;
    double acc = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      acc += weights[i];
      if (u < acc) return static_cast<int>(i);
    }
    return static_cast<int>(weights.size() - 1);
  }

  // k distinct indices from [0, n), order random (partial Fisher-Yates)
  std::vector<int> choose_distinct(int n, int k) {
    if (k > n) throw std::invalid_argument("choose_distinct: k > n");
    std::vector<int> pool(n);
    for (int i = 0; i < n; ++i) pool[i] = i;
    std::vector<int> out;
    out.reserve(k);
    for (int i = 0; i < k; ++i) {
      int j = i + uniform_int(n - i);
      std::swap(pool[i], pool[j]);
      out.push_back(pool[i]);
    }
    return out;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace karma
