#pragma once

// Batch statistics and seed derivation shared by the Monte Carlo integrals.

#include <cmath>
#include <cstdint>
#include <vector>

namespace rydsi {

struct Estimate {
  double value = 0;
  double error = 0;  // one standard error
};

/// Splits a run of samples into equal consecutive batches; the error is the
/// spread of batch means.
class BatchAccumulator {
 public:
  BatchAccumulator(long total, int batches = 32) : total_(total), batches_(batches), sums_(batches, 0.0) {}

  void add(long index, double value) { sums_[batch_of(index)] += value; }

  Estimate result() const {
    std::vector<double> means(batches_);
    double mean = 0;
    for (int b = 0; b < batches_; ++b) {
      const long lo = total_ * b / batches_, hi = total_ * (b + 1) / batches_;
      means[b] = sums_[b] / double(hi - lo);
      mean += means[b] / batches_;
    }
    double var = 0;
    for (double m : means) var += (m - mean) * (m - mean);
    var /= (batches_ - 1);
    return {mean, std::sqrt(var / batches_)};
  }

 private:
  int batch_of(long index) const { return int((index * batches_) / total_); }

  long total_;
  int batches_;
  std::vector<double> sums_;
};

/// SplitMix64 finalizer; decorrelates seeds derived from a master seed and
/// an index.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  std::uint64_t z = master + 0x9E3779B97F4A7C15ull * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace rydsi
