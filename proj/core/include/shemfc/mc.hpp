#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <vector>

namespace shemfc {

/// Counter-based random stream (Philox4x32-10).
///
/// A stream is addressed by (seed, stream_id); the draw index is the block
/// counter. The same (seed, stream_id) always produces the same sequence,
/// independent of thread count or the order other streams are consumed in.
/// Distinct stream_ids give statistically independent sequences.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  std::uint32_t next_u32();
  std::uint64_t next_u64();

  /// Uniform double in the open interval (0,1).
  double uniform();

  /// Standard normal via Box-Muller (two uniforms per pair, one cached).
  double normal();

  /// Child stream with an id derived by mixing (stream_id, child_id).
  /// Children of distinct (parent, child_id) pairs are independent.
  RngStream substream(std::uint64_t child_id) const;

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t counter_ = 0;
  std::uint32_t block_[4];
  int pos_ = 4;  // exhausted
  double spare_normal_ = 0.0;
  bool has_spare_ = false;

  void refill();
};

/// Mergeable single-pass moment accumulator.
struct StreamingStats {
  std::uint64_t count = 0;
  double mean = 0.0;
  double m2 = 0.0;  // sum of squared deviations from the mean
  double min = std::numeric_limits<double>::infinity();
  double max = -std::numeric_limits<double>::infinity();

  void add(double x);

  double variance() const { return count > 1 ? m2 / double(count - 1) : 0.0; }
  double std_error() const;

  /// Pooled statistics; associative and commutative up to rounding.
  static StreamingStats merged(const StreamingStats& a, const StreamingStats& b);
};

/// Scalar Monte Carlo result.
struct Estimate {
  double value = 0.0;
  double std_error = 0.0;
  std::uint64_t n = 0;

  double ci95_low() const { return value - 1.959963984540054 * std_error; }
  double ci95_high() const { return value + 1.959963984540054 * std_error; }

  static Estimate from_stats(const StreamingStats& s);
  static Estimate exact(double v) { return Estimate{v, 0.0, 0}; }
};

/// k independent d-dimensional Brownian paths on the uniform grid
/// {0, t/n_steps, ..., t}, all started at the origin.
struct PathBundle {
  int k = 0;
  int d = 0;
  double t = 0.0;
  int n_steps = 0;
  std::uint64_t seed = 0;
  std::uint64_t stream_id = 0;
  std::vector<double> values;  // [path][step][coord], (n_steps+1) steps

  double dt() const { return t / n_steps; }
  double time_at(int step) const { return t * step / n_steps; }
  const double* point(int path, int step) const {
    return values.data() + (std::size_t(path) * (n_steps + 1) + step) * d;
  }
  std::span<const double> point_span(int path, int step) const {
    return {point(path, step), std::size_t(d)};
  }
};

/// Cumulative sums of N(0, dt) increments per coordinate; deterministic
/// given the stream.
PathBundle sample_bundle(RngStream stream, int k, int d, double t, int n_steps);

/// Resolve a worker count: `requested` if > 0, else the SHE_MFC_WORKERS
/// environment variable, else the hardware concurrency.
int resolve_workers(int requested);

/// Parallel map-reduce over a sample index range with a fixed binary
/// reduction tree, so the result is bit-identical for any worker count.
/// The evaluator must be pure given the index and fills `out` with
/// `n_outputs` values per sample. Evaluator errors are rethrown with the
/// smallest failing sample index attached.
std::vector<StreamingStats> parallel_reduce_multi(
    std::uint64_t begin, std::uint64_t end, int n_outputs,
    const std::function<void(std::uint64_t, std::span<double>)>& evaluator,
    int workers);

StreamingStats parallel_reduce(std::uint64_t begin, std::uint64_t end,
                               const std::function<double(std::uint64_t)>& evaluator,
                               int workers);

/// 64-bit finalizing mix (splitmix64); used to derive child stream ids.
std::uint64_t mix64(std::uint64_t x);

}  // namespace shemfc
