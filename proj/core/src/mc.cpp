#include "shemfc/mc.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <mutex>
#include <numbers>
#include <optional>
#include <string>
#include <thread>

#include "shemfc/errors.hpp"

namespace shemfc {

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

inline void philox_round(std::uint32_t c[4], std::uint32_t k0, std::uint32_t k1) {
  const std::uint64_t p0 = std::uint64_t(kPhiloxM0) * c[0];
  const std::uint64_t p1 = std::uint64_t(kPhiloxM1) * c[2];
  const std::uint32_t hi0 = std::uint32_t(p0 >> 32), lo0 = std::uint32_t(p0);
  const std::uint32_t hi1 = std::uint32_t(p1 >> 32), lo1 = std::uint32_t(p1);
  c[0] = hi1 ^ c[1] ^ k0;
  c[1] = lo1;
  c[2] = hi0 ^ c[3] ^ k1;
  c[3] = lo0;
}

inline void philox4x32_10(std::uint64_t counter, std::uint64_t stream,
                          std::uint64_t seed, std::uint32_t out[4]) {
  std::uint32_t c[4] = {std::uint32_t(counter), std::uint32_t(counter >> 32),
                        std::uint32_t(stream), std::uint32_t(stream >> 32)};
  std::uint32_t k0 = std::uint32_t(seed);
  std::uint32_t k1 = std::uint32_t(seed >> 32);
  for (int r = 0; r < 10; ++r) {
    philox_round(c, k0, k1);
    k0 += kPhiloxW0;
    k1 += kPhiloxW1;
  }
  out[0] = c[0];
  out[1] = c[1];
  out[2] = c[2];
  out[3] = c[3];
}

}  // namespace

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed), stream_id_(stream_id) {}

void RngStream::refill() {
  philox4x32_10(counter_++, stream_id_, seed_, block_);
  pos_ = 0;
}

std::uint32_t RngStream::next_u32() {
  if (pos_ >= 4) refill();
  return block_[pos_++];
}

std::uint64_t RngStream::next_u64() {
  const std::uint64_t lo = next_u32();
  const std::uint64_t hi = next_u32();
  return (hi << 32) | lo;
}

double RngStream::uniform() {
  // 53 random bits into (0,1); the offset keeps 0 strictly excluded.
  return double(next_u64() >> 11) * 0x1.0p-53 + 0x1.0p-54;
}

double RngStream::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_normal_;
  }
  const double u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double a = 2.0 * std::numbers::pi * u2;
  spare_normal_ = r * std::sin(a);
  has_spare_ = true;
  return r * std::cos(a);
}

RngStream RngStream::substream(std::uint64_t child_id) const {
  return RngStream(seed_, mix64(stream_id_ ^ mix64(child_id)));
}

void StreamingStats::add(double x) {
  ++count;
  const double delta = x - mean;
  mean += delta / double(count);
  m2 += delta * (x - mean);
  if (x < min) min = x;
  if (x > max) max = x;
}

double StreamingStats::std_error() const {
  if (count < 2) return 0.0;
  return std::sqrt(m2 / (double(count) * double(count - 1)));
}

StreamingStats StreamingStats::merged(const StreamingStats& a, const StreamingStats& b) {
  if (a.count == 0) return b;
  if (b.count == 0) return a;
  StreamingStats r;
  r.count = a.count + b.count;
  const double delta = b.mean - a.mean;
  const double nb_over_n = double(b.count) / double(r.count);
  r.mean = a.mean + delta * nb_over_n;
  r.m2 = a.m2 + b.m2 + delta * delta * double(a.count) * nb_over_n;
  r.min = a.min < b.min ? a.min : b.min;
  r.max = a.max > b.max ? a.max : b.max;
  return r;
}

Estimate Estimate::from_stats(const StreamingStats& s) {
  return Estimate{s.mean, s.std_error(), s.count};
}

PathBundle sample_bundle(RngStream stream, int k, int d, double t, int n_steps) {
  if (k < 1 || d < 1 || n_steps < 1 || !(t > 0.0))
    throw InvalidSpec("sample_bundle: need k,d,n_steps >= 1 and t > 0");
  PathBundle b;
  b.k = k;
  b.d = d;
  b.t = t;
  b.n_steps = n_steps;
  b.seed = stream.seed();
  b.stream_id = stream.stream_id();
  b.values.assign(std::size_t(k) * (n_steps + 1) * d, 0.0);
  const double sdt = std::sqrt(t / n_steps);
  for (int p = 0; p < k; ++p) {
    double* path = b.values.data() + std::size_t(p) * (n_steps + 1) * d;
    for (int step = 1; step <= n_steps; ++step) {
      const double* prev = path + std::size_t(step - 1) * d;
      double* cur = path + std::size_t(step) * d;
      for (int c = 0; c < d; ++c) cur[c] = prev[c] + sdt * stream.normal();
    }
  }
  return b;
}

int resolve_workers(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("SHE_MFC_WORKERS")) {
    const int w = std::atoi(env);
    if (w > 0) return w;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? int(hw) : 1;
}

namespace {
// Block size is a fixed constant: the block partition (and therefore the
// reduction tree and all rounding) must not depend on the worker count.
constexpr std::uint64_t kReduceBlock = 1024;
}  // namespace

std::vector<StreamingStats> parallel_reduce_multi(
    std::uint64_t begin, std::uint64_t end, int n_outputs,
    const std::function<void(std::uint64_t, std::span<double>)>& evaluator,
    int workers) {
  if (end <= begin) return std::vector<StreamingStats>(n_outputs);
  const std::uint64_t n = end - begin;
  const std::uint64_t n_blocks = (n + kReduceBlock - 1) / kReduceBlock;
  std::vector<std::vector<StreamingStats>> block_stats(
      n_blocks, std::vector<StreamingStats>(n_outputs));

  std::atomic<std::uint64_t> next_block{0};
  std::mutex err_mutex;
  std::optional<std::pair<std::uint64_t, std::string>> first_error;

  auto work = [&]() {
    std::vector<double> out(n_outputs);
    for (;;) {
      const std::uint64_t blk = next_block.fetch_add(1);
      if (blk >= n_blocks) return;
      const std::uint64_t lo = begin + blk * kReduceBlock;
      const std::uint64_t hi = std::min(end, lo + kReduceBlock);
      for (std::uint64_t i = lo; i < hi; ++i) {
        try {
          evaluator(i, std::span<double>(out));
        } catch (const std::exception& e) {
          std::lock_guard<std::mutex> g(err_mutex);
          if (!first_error || i < first_error->first) first_error = {{i, e.what()}};
          return;
        }
        for (int j = 0; j < n_outputs; ++j) block_stats[blk][j].add(out[j]);
      }
    }
  };

  const int w = std::min<std::uint64_t>(std::max(1, workers), n_blocks);
  if (w <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(w);
    for (int i = 0; i < w; ++i) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  if (first_error) throw EvaluatorError(first_error->first, first_error->second);

  // Fixed pairwise tree over block indices.
  for (std::uint64_t stride = 1; stride < n_blocks; stride *= 2) {
    for (std::uint64_t i = 0; i + stride < n_blocks; i += 2 * stride) {
      for (int j = 0; j < n_outputs; ++j)
        block_stats[i][j] = StreamingStats::merged(block_stats[i][j], block_stats[i + stride][j]);
    }
  }
  return block_stats[0];
}

StreamingStats parallel_reduce(std::uint64_t begin, std::uint64_t end,
                               const std::function<double(std::uint64_t)>& evaluator,
                               int workers) {
  auto multi = parallel_reduce_multi(
      begin, end, 1,
      [&](std::uint64_t i, std::span<double> out) { out[0] = evaluator(i); }, workers);
  return multi[0];
}

}  // namespace shemfc
