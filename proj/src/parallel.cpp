#include "gwer/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <mutex>
#include <string>
#include <thread>

#include "gwer/error.hpp"

namespace gwer {

namespace {

constexpr std::int64_t kChunk = 1024;

struct ReplicaError {
  std::int64_t replica;
  Errc code;
  std::string message;
};

}  // namespace

int default_parallelism() {
  unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

std::vector<MomentAccumulator> run_replicated(std::int64_t replicas, int width, int parallelism,
                                              std::uint64_t seed, std::uint64_t stream_base,
                                              const ReplicaFn& task) {
  if (replicas < 1) fail(Errc::DomainError, "replicas must be >= 1");
  if (parallelism < 1) parallelism = default_parallelism();
  std::int64_t n_chunks = (replicas + kChunk - 1) / kChunk;
  std::vector<std::vector<MomentAccumulator>> chunk_accs(
      static_cast<std::size_t>(n_chunks), std::vector<MomentAccumulator>(width));

  std::atomic<std::int64_t> next_chunk{0};
  std::mutex err_mu;
  std::vector<ReplicaError> errors;

  auto worker = [&] {
    std::vector<double> out(static_cast<std::size_t>(width));
    for (;;) {
      std::int64_t c = next_chunk.fetch_add(1);
      if (c >= n_chunks) break;
      std::int64_t lo = c * kChunk;
      std::int64_t hi = std::min(replicas, lo + kChunk);
      auto& accs = chunk_accs[static_cast<std::size_t>(c)];
      for (std::int64_t i = lo; i < hi; ++i) {
        RngStream rng(seed, stream_base + static_cast<std::uint64_t>(i));
        try {
          task(i, rng, out);
        } catch (const Error& e) {
          std::lock_guard<std::mutex> lk(err_mu);
          errors.push_back({i, e.code(), e.what()});
          continue;
        } catch (const std::exception& e) {
          std::lock_guard<std::mutex> lk(err_mu);
          errors.push_back({i, Errc::DomainError, e.what()});
          continue;
        }
        for (int w = 0; w < width; ++w) accs[static_cast<std::size_t>(w)].add(out[static_cast<std::size_t>(w)]);
      }
    }
  };

  int nthreads = static_cast<int>(std::min<std::int64_t>(parallelism, n_chunks));
  if (nthreads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(nthreads));
    for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  if (!errors.empty()) {
    auto it = std::min_element(errors.begin(), errors.end(),
                               [](const ReplicaError& a, const ReplicaError& b) { return a.replica < b.replica; });
    fail(it->code, "replica " + std::to_string(it->replica) + " failed (" +
                       std::to_string(errors.size()) + " total): " + it->message);
  }

  std::vector<MomentAccumulator> out(static_cast<std::size_t>(width));
  for (std::int64_t c = 0; c < n_chunks; ++c)
    for (int w = 0; w < width; ++w) out[static_cast<std::size_t>(w)].merge(chunk_accs[static_cast<std::size_t>(c)][static_cast<std::size_t>(w)]);
  return out;
}

MomentAccumulator run_replicated(std::int64_t replicas, int parallelism, std::uint64_t seed,
                                 std::uint64_t stream_base,
                                 const std::function<double(std::int64_t, RngStream&)>& task) {
  auto accs = run_replicated(replicas, 1, parallelism, seed, stream_base,
                             [&](std::int64_t i, RngStream& rng, std::span<double> out) { out[0] = task(i, rng); });
  return accs[0];
}

std::vector<std::vector<double>> run_collect(std::int64_t replicas, int width, int parallelism,
                                             std::uint64_t seed, std::uint64_t stream_base,
                                             const ReplicaFn& task) {
  if (replicas < 1) fail(Errc::DomainError, "replicas must be >= 1");
  if (parallelism < 1) parallelism = default_parallelism();
  std::vector<std::vector<double>> cols(static_cast<std::size_t>(width),
                                        std::vector<double>(static_cast<std::size_t>(replicas)));
  std::int64_t n_chunks = (replicas + kChunk - 1) / kChunk;
  std::atomic<std::int64_t> next_chunk{0};
  std::mutex err_mu;
  std::vector<ReplicaError> errors;

  auto worker = [&] {
    std::vector<double> out(static_cast<std::size_t>(width));
    for (;;) {
      std::int64_t c = next_chunk.fetch_add(1);
      if (c >= n_chunks) break;
      std::int64_t lo = c * kChunk;
      std::int64_t hi = std::min(replicas, lo + kChunk);
      for (std::int64_t i = lo; i < hi; ++i) {
        RngStream rng(seed, stream_base + static_cast<std::uint64_t>(i));
        try {
          task(i, rng, out);
        } catch (const Error& e) {
          std::lock_guard<std::mutex> lk(err_mu);
          errors.push_back({i, e.code(), e.what()});
          continue;
        } catch (const std::exception& e) {
          std::lock_guard<std::mutex> lk(err_mu);
          errors.push_back({i, Errc::DomainError, e.what()});
          continue;
        }
        for (int w = 0; w < width; ++w) cols[static_cast<std::size_t>(w)][static_cast<std::size_t>(i)] = out[static_cast<std::size_t>(w)];
      }
    }
  };

  int nthreads = static_cast<int>(std::min<std::int64_t>(parallelism, n_chunks));
  if (nthreads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(nthreads));
    for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  if (!errors.empty()) {
    auto it = std::min_element(errors.begin(), errors.end(),
                               [](const ReplicaError& a, const ReplicaError& b) { return a.replica < b.replica; });
    fail(it->code, "replica " + std::to_string(it->replica) + " failed (" +
                       std::to_string(errors.size()) + " total): " + it->message);
  }
  return cols;
}

}  // namespace gwer
