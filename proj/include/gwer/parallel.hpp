#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "gwer/rng.hpp"
#include "gwer/stats.hpp"

namespace gwer {

// Replica task: fills `out` (one slot per tracked component) for one replica.
using ReplicaFn = std::function<void(std::int64_t replica, RngStream& rng, std::span<double> out)>;

// Runs `replicas` independent tasks; replica i draws from stream
// (seed, stream_base + i). Accumulation is chunked with a fixed chunk size and
// chunks merged in index order, so the result is bit-identical for any
// parallelism degree. Task errors are collected and re-thrown with the lowest
// failing replica id.
std::vector<MomentAccumulator> run_replicated(std::int64_t replicas, int width, int parallelism,
                                              std::uint64_t seed, std::uint64_t stream_base,
                                              const ReplicaFn& task);

MomentAccumulator run_replicated(std::int64_t replicas, int parallelism, std::uint64_t seed,
                                 std::uint64_t stream_base,
                                 const std::function<double(std::int64_t, RngStream&)>& task);

// Same scheduling, but keeps every replica's values (column-major:
// result[c][replica]). For jackknife ratio estimators.
std::vector<std::vector<double>> run_collect(std::int64_t replicas, int width, int parallelism,
                                             std::uint64_t seed, std::uint64_t stream_base,
                                             const ReplicaFn& task);

int default_parallelism();

}  // namespace gwer
