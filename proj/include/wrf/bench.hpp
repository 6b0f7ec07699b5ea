#pragma once

#include <cstdint>
#include <string>

#include "wrf/model.hpp"

namespace wrf {

struct BenchReport {
    int warmup_iters = 0;
    int iters = 0;
    double mean_ms = 0.0;
    double p50_ms = 0.0;
    double p90_ms = 0.0;
    double fps = 0.0;  // 1000 / mean_ms
    uint64_t output_checksum = 0;  // FNV-1a over the last forward's outputs
    int threads = 1;

    std::string to_text() const;
    std::string to_json() const;
};

// Wall-clock forward latency on a fixed random input. Warmup runs are
// untimed; statistics are per-forward over the timed iterations.
BenchReport bench_latency(const Model& model, int batch, int height, int width, int warmup, int iters,
                          uint64_t seed);

}  // namespace wrf
