#include "wrf/bench.hpp"

#include <algorithm>
#include <chrono>
#include <iomanip>
#include <sstream>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "wrf/rng.hpp"

namespace wrf {

BenchReport bench_latency(const Model& model, int batch, int height, int width, int warmup, int iters,
                          uint64_t seed) {
    if (iters < 1) throw Error("bench: iters must be >= 1");
    Tensor input = random_uniform({batch, 3, height, width}, seed);

    BenchReport rep;
    rep.warmup_iters = warmup;
    rep.iters = iters;
#ifdef _OPENMP
    rep.threads = omp_get_max_threads();
#endif

    for (int i = 0; i < warmup; ++i) model.forward(input);

    std::vector<double> times_ms(static_cast<size_t>(iters));
    PredictionBundle last;
    for (int i = 0; i < iters; ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        last = model.forward(input);
        const auto t1 = std::chrono::steady_clock::now();
        times_ms[static_cast<size_t>(i)] = std::chrono::duration<double, std::milli>(t1 - t0).count();
    }

    double sum = 0.0;
    for (double t : times_ms) sum += t;
    rep.mean_ms = sum / iters;
    std::sort(times_ms.begin(), times_ms.end());
    rep.p50_ms = times_ms[static_cast<size_t>(iters / 2)];
    rep.p90_ms = times_ms[static_cast<size_t>(std::min<int>(iters - 1, (iters * 9) / 10))];
    rep.fps = 1000.0 / rep.mean_ms;

    uint64_t h = fnv1a64_bytes(last.seg_logits.data(), static_cast<size_t>(last.seg_logits.numel()) * 4);
    rep.output_checksum = fnv1a64_bytes(last.cls_logits.data(),
                                        static_cast<size_t>(last.cls_logits.numel()) * 4, h);
    return rep;
}

std::string BenchReport::to_text() const {
    std::ostringstream os;
    os << std::fixed << std::setprecision(3);
    os << "warmup_iters=" << warmup_iters << "\n";
    os << "iters=" << iters << "\n";
    os << "mean_ms=" << mean_ms << "\n";
    os << "p50_ms=" << p50_ms << "\n";
    os << "p90_ms=" << p90_ms << "\n";
    os << "fps=" << fps << "\n";
    os << "threads=" << threads << "\n";
    os << "output_checksum=" << std::hex << output_checksum << std::dec << "\n";
    return os.str();
}

std::string BenchReport::to_json() const {
    std::ostringstream os;
    os << std::fixed << std::setprecision(3);
    os << "{\n"
       << "  \"warmup_iters\": " << warmup_iters << ",\n"
       << "  \"iters\": " << iters << ",\n"
       << "  \"mean_ms\": " << mean_ms << ",\n"
       << "  \"p50_ms\": " << p50_ms << ",\n"
       << "  \"p90_ms\": " << p90_ms << ",\n"
       << "  \"fps\": " << fps << ",\n"
       << "  \"threads\": " << threads << ",\n"
       << "  \"output_checksum\": \"" << std::hex << output_checksum << std::dec << "\"\n"
       << "}\n";
    return os.str();
}

}  // namespace wrf
