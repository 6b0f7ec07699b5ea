#pragma once

#include <cstdint>
#include <string>

#include "wrf/config.hpp"
#include "wrf/ops.hpp"

namespace wrf {

// Analytic parameter and FLOP accounting. Convention: one multiply-accumulate
// counts as one FLOP; elementwise and normalization work is excluded.
struct ComplexityReport {
    Mode mode = Mode::fused;
    int64_t params = 0;
    int64_t flops = 0;       // = conv + linear + attention matmuls
    int64_t conv_flops = 0;  // all convolutions (patch, sr, dw, decoder)
    int64_t linear_flops = 0;
    int64_t attn_flops = 0;  // q·kᵀ and attn·v products
    int input_h = 0, input_w = 0, batch = 1;

    std::string to_text() const;
    std::string to_json() const;
};

int64_t count_params(const RunConfig& config, Mode mode);

ComplexityReport count_flops(const RunConfig& config, int batch, int height, int width, Mode mode);

// MACs of one conv evaluated on an out_h x out_w grid:
// out_h * out_w * out_c * k^2 * in_c / groups.
int64_t conv_flop_count(const ConvSpec& spec, int64_t out_h, int64_t out_w);

}  // namespace wrf
