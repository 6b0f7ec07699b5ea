#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "wrf/config.hpp"
#include "wrf/tensor.hpp"

namespace wrf {

struct TensorRecord {
    std::string name;
    Tensor tensor;
};

// Named-tensor container with a bit-exact little-endian file layout:
//   "WRF1" | u32 version | u32 mode | u32 count |
//   per tensor: u32 name_len, name, u32 ndim, u32 dims[], u8 dtype(0=f32), payload
class WeightContainer {
public:
    WeightContainer() = default;
    explicit WeightContainer(Mode mode) : mode_(mode) {}

    Mode mode() const { return mode_; }
    void set_mode(Mode mode) { mode_ = mode; }
    uint32_t version() const { return version_; }

    void add(std::string name, Tensor tensor);
    bool contains(const std::string& name) const { return index_.count(name) != 0; }
    const Tensor& get(const std::string& name) const;  // throws on missing
    Tensor& get_mutable(const std::string& name);
    const std::vector<TensorRecord>& records() const { return records_; }
    size_t size() const { return records_.size(); }
    int64_t total_elements() const;

    void save(const std::string& path) const;
    static WeightContainer load(const std::string& path);

private:
    std::vector<TensorRecord> records_;
    std::unordered_map<std::string, size_t> index_;
    Mode mode_ = Mode::branched;
    uint32_t version_ = 1;
};

// Deterministic branched-mode weights. Each tensor gets its own splitmix64
// stream seeded from (seed, name), so edits never perturb other tensors.
// Conv/linear weights ~ U(-a, a) with a = sqrt(6/fan_in); biases 0;
// BN gamma 1, beta 0, mean ~ U(-0.1, 0.1), var ~ U(0.5, 1.5);
// layer scale = layer_scale_init.
WeightContainer rand_weights(const RunConfig& config, uint64_t seed);

// Collapse every Rep block; non-Rep records are copied bit-exactly.
// The result is validated against the fused parameter manifest.
WeightContainer fuse_weights(const WeightContainer& branched, const RunConfig& config);

// Check a container holds exactly the manifest record set (names + shapes).
void validate_container(const WeightContainer& container, const RunConfig& config);

struct RepBlockDesc;
struct BranchedConvBlock;

// Rebuild the in-memory block for one RepBlockDesc from container records.
BranchedConvBlock read_branched_block(const WeightContainer& container, const RepBlockDesc& desc);

}  // namespace wrf
