#include "wrf/weights.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "wrf/model_desc.hpp"
#include "wrf/reparam.hpp"
#include "wrf/rng.hpp"

namespace wrf {

void WeightContainer::add(std::string name, Tensor tensor) {
    if (index_.count(name)) throw Error("weights: duplicate tensor name '" + name + "'");
    index_.emplace(name, records_.size());
    records_.push_back(TensorRecord{std::move(name), std::move(tensor)});
}

const Tensor& WeightContainer::get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw Error("weights: missing tensor '" + name + "'");
    return records_[it->second].tensor;
}

Tensor& WeightContainer::get_mutable(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw Error("weights: missing tensor '" + name + "'");
    return records_[it->second].tensor;
}

int64_t WeightContainer::total_elements() const {
    int64_t n = 0;
    for (const TensorRecord& r : records_) n += r.tensor.numel();
    return n;
}

namespace {

void put_u32(std::ostream& out, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t take_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw Error("weights: truncated file");
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

void put_f32_payload(std::ostream& out, const float* data, int64_t count) {
    if constexpr (std::endian::native == std::endian::little) {
        out.write(reinterpret_cast<const char*>(data), count * 4);
    } else {
        for (int64_t i = 0; i < count; ++i) put_u32(out, std::bit_cast<uint32_t>(data[i]));
    }
}

void take_f32_payload(std::istream& in, float* data, int64_t count) {
    if constexpr (std::endian::native == std::endian::little) {
        in.read(reinterpret_cast<char*>(data), count * 4);
        if (!in) throw Error("weights: truncated tensor payload");
    } else {
        for (int64_t i = 0; i < count; ++i) data[i] = std::bit_cast<float>(take_u32(in));
    }
}

}  // namespace

void WeightContainer::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("weights: cannot write '" + path + "'");
    out.write("WRF1", 4);
    put_u32(out, version_);
    put_u32(out, static_cast<uint32_t>(mode_));
    put_u32(out, static_cast<uint32_t>(records_.size()));
    for (const TensorRecord& r : records_) {
        put_u32(out, static_cast<uint32_t>(r.name.size()));
        out.write(r.name.data(), static_cast<std::streamsize>(r.name.size()));
        put_u32(out, static_cast<uint32_t>(r.tensor.rank()));
        for (int i = 0; i < r.tensor.rank(); ++i) put_u32(out, static_cast<uint32_t>(r.tensor.size(i)));
        out.put(0);  // dtype: f32
        put_f32_payload(out, r.tensor.data(), r.tensor.numel());
    }
    if (!out) throw Error("weights: write failed for '" + path + "'");
}

WeightContainer WeightContainer::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("weights: cannot open '" + path + "'");
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "WRF1", 4) != 0)
        throw Error("weights: bad magic in '" + path + "' (expected WRF1)");
    WeightContainer c;
    c.version_ = take_u32(in);
    if (c.version_ != 1) throw Error("weights: unsupported version " + std::to_string(c.version_));
    const uint32_t mode = take_u32(in);
    if (mode > 1) throw Error("weights: invalid mode field " + std::to_string(mode));
    c.mode_ = static_cast<Mode>(mode);
    const uint32_t count = take_u32(in);
    for (uint32_t t = 0; t < count; ++t) {
        const uint32_t name_len = take_u32(in);
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        if (!in) throw Error("weights: truncated tensor name");
        const uint32_t ndim = take_u32(in);
        if (ndim == 0 || ndim > 8) throw Error("weights: invalid rank for '" + name + "'");
        std::vector<int> shape(ndim);
        for (uint32_t i = 0; i < ndim; ++i) shape[i] = static_cast<int>(take_u32(in));
        const int dtype = in.get();
        if (dtype != 0) throw Error("weights: unsupported dtype for '" + name + "'");
        Tensor tensor(shape);
        take_f32_payload(in, tensor.data(), tensor.numel());
        c.add(std::move(name), std::move(tensor));
    }
    return c;
}

WeightContainer rand_weights(const RunConfig& config, uint64_t seed) {
    config.validate();
    WeightContainer c(Mode::branched);
    for (const ParamSpec& spec : parameter_manifest(config, Mode::branched)) {
        Tensor t(spec.shape);
        SplitMix64 rng(tensor_stream_seed(seed, spec.name));
        switch (spec.init) {
            case ParamInit::conv_weight:
            case ParamInit::linear_weight: {
                const float a = std::sqrt(6.0f / static_cast<float>(spec.fan_in));
                for (int64_t i = 0; i < t.numel(); ++i) t.data()[i] = rng.uniform(-a, a);
                break;
            }
            case ParamInit::zero_bias:
            case ParamInit::bn_beta:
            case ParamInit::ln_beta:
                break;  // zeros
            case ParamInit::bn_gamma:
            case ParamInit::ln_gamma:
                for (int64_t i = 0; i < t.numel(); ++i) t.data()[i] = 1.0f;
                break;
            case ParamInit::bn_mean:
                // non-neutral statistics keep fusion equivalence a real test
                for (int64_t i = 0; i < t.numel(); ++i) t.data()[i] = rng.uniform(-0.1f, 0.1f);
                break;
            case ParamInit::bn_var:
                for (int64_t i = 0; i < t.numel(); ++i) t.data()[i] = rng.uniform(0.5f, 1.5f);
                break;
            case ParamInit::layer_scale:
                for (int64_t i = 0; i < t.numel(); ++i) t.data()[i] = config.model.layer_scale_init;
                break;
        }
        c.add(spec.name, std::move(t));
    }
    return c;
}

namespace {

BatchNormParams read_bn(const WeightContainer& c, const std::string& prefix) {
    return BatchNormParams{c.get(prefix + ".gamma"), c.get(prefix + ".beta"), c.get(prefix + ".mean"),
                           c.get(prefix + ".var"), 1e-5f};
}

}  // namespace

// Reconstruct the in-memory block from container records (shared with model binding).
BranchedConvBlock read_branched_block(const WeightContainer& c, const RepBlockDesc& desc) {
    BranchedConvBlock block;
    block.in_channels = desc.in_channels;
    block.out_channels = desc.out_channels;
    block.target_kernel = desc.target_kernel;
    block.stride = desc.stride;
    block.groups = desc.groups;
    for (size_t i = 0; i < desc.branch_kernels.size(); ++i) {
        const std::string bp = desc.prefix + ".b" + std::to_string(i);
        block.branches.push_back(ConvBranch{c.get(bp + ".weight"), std::nullopt, read_bn(c, bp + ".bn")});
    }
    if (desc.identity) block.identity_bn = read_bn(c, desc.prefix + ".id.bn");
    if (desc.layer_scale) block.layer_scale = c.get(desc.prefix + ".layer_scale");
    return block;
}

void validate_container(const WeightContainer& container, const RunConfig& config) {
    const auto manifest = parameter_manifest(config, container.mode());
    if (manifest.size() != container.size())
        throw Error("weights: container has " + std::to_string(container.size()) + " records, manifest expects " +
                    std::to_string(manifest.size()));
    for (const ParamSpec& spec : manifest) {
        const Tensor& t = container.get(spec.name);
        if (t.shape() != spec.shape)
            throw Error("weights: tensor '" + spec.name + "' has shape " + shape_str(t.shape()) +
                        ", expected " + shape_str(spec.shape));
    }
}

WeightContainer fuse_weights(const WeightContainer& branched, const RunConfig& config) {
    if (branched.mode() != Mode::branched)
        throw Error("fuse_weights: input container is not branched-mode");
    validate_container(branched, config);

    const ModelDesc desc = describe_model(config);
    WeightContainer fused(Mode::fused);
    for (const RepBlockDesc& b : desc.rep_blocks) {
        FusedConv fc = fuse_block(read_branched_block(branched, b));
        fused.add(b.prefix + ".weight", std::move(fc.weight));
        fused.add(b.prefix + ".bias", std::move(fc.bias));
    }
    // everything else passes through bit-exactly
    for (const ParamSpec& spec : parameter_manifest(config, Mode::fused))
        if (!fused.contains(spec.name)) fused.add(spec.name, branched.get(spec.name));

    validate_container(fused, config);
    return fused;
}

}  // namespace wrf
