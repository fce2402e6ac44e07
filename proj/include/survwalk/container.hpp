#pragma once

#include <string>
#include <vector>

#include "survwalk/config.hpp"
#include "survwalk/tensor.hpp"

namespace survwalk {

// On-disk layout: "SVHW" magic, one version byte, u32 little-endian header
// length, a key-value text header (kind, CRC32, config echo, tensor index),
// then all tensors as raw little-endian f32 in index order.
inline constexpr char kContainerMagic[4] = {'S', 'V', 'H', 'W'};
inline constexpr uint8_t kContainerVersion = 1;

struct NamedTensor {
    std::string name;  // no dots; doubles as a header block key
    Tensor<float> tensor;
};

struct Container {
    std::string kind;  // "checkpoint" | "dataset"
    Kv meta;
    std::vector<NamedTensor> tensors;

    void write(const std::string& path) const;
    static Container read(const std::string& path);

    const Tensor<float>* find(const std::string& name) const;
    const Tensor<float>& require(const std::string& name) const;
};

}  // namespace survwalk
