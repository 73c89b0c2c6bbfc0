#pragma once

// AVT1 raw tensor files: magic "AVT1", u8 rank, rank x u32 little-endian
// extents, then f32 little-endian row-major payload. Shared by dataset
// files and checkpoints.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "avtca/tensor.hpp"

namespace avtca {
namespace io {

void write_avt1(std::ostream& os, const Shape& shape, const float* data);
void write_avt1_file(const std::string& path, const Shape& shape, const float* data);

struct RawTensor {
    Shape shape;
    std::vector<float> data;
};

RawTensor read_avt1(std::istream& is);
RawTensor read_avt1_file(const std::string& path);

template <typename S>
void save_tensor(const std::string& path, const Tensor<S>& t) {
    if constexpr (std::is_same_v<S, float>) {
        write_avt1_file(path, t.shape(), t.data().data());
    } else {
        std::vector<float> tmp(t.data().begin(), t.data().end());
        write_avt1_file(path, t.shape(), tmp.data());
    }
}

template <typename S>
Tensor<S> load_tensor(const std::string& path) {
    RawTensor raw = read_avt1_file(path);
    std::vector<S> data(raw.data.begin(), raw.data.end());
    return Tensor<S>::from(std::move(raw.shape), std::move(data));
}

}  // namespace io
}  // namespace avtca
