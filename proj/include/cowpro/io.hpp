#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "cowpro/tensor.hpp"

// Little-endian binary containers. Volumes carry image/mask/label data;
// checkpoints carry trained weights plus the exact training configuration so
// evaluation can replay it. Both round-trip bitwise.

namespace cowpro {

enum class DType : std::uint8_t { kFloat32 = 0, kUint8 = 1 };

struct Volume {
    DType dtype = DType::kFloat32;
    std::vector<std::uint32_t> dims;
    std::vector<float> f32;
    std::vector<std::uint8_t> u8;

    std::int64_t count() const {
        std::int64_t n = 1;
        for (auto d : dims) n *= static_cast<std::int64_t>(d);
        return dims.empty() ? 0 : n;
    }
};

void write_volume(const std::filesystem::path& path, const Volume& volume);
Volume read_volume(const std::filesystem::path& path);

Volume volume_from_tensor(const Tensor32& t);
Tensor32 tensor_from_volume(const Volume& v);

// Named float32 parameter blobs in checkpoint order.
struct CheckpointParam {
    std::string name;
    Shape shape;
    std::vector<float> data;
};

struct Checkpoint {
    std::uint64_t iteration = 0;
    std::string config_text;  // key=value block, same grammar as config files
    std::vector<CheckpointParam> params;
};

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::filesystem::path& path);

}  // namespace cowpro
