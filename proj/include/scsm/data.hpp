#pragma once

#include "scsm/smg.hpp"
#include "scsm/tensor.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace scsm::data {

// Class indices of the synthetic scenes.
enum SceneClass : int { kBackground = 0, kRoad = 1, kBuilding = 2, kCar = 3 };
inline constexpr int kNumClasses = 4;

enum class SceneMode { Rural, Urban };

struct SceneSample {
    Tensor image;          // {3,H,W} in [0,1]
    smg::ArgmaxMask mask;  // H x W class indices
    SceneMode mode = SceneMode::Rural;
};

// Deterministic procedural scene: axis-aligned road polylines, cars only on
// roads, buildings (urban) only near roads, per-class color jitter.
SceneSample generate_scene(std::uint64_t seed, SceneMode mode, int height, int width);

// Alternates rural/urban by index.
std::vector<SceneSample> generate_dataset(std::uint64_t seed, int count, int height, int width);

// "SCT1" tensor container: magic, one-byte rank, little-endian u32 extents,
// row-major little-endian f64 payload.
void write_tensor(const std::string& path, const Tensor& t);
Tensor read_tensor(const std::string& path);

// Binary PGM (P5), one byte per pixel = class index.
void write_mask(const std::string& path, const smg::ArgmaxMask& mask);
smg::ArgmaxMask read_mask(const std::string& path);

// Checkpoint: "SCK1" magic, u32 config digest, u32 entry count, then per
// entry a u16 name length, the name, and an SCT1 tensor blob.
void write_checkpoint(const std::string& path, std::uint32_t config_digest,
                      const std::map<std::string, Tensor>& tensors);
std::map<std::string, Tensor> read_checkpoint(const std::string& path,
                                              std::uint32_t* config_digest = nullptr);

// FNV-1a over the canonical config text, used as the checkpoint digest.
std::uint32_t fnv1a(const std::string& text);

}  // namespace scsm::data
