#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "co4/tensor.hpp"

namespace co4 {

// CIFAR-10 binary batch layout: 3073-byte records, one label byte followed
// by 3072 pixel bytes (channel-planar R, G, B, each 32×32 row-major).
constexpr int kCifarDim = 32;
constexpr int kCifarPixels = 3 * kCifarDim * kCifarDim;
constexpr int kCifarRecord = 1 + kCifarPixels;

struct CifarData {
  std::vector<float> pixels;  // count × 3072, planar, scaled to [0,1]
  std::vector<int> labels;

  int count() const { return static_cast<int>(labels.size()); }
  const float* image(int i) const { return pixels.data() + static_cast<std::size_t>(i) * kCifarPixels; }
};

// Decode one batch file; appends to `out`. Throws on truncated records or
// labels outside 0..9.
void read_cifar10(const std::string& path, CifarData& out);

// Loads data_batch_*.bin (and test_batch.bin when present) from a directory.
CifarData load_cifar_dir(const std::string& dir);

// Non-overlapping patches in row-major patch order, each flattened
// channel-last per pixel; rows are (extent/patch_size)² vectors of length
// patch_size²·3. Throws when the extent is not divisible by patch_size.
Tensor extract_patches(const float* image, int patch_size = 4);

// Undo of extract_patches for the partition property.
std::vector<float> assemble_patches(const Tensor& patches, int patch_size = 4);

std::vector<float> hflip(const std::vector<float>& image);

// Horizontal flip with p=0.5 plus a random crop from a 4-pixel zero pad;
// deterministic per seed.
std::vector<float> augment(const std::vector<float>& image, std::uint64_t seed);

}  // namespace co4
