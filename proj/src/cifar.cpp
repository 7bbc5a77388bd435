#include "co4/cifar.hpp"

#include <cstdio>
#include <filesystem>
#include <stdexcept>

#include "co4/rng.hpp"

namespace co4 {

void read_cifar10(const std::string& path, CifarData& out) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) throw std::runtime_error("read_cifar10: cannot open " + path);
  std::fseek(f, 0, SEEK_END);
  const long size = std::ftell(f);
  std::fseek(f, 0, SEEK_SET);
  if (size <= 0 || size % kCifarRecord != 0) {
    std::fclose(f);
    throw std::runtime_error("read_cifar10: " + path + " has " + std::to_string(size) +
                             " bytes, not a multiple of " + std::to_string(kCifarRecord));
  }
  const long records = size / kCifarRecord;
  std::vector<unsigned char> rec(kCifarRecord);
  out.pixels.reserve(out.pixels.size() + records * kCifarPixels);
  out.labels.reserve(out.labels.size() + records);
  for (long r = 0; r < records; ++r) {
    if (std::fread(rec.data(), 1, kCifarRecord, f) != static_cast<std::size_t>(kCifarRecord)) {
      std::fclose(f);
      throw std::runtime_error("read_cifar10: short read in " + path);
    }
    if (rec[0] > 9) {
      std::fclose(f);
      throw std::runtime_error("read_cifar10: label " + std::to_string(rec[0]) +
                               " out of range in " + path);
    }
    out.labels.push_back(rec[0]);
    for (int i = 0; i < kCifarPixels; ++i)
      out.pixels.push_back(static_cast<float>(rec[1 + i]) / 255.0f);
  }
  std::fclose(f);
}

CifarData load_cifar_dir(const std::string& dir) {
  namespace fs = std::filesystem;
  CifarData data;
  std::vector<std::string> files;
  for (int i = 1; i <= 5; ++i) {
    const std::string p = dir + "/data_batch_" + std::to_string(i) + ".bin";
    if (fs::exists(p)) files.push_back(p);
  }
  if (fs::exists(dir + "/test_batch.bin")) files.push_back(dir + "/test_batch.bin");
  if (files.empty())
    throw std::runtime_error("load_cifar_dir: no data_batch_*.bin in " + dir);
  for (const auto& p : files) read_cifar10(p, data);
  return data;
}

Tensor extract_patches(const float* image, int patch_size) {
  if (patch_size <= 0 || kCifarDim % patch_size != 0)
    throw std::invalid_argument("extract_patches: patch size " + std::to_string(patch_size) +
                                " does not divide extent " + std::to_string(kCifarDim));
  const int per_side = kCifarDim / patch_size;
  const int n = per_side * per_side;
  const int dim = patch_size * patch_size * 3;
  Tensor out = Tensor::zeros({n, dim});
  double* od = out.data->data();
  for (int pr = 0; pr < per_side; ++pr)
    for (int pc = 0; pc < per_side; ++pc) {
      double* dst = od + static_cast<std::size_t>(pr * per_side + pc) * dim;
      int w = 0;
      for (int y = 0; y < patch_size; ++y)
        for (int x = 0; x < patch_size; ++x) {
          const int row = pr * patch_size + y;
          const int col = pc * patch_size + x;
          for (int ch = 0; ch < 3; ++ch)
            dst[w++] = image[ch * kCifarDim * kCifarDim + row * kCifarDim + col];
        }
    }
  return out;
}

std::vector<float> assemble_patches(const Tensor& patches, int patch_size) {
  const int per_side = kCifarDim / patch_size;
  const int dim = patch_size * patch_size * 3;
  std::vector<float> img(kCifarPixels, 0.0f);
  const double* pd = patches.data->data();
  for (int pr = 0; pr < per_side; ++pr)
    for (int pc = 0; pc < per_side; ++pc) {
      const double* src = pd + static_cast<std::size_t>(pr * per_side + pc) * dim;
      int w = 0;
      for (int y = 0; y < patch_size; ++y)
        for (int x = 0; x < patch_size; ++x) {
          const int row = pr * patch_size + y;
          const int col = pc * patch_size + x;
          for (int ch = 0; ch < 3; ++ch)
            img[ch * kCifarDim * kCifarDim + row * kCifarDim + col] =
                static_cast<float>(src[w++]);
        }
    }
  return img;
}

std::vector<float> hflip(const std::vector<float>& image) {
  std::vector<float> out(kCifarPixels);
  for (int ch = 0; ch < 3; ++ch)
    for (int r = 0; r < kCifarDim; ++r)
      for (int c = 0; c < kCifarDim; ++c)
        out[ch * kCifarDim * kCifarDim + r * kCifarDim + c] =
            image[ch * kCifarDim * kCifarDim + r * kCifarDim + (kCifarDim - 1 - c)];
  return out;
}

std::vector<float> augment(const std::vector<float>& image, std::uint64_t seed) {
  constexpr int kPad = 4;
  Rng rng(Rng::derive(seed, 0xa060));
  std::vector<float> img = rng.coin() ? hflip(image) : image;
  const int dy = static_cast<int>(rng.below(2 * kPad + 1)) - kPad;
  const int dx = static_cast<int>(rng.below(2 * kPad + 1)) - kPad;
  std::vector<float> out(kCifarPixels, 0.0f);
  for (int ch = 0; ch < 3; ++ch)
    for (int r = 0; r < kCifarDim; ++r) {
      const int sr = r + dy;
      if (sr < 0 || sr >= kCifarDim) continue;
      for (int c = 0; c < kCifarDim; ++c) {
        const int sc = c + dx;
        if (sc < 0 || sc >= kCifarDim) continue;
        out[ch * kCifarDim * kCifarDim + r * kCifarDim + c] =
            img[ch * kCifarDim * kCifarDim + sr * kCifarDim + sc];
      }
    }
  return out;
}

}  // namespace co4
