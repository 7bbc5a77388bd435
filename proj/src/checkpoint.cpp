#include "co4/checkpoint.hpp"

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <stdexcept>

#include "json.hpp"

namespace co4 {

namespace {
constexpr char kMagic[8] = {'C', 'O', '4', 'C', 'K', 'P', 'T', '1'};
constexpr int kVersion = 1;

struct FileCloser {
  std::FILE* f;
  ~FileCloser() {
    if (f) std::fclose(f);
  }
};
}  // namespace

void save_checkpoint(const ParamStore& params, const std::string& path) {
  nlohmann::json header;
  header["version"] = kVersion;
  nlohmann::json tensors = nlohmann::json::array();
  for (const auto& [name, t] : params.items) {
    nlohmann::json e;
    e["name"] = name;
    e["shape"] = t.shape;
    tensors.push_back(e);
  }
  header["tensors"] = tensors;
  const std::string hs = header.dump();

  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw std::runtime_error("save_checkpoint: cannot open " + path);
  FileCloser closer{f};
  std::fwrite(kMagic, 1, 8, f);
  const std::uint64_t len = hs.size();
  std::fwrite(&len, sizeof(len), 1, f);
  std::fwrite(hs.data(), 1, hs.size(), f);
  for (const auto& [name, t] : params.items)
    std::fwrite(t.data->data(), sizeof(double), t.size(), f);
}

void load_checkpoint(ParamStore& params, const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) throw std::runtime_error("load_checkpoint: cannot open " + path);
  FileCloser closer{f};
  char magic[8];
  if (std::fread(magic, 1, 8, f) != 8 || std::memcmp(magic, kMagic, 8) != 0)
    throw std::runtime_error("load_checkpoint: " + path + " is not a checkpoint file");
  std::uint64_t len = 0;
  if (std::fread(&len, sizeof(len), 1, f) != 1)
    throw std::runtime_error("load_checkpoint: truncated header in " + path);
  std::string hs(len, '\0');
  if (std::fread(hs.data(), 1, len, f) != len)
    throw std::runtime_error("load_checkpoint: truncated header in " + path);
  nlohmann::json header = nlohmann::json::parse(hs);
  if (header.at("version").get<int>() != kVersion)
    throw std::runtime_error("load_checkpoint: unsupported version in " + path);
  const auto& tensors = header.at("tensors");
  if (tensors.size() != params.items.size())
    throw std::runtime_error("load_checkpoint: " + path + " holds " +
                             std::to_string(tensors.size()) + " tensors, model has " +
                             std::to_string(params.items.size()));
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    const std::string name = tensors[i].at("name").get<std::string>();
    const std::vector<int> shape = tensors[i].at("shape").get<std::vector<int>>();
    const auto& [want_name, t] = params.items[i];
    if (name != want_name)
      throw std::runtime_error("load_checkpoint: tensor " + std::to_string(i) +
                               " is '" + name + "', model expects '" + want_name + "'");
    if (shape != t.shape)
      throw std::runtime_error("load_checkpoint: shape mismatch for '" + name +
                               "': file " + shape_str(shape) + ", model " +
                               shape_str(t.shape));
  }
  for (auto& [name, t] : params.items) {
    if (std::fread(t.data->data(), sizeof(double), t.size(), f) != t.size())
      throw std::runtime_error("load_checkpoint: truncated payload for '" + name + "'");
  }
}

}  // namespace co4
