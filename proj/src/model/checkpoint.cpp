#include "sbd/model/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

#include "sbd/errors.hpp"

namespace sbd {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'S', 'B', 'D', '1'};

template <std::floating_point T>
constexpr const char* dtype_name() {
  return sizeof(T) == 4 ? "f32" : "f64";
}

struct RawFile {
  nlohmann::json header;
  std::vector<char> payload;
};

RawFile read_raw(const std::filesystem::path& path, bool with_payload) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  char magic[4];
  std::uint64_t len = 0;
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  if (!in || std::memcmp(magic, kMagic, 4) != 0) throw IoError(path.string() + " is not an SBD1 checkpoint");
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw IoError("truncated checkpoint header in " + path.string());
  RawFile raw;
  try {
    raw.header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw IoError("corrupt checkpoint header: " + std::string(e.what()));
  }
  if (with_payload) raw.payload.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  return raw;
}

}  // namespace

template <std::floating_point T>
void save_checkpoint(const std::filesystem::path& path, const ModelParams<T>& params, const nlohmann::json& meta) {
  nlohmann::json manifest = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& [name, t] : params.named()) {
    const std::uint64_t nbytes = t->size() * sizeof(T);
    manifest.push_back({{"name", name}, {"shape", t->shape()}, {"dtype", dtype_name<T>()}, {"offset", offset},
                        {"nbytes", nbytes}});
    offset += nbytes;
  }
  nlohmann::json header = {{"format", "SBD1"},
                           {"config", params.config},
                           {"dtype", dtype_name<T>()},
                           {"tensors", manifest},
                           {"meta", meta}};
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  const std::uint64_t len = text.size();
  out.write(kMagic, 4);
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& [name, t] : params.named()) {
    out.write(reinterpret_cast<const char*>(t->raw()), static_cast<std::streamsize>(t->size() * sizeof(T)));
  }
  if (!out) throw IoError("write failed for checkpoint " + path.string());
}

template <std::floating_point T>
ModelParams<T> load_checkpoint(const std::filesystem::path& path, nlohmann::json* meta) {
  RawFile raw = read_raw(path, true);
  const auto& h = raw.header;
  ModelConfig config;
  try {
    config = h.at("config").get<ModelConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError("checkpoint config unreadable: " + std::string(e.what()));
  }
  config.validate();
  const std::string dtype = h.value("dtype", "");
  if (dtype != "f32" && dtype != "f64") throw IoError("checkpoint dtype '" + dtype + "' unsupported");

  ModelParams<T> params = ModelParams<T>::zeros(config);
  auto named = params.named();
  const auto& tensors = h.at("tensors");
  if (tensors.size() != named.size()) throw IoError("checkpoint tensor count does not match its config");
  for (std::size_t i = 0; i < named.size(); ++i) {
    const auto& entry = tensors[i];
    Tensor<T>& dst = *named[i].second;
    if (entry.at("name").get<std::string>() != named[i].first || entry.at("shape").get<Shape>() != dst.shape()) {
      throw IoError("checkpoint tensor " + entry.at("name").get<std::string>() + " does not match the model layout");
    }
    const auto off = entry.at("offset").get<std::uint64_t>();
    const auto nbytes = entry.at("nbytes").get<std::uint64_t>();
    const std::size_t width = dtype == "f32" ? 4 : 8;
    if (nbytes != dst.size() * width || off + nbytes > raw.payload.size()) {
      throw IoError("checkpoint payload truncated at tensor " + named[i].first);
    }
    const char* src = raw.payload.data() + off;
    for (std::size_t j = 0; j < dst.size(); ++j) {
      if (width == 4) {
        float v;
        std::memcpy(&v, src + j * 4, 4);
        dst[j] = static_cast<T>(v);
      } else {
        double v;
        std::memcpy(&v, src + j * 8, 8);
        dst[j] = static_cast<T>(v);
      }
    }
  }
  if (meta) *meta = h.value("meta", nlohmann::json::object());
  return params;
}

nlohmann::json read_checkpoint_header(const std::filesystem::path& path) {
  return read_raw(path, false).header;
}

template void save_checkpoint<float>(const std::filesystem::path&, const ModelParams<float>&, const nlohmann::json&);
template void save_checkpoint<double>(const std::filesystem::path&, const ModelParams<double>&, const nlohmann::json&);
template ModelParams<float> load_checkpoint<float>(const std::filesystem::path&, nlohmann::json*);
template ModelParams<double> load_checkpoint<double>(const std::filesystem::path&, nlohmann::json*);

}  // namespace sbd
