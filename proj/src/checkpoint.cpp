#include "seea/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace seea {

namespace {

constexpr char kMagic[4] = {'S', 'E', 'E', 'A'};

template <typename T>
const char* dtype_name();
template <>
const char* dtype_name<float>() {
  return "f32";
}
template <>
const char* dtype_name<double>() {
  return "f64";
}

void put_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

uint32_t get_u32(const std::string& buf, size_t at) {
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    v |= static_cast<uint32_t>(static_cast<unsigned char>(buf[at + i])) << (8 * i);
  }
  return v;
}

}  // namespace

template <typename T>
void save_checkpoint(const ParameterStore<T>& params, const nlohmann::ordered_json& config,
                     const std::string& path) {
  nlohmann::ordered_json header;
  header["config"] = config;
  auto& tensors = header["tensors"] = nlohmann::ordered_json::array();
  uint64_t offset = 0;
  for (const auto& e : params) {
    const uint64_t bytes = e.tensor.size() * sizeof(T);
    tensors.push_back({{"name", e.name},
                       {"dtype", dtype_name<T>()},
                       {"shape", e.tensor.shape()},
                       {"trainable", e.trainable},
                       {"byte_offset", offset},
                       {"byte_length", bytes}});
    offset += bytes;
  }
  const std::string header_str = header.dump();

  std::string out;
  out.append(kMagic, 4);
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<uint32_t>(header_str.size()));
  out += header_str;
  for (const auto& e : params) {
    const size_t at = out.size();
    out.resize(at + e.tensor.size() * sizeof(T));
    std::memcpy(out.data() + at, e.tensor.data(), e.tensor.size() * sizeof(T));
  }

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open checkpoint for writing: " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("short write to checkpoint: " + path);
}

template <typename T>
LoadedCheckpoint<T> load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open checkpoint: " + path);
  std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

  if (buf.size() < 12 || std::memcmp(buf.data(), kMagic, 4) != 0) {
    throw IoError("not a checkpoint (bad magic): " + path);
  }
  const uint32_t version = get_u32(buf, 4);
  if (version != kCheckpointVersion) {
    throw IoError("incompatible checkpoint version " + std::to_string(version) + " (expected " +
                  std::to_string(kCheckpointVersion) + "): " + path);
  }
  const uint32_t header_len = get_u32(buf, 8);
  if (12ull + header_len > buf.size()) {
    throw IoError("truncated checkpoint header: " + path);
  }
  nlohmann::ordered_json header;
  try {
    header = nlohmann::ordered_json::parse(buf.substr(12, header_len));
  } catch (const nlohmann::json::exception& e) {
    throw IoError("corrupt checkpoint header in " + path + ": " + e.what());
  }

  const size_t data_start = 12ull + header_len;
  uint64_t declared = 0;
  for (const auto& t : header.at("tensors")) {
    declared = std::max<uint64_t>(declared, t.at("byte_offset").get<uint64_t>() +
                                                t.at("byte_length").get<uint64_t>());
  }
  if (data_start + declared != buf.size()) {
    throw IoError("checkpoint length mismatch (expected " +
                  std::to_string(data_start + declared) + " bytes, file has " +
                  std::to_string(buf.size()) + "): " + path);
  }

  LoadedCheckpoint<T> out;
  out.config = header.value("config", nlohmann::ordered_json::object());
  for (const auto& t : header.at("tensors")) {
    const std::string name = t.at("name").get<std::string>();
    const std::string dtype = t.at("dtype").get<std::string>();
    if (dtype != dtype_name<T>()) {
      throw IoError("checkpoint tensor " + name + " has dtype " + dtype + ", expected " +
                    dtype_name<T>() + ": " + path);
    }
    const Shape shape = t.at("shape").get<Shape>();
    const uint64_t offset = t.at("byte_offset").get<uint64_t>();
    const uint64_t length = t.at("byte_length").get<uint64_t>();
    if (length != shape_numel(shape) * sizeof(T)) {
      throw IoError("checkpoint tensor " + name + " declares shape " + shape_str(shape) +
                    " but " + std::to_string(length) + " bytes: " + path);
    }
    Tensor<T> tensor(shape);
    std::memcpy(tensor.data(), buf.data() + data_start + offset, length);
    out.params.add(name, std::move(tensor), t.at("trainable").get<bool>());
  }
  return out;
}

template void save_checkpoint<float>(const ParameterStore<float>&, const nlohmann::ordered_json&,
                                     const std::string&);
template void save_checkpoint<double>(const ParameterStore<double>&,
                                      const nlohmann::ordered_json&, const std::string&);
template LoadedCheckpoint<float> load_checkpoint<float>(const std::string&);
template LoadedCheckpoint<double> load_checkpoint<double>(const std::string&);

}  // namespace seea
