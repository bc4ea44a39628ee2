#include "fedat/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace fedat {
namespace {

constexpr const char* kMagic = "FEDAT-CKPT 1";

void put_le64(std::string& out, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xffu));
}

double get_le64(const unsigned char* p) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

}  // namespace

std::string encode_checkpoint(const Checkpoint& ckpt) {
  const ParamLayout layout = param_layout(ckpt.spec);
  if (static_cast<std::size_t>(ckpt.values.size()) != layout.size)
    throw Error("checkpoint values do not match the model layout");

  nlohmann::json header;
  header["tensor"] = ckpt.tensor;
  header["layer_sizes"] = ckpt.spec.layer_sizes;
  header["activation"] = to_string(ckpt.spec.activation);
  header["seed"] = ckpt.spec.seed;
  header["count"] = layout.size;
  auto& manifest = header["layout"] = nlohmann::json::array();
  for (std::size_t l = 0; l < layout.layers.size(); ++l) {
    const auto& s = layout.layers[l];
    manifest.push_back({{"layer", l},
                        {"weight_offset", s.weight_offset},
                        {"weight_shape", {s.fan_in, s.fan_out}},
                        {"bias_offset", s.bias_offset},
                        {"bias_len", s.fan_out}});
  }

  std::string out = std::string(kMagic) + "\n" + header.dump() + "\n";
  out.reserve(out.size() + 8 * layout.size);
  for (Eigen::Index i = 0; i < ckpt.values.size(); ++i) put_le64(out, ckpt.values[i]);
  return out;
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  const auto first = bytes.find('\n');
  if (first == std::string::npos || bytes.compare(0, first, kMagic) != 0)
    throw Error("not a fedat checkpoint");
  const auto second = bytes.find('\n', first + 1);
  if (second == std::string::npos) throw Error("truncated checkpoint header");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(first + 1, second - first - 1));
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed checkpoint header: ") + e.what());
  }

  Checkpoint ckpt;
  try {
    ckpt.tensor = header.at("tensor").get<std::string>();
    ckpt.spec.layer_sizes = header.at("layer_sizes").get<std::vector<int>>();
    ckpt.spec.activation = activation_from_string(header.at("activation").get<std::string>());
    ckpt.spec.seed = header.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed checkpoint header: ") + e.what());
  }
  const ParamLayout layout = param_layout(ckpt.spec);
  if (header.value("count", std::size_t{0}) != layout.size)
    throw Error("checkpoint count does not match its layer sizes");

  const std::size_t payload = bytes.size() - (second + 1);
  if (payload != 8 * layout.size) throw Error("checkpoint payload has wrong length");
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + second + 1);
  ckpt.values.resize(static_cast<Eigen::Index>(layout.size));
  for (std::size_t i = 0; i < layout.size; ++i) ckpt.values[static_cast<Eigen::Index>(i)] = get_le64(p + 8 * i);
  return ckpt;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + tmp.string() + " for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw Error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  write_file_atomic(path, encode_checkpoint(ckpt));
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return decode_checkpoint(buf.str());
}

}  // namespace fedat
