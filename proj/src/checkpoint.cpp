#include "neurolip/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <iterator>

#include "neurolip/error.hpp"

namespace neurolip {

namespace {

constexpr char kMagic[8] = {'N', 'L', 'T', 'E', 'N', 'S', '0', '1'};

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint64_t get_u64(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t{p[i]} << (8 * i);
  return v;
}

void put_f32(std::vector<std::uint8_t>& out, float f) {
  std::uint32_t u;
  std::memcpy(&u, &f, 4);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(u >> (8 * i)));
}

float get_f32(const std::uint8_t* p) {
  std::uint32_t u = 0;
  for (int i = 0; i < 4; ++i) u |= std::uint32_t{p[i]} << (8 * i);
  float f;
  std::memcpy(&f, &u, 4);
  return f;
}

}  // namespace

const Tensor<float>* TensorFile::find(const std::string& name) const {
  for (const auto& [n, t] : tensors)
    if (n == name) return &t;
  return nullptr;
}

std::vector<std::uint8_t> encode_tensor_file(const TensorFile& file) {
  nlohmann::ordered_json index;
  index["meta"] = file.meta;
  index["tensors"] = nlohmann::ordered_json::array();
  std::uint64_t offset = 0;
  for (const auto& [name, t] : file.tensors) {
    nlohmann::ordered_json e;
    e["name"] = name;
    e["shape"] = t.shape();
    e["offset"] = offset;
    e["nbytes"] = t.size() * 4;
    index["tensors"].push_back(e);
    offset += t.size() * 4;
  }
  const std::string header = index.dump();
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put_u64(out, header.size());
  out.insert(out.end(), header.begin(), header.end());
  out.reserve(out.size() + offset);
  for (const auto& entry : file.tensors)
    for (float v : entry.second.vec()) put_f32(out, v);
  return out;
}

TensorFile decode_tensor_file(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 8) != 0) throw ParseError(0, "not a tensor file");
  const std::uint64_t hlen = get_u64(bytes.data() + 8);
  if (bytes.size() < 16 + hlen) throw ParseError(0, "truncated tensor file header");
  nlohmann::json index;
  try {
    index = nlohmann::json::parse(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(hlen));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(0, std::string("bad tensor index: ") + e.what());
  }
  TensorFile file;
  file.meta = index.value("meta", nlohmann::json::object());
  const std::uint8_t* payload = bytes.data() + 16 + hlen;
  const std::size_t payload_size = bytes.size() - 16 - hlen;
  std::size_t record = 0;
  for (const auto& e : index.at("tensors")) {
    Shape shape = e.at("shape").get<Shape>();
    const std::uint64_t offset = e.at("offset").get<std::uint64_t>();
    const std::uint64_t nbytes = e.at("nbytes").get<std::uint64_t>();
    if (nbytes != shape_size(shape) * 4 || offset + nbytes > payload_size)
      throw ParseError(record, "tensor payload out of range");
    Tensor<float> t(shape);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = get_f32(payload + offset + 4 * i);
    file.tensors.emplace_back(e.at("name").get<std::string>(), std::move(t));
    ++record;
  }
  return file;
}

void save_tensor_file(const TensorFile& file, const std::filesystem::path& path) {
  const auto bytes = encode_tensor_file(file);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

TensorFile load_tensor_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return decode_tensor_file(bytes);
}

TensorFile snapshot_state(const StateRefs<float>& refs) {
  TensorFile file;
  for (const auto* p : refs.params) file.tensors.emplace_back(p->name, p->value);
  for (const auto& [name, t] : refs.buffers) file.tensors.emplace_back(name, *t);
  return file;
}

void restore_state(const TensorFile& file, const StateRefs<float>& refs) {
  auto copy = [&](const std::string& name, Tensor<float>& dst) {
    const auto* src = file.find(name);
    if (!src) throw ConfigError("checkpoint is missing tensor " + name);
    if (src->shape() != dst.shape())
      throw ConfigError("checkpoint tensor " + name + " has shape " + shape_string(src->shape()) + ", expected " +
                        shape_string(dst.shape()));
    dst = *src;
  };
  for (auto* p : refs.params) copy(p->name, p->value);
  for (const auto& [name, t] : refs.buffers) copy(name, *t);
}

std::string shape_string(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

}  // namespace neurolip
