#include "ntiqa/serialize.hpp"

#include <cstring>
#include <fstream>

namespace ntiqa {

namespace {

constexpr char kMagic[4] = {'N', 'T', 'I', 'Q'};

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<uint8_t>& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

void put_f64(std::vector<uint8_t>& out, double d) {
  uint64_t v;
  std::memcpy(&v, &d, 8);
  put_u64(out, v);
}

struct Reader {
  const uint8_t* p;
  size_t left;
  std::string context;

  void need(size_t n) const {
    if (left < n) throw Error(context + ": truncated tensor container");
  }
  uint32_t u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(p[i]) << (8 * i);
    p += 4;
    left -= 4;
    return v;
  }
  uint64_t u64() {
    need(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(p[i]) << (8 * i);
    p += 8;
    left -= 8;
    return v;
  }
  double f64() {
    uint64_t v = u64();
    double d;
    std::memcpy(&d, &v, 8);
    return d;
  }
  std::string str(size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(p), n);
    p += n;
    left -= n;
    return s;
  }
};

}  // namespace

std::vector<uint8_t> encode_tensors(const NamedTensors& tensors) {
  std::vector<uint8_t> out;
  out.insert(out.end(), kMagic, kMagic + 4);
  put_u32(out, kTensorFormatVersion);
  put_u32(out, static_cast<uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    put_u32(out, static_cast<uint32_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    put_u32(out, static_cast<uint32_t>(t.shape().size()));
    for (int64_t d : t.shape()) put_u64(out, static_cast<uint64_t>(d));
    for (int64_t i = 0; i < t.size(); ++i) put_f64(out, t[i]);
  }
  return out;
}

NamedTensors decode_tensors(const uint8_t* data, size_t size,
                            const std::string& context) {
  Reader r{data, size, context};
  if (r.str(4) != std::string(kMagic, 4)) {
    throw Error(context + ": bad magic, not a tensor container");
  }
  uint32_t version = r.u32();
  if (version != kTensorFormatVersion) {
    throw Error(context + ": unsupported format version " + std::to_string(version));
  }
  uint32_t count = r.u32();
  NamedTensors out;
  out.reserve(count);
  for (uint32_t k = 0; k < count; ++k) {
    std::string name = r.str(r.u32());
    uint32_t rank = r.u32();
    Shape shape(rank);
    for (uint32_t i = 0; i < rank; ++i) shape[i] = static_cast<int64_t>(r.u64());
    int64_t n = numel(shape);
    std::vector<double> vals(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) vals[static_cast<size_t>(i)] = r.f64();
    out.emplace_back(std::move(name), Tensor(std::move(shape), std::move(vals)));
  }
  if (r.left != 0) throw Error(context + ": trailing bytes after tensors");
  return out;
}

void save_tensors(const std::string& path, const NamedTensors& tensors) {
  auto bytes = encode_tensors(tensors);
  write_file(path, bytes.data(), bytes.size());
}

NamedTensors load_tensors(const std::string& path) {
  auto bytes = read_file(path);
  return decode_tensors(bytes.data(), bytes.size(), path);
}

void save_tensor(const std::string& path, const std::string& name,
                 const Tensor& t) {
  save_tensors(path, {{name, t}});
}

Tensor load_tensor(const std::string& path, const std::string& name) {
  auto tensors = load_tensors(path);
  for (auto& [n, t] : tensors) {
    if (n == name) return std::move(t);
  }
  throw Error(path + ": tensor '" + name + "' not found");
}

std::vector<uint8_t> read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open " + path);
  f.seekg(0, std::ios::end);
  std::streamoff n = f.tellg();
  f.seekg(0);
  std::vector<uint8_t> bytes(static_cast<size_t>(n));
  if (n > 0) f.read(reinterpret_cast<char*>(bytes.data()), n);
  if (!f) throw Error("failed to read " + path);
  return bytes;
}

void write_file(const std::string& path, const void* data, size_t size) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot write " + path);
  f.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(size));
  if (!f) throw Error("failed to write " + path);
}

}  // namespace ntiqa
