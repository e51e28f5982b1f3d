// Copyright 2026 The chanprune Authors
// SPDX-License-Identifier: Apache-2.0

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "chanprune/errors.hpp"
#include "chanprune/model.hpp"

namespace chanprune {

namespace {

constexpr char kMagic[8] = {'C', 'H', 'P', 'R', 'C', 'K', 'P', 'T'};

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* c = static_cast<const unsigned char*>(p);
    buf_.insert(buf_.end(), c, c + n);
  }
  void u32(std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    bytes(b, 4);
  }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  std::vector<unsigned char>& buffer() { return buf_; }

 private:
  std::vector<unsigned char> buf_;
};

class Reader {
 public:
  Reader(const unsigned char* p, std::size_t n) : p_(p), n_(n) {}
  void need(std::size_t k) const {
    if (pos_ + k > n_) throw IntegrityError("checkpoint truncated");
  }
  std::uint32_t u32() {
    need(4);
    const unsigned char* b = p_ + pos_;
    pos_ += 4;
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
  }
  std::string str() {
    const std::uint32_t len = u32();
    need(len);
    std::string s(reinterpret_cast<const char*>(p_ + pos_), len);
    pos_ += len;
    return s;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  bool done() const { return pos_ == n_; }

 private:
  const unsigned char* p_;
  std::size_t n_;
  std::size_t pos_ = 0;
};

void write_tensor(Writer& w, const std::string& name, const Shape& shape,
                  std::span<const float> values) {
  w.str(name);
  w.u32(static_cast<std::uint32_t>(shape.size()));
  for (std::size_t d : shape) w.u32(static_cast<std::uint32_t>(d));
  for (float v : values) w.f32(v);
}

std::string manifest_text(const Network& model, const CheckpointMetadata& meta) {
  std::ostringstream m;
  m << "format-version=" << kCheckpointFormatVersion << '\n';
  m << "architecture=" << model.name() << '\n';
  m << "stage=" << meta.stage << '\n';
  m << "seed=" << meta.seed << '\n';
  m << "epoch=" << meta.epoch << '\n';
  m << "input=" << model.in_channels() << ',' << model.in_height() << ',' << model.in_width()
    << '\n';
  for (std::size_t i = 0; i < model.conv_layers().size(); ++i) {
    const auto& c = model.conv_layers()[i];
    m << "conv." << i << '=' << c.id << ',' << c.padding << ',' << c.pool << '\n';
  }
  for (std::size_t i = 0; i < model.dense_layers().size(); ++i) {
    m << "dense." << i << '=' << model.dense_layers()[i].id << '\n';
  }
  for (const auto& [k, v] : meta.extra) m << "meta." << k << '=' << v << '\n';
  return m.str();
}

std::map<std::string, std::string> parse_manifest(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw IntegrityError("malformed manifest line: " + line);
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  return out;
}

const std::string& required(const std::map<std::string, std::string>& kv, const std::string& k) {
  auto it = kv.find(k);
  if (it == kv.end()) throw IntegrityError("manifest missing key " + k);
  return it->second;
}

std::size_t to_size(const std::string& s) {
  try {
    std::size_t used = 0;
    const unsigned long long v = std::stoull(s, &used);
    if (used != s.size()) throw IntegrityError("bad integer in manifest: " + s);
    return static_cast<std::size_t>(v);
  } catch (const std::logic_error&) {
    throw IntegrityError("bad integer in manifest: " + s);
  }
}

}  // namespace

void save_checkpoint(const Network& model, const std::filesystem::path& path,
                     const CheckpointMetadata& metadata,
                     const std::map<std::string, Tensor>& extra_tensors) {
  Writer w;
  w.bytes(kMagic, sizeof kMagic);
  w.u32(kCheckpointFormatVersion);
  w.str(manifest_text(model, metadata));

  std::uint32_t count = 0;
  Writer body;
  for (const auto& c : model.conv_layers()) {
    write_tensor(body, c.id + ".weight", c.weight.shape(), c.weight.values());
    write_tensor(body, c.id + ".bias", {c.bias.size()}, c.bias);
    count += 2;
  }
  for (const auto& d : model.dense_layers()) {
    write_tensor(body, d.id + ".weight", d.weight.shape(), d.weight.values());
    write_tensor(body, d.id + ".bias", {d.bias.size()}, d.bias);
    count += 2;
  }
  for (const auto& [name, t] : extra_tensors) {
    write_tensor(body, "extra/" + name, t.shape(), t.values());
    ++count;
  }
  w.u32(count);
  w.bytes(body.buffer().data(), body.buffer().size());
  const auto& buf = w.buffer();
  const std::uint32_t crc = static_cast<std::uint32_t>(
      crc32(0L, buf.data(), static_cast<uInt>(buf.size())));
  w.u32(crc);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out.write(reinterpret_cast<const char*>(w.buffer().data()),
            static_cast<std::streamsize>(w.buffer().size()));
  if (!out) throw IoError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read checkpoint " + path.string());
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)),
                                 std::istreambuf_iterator<char>());
  if (buf.size() < sizeof kMagic + 12 || std::memcmp(buf.data(), kMagic, sizeof kMagic) != 0) {
    throw IntegrityError(path.string() + " is not a checkpoint archive");
  }
  const std::size_t body = buf.size() - 4;
  Reader trailer(buf.data() + body, 4);
  const std::uint32_t stored = trailer.u32();
  const auto actual = static_cast<std::uint32_t>(crc32(0L, buf.data(), static_cast<uInt>(body)));
  if (stored != actual) throw IntegrityError("checksum mismatch in " + path.string());

  Reader r(buf.data() + sizeof kMagic, body - sizeof kMagic);
  const std::uint32_t version = r.u32();
  if (version != kCheckpointFormatVersion) {
    throw IntegrityError("unsupported checkpoint format version " + std::to_string(version));
  }
  const auto kv = parse_manifest(r.str());

  std::map<std::string, Tensor> tensors;
  const std::uint32_t count = r.u32();
  for (std::uint32_t t = 0; t < count; ++t) {
    std::string name = r.str();
    const std::uint32_t rank = r.u32();
    if (rank > 8) throw IntegrityError("tensor " + name + " has implausible rank");
    Shape shape(rank);
    for (auto& d : shape) d = r.u32();
    const std::size_t n = shape_size(shape);
    r.need(n * 4);
    std::vector<float> values(n);
    for (auto& v : values) v = r.f32();
    tensors.emplace(std::move(name), Tensor(std::move(shape), std::move(values)));
  }
  if (!r.done()) throw IntegrityError("trailing bytes in " + path.string());

  auto take = [&](const std::string& name) -> Tensor {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw IntegrityError("checkpoint missing tensor " + name);
    Tensor t = std::move(it->second);
    tensors.erase(it);
    return t;
  };

  ArchitectureSpec spec;
  spec.name = required(kv, "architecture");
  const auto input = split(required(kv, "input"), ',');
  if (input.size() != 3) throw IntegrityError("bad input shape in manifest");
  spec.in_channels = to_size(input[0]);
  spec.in_height = to_size(input[1]);
  spec.in_width = to_size(input[2]);
  std::vector<Tensor> conv_w, conv_b, dense_w, dense_b;
  for (std::size_t i = 0; kv.count("conv." + std::to_string(i)); ++i) {
    const auto parts = split(kv.at("conv." + std::to_string(i)), ',');
    if (parts.size() != 3) throw IntegrityError("bad conv entry in manifest");
    Tensor w = take(parts[0] + ".weight");
    Tensor b = take(parts[0] + ".bias");
    if (w.rank() != 4 || w.dim(2) != w.dim(3)) {
      throw IntegrityError("conv weight " + parts[0] + " has bad shape");
    }
    spec.conv.push_back({parts[0], w.dim(0), w.dim(2), to_size(parts[1]), to_size(parts[2])});
    conv_w.push_back(std::move(w));
    conv_b.push_back(std::move(b));
  }
  for (std::size_t i = 0; kv.count("dense." + std::to_string(i)); ++i) {
    const std::string& id = kv.at("dense." + std::to_string(i));
    Tensor w = take(id + ".weight");
    Tensor b = take(id + ".bias");
    if (w.rank() != 2) throw IntegrityError("dense weight " + id + " has bad shape");
    spec.dense.push_back({id, w.dim(0)});
    dense_w.push_back(std::move(w));
    dense_b.push_back(std::move(b));
  }

  Checkpoint ck;
  ck.model = Network(spec);
  for (std::size_t i = 0; i < conv_w.size(); ++i) {
    auto& layer = ck.model.conv_layers()[i];
    require_same_shape(conv_w[i].shape(), layer.weight.shape(), "checkpoint " + layer.id);
    require_same_shape(conv_b[i].shape(), {layer.bias.size()}, "checkpoint " + layer.id);
    layer.weight = FilterTensor(layer.id, std::move(conv_w[i]));
    layer.bias.assign(conv_b[i].values().begin(), conv_b[i].values().end());
  }
  for (std::size_t i = 0; i < dense_w.size(); ++i) {
    auto& layer = ck.model.dense_layers()[i];
    if (dense_w[i].shape() != layer.weight.shape()) {
      throw StructuralError("checkpoint dense layer " + layer.id + " has shape " +
                            shape_string(dense_w[i].shape()) + ", architecture needs " +
                            shape_string(layer.weight.shape()));
    }
    require_same_shape(dense_b[i].shape(), {layer.bias.size()}, "checkpoint " + layer.id);
    layer.weight = std::move(dense_w[i]);
    layer.bias.assign(dense_b[i].values().begin(), dense_b[i].values().end());
  }

  ck.metadata.architecture = spec.name;
  ck.metadata.stage = required(kv, "stage");
  ck.metadata.seed = to_size(required(kv, "seed"));
  try {
    ck.metadata.epoch = std::stoll(required(kv, "epoch"));
  } catch (const std::logic_error&) {
    throw IntegrityError("bad epoch in manifest");
  }
  for (const auto& [k, v] : kv) {
    if (k.rfind("meta.", 0) == 0) ck.metadata.extra[k.substr(5)] = v;
  }
  for (auto& [name, t] : tensors) {
    if (name.rfind("extra/", 0) != 0) throw IntegrityError("unexpected tensor " + name);
    ck.extra_tensors.emplace(name.substr(6), std::move(t));
  }
  return ck;
}

Checkpoint load_checkpoint(const std::filesystem::path& path,
                           const std::string& expected_architecture) {
  Checkpoint ck = load_checkpoint(path);
  if (ck.metadata.architecture != expected_architecture) {
    throw StructuralError("checkpoint " + path.string() + " holds architecture " +
                          ck.metadata.architecture + ", expected " + expected_architecture);
  }
  return ck;
}

}  // namespace chanprune
