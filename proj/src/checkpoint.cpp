// Copyright 2026 The AGAT Authors
// SPDX-License-Identifier: Apache-2.0

#include "agat/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "agat/config.hpp"
#include "agat/error.hpp"

namespace agat {
namespace {

constexpr std::uint8_t kMagic[4] = {'A', 'G', 'A', 'T'};

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed large buffers in pieces
  while (!bytes.empty()) {
    const std::size_t n = std::min<std::size_t>(bytes.size(), 1u << 30);
    crc = crc32(crc, bytes.data(), static_cast<uInt>(n));
    bytes = bytes.subspan(n);
  }
  return static_cast<std::uint32_t>(crc);
}

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void string(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  void tensor(const std::string& name, const ad::Shape& shape, std::span<const double> values) {
    string(name);
    u32(static_cast<std::uint32_t>(shape.size()));
    for (std::size_t d : shape) u64(d);
    for (double v : values) f64(v);
  }
  std::vector<std::uint8_t>& out() { return out_; }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  Reader(std::span<const std::uint8_t> bytes, std::size_t base) : bytes_(bytes), base_(base) {}

  std::size_t offset() const { return base_ + pos_; }
  bool done() const { return pos_ == bytes_.size(); }

  std::uint32_t u32(const char* field) {
    need(4, field);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64(const char* field) {
    need(8, field);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
  }
  std::string string(const char* field) {
    const std::uint32_t n = u32(field);
    need(n, field);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  void need(std::uint64_t n, const char* field) const {
    if (n > bytes_.size() - pos_)
      throw CheckpointError(std::string(field) + " at byte " + std::to_string(offset()) +
                            " runs past the end of the file");
  }
  std::vector<double> f64s(std::uint64_t count, const char* field) {
    need(count * 8, field);
    std::vector<double> out(count);
    for (auto& v : out) v = std::bit_cast<double>(u64(field));
    return out;
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t base_;
  std::size_t pos_ = 0;
};

struct Record {
  std::string name;
  ad::Shape shape;
  std::vector<double> values;
  std::size_t offset = 0;
};

std::string rng_text(const Rng& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

void check_against(const std::vector<Record>& records,
                   const std::vector<std::pair<std::string, ad::Shape>>& table,
                   const std::string& label) {
  for (std::size_t i = 0; i < table.size(); ++i) {
    const auto& [name, shape] = table[i];
    if (i >= records.size())
      throw CheckpointError("tensor '" + name + "' expected by the " + label + " is missing");
    const Record& r = records[i];
    if (r.name != name)
      throw CheckpointError("tensor record at byte " + std::to_string(r.offset) + " is '" + r.name +
                            "', the " + label + " expects '" + name + "'");
    if (r.shape != shape)
      throw CheckpointError("tensor '" + name + "' has shape " + ad::to_string(r.shape) +
                            ", the " + label + " expects " + ad::to_string(shape));
  }
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const ModelConfig& model, const TrainConfig& train,
                                            const TrainState& state) {
  KeyValues kv;
  write_model_config(kv, model);
  write_train_config(kv, train);
  kv.set("state.step", std::to_string(state.step));
  kv.set("state.epoch", std::to_string(state.epoch));
  kv.set("state.rng", rng_text(state.rng));

  const auto named = state.params.named();
  const auto table = param_shapes(model);
  if (named.size() != table.size() || state.m.size() != named.size() ||
      state.v.size() != named.size())
    throw ContractError("encode_checkpoint: state does not match the model config");

  Writer w;
  w.bytes(kMagic, 4);
  w.u32(kCheckpointVersion);
  w.string(kv.to_text());
  for (const auto& [name, t] : named) w.tensor(name, t.shape(), t.values());
  for (std::size_t i = 0; i < named.size(); ++i)
    w.tensor("adam.m/" + named[i].first, named[i].second.shape(), state.m[i]);
  for (std::size_t i = 0; i < named.size(); ++i)
    w.tensor("adam.v/" + named[i].first, named[i].second.shape(), state.v[i]);
  auto& out = w.out();
  const std::uint32_t crc = crc32_of(std::span(out).subspan(4));
  w.u32(crc);
  return std::move(out);
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes, const ModelConfig* expected) {
  if (bytes.size() < 16) throw CheckpointError("file is " + std::to_string(bytes.size()) + " bytes, too short for a checkpoint");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw CheckpointError("bad magic at byte 0");

  const auto body = bytes.subspan(4, bytes.size() - 8);
  Reader trailer(bytes.subspan(bytes.size() - 4), bytes.size() - 4);
  const std::uint32_t stored_crc = trailer.u32("crc");
  if (crc32_of(body) != stored_crc)
    throw CheckpointError("crc mismatch at byte " + std::to_string(bytes.size() - 4));

  Reader in(body, 4);
  const std::uint32_t version = in.u32("version");
  if (version != kCheckpointVersion)
    throw CheckpointError("unsupported version " + std::to_string(version) + " at byte 4");

  Checkpoint ck;
  const std::size_t config_offset = in.offset();
  const auto text = in.string("config block");
  try {
    const KeyValues kv = KeyValues::parse(text, "checkpoint config");
    ConfigReader r(kv);
    ck.model = read_model_config(r);
    ck.train = read_train_config(r);
    ck.state.step = r.get_u64("state.step", 0);
    ck.state.epoch = r.get_u64("state.epoch", 0);
    std::istringstream rng_in(r.get_string("state.rng", ""));
    rng_in >> ck.state.rng;
    if (!rng_in) throw ConfigError("state.rng is not a valid generator state");
    r.reject_unknown();
  } catch (const ConfigError& e) {
    throw CheckpointError("config block at byte " + std::to_string(config_offset) + ": " + e.what());
  }

  std::vector<Record> records;
  while (!in.done()) {
    Record r;
    r.offset = in.offset();
    r.name = in.string("tensor name");
    const std::uint32_t rank = in.u32("tensor rank");
    if (rank > 8) throw CheckpointError("tensor '" + r.name + "' has rank " + std::to_string(rank));
    std::uint64_t count = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
      const std::uint64_t d = in.u64("tensor dim");
      if (d != 0 && count > (std::uint64_t{1} << 40) / d)
        throw CheckpointError("tensor '" + r.name + "' is implausibly large");
      count *= d;
      r.shape.push_back(static_cast<std::size_t>(d));
    }
    r.values = in.f64s(count, "tensor values");
    records.push_back(std::move(r));
  }

  auto table = param_shapes(ck.model);
  const std::size_t n = table.size();
  if (expected) check_against(records, param_shapes(*expected), "model config");
  for (std::size_t i = 0; i < n; ++i) table.emplace_back("adam.m/" + table[i].first, table[i].second);
  for (std::size_t i = 0; i < n; ++i) table.emplace_back("adam.v/" + table[i].first, table[i].second);
  check_against(records, table, "stored config");
  if (records.size() != table.size())
    throw CheckpointError("unexpected tensor record '" + records[table.size()].name + "' at byte " +
                          std::to_string(records[table.size()].offset));
  if (expected && !(*expected == ck.model)) {
    KeyValues want, have;
    write_model_config(want, *expected);
    write_model_config(have, ck.model);
    for (const auto& [k, v] : want.entries())
      if (have.find(k) != v)
        throw CheckpointError(k + " is " + *have.find(k) + " in the checkpoint, expected " + v);
  }

  std::vector<NamedTensor> params;
  for (std::size_t i = 0; i < n; ++i)
    params.emplace_back(records[i].name, ad::Tensor::parameter(records[i].shape, std::move(records[i].values)));
  ck.state.params = Params::from_named(ck.model, params);
  for (std::size_t i = 0; i < n; ++i) {
    ck.state.m.push_back(std::move(records[n + i].values));
    ck.state.v.push_back(std::move(records[2 * n + i].values));
  }
  return ck;
}

void checkpoint_save(const std::filesystem::path& path, const ModelConfig& model,
                     const TrainConfig& train, const TrainState& state) {
  const auto bytes = encode_checkpoint(model, train, state);
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw CheckpointError("short write to " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw CheckpointError("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

Checkpoint checkpoint_load(const std::filesystem::path& path, const ModelConfig* expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_checkpoint(bytes, expected);
  } catch (const CheckpointError& e) {
    throw CheckpointError(path.string() + ": " + e.what());
  }
}

}  // namespace agat
