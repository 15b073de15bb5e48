// Copyright 2026 The sardiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "errors.hpp"
#include "rng.hpp"

namespace sardiff {

namespace {

constexpr char kMagic[8] = {'S', 'R', 'D', 'F', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kFlagState = 1;
constexpr std::uint32_t kFlagEma = 2;

class Writer {
 public:
  template <class U>
  void uint(U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) bytes_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void u8(std::uint8_t v) { bytes_.push_back(static_cast<char>(v)); }
  void f32(float v) { uint(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { uint(std::bit_cast<std::uint64_t>(v)); }
  void raw(const void* p, std::size_t n) {
    const char* c = static_cast<const char*>(p);
    bytes_.insert(bytes_.end(), c, c + n);
  }
  void params(const ParameterSet<float>& ps) {
    uint<std::uint32_t>(static_cast<std::uint32_t>(ps.size()));
    for (std::size_t i = 0; i < ps.size(); ++i) {
      const auto& name = ps.name(i);
      uint<std::uint16_t>(static_cast<std::uint16_t>(name.size()));
      raw(name.data(), name.size());
      for (int d : ps[i].shape()) uint<std::uint32_t>(static_cast<std::uint32_t>(d));
      for (float v : ps[i].storage()) f32(v);
    }
  }
  std::string& bytes() { return bytes_; }

 private:
  std::string bytes_;
};

class Reader {
 public:
  Reader(const std::string& bytes, std::string origin) : b_(bytes), origin_(std::move(origin)) {}

  template <class U>
  U uint() {
    need(sizeof(U));
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i)
      v |= static_cast<U>(static_cast<unsigned char>(b_[pos_ + i])) << (8 * i);
    pos_ += sizeof(U);
    return v;
  }
  std::uint8_t u8() { return uint<std::uint8_t>(); }
  float f32() { return std::bit_cast<float>(uint<std::uint32_t>()); }
  double f64() { return std::bit_cast<double>(uint<std::uint64_t>()); }
  std::string str(std::size_t n) {
    need(n);
    std::string s = b_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  ParameterSet<float> params() {
    ParameterSet<float> ps;
    const auto count = uint<std::uint32_t>();
    for (std::uint32_t i = 0; i < count; ++i) {
      std::string name = str(uint<std::uint16_t>());
      int dims[4];
      std::size_t total = 1;
      for (int& d : dims) {
        d = static_cast<int>(uint<std::uint32_t>());
        total *= static_cast<std::size_t>(d);
      }
      need(total * 4);
      Tensor<float> t(dims[0], dims[1], dims[2], dims[3]);
      for (auto& v : t.storage()) v = f32();
      ps.add(std::move(name), std::move(t));
    }
    return ps;
  }
  std::size_t pos() const { return pos_; }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > b_.size()) throw FormatError(origin_ + ": checkpoint is truncated");
  }
  const std::string& b_;
  std::string origin_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c) {
  Writer w;
  w.raw(kMagic, sizeof kMagic);
  w.uint<std::uint32_t>(kCheckpointVersion);
  std::uint32_t flags = 0;
  if (c.state) flags |= kFlagState;
  if (c.state && c.state->ema) flags |= kFlagEma;
  w.uint<std::uint32_t>(flags);

  w.uint<std::uint32_t>(static_cast<std::uint32_t>(c.schedule.steps));
  w.f64(c.schedule.beta_start);
  w.f64(c.schedule.beta_end);
  w.u8(static_cast<std::uint8_t>(c.schedule.variance_mode));
  w.u8(c.schedule.terminal_noise ? 1 : 0);

  const auto& m = c.model;
  w.uint<std::uint32_t>(static_cast<std::uint32_t>(m.base_channels));
  w.uint<std::uint32_t>(static_cast<std::uint32_t>(m.channel_mults.size()));
  for (int v : m.channel_mults) w.uint<std::uint32_t>(static_cast<std::uint32_t>(v));
  for (int v : {m.num_res_blocks, m.time_dim, m.norm_groups, m.sar_channels, m.out_channels})
    w.uint<std::uint32_t>(static_cast<std::uint32_t>(v));
  w.u8(m.attention ? 1 : 0);

  w.uint<std::uint32_t>(static_cast<std::uint32_t>(c.tile_size));
  w.u8(c.sar_stretch ? 1 : 0);
  w.f64(c.stretch_low);
  w.f64(c.stretch_high);

  w.params(c.params);
  if (c.state) {
    w.uint<std::uint64_t>(static_cast<std::uint64_t>(c.state->step));
    w.uint<std::uint64_t>(c.state->seed);
    w.f64(c.state->lr);
    w.params(c.state->adam.m);
    w.params(c.state->adam.v);
    if (c.state->ema) w.params(*c.state->ema);
  }
  w.uint<std::uint64_t>(fnv1a(w.bytes()));

  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write checkpoint " + tmp.string());
    out.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
    if (!out) throw IoError("error writing checkpoint " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move checkpoint into place at " + path.string() + ": " + ec.message());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::string origin = path.string();
  if (bytes.size() < sizeof kMagic + 16 || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0)
    throw FormatError(origin + ": not a sardiff checkpoint");
  const std::string body = bytes.substr(0, bytes.size() - 8);
  Reader trailer(bytes.substr(bytes.size() - 8), origin);
  if (trailer.uint<std::uint64_t>() != fnv1a(body))
    throw FormatError(origin + ": checksum mismatch (file is corrupt)");

  Reader r(body, origin);
  (void)r.str(sizeof kMagic);
  const auto version = r.uint<std::uint32_t>();
  if (version != kCheckpointVersion)
    throw FormatError(origin + ": unsupported checkpoint version " + std::to_string(version));
  const auto flags = r.uint<std::uint32_t>();

  Checkpoint c;
  c.schedule.steps = static_cast<int>(r.uint<std::uint32_t>());
  c.schedule.beta_start = r.f64();
  c.schedule.beta_end = r.f64();
  const auto mode = r.u8();
  if (mode > 1) throw FormatError(origin + ": bad variance mode");
  c.schedule.variance_mode = static_cast<VarianceMode>(mode);
  c.schedule.terminal_noise = r.u8() != 0;

  auto& m = c.model;
  m.base_channels = static_cast<int>(r.uint<std::uint32_t>());
  const auto levels = r.uint<std::uint32_t>();
  if (levels > 16) throw FormatError(origin + ": implausible level count");
  m.channel_mults.resize(levels);
  for (auto& v : m.channel_mults) v = static_cast<int>(r.uint<std::uint32_t>());
  for (int* v : {&m.num_res_blocks, &m.time_dim, &m.norm_groups, &m.sar_channels, &m.out_channels})
    *v = static_cast<int>(r.uint<std::uint32_t>());
  m.attention = r.u8() != 0;

  c.tile_size = static_cast<int>(r.uint<std::uint32_t>());
  c.sar_stretch = r.u8() != 0;
  c.stretch_low = r.f64();
  c.stretch_high = r.f64();

  c.params = r.params();
  if (flags & kFlagState) {
    TrainSnapshot s;
    s.step = static_cast<std::int64_t>(r.uint<std::uint64_t>());
    s.seed = r.uint<std::uint64_t>();
    s.lr = r.f64();
    s.adam.step = s.step;
    s.adam.m = r.params();
    s.adam.v = r.params();
    if (flags & kFlagEma) s.ema = r.params();
    c.state = std::move(s);
  }
  if (r.pos() != body.size()) throw FormatError(origin + ": trailing bytes in checkpoint");
  try {
    m.validate();
  } catch (const ParameterError& e) {
    throw FormatError(origin + ": invalid model config (" + e.what() + ")");
  }
  return c;
}

void require_same_schedule(const ScheduleConfig& a, const ScheduleConfig& b) {
  auto bits = [](double v) { return std::bit_cast<std::uint64_t>(v); };
  if (a.steps != b.steps || bits(a.beta_start) != bits(b.beta_start) ||
      bits(a.beta_end) != bits(b.beta_end) || a.variance_mode != b.variance_mode) {
    throw ScheduleMismatchError(
        "schedule mismatch: checkpoint has T=" + std::to_string(a.steps) + " beta=[" +
        std::to_string(a.beta_start) + ", " + std::to_string(a.beta_end) + "] " +
        to_string(a.variance_mode) + ", requested T=" + std::to_string(b.steps) + " beta=[" +
        std::to_string(b.beta_start) + ", " + std::to_string(b.beta_end) + "] " +
        to_string(b.variance_mode));
  }
}

}  // namespace sardiff
