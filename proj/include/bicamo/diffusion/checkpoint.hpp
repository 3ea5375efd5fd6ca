#pragma once

// Versioned binary checkpoint; layout documented in docs/checkpoint_format.md.
// Every integer is little-endian u64 (u32 for the version), every real a
// little-endian IEEE-754 binary64.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <stdexcept>
#include <string>
#include <vector>

#include "bicamo/diffusion/denoiser.hpp"
#include "bicamo/diffusion/schedule.hpp"
#include "bicamo/diffusion/trainer.hpp"
#include "bicamo/edge_prior.hpp"
#include "bicamo/injection.hpp"

namespace bicamo {

inline constexpr char kCheckpointMagic[8] = {'B', 'I', 'C', 'A', 'M', 'O', 'C', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  DenoiserConfig arch;
  std::vector<double> params;
  AdamW optimizer;
  NoiseSchedule schedule;
  InjectionConfig injection;
  EdgeOperator edge_op;

  Denoiser build_denoiser() const {
    Denoiser d(arch);
    if (d.parameter_count() != params.size()) {
      throw std::runtime_error("checkpoint: parameter count " + std::to_string(params.size()) +
                               " does not match architecture (" +
                               std::to_string(d.parameter_count()) + ")");
    }
    std::copy(params.begin(), params.end(), d.parameters().begin());
    return d;
  }

  bool operator==(const Checkpoint& o) const {
    return arch == o.arch && params == o.params && optimizer == o.optimizer &&
           schedule == o.schedule && injection.enabled == o.injection.enabled &&
           injection.lambda_inj == o.injection.lambda_inj &&
           injection.laplacian_prefilter == o.injection.laplacian_prefilter && edge_op == o.edge_op;
  }
};

namespace detail {

class ByteWriter {
 public:
  void raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    bytes_.insert(bytes_.end(), b, b + n);
  }
  void u32(std::uint32_t v) {
    for (int k = 0; k < 4; ++k) bytes_.push_back(static_cast<unsigned char>(v >> (8 * k)));
  }
  void u64(std::uint64_t v) {
    for (int k = 0; k < 8; ++k) bytes_.push_back(static_cast<unsigned char>(v >> (8 * k)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void reals(const std::vector<double>& v) {
    u64(v.size());
    for (double x : v) f64(x);
  }
  const std::vector<unsigned char>& bytes() const { return bytes_; }

 private:
  std::vector<unsigned char> bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(std::vector<unsigned char> b) : bytes_(std::move(b)) {}
  void raw(void* p, std::size_t n) {
    need(n);
    std::memcpy(p, bytes_.data() + pos_, n);
    pos_ += n;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int k = 0; k < 4; ++k) v |= static_cast<std::uint32_t>(bytes_[pos_ + k]) << (8 * k);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int k = 0; k < 8; ++k) v |= static_cast<std::uint64_t>(bytes_[pos_ + k]) << (8 * k);
    pos_ += 8;
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::vector<double> reals() {
    const std::uint64_t n = u64();
    if (n > (bytes_.size() - pos_) / 8) throw std::runtime_error("checkpoint: truncated array");
    std::vector<double> v(n);
    for (auto& x : v) x = f64();
    return v;
  }
  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw std::runtime_error("checkpoint: unexpected end of file");
  }
  std::vector<unsigned char> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::vector<unsigned char> encode_checkpoint(const Checkpoint& c) {
  detail::ByteWriter w;
  w.raw(kCheckpointMagic, sizeof kCheckpointMagic);
  w.u32(kCheckpointVersion);
  w.u64(c.arch.widths.size());
  for (int x : c.arch.widths) w.u64(static_cast<std::uint64_t>(x));
  w.u64(static_cast<std::uint64_t>(c.arch.time_embed_dim));
  w.reals(c.schedule.alpha_bar);
  w.reals(c.params);
  w.u64(c.optimizer.step);
  w.reals(c.optimizer.m);
  w.reals(c.optimizer.v);
  w.u64(c.injection.enabled ? 1 : 0);
  w.f64(c.injection.lambda_inj);
  w.u64(c.injection.laplacian_prefilter ? 1 : 0);
  w.u64(static_cast<std::uint64_t>(c.edge_op.kind));
  w.f64(c.edge_op.log_sigma);
  w.f64(c.edge_op.canny_sigma);
  w.f64(c.edge_op.canny_low);
  w.f64(c.edge_op.canny_high);
  return w.bytes();
}

inline Checkpoint decode_checkpoint(std::vector<unsigned char> bytes) {
  detail::ByteReader r(std::move(bytes));
  char magic[8];
  r.raw(magic, sizeof magic);
  if (std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0) {
    throw std::runtime_error("checkpoint: bad magic header");
  }
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
  }
  Checkpoint c;
  const std::uint64_t stages = r.u64();
  if (stages < 1 || stages > 4) throw std::runtime_error("checkpoint: bad stage count");
  c.arch.widths.clear();
  for (std::uint64_t k = 0; k < stages; ++k) c.arch.widths.push_back(static_cast<int>(r.u64()));
  c.arch.time_embed_dim = static_cast<int>(r.u64());
  c.arch.validate();
  c.schedule.alpha_bar = r.reals();
  c.params = r.reals();
  c.optimizer.step = r.u64();
  c.optimizer.m = r.reals();
  c.optimizer.v = r.reals();
  c.injection.enabled = r.u64() != 0;
  c.injection.lambda_inj = r.f64();
  c.injection.laplacian_prefilter = r.u64() != 0;
  const std::uint64_t kind = r.u64();
  if (kind > static_cast<std::uint64_t>(EdgeKind::Canny)) {
    throw std::runtime_error("checkpoint: unknown edge operator id " + std::to_string(kind));
  }
  c.edge_op.kind = static_cast<EdgeKind>(kind);
  c.edge_op.log_sigma = r.f64();
  c.edge_op.canny_sigma = r.f64();
  c.edge_op.canny_low = r.f64();
  c.edge_op.canny_high = r.f64();
  if (!r.at_end()) throw std::runtime_error("checkpoint: trailing bytes");
  c.injection.validate();
  c.edge_op.validate();
  return c;
}

inline void save_checkpoint(const Checkpoint& c, const std::string& path) {
  const auto bytes = encode_checkpoint(c);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("checkpoint: cannot open '" + path + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("checkpoint: write to '" + path + "' failed");
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open '" + path + "'");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(std::move(bytes));
}

}  // namespace bicamo
