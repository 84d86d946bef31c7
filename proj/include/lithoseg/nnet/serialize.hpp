#pragma once

#include <zlib.h>

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "lithoseg/nnet/mlp.hpp"

namespace lithoseg::nn {

inline constexpr char kParamMagic[5] = {'L', 'S', 'N', 'N', '1'};

class ParamFileError : public IoError {
 public:
  enum class Kind { BadHeader, Checksum, DimMismatch, Truncated };
  ParamFileError(Kind kind, const std::string& msg, int layer = -1) : IoError(msg), kind_(kind), layer_(layer) {}
  Kind kind() const { return kind_; }
  int layer() const { return layer_; }  // -1 when not layer specific

 private:
  Kind kind_;
  int layer_;
};

namespace detail {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline void put_f32(std::vector<std::uint8_t>& out, float f) { put_u32(out, std::bit_cast<std::uint32_t>(f)); }

class Reader {
 public:
  Reader(const std::uint8_t* data, std::size_t size) : data_(data), size_(size) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint8_t u8() {
    need(1);
    return data_[pos_++];
  }
  float f32() { return std::bit_cast<float>(u32()); }
  std::size_t remaining() const { return size_ - pos_; }

 private:
  void need(std::size_t n) const {
    if (size_ - pos_ < n) throw ParamFileError(ParamFileError::Kind::Truncated, "parameter file: payload truncated");
  }
  const std::uint8_t* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
};

inline std::uint32_t crc32_of(const std::uint8_t* data, std::size_t n) {
  return static_cast<std::uint32_t>(::crc32(::crc32(0L, Z_NULL, 0), data, static_cast<uInt>(n)));
}

}  // namespace detail

// Layout: magic | payload | crc32(payload), integers and floats
// little-endian. Payload: u32 layer count, u32 dims[count + 1],
// u8 activation, then per layer u32 rows, u32 cols, rows*cols weights
// (row-major) and rows biases.
inline std::vector<std::uint8_t> encode_params(const MlpParams& p) {
  check_dims(p.dims);
  std::vector<std::uint8_t> bytes(std::begin(kParamMagic), std::end(kParamMagic));
  detail::put_u32(bytes, static_cast<std::uint32_t>(p.layers()));
  for (int d : p.dims) detail::put_u32(bytes, static_cast<std::uint32_t>(d));
  bytes.push_back(static_cast<std::uint8_t>(p.hidden));
  for (int l = 0; l < p.layers(); ++l) {
    const auto& w = p.weights[l];
    detail::put_u32(bytes, static_cast<std::uint32_t>(w.rows()));
    detail::put_u32(bytes, static_cast<std::uint32_t>(w.cols()));
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) detail::put_f32(bytes, w(r, c));
    for (Eigen::Index r = 0; r < p.biases[l].size(); ++r) detail::put_f32(bytes, p.biases[l](r));
  }
  const std::size_t magic = sizeof(kParamMagic);
  detail::put_u32(bytes, detail::crc32_of(bytes.data() + magic, bytes.size() - magic));
  return bytes;
}

inline MlpParams decode_params(const std::vector<std::uint8_t>& bytes) {
  using Kind = ParamFileError::Kind;
  constexpr std::size_t kMagic = sizeof(kParamMagic);
  if (bytes.size() < kMagic || std::memcmp(bytes.data(), kParamMagic, kMagic) != 0)
    throw ParamFileError(Kind::BadHeader, "parameter file: bad magic, expected LSNN1");
  if (bytes.size() < kMagic + 4) throw ParamFileError(Kind::Checksum, "parameter file: checksum missing");
  const std::size_t payload_len = bytes.size() - kMagic - 4;
  const std::uint8_t* payload = bytes.data() + kMagic;
  detail::Reader tail(payload + payload_len, 4);
  if (tail.u32() != detail::crc32_of(payload, payload_len))
    throw ParamFileError(Kind::Checksum, "parameter file: checksum mismatch");

  detail::Reader in(payload, payload_len);
  const std::uint32_t layers = in.u32();
  if (layers < 1 || layers > 64) throw ParamFileError(Kind::BadHeader, "parameter file: implausible layer count");
  MlpParams p;
  for (std::uint32_t i = 0; i <= layers; ++i) {
    const std::uint32_t d = in.u32();
    if (d < 1 || d > (1u << 20)) throw ParamFileError(Kind::BadHeader, "parameter file: implausible layer dim");
    p.dims.push_back(static_cast<int>(d));
  }
  const std::uint8_t act = in.u8();
  if (act > static_cast<std::uint8_t>(Activation::Identity))
    throw ParamFileError(Kind::BadHeader, "parameter file: unknown activation code " + std::to_string(act));
  p.hidden = static_cast<Activation>(act);
  for (std::uint32_t l = 0; l < layers; ++l) {
    const std::uint32_t rows = in.u32();
    const std::uint32_t cols = in.u32();
    const int li = static_cast<int>(l);
    if (rows != static_cast<std::uint32_t>(p.dims[l + 1]) || cols != static_cast<std::uint32_t>(p.dims[l]))
      throw ParamFileError(Kind::DimMismatch,
                           "parameter file: layer " + std::to_string(l) + " stores " + std::to_string(rows) + "x" +
                               std::to_string(cols) + " but dims declare " + std::to_string(p.dims[l + 1]) + "x" +
                               std::to_string(p.dims[l]),
                           li);
    if (in.remaining() / 4 < static_cast<std::size_t>(rows) * (cols + 1))
      throw ParamFileError(Kind::Truncated, "parameter file: layer " + std::to_string(l) + " truncated", li);
    Matrix<float> w(rows, cols);
    for (std::uint32_t r = 0; r < rows; ++r)
      for (std::uint32_t c = 0; c < cols; ++c) w(r, c) = in.f32();
    Vector<float> b(rows);
    for (std::uint32_t r = 0; r < rows; ++r) b(r) = in.f32();
    p.weights.push_back(std::move(w));
    p.biases.push_back(std::move(b));
  }
  if (in.remaining() != 0) throw ParamFileError(Kind::BadHeader, "parameter file: trailing bytes after last layer");
  return p;
}

inline void save_params(const std::filesystem::path& path, const MlpParams& p) {
  const auto bytes = encode_params(p);
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write " + tmp.string());
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IoError("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline MlpParams load_params(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return decode_params(bytes);
}

}  // namespace lithoseg::nn
