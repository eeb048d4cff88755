/* Copyright 2026 The crossmatch Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "crossmatch/io.h"

#include <png.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "json.hpp"

namespace crossmatch {

namespace {

constexpr char kTensorMagic[4] = {'X', 'C', 'T', '1'};
constexpr char kBundleMagic[4] = {'X', 'C', 'T', 'B'};

void PutU32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void PutU64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t GetLe(std::string_view bytes, std::size_t offset, int width) {
  std::uint64_t v = 0;
  for (int i = 0; i < width; ++i) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[offset + i]))
         << (8 * i);
  }
  return v;
}

void Need(std::string_view bytes, std::size_t offset, std::size_t count,
          const char* what) {
  if (bytes.size() < offset || bytes.size() - offset < count) {
    throw FormatError(std::string("truncated ") + what + ": expected " +
                          std::to_string(count) + " bytes, got " +
                          std::to_string(bytes.size() > offset ? bytes.size() - offset : 0),
                      offset);
  }
}

}  // namespace

std::string_view DTypeName(DType dtype) {
  return dtype == DType::kFloat32 ? "float32" : "float64";
}

DType ParseDType(std::string_view name) {
  if (name == "float32" || name == "f32") return DType::kFloat32;
  if (name == "float64" || name == "f64") return DType::kFloat64;
  throw Error(ErrorCode::kConfiguration, "unknown dtype '" + std::string(name) + "'");
}

std::size_t Tensor::element_count() const {
  std::size_t n = 1;
  for (std::uint32_t d : dims) n *= d;
  return n;
}

std::string EncodeTensor(const Tensor& tensor) {
  if (tensor.dims.size() > 255) {
    throw Error(ErrorCode::kInvalidArgument, "tensor rank above 255");
  }
  if (tensor.values.size() != tensor.element_count()) {
    throw Error(ErrorCode::kInvalidArgument,
                "tensor has " + std::to_string(tensor.values.size()) +
                    " values for " + std::to_string(tensor.element_count()) +
                    " elements");
  }
  std::string out(kTensorMagic, 4);
  out.push_back(static_cast<char>(tensor.dtype));
  out.push_back(static_cast<char>(tensor.dims.size()));
  for (std::uint32_t d : tensor.dims) PutU32(out, d);
  if (tensor.dtype == DType::kFloat32) {
    out.reserve(out.size() + 4 * tensor.values.size());
    for (double v : tensor.values) {
      const auto f = static_cast<float>(v);
      if (static_cast<double>(f) != v && !std::isnan(v)) {
        throw Error(ErrorCode::kInvalidArgument,
                    "value " + std::to_string(v) +
                        " is not representable as float32; narrow explicitly");
      }
      PutU32(out, std::bit_cast<std::uint32_t>(f));
    }
  } else {
    out.reserve(out.size() + 8 * tensor.values.size());
    for (double v : tensor.values) PutU64(out, std::bit_cast<std::uint64_t>(v));
  }
  return out;
}

Tensor DecodeTensor(std::string_view bytes, std::size_t* offset) {
  std::size_t pos = *offset;
  Need(bytes, pos, 6, "tensor header");
  if (std::memcmp(bytes.data() + pos, kTensorMagic, 4) != 0) {
    throw FormatError("bad tensor magic (expected \"XCT1\")", pos);
  }
  Tensor t;
  const auto dtype = static_cast<unsigned char>(bytes[pos + 4]);
  if (dtype > 1) {
    throw FormatError("unknown dtype code " + std::to_string(dtype), pos + 4);
  }
  t.dtype = static_cast<DType>(dtype);
  const auto rank = static_cast<unsigned char>(bytes[pos + 5]);
  pos += 6;
  Need(bytes, pos, 4u * rank, "tensor dims");
  std::size_t count = 1;
  const std::size_t elem = t.dtype == DType::kFloat32 ? 4 : 8;
  for (unsigned r = 0; r < rank; ++r) {
    const auto d = static_cast<std::uint32_t>(GetLe(bytes, pos, 4));
    if (d != 0 && count > std::numeric_limits<std::size_t>::max() / elem / d) {
      throw FormatError("tensor dims overflow the addressable size", pos);
    }
    count *= d;
    t.dims.push_back(d);
    pos += 4;
  }
  Need(bytes, pos, count * elem, "tensor payload");
  t.values.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    if (t.dtype == DType::kFloat32) {
      t.values[i] = std::bit_cast<float>(static_cast<std::uint32_t>(GetLe(bytes, pos, 4)));
    } else {
      t.values[i] = std::bit_cast<double>(GetLe(bytes, pos, 8));
    }
    pos += elem;
  }
  *offset = pos;
  return t;
}

Tensor ToTensor(const FeatureMap& map, DType dtype) {
  Tensor t;
  t.dtype = dtype;
  t.dims = {static_cast<std::uint32_t>(map.channels()),
            static_cast<std::uint32_t>(map.height()),
            static_cast<std::uint32_t>(map.width())};
  t.values.assign(map.values().begin(), map.values().end());
  if (dtype == DType::kFloat32) {
    for (double& v : t.values) v = static_cast<float>(v);
  }
  return t;
}

FeatureMap ToFeatureMap(const Tensor& tensor, const ReadOptions& options,
                        std::string domain_tag) {
  if (tensor.dtype == DType::kFloat64 && options.pipeline == DType::kFloat32 &&
      !options.allow_narrowing) {
    throw Error(ErrorCode::kFormat,
                "float64 tensor refused by a float32 pipeline; pass "
                "--allow-narrowing to round values");
  }
  int c = 1, h = 0, w = 0;
  if (tensor.dims.size() == 3) {
    c = static_cast<int>(tensor.dims[0]);
    h = static_cast<int>(tensor.dims[1]);
    w = static_cast<int>(tensor.dims[2]);
  } else if (tensor.dims.size() == 2) {
    h = static_cast<int>(tensor.dims[0]);
    w = static_cast<int>(tensor.dims[1]);
  } else {
    throw Error(ErrorCode::kFormat,
                "feature maps need rank 2 or 3, got rank " +
                    std::to_string(tensor.dims.size()));
  }
  std::vector<double> values = tensor.values;
  if (options.pipeline == DType::kFloat32) {
    for (double& v : values) v = static_cast<float>(v);
  }
  return FeatureMap(c, h, w, std::move(values), std::move(domain_tag));
}

std::string ReadFileBytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::kIo, "cannot open " + path.string() + " for reading");
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void WriteFileBytes(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw Error(ErrorCode::kIo, "cannot open " + path.string() + " for writing");
  }
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kIo, "failed writing " + path.string());
}

void WriteTensorFile(const std::filesystem::path& path, const Tensor& tensor) {
  WriteFileBytes(path, EncodeTensor(tensor));
}

Tensor ReadTensorFile(const std::filesystem::path& path) {
  const std::string bytes = ReadFileBytes(path);
  std::size_t offset = 0;
  Tensor t = DecodeTensor(bytes, &offset);
  if (offset != bytes.size()) {
    throw FormatError("trailing bytes after tensor payload", offset);
  }
  return t;
}

void WriteFeatureMap(const std::filesystem::path& path, const FeatureMap& map,
                     DType dtype) {
  WriteTensorFile(path, ToTensor(map, dtype));
}

FeatureMap ReadFeatureMap(const std::filesystem::path& path,
                          const ReadOptions& options, std::string domain_tag) {
  return ToFeatureMap(ReadTensorFile(path), options, std::move(domain_tag));
}

const Tensor& Bundle::Get(const std::string& name) const {
  for (const auto& [n, t] : tensors) {
    if (n == name) return t;
  }
  throw Error(ErrorCode::kFormat, "bundle has no tensor named '" + name + "'");
}

std::string EncodeBundle(const Bundle& bundle) {
  std::string out(kBundleMagic, 4);
  PutU32(out, static_cast<std::uint32_t>(bundle.header_json.size()));
  out += bundle.header_json;
  PutU32(out, static_cast<std::uint32_t>(bundle.tensors.size()));
  for (const auto& [name, t] : bundle.tensors) {
    PutU32(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    out += EncodeTensor(t);
  }
  return out;
}

Bundle DecodeBundle(std::string_view bytes) {
  std::size_t pos = 0;
  Need(bytes, pos, 8, "bundle header");
  if (std::memcmp(bytes.data(), kBundleMagic, 4) != 0) {
    throw FormatError("bad bundle magic (expected \"XCTB\")", 0);
  }
  const auto header_len = static_cast<std::size_t>(GetLe(bytes, 4, 4));
  pos = 8;
  Need(bytes, pos, header_len, "bundle header text");
  Bundle b;
  b.header_json = std::string(bytes.substr(pos, header_len));
  if (!nlohmann::json::accept(b.header_json)) {
    throw FormatError("bundle header is not valid JSON", pos);
  }
  pos += header_len;
  Need(bytes, pos, 4, "bundle tensor count");
  const auto count = static_cast<std::size_t>(GetLe(bytes, pos, 4));
  pos += 4;
  for (std::size_t i = 0; i < count; ++i) {
    Need(bytes, pos, 4, "tensor name length");
    const auto name_len = static_cast<std::size_t>(GetLe(bytes, pos, 4));
    pos += 4;
    Need(bytes, pos, name_len, "tensor name");
    std::string name(bytes.substr(pos, name_len));
    pos += name_len;
    b.tensors.emplace_back(std::move(name), DecodeTensor(bytes, &pos));
  }
  if (pos != bytes.size()) {
    throw FormatError("trailing bytes after bundle", pos);
  }
  return b;
}

void WriteBundle(const std::filesystem::path& path, const Bundle& bundle) {
  WriteFileBytes(path, EncodeBundle(bundle));
}

Bundle ReadBundle(const std::filesystem::path& path) {
  return DecodeBundle(ReadFileBytes(path));
}

namespace {

Tensor MatrixTensor(const Eigen::MatrixXd& m) {
  Tensor t;
  t.dims = {static_cast<std::uint32_t>(m.rows()), static_cast<std::uint32_t>(m.cols())};
  t.values.resize(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      t.values[static_cast<std::size_t>(r * m.cols() + c)] = m(r, c);
    }
  }
  return t;
}

Tensor VectorTensor(std::span<const double> v) {
  Tensor t;
  t.dims = {static_cast<std::uint32_t>(v.size())};
  t.values.assign(v.begin(), v.end());
  return t;
}

Eigen::MatrixXd TensorMatrix(const Tensor& t, const char* name) {
  if (t.dims.size() != 2) {
    throw Error(ErrorCode::kFormat, std::string(name) + " must be a rank-2 tensor");
  }
  Eigen::MatrixXd m(t.dims[0], t.dims[1]);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      m(r, c) = t.values[static_cast<std::size_t>(r * m.cols() + c)];
    }
  }
  return m;
}

std::vector<double> TensorVector(const Tensor& t, const char* name) {
  if (t.dims.size() != 1) {
    throw Error(ErrorCode::kFormat, std::string(name) + " must be a rank-1 tensor");
  }
  return t.values;
}

Eigen::VectorXd ToEigen(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

nlohmann::json Header(const Bundle& b, const char* kind) {
  const auto j = nlohmann::json::parse(b.header_json);
  if (j.value("kind", "") != kind) {
    throw Error(ErrorCode::kFormat,
                std::string("bundle is not a ") + kind + " (kind '" +
                    j.value("kind", "") + "')");
  }
  return j;
}

}  // namespace

void WriteProjection(const std::filesystem::path& path, const Projection& proj) {
  Bundle b;
  b.header_json = nlohmann::json{{"kind", "projection"},
                                 {"domain_tag", proj.domain_tag}}.dump();
  b.tensors.emplace_back("matrix", MatrixTensor(proj.matrix));
  b.tensors.emplace_back(
      "mean", VectorTensor(std::span(proj.mean.data(), proj.mean.size())));
  WriteBundle(path, b);
}

Projection ReadProjection(const std::filesystem::path& path) {
  const Bundle b = ReadBundle(path);
  const auto j = Header(b, "projection");
  Projection p;
  p.matrix = TensorMatrix(b.Get("matrix"), "matrix");
  p.mean = ToEigen(TensorVector(b.Get("mean"), "mean"));
  p.domain_tag = j.value("domain_tag", "");
  if (p.mean.size() != p.matrix.cols()) {
    throw Error(ErrorCode::kFormat, "projection mean does not match matrix width");
  }
  return p;
}

void WriteGlobalStats(const std::filesystem::path& path, const GlobalStats& stats) {
  Bundle b;
  b.header_json = nlohmann::json{{"kind", "global_stats"},
                                 {"sample_count", stats.sample_count}}.dump();
  b.tensors.emplace_back("means", VectorTensor(stats.means));
  b.tensors.emplace_back("stddevs", VectorTensor(stats.stddevs));
  WriteBundle(path, b);
}

GlobalStats ReadGlobalStats(const std::filesystem::path& path) {
  const Bundle b = ReadBundle(path);
  const auto j = Header(b, "global_stats");
  GlobalStats s;
  s.means = TensorVector(b.Get("means"), "means");
  s.stddevs = TensorVector(b.Get("stddevs"), "stddevs");
  s.sample_count = j.value("sample_count", std::size_t{0});
  if (s.means.size() != s.stddevs.size()) {
    throw Error(ErrorCode::kFormat, "global stats vectors differ in length");
  }
  return s;
}

void WriteModel(const std::filesystem::path& path, const SiameseModel& model,
                const CheckpointInfo& info) {
  model.Validate();
  Bundle b;
  b.header_json =
      nlohmann::json{{"kind", "siamese_model"},
                     {"alpha", model.alpha},
                     {"beta", model.beta},
                     {"seed", info.seed},
                     {"regime", info.regime},
                     {"hinge", model.hinge == HingeForm::kThreshold ? "threshold"
                                                                    : "as_printed"},
                     {"domain_x", model.proj_x.domain_tag},
                     {"domain_y", model.proj_y.domain_tag}}
          .dump();
  b.tensors.emplace_back("U", MatrixTensor(model.proj_x.matrix));
  b.tensors.emplace_back("V", MatrixTensor(model.proj_y.matrix));
  b.tensors.emplace_back("mean_x", VectorTensor(std::span(
                                       model.proj_x.mean.data(), model.proj_x.mean.size())));
  b.tensors.emplace_back("mean_y", VectorTensor(std::span(
                                       model.proj_y.mean.data(), model.proj_y.mean.size())));
  b.tensors.emplace_back("W", VectorTensor(model.weights.weights));
  const double bias[] = {model.weights.bias};
  b.tensors.emplace_back("b", VectorTensor(bias));
  WriteBundle(path, b);
}

SiameseModel ReadModel(const std::filesystem::path& path, CheckpointInfo* info) {
  const Bundle b = ReadBundle(path);
  const auto j = Header(b, "siamese_model");
  SiameseModel m;
  m.alpha = j.value("alpha", 100.0);
  m.beta = j.value("beta", 1.0);
  m.hinge = j.value("hinge", "threshold") == "as_printed" ? HingeForm::kAsPrinted
                                                          : HingeForm::kThreshold;
  m.proj_x.matrix = TensorMatrix(b.Get("U"), "U");
  m.proj_y.matrix = TensorMatrix(b.Get("V"), "V");
  m.proj_x.mean = ToEigen(TensorVector(b.Get("mean_x"), "mean_x"));
  m.proj_y.mean = ToEigen(TensorVector(b.Get("mean_y"), "mean_y"));
  m.proj_x.domain_tag = j.value("domain_x", "");
  m.proj_y.domain_tag = j.value("domain_y", "");
  m.weights.weights = TensorVector(b.Get("W"), "W");
  const auto bias = TensorVector(b.Get("b"), "b");
  if (bias.size() != 1) throw Error(ErrorCode::kFormat, "bias must hold one value");
  m.weights.bias = bias[0];
  m.Validate();
  if (info != nullptr) {
    info->seed = j.value("seed", std::uint64_t{0});
    info->regime = j.value("regime", "weights");
  }
  return m;
}

namespace {

FeatureMap ReadPgm(const std::string& bytes, const std::filesystem::path& path) {
  std::size_t pos = 0;
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_int = [&]() -> long {
    skip_space();
    const std::size_t start = pos;
    long v = 0;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
      v = v * 10 + (bytes[pos] - '0');
      if (v > 1'000'000) throw FormatError("PGM header value too large", start);
      ++pos;
    }
    if (pos == start) throw FormatError("expected an integer in PGM header", start);
    return v;
  };
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '2' && bytes[1] != '5')) {
    throw FormatError("not a grayscale PGM: " + path.string(), 0);
  }
  const bool binary = bytes[1] == '5';
  pos = 2;
  const long w = read_int();
  const long h = read_int();
  const long maxval = read_int();
  if (w < 1 || h < 1) throw FormatError("PGM has empty dimensions", pos);
  if (maxval < 1 || maxval > 255) {
    throw FormatError("only 8-bit PGM images are supported", pos);
  }
  const std::size_t n = static_cast<std::size_t>(w) * h;
  std::vector<double> values(n);
  if (binary) {
    ++pos;  // single whitespace after maxval
    Need(bytes, pos, n, "PGM pixel data");
    for (std::size_t i = 0; i < n; ++i) {
      values[i] = static_cast<unsigned char>(bytes[pos + i]);
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) values[i] = static_cast<double>(read_int());
  }
  return FeatureMap(1, static_cast<int>(h), static_cast<int>(w), std::move(values));
}

FeatureMap ReadPng(const std::filesystem::path& path) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw Error(ErrorCode::kFormat,
                "cannot decode PNG " + path.string() + ": " + image.message);
  }
  if ((image.format & (PNG_FORMAT_FLAG_COLOR | PNG_FORMAT_FLAG_ALPHA |
                       PNG_FORMAT_FLAG_LINEAR)) != 0) {
    png_image_free(&image);
    throw Error(ErrorCode::kFormat,
                "only 8-bit grayscale PNG images are supported: " + path.string());
  }
  image.format = PNG_FORMAT_GRAY;
  std::vector<png_byte> buffer(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
    throw Error(ErrorCode::kFormat,
                "cannot decode PNG " + path.string() + ": " + image.message);
  }
  std::vector<double> values(buffer.begin(), buffer.end());
  return FeatureMap(1, static_cast<int>(image.height),
                    static_cast<int>(image.width), std::move(values));
}

}  // namespace

FeatureMap ReadGrayImage(const std::filesystem::path& path) {
  const std::string bytes = ReadFileBytes(path);
  if (bytes.size() >= 8 && static_cast<unsigned char>(bytes[0]) == 0x89 &&
      bytes.compare(1, 3, "PNG") == 0) {
    return ReadPng(path);
  }
  return ReadPgm(bytes, path);
}

void WritePgm(const std::filesystem::path& path, const FeatureMap& image) {
  if (image.channels() != 1) {
    throw Error(ErrorCode::kDimensionMismatch, "PGM output needs one channel");
  }
  std::string out = "P5\n" + std::to_string(image.width()) + " " +
                    std::to_string(image.height()) + "\n255\n";
  for (double v : image.values()) {
    out.push_back(static_cast<char>(static_cast<unsigned char>(
        std::clamp(std::lround(v), 0L, 255L))));
  }
  WriteFileBytes(path, out);
}

}  // namespace crossmatch
