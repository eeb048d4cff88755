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

// Binary tensor files, named-tensor bundles and grayscale image I/O.
//
// Tensor record ("XCT1"), all integers little-endian:
//   bytes 0..3   magic "XCT1"
//   byte  4      dtype: 0 = float32, 1 = float64
//   byte  5      rank
//   then         rank x uint32 dims
//   then         payload, row-major (channel-major for feature maps)
// A feature map is stored as rank 3 (C, H, W); rank 2 (H, W) reads as C = 1.
//
// Bundle ("XCTB"):
//   magic "XCTB", uint32 header length, UTF-8 JSON header,
//   uint32 tensor count, then per tensor: uint32 name length, name bytes,
//   one tensor record.

#ifndef CROSSMATCH_IO_H_
#define CROSSMATCH_IO_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "crossmatch/learn.h"
#include "crossmatch/normalize.h"
#include "crossmatch/tensor.h"
#include "crossmatch/whiten.h"

namespace crossmatch {

enum class DType : std::uint8_t { kFloat32 = 0, kFloat64 = 1 };

std::string_view DTypeName(DType dtype);
DType ParseDType(std::string_view name);

struct Tensor {
  DType dtype = DType::kFloat64;
  std::vector<std::uint32_t> dims;
  std::vector<double> values;  // float32 payloads are widened exactly

  std::size_t element_count() const;
};

// Throws kInvalidArgument when values do not match dims, or when a float32
// tensor holds a value that is not exactly representable in float32.
std::string EncodeTensor(const Tensor& tensor);

// Decodes one record starting at `offset`; advances offset past it. Errors
// carry absolute byte offsets.
Tensor DecodeTensor(std::string_view bytes, std::size_t* offset);

// Precision the caller computes in. Reading a float64 file into a float32
// pipeline is refused unless narrowing is allowed; values are then rounded.
struct ReadOptions {
  DType pipeline = DType::kFloat64;
  bool allow_narrowing = false;
};

Tensor ToTensor(const FeatureMap& map, DType dtype);
FeatureMap ToFeatureMap(const Tensor& tensor, const ReadOptions& options = {},
                        std::string domain_tag = {});

void WriteTensorFile(const std::filesystem::path& path, const Tensor& tensor);
Tensor ReadTensorFile(const std::filesystem::path& path);

// Writing as float32 rounds every value to float32 first.
void WriteFeatureMap(const std::filesystem::path& path, const FeatureMap& map,
                     DType dtype = DType::kFloat64);
FeatureMap ReadFeatureMap(const std::filesystem::path& path,
                          const ReadOptions& options = {},
                          std::string domain_tag = {});

struct Bundle {
  std::string header_json = "{}";
  std::vector<std::pair<std::string, Tensor>> tensors;

  const Tensor& Get(const std::string& name) const;
};

std::string EncodeBundle(const Bundle& bundle);
Bundle DecodeBundle(std::string_view bytes);
void WriteBundle(const std::filesystem::path& path, const Bundle& bundle);
Bundle ReadBundle(const std::filesystem::path& path);

// Typed bundles.
void WriteProjection(const std::filesystem::path& path, const Projection& proj);
Projection ReadProjection(const std::filesystem::path& path);
void WriteGlobalStats(const std::filesystem::path& path, const GlobalStats& stats);
GlobalStats ReadGlobalStats(const std::filesystem::path& path);

struct CheckpointInfo {
  std::uint64_t seed = 0;
  std::string regime = "weights";
};
void WriteModel(const std::filesystem::path& path, const SiameseModel& model,
                const CheckpointInfo& info);
SiameseModel ReadModel(const std::filesystem::path& path,
                       CheckpointInfo* info = nullptr);

// 8-bit grayscale PGM (P2/P5) or PNG into a one-channel map with values
// 0..255. Anything else is a format error.
FeatureMap ReadGrayImage(const std::filesystem::path& path);
void WritePgm(const std::filesystem::path& path, const FeatureMap& image);

std::string ReadFileBytes(const std::filesystem::path& path);
void WriteFileBytes(const std::filesystem::path& path, std::string_view bytes);

}  // namespace crossmatch

#endif  // CROSSMATCH_IO_H_
