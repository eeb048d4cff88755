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

// Dataset manifests: a JSON document listing query and database entries.
//
//   {"version": 1,
//    "items": [{"id": "q0", "role": "query", "domain_tag": "scene",
//               "path": "q0.xct", "group_id": "shoe-17", "area_ratio": 0.5},
//              ...]}
//
// Paths are relative to the manifest's directory unless absolute. A path may
// name a tensor file or an 8-bit grayscale PGM/PNG image; the file contents
// decide which.

#ifndef CROSSMATCH_MANIFEST_H_
#define CROSSMATCH_MANIFEST_H_

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "crossmatch/eval.h"
#include "crossmatch/featurize.h"
#include "crossmatch/io.h"

namespace crossmatch {

enum class ManifestRole { kQuery, kDatabase };

std::string_view ManifestRoleName(ManifestRole role);

struct ManifestEntry {
  std::string id;
  ManifestRole role = ManifestRole::kDatabase;
  std::string domain_tag;
  std::string path;  // as written in the manifest
  std::string group_id;
  std::optional<double> area_ratio;
};

struct Manifest {
  int version = 1;
  std::vector<ManifestEntry> items;
  std::filesystem::path base_dir;

  std::vector<ManifestEntry> Entries(ManifestRole role) const;
  std::filesystem::path Resolve(const ManifestEntry& entry) const;
};

// Schema errors are kFormat; an unknown role or a missing field names the
// offending item.
Manifest ParseManifest(std::string_view json_text,
                       std::filesystem::path base_dir = {});
Manifest ReadManifest(const std::filesystem::path& path);
std::string ManifestToJson(const Manifest& manifest);
void WriteManifest(const std::filesystem::path& path, const Manifest& manifest);

// Ids must be unique. With closed_set every query group must appear among the
// database entries. Throws kConfiguration.
void ValidateManifest(const Manifest& manifest, bool closed_set = true);

// True when the file starts with the tensor magic.
bool IsTensorFile(const std::filesystem::path& path);

struct InputOptions {
  ReadOptions read;
  PixelFeaturizerConfig featurizer;
};

// A loaded input. Images keep the pixel array so rotation can happen before
// featurization.
struct LoadedInput {
  FeatureMap map;
  std::optional<FeatureMap> image;
};

LoadedInput LoadInput(const std::filesystem::path& path,
                      const InputOptions& options, std::string domain_tag = {});

std::vector<DatasetItem> LoadItems(const Manifest& manifest, ManifestRole role,
                                   const InputOptions& options,
                                   std::vector<LoadedInput>* inputs = nullptr);

}  // namespace crossmatch

#endif  // CROSSMATCH_MANIFEST_H_
