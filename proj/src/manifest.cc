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

#include "crossmatch/manifest.h"

#include <fstream>
#include <set>

#include "json.hpp"

namespace crossmatch {

namespace {

using nlohmann::json;

std::string RequireString(const json& item, const char* key, std::size_t index) {
  const auto it = item.find(key);
  if (it == item.end() || !it->is_string()) {
    throw Error(ErrorCode::kFormat, "manifest item " + std::to_string(index) +
                                        ": missing string field '" + key + "'");
  }
  return it->get<std::string>();
}

}  // namespace

std::string_view ManifestRoleName(ManifestRole role) {
  return role == ManifestRole::kQuery ? "query" : "database";
}

std::vector<ManifestEntry> Manifest::Entries(ManifestRole role) const {
  std::vector<ManifestEntry> out;
  for (const auto& e : items) {
    if (e.role == role) out.push_back(e);
  }
  return out;
}

std::filesystem::path Manifest::Resolve(const ManifestEntry& entry) const {
  std::filesystem::path p(entry.path);
  return p.is_absolute() ? p : base_dir / p;
}

Manifest ParseManifest(std::string_view json_text, std::filesystem::path base_dir) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("manifest is not valid JSON: ") + e.what(),
                      e.byte);
  }
  if (!doc.is_object()) throw Error(ErrorCode::kFormat, "manifest must be a JSON object");
  Manifest m;
  m.base_dir = std::move(base_dir);
  m.version = doc.value("version", 1);
  if (m.version != 1) {
    throw Error(ErrorCode::kFormat,
                "unsupported manifest version " + std::to_string(m.version));
  }
  const auto items = doc.find("items");
  if (items == doc.end() || !items->is_array()) {
    throw Error(ErrorCode::kFormat, "manifest needs an 'items' array");
  }
  for (std::size_t i = 0; i < items->size(); ++i) {
    const json& item = (*items)[i];
    if (!item.is_object()) {
      throw Error(ErrorCode::kFormat,
                  "manifest item " + std::to_string(i) + " is not an object");
    }
    ManifestEntry e;
    e.id = RequireString(item, "id", i);
    const std::string role = RequireString(item, "role", i);
    if (role == "query") {
      e.role = ManifestRole::kQuery;
    } else if (role == "database") {
      e.role = ManifestRole::kDatabase;
    } else {
      throw Error(ErrorCode::kFormat, "manifest item " + std::to_string(i) +
                                          ": unknown role '" + role + "'");
    }
    e.domain_tag = item.value("domain_tag", "");
    e.path = RequireString(item, "path", i);
    e.group_id = RequireString(item, "group_id", i);
    if (const auto ar = item.find("area_ratio"); ar != item.end() && !ar->is_null()) {
      if (!ar->is_number() || ar->get<double>() < 0.0 || ar->get<double>() > 1.0) {
        throw Error(ErrorCode::kFormat, "manifest item " + std::to_string(i) +
                                            ": area_ratio must be in [0, 1]");
      }
      e.area_ratio = ar->get<double>();
    }
    m.items.push_back(std::move(e));
  }
  return m;
}

Manifest ReadManifest(const std::filesystem::path& path) {
  return ParseManifest(ReadFileBytes(path), path.parent_path());
}

std::string ManifestToJson(const Manifest& manifest) {
  json items = json::array();
  for (const auto& e : manifest.items) {
    json item = {{"id", e.id},
                 {"role", std::string(ManifestRoleName(e.role))},
                 {"domain_tag", e.domain_tag},
                 {"path", e.path},
                 {"group_id", e.group_id}};
    if (e.area_ratio) item["area_ratio"] = *e.area_ratio;
    items.push_back(std::move(item));
  }
  return json{{"version", manifest.version}, {"items", std::move(items)}}.dump(1) + "\n";
}

void WriteManifest(const std::filesystem::path& path, const Manifest& manifest) {
  WriteFileBytes(path, ManifestToJson(manifest));
}

void ValidateManifest(const Manifest& manifest, bool closed_set) {
  std::set<std::string> ids;
  std::set<std::string> db_groups;
  for (const auto& e : manifest.items) {
    if (!ids.insert(e.id).second) {
      throw Error(ErrorCode::kConfiguration, "duplicate manifest id '" + e.id + "'");
    }
    if (e.role == ManifestRole::kDatabase) db_groups.insert(e.group_id);
  }
  if (!closed_set) return;
  for (const auto& e : manifest.items) {
    if (e.role == ManifestRole::kQuery && !db_groups.contains(e.group_id)) {
      throw Error(ErrorCode::kConfiguration,
                  "query '" + e.id + "' has group '" + e.group_id +
                      "' with no database entry");
    }
  }
}

bool IsTensorFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  char magic[4] = {};
  in.read(magic, 4);
  return in.gcount() == 4 && std::string_view(magic, 4) == "XCT1";
}

LoadedInput LoadInput(const std::filesystem::path& path,
                      const InputOptions& options, std::string domain_tag) {
  LoadedInput in;
  if (IsTensorFile(path)) {
    in.map = ReadFeatureMap(path, options.read, std::move(domain_tag));
    return in;
  }
  in.image = ReadGrayImage(path).WithTag(domain_tag);
  in.map = FeaturizePixels(*in.image, options.featurizer).WithTag(domain_tag);
  return in;
}

std::vector<DatasetItem> LoadItems(const Manifest& manifest, ManifestRole role,
                                   const InputOptions& options,
                                   std::vector<LoadedInput>* inputs) {
  std::vector<DatasetItem> items;
  for (const auto& e : manifest.Entries(role)) {
    LoadedInput in;
    try {
      in = LoadInput(manifest.Resolve(e), options, e.domain_tag);
    } catch (const Error& err) {
      throw Error(err.code(), "manifest item '" + e.id + "': " + err.what());
    }
    items.push_back({e.id, in.map, e.group_id, e.area_ratio.value_or(1.0)});
    if (inputs != nullptr) inputs->push_back(std::move(in));
  }
  return items;
}

}  // namespace crossmatch
