// Copyright 2026 The DragForge Authors
// SPDX-License-Identifier: Apache-2.0

// JSON section parsers shared by the configuration loader and the HTTP service.

#pragma once

#include <set>
#include <string>
#include <vector>

#include "dragforge/config.hpp"
#include "json.hpp"

namespace dragforge::detail {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

/// A JSON object being read key by key. finish() rejects keys nobody asked for.
class Section {
 public:
  Section(const json& value, std::string path);

  bool has(const char* key) const;
  std::string path_of(const char* key) const;
  const json& raw(const char* key);

  void read(const char* key, int& out);
  void read(const char* key, double& out);
  void read(const char* key, bool& out);
  void read(const char* key, std::string& out);
  void read(const char* key, std::uint64_t& out);
  void read(const char* key, std::vector<double>& out);
  void read(const char* key, std::vector<float>& out);
  void read(const char* key, Point& out);

  void finish() const;

 private:
  const json& value_;
  std::string path_;
  std::set<std::string> used_;
};

/// Parses a document, reporting syntax errors against `what`.
json parse_json(std::string_view text, const std::string& what);

void apply_slic(const json& j, const std::string& path, SlicOptions& slic);
std::vector<DragPair> parse_pairs(const json& j, const std::string& path);
void apply_drag(const json& j, const std::string& path, DragInstruction& instr,
                RegionMode& region, DragOptions& options);
void apply_sampler(const json& j, const std::string& path, SamplerConfig& sampler,
                   const FileResolver& resolve);
FeatureField parse_field(const json& j, const std::string& path, const FileResolver& resolve);

/// Grid stored in a referenced file.
GridTensor resolve_grid(const FileResolver& resolve, const std::string& reference,
                        const std::string& json_path);

ordered_json point_json(const Point& p);

}  // namespace dragforge::detail
