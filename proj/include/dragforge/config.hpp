// Copyright 2026 The DragForge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>

#include "dragforge/drag.hpp"
#include "dragforge/field.hpp"
#include "dragforge/grid.hpp"
#include "dragforge/mask.hpp"
#include "dragforge/sampler.hpp"
#include "dragforge/scenes.hpp"
#include "dragforge/superpixel.hpp"

namespace dragforge {

/// A configuration document or payload is invalid. The message starts with the
/// offending location, a JSON path such as "drag.n_max" or a file path.
class ValidationError : public Error {
 public:
  using Error::Error;
};

struct SamplerConfig {
  bool enabled = true;
  NoiseSchedule schedule = NoiseSchedule::scaled_linear();
  int t_opt = 35;  // step at which the latent is optimized
  NoisePredictor predictor;
  GuidanceOptions guidance;

  /// Throws ValidationError when t_opt or the guidance window do not fit the schedule.
  void validate() const;
};

/// Everything one run of the pipeline needs, with every referenced file loaded.
struct PipelineConfig {
  GridTensor latent;    // clean input latent z_0
  GridTensor features;  // segmentation feature space
  FeatureField field;
  SlicOptions slic;
  int mask_dilation = 0;
  std::optional<Mask> external_mask;
  DragInstruction instruction;
  RegionMode region;
  DragOptions drag;
  SamplerConfig sampler;
  std::uint64_t seed = 0;

  /// Cross-checks shapes and bounds. Throws ValidationError.
  void validate() const;
};

/// Resolves a file reference found at a JSON path to its bytes. Throws ValidationError
/// when the reference cannot be resolved.
using FileResolver = std::function<std::string(const std::string& reference,
                                               const std::string& json_path)>;

/// Resolver reading files relative to a base directory.
FileResolver directory_resolver(const std::filesystem::path& base);

/// Parses a configuration document. File references go through `resolve`.
/// Unknown keys are rejected so that misspelt options do not pass silently.
PipelineConfig parse_config(std::string_view text, const FileResolver& resolve);

/// Reads and parses a configuration file; relative paths resolve against its directory.
PipelineConfig load_config(const std::filesystem::path& path);

/// Writes a scene as a ready-to-run scenario: latent.dft, features.dft, any field
/// grids, and config.json. Returns the path of config.json. Without the sampler the
/// scene latent is optimized as given instead of being inverted to step t_opt first.
std::filesystem::path export_scene(const Scene& scene, const std::filesystem::path& dir,
                                   std::uint64_t seed = 0, bool with_sampler = true);

}  // namespace dragforge
