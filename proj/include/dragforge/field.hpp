// Copyright 2026 The DragForge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "dragforge/grid.hpp"

namespace dragforge {

enum class FieldKind { identity, linear_conv, analytic_bump, tabulated };

std::string_view to_string(FieldKind kind);
FieldKind parse_field_kind(std::string_view name);

/// F(z) = z.
struct IdentityParams {};

/// Same-size cross-correlation with zero padding.
/// weights are laid out [out][in][ky][kx]; kernel_size must be odd.
struct LinearConvParams {
  int in_channels = 1;
  int out_channels = 1;
  int kernel_size = 3;
  std::vector<float> weights;
  std::vector<float> bias;  // empty or out_channels long
};

/// A Gaussian bump whose center is read from the latent.
///
/// The center is c = base_center + gain * (<w, z[.,.,0]>, <w, z[.,.,1]>) where w is a
/// normalized Gaussian window of width `window` around base_center. The three output
/// channels are
///   F0 = a g,  F1 = slope a g (x - cx) / sigma,  F2 = slope a g (y - cy) / sigma
/// with g = exp(-|p - c|^2 / (2 sigma^2)), plus an optional static background layer.
/// An optional gate map lets three latent channels show through:
/// F_k += gate * z[passthrough_channel + k] for the channels the latent has.
struct BumpParams {
  double amplitude = 1.0;
  double sigma = 2.5;
  double slope = 1.0;
  Point base_center;
  double gain = 10.0;
  double window = 3.0;
  GridTensor background;   // empty, or H x W x 3
  GridTensor passthrough;  // empty, or H x W x 1 gate
  int passthrough_channel = 2;
};

/// Warps a fixed feature table by the displacement stored in latent channels 0 and 1:
/// F(z)(p) = table(p + scale * (z0(p), z1(p))), bilinear, with border clamping.
struct TabulatedParams {
  GridTensor table;
  double scale = 1.0;
};

class FeatureField {
 public:
  using Params = std::variant<IdentityParams, LinearConvParams, BumpParams, TabulatedParams>;

  FeatureField() = default;
  explicit FeatureField(Params params);

  static FeatureField identity() { return FeatureField(IdentityParams{}); }

  FieldKind kind() const;
  const Params& params() const { return params_; }

  /// Channel count of F(z) for a latent with `latent_channels` channels.
  int output_channels(int latent_channels) const;

  /// Throws ShapeError if a latent of this shape cannot be fed to the field.
  void check_latent(int height, int width, int channels) const;

 private:
  Params params_;
};

template <class T>
BasicGrid<T> field_forward(const FeatureField& field, const BasicGrid<T>& z);

/// Gradient of <field_forward(z), cotangent> with respect to z.
template <class T>
BasicGrid<T> field_adjoint(const FeatureField& field, const BasicGrid<T>& z,
                           const BasicGrid<T>& cotangent);

/// Center of an analytic bump for latent z.
template <class T>
Point bump_center(const BumpParams& params, const BasicGrid<T>& z);

}  // namespace dragforge
