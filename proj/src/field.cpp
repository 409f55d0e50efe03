// Copyright 2026 The DragForge Authors
// SPDX-License-Identifier: Apache-2.0

#include "dragforge/field.hpp"

#include <algorithm>
#include <cmath>

namespace dragforge {

namespace {

template <class... Fs>
struct Overloaded : Fs... {
  using Fs::operator()...;
};
template <class... Fs>
Overloaded(Fs...) -> Overloaded<Fs...>;

void validate(const LinearConvParams& p) {
  if (p.in_channels < 1 || p.out_channels < 1) {
    throw ParameterError("linear-conv channel counts must be positive");
  }
  if (p.kernel_size < 1 || p.kernel_size % 2 == 0) {
    throw ParameterError("linear-conv kernel_size must be odd and positive, got " +
                         std::to_string(p.kernel_size));
  }
  const std::size_t expect = static_cast<std::size_t>(p.out_channels) * p.in_channels *
                             p.kernel_size * p.kernel_size;
  if (p.weights.size() != expect) {
    throw ParameterError("linear-conv expects " + std::to_string(expect) + " weights, got " +
                         std::to_string(p.weights.size()));
  }
  if (!p.bias.empty() && p.bias.size() != static_cast<std::size_t>(p.out_channels)) {
    throw ParameterError("linear-conv bias must have out_channels entries");
  }
}

void validate(const BumpParams& p) {
  if (!(p.sigma > 0.0) || !(p.window > 0.0)) {
    throw ParameterError("analytic-bump sigma and window must be positive");
  }
  if (!std::isfinite(p.amplitude) || !std::isfinite(p.gain) || !std::isfinite(p.slope)) {
    throw ParameterError("analytic-bump parameters must be finite");
  }
  if (!p.background.empty() && p.background.channels() != 3) {
    throw ParameterError("analytic-bump background must have 3 channels");
  }
  if (!p.passthrough.empty() && p.passthrough.channels() != 1) {
    throw ParameterError("analytic-bump passthrough gate must have 1 channel");
  }
  if (p.passthrough_channel < 0) throw ParameterError("passthrough channel must be >= 0");
}

void validate(const TabulatedParams& p) {
  if (p.table.empty()) throw ParameterError("tabulated field needs a table");
  if (!std::isfinite(p.scale)) throw ParameterError("tabulated scale must be finite");
}

// Normalized Gaussian window over an h x w grid, row-major.
std::vector<double> bump_window(const BumpParams& p, int h, int w) {
  std::vector<double> win(static_cast<std::size_t>(h) * w);
  const double inv = 1.0 / (2.0 * p.window * p.window);
  double total = 0.0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double dx = x - p.base_center.x;
      const double dy = y - p.base_center.y;
      const double v = std::exp(-(dx * dx + dy * dy) * inv);
      win[static_cast<std::size_t>(y) * w + x] = v;
      total += v;
    }
  }
  if (!(total > 0.0)) throw NumericError("analytic-bump window vanishes on this grid");
  for (auto& v : win) v /= total;
  return win;
}

double clampd(double v, double lo, double hi) { return std::min(std::max(v, lo), hi); }

}  // namespace

std::string_view to_string(FieldKind kind) {
  switch (kind) {
    case FieldKind::identity: return "identity";
    case FieldKind::linear_conv: return "linear-conv";
    case FieldKind::analytic_bump: return "analytic-bump";
    case FieldKind::tabulated: return "tabulated";
  }
  return "unknown";
}

FieldKind parse_field_kind(std::string_view name) {
  if (name == "identity") return FieldKind::identity;
  if (name == "linear-conv") return FieldKind::linear_conv;
  if (name == "analytic-bump") return FieldKind::analytic_bump;
  if (name == "tabulated") return FieldKind::tabulated;
  throw ParameterError("unknown field kind '" + std::string(name) + "'");
}

FeatureField::FeatureField(Params params) : params_(std::move(params)) {
  std::visit(Overloaded{[](const IdentityParams&) {}, [](const auto& p) { validate(p); }},
             params_);
}

FieldKind FeatureField::kind() const {
  return static_cast<FieldKind>(params_.index());
}

int FeatureField::output_channels(int latent_channels) const {
  return std::visit(Overloaded{
                        [&](const IdentityParams&) { return latent_channels; },
                        [](const LinearConvParams& p) { return p.out_channels; },
                        [](const BumpParams&) { return 3; },
                        [](const TabulatedParams& p) { return p.table.channels(); },
                    },
                    params_);
}

void FeatureField::check_latent(int height, int width, int channels) const {
  std::visit(
      Overloaded{
          [](const IdentityParams&) {},
          [&](const LinearConvParams& p) {
            if (channels != p.in_channels) {
              throw ShapeError("linear-conv expects " + std::to_string(p.in_channels) +
                               " latent channels, got " + std::to_string(channels));
            }
          },
          [&](const BumpParams& p) {
            if (channels < 2) throw ShapeError("analytic-bump needs at least 2 latent channels");
            if (!p.background.empty() && !p.background.same_spatial(height, width)) {
              throw ShapeError("analytic-bump background is " + p.background.shape_string() +
                               " but latent is " + std::to_string(height) + "x" +
                               std::to_string(width));
            }
            if (!p.passthrough.empty() && !p.passthrough.same_spatial(height, width)) {
              throw ShapeError("analytic-bump passthrough gate is " +
                               p.passthrough.shape_string() + " but latent is " +
                               std::to_string(height) + "x" + std::to_string(width));
            }
          },
          [&](const TabulatedParams& p) {
            if (channels < 2) throw ShapeError("tabulated field needs at least 2 latent channels");
            if (!p.table.same_spatial(height, width)) {
              throw ShapeError("tabulated table is " + p.table.shape_string() +
                               " but latent is " + std::to_string(height) + "x" +
                               std::to_string(width));
            }
          },
      },
      params_);
}

template <class T>
Point bump_center(const BumpParams& p, const BasicGrid<T>& z) {
  const auto win = bump_window(p, z.height(), z.width());
  double sx = 0.0, sy = 0.0;
  for (int y = 0; y < z.height(); ++y) {
    for (int x = 0; x < z.width(); ++x) {
      const double w = win[static_cast<std::size_t>(y) * z.width() + x];
      sx += w * z.at(y, x, 0);
      sy += w * z.at(y, x, 1);
    }
  }
  return {p.base_center.x + p.gain * sx, p.base_center.y + p.gain * sy};
}

namespace {

template <class T>
BasicGrid<T> conv_forward(const LinearConvParams& p, const BasicGrid<T>& z) {
  const int h = z.height(), w = z.width(), r = p.kernel_size / 2, k = p.kernel_size;
  BasicGrid<T> out(h, w, p.out_channels);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int o = 0; o < p.out_channels; ++o) {
        double acc = p.bias.empty() ? 0.0 : p.bias[o];
        for (int i = 0; i < p.in_channels; ++i) {
          for (int ky = 0; ky < k; ++ky) {
            const int yy = y + ky - r;
            if (yy < 0 || yy >= h) continue;
            for (int kx = 0; kx < k; ++kx) {
              const int xx = x + kx - r;
              if (xx < 0 || xx >= w) continue;
              acc += static_cast<double>(p.weights[((o * p.in_channels + i) * k + ky) * k + kx]) *
                     z.at(yy, xx, i);
            }
          }
        }
        out.at(y, x, o) = static_cast<T>(acc);
      }
    }
  }
  return out;
}

// Transposed correlation: scatter each output cotangent back over its receptive field.
template <class T>
BasicGrid<T> conv_adjoint(const LinearConvParams& p, const BasicGrid<T>& z,
                          const BasicGrid<T>& u) {
  const int h = z.height(), w = z.width(), r = p.kernel_size / 2, k = p.kernel_size;
  std::vector<double> acc(z.size(), 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int o = 0; o < p.out_channels; ++o) {
        const double cu = u.at(y, x, o);
        if (cu == 0.0) continue;
        for (int i = 0; i < p.in_channels; ++i) {
          for (int ky = 0; ky < k; ++ky) {
            const int yy = y + ky - r;
            if (yy < 0 || yy >= h) continue;
            for (int kx = 0; kx < k; ++kx) {
              const int xx = x + kx - r;
              if (xx < 0 || xx >= w) continue;
              acc[z.index(yy, xx, i)] +=
                  static_cast<double>(p.weights[((o * p.in_channels + i) * k + ky) * k + kx]) * cu;
            }
          }
        }
      }
    }
  }
  return BasicGrid<T>(h, w, z.channels(), std::vector<T>(acc.begin(), acc.end()));
}

template <class T>
BasicGrid<T> bump_forward(const BumpParams& p, const BasicGrid<T>& z) {
  const Point c = bump_center(p, z);
  const double inv2s2 = 1.0 / (2.0 * p.sigma * p.sigma);
  BasicGrid<T> out(z.height(), z.width(), 3);
  for (int y = 0; y < z.height(); ++y) {
    for (int x = 0; x < z.width(); ++x) {
      const double dx = x - c.x, dy = y - c.y;
      const double g = p.amplitude * std::exp(-(dx * dx + dy * dy) * inv2s2);
      double f[3] = {g, p.slope * g * dx / p.sigma, p.slope * g * dy / p.sigma};
      if (!p.background.empty()) {
        for (int ch = 0; ch < 3; ++ch) f[ch] += p.background.at(y, x, ch);
      }
      if (!p.passthrough.empty()) {
        const double gate = p.passthrough.at(y, x);
        const int base = p.passthrough_channel;
        for (int ch = 0; ch < 3 && base + ch < z.channels(); ++ch) {
          f[ch] += gate * z.at(y, x, base + ch);
        }
      }
      for (int ch = 0; ch < 3; ++ch) out.at(y, x, ch) = static_cast<T>(f[ch]);
    }
  }
  return out;
}

template <class T>
BasicGrid<T> bump_adjoint(const BumpParams& p, const BasicGrid<T>& z, const BasicGrid<T>& u) {
  const Point c = bump_center(p, z);
  const double s = p.sigma, inv2s2 = 1.0 / (2.0 * s * s);
  double gx = 0.0, gy = 0.0;  // d<F, u>/dc
  for (int y = 0; y < z.height(); ++y) {
    for (int x = 0; x < z.width(); ++x) {
      const double dx = x - c.x, dy = y - c.y;
      const double g = p.amplitude * std::exp(-(dx * dx + dy * dy) * inv2s2);
      const double u0 = u.at(y, x, 0), u1 = u.at(y, x, 1), u2 = u.at(y, x, 2);
      const double e = p.slope * g / s;
      gx += u0 * g * dx / (s * s) + u1 * e * (dx * dx / (s * s) - 1.0) +
            u2 * e * dx * dy / (s * s);
      gy += u0 * g * dy / (s * s) + u1 * e * dx * dy / (s * s) +
            u2 * e * (dy * dy / (s * s) - 1.0);
    }
  }
  const auto win = bump_window(p, z.height(), z.width());
  BasicGrid<T> out(z.height(), z.width(), z.channels());
  for (int y = 0; y < z.height(); ++y) {
    for (int x = 0; x < z.width(); ++x) {
      const double w = win[static_cast<std::size_t>(y) * z.width() + x];
      out.at(y, x, 0) = static_cast<T>(p.gain * w * gx);
      out.at(y, x, 1) = static_cast<T>(p.gain * w * gy);
      if (!p.passthrough.empty()) {
        const double gate = p.passthrough.at(y, x);
        const int base = p.passthrough_channel;
        for (int ch = 0; ch < 3 && base + ch < z.channels(); ++ch) {
          out.at(y, x, base + ch) += static_cast<T>(gate * u.at(y, x, ch));
        }
      }
    }
  }
  return out;
}

struct WarpSample {
  BilinearStencil st;
  double fx = 0.0, fy = 0.0;
  bool free_x = true, free_y = true;  // false when the coordinate was clamped
};

WarpSample warp_sample(const TabulatedParams& p, int y, int x, double d0, double d1) {
  const int h = p.table.height(), w = p.table.width();
  const double rx = x + p.scale * d0, ry = y + p.scale * d1;
  WarpSample s;
  const double cx = clampd(rx, 0.0, w - 1), cy = clampd(ry, 0.0, h - 1);
  s.free_x = cx == rx;
  s.free_y = cy == ry;
  s.st = bilinear_stencil(h, w, {cx, cy});
  s.fx = cx - s.st.x0;
  s.fy = cy - s.st.y0;
  if (s.st.x1 == s.st.x0) s.fx = 0.0;
  if (s.st.y1 == s.st.y0) s.fy = 0.0;
  return s;
}

template <class T>
BasicGrid<T> warp_forward(const TabulatedParams& p, const BasicGrid<T>& z) {
  const auto& t = p.table;
  BasicGrid<T> out(z.height(), z.width(), t.channels());
  for (int y = 0; y < z.height(); ++y) {
    for (int x = 0; x < z.width(); ++x) {
      const auto s = warp_sample(p, y, x, z.at(y, x, 0), z.at(y, x, 1));
      for (int c = 0; c < t.channels(); ++c) {
        const double v = s.st.w00 * t.at(s.st.y0, s.st.x0, c) + s.st.w01 * t.at(s.st.y0, s.st.x1, c) +
                         s.st.w10 * t.at(s.st.y1, s.st.x0, c) + s.st.w11 * t.at(s.st.y1, s.st.x1, c);
        out.at(y, x, c) = static_cast<T>(v);
      }
    }
  }
  return out;
}

template <class T>
BasicGrid<T> warp_adjoint(const TabulatedParams& p, const BasicGrid<T>& z, const BasicGrid<T>& u) {
  const auto& t = p.table;
  BasicGrid<T> out(z.height(), z.width(), z.channels());
  for (int y = 0; y < z.height(); ++y) {
    for (int x = 0; x < z.width(); ++x) {
      const auto s = warp_sample(p, y, x, z.at(y, x, 0), z.at(y, x, 1));
      const auto& st = s.st;
      double gx = 0.0, gy = 0.0;
      for (int c = 0; c < t.channels(); ++c) {
        const double t00 = t.at(st.y0, st.x0, c), t01 = t.at(st.y0, st.x1, c);
        const double t10 = t.at(st.y1, st.x0, c), t11 = t.at(st.y1, st.x1, c);
        const double uc = u.at(y, x, c);
        if (st.x1 != st.x0) gx += uc * ((1.0 - s.fy) * (t01 - t00) + s.fy * (t11 - t10));
        if (st.y1 != st.y0) gy += uc * ((1.0 - s.fx) * (t10 - t00) + s.fx * (t11 - t01));
      }
      out.at(y, x, 0) = static_cast<T>(s.free_x ? p.scale * gx : 0.0);
      out.at(y, x, 1) = static_cast<T>(s.free_y ? p.scale * gy : 0.0);
    }
  }
  return out;
}

}  // namespace

template <class T>
BasicGrid<T> field_forward(const FeatureField& field, const BasicGrid<T>& z) {
  field.check_latent(z.height(), z.width(), z.channels());
  return std::visit(Overloaded{
                        [&](const IdentityParams&) { return z; },
                        [&](const LinearConvParams& p) { return conv_forward(p, z); },
                        [&](const BumpParams& p) { return bump_forward(p, z); },
                        [&](const TabulatedParams& p) { return warp_forward(p, z); },
                    },
                    field.params());
}

template <class T>
BasicGrid<T> field_adjoint(const FeatureField& field, const BasicGrid<T>& z,
                           const BasicGrid<T>& cotangent) {
  field.check_latent(z.height(), z.width(), z.channels());
  if (!cotangent.same_spatial(z.height(), z.width()) ||
      cotangent.channels() != field.output_channels(z.channels())) {
    throw ShapeError("cotangent is " + cotangent.shape_string() + ", expected " +
                     std::to_string(z.height()) + "x" + std::to_string(z.width()) + "x" +
                     std::to_string(field.output_channels(z.channels())));
  }
  return std::visit(Overloaded{
                        [&](const IdentityParams&) { return cotangent; },
                        [&](const LinearConvParams& p) { return conv_adjoint(p, z, cotangent); },
                        [&](const BumpParams& p) { return bump_adjoint(p, z, cotangent); },
                        [&](const TabulatedParams& p) { return warp_adjoint(p, z, cotangent); },
                    },
                    field.params());
}

template GridTensor field_forward(const FeatureField&, const GridTensor&);
template GridTensorD field_forward(const FeatureField&, const GridTensorD&);
template GridTensor field_adjoint(const FeatureField&, const GridTensor&, const GridTensor&);
template GridTensorD field_adjoint(const FeatureField&, const GridTensorD&, const GridTensorD&);
template Point bump_center(const BumpParams&, const GridTensor&);
template Point bump_center(const BumpParams&, const GridTensorD&);

}  // namespace dragforge
