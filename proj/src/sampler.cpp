// Copyright 2026 The DragForge Authors
// SPDX-License-Identifier: Apache-2.0

#include "dragforge/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "json.hpp"

namespace dragforge {

void NoiseSchedule::validate() const {
  if (T < 1) throw ParameterError("schedule needs T >= 1");
  if (alpha.size() != static_cast<std::size_t>(T) + 1) {
    throw ParameterError("schedule needs T + 1 = " + std::to_string(T + 1) + " alphas, got " +
                         std::to_string(alpha.size()));
  }
  if (alpha[0] != 1.0) throw ParameterError("schedule alpha_0 must be 1");
  for (int t = 1; t <= T; ++t) {
    if (!(alpha[t] > 0.0) || !std::isfinite(alpha[t])) {
      throw ParameterError("schedule alpha_" + std::to_string(t) + " must be positive");
    }
    if (alpha[t] > alpha[t - 1]) {
      throw ParameterError("schedule increases at step " + std::to_string(t));
    }
  }
}

NoiseSchedule NoiseSchedule::scaled_linear(int steps, int train_steps, double beta_start,
                                           double beta_end) {
  if (steps < 1 || train_steps < steps) throw ParameterError("invalid schedule step counts");
  std::vector<double> cumprod(train_steps);
  const double s0 = std::sqrt(beta_start), s1 = std::sqrt(beta_end);
  double acc = 1.0;
  for (int i = 0; i < train_steps; ++i) {
    const double s = train_steps == 1 ? s0 : s0 + (s1 - s0) * i / (train_steps - 1);
    acc *= 1.0 - s * s;
    cumprod[i] = acc;
  }
  const int stride = train_steps / steps;
  NoiseSchedule sched;
  sched.T = steps;
  sched.alpha.push_back(1.0);
  for (int k = 1; k <= steps; ++k) sched.alpha.push_back(cumprod[(k - 1) * stride + 1]);
  sched.validate();
  return sched;
}

std::string NoiseSchedule::to_json() const {
  nlohmann::json j;
  j["T"] = T;
  j["alpha"] = alpha;
  return j.dump();
}

NoiseSchedule NoiseSchedule::from_json(std::string_view text) {
  NoiseSchedule s;
  try {
    const auto j = nlohmann::json::parse(text);
    s.T = j.at("T").get<int>();
    s.alpha = j.at("alpha").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("invalid schedule JSON: ") + e.what());
  }
  s.validate();
  return s;
}

std::string_view to_string(PredictorKind kind) {
  switch (kind) {
    case PredictorKind::zero: return "zero";
    case PredictorKind::constant: return "constant";
    case PredictorKind::linear: return "linear";
    case PredictorKind::tabulated: return "tabulated";
  }
  return "unknown";
}

PredictorKind parse_predictor_kind(std::string_view name) {
  for (auto k : {PredictorKind::zero, PredictorKind::constant, PredictorKind::linear,
                 PredictorKind::tabulated}) {
    if (to_string(k) == name) return k;
  }
  throw ParameterError("unknown predictor kind '" + std::string(name) + "'");
}

void NoisePredictor::validate() const {
  if (!std::isfinite(constant) || !std::isfinite(slope) || !std::isfinite(intercept)) {
    throw ParameterError("predictor parameters must be finite");
  }
  if (kind == PredictorKind::tabulated) {
    if (gains.empty()) throw ParameterError("tabulated predictor needs a gain table");
    for (double g : gains) {
      if (!std::isfinite(g)) throw ParameterError("predictor gains must be finite");
    }
  }
}

template <class T>
BasicGrid<T> NoisePredictor::predict(const BasicGrid<T>& z, int t) const {
  BasicGrid<T> out(z.height(), z.width(), z.channels());
  auto ov = out.values();
  auto zv = z.values();
  switch (kind) {
    case PredictorKind::zero:
      break;
    case PredictorKind::constant:
      std::fill(ov.begin(), ov.end(), static_cast<T>(constant));
      break;
    case PredictorKind::linear:
      for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = static_cast<T>(slope * zv[i] + intercept);
      break;
    case PredictorKind::tabulated: {
      if (t < 0 || static_cast<std::size_t>(t) >= gains.size()) {
        throw ParameterError("predictor gain table has no entry for step " + std::to_string(t));
      }
      const double g = gains[t];
      for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = static_cast<T>(g * zv[i]);
      break;
    }
  }
  return out;
}

template BasicGrid<float> NoisePredictor::predict(const BasicGrid<float>&, int) const;
template BasicGrid<double> NoisePredictor::predict(const BasicGrid<double>&, int) const;

namespace {

void check_step([[maybe_unused]] const NoiseSchedule& sched, int t, int lo, int hi) {
  if (t < lo || t > hi) {
    throw ParameterError("step " + std::to_string(t) + " outside [" + std::to_string(lo) + ", " +
                         std::to_string(hi) + "]");
  }
}

// z' = sqrt(a1 / a0) z + sqrt(a1) (sqrt(1/a1 - 1) - sqrt(1/a0 - 1)) eps
template <class T>
BasicGrid<T> ddim_transfer(const BasicGrid<T>& z, const BasicGrid<T>& eps, double a0, double a1) {
  const double cz = std::sqrt(a1 / a0);
  const double ce = std::sqrt(a1) * (std::sqrt(1.0 / a1 - 1.0) - std::sqrt(1.0 / a0 - 1.0));
  BasicGrid<T> out(z.height(), z.width(), z.channels());
  auto ov = out.values();
  auto zv = z.values();
  auto ev = eps.values();
  for (std::size_t i = 0; i < ov.size(); ++i) {
    ov[i] = static_cast<T>(cz * zv[i] + ce * ev[i]);
  }
  return out;
}

}  // namespace

template <class T>
double ddpm_loss(const NoisePredictor& pred, const BasicGrid<T>& z0, const BasicGrid<T>& eps,
                 int t, const NoiseSchedule& sched) {
  sched.validate();
  check_step(sched, t, 1, sched.T);
  if (!z0.same_shape(eps)) throw ShapeError("noise shape differs from latent");
  const double a = sched.alpha[t];
  BasicGrid<T> zt(z0.height(), z0.width(), z0.channels());
  for (std::size_t i = 0; i < zt.size(); ++i) {
    zt.values()[i] = static_cast<T>(std::sqrt(a) * z0.values()[i] +
                                    std::sqrt(1.0 - a) * eps.values()[i]);
  }
  const BasicGrid<T> p = pred.predict(zt, t);
  double loss = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double d = static_cast<double>(eps.values()[i]) - p.values()[i];
    loss += d * d;
  }
  return loss;
}

template <class T>
BasicGrid<T> ddim_step(const BasicGrid<T>& z_t, int t, const NoisePredictor& pred,
                       const NoiseSchedule& sched) {
  check_step(sched, t, 1, sched.T);
  if (sched.alpha.size() != static_cast<std::size_t>(sched.T) + 1) sched.validate();
  return ddim_transfer(z_t, pred.predict(z_t, t), sched.alpha[t], sched.alpha[t - 1]);
}

template <class T>
BasicGrid<T> ddim_invert_step(const BasicGrid<T>& z_t, int t, const NoisePredictor& pred,
                              const NoiseSchedule& sched) {
  check_step(sched, t, 0, sched.T - 1);
  if (sched.alpha.size() != static_cast<std::size_t>(sched.T) + 1) sched.validate();
  return ddim_transfer(z_t, pred.predict(z_t, t), sched.alpha[t], sched.alpha[t + 1]);
}

template <class T>
BasicGrid<T> ddim_invert(const BasicGrid<T>& z, int from, int to, const NoisePredictor& pred,
                         const NoiseSchedule& sched) {
  sched.validate();
  if (from < 0 || to > sched.T || from > to) throw ParameterError("invalid inversion range");
  BasicGrid<T> cur = z;
  for (int t = from; t < to; ++t) cur = ddim_invert_step(cur, t, pred, sched);
  return cur;
}

template <class T>
BasicGrid<T> ddim_sample(const BasicGrid<T>& z, int from, int to, const NoisePredictor& pred,
                         const NoiseSchedule& sched) {
  sched.validate();
  if (to < 0 || from > sched.T || to > from) throw ParameterError("invalid sampling range");
  BasicGrid<T> cur = z;
  for (int t = from; t > to; --t) cur = ddim_step(cur, t, pred, sched);
  return cur;
}

#define DRAGFORGE_SAMPLER_INSTANTIATE(T)                                                     \
  template double ddpm_loss(const NoisePredictor&, const BasicGrid<T>&, const BasicGrid<T>&, \
                            int, const NoiseSchedule&);                                      \
  template BasicGrid<T> ddim_step(const BasicGrid<T>&, int, const NoisePredictor&,           \
                                  const NoiseSchedule&);                                     \
  template BasicGrid<T> ddim_invert_step(const BasicGrid<T>&, int, const NoisePredictor&,    \
                                         const NoiseSchedule&);                              \
  template BasicGrid<T> ddim_invert(const BasicGrid<T>&, int, int, const NoisePredictor&,    \
                                    const NoiseSchedule&);                                   \
  template BasicGrid<T> ddim_sample(const BasicGrid<T>&, int, int, const NoisePredictor&,    \
                                    const NoiseSchedule&);                                   \
  template FeaturePatch extract_patch(const BasicGrid<T>&, const Point&, int);               \
  template BasicGrid<T> guided_sample(const BasicGrid<T>&, int, const NoiseSchedule&,        \
                                      const NoisePredictor&, const BasicGrid<T>&,            \
                                      const std::vector<DragPair>&, const GuidanceOptions&);

ClossResult closs(const std::vector<PatchPair>& pairs, double temperature) {
  if (pairs.empty()) throw ParameterError("closs needs at least one patch pair");
  if (!(temperature > 0.0)) throw ParameterError("temperature must be > 0");
  ClossResult out;
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const FeaturePatch& a = pairs[p].a;
    const FeaturePatch& b = pairs[p].b;
    if (a.rows != b.rows || a.cols != b.cols || a.rows < 1 || a.cols < 1 ||
        a.data.size() != static_cast<std::size_t>(a.rows) * a.cols ||
        b.data.size() != a.data.size()) {
      throw ShapeError("closs patches must have equal, consistent shapes");
    }
    const int n = a.rows, c = a.cols;
    auto normalise = [&](const FeaturePatch& m, const char* which, std::vector<double>& unit,
                         std::vector<double>& norms) {
      unit.assign(m.data.size(), 0.0);
      norms.assign(n, 0.0);
      for (int i = 0; i < n; ++i) {
        double s = 0.0;
        for (int k = 0; k < c; ++k) s += m.at(i, k) * m.at(i, k);
        const double nrm = std::sqrt(s);
        if (!(nrm > 0.0)) {
          throw NumericError(std::string("zero-norm feature vector in patch ") + which +
                             " of pair " + std::to_string(p) + " at pixel " + std::to_string(i));
        }
        norms[i] = nrm;
        for (int k = 0; k < c; ++k) unit[static_cast<std::size_t>(i) * c + k] = m.at(i, k) / nrm;
      }
    };
    std::vector<double> ua, ub, na, nb;
    normalise(a, "a", ua, na);
    normalise(b, "b", ub, nb);

    std::vector<double> s(static_cast<std::size_t>(n) * n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        double d = 0.0;
        for (int k = 0; k < c; ++k) {
          d += ua[static_cast<std::size_t>(i) * c + k] * ub[static_cast<std::size_t>(j) * c + k];
        }
        s[static_cast<std::size_t>(i) * n + j] = d / temperature;
      }
    }
    // dL/dS accumulates (softmax - identity) from both directions, each weighted 1/(2n).
    std::vector<double> ds(s.size(), 0.0);
    double row_ce = 0.0, col_ce = 0.0;
    for (int i = 0; i < n; ++i) {
      double mx = -std::numeric_limits<double>::infinity();
      for (int j = 0; j < n; ++j) mx = std::max(mx, s[static_cast<std::size_t>(i) * n + j]);
      double z = 0.0;
      for (int j = 0; j < n; ++j) z += std::exp(s[static_cast<std::size_t>(i) * n + j] - mx);
      row_ce += mx + std::log(z) - s[static_cast<std::size_t>(i) * n + i];
      for (int j = 0; j < n; ++j) {
        const double pr = std::exp(s[static_cast<std::size_t>(i) * n + j] - mx) / z;
        ds[static_cast<std::size_t>(i) * n + j] += (pr - (i == j)) / (2.0 * n);
      }
    }
    for (int j = 0; j < n; ++j) {
      double mx = -std::numeric_limits<double>::infinity();
      for (int i = 0; i < n; ++i) mx = std::max(mx, s[static_cast<std::size_t>(i) * n + j]);
      double z = 0.0;
      for (int i = 0; i < n; ++i) z += std::exp(s[static_cast<std::size_t>(i) * n + j] - mx);
      col_ce += mx + std::log(z) - s[static_cast<std::size_t>(j) * n + j];
      for (int i = 0; i < n; ++i) {
        const double pr = std::exp(s[static_cast<std::size_t>(i) * n + j] - mx) / z;
        ds[static_cast<std::size_t>(i) * n + j] += (pr - (i == j)) / (2.0 * n);
      }
    }
    out.loss += 0.5 * (row_ce / n + col_ce / n);

    FeaturePatch g{n, c, std::vector<double>(static_cast<std::size_t>(n) * c, 0.0)};
    for (int j = 0; j < n; ++j) {
      // Gradient with respect to the unit row, then through the normalisation.
      std::vector<double> gu(c, 0.0);
      for (int i = 0; i < n; ++i) {
        const double w = ds[static_cast<std::size_t>(i) * n + j] / temperature;
        for (int k = 0; k < c; ++k) gu[k] += w * ua[static_cast<std::size_t>(i) * c + k];
      }
      double proj = 0.0;
      for (int k = 0; k < c; ++k) proj += gu[k] * ub[static_cast<std::size_t>(j) * c + k];
      for (int k = 0; k < c; ++k) {
        g.data[static_cast<std::size_t>(j) * c + k] =
            (gu[k] - proj * ub[static_cast<std::size_t>(j) * c + k]) / nb[j];
      }
    }
    out.grad_b.push_back(std::move(g));
  }
  return out;
}

template <class T>
FeaturePatch extract_patch(const BasicGrid<T>& grid, const Point& p, int radius) {
  if (radius < 0) throw ParameterError("patch radius must be >= 0");
  const Pixel c = nearest_pixel(p);
  if (c.x - radius < 0 || c.y - radius < 0 || c.x + radius >= grid.width() ||
      c.y + radius >= grid.height()) {
    throw BoundsError("patch of radius " + std::to_string(radius) + " around " + describe(p) +
                      " leaves the " + grid.shape_string() + " grid");
  }
  FeaturePatch out;
  out.rows = (2 * radius + 1) * (2 * radius + 1);
  out.cols = grid.channels();
  out.data.reserve(static_cast<std::size_t>(out.rows) * out.cols);
  for (int y = c.y - radius; y <= c.y + radius; ++y) {
    for (int x = c.x - radius; x <= c.x + radius; ++x) {
      for (T v : grid.pixel(y, x)) out.data.push_back(static_cast<double>(v));
    }
  }
  return out;
}

double mean_row_cosine(const FeaturePatch& a, const FeaturePatch& b) {
  if (a.rows != b.rows || a.cols != b.cols) throw ShapeError("patch shapes differ");
  double total = 0.0;
  for (int i = 0; i < a.rows; ++i) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (int k = 0; k < a.cols; ++k) {
      dot += a.at(i, k) * b.at(i, k);
      na += a.at(i, k) * a.at(i, k);
      nb += b.at(i, k) * b.at(i, k);
    }
    if (na > 0.0 && nb > 0.0) total += dot / std::sqrt(na * nb);
  }
  return total / a.rows;
}

template <class T>
BasicGrid<T> guided_sample(const BasicGrid<T>& z_start, int t_start, const NoiseSchedule& sched,
                           const NoisePredictor& pred, const BasicGrid<T>& z0_ref,
                           const std::vector<DragPair>& pairs, const GuidanceOptions& guidance) {
  sched.validate();
  pred.validate();
  check_step(sched, t_start, 0, sched.T);
  if (!z_start.same_shape(z0_ref)) throw ShapeError("z0_ref shape differs from the latent");
  if (guidance.radius < 0) throw ParameterError("patch radius must be >= 0");

  const bool guided = guidance.scale != 0.0 && !pairs.empty();
  std::vector<FeaturePatch> handle_patches;
  if (guided) {
    for (const DragPair& p : pairs) {
      handle_patches.push_back(extract_patch(z0_ref, p.handle, guidance.radius));
      extract_patch(z0_ref, p.target, guidance.radius);
    }
  }

  BasicGrid<T> z = z_start;
  for (int t = t_start; t >= 1; --t) {
    if (guided && t >= guidance.window_lo && t <= guidance.window_hi) {
      const double a = sched.alpha[t];
      const BasicGrid<T> eps = pred.predict(z, t);
      BasicGrid<T> x0(z.height(), z.width(), z.channels());
      for (std::size_t i = 0; i < x0.size(); ++i) {
        x0.values()[i] =
            static_cast<T>((z.values()[i] - std::sqrt(1.0 - a) * eps.values()[i]) / std::sqrt(a));
      }
      std::vector<PatchPair> pp;
      for (std::size_t i = 0; i < pairs.size(); ++i) {
        pp.push_back({handle_patches[i], extract_patch(x0, pairs[i].target, guidance.radius)});
      }
      const ClossResult cl = closs(pp, guidance.temperature);
      // The predictor is held fixed, so d x0 / d z_t = 1 / sqrt(alpha_t).
      const double k = guidance.scale / std::sqrt(a);
      for (std::size_t i = 0; i < pairs.size(); ++i) {
        const Pixel c = nearest_pixel(pairs[i].target);
        int row = 0;
        for (int y = c.y - guidance.radius; y <= c.y + guidance.radius; ++y) {
          for (int x = c.x - guidance.radius; x <= c.x + guidance.radius; ++x, ++row) {
            for (int ch = 0; ch < z.channels(); ++ch) {
              z.at(y, x, ch) = static_cast<T>(z.at(y, x, ch) - k * cl.grad_b[i].at(row, ch));
            }
          }
        }
      }
    }
    z = ddim_step(z, t, pred, sched);
  }
  return z;
}

DRAGFORGE_SAMPLER_INSTANTIATE(float)
DRAGFORGE_SAMPLER_INSTANTIATE(double)

}  // namespace dragforge
