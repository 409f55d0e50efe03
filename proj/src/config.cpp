// Copyright 2026 The DragForge Authors
// SPDX-License-Identifier: Apache-2.0

#include "dragforge/config.hpp"

#include <cmath>
#include <limits>

#include "config_json.hpp"
#include "dragforge/png.hpp"
#include "dragforge/tensor_io.hpp"

namespace dragforge {

namespace detail {

namespace {

std::string join(const std::string& path, const char* key) {
  return path.empty() ? std::string(key) : path + "." + key;
}

[[noreturn]] void type_error(const std::string& path, const char* expected) {
  throw ValidationError(path + ": expected " + expected);
}

/// Runs f, turning engine errors into validation errors located at `path`.
template <class F>
auto located(const std::string& path, F&& f) {
  try {
    return f();
  } catch (const ValidationError&) {
    throw;
  } catch (const Error& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

}  // namespace

Section::Section(const json& value, std::string path) : value_(value), path_(std::move(path)) {
  if (!value_.is_object()) type_error(path_.empty() ? "<root>" : path_, "an object");
}

bool Section::has(const char* key) const { return value_.contains(key); }

std::string Section::path_of(const char* key) const { return join(path_, key); }

const json& Section::raw(const char* key) {
  used_.insert(key);
  return value_.at(key);
}

void Section::read(const char* key, int& out) {
  if (!has(key)) return;
  const json& v = raw(key);
  if (!v.is_number_integer()) type_error(path_of(key), "an integer");
  const auto n = v.get<std::int64_t>();
  if (n < std::numeric_limits<int>::min() || n > std::numeric_limits<int>::max()) {
    throw ValidationError(path_of(key) + ": integer out of range");
  }
  out = static_cast<int>(n);
}

void Section::read(const char* key, double& out) {
  if (!has(key)) return;
  const json& v = raw(key);
  if (!v.is_number()) type_error(path_of(key), "a number");
  out = v.get<double>();
  if (!std::isfinite(out)) throw ValidationError(path_of(key) + ": must be finite");
}

void Section::read(const char* key, bool& out) {
  if (!has(key)) return;
  const json& v = raw(key);
  if (!v.is_boolean()) type_error(path_of(key), "true or false");
  out = v.get<bool>();
}

void Section::read(const char* key, std::string& out) {
  if (!has(key)) return;
  const json& v = raw(key);
  if (!v.is_string()) type_error(path_of(key), "a string");
  out = v.get<std::string>();
}

void Section::read(const char* key, std::uint64_t& out) {
  if (!has(key)) return;
  const json& v = raw(key);
  if (!v.is_number_unsigned()) type_error(path_of(key), "a non-negative integer");
  out = v.get<std::uint64_t>();
}

void Section::read(const char* key, std::vector<double>& out) {
  if (!has(key)) return;
  const json& v = raw(key);
  if (!v.is_array()) type_error(path_of(key), "an array of numbers");
  out.clear();
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number()) type_error(path_of(key) + "[" + std::to_string(i) + "]", "a number");
    out.push_back(v[i].get<double>());
    if (!std::isfinite(out.back())) {
      throw ValidationError(path_of(key) + "[" + std::to_string(i) + "]: must be finite");
    }
  }
}

void Section::read(const char* key, std::vector<float>& out) {
  std::vector<double> tmp;
  read(key, tmp);
  if (has(key)) out.assign(tmp.begin(), tmp.end());
}

void Section::read(const char* key, Point& out) {
  if (!has(key)) return;
  const json& v = raw(key);
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
    type_error(path_of(key), "a point [x, y]");
  }
  out = {v[0].get<double>(), v[1].get<double>()};
  if (!std::isfinite(out.x) || !std::isfinite(out.y)) {
    throw ValidationError(path_of(key) + ": must be finite");
  }
}

void Section::finish() const {
  for (const auto& item : value_.items()) {
    if (!used_.contains(item.key())) {
      throw ValidationError(join(path_, item.key().c_str()) + ": unknown key");
    }
  }
}

json parse_json(std::string_view text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(what + ": invalid JSON: " + e.what());
  }
}

GridTensor resolve_grid(const FileResolver& resolve, const std::string& reference,
                        const std::string& json_path) {
  const std::string bytes = resolve(reference, json_path);
  try {
    return decode_grid(bytes, reference);
  } catch (const Error& e) {
    throw ValidationError(reference + ": " + e.what());
  }
}

ordered_json point_json(const Point& p) { return ordered_json::array({p.x, p.y}); }

void apply_slic(const json& j, const std::string& path, SlicOptions& slic) {
  Section s(j, path);
  s.read("n_p", slic.n_patches);
  s.read("compactness", slic.compactness);
  s.read("max_iters", slic.max_iters);
  s.read("enforce_connectivity", slic.enforce_connectivity);
  s.finish();
  if (slic.n_patches < 1) throw ValidationError(s.path_of("n_p") + ": must be >= 1");
  if (!(slic.compactness > 0.0)) {
    throw ValidationError(s.path_of("compactness") + ": must be > 0");
  }
  if (slic.max_iters < 1) throw ValidationError(s.path_of("max_iters") + ": must be >= 1");
}

std::vector<DragPair> parse_pairs(const json& j, const std::string& path) {
  if (!j.is_array()) type_error(path, "an array of {handle, target} objects");
  std::vector<DragPair> pairs;
  for (std::size_t i = 0; i < j.size(); ++i) {
    Section s(j[i], path + "[" + std::to_string(i) + "]");
    if (!s.has("handle") || !s.has("target")) {
      throw ValidationError(s.path_of("handle") + ": every pair needs handle and target");
    }
    DragPair p;
    s.read("handle", p.handle);
    s.read("target", p.target);
    s.finish();
    pairs.push_back(p);
  }
  if (pairs.empty()) throw ValidationError(path + ": at least one pair is required");
  return pairs;
}

void apply_drag(const json& j, const std::string& path, DragInstruction& instr,
                RegionMode& region, DragOptions& options) {
  Section s(j, path);
  s.read("n_steps", instr.n_steps);
  s.read("n_max", instr.n_max);
  s.read("learning_rate", instr.learning_rate);
  s.read("stop_radius", instr.stop_radius);
  s.read("lambda", options.lambda);
  s.read("square_radius", region.square_radius);
  std::string name;
  if (s.has("region_mode")) {
    s.read("region_mode", name);
    region.kind = located(s.path_of("region_mode"), [&] { return parse_region_kind(name); });
  }
  if (s.has("semantic_policy")) {
    s.read("semantic_policy", name);
    region.policy =
        located(s.path_of("semantic_policy"), [&] { return parse_semantic_policy(name); });
  }
  if (s.has("rollback")) {
    s.read("rollback", name);
    options.rollback = located(s.path_of("rollback"), [&] { return parse_rollback_mode(name); });
  }
  if (s.has("preservation")) {
    s.read("preservation", name);
    options.preservation =
        located(s.path_of("preservation"), [&] { return parse_preservation_mode(name); });
  }
  s.finish();
  if (instr.n_steps < 1) throw ValidationError(s.path_of("n_steps") + ": must be >= 1");
  if (instr.n_max < instr.n_steps) {
    throw ValidationError(s.path_of("n_max") + ": must be >= n_steps");
  }
  if (!(instr.learning_rate > 0.0)) {
    throw ValidationError(s.path_of("learning_rate") + ": must be > 0");
  }
  if (instr.stop_radius < 0.0) {
    throw ValidationError(s.path_of("stop_radius") + ": must be >= 0");
  }
  if (options.lambda < 0.0) throw ValidationError(s.path_of("lambda") + ": must be >= 0");
  located(s.path_of("square_radius"), [&] { region.validate(); });
}

void apply_sampler(const json& j, const std::string& path, SamplerConfig& sampler,
                   const FileResolver& resolve) {
  Section s(j, path);
  s.read("enabled", sampler.enabled);
  if (s.has("schedule")) {
    const json& sj = s.raw("schedule");
    Section ss(sj, s.path_of("schedule"));
    if (ss.has("file")) {
      std::string file;
      ss.read("file", file);
      ss.finish();
      const std::string text = resolve(file, ss.path_of("file"));
      sampler.schedule =
          located(file, [&] { return NoiseSchedule::from_json(text); });
    } else {
      int steps = 50, train_steps = 1000;
      double beta_start = 0.00085, beta_end = 0.012;
      ss.read("steps", steps);
      ss.read("train_steps", train_steps);
      ss.read("beta_start", beta_start);
      ss.read("beta_end", beta_end);
      ss.finish();
      if (steps < 1 || train_steps < steps) {
        throw ValidationError(ss.path_of("steps") + ": need 1 <= steps <= train_steps");
      }
      sampler.schedule = located(ss.path_of("steps"), [&] {
        return NoiseSchedule::scaled_linear(steps, train_steps, beta_start, beta_end);
      });
    }
  }
  const bool window_given = s.has("guidance_window");
  s.read("t_opt", sampler.t_opt);
  if (s.has("predictor")) {
    Section ps(s.raw("predictor"), s.path_of("predictor"));
    NoisePredictor pred;
    std::string kind = "zero";
    ps.read("kind", kind);
    pred.kind = located(ps.path_of("kind"), [&] { return parse_predictor_kind(kind); });
    ps.read("constant", pred.constant);
    ps.read("slope", pred.slope);
    ps.read("intercept", pred.intercept);
    ps.read("gains", pred.gains);
    ps.finish();
    located(ps.path_of("kind"), [&] { pred.validate(); });
    sampler.predictor = std::move(pred);
  }
  s.read("temperature", sampler.guidance.temperature);
  s.read("guidance_scale", sampler.guidance.scale);
  s.read("patch_radius", sampler.guidance.radius);
  if (window_given) {
    const json& w = s.raw("guidance_window");
    if (!w.is_array() || w.size() != 2 || !w[0].is_number_integer() ||
        !w[1].is_number_integer()) {
      type_error(s.path_of("guidance_window"), "a step range [lo, hi]");
    }
    sampler.guidance.window_lo = w[0].get<int>();
    sampler.guidance.window_hi = w[1].get<int>();
  } else {
    sampler.guidance.window_lo = 1;
    sampler.guidance.window_hi = sampler.t_opt;
  }
  s.finish();
  located(path, [&] { sampler.validate(); });
}

FeatureField parse_field(const json& j, const std::string& path, const FileResolver& resolve) {
  Section s(j, path);
  std::string kind_name = "identity";
  s.read("kind", kind_name);
  const FieldKind kind = located(s.path_of("kind"), [&] { return parse_field_kind(kind_name); });
  FeatureField::Params params;
  switch (kind) {
    case FieldKind::identity:
      params = IdentityParams{};
      break;
    case FieldKind::linear_conv: {
      LinearConvParams p;
      s.read("in_channels", p.in_channels);
      s.read("out_channels", p.out_channels);
      s.read("kernel_size", p.kernel_size);
      s.read("weights", p.weights);
      s.read("bias", p.bias);
      params = std::move(p);
      break;
    }
    case FieldKind::analytic_bump: {
      BumpParams p;
      s.read("amplitude", p.amplitude);
      s.read("sigma", p.sigma);
      s.read("slope", p.slope);
      s.read("base_center", p.base_center);
      s.read("gain", p.gain);
      s.read("window", p.window);
      s.read("passthrough_channel", p.passthrough_channel);
      std::string file;
      if (s.has("background")) {
        s.read("background", file);
        p.background = resolve_grid(resolve, file, s.path_of("background"));
      }
      if (s.has("passthrough")) {
        s.read("passthrough", file);
        p.passthrough = resolve_grid(resolve, file, s.path_of("passthrough"));
      }
      params = std::move(p);
      break;
    }
    case FieldKind::tabulated: {
      TabulatedParams p;
      if (!s.has("table")) throw ValidationError(s.path_of("table") + ": required");
      std::string file;
      s.read("table", file);
      p.table = resolve_grid(resolve, file, s.path_of("table"));
      s.read("scale", p.scale);
      params = std::move(p);
      break;
    }
  }
  s.finish();
  return located(path, [&] { return FeatureField(std::move(params)); });
}

}  // namespace detail

using detail::json;
using detail::located;
using detail::ordered_json;
using detail::Section;

void SamplerConfig::validate() const {
  detail::located("sampler.schedule", [&] { schedule.validate(); });
  if (t_opt < 1 || t_opt > schedule.T) {
    throw ValidationError("sampler.t_opt: must lie in [1, " + std::to_string(schedule.T) + "]");
  }
  if (guidance.window_lo < 1 || guidance.window_hi > schedule.T ||
      guidance.window_lo > guidance.window_hi) {
    throw ValidationError("sampler.guidance_window: need 1 <= lo <= hi <= " +
                          std::to_string(schedule.T));
  }
  if (guidance.radius < 0) throw ValidationError("sampler.patch_radius: must be >= 0");
  if (!(guidance.temperature > 0.0)) {
    throw ValidationError("sampler.temperature: must be > 0");
  }
  if (predictor.kind == PredictorKind::tabulated &&
      predictor.gains.size() < static_cast<std::size_t>(schedule.T) + 1) {
    throw ValidationError("sampler.predictor.gains: needs T + 1 = " +
                          std::to_string(schedule.T + 1) + " entries");
  }
}

void PipelineConfig::validate() const {
  if (!latent.same_spatial(features.height(), features.width())) {
    throw ValidationError("features: spatial size " + features.shape_string() +
                          " differs from latent " + latent.shape_string());
  }
  detail::located("field", [&] {
    field.check_latent(latent.height(), latent.width(), latent.channels());
  });
  if (slic.n_patches > latent.height() * latent.width()) {
    throw ValidationError("slic.n_p: exceeds the pixel count");
  }
  detail::located("pairs", [&] {
    instruction.validate();
    instruction.check_bounds(latent.height(), latent.width());
  });
  if (mask_dilation < 0) throw ValidationError("mask.dilation: must be >= 0");
  if (external_mask &&
      (external_mask->height != latent.height() || external_mask->width != latent.width())) {
    throw ValidationError("mask.file: mask size differs from the latent");
  }
  sampler.validate();
}

FileResolver directory_resolver(const std::filesystem::path& base) {
  return [base](const std::string& reference, const std::string& json_path) {
    std::filesystem::path p(reference);
    if (p.is_relative()) p = base / p;
    std::error_code ec;
    if (!std::filesystem::is_regular_file(p, ec)) {
      throw ValidationError(p.string() + ": file not found (referenced by " + json_path + ")");
    }
    try {
      return read_file(p);
    } catch (const Error& e) {
      throw ValidationError(p.string() + ": " + e.what());
    }
  };
}

PipelineConfig parse_config(std::string_view text, const FileResolver& resolve) {
  const json doc = detail::parse_json(text, "config");
  Section root(doc, "");
  PipelineConfig cfg;

  for (const char* key : {"latent", "features", "pairs"}) {
    if (!root.has(key)) throw ValidationError(std::string(key) + ": required");
  }
  std::string file;
  root.read("latent", file);
  cfg.latent = detail::resolve_grid(resolve, file, "latent");
  root.read("features", file);
  cfg.features = detail::resolve_grid(resolve, file, "features");
  if (root.has("field")) {
    cfg.field = detail::parse_field(root.raw("field"), "field", resolve);
  } else {
    cfg.field = FeatureField::identity();
  }
  cfg.instruction.pairs = detail::parse_pairs(root.raw("pairs"), "pairs");
  if (root.has("slic")) detail::apply_slic(root.raw("slic"), "slic", cfg.slic);
  if (root.has("mask")) {
    Section ms(root.raw("mask"), "mask");
    ms.read("dilation", cfg.mask_dilation);
    if (ms.has("file")) {
      ms.read("file", file);
      const std::string bytes = resolve(file, ms.path_of("file"));
      cfg.external_mask = located(file, [&] { return decode_mask_png(bytes); });
    }
    ms.finish();
  }
  if (root.has("drag")) {
    detail::apply_drag(root.raw("drag"), "drag", cfg.instruction, cfg.region, cfg.drag);
  }
  if (root.has("sampler")) {
    detail::apply_sampler(root.raw("sampler"), "sampler", cfg.sampler, resolve);
  } else {
    cfg.sampler.guidance.window_hi = cfg.sampler.t_opt;
  }
  root.read("seed", cfg.seed);
  root.finish();
  cfg.validate();
  return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) {
    throw ValidationError(path.string() + ": config file not found");
  }
  std::string text;
  try {
    text = read_file(path);
  } catch (const Error& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  try {
    return parse_config(text, directory_resolver(path.parent_path()));
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

std::filesystem::path export_scene(const Scene& scene, const std::filesystem::path& dir,
                                   std::uint64_t seed, bool with_sampler) {
  std::filesystem::create_directories(dir);
  write_grid(dir / "latent.dft", scene.latent);
  write_grid(dir / "features.dft", scene.features);

  ordered_json field;
  field["kind"] = std::string(to_string(scene.field.kind()));
  if (const auto* b = std::get_if<BumpParams>(&scene.field.params())) {
    field["amplitude"] = b->amplitude;
    field["sigma"] = b->sigma;
    field["slope"] = b->slope;
    field["base_center"] = detail::point_json(b->base_center);
    field["gain"] = b->gain;
    field["window"] = b->window;
    if (!b->background.empty()) {
      write_grid(dir / "background.dft", b->background);
      field["background"] = "background.dft";
    }
    if (!b->passthrough.empty()) {
      write_grid(dir / "passthrough.dft", b->passthrough);
      field["passthrough"] = "passthrough.dft";
      field["passthrough_channel"] = b->passthrough_channel;
    }
  } else if (const auto* t = std::get_if<TabulatedParams>(&scene.field.params())) {
    write_grid(dir / "table.dft", t->table);
    field["table"] = "table.dft";
    field["scale"] = t->scale;
  } else if (const auto* c = std::get_if<LinearConvParams>(&scene.field.params())) {
    field["in_channels"] = c->in_channels;
    field["out_channels"] = c->out_channels;
    field["kernel_size"] = c->kernel_size;
    field["weights"] = c->weights;
    field["bias"] = c->bias;
  }

  auto pairs = ordered_json::array();
  for (const DragPair& p : scene.instruction.pairs) {
    ordered_json pj;
    pj["handle"] = detail::point_json(p.handle);
    pj["target"] = detail::point_json(p.target);
    pairs.push_back(std::move(pj));
  }

  ordered_json doc;
  doc["latent"] = "latent.dft";
  doc["features"] = "features.dft";
  doc["field"] = std::move(field);
  doc["pairs"] = std::move(pairs);
  doc["slic"] = {{"n_p", scene.slic.n_patches},
                 {"compactness", scene.slic.compactness},
                 {"max_iters", scene.slic.max_iters},
                 {"enforce_connectivity", scene.slic.enforce_connectivity}};
  doc["mask"] = {{"dilation", 0}};
  const DragOptions opts;
  const RegionMode region;
  doc["drag"] = {{"n_steps", scene.instruction.n_steps},
                 {"n_max", scene.instruction.n_max},
                 {"learning_rate", scene.instruction.learning_rate},
                 {"lambda", opts.lambda},
                 {"stop_radius", scene.instruction.stop_radius},
                 {"region_mode", std::string(to_string(region.kind))},
                 {"square_radius", region.square_radius},
                 {"semantic_policy", std::string(to_string(region.policy))},
                 {"rollback", std::string(to_string(opts.rollback))},
                 {"preservation", std::string(to_string(opts.preservation))}};
  const SamplerConfig sampler;
  doc["sampler"] = {{"enabled", with_sampler},
                    {"schedule", {{"steps", 50}, {"train_steps", 1000},
                                  {"beta_start", 0.00085}, {"beta_end", 0.012}}},
                    {"t_opt", sampler.t_opt},
                    {"predictor", {{"kind", "zero"}}},
                    {"temperature", sampler.guidance.temperature},
                    {"guidance_scale", 0.0},
                    {"patch_radius", sampler.guidance.radius},
                    {"guidance_window", {1, sampler.t_opt}}};
  doc["seed"] = seed;

  const auto path = dir / "config.json";
  write_file(path, doc.dump(2) + "\n");
  return path;
}

}  // namespace dragforge
