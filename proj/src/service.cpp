// Copyright 2026 The DragForge Authors
// SPDX-License-Identifier: Apache-2.0

#include "dragforge/service.hpp"

#include <atomic>
#include <charconv>
#include <chrono>
#include <condition_variable>
#include <cstdlib>
#include <map>
#include <mutex>
#include <random>
#include <thread>
#include <vector>

#include "config_json.hpp"
#include "dragforge/pipeline.hpp"
#include "dragforge/png.hpp"
#include "dragforge/preview.hpp"
#include "dragforge/tensor_io.hpp"
#include "httplib.h"

namespace dragforge {

using detail::json;
using detail::ordered_json;

BindAddress parse_bind_address(std::string_view text) {
  BindAddress a;
  const auto colon = text.rfind(':');
  std::string_view host = text, port;
  if (colon != std::string_view::npos) {
    host = text.substr(0, colon);
    port = text.substr(colon + 1);
  }
  if (!host.empty()) a.host = std::string(host);
  if (colon != std::string_view::npos) {
    int p = 0;
    if (port.empty() || port.size() > 5) throw ParameterError("invalid port in bind address");
    for (char ch : port) {
      if (ch < '0' || ch > '9') throw ParameterError("invalid port in bind address");
      p = p * 10 + (ch - '0');
    }
    if (p > 65535) throw ParameterError("port out of range in bind address");
    a.port = p;
  }
  return a;
}

BindAddress bind_address_from_env() {
  const char* env = std::getenv("DRAGFORGE_BIND");
  return env && *env ? parse_bind_address(env) : BindAddress{};
}

namespace {

enum class Status { created, segmented, masked, running, done, failed };

std::string_view to_string(Status s) {
  switch (s) {
    case Status::created: return "created";
    case Status::segmented: return "segmented";
    case Status::masked: return "masked";
    case Status::running: return "running";
    case Status::done: return "done";
    case Status::failed: return "failed";
  }
  return "unknown";
}

struct HttpError {
  int code;
  std::string message;
};

struct Session {
  std::string id;
  std::filesystem::path dir;
  std::mutex mu;
  std::condition_variable cv;
  Status status = Status::created;
  std::string error;
  json doc = json::object();
  std::map<std::string, std::string> uploads;
  PipelineConfig cfg;
  Segmentation seg;
  Mask mask;
  ArtifactSet artifacts;
  std::vector<std::string> events;
  std::jthread worker;
};

const std::map<std::string, std::string>& artifact_aliases() {
  static const std::map<std::string, std::string> m = {
      {"mask", "mask.png"},          {"labels", "labels.png"},     {"trajectory", "trajectory.json"},
      {"final", "final.dft"},        {"report", "report.json"},    {"events", "events.jsonl"},
      {"mask.png", "mask.png"},      {"labels.png", "labels.png"}, {"labels.dft", "labels.dft"},
      {"trajectory.json", "trajectory.json"}, {"final.dft", "final.dft"},
      {"report.json", "report.json"},         {"events.jsonl", "events.jsonl"}};
  return m;
}

std::string content_type(const std::string& file) {
  if (file.ends_with(".png")) return "image/png";
  if (file.ends_with(".json")) return "application/json";
  if (file.ends_with(".jsonl")) return "application/x-ndjson";
  return "application/octet-stream";
}

bool valid_upload_name(const std::string& name) {
  if (name.empty() || name.size() > 128 || name.front() == '.') return false;
  for (char c : name) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                    c == '.' || c == '_' || c == '-';
    if (!ok) return false;
  }
  return true;
}

std::string string_at(const json& doc, std::initializer_list<const char*> path,
                      std::string fallback) {
  const json* j = &doc;
  for (const char* key : path) {
    if (!j->is_object() || !j->contains(key)) return fallback;
    j = &(*j)[key];
  }
  return j->is_string() ? j->get<std::string>() : fallback;
}

/// Files the session config refers to; latent and features are always needed.
std::vector<std::string> referenced_files(const json& doc) {
  std::vector<std::string> names = {string_at(doc, {"latent"}, "latent"),
                                    string_at(doc, {"features"}, "features")};
  for (const char* key : {"background", "passthrough", "table"}) {
    const auto name = string_at(doc, {"field", key}, "");
    if (!name.empty()) names.push_back(name);
  }
  const auto schedule = string_at(doc, {"sampler", "schedule", "file"}, "");
  if (!schedule.empty()) names.push_back(schedule);
  return names;
}

FileResolver upload_resolver(const std::map<std::string, std::string>& uploads) {
  return [&uploads](const std::string& reference, const std::string& json_path) {
    const auto it = uploads.find(reference);
    if (it == uploads.end()) {
      throw HttpError{409, "'" + reference + "' (referenced by " + json_path +
                               ") has not been uploaded"};
    }
    return it->second;
  };
}

json body_json(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  try {
    json j = json::parse(req.body);
    if (!j.is_object()) throw HttpError{422, "request body must be a JSON object"};
    return j;
  } catch (const json::parse_error& e) {
    throw HttpError{422, std::string("invalid JSON: ") + e.what()};
  }
}

/// Checks the parts of a session config that need no uploaded files.
void prevalidate_config(const json& doc) {
  detail::Section root(doc, "");
  std::string name;
  for (const char* key : {"latent", "features"}) {
    if (root.has(key)) root.read(key, name);
  }
  if (root.has("field")) root.raw("field");
  if (root.has("pairs")) detail::parse_pairs(root.raw("pairs"), "pairs");
  if (root.has("slic")) {
    SlicOptions slic;
    detail::apply_slic(root.raw("slic"), "slic", slic);
  }
  if (root.has("mask")) {
    detail::Section ms(root.raw("mask"), "mask");
    int dilation = 0;
    ms.read("dilation", dilation);
    ms.read("file", name);
    ms.finish();
  }
  if (root.has("drag")) {
    DragInstruction instr;
    RegionMode region;
    DragOptions opts;
    detail::apply_drag(root.raw("drag"), "drag", instr, region, opts);
  }
  if (root.has("sampler")) root.raw("sampler");
  std::uint64_t seed = 0;
  root.read("seed", seed);
  root.finish();
}

std::string error_json(const std::string& message) {
  return json{{"error", message}}.dump() + "\n";
}

std::string random_id() {
  static std::mutex mu;
  static std::mt19937_64 rng{std::random_device{}()};
  std::lock_guard lock(mu);
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(rng()));
  return buf;
}

}  // namespace

struct Service::Impl {
  ServiceOptions options;
  httplib::Server server;
  std::mutex mu;
  std::map<std::string, std::shared_ptr<Session>> sessions;
  std::atomic<bool> stopping{false};

  explicit Impl(ServiceOptions o) : options(std::move(o)) {
    if (options.data_dir.empty()) {
      options.data_dir = std::filesystem::temp_directory_path() / "dragforge-sessions";
    }
    server.set_payload_max_length(options.max_upload_bytes);
    routes();
  }

  std::shared_ptr<Session> find(const std::string& id) {
    std::lock_guard lock(mu);
    const auto it = sessions.find(id);
    if (it == sessions.end()) throw HttpError{404, "unknown session '" + id + "'"};
    return it->second;
  }

  static void require(const Session& s, Status wanted, std::string_view stage) {
    if (s.status != wanted) {
      throw HttpError{409, std::string(stage) + " needs status " + std::string(to_string(wanted)) +
                               " but the session is " + std::string(to_string(s.status))};
    }
  }

  static void publish(Session& s, const ArtifactSet& artifacts) {
    write_artifacts(s.dir, artifacts);
    for (const auto& [name, bytes] : artifacts) s.artifacts[name] = bytes;
  }

  static json status_json(Session& s) {
    json j;
    j["id"] = s.id;
    j["status"] = std::string(to_string(s.status));
    if (!s.error.empty()) j["error"] = s.error;
    auto uploads = json::array();
    for (const auto& [name, bytes] : s.uploads) uploads.push_back(name);
    j["uploads"] = uploads;
    auto missing = json::array();
    for (const auto& name : referenced_files(s.doc)) {
      if (!s.uploads.contains(name)) missing.push_back(name);
    }
    j["missing"] = missing;
    auto artifacts = json::array();
    for (const auto& [name, bytes] : s.artifacts) artifacts.push_back(name);
    j["artifacts"] = artifacts;
    j["events"] = s.events.size();
    return j;
  }

  template <class F>
  static httplib::Server::Handler guarded(F f) {
    return [f](const httplib::Request& req, httplib::Response& res) {
      try {
        f(req, res);
      } catch (const HttpError& e) {
        res.status = e.code;
        res.set_content(error_json(e.message), "application/json");
      } catch (const ValidationError& e) {
        res.status = 422;
        res.set_content(error_json(e.what()), "application/json");
      } catch (const std::exception& e) {
        res.status = 500;
        res.set_content(error_json(e.what()), "application/json");
      }
    };
  }

  /// Engine errors caused by the payload are 422; anything else fails the session.
  template <class F>
  static void run_stage(Session& s, F f) {
    try {
      f();
    } catch (const HttpError&) {
      throw;
    } catch (const ValidationError&) {
      throw;
    } catch (const ParameterError& e) {
      throw HttpError{422, e.what()};
    } catch (const ShapeError& e) {
      throw HttpError{422, e.what()};
    } catch (const BoundsError& e) {
      throw HttpError{422, e.what()};
    } catch (const DataError& e) {
      throw HttpError{422, e.what()};
    } catch (const std::exception& e) {
      s.status = Status::failed;
      s.error = e.what();
      throw HttpError{500, e.what()};
    }
  }

  void create(const httplib::Request& req, httplib::Response& res) {
    if (stopping) throw HttpError{503, "service is stopping"};
    json doc = req.body.empty() ? json::object() : detail::parse_json(req.body, "config");
    prevalidate_config(doc);
    auto s = std::make_shared<Session>();
    s->doc = std::move(doc);
    {
      std::lock_guard lock(mu);
      do {
        s->id = random_id();
      } while (sessions.contains(s->id));
      s->dir = options.data_dir / s->id;
      sessions[s->id] = s;
    }
    std::filesystem::create_directories(s->dir);
    std::lock_guard lock(s->mu);
    res.status = 201;
    res.set_content(status_json(*s).dump() + "\n", "application/json");
  }

  void upload(const httplib::Request& req, httplib::Response& res) {
    auto s = find(req.matches[1]);
    const std::string name = req.matches[2];
    if (!valid_upload_name(name)) throw HttpError{422, "invalid upload name '" + name + "'"};
    std::lock_guard lock(s->mu);
    require(*s, Status::created, "upload");
    try {
      if (name.ends_with(".png")) {
        decode_mask_png(req.body);
      } else {
        decode_grid(req.body, name);
      }
    } catch (const Error& e) {
      throw HttpError{422, name + ": " + e.what()};
    }
    s->uploads[name] = req.body;
    write_file(s->dir / ("upload-" + name), req.body);
    res.set_content(status_json(*s).dump() + "\n", "application/json");
  }

  void segment(const httplib::Request& req, httplib::Response& res) {
    auto s = find(req.matches[1]);
    const json body = body_json(req);
    std::lock_guard lock(s->mu);
    require(*s, Status::created, "segment");
    for (const auto& name : referenced_files(s->doc)) {
      if (!s->uploads.contains(name)) {
        throw HttpError{409, "upload incomplete: '" + name + "' is missing"};
      }
    }
    run_stage(*s, [&] {
      const FileResolver resolve = upload_resolver(s->uploads);
      PipelineConfig cfg;
      cfg.latent = detail::resolve_grid(resolve, string_at(s->doc, {"latent"}, "latent"), "latent");
      cfg.features =
          detail::resolve_grid(resolve, string_at(s->doc, {"features"}, "features"), "features");
      cfg.field = s->doc.contains("field") ? detail::parse_field(s->doc["field"], "field", resolve)
                                           : FeatureField::identity();
      if (s->doc.contains("slic")) detail::apply_slic(s->doc["slic"], "slic", cfg.slic);
      detail::apply_slic(body, "", cfg.slic);
      if (!cfg.latent.same_spatial(cfg.features.height(), cfg.features.width())) {
        throw ValidationError("features: spatial size " + cfg.features.shape_string() +
                              " differs from latent " + cfg.latent.shape_string());
      }
      cfg.field.check_latent(cfg.latent.height(), cfg.latent.width(), cfg.latent.channels());
      Segmentation seg = run_segment(cfg.features, cfg.slic);
      publish(*s, segment_artifacts(seg));
      s->seg = std::move(seg);
      s->cfg = std::move(cfg);
      s->status = Status::segmented;
    });
    res.set_content(status_json(*s).dump() + "\n", "application/json");
  }

  void make_mask(const httplib::Request& req, httplib::Response& res) {
    auto s = find(req.matches[1]);
    const json body = body_json(req);
    std::lock_guard lock(s->mu);
    require(*s, Status::segmented, "mask");
    run_stage(*s, [&] {
      detail::Section b(body, "");
      DragInstruction instr = s->cfg.instruction;
      if (b.has("pairs")) {
        instr.pairs = detail::parse_pairs(b.raw("pairs"), "pairs");
      } else if (s->doc.contains("pairs")) {
        instr.pairs = detail::parse_pairs(s->doc["pairs"], "pairs");
      } else {
        throw ValidationError("pairs: required");
      }
      int dilation = 0;
      std::string file;
      if (s->doc.contains("mask")) {
        detail::Section ms(s->doc["mask"], "mask");
        ms.read("dilation", dilation);
        ms.read("file", file);
      }
      b.read("dilation", dilation);
      b.read("file", file);
      b.finish();
      if (dilation < 0) throw ValidationError("dilation: must be >= 0");
      instr.check_bounds(s->seg.height, s->seg.width);
      std::optional<Mask> external;
      if (!file.empty()) external = decode_mask_png(upload_resolver(s->uploads)(file, "file"));
      Mask mask = run_mask(s->seg, instr, dilation, external);
      publish(*s, mask_artifacts(mask));
      s->cfg.instruction = std::move(instr);
      s->cfg.mask_dilation = dilation;
      s->cfg.external_mask = std::move(external);
      s->mask = std::move(mask);
      s->status = Status::masked;
    });
    res.set_content(status_json(*s).dump() + "\n", "application/json");
  }

  void drag(const httplib::Request& req, httplib::Response& res) {
    auto s = find(req.matches[1]);
    const json body = body_json(req);
    std::lock_guard lock(s->mu);
    require(*s, Status::masked, "drag");
    run_stage(*s, [&] {
      detail::Section b(body, "");
      PipelineConfig& cfg = s->cfg;
      const FileResolver resolve = upload_resolver(s->uploads);
      if (s->doc.contains("drag")) {
        detail::apply_drag(s->doc["drag"], "drag", cfg.instruction, cfg.region, cfg.drag);
      }
      if (b.has("drag")) detail::apply_drag(b.raw("drag"), "drag", cfg.instruction, cfg.region,
                                            cfg.drag);
      cfg.sampler.guidance.window_hi = cfg.sampler.t_opt;
      if (s->doc.contains("sampler")) {
        detail::apply_sampler(s->doc["sampler"], "sampler", cfg.sampler, resolve);
      }
      if (b.has("sampler")) detail::apply_sampler(b.raw("sampler"), "sampler", cfg.sampler, resolve);
      b.finish();
      if (s->doc.contains("seed") && s->doc["seed"].is_number_unsigned()) {
        cfg.seed = s->doc["seed"].get<std::uint64_t>();
      }
      cfg.validate();
    });
    s->status = Status::running;
    s->events.clear();
    s->worker = std::jthread([this, s](std::stop_token stop) { work(s, stop); });
    res.status = 202;
    res.set_content(status_json(*s).dump() + "\n", "application/json");
  }

  /// Runs the drag stage. Only this thread touches cfg, seg and mask while running.
  static void work(const std::shared_ptr<Session>& s, std::stop_token stop) {
    const auto sink = [&](const DragEvent& e) {
      std::lock_guard lock(s->mu);
      s->events.push_back(encode_event_line(e));
      s->cv.notify_all();
    };
    try {
      DragOutcome outcome = run_drag(s->cfg, s->seg, s->mask, sink, stop);
      ArtifactSet artifacts = drag_artifacts(outcome, s->cfg.instruction);
      std::lock_guard lock(s->mu);
      if (outcome.drag.diagnostics.cancelled) {
        s->status = Status::failed;
        s->error = "drag cancelled";
      } else {
        publish(*s, artifacts);
        s->status = Status::done;
      }
    } catch (const std::exception& e) {
      std::lock_guard lock(s->mu);
      s->status = Status::failed;
      s->error = e.what();
    }
    s->cv.notify_all();
  }

  void events(const httplib::Request& req, httplib::Response& res) {
    auto s = find(req.matches[1]);
    std::size_t from = 0;
    if (req.has_param("from")) {
      const std::string v = req.get_param_value("from");
      const auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), from);
      if (v.empty() || ec != std::errc{} || end != v.data() + v.size()) {
        throw HttpError{422, "from must be a non-negative integer"};
      }
    }
    const bool follow = req.has_param("follow") && req.get_param_value("follow") != "0";
    if (!follow) {
      std::lock_guard lock(s->mu);
      std::string out;
      for (std::size_t i = from; i < s->events.size(); ++i) out += s->events[i];
      res.set_content(out, "application/x-ndjson");
      return;
    }
    auto next = std::make_shared<std::size_t>(from);
    res.set_chunked_content_provider(
        "application/x-ndjson", [this, s, next](std::size_t, httplib::DataSink& sink) {
          std::unique_lock lock(s->mu);
          s->cv.wait_for(lock, std::chrono::milliseconds(200), [&] {
            return s->events.size() > *next || s->status != Status::running;
          });
          std::string chunk;
          for (; *next < s->events.size(); ++*next) chunk += s->events[*next];
          const bool finished = s->status != Status::running || stopping;
          lock.unlock();
          if (!chunk.empty() && !sink.write(chunk.data(), chunk.size())) return false;
          if (finished) sink.done();
          return true;
        });
  }

  void artifact(const httplib::Request& req, httplib::Response& res) {
    auto s = find(req.matches[1]);
    const std::string name = req.matches[2];
    const auto& aliases = artifact_aliases();
    const auto it = aliases.find(name);
    if (it == aliases.end()) throw HttpError{404, "unknown artifact '" + name + "'"};
    std::lock_guard lock(s->mu);
    const auto a = s->artifacts.find(it->second);
    if (a == s->artifacts.end()) {
      throw HttpError{409, "artifact '" + name + "' is not available while the session is " +
                               std::string(to_string(s->status))};
    }
    res.set_content(a->second, content_type(it->second));
  }

  void preview(const httplib::Request& req, httplib::Response& res) {
    auto s = find(req.matches[1]);
    const std::string which = req.matches[2];
    std::string reference;
    if (which == "latent" || which == "features") {
      reference = string_at(s->doc, {which.c_str()}, which);
    } else {
      throw HttpError{404, "unknown preview '" + which + "'"};
    }
    std::string bytes;
    {
      std::lock_guard lock(s->mu);
      bytes = upload_resolver(s->uploads)(reference, which);
    }
    res.set_content(pca_preview_png(decode_grid(bytes, reference)), "image/png");
  }

  void remove(const httplib::Request& req, httplib::Response& res) {
    std::shared_ptr<Session> s;
    {
      std::lock_guard lock(mu);
      const auto it = sessions.find(req.matches[1]);
      if (it == sessions.end()) throw HttpError{404, "unknown session '" + req.matches[1].str() + "'"};
      s = it->second;
      sessions.erase(it);
    }
    s->worker.request_stop();
    if (s->worker.joinable()) s->worker.join();
    std::error_code ec;
    std::filesystem::remove_all(s->dir, ec);
    res.status = 204;
  }

  void routes() {
    const std::string id = "/sessions/([0-9a-f]+)";
    server.Post("/sessions", guarded([this](auto& q, auto& r) { create(q, r); }));
    server.Get("/sessions", guarded([this](const httplib::Request&, httplib::Response& r) {
      std::vector<std::shared_ptr<Session>> all;
      {
        std::lock_guard lock(mu);
        for (const auto& [k, v] : sessions) all.push_back(v);
      }
      auto arr = json::array();
      for (const auto& s : all) {
        std::lock_guard lock(s->mu);
        arr.push_back(status_json(*s));
      }
      r.set_content(arr.dump() + "\n", "application/json");
    }));
    server.Get(id, guarded([this](const httplib::Request& q, httplib::Response& r) {
      auto s = find(q.matches[1]);
      std::lock_guard lock(s->mu);
      r.set_content(status_json(*s).dump() + "\n", "application/json");
    }));
    server.Post(id + "/upload/([^/]+)", guarded([this](auto& q, auto& r) { upload(q, r); }));
    server.Post(id + "/segment", guarded([this](auto& q, auto& r) { segment(q, r); }));
    server.Post(id + "/mask", guarded([this](auto& q, auto& r) { make_mask(q, r); }));
    server.Post(id + "/drag", guarded([this](auto& q, auto& r) { drag(q, r); }));
    server.Get(id + "/events", guarded([this](auto& q, auto& r) { events(q, r); }));
    server.Get(id + "/artifacts/([^/]+)", guarded([this](auto& q, auto& r) { artifact(q, r); }));
    server.Get(id + "/preview/([^/]+)", guarded([this](auto& q, auto& r) { preview(q, r); }));
    server.Delete(id, guarded([this](auto& q, auto& r) { remove(q, r); }));
  }

  void shutdown() {
    stopping = true;
    server.stop();
    std::vector<std::shared_ptr<Session>> all;
    {
      std::lock_guard lock(mu);
      for (const auto& [k, v] : sessions) all.push_back(v);
    }
    for (const auto& s : all) {
      s->worker.request_stop();
      if (s->worker.joinable()) s->worker.join();
    }
  }
};

Service::Service(ServiceOptions options) : impl_(std::make_unique<Impl>(std::move(options))) {}

Service::~Service() { impl_->shutdown(); }

int Service::bind(const std::string& host, int port) {
  if (port == 0) return impl_->server.bind_to_any_port(host);
  return impl_->server.bind_to_port(host, port) ? port : -1;
}

void Service::serve() { impl_->server.listen_after_bind(); }

void Service::stop() { impl_->shutdown(); }

}  // namespace dragforge
