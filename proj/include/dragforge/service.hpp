// Copyright 2026 The DragForge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>

namespace dragforge {

struct BindAddress {
  std::string host = "127.0.0.1";
  int port = 8080;
};

/// Parses "host:port", "host" or ":port". Throws ParameterError.
BindAddress parse_bind_address(std::string_view text);

/// DRAGFORGE_BIND when set, else 127.0.0.1:8080.
BindAddress bind_address_from_env();

struct ServiceOptions {
  std::filesystem::path data_dir;  // per-session artifact directories live here
  std::size_t max_upload_bytes = std::size_t{64} << 20;
};

/// The session HTTP service.
///
///   POST   /sessions                       create, body: optional config document
///   POST   /sessions/{id}/upload/{name}    raw file bytes for a config file reference
///   POST   /sessions/{id}/segment          {n_p, compactness, max_iters, ...}
///   POST   /sessions/{id}/mask             {pairs, dilation, file}
///   POST   /sessions/{id}/drag             {drag: {...}, sampler: {...}}, runs asynchronously
///   GET    /sessions/{id}                  status
///   GET    /sessions/{id}/events           JSON lines, ?from=N, ?follow=1 streams to the end
///   GET    /sessions/{id}/artifacts/{name} mask, labels, trajectory, final, report, events
///   GET    /sessions/{id}/preview/{which}  PCA preview PNG of latent or features
///   DELETE /sessions/{id}
///
/// Unknown sessions give 404, out-of-order stages 409, invalid payloads 422.
class Service {
 public:
  explicit Service(ServiceOptions options);
  ~Service();

  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Binds and returns the port (an ephemeral one when port is 0), or -1 on failure.
  int bind(const std::string& host, int port);

  /// Serves until stop() is called. Call after bind().
  void serve();

  /// Stops serving, cancels running drags and waits for their workers.
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace dragforge
