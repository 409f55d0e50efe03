// Copyright 2026 The DragForge Authors
// SPDX-License-Identifier: Apache-2.0

// Command line front end: runs a configured drag, serves the HTTP API, or writes a
// synthetic scenario to disk.

#include <csignal>
#include <cstring>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include "CLI11.hpp"
#include "dragforge/config.hpp"
#include "dragforge/pipeline.hpp"
#include "dragforge/scenes.hpp"
#include "dragforge/service.hpp"

namespace {

namespace fs = std::filesystem;
using namespace dragforge;

constexpr int kExitRuntime = 1;
constexpr int kExitValidation = 2;

int run(const fs::path& config_path, const fs::path& out_dir,
        std::optional<std::uint64_t> seed, bool verbose) {
  PipelineConfig cfg;
  try {
    cfg = load_config(config_path);
  } catch (const ValidationError& e) {
    std::cerr << "dragforge: invalid configuration: " << e.what() << "\n";
    return kExitValidation;
  }
  if (seed) cfg.seed = *seed;

  DragEventSink sink;
  if (verbose) {
    sink = [](const DragEvent& e) { std::cerr << encode_event_line(e); };
  }
  try {
    const PipelineResult r = run_pipeline(cfg, sink);
    write_artifacts(out_dir, r.artifacts);
    const EvalReport& rep = r.outcome.report;
    std::cout << "MD " << rep.md << " px, " << rep.updates << " updates, "
              << (rep.converged ? "converged" : "incomplete") << "\n"
              << "artifacts written to " << out_dir.string() << "\n";
  } catch (const std::exception& e) {
    std::cerr << "dragforge: " << e.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}

int serve(const fs::path& data_dir) {
  BindAddress addr;
  try {
    addr = bind_address_from_env();
  } catch (const Error& e) {
    std::cerr << "dragforge: DRAGFORGE_BIND: " << e.what() << "\n";
    return kExitValidation;
  }

  // Route SIGINT and SIGTERM to a waiting thread instead of an async handler.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  Service service(ServiceOptions{data_dir});
  const int port = service.bind(addr.host, addr.port);
  if (port < 0) {
    std::cerr << "dragforge: cannot bind " << addr.host << ":" << addr.port << "\n";
    return kExitRuntime;
  }
  std::cerr << "dragforge: listening on " << addr.host << ":" << port << "\n";
  std::jthread waiter([&service, signals] {
    int sig = 0;
    while (sigwait(&signals, &sig) != 0) {
    }
    std::cerr << "dragforge: " << strsignal(sig) << ", shutting down\n";
    service.stop();
  });
  service.serve();
  // Wake the waiter if the server stopped for another reason.
  pthread_kill(waiter.native_handle(), SIGTERM);
  return 0;
}

int scene(const std::string& name, const fs::path& out_dir, std::uint64_t seed) {
  try {
    fs::path config;
    if (name == "bump") {
      config = export_scene(bump_scene(), out_dir, seed);
    } else if (name == "two-material") {
      TwoMaterialOptions opt;
      opt.seed = seed;
      config = export_scene(two_material_scene(opt), out_dir, seed, false);
    } else {
      config = export_scene(grid16_scene(), out_dir, seed);
    }
    std::cout << config.string() << "\n";
  } catch (const std::exception& e) {
    std::cerr << "dragforge: " << e.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DragForge point-based drag editing engine"};
  app.require_subcommand(0, 1);
  app.fallthrough();

  std::string config;
  std::string out_dir = "dragforge-out";
  std::optional<std::uint64_t> seed;
  bool verbose = false;
  app.add_option("--config", config, "Pipeline configuration (JSON)");
  app.add_option("--out-dir", out_dir, "Directory for artifacts")->capture_default_str();
  app.add_option("--seed", seed, "Seed for synthetic scenes; recorded with the run");
  app.add_flag("--verbose", verbose, "Print drag events to standard error");

  auto* serve_cmd = app.add_subcommand("serve", "Run the session HTTP service");
  auto* scene_cmd = app.add_subcommand("scene", "Write a synthetic scenario");
  std::string scene_name;
  scene_cmd->add_option("name", scene_name, "bump, two-material or grid16")
      ->required()
      ->check(CLI::IsMember({"bump", "two-material", "grid16"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  }

  if (*serve_cmd) return serve(out_dir);
  if (*scene_cmd) return scene(scene_name, out_dir, seed.value_or(0));
  if (config.empty()) {
    std::cerr << "dragforge: --config is required (or use the serve or scene subcommand)\n";
    return kExitValidation;
  }
  return run(config, out_dir, seed, verbose);
}
