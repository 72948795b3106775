// Command-line entry point: run pipeline stages, generate the toy world, or
// serve the mock services over HTTP.
//
// Exit codes: 0 success, 1 usage or config error, 2 stage failure,
// 3 a required service was unreachable.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "cvc/core/config.hpp"
#include "cvc/core/errors.hpp"
#include "cvc/core/random.hpp"
#include "cvc/pipeline/pipeline.hpp"
#include "cvc/services/mock_server.hpp"
#include "cvc/toyworld/toyworld.hpp"

namespace {

enum Exit { kOk = 0, kUsage = 1, kStage = 2, kUnavailable = 3 };

struct RunOptions {
  std::string stage = "all";
  std::string config;
  std::string workdir = "work";
  std::optional<std::uint64_t> seed;
  bool mock = false;
  std::string mode;
  std::optional<int> concurrency;
};

int run(const RunOptions& opt) {
  cvc::PipelineConfig cfg = opt.config.empty() ? cvc::validate_config(nlohmann::json::object())
                                               : cvc::load_config_file(opt.config);
  if (opt.seed) {
    // Re-derive every stream from the new master seed.
    auto doc = cvc::to_json(cfg);
    doc["seed"] = *opt.seed;
    doc.erase("seeds");
    cfg = cvc::validate_config(doc);
  }
  if (opt.mock) cfg.use_mocks = true;
  if (!opt.mode.empty()) {
    if (opt.mode == "causal") cfg.mode = cvc::EntityMode::causal;
    else if (opt.mode == "random_entity") cfg.mode = cvc::EntityMode::random_entity;
    else throw cvc::ConfigError("mode", "mode must be causal or random_entity");
  }
  if (opt.concurrency) {
    if (*opt.concurrency < 1) throw cvc::ConfigError("concurrency", "concurrency must be >= 1");
    cfg.concurrency = *opt.concurrency;
  }
  cvc::apply_env_overrides(cfg);

  const auto services = cvc::pipeline::make_services(cfg);
  cvc::pipeline::Pipeline pipeline(cfg, opt.workdir, services.client);
  if (opt.stage == "all") {
    pipeline.run_all();
  } else {
    const auto stage = cvc::pipeline::stage_from_string(opt.stage);
    if (!stage) throw cvc::ConfigError("stage", "unknown stage: " + opt.stage);
    pipeline.run(*stage);
  }
  spdlog::info("service calls: {} network, {} cache hits", services.client->network_calls(),
               services.client->cache_hits());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::stderr_color_mt("cvc"));
  CLI::App app{"Build CVC training data from image-caption pairs"};
  app.require_subcommand(1);

  RunOptions run_opt;
  auto* run_cmd = app.add_subcommand("run", "Run one pipeline stage, or all of them");
  run_cmd->add_option("--stage", run_opt.stage, "ingest|extract|score|occlude|instruct|trials|select|emit|report|all");
  run_cmd->add_option("--config", run_opt.config, "Pipeline config (JSON)");
  run_cmd->add_option("--workdir", run_opt.workdir, "Work directory for stage outputs");
  run_cmd->add_option("--seed", run_opt.seed, "Master seed; overrides the config");
  run_cmd->add_flag("--mock", run_opt.mock, "Use the in-process mock services");
  run_cmd->add_option("--mode", run_opt.mode, "causal|random_entity");
  run_cmd->add_option("--concurrency", run_opt.concurrency, "Maximum in-flight service calls");

  int toy_n = 200;
  std::uint64_t toy_seed = 0;
  std::string toy_out = "toy";
  auto* toy_cmd = app.add_subcommand("toy-world", "Generate the synthetic toy-world corpus");
  toy_cmd->add_option("--n", toy_n, "Number of images")->check(CLI::PositiveNumber);
  toy_cmd->add_option("--seed", toy_seed, "Generator seed");
  toy_cmd->add_option("--out", toy_out, "Output directory");

  int port = 8700;
  std::string host = "127.0.0.1";
  std::string script_path;
  auto* serve_cmd = app.add_subcommand("serve-mock", "Serve the mock services over HTTP");
  serve_cmd->add_option("--port", port, "Port to listen on");
  serve_cmd->add_option("--host", host, "Address to bind");
  serve_cmd->add_option("--script", script_path, "Mock script (JSON)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*run_cmd) return run(run_opt);
    if (*toy_cmd) {
      const auto world = cvc::toyworld::generate_toy_world(toy_n, toy_seed, toy_out);
      std::cout << "wrote " << world.oracle.size() << " images to " << toy_out << "\n"
                << "config: " << world.config_path.string() << "\n";
      return kOk;
    }
    if (*serve_cmd) {
      auto script = script_path.empty() ? cvc::services::MockScript{} : cvc::services::MockScript::load(script_path);
      cvc::services::MockHttpServer server(std::make_shared<const cvc::services::MockServices>(std::move(script)));
      spdlog::info("serving mock services on {}:{}", host, port);
      server.listen(host, port);
      return kOk;
    }
  } catch (const cvc::ConfigError& e) {
    spdlog::error("config error ({}): {}", e.field(), e.what());
    return kUsage;
  } catch (const cvc::ServiceUnavailable& e) {
    spdlog::error("service unavailable: {}", e.what());
    return kUnavailable;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kStage;
  }
  return kUsage;
}
