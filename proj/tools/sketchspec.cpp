// sketchspec: experiment driver.
//
//   sketchspec run <config.json>
//   sketchspec gen <spec.json> -o m.bin
//   sketchspec calibrate <config.json>
//   sketchspec validate <config.json>
//
// Exit codes: 0 success (numerical trial failures are counted, not fatal),
// 2 config or usage error, 3 I/O or file-format error, 1 anything else.

#include <exception>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "sketchspec/sketchspec.hpp"

namespace {

namespace ss = sketchspec;

constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;

void print_summary(const ss::ExperimentConfig& cfg, const ss::RunSummary& s) {
  std::cout << "task=" << ss::to_string(cfg.task) << " records=" << s.records << " failures=" << s.failures
            << " errors=" << s.errors << "\n";
  for (const auto& p : s.outputs) std::cout << "wrote " << p.string() << "\n";
}

int cmd_run(const std::string& path, bool force_calibrate) {
  ss::ExperimentConfig cfg = ss::load_config(path);
  if (force_calibrate) cfg.task = ss::Task::Calibrate;
  print_summary(cfg, ss::run_experiment(cfg));
  return 0;
}

int cmd_validate(const std::string& path) {
  const ss::ExperimentConfig cfg = ss::load_config(path);
  std::cout << "ok: task=" << ss::to_string(cfg.task) << " trials=" << cfg.trials << "\n";
  return 0;
}

int cmd_gen(const std::string& spec_path, const std::string& out_path) {
  const ss::json j = ss::parse_json_text(ss::read_text(spec_path), spec_path);
  // Either a bare generator object or any object holding one under "generator".
  const ss::json& g = j.is_object() && j.contains("generator") ? j.at("generator") : j;
  const ss::GeneratorSpec spec = ss::generator_from_json(g);
  const ss::DenseMatrix a = ss::generate(spec);
  ss::write_matrix(out_path, a);
  std::cout << "wrote " << out_path << " (" << a.rows() << "x" << a.cols() << ")\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Randomized sketching experiments: run sweeps, generate matrices, calibrate constants"};
  app.require_subcommand(1);

  std::string config;
  auto* run = app.add_subcommand("run", "Run the experiment described by a config file");
  run->add_option("config", config, "Config JSON")->required();

  auto* cal = app.add_subcommand("calibrate", "Calibrate sample-size constants with a config's trials and seeds");
  cal->add_option("config", config, "Config JSON")->required();

  auto* val = app.add_subcommand("validate", "Parse and check a config file without running it");
  val->add_option("config", config, "Config JSON")->required();

  std::string spec;
  std::string out;
  auto* gen = app.add_subcommand("gen", "Generate a matrix from a generator spec");
  gen->add_option("spec", spec, "Generator spec JSON")->required();
  gen->add_option("-o,--output", out, "Output file (.mtx for MatrixMarket, otherwise binary)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitConfig;
  }

  try {
    if (*run) return cmd_run(config, false);
    if (*cal) return cmd_run(config, true);
    if (*val) return cmd_validate(config);
    if (*gen) return cmd_gen(spec, out);
  } catch (const ss::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ss::InvalidSpec& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ss::InvalidQuery& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ss::InvalidArgument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ss::ShapeError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ss::PreconditionViolation& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ss::IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kExitIo;
  } catch (const ss::ParseError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
