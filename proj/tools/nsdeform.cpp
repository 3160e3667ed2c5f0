#include <CLI11.hpp>

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "nsdeform/errors.hpp"
#include "nsdeform/pipeline.hpp"

namespace fs = std::filesystem;
using nsdeform::Stage;

namespace {

enum Exit { kOk = 0, kConfig = 2, kNumerical = 3, kIo = 4 };

struct Common {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  bool verbose = false;
};

void add_common(CLI::App* sub, Common& c, bool config_required) {
  auto* opt = sub->add_option("--config", c.config, "Run configuration (JSON)");
  if (config_required) opt->required();
  sub->add_option("--out", c.out, "Output directory (overrides NSDEFORM_OUT_DIR and the config)");
  sub->add_option("--seed", c.seed, "Random seed (u64), overrides the config seed");
  sub->add_flag("--verbose", c.verbose, "Log stage progress to stderr");
}

fs::path output_dir(const Common& c, const nsdeform::RunConfig* cfg) {
  if (!c.out.empty()) return c.out;
  if (const char* env = std::getenv("NSDEFORM_OUT_DIR"); env && *env) return env;
  if (cfg) return cfg->output_dir;
  throw nsdeform::ConfigError("no output directory: pass --out or --config");
}

int run_stages(const Common& c, Stage last, bool simulate_only) {
  nsdeform::RunConfig cfg = nsdeform::load_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  if (simulate_only && cfg.mode != nsdeform::Mode::Simulate) {
    throw nsdeform::ConfigError("'simulate' needs a config with mode = simulate");
  }
  nsdeform::PipelineOptions opts;
  opts.last = last;
  opts.output_dir = output_dir(c, &cfg);
  if (c.verbose) opts.log = [](const std::string& m) { std::cerr << m << "\n"; };
  nsdeform::run_pipeline(cfg, opts);
  if (c.verbose) std::cerr << "artifacts in " << opts.output_dir->string() << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deformation-based nonstationary kriging via elastic variogram registration"};
  app.require_subcommand(1);
  Common c;

  struct Entry {
    const char* name;
    const char* help;
    Stage last;
  };
  const Entry entries[] = {
      {"simulate", "Simulate the scenario realization and split it", Stage::Data},
      {"fit-variograms", "Fit regional Matern variograms", Stage::Fit},
      {"register", "Register regional variograms and export distance warps", Stage::Register},
      {"embed", "Build warped distances and the deformed-space embedding", Stage::Embed},
      {"krige", "Krige in deformed and geographic space", Stage::Krige},
      {"score", "Score both models on the held-out sites", Stage::Score},
      {"run", "Full pipeline including correlation maps", Stage::Maps},
  };
  std::vector<std::pair<CLI::App*, Stage>> subs;
  for (const auto& e : entries) {
    auto* sub = app.add_subcommand(e.name, e.help);
    add_common(sub, c, true);
    subs.emplace_back(sub, e.last);
  }
  auto* report = app.add_subcommand("report", "Re-emit summary tables from a run manifest");
  add_common(report, c, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (report->parsed()) {
      std::optional<nsdeform::RunConfig> cfg;
      if (!c.config.empty()) cfg = nsdeform::load_config(c.config);
      const fs::path dir = output_dir(c, cfg ? &*cfg : nullptr);
      std::cout << nsdeform::write_report(dir / "manifest.json");
      return kOk;
    }
    for (const auto& [sub, last] : subs) {
      if (sub->parsed()) return run_stages(c, last, last == Stage::Data);
    }
  } catch (const nsdeform::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const nsdeform::IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kIo;
  } catch (const nsdeform::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumerical;
  } catch (const nsdeform::Error& e) {
    // Domain and parameter errors stem from the inputs.
    std::cerr << "invalid input: " << e.what() << "\n";
    return kConfig;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumerical;
  }
  return kConfig;
}
