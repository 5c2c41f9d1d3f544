#include <CLI11.hpp>

#include <iostream>

#include "cropemu/error.hpp"
#include "cropemu/log.hpp"
#include "cropemu/parallel.hpp"
#include "cropemu/pipeline/stages.hpp"

using namespace cropemu;
using namespace cropemu::pipeline;

int main(int argc, char** argv) {
  CLI::App app{"cropemu: crop simulator emulation with weight-space uncertainty"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string configPath;
  std::size_t jobs = 0;
  std::optional<std::uint64_t> seed;
  std::string outDir, corpus;
  bool quiet = false;
  app.add_option("--config", configPath, "JSON run config")->check(CLI::ExistingFile);
  app.add_option("--jobs", jobs, "Worker thread cap (0 = all cores)");
  app.add_option("--seed", seed, "Override the run seed");
  app.add_option("--out", outDir, "Override paths.outputDir");
  app.add_option("--corpus", corpus, "Override paths.weatherCorpus");
  app.add_flag("--quiet,-q", quiet, "Only print warnings and errors");

  struct Command {
    const char* name;
    const char* help;
    std::vector<Stage> stages;
  };
  const std::vector<Command> commands{
      {"design", "Sample trait configurations from the Sobol design", {Stage::Design}},
      {"gen-corpus", "Generate the seeded synthetic station corpus", {Stage::GenCorpus}},
      {"train-weather", "Train the weather autoencoders on the corpus", {Stage::TrainWeather}},
      {"synth-weather", "Generate synthetic weather from latent mixtures", {Stage::SynthWeather}},
      {"simulate", "Run the crop oracle over design x synthetic weather", {Stage::Simulate}},
      {"train-emulator", "Train the emulator network", {Stage::TrainEmulator}},
      {"swag", "Fine-tune and collect the weight posterior", {Stage::Swag}},
      {"evaluate", "Ensemble predictions and calibration on the test split", {Stage::Evaluate}},
      {"discover", "Resilient trait discovery over scenario environments", {Stage::Discover}},
      {"report", "Aggregate the run into report.json", {Stage::Report}},
      {"all", "Run every stage from design to report", pipeline_stages()},
  };
  std::string corpusOut;
  for (const auto& c : commands) {
    auto* sub = app.add_subcommand(c.name, c.help);
    if (c.stages.front() == Stage::GenCorpus) sub->add_option("--output", corpusOut, "Corpus CSV to write");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  set_log_sink([quiet](LogLevel level, const std::string& msg) {
    if (level == LogLevel::Warning) {
      std::cerr << "warning: " << msg << "\n";
    } else if (!quiet) {
      std::cerr << msg << "\n";
    }
  });

  try {
    RunConfig cfg = configPath.empty() ? RunConfig{} : load_config(configPath);
    if (seed) cfg.seed = *seed;
    if (!outDir.empty()) cfg.paths.outputDir = outDir;
    if (!corpus.empty()) cfg.paths.weatherCorpus = corpus;
    set_max_jobs(jobs);
    for (const auto& c : commands) {
      if (!app.got_subcommand(c.name)) continue;
      for (Stage s : c.stages) run_stage(s, cfg, corpusOut);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
