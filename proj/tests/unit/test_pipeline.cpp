#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "cropemu/error.hpp"
#include "cropemu/pipeline/config.hpp"
#include "cropemu/pipeline/stages.hpp"

using namespace cropemu;
using namespace cropemu::pipeline;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path source_dir() {
  const char* s = std::getenv("CROPEMU_SOURCE_DIR");
  return s ? fs::path(s) : fs::current_path();
}

std::string cli() {
  const char* s = std::getenv("CROPEMU_CLI");
  return s ? s : "cropemu";
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct CliResult {
  int status;
  std::string err;
};

CliResult run_cli(const std::string& args, const fs::path& work) {
  const fs::path errFile = work / "stderr.txt";
  const std::string cmd = "cd '" + source_dir().string() + "' && '" + cli() + "' " + args + " 2> '" +
                          errFile.string() + "'";
  const int rc = std::system(cmd.c_str());
  return {rc, slurp(errFile)};
}

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("cropemu_pipeline_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string config_error(const json& doc) {
  try {
    parse_config(doc);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("shipped configs parse") {
  const RunConfig desk = load_config(source_dir() / "config/desk.json");
  CHECK(desk.sampling.count == 20000);
  CHECK(desk.emulator.hyper.hidden == std::vector<std::size_t>{64, 64, 64, 32});
  CHECK(desk.swag.snapshot_count() == 10);
  CHECK(desk.discovery.management.population == 7);
  CHECK_NOTHROW(load_config(source_dir() / "config/tiny.json"));
}

TEST_CASE("config errors name the key path") {
  CHECK(config_error({{"discovery", {{"management", {{"density", 3}}}}}}) ==
        "config: discovery.management.density: unknown key");
  CHECK(config_error({{"emulator", {{"epochs", "many"}}}}).find("emulator.epochs") != std::string::npos);
  CHECK(config_error({{"swag", {{"momentum", 2.0}}}}).find("swag.momentum") != std::string::npos);
  CHECK(config_error({{"weather", {{"k", -1}}}}).find("weather.k") != std::string::npos);
  CHECK(config_error({{"discovery", {{"configCount", 10}, {"topK", 20}}}}).find("discovery.topK") !=
        std::string::npos);
  CHECK(config_error({{"swag", {{"epochs", 5}, {"collectFromEpoch", 5}}}}).find("swag") != std::string::npos);
  CHECK(config_error({{"extra", 1}}) == "config: extra: unknown key");
  CHECK(config_error(json::array()) != "");
  CHECK(config_error(json::object()) == "");
}

TEST_CASE("config hash") {
  RunConfig a;
  RunConfig b;
  CHECK(config_hash(a) == config_hash(b));
  CHECK(config_hash(a).size() == 16);
  b.paths.outputDir = "elsewhere";
  CHECK(config_hash(a) == config_hash(b));
  b.seed = 43;
  CHECK(config_hash(a) != config_hash(b));
  CHECK(parse_config(config_to_json(a)).discovery.topK == a.discovery.topK);
  CHECK(hex64(fnv1a64("a")) == "af63dc4c8601ec8c");
}

TEST_CASE("discovery configs take county soil and fixed management") {
  const auto space = sampling::default_param_space();
  const auto cfg = sampling::design_batch(space, 1, 5)[0].config;
  const auto r = localize_config(space, cfg, cropsim::county_soil("Randolph"), ManagementConfig{});
  CHECK(r.soilTextureIndex == 2);
  CHECK(r.carbon == 0.01);
  CHECK(r.fInert == 0.75);
  CHECK(r.cn2Bare == 100);
  CHECK(r.initialWaterPercent == 93);
  CHECK(r.population == 7);
  CHECK(r.startDateOffset == 10);
  CHECK(r.fertilizeAtSowing == 180);
  CHECK(r.rue == cfg.rue);
  CHECK_NOTHROW(sampling::validate_config(space, r));
  CHECK(localize_config(space, cfg, cropsim::county_soil("Mason"), {}).soilTextureIndex == 0);
  CHECK(genetic_variables(space).size() == 12);
}

TEST_CASE("discovery environments") {
  const auto envs = discovery_environments(DiscoveryConfig{});
  REQUIRE(envs.size() == 18);
  CHECK(envs[0].key() == "Randolph/control/0");
  CHECK(envs[17].key() == "Bremer/ssp585-like/1");
  DiscoveryConfig bad;
  bad.locations = {"Atlantis"};
  CHECK_THROWS_AS(discovery_environments(bad), InputError);
  bad.locations = {"Logan"};
  bad.scenarios = {"ssp999"};
  CHECK_THROWS_AS(discovery_environments(bad), ConfigError);
}

TEST_CASE("cli end to end on the tiny config") {
  const fs::path work = fresh_dir("e2e");
  const std::string base = "--config config/tiny.json --out '" + (work / "run").string() + "' -q ";
  const auto r = run_cli(base + "all", work);
  INFO(r.err);
  REQUIRE(r.status == 0);
  const json report = json::parse(slurp(work / "run" / artifact::kReport));
  CHECK(report["schemaVersion"] == "1.0");
  CHECK(report["discovery"]["environmentCount"] == 18);
  CHECK(report["emulator"]["test"]["perOutput"].size() == 13);

  const json manifest = json::parse(slurp(work / "run" / artifact::kManifest));
  for (const char* stage : {"design", "train-weather", "simulate", "swag", "discover", "report"})
    CHECK(manifest["stages"].contains(stage));
  CHECK(manifest["stages"]["design"]["outputs"][artifact::kDesign] ==
        file_checksum(work / "run" / artifact::kDesign));
  CHECK(manifest["stages"]["report"]["configHash"] == report["configHash"]);

  SUBCASE("rerunning a stage is byte-identical") {
    std::map<std::string, std::string> before;
    for (const auto& e : fs::directory_iterator(work / "run")) before[e.path().filename()] = slurp(e.path());
    REQUIRE(run_cli(base + "simulate", work).status == 0);
    REQUIRE(run_cli(base + "evaluate", work).status == 0);
    REQUIRE(run_cli(base + "report", work).status == 0);
    for (const auto& e : fs::directory_iterator(work / "run")) {
      CAPTURE(e.path().filename().string());
      CHECK(slurp(e.path()) == before[e.path().filename()]);
    }
  }
}

TEST_CASE("cli stage errors") {
  const fs::path work = fresh_dir("errors");
  const std::string out = "--out '" + (work / "run").string() + "' ";
  SUBCASE("discover without a posterior names the swag stage") {
    const auto r = run_cli("--config config/tiny.json " + out + "discover", work);
    CHECK(r.status != 0);
    CHECK(r.err.find("run 'cropemu swag' first") != std::string::npos);
  }
  SUBCASE("simulate without a design") {
    const auto r = run_cli("--config config/tiny.json " + out + "simulate", work);
    CHECK(r.status != 0);
    CHECK(r.err.find("'cropemu design'") != std::string::npos);
  }
  SUBCASE("bad config key") {
    std::ofstream(work / "bad.json") << R"({"swag": {"epocs": 3}})";
    const auto r = run_cli("--config '" + (work / "bad.json").string() + "' " + out + "design", work);
    CHECK(r.status != 0);
    CHECK(r.err.find("swag.epocs: unknown key") != std::string::npos);
    CHECK_FALSE(fs::exists(work / "run" / artifact::kDesign));
  }
  SUBCASE("missing corpus") {
    const auto r = run_cli("--config config/tiny.json --corpus nowhere.csv " + out + "train-weather", work);
    CHECK(r.status != 0);
    CHECK(r.err.find("nowhere.csv") != std::string::npos);
  }
}
