#include "cropemu/pipeline/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>

#include "cropemu/error.hpp"

namespace cropemu::pipeline {
namespace {

using nlohmann::json;

// Walks one JSON object, remembering which keys were consumed so the rest
// can be reported as unknown.
class Section {
 public:
  Section(const json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) fail(path_.empty() ? "<root>" : path_, "expected an object");
  }

  template <typename F>
  void child(const char* key, F&& body) {
    seen_.insert(key);
    if (!node_.contains(key)) return;
    Section sub(node_.at(key), join(key));
    body(sub);
    sub.finish();
  }

  void number(const char* key, double& out, double lo, double hi, bool openLow = false) {
    const json* v = get(key);
    if (!v) return;
    if (!v->is_number()) fail(join(key), "expected a number");
    const double d = v->get<double>();
    if (!(openLow ? d > lo : d >= lo) || !(d <= hi)) {
      fail(join(key), "value " + std::to_string(d) + " outside " + (openLow ? "(" : "[") +
                          std::to_string(lo) + ", " + std::to_string(hi) + "]");
    }
    out = d;
  }

  template <typename T>
  void integer(const char* key, T& out, std::uint64_t lo, std::uint64_t hi) {
    const json* v = get(key);
    if (!v) return;
    if (!v->is_number_unsigned() && !(v->is_number_integer() && v->get<long long>() >= 0)) {
      fail(join(key), "expected a nonnegative integer");
    }
    const std::uint64_t u = v->get<std::uint64_t>();
    if (u < lo || u > hi) {
      fail(join(key), "value " + std::to_string(u) + " outside [" + std::to_string(lo) + ", " +
                          std::to_string(hi) + "]");
    }
    out = static_cast<T>(u);
  }

  void signed_integer(const char* key, int& out, int lo, int hi) {
    const json* v = get(key);
    if (!v) return;
    if (!v->is_number_integer()) fail(join(key), "expected an integer");
    const long long i = v->get<long long>();
    if (i < lo || i > hi) fail(join(key), "value " + std::to_string(i) + " out of range");
    out = static_cast<int>(i);
  }

  void boolean(const char* key, bool& out) {
    const json* v = get(key);
    if (!v) return;
    if (!v->is_boolean()) fail(join(key), "expected true or false");
    out = v->get<bool>();
  }

  void string(const char* key, std::string& out) {
    const json* v = get(key);
    if (!v) return;
    if (!v->is_string()) fail(join(key), "expected a string");
    out = v->get<std::string>();
  }

  void path(const char* key, std::filesystem::path& out) {
    std::string s = out.string();
    string(key, s);
    out = s;
  }

  void strings(const char* key, std::vector<std::string>& out) {
    const json* v = get(key);
    if (!v) return;
    if (!v->is_array() || v->empty()) fail(join(key), "expected a nonempty array of strings");
    std::vector<std::string> r;
    for (std::size_t i = 0; i < v->size(); ++i) {
      if (!(*v)[i].is_string()) fail(join(key) + "[" + std::to_string(i) + "]", "expected a string");
      r.push_back((*v)[i].get<std::string>());
    }
    if (std::set<std::string>(r.begin(), r.end()).size() != r.size()) fail(join(key), "duplicate entries");
    out = std::move(r);
  }

  void sizes(const char* key, std::vector<std::size_t>& out) {
    const json* v = get(key);
    if (!v) return;
    if (!v->is_array()) fail(join(key), "expected an array of positive integers");
    std::vector<std::size_t> r;
    for (std::size_t i = 0; i < v->size(); ++i) {
      if (!(*v)[i].is_number_unsigned() || (*v)[i].get<std::uint64_t>() == 0) {
        fail(join(key) + "[" + std::to_string(i) + "]", "expected a positive integer");
      }
      r.push_back((*v)[i].get<std::size_t>());
    }
    out = std::move(r);
  }

  void finish() const {
    for (const auto& [key, value] : node_.items()) {
      if (!seen_.count(key)) fail(join(key), "unknown key");
    }
  }

  [[noreturn]] void fail(const std::string& where, const std::string& what) const {
    throw ConfigError("config: " + where + ": " + what);
  }

  std::string join(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  const json* get(const char* key) {
    seen_.insert(key);
    return node_.contains(key) ? &node_.at(key) : nullptr;
  }

  const json& node_;
  std::string path_;
  std::set<std::string> seen_;
};

constexpr std::uint64_t kBig = 1ULL << 40;

}  // namespace

RunConfig parse_config(const json& doc) {
  RunConfig c;
  Section root(doc, "");
  root.integer("seed", c.seed, 0, ~0ULL);
  root.child("paths", [&](Section& s) {
    s.path("weatherCorpus", c.paths.weatherCorpus);
    s.path("outputDir", c.paths.outputDir);
    s.path("paramSpace", c.paths.paramSpace);
  });
  root.child("corpus", [&](Section& s) {
    s.strings("sites", c.corpus.sites);
    s.signed_integer("firstYear", c.corpus.firstYear, 1800, 2200);
    s.signed_integer("lastYear", c.corpus.lastYear, 1800, 2200);
    s.integer("seed", c.corpus.seed, 0, ~0ULL);
    if (c.corpus.lastYear < c.corpus.firstYear) s.fail(s.join("lastYear"), "before firstYear");
  });
  root.child("sampling", [&](Section& s) {
    s.integer("count", c.sampling.count, 1, kBig);
    s.integer("skip", c.sampling.skip, 0, (1ULL << 32) - 1);
  });
  root.child("oracle", [&](Section& s) { s.string("soil", c.oracle.soil); });
  root.child("weather", [&](Section& s) {
    s.integer("tempRadEpochs", c.weather.tempRadEpochs, 1, kBig);
    s.integer("rainEpochs", c.weather.rainEpochs, 1, kBig);
    s.integer("synthCount", c.weather.synthCount, 1, kBig);
    s.integer("k", c.weather.k, 1, 1000);
    s.number("latitudeWeight", c.weather.latitudeWeight, 0, 1e6, true);
    s.boolean("sameLocation", c.weather.sameLocation);
  });
  root.child("emulator", [&](Section& s) {
    auto& h = c.emulator.hyper;
    s.sizes("hidden", h.hidden);
    s.number("learningRate", h.learningRate, 0, 10, true);
    s.number("weightDecay", h.weightDecay, 0, 10);
    s.integer("batchSize", h.batchSize, 2, kBig);
    s.integer("epochs", h.maxEpochs, 1, kBig);
    s.number("testFraction", c.emulator.testFraction, 0, 0.9, true);
  });
  root.child("swag", [&](Section& s) {
    auto& w = c.swag;
    s.number("learningRate", w.learningRate, 0, 10, true);
    s.number("momentum", w.momentum, 0, 0.999999);
    s.number("weightDecay", w.weightDecay, 0, 10);
    s.integer("epochs", w.totalFinetuneEpochs, 1, kBig);
    s.integer("collectFromEpoch", w.collectFromEpoch, 1, kBig);
    s.integer("sampleCount", w.sampleCount, 2, 100000);
    s.integer("maxRank", w.maxRank, 0, 100000);
    s.integer("batchSize", w.batchSize, 1, kBig);
    s.integer("batchNormUpdateBatches", w.batchNormUpdateBatches, 1, kBig);
  });
  root.child("discovery", [&](Section& s) {
    auto& d = c.discovery;
    s.strings("locations", d.locations);
    s.strings("scenarios", d.scenarios);
    s.integer("variants", d.variants, 1, 100);
    s.signed_integer("baseYear", d.baseYear, 1800, 2200);
    s.integer("configCount", d.configCount, 1, kBig);
    s.integer("topK", d.topK, 1, kBig);
    s.integer("sampleCount", d.sampleCount, 2, 100000);
    s.number("cvDefault", d.cvDefault, 0, 1e6, true);
    s.number("cvRelaxed", d.cvRelaxed, 0, 1e6, true);
    s.integer("relaxedEnvCount", d.relaxedEnvCount, 0, 100000);
    s.integer("clusters", d.clusters, 1, 1000);
    s.integer("restarts", d.restarts, 1, 10000);
    s.integer("importanceConfigs", d.importanceConfigs, 2, kBig);
    s.integer("importanceRepeats", d.importanceRepeats, 1, 10000);
    s.child("management", [&](Section& m) {
      m.number("population", d.management.population, 0, 1e6, true);
      m.number("startDate", d.management.startDate, 0, 1e6);
      m.number("fertilizeAtSowing", d.management.fertilizeAtSowing, 0, 1e6);
    });
    if (d.topK > d.configCount) s.fail(s.join("topK"), "exceeds configCount");
    if (d.cvRelaxed < d.cvDefault) s.fail(s.join("cvRelaxed"), "below cvDefault");
  });
  root.finish();
  try {
    swag::validate(c.swag);
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("config: swag: ") + e.what());
  }
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return parse_config(doc);
}

json config_to_json(const RunConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["paths"] = {{"weatherCorpus", c.paths.weatherCorpus.string()},
                {"outputDir", c.paths.outputDir.string()},
                {"paramSpace", c.paths.paramSpace.string()}};
  j["corpus"] = {{"sites", c.corpus.sites},
                 {"firstYear", c.corpus.firstYear},
                 {"lastYear", c.corpus.lastYear},
                 {"seed", c.corpus.seed}};
  j["sampling"] = {{"count", c.sampling.count}, {"skip", c.sampling.skip}};
  j["oracle"] = {{"soil", c.oracle.soil}};
  j["weather"] = {{"tempRadEpochs", c.weather.tempRadEpochs}, {"rainEpochs", c.weather.rainEpochs},
                  {"synthCount", c.weather.synthCount},       {"k", c.weather.k},
                  {"latitudeWeight", c.weather.latitudeWeight}, {"sameLocation", c.weather.sameLocation}};
  const auto& h = c.emulator.hyper;
  j["emulator"] = {{"hidden", h.hidden},         {"learningRate", h.learningRate},
                   {"weightDecay", h.weightDecay}, {"batchSize", h.batchSize},
                   {"epochs", h.maxEpochs},       {"testFraction", c.emulator.testFraction}};
  const auto& w = c.swag;
  j["swag"] = {{"learningRate", w.learningRate},
               {"momentum", w.momentum},
               {"weightDecay", w.weightDecay},
               {"epochs", w.totalFinetuneEpochs},
               {"collectFromEpoch", w.collectFromEpoch},
               {"sampleCount", w.sampleCount},
               {"maxRank", w.maxRank},
               {"batchSize", w.batchSize},
               {"batchNormUpdateBatches", w.batchNormUpdateBatches}};
  const auto& d = c.discovery;
  j["discovery"] = {{"locations", d.locations},
                    {"scenarios", d.scenarios},
                    {"variants", d.variants},
                    {"baseYear", d.baseYear},
                    {"configCount", d.configCount},
                    {"topK", d.topK},
                    {"sampleCount", d.sampleCount},
                    {"cvDefault", d.cvDefault},
                    {"cvRelaxed", d.cvRelaxed},
                    {"relaxedEnvCount", d.relaxedEnvCount},
                    {"clusters", d.clusters},
                    {"restarts", d.restarts},
                    {"importanceConfigs", d.importanceConfigs},
                    {"importanceRepeats", d.importanceRepeats},
                    {"management",
                     {{"population", d.management.population},
                      {"startDate", d.management.startDate},
                      {"fertilizeAtSowing", d.management.fertilizeAtSowing}}}};
  return j;
}

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string config_hash(const RunConfig& cfg) {
  json j = config_to_json(cfg);
  j["paths"].erase("outputDir");
  return hex64(fnv1a64(j.dump()));
}

}  // namespace cropemu::pipeline
