#include "invadelab/manifest.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace invadelab {

namespace {

using nlohmann::json;

std::string hex_seed(std::uint64_t s) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "0x%016llx", static_cast<unsigned long long>(s));
  return buf;
}

json bracket(const Bracket& b) { return json::array({b.lo, b.hi}); }
Bracket bracket(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }

bool matches(const PnQn& e, std::int64_t n, const ManifestKey& key) {
  return e.n == n && e.eps == key.eps && e.trials == key.trials && e.seed0 == key.seed0;
}

}  // namespace

std::string ThresholdManifest::to_json() const {
  json entries = json::array();
  for (const auto& e : entries_) {
    entries.push_back({{"n", e.n},
                       {"eps", e.eps},
                       {"trials", e.trials},
                       {"seed0", hex_seed(e.seed0)},
                       {"p_n", bracket(e.p_n)},
                       {"q_n", bracket(e.q_n)},
                       {"p_n_ci", bracket(e.p_n_ci)},
                       {"q_n_ci", bracket(e.q_n_ci)}});
  }
  return json{{"format", "invadelab-thresholds-1"}, {"entries", entries}}.dump(2) + "\n";
}

ThresholdManifest ThresholdManifest::from_json(const std::string& text) {
  ThresholdManifest m;
  const json doc = json::parse(text);
  if (doc.value("format", "") != "invadelab-thresholds-1") throw std::runtime_error("unrecognized manifest format");
  for (const auto& j : doc.at("entries")) {
    PnQn e;
    e.n = j.at("n").get<std::int64_t>();
    e.eps = j.at("eps").get<double>();
    e.trials = j.at("trials").get<std::int64_t>();
    e.seed0 = parse_seed(j.at("seed0").get<std::string>());
    e.p_n = bracket(j.at("p_n"));
    e.q_n = bracket(j.at("q_n"));
    e.p_n_ci = bracket(j.at("p_n_ci"));
    e.q_n_ci = bracket(j.at("q_n_ci"));
    m.put(e);
  }
  return m;
}

ThresholdManifest ThresholdManifest::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open manifest " + path.string() + "; run pnqn first");
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

void ThresholdManifest::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write manifest " + path.string());
  out << to_json();
  if (!out) throw std::runtime_error("failed writing manifest " + path.string());
}

void ThresholdManifest::put(const PnQn& entry) {
  const ManifestKey key{entry.eps, entry.trials, entry.seed0};
  for (auto& e : entries_) {
    if (matches(e, entry.n, key)) {
      e = entry;
      return;
    }
  }
  entries_.push_back(entry);
}

std::optional<PnQn> ThresholdManifest::find(std::int64_t n, const ManifestKey& key) const {
  for (const auto& e : entries_) {
    if (matches(e, n, key)) return e;
  }
  return std::nullopt;
}

const PnQn& ThresholdManifest::require(std::int64_t n, const ManifestKey& key) const {
  for (const auto& e : entries_) {
    if (matches(e, n, key)) return e;
  }
  throw std::runtime_error("no p_n/q_n estimate for n=" + std::to_string(n) + " (eps=" + std::to_string(key.eps) +
                           ", trials=" + std::to_string(key.trials) + ", seed0=" + hex_seed(key.seed0) +
                           "); run pnqn first");
}

}  // namespace invadelab
