#include "invadelab/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "invadelab/events.hpp"
#include "invadelab/manifest.hpp"
#include "invadelab/parallel.hpp"
#include "invadelab/percolation.hpp"

namespace invadelab {

namespace {

using nlohmann::json;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kZ95 = 1.959963984540054;

std::string hex64(std::uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "0x%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string fmt_double(double v) {
  if (std::isnan(v)) return "";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_double(const std::string& s) {
  if (s.empty()) return kNaN;
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw std::runtime_error("malformed number '" + s + "'");
  return v;
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

// ---------------------------------------------------------------------------
// Checkpoint files.

template <typename T>
void put(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw std::runtime_error("truncated checkpoint");
  return v;
}

constexpr std::uint64_t kProfileCkptMagic = 0x31504B43464F5250ULL;
constexpr std::uint64_t kTraceCkptMagic = 0x31504B4345434152ULL;

void put_profile(std::ostream& out, const BinnedProfile& p) {
  put(out, static_cast<std::uint64_t>(p.bins.edges().size()));
  for (double e : p.bins.edges()) put(out, e);
  for (auto c : p.q_counts) put(out, c);
  for (auto c : p.p_counts) put(out, c);
  put(out, p.n);
  put(out, p.checked);
}

BinnedProfile get_profile(std::istream& in) {
  std::vector<double> edges(get<std::uint64_t>(in));
  for (double& e : edges) e = get<double>(in);
  BinnedProfile p{BinSpec(std::move(edges))};
  for (auto& c : p.q_counts) c = get<std::int64_t>(in);
  for (auto& c : p.p_counts) c = get<std::int64_t>(in);
  p.n = get<std::int64_t>(in);
  p.checked = get<std::int64_t>(in);
  return p;
}

void write_atomically(const std::filesystem::path& path, const std::string& bytes) {
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write checkpoint " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("failed writing checkpoint " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace

// ---------------------------------------------------------------------------

std::optional<std::vector<BinnedProfile>> profile_run_resumable(const WeightField& field,
                                                                std::span<const std::int64_t> horizons,
                                                                const BinSpec& bins, const CheckpointOptions& ckpt) {
  if (ckpt.path.empty()) return profile_run(field, horizons, bins);
  if (!std::is_sorted(horizons.begin(), horizons.end())) throw std::invalid_argument("horizons must be ascending");
  if (ckpt.every < 1) throw std::invalid_argument("checkpoint interval must be >= 1");

  std::optional<InvasionEngine> engine;
  BinnedProfile acc(bins);
  std::vector<BinnedProfile> done;
  if (std::filesystem::exists(ckpt.path)) {
    std::ifstream in(ckpt.path, std::ios::binary);
    if (get<std::uint64_t>(in) != kProfileCkptMagic) throw std::runtime_error("not a profile checkpoint");
    const EngineState state = EngineState::read(in);
    acc = get_profile(in);
    done.resize(get<std::uint64_t>(in));
    for (auto& d : done) d = get_profile(in);
    if (acc.bins != bins) throw std::runtime_error("checkpoint bins differ from the requested bins");
    engine.emplace(InvasionEngine::restore(field, state));
  } else {
    engine.emplace(field);
    for (const auto& c : engine->initial_checked()) acc.add_checked(c.weight);
    acc.checked = engine->checked_total();
  }

  auto save = [&] {
    std::ostringstream out(std::ios::binary);
    put(out, kProfileCkptMagic);
    engine->save().write(out);
    put_profile(out, acc);
    put(out, static_cast<std::uint64_t>(done.size()));
    for (const auto& d : done) put_profile(out, d);
    write_atomically(ckpt.path, out.str());
  };

  for (std::size_t h = done.size(); h < horizons.size(); ++h) {
    while (engine->steps() < horizons[h]) {
      const StepView s = engine->step();
      acc.add_invaded(s.weight);
      for (const auto& c : s.newly_checked) acc.add_checked(c.weight);
      if (engine->steps() % ckpt.every == 0) {
        acc.n = engine->steps();
        acc.checked = engine->checked_total();
        save();
        if (ckpt.stop_after > 0 && engine->steps() >= ckpt.stop_after) return std::nullopt;
      }
    }
    acc.n = engine->steps();
    acc.checked = engine->checked_total();
    done.push_back(acc);
  }
  std::filesystem::remove(ckpt.path);
  return done;
}

std::optional<InvasionTrace> invade_resumable(const WeightField& field, std::int64_t steps,
                                              const CheckpointOptions& ckpt) {
  if (steps < 0) throw std::invalid_argument("steps must be >= 0");
  if (ckpt.path.empty()) return invade_until(field, StopSteps{steps});
  if (ckpt.every < 1) throw std::invalid_argument("checkpoint interval must be >= 1");
  std::optional<InvasionEngine> engine;
  InvasionTrace trace(field.seed());
  if (std::filesystem::exists(ckpt.path)) {
    std::ifstream in(ckpt.path, std::ios::binary);
    if (get<std::uint64_t>(in) != kTraceCkptMagic) throw std::runtime_error("not an invasion checkpoint");
    const EngineState state = EngineState::read(in);
    trace = InvasionTrace::read_binary(in);
    engine.emplace(InvasionEngine::restore(field, state));
  } else {
    engine.emplace(field);
    trace.set_initial(engine->initial_checked());
  }
  while (engine->steps() < steps) {
    trace.append(engine->step());
    if (engine->steps() % ckpt.every == 0) {
      std::ostringstream out(std::ios::binary);
      put(out, kTraceCkptMagic);
      engine->save().write(out);
      trace.write_binary(out);
      write_atomically(ckpt.path, out.str());
      if (ckpt.stop_after > 0 && engine->steps() >= ckpt.stop_after && engine->steps() < steps) return std::nullopt;
    }
  }
  trace.stop_reason = "steps";
  std::filesystem::remove(ckpt.path);
  return trace;
}

// ---------------------------------------------------------------------------
// Configuration.

const std::vector<std::string>& experiment_kinds() {
  static const std::vector<std::string> kinds = {"crossing", "corrlen", "pnqn",     "pi",       "fourarm",
                                                 "profile",  "profile-step", "identity", "xi", "radius",
                                                 "stabilize", "outlets", "events",   "scaling"};
  return kinds;
}

std::vector<std::int64_t> ExperimentConfig::scales() const {
  if (!ns.empty()) return ns;
  if (kind == "profile-step") return {10000, 100000, 1000000};
  return {n};
}

BinSpec ExperimentConfig::bins() const {
  if (kind == "profile-step") return BinSpec({0.35, 0.45, 0.5, 0.51, 0.55, 0.65});
  return bin_edges.empty() ? BinSpec::uniform(bin_width) : BinSpec(bin_edges);
}

void ExperimentConfig::validate() const {
  const auto& kinds = experiment_kinds();
  if (std::find(kinds.begin(), kinds.end(), kind) == kinds.end()) {
    std::string list;
    for (const auto& k : kinds) list += (list.empty() ? "" : ", ") + k;
    throw ConfigError("unknown kind '" + kind + "'; expected one of: " + list);
  }
  auto need = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
  };
  need(trials > 0, "trials must be positive");
  need(workers >= 0, "workers must be >= 0");
  need(eps > 0.0 && eps < 1.0, "eps must lie in (0,1)");
  need(checkpoint_every >= 1, "checkpoint_every must be >= 1");
  need(checkpoint_stop_after >= 0, "checkpoint_stop_after must be >= 0");
  for (double q : thresholds()) need(q >= 0.0 && q <= 1.0, "p must lie in [0,1]");
  const auto sc = scales();
  const std::int64_t smallest = *std::min_element(sc.begin(), sc.end());
  parse_format(format);
  if (kind == "crossing") {
    need(smallest >= 1 && m >= 0, "crossing requires n, m >= 1");
  } else if (kind == "corrlen") {
    for (double q : thresholds()) need(q != kCriticalP, "corrlen requires p != 1/2");
    need(eps < 0.5, "corrlen requires eps in (0, 1/2)");
  } else if (kind == "pnqn") {
    need(smallest >= 1, "pnqn requires n >= 1");
    need(eps < 0.5, "pnqn requires eps in (0, 1/2)");
  } else if (kind == "pi") {
    need(smallest >= 1, "pi requires n >= 1");
  } else if (kind == "fourarm") {
    need(smallest >= 2, "fourarm requires n >= 2");
  } else if (kind == "profile" || kind == "profile-step" || kind == "xi" || kind == "radius" ||
             kind == "outlets" || kind == "identity") {
    need(smallest >= 0, "step horizon n must be >= 0");
    bins();
    if (kind == "identity") need(x >= 0.0 && x <= 1.0, "identity requires x in [0,1]");
  } else if (kind == "stabilize") {
    need(smallest >= 1, "stabilize requires n >= 1");
    need(horizon_factor >= 2.0, "stabilize requires horizon_factor >= 2");
  } else if (kind == "events") {
    need(event == "Dn" || event == "Dkm" || event == "Lk", "event must be one of Dn, Dkm, Lk");
    need(smallest >= 1, "events require n >= 1");
    if (event == "Lk") need(k >= 2, "L_k requires k >= 2");
    if (event == "Dkm") need(k >= 1 && dkm_m >= 1, "D_{k,m} requires k, m >= 1");
  } else if (kind == "scaling") {
    need(smallest >= 1, "scaling requires n >= 1");
  }
}

namespace {

json config_fields(const ExperimentConfig& c) {
  json j;
  j["kind"] = c.kind;
  j["n"] = c.n;
  j["m"] = c.m;
  j["ns"] = c.ns;
  j["p"] = c.p;
  j["ps"] = c.ps;
  j["eps"] = c.eps;
  j["x"] = c.x;
  j["bin_width"] = c.bin_width;
  j["bin_edges"] = c.bin_edges;
  j["trials"] = c.trials;
  j["horizon_factor"] = c.horizon_factor;
  j["truncation"] = c.truncation;
  j["event"] = c.event;
  j["k"] = c.k;
  j["dkm_m"] = c.dkm_m;
  j["ell"] = c.ell;
  j["manifest_trials"] = c.manifest_trials;
  j["manifest_seed"] = hex64(c.manifest_seed);
  j["seed0"] = hex64(c.seed0);
  return j;
}

std::uint64_t seed_value(const json& v) {
  if (v.is_string()) return parse_seed(v.get<std::string>());
  if (v.is_number_unsigned() || v.is_number_integer()) return v.get<std::uint64_t>();
  throw ConfigError("seed must be a decimal/hex string or an integer");
}

}  // namespace

std::string ExperimentConfig::canonical_json() const { return config_fields(*this).dump(); }

std::string ExperimentConfig::to_json() const {
  json j = config_fields(*this);
  j["manifest"] = manifest;
  j["workers"] = workers;
  j["checkpoint_dir"] = checkpoint_dir;
  j["checkpoint_every"] = checkpoint_every;
  j["out"] = out;
  j["format"] = format;
  return j.dump(2);
}

ExperimentConfig ExperimentConfig::from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  ExperimentConfig c;
  for (const auto& [key, v] : j.items()) {
    try {
      if (key == "kind") c.kind = v.get<std::string>();
      else if (key == "n") c.n = v.get<std::int64_t>();
      else if (key == "m") c.m = v.get<std::int64_t>();
      else if (key == "ns") c.ns = v.get<std::vector<std::int64_t>>();
      else if (key == "p") c.p = v.get<double>();
      else if (key == "ps") c.ps = v.get<std::vector<double>>();
      else if (key == "eps") c.eps = v.get<double>();
      else if (key == "x") c.x = v.get<double>();
      else if (key == "bin_width") c.bin_width = v.get<double>();
      else if (key == "bin_edges") c.bin_edges = v.get<std::vector<double>>();
      else if (key == "trials") c.trials = v.get<std::int64_t>();
      else if (key == "horizon_factor") c.horizon_factor = v.get<double>();
      else if (key == "truncation") c.truncation = v.get<std::int64_t>();
      else if (key == "event") c.event = v.get<std::string>();
      else if (key == "k") c.k = v.get<int>();
      else if (key == "dkm_m") c.dkm_m = v.get<int>();
      else if (key == "ell") c.ell = v.get<int>();
      else if (key == "manifest") c.manifest = v.get<std::string>();
      else if (key == "manifest_trials") c.manifest_trials = v.get<std::int64_t>();
      else if (key == "manifest_seed") c.manifest_seed = seed_value(v);
      else if (key == "seed0" || key == "seed") c.seed0 = seed_value(v);
      else if (key == "workers") c.workers = v.get<int>();
      else if (key == "checkpoint_dir") c.checkpoint_dir = v.get<std::string>();
      else if (key == "checkpoint_every") c.checkpoint_every = v.get<std::int64_t>();
      else if (key == "out") c.out = v.get<std::string>();
      else if (key == "format") c.format = v.get<std::string>();
      else throw ConfigError("unknown config key '" + key + "'");
    } catch (const json::exception& e) {
      throw ConfigError("config key '" + key + "' has the wrong type: " + e.what());
    } catch (const std::invalid_argument& e) {
      if (dynamic_cast<const ConfigError*>(&e)) throw;
      throw ConfigError("config key '" + key + "': " + e.what());
    }
  }
  return c;
}

std::string ExperimentConfig::digest() const {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a(canonical_json())));
  return buf;
}

// ---------------------------------------------------------------------------
// Rows.

ResultRow::ResultRow()
    : n(kNaN), m(kNaN), p(kNaN), eps(kNaN), x_lo(kNaN), x_hi(kNaN), mean(kNaN), se(kNaN), ci_lo(kNaN), ci_hi(kNaN) {}

bool ResultRow::same_result(const ResultRow& o) const {
  auto same = [](double a, double b) {
    return (std::isnan(a) && std::isnan(b)) || std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b);
  };
  return estimand == o.estimand && same(n, o.n) && same(m, o.m) && same(p, o.p) && same(eps, o.eps) &&
         same(x_lo, o.x_lo) && same(x_hi, o.x_hi) && same(mean, o.mean) && same(se, o.se) &&
         same(ci_lo, o.ci_lo) && same(ci_hi, o.ci_hi) && trials == o.trials && seed0 == o.seed0 &&
         config_digest == o.config_digest && note == o.note;
}

bool same_results(const std::vector<ResultRow>& a, const std::vector<ResultRow>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!a[i].same_result(b[i])) return false;
  }
  return true;
}

namespace {

ResultRow estimate_row(std::string estimand, const Estimate& e) {
  ResultRow r;
  r.estimand = std::move(estimand);
  r.mean = e.mean;
  r.se = e.std_error;
  r.ci_lo = e.lower(kZ95);
  r.ci_hi = e.upper(kZ95);
  r.trials = e.trials;
  return r;
}

ResultRow moments_row(std::string estimand, const Moments& m) {
  return estimate_row(std::move(estimand), Estimate::from_moments(m, 0));
}

std::string sanitize(std::string s) {
  std::replace(s.begin(), s.end(), ',', ';');
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

// Per-trial values merged in trial order.
template <typename T, typename Fn>
std::vector<T> per_trial(const ExperimentConfig& c, Fn&& fn) {
  std::vector<T> out(static_cast<std::size_t>(c.trials));
  for_each_trial(c.trials, c.workers, [&](std::int64_t i) {
    out[static_cast<std::size_t>(i)] = fn(WeightField(trial_seed(c.seed0, i)), i);
  });
  return out;
}

template <typename T>
Moments moments_of(const std::vector<T>& values) {
  Moments m;
  for (const auto& v : values) m.add(static_cast<double>(v));
  return m;
}

std::filesystem::path checkpoint_path(const ExperimentConfig& c, std::int64_t trial) {
  if (c.checkpoint_dir.empty()) return {};
  return std::filesystem::path(c.checkpoint_dir) / (c.digest() + "-trial" + std::to_string(trial) + ".ckpt");
}

std::vector<ResultRow> run_profile(const ExperimentConfig& c) {
  auto horizons = c.scales();
  std::sort(horizons.begin(), horizons.end());
  const BinSpec bins = c.bins();
  if (!c.checkpoint_dir.empty()) std::filesystem::create_directories(c.checkpoint_dir);
  std::vector<std::uint8_t> stopped(static_cast<std::size_t>(c.trials), 0);
  auto runs = per_trial<std::vector<BinnedProfile>>(c, [&](const WeightField& f, std::int64_t i) {
    CheckpointOptions ck{checkpoint_path(c, i), c.checkpoint_every, c.checkpoint_stop_after};
    auto res = profile_run_resumable(f, horizons, bins, ck);
    if (!res) {
      stopped[static_cast<std::size_t>(i)] = 1;
      return std::vector<BinnedProfile>{};
    }
    return std::move(*res);
  });
  if (std::find(stopped.begin(), stopped.end(), 1) != stopped.end()) {
    throw RunInterrupted("run stopped after checkpoint; rerun to resume");
  }
  std::vector<ResultRow> rows;
  for (std::size_t h = 0; h < horizons.size(); ++h) {
    std::vector<BinnedProfile> at;
    at.reserve(runs.size());
    for (auto& r : runs) at.push_back(r[h]);
    AcceptanceOptions opt;
    opt.seed = mix64(c.seed0, 0xB00757A9ULL + h);
    const auto bins_out = acceptance_profile(at, opt);
    for (const auto& b : bins_out) {
      if (c.kind == "profile-step" && !((b.lo == 0.35 && b.hi == 0.45) || (b.lo == 0.5 && b.hi == 0.51) ||
                                        (b.lo == 0.55 && b.hi == 0.65))) {
        continue;
      }
      ResultRow r;
      r.estimand = "a_n";
      r.n = static_cast<double>(horizons[h]);
      r.x_lo = b.lo;
      r.x_hi = b.hi;
      r.trials = c.trials;
      if (b.defined) {
        r.mean = b.ratio;
        r.ci_lo = b.ci_lo;
        r.ci_hi = b.ci_hi;
      } else {
        r.note = "undefined";
      }
      rows.push_back(r);
    }
  }
  return rows;
}

std::vector<ResultRow> run_identity(const ExperimentConfig& c) {
  const std::vector<double> xs = c.ps.empty() ? std::vector<double>{c.x} : c.ps;
  struct Sample {
    std::vector<std::int64_t> pt;
    std::int64_t checked = 0;
  };
  std::vector<ResultRow> rows;
  for (std::int64_t n : c.scales()) {
    auto samples = per_trial<Sample>(c, [&](const WeightField& f, std::int64_t) {
      Sample s;
      s.pt.assign(xs.size(), 0);
      InvasionEngine engine(f);
      auto tally = [&](std::span<const CheckedEdge> edges) {
        for (const auto& e : edges) {
          for (std::size_t j = 0; j < xs.size(); ++j) s.pt[j] += e.weight <= xs[j];
        }
      };
      tally(engine.initial_checked());
      while (engine.steps() < n) tally(engine.step().newly_checked);
      s.checked = engine.checked_total();
      return s;
    });
    for (std::size_t j = 0; j < xs.size(); ++j) {
      std::vector<std::int64_t> pt, lt;
      for (const auto& s : samples) {
        pt.push_back(s.pt[j]);
        lt.push_back(s.checked);
      }
      const IdentityReport rep = checked_identity(pt, lt, xs[j]);
      ResultRow r;
      r.estimand = "checked_identity";
      r.n = static_cast<double>(n);
      r.x_lo = r.x_hi = xs[j];
      r.mean = rep.mean_diff;
      r.se = rep.std_error;
      r.ci_lo = rep.mean_diff - kZ95 * rep.std_error;
      r.ci_hi = rep.mean_diff + kZ95 * rep.std_error;
      r.trials = rep.trials;
      char buf[64];
      std::snprintf(buf, sizeof(buf), "z=%.6g", rep.z);
      r.note = buf;
      rows.push_back(r);
    }
  }
  return rows;
}

std::vector<ResultRow> run_trace_stat(const ExperimentConfig& c) {
  std::vector<ResultRow> rows;
  for (std::int64_t n : c.scales()) {
    auto values = per_trial<double>(c, [&](const WeightField& f, std::int64_t) -> double {
      const InvasionTrace t = invade_until(f, StopSteps{n});
      if (c.kind == "xi") return static_cast<double>(xi_count(t, c.eps, n));
      if (c.kind == "radius") return static_cast<double>(radius(t, n));
      return static_cast<double>(detect_outlets(t).size());
    });
    const std::string name = c.kind == "xi" ? "xi" : c.kind == "radius" ? "R_n" : "outlets";
    ResultRow r = moments_row(name, moments_of(values));
    r.n = static_cast<double>(n);
    if (c.kind == "xi") r.eps = c.eps;
    rows.push_back(r);
  }
  return rows;
}

std::vector<ResultRow> run_stabilize(const ExperimentConfig& c) {
  std::vector<ResultRow> rows;
  for (std::int64_t n : c.scales()) {
    auto results = per_trial<StabilizationResult>(
        c, [&](const WeightField& f, std::int64_t) { return stabilization_radius(f, n, c.horizon_factor); });
    Moments k;
    std::int64_t censored = 0;
    for (const auto& s : results) {
      if (s.censored) {
        ++censored;
      } else {
        k.add(static_cast<double>(s.k));
      }
    }
    ResultRow r = moments_row("r_n", k);
    r.n = static_cast<double>(n);
    r.note = "horizon_factor=" + fmt_double(c.horizon_factor);
    rows.push_back(r);
    ResultRow cr = estimate_row("r_n_censored", Estimate::from_indicators(censored, c.trials, 0));
    cr.n = static_cast<double>(n);
    rows.push_back(cr);
  }
  return rows;
}

ThresholdManifest load_manifest(const ExperimentConfig& c) {
  if (c.manifest.empty()) throw ConfigError("threshold-dependent events need a manifest; run pnqn with --manifest first");
  return ThresholdManifest::load(c.manifest);
}

std::vector<ResultRow> run_events(const ExperimentConfig& c) {
  std::vector<ResultRow> rows;
  if (c.event == "Lk") {
    const std::int64_t s = std::int64_t{1} << c.k;
    const EdgeId e = EdgeId::horizontal((s / 2 + s) / 2, 0);
    auto hits = per_trial<std::uint8_t>(c, [&](const WeightField& f, std::int64_t) {
      return static_cast<std::uint8_t>(detect_event_Lk(f, c.k, e, c.eps).event());
    });
    std::int64_t h = 0;
    for (auto v : hits) h += v;
    ResultRow r = estimate_row("P(L_k)", Estimate::from_indicators(h, c.trials, 0));
    r.n = static_cast<double>(c.k);
    r.eps = c.eps;
    rows.push_back(r);
    return rows;
  }
  const ThresholdManifest manifest = load_manifest(c);
  const ManifestKey key{c.eps, c.manifest_trials, c.manifest_seed};
  if (c.event == "Dkm") {
    const DkmRadii radii = DkmRadii::dyadic(c.k, c.dkm_m);
    const double p_hat = manifest.require(radii.r[2], key).p_n.mid();
    const std::int64_t trunc = c.truncation > 0 ? c.truncation : kStabilizationFactor * radii.r[4];
    auto hits = per_trial<std::uint8_t>(c, [&](const WeightField& f, std::int64_t) {
      return static_cast<std::uint8_t>(detect_event_Dkm(f, radii, p_hat, trunc).event());
    });
    std::int64_t h = 0;
    for (auto v : hits) h += v;
    ResultRow r = estimate_row("P(D_km)", Estimate::from_indicators(h, c.trials, 0));
    r.n = static_cast<double>(c.k);
    r.m = static_cast<double>(c.dkm_m);
    r.p = p_hat;
    rows.push_back(r);
    return rows;
  }
  for (std::int64_t n : c.scales()) {
    const double q_hat = manifest.require(n, key).q_n.mid();
    auto hits = per_trial<std::uint8_t>(c, [&](const WeightField& f, std::int64_t) {
      return static_cast<std::uint8_t>(detect_event_Dn(f, n, q_hat).event());
    });
    std::int64_t h = 0;
    for (auto v : hits) h += v;
    ResultRow r = estimate_row("P(D_n)", Estimate::from_indicators(h, c.trials, 0));
    r.n = static_cast<double>(n);
    r.p = q_hat;
    rows.push_back(r);
  }
  return rows;
}

std::vector<ResultRow> run_scaling(const ExperimentConfig& c) {
  std::vector<ResultRow> rows;
  const McOptions mc{c.workers};
  for (std::int64_t n : c.scales()) {
    auto counts = per_trial<BoxCounts>(c, [&](const WeightField& f, std::int64_t) {
      return box_counts_run(f, n, c.eps, std::int64_t{1} << 40);
    });
    Moments s, y;
    std::int64_t censored = 0;
    for (const auto& b : counts) {
      s.add(static_cast<double>(b.s_n));
      y.add(static_cast<double>(b.y_n));
      censored += b.censored;
    }
    const Estimate pi = point_to_boundary(kCriticalP, n, c.trials, mix64(c.seed0, 0x9151ULL), mc);
    ResultRow rs = moments_row("S_n", s);
    rs.n = static_cast<double>(n);
    if (censored > 0) rs.note = "censored=" + std::to_string(censored);
    ResultRow ry = moments_row("Y_n", y);
    ry.n = static_cast<double>(n);
    ry.eps = c.eps;
    ResultRow rp = estimate_row("pi", pi);
    rp.n = static_cast<double>(n);
    rp.p = kCriticalP;
    ResultRow ratio;
    ratio.estimand = "S_n_over_n2pi";
    ratio.n = static_cast<double>(n);
    ratio.trials = c.trials;
    const double nn = static_cast<double>(n) * static_cast<double>(n);
    if (pi.mean > 0.0 && s.mean > 0.0) {
      ratio.mean = s.mean / (nn * pi.mean);
      const double rel = std::hypot(s.std_error() / s.mean, pi.std_error / pi.mean);
      ratio.se = ratio.mean * rel;
      ratio.ci_lo = ratio.mean - kZ95 * ratio.se;
      ratio.ci_hi = ratio.mean + kZ95 * ratio.se;
    }
    rows.insert(rows.end(), {rs, ry, rp, ratio});
  }
  return rows;
}

std::vector<ResultRow> dispatch(const ExperimentConfig& c) {
  const McOptions mc{c.workers};
  std::vector<ResultRow> rows;
  const std::string& k = c.kind;
  if (k == "crossing") {
    for (std::int64_t n : c.scales()) {
      const std::int64_t m = c.m > 0 ? c.m : n;
      for (double p : c.thresholds()) {
        ResultRow r = estimate_row("sigma", crossing_probability(n, m, p, c.trials, c.seed0, mc));
        r.n = static_cast<double>(n);
        r.m = static_cast<double>(m);
        r.p = p;
        rows.push_back(r);
      }
    }
  } else if (k == "corrlen") {
    for (double p : c.thresholds()) {
      CorrelationOptions opt;
      opt.mc = mc;
      const CorrelationLength L = correlation_length(p, c.eps, c.trials, c.seed0, opt);
      ResultRow r;
      r.estimand = "L";
      r.p = p;
      r.eps = c.eps;
      r.mean = static_cast<double>(L.length);
      r.trials = L.trials_used;
      r.note = L.censored ? "censored" : L.straddled ? "straddled" : "";
      rows.push_back(r);
    }
  } else if (k == "pnqn") {
    ThresholdManifest manifest;
    if (!c.manifest.empty() && std::filesystem::exists(c.manifest)) manifest = ThresholdManifest::load(c.manifest);
    for (std::int64_t n : c.scales()) {
      const PnQn r = pn_qn(n, c.eps, c.trials, c.seed0, mc);
      manifest.put(r);
      for (int which = 0; which < 2; ++which) {
        const Bracket& b = which == 0 ? r.p_n : r.q_n;
        const Bracket& ci = which == 0 ? r.p_n_ci : r.q_n_ci;
        ResultRow row;
        row.estimand = which == 0 ? "p_n" : "q_n";
        row.n = static_cast<double>(n);
        row.eps = c.eps;
        row.x_lo = b.lo;
        row.x_hi = b.hi;
        row.mean = b.mid();
        row.ci_lo = ci.lo;
        row.ci_hi = ci.hi;
        row.trials = c.trials;
        rows.push_back(row);
      }
    }
    if (!c.manifest.empty()) manifest.save(c.manifest);
  } else if (k == "pi") {
    for (std::int64_t n : c.scales()) {
      for (double p : c.thresholds()) {
        ResultRow r = estimate_row("pi", point_to_boundary(p, n, c.trials, c.seed0, mc));
        r.n = static_cast<double>(n);
        r.p = p;
        rows.push_back(r);
      }
    }
  } else if (k == "fourarm") {
    for (std::int64_t n : c.scales()) {
      ResultRow r = estimate_row("four_arm", four_arm_probability(n, c.trials, c.seed0, c.p, mc));
      r.n = static_cast<double>(n);
      r.p = c.p;
      rows.push_back(r);
    }
  } else if (k == "profile" || k == "profile-step") {
    rows = run_profile(c);
  } else if (k == "identity") {
    rows = run_identity(c);
  } else if (k == "xi" || k == "radius" || k == "outlets") {
    rows = run_trace_stat(c);
  } else if (k == "stabilize") {
    rows = run_stabilize(c);
  } else if (k == "events") {
    rows = run_events(c);
  } else if (k == "scaling") {
    rows = run_scaling(c);
  }
  return rows;
}

}  // namespace

std::vector<ResultRow> run(const ExperimentConfig& config) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  std::vector<ResultRow> rows = dispatch(config);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const std::string digest = config.digest();
  for (auto& r : rows) {
    r.seed0 = config.seed0;
    r.config_digest = digest;
    r.note = sanitize(r.note);
    r.wall_time = wall;
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Emission.

OutputFormat parse_format(std::string_view name) {
  if (name == "csv") return OutputFormat::Csv;
  if (name == "json") return OutputFormat::Json;
  if (name == "svg" || name == "svg-plot") return OutputFormat::Svg;
  throw ConfigError("unknown output format '" + std::string(name) + "'; expected csv, json or svg-plot");
}

void write_csv(std::ostream& out, const std::vector<ResultRow>& rows) {
  out << kResultCsvHeader << '\n';
  for (const auto& r : rows) {
    out << sanitize(r.estimand) << ',' << fmt_double(r.n) << ',' << fmt_double(r.m) << ',' << fmt_double(r.p) << ','
        << fmt_double(r.eps) << ',' << fmt_double(r.x_lo) << ',' << fmt_double(r.x_hi) << ',' << fmt_double(r.mean)
        << ',' << fmt_double(r.se) << ',' << fmt_double(r.ci_lo) << ',' << fmt_double(r.ci_hi) << ',' << r.trials
        << ',' << hex64(r.seed0) << ',' << r.config_digest << ',' << sanitize(r.note) << ','
        << fmt_double(r.wall_time) << '\n';
  }
}

std::vector<ResultRow> read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kResultCsvHeader) throw std::runtime_error("unexpected CSV header");
  std::vector<ResultRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::size_t start = 0;
    for (;;) {
      const auto comma = line.find(',', start);
      f.push_back(line.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (f.size() != 16) throw std::runtime_error("CSV row has " + std::to_string(f.size()) + " fields, expected 16");
    ResultRow r;
    r.estimand = f[0];
    r.n = parse_double(f[1]);
    r.m = parse_double(f[2]);
    r.p = parse_double(f[3]);
    r.eps = parse_double(f[4]);
    r.x_lo = parse_double(f[5]);
    r.x_hi = parse_double(f[6]);
    r.mean = parse_double(f[7]);
    r.se = parse_double(f[8]);
    r.ci_lo = parse_double(f[9]);
    r.ci_hi = parse_double(f[10]);
    r.trials = std::stoll(f[11]);
    r.seed0 = parse_seed(f[12]);
    r.config_digest = f[13];
    r.note = f[14];
    r.wall_time = parse_double(f[15]);
    rows.push_back(r);
  }
  return rows;
}

void write_json(std::ostream& out, const std::vector<ResultRow>& rows) {
  json arr = json::array();
  auto num = [](double v) { return std::isnan(v) ? json(nullptr) : json(v); };
  for (const auto& r : rows) {
    arr.push_back({{"estimand", r.estimand},
                   {"n", num(r.n)},
                   {"m", num(r.m)},
                   {"p", num(r.p)},
                   {"eps", num(r.eps)},
                   {"x_lo", num(r.x_lo)},
                   {"x_hi", num(r.x_hi)},
                   {"mean", num(r.mean)},
                   {"se", num(r.se)},
                   {"ci_lo", num(r.ci_lo)},
                   {"ci_hi", num(r.ci_hi)},
                   {"trials", r.trials},
                   {"seed0", hex64(r.seed0)},
                   {"config_digest", r.config_digest},
                   {"note", r.note},
                   {"wall_time", num(r.wall_time)}});
  }
  out << arr.dump(2) << '\n';
}

void write_svg(std::ostream& out, const std::vector<ResultRow>& rows) {
  if (rows.empty()) throw std::invalid_argument("svg-plot needs at least one row");
  auto xval = [](const ResultRow& r) {
    if (!std::isnan(r.x_lo) && !std::isnan(r.x_hi)) return 0.5 * (r.x_lo + r.x_hi);
    if (!std::isnan(r.n)) return r.n;
    return r.p;
  };
  std::map<std::string, std::vector<const ResultRow*>> series;
  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  for (const auto& r : rows) {
    const double x = xval(r);
    if (std::isnan(x) || std::isnan(r.mean)) continue;
    const double s = std::isnan(r.se) ? 0.0 : 2.0 * r.se;
    series[r.estimand].push_back(&r);
    x0 = std::min(x0, x);
    x1 = std::max(x1, x);
    y0 = std::min(y0, r.mean - s);
    y1 = std::max(y1, r.mean + s);
  }
  if (series.empty()) {
    x0 = y0 = 0.0;
    x1 = y1 = 1.0;
  }
  if (x1 <= x0) x1 = x0 + 1.0;
  if (y1 <= y0) y1 = y0 + 1.0;
  constexpr double W = 640, H = 400, L = 60, R = 140, T = 20, B = 40;
  auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
  char buf[256];
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"400\" font-family=\"sans-serif\" "
         "font-size=\"11\">\n";
  std::snprintf(buf, sizeof(buf),
                "<rect x=\"%g\" y=\"%g\" width=\"%g\" height=\"%g\" fill=\"none\" stroke=\"#444\"/>\n", L, T,
                W - L - R, H - T - B);
  out << buf;
  std::snprintf(buf, sizeof(buf), "<text x=\"%g\" y=\"%g\">%.4g</text><text x=\"%g\" y=\"%g\" text-anchor=\"end\">%.4g</text>\n",
                L, H - B + 14, x0, W - R, H - B + 14, x1);
  out << buf;
  std::snprintf(buf, sizeof(buf), "<text x=\"%g\" y=\"%g\" text-anchor=\"end\">%.4g</text><text x=\"%g\" y=\"%g\" text-anchor=\"end\">%.4g</text>\n",
                L - 4, H - B, y0, L - 4, T + 10, y1);
  out << buf;
  std::size_t idx = 0;
  for (const auto& [name, pts] : series) {
    const char* color = kColors[idx % 6];
    out << "<g stroke=\"" << color << "\" fill=\"" << color << "\">\n<polyline fill=\"none\" points=\"";
    for (const ResultRow* r : pts) {
      std::snprintf(buf, sizeof(buf), "%.2f,%.2f ", px(xval(*r)), py(r->mean));
      out << buf;
    }
    out << "\"/>\n";
    for (const ResultRow* r : pts) {
      const double s = std::isnan(r->se) ? 0.0 : 2.0 * r->se;
      const double x = px(xval(*r));
      std::snprintf(buf, sizeof(buf),
                    "<line x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\"/><circle cx=\"%.2f\" cy=\"%.2f\" r=\"2.5\"/>\n",
                    x, py(r->mean - s), x, py(r->mean + s), x, py(r->mean));
      out << buf;
    }
    std::snprintf(buf, sizeof(buf), "<text x=\"%g\" y=\"%g\" stroke=\"none\">", W - R + 8, T + 14 + 16.0 * static_cast<double>(idx));
    out << buf << name << "</text>\n</g>\n";
    ++idx;
  }
  out << "</svg>\n";
}

void emit(std::ostream& out, const std::vector<ResultRow>& rows, OutputFormat format) {
  switch (format) {
    case OutputFormat::Csv: write_csv(out, rows); break;
    case OutputFormat::Json: write_json(out, rows); break;
    case OutputFormat::Svg: write_svg(out, rows); break;
  }
  if (!out) throw std::runtime_error("failed writing output");
}

void emit(const std::filesystem::path& path, const std::vector<ResultRow>& rows, OutputFormat format) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  emit(out, rows, format);
}

}  // namespace invadelab
