#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "invadelab/experiments.hpp"
#include "invadelab/observables.hpp"

using namespace invadelab;

namespace {

std::string fnv1a_hex(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

ExperimentConfig crossing_config() {
  ExperimentConfig c;
  c.kind = "crossing";
  c.ns = {2, 4};
  c.ps = {0.4, 0.5};
  c.trials = 200;
  c.seed0 = 7;
  return c;
}

ExperimentConfig profile_config() {
  ExperimentConfig c;
  c.kind = "profile";
  c.ns = {100, 1000};
  c.bin_edges = {0.0, 0.25, 0.45, 0.55, 0.75, 1.0};
  c.trials = 20;
  c.seed0 = 11;
  return c;
}

std::string csv_of(const std::vector<ResultRow>& rows) {
  std::ostringstream out;
  write_csv(out, rows);
  return out.str();
}

std::vector<ResultRow> read_golden(const std::string& name) {
  std::ifstream in(std::filesystem::path(INVADELAB_GOLDEN_DIR) / name);
  REQUIRE(in);
  return read_csv(in);
}

std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("invadelab-test-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("config JSON roundtrip keeps every field") {
  ExperimentConfig c = crossing_config();
  c.eps = 0.02;
  c.bin_edges = {0.0, 0.5, 1.0};
  c.event = "Lk";
  c.k = 3;
  c.seed0 = 0xdeadbeefcafef00dULL;
  c.workers = 3;
  c.checkpoint_dir = "ck";
  c.checkpoint_every = 4096;
  c.out = "x.csv";
  c.format = "json";
  const ExperimentConfig d = ExperimentConfig::from_json(c.to_json());
  CHECK(d.canonical_json() == c.canonical_json());
  CHECK(d.to_json() == c.to_json());
  CHECK(d.seed0 == c.seed0);
  CHECK(d.workers == 3);
  CHECK(d.checkpoint_dir == "ck");
}

TEST_CASE("config parsing rejects bad input with ConfigError") {
  CHECK_THROWS_AS(ExperimentConfig::from_json(R"({"kind":"pi","bogus":1})"), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json(R"({"kind":"pi","trials":"many"})"), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json("{not json"), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json("[1,2]"), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json(R"({"seed":"0xzz"})"), std::invalid_argument);
  CHECK(ExperimentConfig::from_json(R"({"seed":"0x1f"})").seed0 == 31);
  CHECK(ExperimentConfig::from_json(R"({"seed0":42})").seed0 == 42);
}

TEST_CASE("validate names the violated precondition") {
  ExperimentConfig c;
  c.kind = "percolate";
  try {
    c.validate();
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("unknown kind 'percolate'") != std::string::npos);
    for (const auto& k : experiment_kinds()) CHECK(msg.find(k) != std::string::npos);
  }
  CHECK_THROWS_AS(run(c), ConfigError);

  auto rejects = [](ExperimentConfig bad, const std::string& needle) {
    try {
      bad.validate();
      return false;
    } catch (const ConfigError& e) {
      return std::string(e.what()).find(needle) != std::string::npos;
    }
  };
  ExperimentConfig ok;
  ok.kind = "pi";
  CHECK_NOTHROW(ok.validate());
  ExperimentConfig b = ok;
  b.trials = 0;
  CHECK(rejects(b, "trials"));
  b = ok;
  b.kind = "corrlen";
  CHECK(rejects(b, "p != 1/2"));
  b = ok;
  b.kind = "fourarm";
  b.n = 1;
  CHECK(rejects(b, "n >= 2"));
  b = ok;
  b.format = "xlsx";
  CHECK(rejects(b, "format"));
  b = ok;
  b.kind = "events";
  b.event = "Q";
  CHECK(rejects(b, "Dn, Dkm, Lk"));
  b = ok;
  b.kind = "stabilize";
  b.horizon_factor = 1.0;
  CHECK(rejects(b, "horizon_factor"));
}

TEST_CASE("config digest is FNV-1a of a frozen canonical form") {
  const ExperimentConfig c = crossing_config();
  CHECK(c.canonical_json() ==
        R"({"bin_edges":[],"bin_width":0.01,"dkm_m":4,"ell":5,"eps":0.05,"event":"Dn","horizon_factor":16.0,)"
        R"("k":2,"kind":"crossing","m":0,"manifest_seed":"0x0000000000000001","manifest_trials":2000,"n":16,)"
        R"("ns":[2,4],"p":0.5,"ps":[0.4,0.5],"seed0":"0x0000000000000007","trials":200,"truncation":0,"x":0.5})");
  CHECK(c.digest() == fnv1a_hex(c.canonical_json()));
  CHECK(c.digest() == "3a12b45d65626a2e");

  ExperimentConfig d = c;
  d.workers = 8;
  d.checkpoint_dir = "/tmp/x";
  d.out = "o.csv";
  d.format = "json";
  CHECK(d.digest() == c.digest());
  d.trials = 201;
  CHECK(d.digest() != c.digest());
}

TEST_CASE("trial i uses seed mix64(seed0, i)") {
  ExperimentConfig c;
  c.kind = "radius";
  c.n = 300;
  c.trials = 5;
  c.seed0 = 99;
  const auto rows = run(c);
  REQUIRE(rows.size() == 1);
  double sum = 0.0;
  for (std::int64_t i = 0; i < 5; ++i) {
    const WeightField f(mix64(99, static_cast<std::uint64_t>(i)));
    sum += static_cast<double>(radius(invade_until(f, StopSteps{300}), 300));
  }
  CHECK(rows[0].mean == doctest::Approx(sum / 5).epsilon(1e-12));
  CHECK(rows[0].trials == 5);
}

TEST_CASE("results do not depend on the worker count") {
  std::vector<ExperimentConfig> configs;
  configs.push_back(crossing_config());
  configs.push_back(profile_config());
  for (const char* kind : {"pi", "fourarm", "identity", "xi", "radius", "outlets", "stabilize", "scaling"}) {
    ExperimentConfig c;
    c.kind = kind;
    c.n = 8;
    c.trials = 24;
    c.seed0 = 5;
    if (c.kind == "identity" || c.kind == "xi" || c.kind == "radius" || c.kind == "outlets") c.n = 400;
    configs.push_back(c);
  }
  for (auto c : configs) {
    CAPTURE(c.kind);
    c.workers = 1;
    const auto a = run(c);
    c.workers = 8;
    const auto b = run(c);
    CHECK(!a.empty());
    CHECK(same_results(a, b));
    CHECK(csv_of(a).size() > 0);
  }
}

TEST_CASE("reruns reproduce rows and seed0 changes them") {
  ExperimentConfig c = crossing_config();
  const auto a = run(c);
  const auto b = run(c);
  CHECK(same_results(a, b));
  for (const auto& r : a) {
    CHECK(r.config_digest == c.digest());
    CHECK(r.seed0 == 7);
    CHECK(r.wall_time >= 0.0);
  }
  c.seed0 = 8;
  CHECK_FALSE(same_results(a, run(c)));
}

TEST_CASE("CSV: header-only for no rows, stable column order, byte-identical roundtrip") {
  CHECK(csv_of({}) == "estimand,n,m,p,eps,x_lo,x_hi,mean,se,ci_lo,ci_hi,trials,seed0,config_digest,note,wall_time\n");
  for (const auto& rows : {run(crossing_config()), run(profile_config())}) {
    const std::string text = csv_of(rows);
    std::istringstream in(text);
    const auto back = read_csv(in);
    CHECK(same_results(rows, back));
    CHECK(csv_of(back) == text);
  }
  std::istringstream bad_header("estimand,n\n");
  CHECK_THROWS(read_csv(bad_header));
  std::istringstream short_row(std::string(kResultCsvHeader) + "\nsigma,1,2\n");
  CHECK_THROWS(read_csv(short_row));
}

TEST_CASE("CSV matches frozen golden files apart from wall_time") {
  for (const auto& [name, config] :
       {std::pair{"crossing.csv", crossing_config()}, std::pair{"profile.csv", profile_config()}}) {
    CAPTURE(name);
    const auto golden = read_golden(name);
    const auto rows = run(config);
    CHECK(same_results(rows, golden));
  }
}

TEST_CASE("JSON emission mirrors the CSV columns with null for missing values") {
  const auto rows = run(profile_config());
  std::ostringstream out;
  emit(out, rows, OutputFormat::Json);
  const auto j = nlohmann::json::parse(out.str());
  REQUIRE(j.size() == rows.size());
  CHECK(j[0]["estimand"] == "a_n");
  CHECK(j[0]["se"].is_null());
  CHECK(j[0]["mean"].get<double>() == rows[0].mean);
  CHECK(j[0]["seed0"] == "0x000000000000000b");
  CHECK(j[0].size() == 16);
}

TEST_CASE("SVG plot needs rows and draws one bar per point") {
  std::ostringstream empty;
  CHECK_THROWS_AS(emit(empty, {}, OutputFormat::Svg), std::invalid_argument);
  const auto rows = run(crossing_config());
  std::ostringstream out;
  emit(out, rows, OutputFormat::Svg);
  const std::string svg = out.str();
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("</svg>") != std::string::npos);
  CHECK(svg.find("sigma") != std::string::npos);
  std::size_t bars = 0;
  for (auto pos = svg.find("<line"); pos != std::string::npos; pos = svg.find("<line", pos + 1)) ++bars;
  CHECK(bars == rows.size());
  CHECK(parse_format("svg-plot") == OutputFormat::Svg);
  CHECK_THROWS_AS(parse_format("png"), ConfigError);
  CHECK_THROWS(emit(std::filesystem::path("/nonexistent-dir/x.csv"), rows, OutputFormat::Csv));
}

TEST_CASE("profile rows form a step through (0.4, ~1) and (0.6, ~0)") {
  ExperimentConfig c;
  c.kind = "profile";
  c.n = 20000;
  c.bin_edges = {0.35, 0.45, 0.55, 0.65};
  c.trials = 20;
  c.seed0 = 3;
  const auto rows = run(c);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].mean >= 0.9);
  CHECK(rows[2].mean <= 0.1);
  CHECK(rows[0].mean > rows[1].mean);
  CHECK(rows[1].mean > rows[2].mean);
}

TEST_CASE("profile-step emits the three acceptance bins per horizon") {
  ExperimentConfig c;
  c.kind = "profile-step";
  c.ns = {500, 2000};
  c.trials = 10;
  const auto rows = run(c);
  REQUIRE(rows.size() == 6);
  const double lo[] = {0.35, 0.5, 0.55};
  const double hi[] = {0.45, 0.51, 0.65};
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(rows[i].estimand == "a_n");
    CHECK(rows[i].n == (i < 3 ? 500 : 2000));
    CHECK(rows[i].x_lo == lo[i % 3]);
    CHECK(rows[i].x_hi == hi[i % 3]);
  }
  ExperimentConfig d;
  d.kind = "profile-step";
  CHECK(d.scales() == std::vector<std::int64_t>{10000, 100000, 1000000});
}

TEST_CASE("interrupted runs resume to bit-identical rows under any worker count") {
  ExperimentConfig c = profile_config();
  c.ns = {700, 3000};
  c.trials = 6;
  const auto reference = run(c);
  for (int workers : {1, 4}) {
    const auto dir = scratch_dir("resume-" + std::to_string(workers));
    ExperimentConfig r = c;
    r.workers = workers;
    r.checkpoint_dir = dir.string();
    r.checkpoint_every = 256;
    r.checkpoint_stop_after = 512;
    int interruptions = 0;
    std::vector<ResultRow> rows;
    for (;;) {
      try {
        rows = run(r);
        break;
      } catch (const RunInterrupted&) {
        ++interruptions;
        REQUIRE(interruptions < 100);
      }
    }
    CHECK(interruptions >= 2);
    CHECK(same_results(rows, reference));
    CHECK(std::filesystem::is_empty(dir));
    std::filesystem::remove_all(dir);
  }
}

TEST_CASE("invade_resumable matches an uninterrupted invasion") {
  const auto dir = scratch_dir("invade");
  const WeightField f(2024);
  const InvasionTrace ref = invade_until(f, StopSteps{5000});
  const CheckpointOptions ck{dir / "t.ckpt", 1000, 1500};
  std::optional<InvasionTrace> t;
  int stops = 0;
  while (!(t = invade_resumable(f, 5000, ck))) ++stops;
  CHECK(stops >= 2);
  CHECK(t->size() == ref.size());
  CHECK(t->hash() == ref.hash());
  CHECK(std::ranges::equal(t->codes(), ref.codes()));
  CHECK_FALSE(std::filesystem::exists(ck.path));
  const auto plain = invade_resumable(f, 5000, CheckpointOptions{});
  REQUIRE(plain);
  CHECK(plain->hash() == ref.hash());
  std::filesystem::remove_all(dir);
}
