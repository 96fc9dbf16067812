#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <set>
#include <sstream>

#include "invadelab/experiments.hpp"
#include "invadelab/invasion.hpp"
#include "invadelab/observables.hpp"
#include "invadelab/parallel.hpp"
#include "invadelab/percolation.hpp"
#include "oracles.hpp"

using namespace invadelab;

namespace {

WeightField origin_star_fixture() {
  const std::pair<EdgeId, double> pins[] = {{EdgeId::horizontal(0, 0), 0.7},
                                            {EdgeId::vertical(0, 0), 0.2},
                                            {EdgeId::horizontal(-1, 0), 0.9},
                                            {EdgeId::vertical(0, -1), 0.5}};
  return WeightField(3).with_overrides(pins);
}

std::set<std::uint64_t> frontier_codes(const InvasionEngine& e) {
  std::set<std::uint64_t> out;
  for (const auto& f : e.frontier_snapshot()) out.insert(f.code);
  return out;
}

}  // namespace

TEST_CASE("origin star fixture: invades N first with R_0 = 4, R_1 = 3") {
  InvasionEngine engine(origin_star_fixture());
  CHECK(engine.initial_checked().size() == 4);
  CHECK(engine.checked_total() == 4);
  const StepView s = engine.step();
  CHECK(s.index == 1);
  CHECK(s.edge() == EdgeId::vertical(0, 0));
  CHECK(s.weight == 0.2);
  CHECK(s.newly_checked.size() == 3);
  CHECK(engine.frontier_size() == 6);
  CHECK(engine.checked_total() == 7);
  CHECK(engine.radius() == 1);
}

TEST_CASE("priority-queue invasion equals the naive rescan oracle") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const WeightField f(mix64(seed, 99));
    const auto naive = oracle::naive_invasion(f, 500);
    const InvasionTrace t = invade_until(f, StopSteps{500});
    REQUIRE(t.size() == 500);
    for (std::int64_t n = 1; n <= 500; ++n) {
      if (t.code(n) != naive.codes[static_cast<std::size_t>(n - 1)]) FAIL("edge sequence differs at step " << n);
      if (t.checked_total(n) != naive.checked_totals[static_cast<std::size_t>(n)]) FAIL("L_n differs at " << n);
    }
    CHECK(t.checked_total(0) == 4);
  }
}

TEST_CASE("frontier equals the outer boundary of the invaded graph") {
  InvasionEngine engine(WeightField(8));
  VertexSet vs{{0, 0}};
  EdgeSet es;
  for (int n = 1; n <= 5000; ++n) {
    const StepView s = engine.step();
    es.insert(s.edge());
    for (Vertex v : s.edge().endpoints()) vs.insert(v);
    if (n % 1024 == 0 || n < 20) {
      std::set<std::uint64_t> want;
      for (EdgeId e : outer_boundary(vs, es)) want.insert(e.encode());
      CHECK(frontier_codes(engine) == want);
      for (EdgeId e : es) CHECK(engine.edge_invaded(e));
    }
  }
}

TEST_CASE("greedy choice is the frontier minimum and new checks are fresh") {
  InvasionEngine engine(WeightField(15));
  std::set<std::uint64_t> seen;
  for (const auto& c : engine.initial_checked()) seen.insert(c.code);
  for (int n = 0; n < 2000; ++n) {
    const FrontierEntry min = engine.frontier_min();
    double scan = 2.0;
    for (const auto& f : engine.frontier_snapshot()) scan = std::min(scan, f.weight);
    const StepView s = engine.step();
    CHECK(s.weight == min.weight);
    CHECK(s.weight == scan);
    for (const auto& c : s.newly_checked) CHECK(seen.insert(c.code).second);
  }
}

// R_0 + R_1 = 7 forces L_1 = 7, so the 4n ceiling only holds from n = 4 on;
// the sharp bound is L_n <= 3n + 4.
TEST_CASE("n <= L_n <= 3n + 4, L_n <= 4n for n >= 4, and the step-0 convention") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const InvasionTrace t = invade_until(WeightField(seed), StopSteps{3000});
    std::int64_t sum = 4;
    for (std::int64_t n = 1; n <= t.size(); ++n) {
      sum += static_cast<std::int64_t>(t.step(n).newly_checked.size());
      const auto L = t.checked_total(n);
      CHECK(L == sum);
      CHECK(L == static_cast<std::int64_t>(t.checked_through(n).size()));
      CHECK(n <= L);
      CHECK(L <= 3 * n + 4);
      if (n >= 4) CHECK(L <= 4 * n);
    }
    CHECK(t.step(1).newly_checked.size() == 3);
    CHECK(t.checked_total(1) == 7);
  }
}

TEST_CASE("Steps(0) records only the 4 origin edges") {
  const InvasionTrace t = invade_until(WeightField(1), StopSteps{0});
  CHECK(t.empty());
  CHECK(t.checked_total(0) == 4);
  CHECK(t.initial_checked().size() == 4);
}

TEST_CASE("trace hash is reproducible for Steps(10^5)") {
  const InvasionTrace a = invade_until(WeightField(1), StopSteps{100000});
  const InvasionTrace b = invade_until(WeightField(1), StopSteps{100000});
  CHECK(a.hash() == b.hash());
  const InvasionTrace c = invade_until(WeightField(2), StopSteps{100000});
  CHECK(a.hash() != c.hash());
}

TEST_CASE("binary trace roundtrip and CSV layout") {
  const InvasionTrace t = invade_until(WeightField(6), StopSteps{200});
  std::stringstream bin;
  t.write_binary(bin);
  const InvasionTrace r = InvasionTrace::read_binary(bin);
  CHECK(r.hash() == t.hash());
  CHECK(r.size() == 200);
  std::stringstream csv;
  t.write_csv(csv);
  std::string line;
  std::getline(csv, line);
  CHECK(line == kTraceCsvHeader);
  int rows = 0;
  while (std::getline(csv, line)) ++rows;
  CHECK(rows == 200);
}

TEST_CASE("engine save/restore continues bit-identically") {
  const WeightField f(44);
  InvasionEngine a(f);
  for (int i = 0; i < 777; ++i) a.step();
  std::stringstream buf;
  a.save().write(buf);
  InvasionEngine b = InvasionEngine::restore(f, EngineState::read(buf));
  CHECK(b.steps() == 777);
  CHECK(b.checked_total() == a.checked_total());
  for (int i = 0; i < 3000; ++i) {
    const StepView x = a.step();
    const StepView y = b.step();
    if (x.code != y.code || x.newly_checked.size() != y.newly_checked.size()) FAIL("diverged at " << i);
  }
}

TEST_CASE("invade_resumable stops and resumes to the same trace") {
  const auto dir = std::filesystem::temp_directory_path() / "invadelab_unit_resume";
  std::filesystem::create_directories(dir);
  const auto path = dir / "trace.ckpt";
  std::filesystem::remove(path);
  const WeightField f(90);
  CheckpointOptions ck{path, 1000, 2500};
  CHECK_FALSE(invade_resumable(f, 10000, ck).has_value());
  CHECK(std::filesystem::exists(path));
  ck.stop_after = 0;
  const auto resumed = invade_resumable(f, 10000, ck);
  REQUIRE(resumed.has_value());
  CHECK_FALSE(std::filesystem::exists(path));
  CHECK(resumed->hash() == invade_until(f, StopSteps{10000}).hash());
}

TEST_CASE("RadiusReached fires when an invaded edge leaves B(k-1)") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const InvasionTrace t = invade_until(WeightField(seed), StopRadiusReached{10});
    REQUIRE_FALSE(t.empty());
    CHECK(radius(t, t.size()) == 10);
    CHECK(radius(t, t.size() - 1) <= 9);
  }
  CHECK_THROWS(validate(StopRule{StopRadiusReached{0}}));
  CHECK_THROWS(validate(StopRule{StopSteps{-1}}));
}

TEST_CASE("BoxStabilized reports censoring on a short horizon") {
  const InvasionTrace t = invade_until(WeightField(3), StopBoxStabilized{20, 50});
  CHECK(t.censored);
  CHECK(t.size() == 50);
  const InvasionTrace u = invade_until(WeightField(3), StopBoxStabilized{2, 1 << 24});
  CHECK_FALSE(u.censored);
  CHECK(radius(u, u.size()) >= kStabilizationFactor * 2);
  REQUIRE(u.stabilized_at.has_value());
  for (std::int64_t i = *u.stabilized_at + 1; i <= u.size(); ++i) {
    const EdgeId e = u.step(i).edge();
    CHECK_FALSE((Box{2, {}}.contains(e.base()) || Box{2, {}}.contains(e.head())));
  }
}

TEST_CASE("RadiusReached(64) steps are comparable to 64^2 pi(64)") {
  Moments steps;
  const std::int64_t trials = 200;
  std::vector<std::int64_t> counts(trials);
  for_each_trial(trials, 0, [&](std::int64_t i) {
    counts[static_cast<std::size_t>(i)] = invade_until(WeightField(trial_seed(5, i)), StopRadiusReached{64}).size();
  });
  for (auto c : counts) steps.add(static_cast<double>(c));
  const Estimate pi = point_to_boundary(kCriticalP, 64, 4000, 17, {0});
  const double scale = 64.0 * 64.0 * pi.mean;
  INFO("mean steps " << steps.mean << " vs 64^2 pi " << scale);
  CHECK(steps.mean < 3 * scale);
  CHECK(steps.mean > scale / 3);
}

TEST_CASE("after an outlet every later invaded weight is smaller") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const InvasionTrace t = invade_until(WeightField(seed), StopSteps{20000});
    for (const OutletRecord& o : detect_outlets(t)) {
      for (std::int64_t j = o.step + 1; j <= t.size(); ++j) {
        if (!(t.weight(j) < o.weight)) FAIL("outlet property violated");
      }
    }
  }
}

namespace {

std::vector<EdgeId> ring(std::int64_t r) {
  std::vector<EdgeId> out;
  for (std::int64_t t = -r; t < r; ++t) {
    out.push_back(EdgeId::horizontal(t, -r));
    out.push_back(EdgeId::horizontal(t, r));
    out.push_back(EdgeId::vertical(-r, t));
    out.push_back(EdgeId::vertical(r, t));
  }
  return out;
}

}  // namespace

TEST_CASE("modified invasion: shared prefix, eta = 1 afterwards, frozen graph is the open cluster") {
  int frozen_cases = 0;
  for (std::uint64_t seed = 1; seed <= 40; ++seed) {
    const WeightField f = WeightField(seed).decomposed(kCriticalP);
    const auto circuit = ring(3);
    const ModifiedInvasion m = modified_invade(f, circuit, 1 << 20);
    REQUIRE(m.reached);
    const InvasionTrace plain = invade_until(f, StopSteps{m.reached_at});
    for (std::int64_t i = 1; i <= m.reached_at; ++i) CHECK(m.trace.code(i) == plain.code(i));
    for (std::int64_t i = m.reached_at + 1; i <= m.trace.size(); ++i) {
      if (!f.decompose(m.trace.step(i).edge()).eta) FAIL("eta = 0 edge invaded after reaching the circuit");
    }
    if (!m.frozen) continue;
    ++frozen_cases;
    // Oracle: vertices at reach time plus their p_c-open clusters.
    std::set<std::pair<std::int64_t, std::int64_t>> base{{0, 0}};
    std::set<std::uint64_t> edges;
    for (std::int64_t i = 1; i <= m.reached_at; ++i) {
      edges.insert(m.trace.code(i));
      for (Vertex v : m.trace.step(i).edge().endpoints()) base.insert({v.x, v.y});
    }
    std::set<std::pair<std::int64_t, std::int64_t>> cluster;
    for (auto [x, y] : base) {
      for (auto v : oracle::open_component(f, kCriticalP, {x, y}, [](Vertex) { return true; })) cluster.insert(v);
    }
    for (auto [x, y] : cluster) {
      for (EdgeId e : oracle::incident({x, y})) {
        if (f.weight(e) <= kCriticalP) edges.insert(e.encode());
      }
    }
    std::set<std::uint64_t> got(m.trace.codes().begin(), m.trace.codes().end());
    CHECK(got == edges);
  }
  CHECK(frozen_cases > 20);
}
