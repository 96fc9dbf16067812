#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "invadelab/observables.hpp"
#include "invadelab/parallel.hpp"
#include "invadelab/percolation.hpp"
#include "oracles.hpp"

using namespace invadelab;

namespace {

// Synthetic trace with the given invaded weights along the positive x-axis.
InvasionTrace synthetic_trace(const std::vector<double>& weights) {
  InvasionTrace t;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    StepView s;
    s.index = static_cast<std::int64_t>(i) + 1;
    s.code = EdgeId::horizontal(static_cast<std::int64_t>(i), 0).encode();
    s.weight = weights[i];
    t.append(s);
  }
  return t;
}

}  // namespace

TEST_CASE("binned profile invariants on random traces") {
  const BinSpec bins = BinSpec::uniform(0.01);
  CHECK(bins.size() == 100);
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const InvasionTrace t = invade_until(WeightField(seed), StopSteps{3000});
    for (std::int64_t n : {1, 17, 500, 3000}) {
      const BinnedProfile p = binned_profile(t, n, bins);
      CHECK(std::accumulate(p.q_counts.begin(), p.q_counts.end(), std::int64_t{0}) == n);
      CHECK(std::accumulate(p.p_counts.begin(), p.p_counts.end(), std::int64_t{0}) == t.checked_total(n));
      for (std::size_t b = 0; b < bins.size(); ++b) CHECK(p.q_counts[b] <= p.p_counts[b]);
    }
  }
}

TEST_CASE("acceptance ratio over [0,1] equals n / L_n") {
  const BinSpec full({0.0, 1.0});
  std::vector<BinnedProfile> ps;
  std::int64_t n_sum = 0, l_sum = 0;
  for (std::uint64_t seed = 1; seed <= 8; ++seed) {
    const InvasionTrace t = invade_until(WeightField(seed), StopSteps{1000});
    ps.push_back(binned_profile(t, 1000, full));
    n_sum += 1000;
    l_sum += t.checked_total(1000);
  }
  const auto a = acceptance_profile(ps);
  REQUIRE(a.size() == 1);
  CHECK(a[0].defined);
  CHECK(a[0].ratio == static_cast<double>(n_sum) / static_cast<double>(l_sum));
  CHECK(a[0].ci_lo <= a[0].ratio);
  CHECK(a[0].ratio <= a[0].ci_hi);
}

TEST_CASE("bins without checked weights are undefined, not zero") {
  const InvasionTrace t = invade_until(WeightField::constant(0.3), StopSteps{50});
  const std::vector<BinnedProfile> ps{binned_profile(t, 50, BinSpec({0.0, 0.5, 1.0}))};
  const auto a = acceptance_profile(ps);
  CHECK(a[0].defined);
  CHECK(a[0].ratio == doctest::Approx(50.0 / static_cast<double>(t.checked_total(50))));
  CHECK_FALSE(a[1].defined);
  CHECK(a[1].p_sum == 0);
}

TEST_CASE("bin counts match a brute-force trace enumeration") {
  const BinSpec bins = BinSpec::uniform(0.1);
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    const WeightField f(mix64(seed, 55));
    const auto naive = oracle::naive_invasion(f, 10);
    std::set<std::pair<std::int64_t, std::int64_t>> vertices{{0, 0}};
    std::vector<std::int64_t> q(bins.size()), p(bins.size());
    for (std::size_t i = 0; i < naive.codes.size(); ++i) {
      for (Vertex v : EdgeId::decode(naive.codes[i]).endpoints()) vertices.insert({v.x, v.y});
      ++q[static_cast<std::size_t>(bins.locate(naive.weights[i]))];
    }
    std::set<std::uint64_t> checked;
    for (auto [x, y] : vertices)
      for (EdgeId e : oracle::incident({x, y})) checked.insert(e.encode());
    for (auto c : checked) ++p[static_cast<std::size_t>(bins.locate(f.weight(EdgeId::decode(c))))];
    const BinnedProfile got = binned_profile(invade_until(f, StopSteps{10}), 10, bins);
    CHECK(got.q_counts == q);
    CHECK(got.p_counts == p);
  }
}

TEST_CASE("profile_run snapshots equal per-trace binning") {
  const BinSpec bins = BinSpec::uniform(0.05);
  const std::vector<std::int64_t> horizons{0, 10, 1000, 5000};
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const WeightField f(seed);
    const auto snaps = profile_run(f, horizons, bins);
    const InvasionTrace t = invade_until(f, StopSteps{5000});
    for (std::size_t h = 0; h < horizons.size(); ++h) {
      const BinnedProfile want = binned_profile(t, horizons[h], bins);
      CHECK(snaps[h].q_counts == want.q_counts);
      CHECK(snaps[h].p_counts == want.p_counts);
      CHECK(snaps[h].checked == t.checked_total(horizons[h]));
    }
  }
}

TEST_CASE("bin location follows (a, b] with the first bin closed") {
  const BinSpec b({0.0, 0.5, 1.0});
  CHECK(b.locate(0.0) == 0);
  CHECK(b.locate(0.5) == 0);
  CHECK(b.locate(std::nextafter(0.5, 1.0)) == 1);
  CHECK(b.locate(1.0) == 1);
  CHECK(BinSpec({0.2, 0.3}).locate(0.1) == -1);
  CHECK_THROWS_AS(BinSpec({0.5, 0.5}), std::invalid_argument);
  CHECK_THROWS_AS(BinSpec::uniform(0.0), std::invalid_argument);
}

TEST_CASE("checked identity: trivial levels and x = 1/2") {
  const std::int64_t trials = 2000, n = 1000;
  std::vector<InvasionTrace> traces(trials);
  for_each_trial(trials, 0, [&](std::int64_t i) {
    traces[static_cast<std::size_t>(i)] = invade_until(WeightField(trial_seed(4, i)), StopSteps{n});
  });
  const IdentityReport zero = checked_identity_test(traces, n, 0.0);
  CHECK(zero.mean_diff == 0.0);
  CHECK(zero.z == 0.0);
  const IdentityReport one = checked_identity_test(traces, n, 1.0);
  CHECK(one.mean_diff == 0.0);
  CHECK(one.z == 0.0);
  for (double x : {0.25, 0.5, 0.75}) {
    const IdentityReport r = checked_identity_test(traces, n, x);
    INFO("x = " << x << " z = " << r.z);
    CHECK(r.pass());
  }
  for (const auto& t : traces) CHECK(p_tilde(t, n, 1.0) == t.checked_total(n));
}

TEST_CASE("Xi fixture counts exactly the observed, uninvaded window edges") {
  const std::pair<EdgeId, double> pins[] = {{EdgeId::horizontal(0, 0), 0.51},
                                            {EdgeId::horizontal(-1, 0), 0.55},
                                            {EdgeId::vertical(0, 0), 0.1},
                                            {EdgeId::vertical(0, -1), 0.95}};
  const InvasionTrace t = invade_until(WeightField::constant(0.95).with_overrides(pins), StopSteps{1});
  CHECK(t.step(1).edge() == EdgeId::vertical(0, 0));
  CHECK(xi_count(t, 0.1, 1) == 2);
  CHECK(xi_count(t, 0.005, 1) == 0);
  CHECK(xi_count(t, 0.02, 1) == 1);
  CHECK_THROWS(xi_count(t, 0.0, 1));
}

TEST_CASE("Xi_{C n^2 pi(n)} / (eps n^2 pi(n)) stays bounded below across scales") {
  const double eps = 0.05;
  std::vector<double> ratios;
  for (std::int64_t n : {16, 32, 64}) {
    const double pi = point_to_boundary(kCriticalP, n, 2000, 3, {0}).mean;
    const auto t = static_cast<std::int64_t>(std::floor(static_cast<double>(n * n) * pi));
    std::vector<double> xi(400);
    for_each_trial(400, 0, [&](std::int64_t i) {
      const InvasionTrace tr = invade_until(WeightField(trial_seed(12, i)), StopSteps{t});
      xi[static_cast<std::size_t>(i)] = static_cast<double>(xi_count(tr, eps, t));
    });
    const double mean = std::accumulate(xi.begin(), xi.end(), 0.0) / 400.0;
    ratios.push_back(mean / (eps * static_cast<double>(n * n) * pi));
  }
  INFO("ratios " << ratios[0] << " " << ratios[1] << " " << ratios[2]);
  for (double r : ratios) CHECK(r >= 0.25 * ratios.front());
}

TEST_CASE("radius: R_1 = 1, monotone, and equal to the engine radius") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const WeightField f(seed);
    const InvasionTrace t = invade_until(f, StopSteps{2000});
    CHECK(radius(t, 0) == 0);
    CHECK(radius(t, 1) == 1);
    InvasionEngine e(f);
    std::int64_t prev = 0;
    for (std::int64_t n = 1; n <= 2000; n += 37) {
      while (e.steps() < n) e.step();
      const auto r = radius(t, n);
      CHECK(r >= prev);
      CHECK(r == e.radius());
      prev = r;
    }
  }
}

TEST_CASE("P(R_{C n^2 pi(n)} < n) obeys the Markov bound 2 C_1 / C at n = 32") {
  const std::int64_t n = 32, trials = 400;
  const double pi = point_to_boundary(kCriticalP, n, 4000, 9, {0}).mean;
  // C_1 = E|S_n| / (n^2 pi(n)), with |S_n| counted once B(n) is settled.
  std::vector<double> s(trials);
  for_each_trial(trials, 0, [&](std::int64_t i) {
    s[static_cast<std::size_t>(i)] =
        static_cast<double>(box_counts_run(WeightField(trial_seed(21, i)), n, 0.0, std::int64_t{1} << 40).s_n);
  });
  const double c1 = std::accumulate(s.begin(), s.end(), 0.0) / trials / (static_cast<double>(n * n) * pi);
  double prev = 1.0;
  for (double c : {4.0, 16.0, 64.0}) {
    const auto t = static_cast<std::int64_t>(std::floor(c * static_cast<double>(n * n) * pi));
    std::vector<int> hit(trials);
    for_each_trial(trials, 0, [&](std::int64_t i) {
      const InvasionTrace tr = invade_until(WeightField(trial_seed(22, i)), StopSteps{t});
      hit[static_cast<std::size_t>(i)] = radius(tr, t) < n;
    });
    const Estimate e = Estimate::from_indicators(std::accumulate(hit.begin(), hit.end(), 0), trials, 22);
    INFO("C = " << c << " P = " << e.mean << " bound " << 2 * c1 / c);
    CHECK(e.mean <= 2 * c1 / c + 3 * e.std_error);
    CHECK(e.mean <= prev);
    prev = e.mean;
  }
}

TEST_CASE("stabilization radius: certification and horizon monotonicity") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const WeightField f(mix64(seed, 3));
    const std::int64_t n = 200;
    std::int64_t prev_k = std::numeric_limits<std::int64_t>::max();
    for (double h : {2.0, 4.0, 16.0, 64.0}) {
      const StabilizationResult r = stabilization_radius(f, n, h);
      CHECK(r.horizon == static_cast<std::int64_t>(std::ceil(h * n)));
      CHECK(r.k <= prev_k);
      prev_k = r.k;
      const InvasionTrace t = invade_until(f, StopSteps{r.horizon});
      for (std::int64_t i = n + 1; i <= r.horizon; ++i) {
        const EdgeId e = t.step(i).edge();
        if (Box{r.k, {}}.contains(e.base()) || Box{r.k, {}}.contains(e.head())) FAIL("B(k) touched after step n");
      }
      CHECK(r.censored == (r.radius_at_horizon < kStabilizationFactor * (r.k + 1)));
      if (!r.censored) {
        REQUIRE(r.stabilized_at.has_value());
        CHECK(*r.stabilized_at <= n);
      } else {
        CHECK_FALSE(r.stabilized_at.has_value());
      }
    }
  }
  CHECK_THROWS(stabilization_radius(WeightField(1), 10, 1.5));
  CHECK_THROWS(stabilization_radius(WeightField(1), 0, 16.0));
}

TEST_CASE("outlets: closed-form cases and the quadratic oracle") {
  const auto dec = detect_outlets(synthetic_trace({0.9, 0.8, 0.7, 0.6}));
  CHECK(dec.size() == 4);
  CHECK(detect_outlets(synthetic_trace({0.1, 0.4, 0.2, 0.3})).empty());
  const auto mixed = detect_outlets(synthetic_trace({0.6, 0.9, 0.3, 0.7, 0.55, 0.2}));
  REQUIRE(mixed.size() == 3);
  CHECK(mixed[0].step == 2);
  CHECK(mixed[1].step == 4);
  CHECK(mixed[2].step == 5);
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const InvasionTrace t = invade_until(WeightField(mix64(seed, 7)), StopSteps{1000});
    const std::vector<double> w(t.weights().begin(), t.weights().end());
    std::vector<std::int64_t> got;
    for (const auto& o : detect_outlets(t)) {
      got.push_back(o.step);
      CHECK(o.code == t.code(o.step));
    }
    CHECK(got == oracle::naive_outlets(w));
  }
}

TEST_CASE("box counts: eps = 0, Y <= S, and the streaming variant") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const WeightField f(seed);
    const std::int64_t n = 8;
    const InvasionTrace t = invade_until(f, StopBoxStabilized{n, std::int64_t{1} << 30});
    for (double eps : {0.0, 0.02, 0.1, 0.5}) {
      const BoxCounts a = box_counts(t, n, eps);
      const BoxCounts b = box_counts_run(f, n, eps, std::int64_t{1} << 30);
      CHECK(a.s_n == b.s_n);
      CHECK(a.y_n == b.y_n);
      CHECK(a.censored == b.censored);
      CHECK_FALSE(a.censored);
      CHECK(a.y_n <= a.s_n);
      if (eps == 0.0) CHECK(a.y_n == 0);
    }
  }
  CHECK(box_counts_run(WeightField(1), 8, 0.1, 10).censored);
}

TEST_CASE("E Y_n(eps) / (eps n^2 pi(n)) agrees within a factor 4 across scales") {
  std::vector<double> ratios;
  for (std::int64_t n : {16, 32}) {
    const double pi = point_to_boundary(kCriticalP, n, 4000, 31, {0}).mean;
    for (double eps : {0.02, 0.04}) {
      const std::int64_t trials = 200;
      std::vector<double> y(trials);
      for_each_trial(trials, 0, [&](std::int64_t i) {
        y[static_cast<std::size_t>(i)] = static_cast<double>(
            box_counts_run(WeightField(trial_seed(32, i)), n, eps, std::int64_t{1} << 40).y_n);
      });
      const double mean = std::accumulate(y.begin(), y.end(), 0.0) / trials;
      ratios.push_back(mean / (eps * static_cast<double>(n * n) * pi));
    }
  }
  const auto [lo, hi] = std::minmax_element(ratios.begin(), ratios.end());
  INFO("ratios " << ratios[0] << " " << ratios[1] << " " << ratios[2] << " " << ratios[3]);
  CHECK(*lo > 0.0);
  CHECK(*hi <= 4 * *lo);
}
