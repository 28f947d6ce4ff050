#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "doctest.h"
#include "greenlinks/simcore.hpp"

using namespace greenlinks;
using namespace greenlinks::simcore;
using topology::LinkState;

namespace {

Scenario tree_scenario(std::size_t l2 = 3, std::size_t l3 = 6, SimTime horizon = 6 * 3600.0) {
  Scenario sc;
  sc.name = "tree";
  sc.topology = topology::generate_tree(l2, l3);
  sc.horizon_s = horizon;
  return sc;
}

Attempt attempt(std::uint64_t id, SimTime at, Service s, std::uint32_t from,
                std::optional<std::uint32_t> to, double dur) {
  Attempt a;
  a.id = id;
  a.at = at;
  a.service = s;
  a.origin = NodeId{from};
  if (to) a.dest = NodeId{*to};
  a.duration_s = dur;
  return a;
}

// Brute force: replay the link timeline on a fresh topology and ask the
// topology's own BFS at every instant the attempt could be cut.
std::pair<bool, bool> oracle(const topology::TopologySpec& spec, const RunTrace& trace,
                             const Attempt& a) {
  auto topo = topology::build_topology(spec);
  const auto cloud = topo.cloud();
  auto vc = [&] {
    return a.dest ? topo.reachable(a.origin, *a.dest) : topo.reachable(a.origin, cloud);
  };
  auto cell = [&] {
    return topo.reachable(a.origin, cloud) && (!a.dest || topo.reachable(*a.dest, cloud));
  };
  std::size_t i = 0;
  for (; i < trace.faults.size() && trace.faults[i].at <= a.at; ++i) {
    topo.set_link_state(trace.faults[i].link, trace.faults[i].state);
  }
  bool v = vc(), c = cell();
  const SimTime end = a.at + a.duration_s;
  for (; a.duration_s > 0 && i < trace.faults.size() && trace.faults[i].at < end; ++i) {
    topo.set_link_state(trace.faults[i].link, trace.faults[i].state);
    v = v && vc();
    c = c && cell();
  }
  return {v, c};
}

}  // namespace

TEST_CASE("same-node call survives a cloud outage only on VC-ISP") {
  auto topo = topology::build_topology(topology::three_node_deployment());
  RunTrace t;
  t.horizon = 600.0;
  t.faults = {{10.0, topology::LinkId{0}, LinkState::down}};
  t.attempts = {attempt(1, 20.0, Service::call, 1, 1, 60.0)};
  auto m = evaluate_dual(topo, t);
  CHECK(m.rate(0, Metric::vce) == 0.0);
  CHECK(m.rate(0, Metric::cce) == 1.0);
  CHECK(m.total(Metric::cce).dropped == 1);
  CHECK(m.total(Metric::vce).succeeded == 1);
}

TEST_CASE("no faults means no errors") {
  auto sc = tree_scenario();
  sc.inject_failures = false;
  auto out = run(sc, 4);
  REQUIRE(out.metrics.intervals().size() == 36);
  for (std::size_t i = 0; i < out.metrics.intervals().size(); ++i) {
    for (auto m : kMetrics) CHECK(out.metrics.rate(i, m) == 0.0);
  }
  CHECK(out.metrics.total(Metric::vce).attempted > 0);
}

TEST_CASE("calls must stay connected for their whole duration") {
  auto topo = topology::build_topology(topology::three_node_deployment());
  RunTrace t;
  t.horizon = 600.0;
  t.faults = {{50.0, topology::LinkId{0}, LinkState::down}, {70.0, topology::LinkId{0}, LinkState::up}};
  t.attempts = {
      attempt(1, 0.0, Service::call, 1, 2, 100.0),  // cut at 50
      attempt(2, 0.0, Service::call, 2, 3, 100.0),  // never touches Ghana
      attempt(3, 0.0, Service::call, 1, 3, 50.0),   // ends as the link fails
      attempt(4, 60.0, Service::sms, 1, 2, 0.0),    // sent mid-outage
      attempt(5, 60.0, Service::data, 1, 1, 5.0),   // local edge data
      attempt(6, 70.0, Service::data, 1, std::nullopt, 5.0),
  };
  auto m = evaluate_dual(topo, t);
  std::map<std::uint64_t, Outcome> by_id;
  for (const auto& o : m.outcomes()) by_id[o.attempt] = o;
  CHECK_FALSE(by_id[1].vc_ok);
  CHECK_FALSE(by_id[1].cell_ok);
  CHECK(by_id[2].vc_ok);
  CHECK(by_id[3].vc_ok);
  CHECK_FALSE(by_id[4].vc_ok);
  CHECK(by_id[5].vc_ok);
  CHECK_FALSE(by_id[5].cell_ok);
  CHECK(by_id[6].vc_ok);
  CHECK(by_id[6].cell_ok);
}

TEST_CASE("evaluate_dual agrees with a BFS replay oracle") {
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    CAPTURE(seed);
    Rng rng(seed);
    const auto spec = topology::generate_tree(1 + rng.below(4), rng.below(8));
    auto topo = topology::build_topology(spec);
    RunTrace t;
    t.horizon = 7200.0;
    FailureSchedule f;
    f.interval_s = 300.0;
    f.per_interval = 1 + rng.below(3);
    f.mean_duration_s = 400.0;
    t.interval_s = f.interval_s;
    t.faults = inject_failures(topo, f, t.horizon, seed);
    TrafficModel tm;
    tm.same_node = 0.2;
    tm.same_zone = 0.3;
    t.attempts = generate_traffic(topo, tm, t.interval_s, t.horizon, seed);
    auto m = evaluate_dual(topo, t);
    REQUIRE(m.outcomes().size() == t.attempts.size());
    std::size_t mismatches = 0;
    for (std::size_t i = 0; i < t.attempts.size(); ++i) {
      const auto [v, c] = oracle(spec, t, t.attempts[i]);
      const auto& o = m.outcomes()[i];
      REQUIRE(o.attempt == t.attempts[i].id);
      if (o.vc_ok != v || o.cell_ok != c) ++mismatches;
    }
    CHECK(mismatches == 0);
  }
}

TEST_CASE("ledger invariants hold on random schedules") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    CAPTURE(seed);
    auto sc = tree_scenario(2 + seed % 3, 4 + seed % 5, 4 * 3600.0);
    sc.failures.per_interval = 2;
    auto out = run(sc, seed);
    CHECK(out.metrics.check_invariants().empty());
    CHECK(out.metrics.containment_violations() == 0);
    for (auto [v, c] : {std::pair{Metric::vce, Metric::cce}, {Metric::vse, Metric::cse},
                        {Metric::vde, Metric::cde}}) {
      CHECK(out.metrics.total(v).attempted == out.metrics.total(c).attempted);
      CHECK(out.metrics.total_rate(v) <= out.metrics.total_rate(c));
    }
    for (std::size_t i = 0; i < out.metrics.intervals().size(); ++i) {
      for (auto m : kMetrics) {
        CHECK(out.metrics.rate(i, m) >= 0.0);
        CHECK(out.metrics.rate(i, m) <= 1.0);
      }
    }
  }
}

TEST_CASE("ledger flags broken containment") {
  MetricsLedger m(1);
  m.record({1, Service::sms, 0, false, true});
  CHECK(m.containment_violations() == 1);
  CHECK(m.check_invariants().size() == 1);
}

TEST_CASE("failure injector: per-link alternation, clipping, counts") {
  auto topo = topology::build_topology(topology::generate_tree(3, 6));
  FailureSchedule f;
  f.per_interval = 3;
  const SimTime horizon = 10 * 3600.0;
  auto faults = inject_failures(topo, f, horizon, 9);
  std::map<std::uint32_t, bool> down;
  std::size_t outages = 0;
  SimTime last = 0.0;
  for (const auto& x : faults) {
    CHECK(x.at >= last);
    last = x.at;
    auto& d = down[x.link.value];
    CHECK(d == (x.state == LinkState::up));
    d = x.state == LinkState::down;
    if (d) {
      ++outages;
      CHECK(x.at < horizon);
    }
  }
  CHECK(outages <= f.per_interval * 60);
  CHECK(outages > 0);

  auto clipped = inject_failures(topo, f, horizon, 9, true);
  for (const auto& x : clipped) CHECK(x.at <= horizon);
  std::map<std::uint32_t, bool> cd;
  for (const auto& x : clipped) cd[x.link.value] = x.state == LinkState::down;
  for (const auto& [l, d] : cd) CHECK_FALSE(d);

  FailureSchedule bad;
  bad.p_access = 1.5;
  CHECK_THROWS_AS((void)inject_failures(topo, bad, horizon, 1), std::invalid_argument);
}

TEST_CASE("traffic generator: counts, window and the 60/40 origin split") {
  auto topo = topology::build_topology(topology::generate_tree(4, 8));
  TrafficModel t;
  const double interval = 600.0;
  auto attempts = generate_traffic(topo, t, interval, 50 * interval, 5);
  std::map<std::pair<std::size_t, Service>, std::size_t> per;
  std::size_t from_l2 = 0;
  for (const auto& a : attempts) {
    ++per[{a.interval, a.service}];
    CHECK(a.at >= a.interval * interval);
    CHECK(a.at < (a.interval + 1) * interval);
    if (topo.node(a.origin).role == topology::Role::level2) ++from_l2;
  }
  for (std::size_t k = 0; k < 50; ++k) {
    CHECK(per[{k, Service::call}] == 24);
    CHECK(per[{k, Service::sms}] == 36);
    CHECK(per[{k, Service::data}] == 24);
  }
  const double n = static_cast<double>(attempts.size());
  const double sd = std::sqrt(n * 0.6 * 0.4);
  CHECK(std::abs(static_cast<double>(from_l2) - 0.6 * n) < 4 * sd);

  TrafficModel bad;
  bad.level2_share = 0.7;
  CHECK_THROWS_AS((void)generate_traffic(topo, bad, interval, 600.0, 1), std::invalid_argument);
}

TEST_CASE("run is deterministic and seed-sensitive") {
  Scenario sc;
  sc.topology = topology::three_node_deployment();
  sc.horizon_s = 3600.0;
  apps::Workload wl;
  wl.market.push_back(apps::MarketLoad{NodeId{1}});
  wl.files.push_back(apps::FileLoad{NodeId{1}, 1 << 20, 300.0, 1});
  wl.messages = apps::MessageLoad{};
  sc.workload = wl;
  RunOptions opts;
  opts.trace = true;
  auto render = [](const RunOutput& o) {
    std::ostringstream m, t;
    o.metrics.write_csv(m);
    write_trace(t, o.events);
    return m.str() + "|" + o.latency_csv + "|" + t.str();
  };
  const auto a = run(sc, 7, opts), b = run(sc, 7, opts), c = run(sc, 8, opts);
  CHECK(render(a) == render(b));
  CHECK(render(a) != render(c));
}

TEST_CASE("horizon 0 gives an empty trace and zero counters") {
  auto sc = tree_scenario();
  sc.horizon_s = 0.0;
  RunOptions opts;
  opts.trace = true;
  auto out = run(sc, 1, opts);
  CHECK(out.events.empty());
  CHECK(out.plan.attempts.empty());
  CHECK(out.metrics.intervals().empty());
  CHECK(out.events_processed == 0);
}

TEST_CASE("three-node hour validates in a single pass") {
  Scenario sc;
  sc.topology = topology::three_node_deployment();
  sc.horizon_s = 3600.0;
  sc.failures.per_interval = 2;
  apps::Workload wl;
  wl.market.push_back(apps::MarketLoad{NodeId{1}});
  wl.sms.push_back(apps::SmsLoad{NodeId{3}});
  sc.workload = wl;
  RunOptions opts;
  opts.trace = true;
  auto out = run(sc, 7, opts);
  REQUIRE(out.events.size() > 100);
  auto check = validate_trace(out.events, sc.horizon_s);
  CHECK(check.ok);
  CHECK(check.errors.empty());

  auto swapped = out.events;
  std::swap(swapped[10], swapped[50]);
  CHECK_FALSE(validate_trace(swapped, sc.horizon_s).ok);

  auto doubled = out.events;
  TraceRecord restore{doubled.back().at, doubled.back().seq + 1, EventKind::link_restore, "link=2"};
  doubled.push_back(restore);
  doubled.push_back({restore.at, restore.seq + 1, EventKind::link_restore, "link=2"});
  CHECK_FALSE(validate_trace(doubled, sc.horizon_s).ok);
}

TEST_CASE("drain after restore delivers every slowput and message once") {
  Scenario sc;
  sc.topology = topology::three_node_deployment();
  sc.horizon_s = 1800.0;
  sc.failures.interval_s = 300.0;
  sc.failures.per_interval = 2;
  apps::Workload wl;
  wl.market.push_back(apps::MarketLoad{NodeId{1}});
  wl.market.push_back(apps::MarketLoad{NodeId{3}});
  wl.files.push_back(apps::FileLoad{NodeId{1}, 200000, 600.0, 0});
  wl.messages = apps::MessageLoad{2, 120.0};
  sc.workload = wl;
  RunOptions opts;
  opts.restore_at_horizon = true;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    CAPTURE(seed);
    auto out = run(sc, seed, opts);
    CHECK(out.slowputs_outstanding == 0);
    CHECK(out.slowput_applies == out.slowputs);
    CHECK(out.duplicate_applies == 0);
    CHECK(out.messages_delivered_once == out.workload.messages);
    CHECK(out.oversold == 0);
  }
}

TEST_CASE("monte_carlo: one run equals the run; threads do not matter") {
  auto sc = tree_scenario(2, 4, 3 * 3600.0);
  auto single = run(sc, 40);
  auto mc = monte_carlo(sc, 1, 40);
  for (std::size_t m = 0; m < kMetrics.size(); ++m) {
    CHECK(mc.stats[m].mean == single.metrics.total_rate(kMetrics[m]));
    CHECK(mc.stats[m].stddev == 0.0);
    CHECK(mc.stats[m].ci95_half == 0.0);
  }
  auto one = monte_carlo(sc, 6, 100, 1);
  auto many = monte_carlo(sc, 6, 100, 4);
  std::ostringstream a, b;
  write_summary_csv(a, one);
  write_interval_means_csv(a, one);
  write_summary_csv(b, many);
  write_interval_means_csv(b, many);
  CHECK(a.str() == b.str());
  for (std::size_t i = 0; i < 6; ++i) CHECK(one.runs[i].seed == 100 + i);
}

TEST_CASE("monte_carlo statistics match standard-error arithmetic") {
  auto sc = tree_scenario(2, 4, 2 * 3600.0);
  auto small = monte_carlo(sc, 40, 0);
  auto big = monte_carlo(sc, 80, 0);
  for (std::size_t m = 0; m < kMetrics.size(); ++m) {
    CAPTURE(m);
    for (const auto* mc : {&small, &big}) {
      const double n = static_cast<double>(mc->runs.size());
      double mean = 0.0;
      for (const auto& r : mc->runs) mean += r.rates[m];
      mean /= n;
      double ss = 0.0;
      for (const auto& r : mc->runs) ss += (r.rates[m] - mean) * (r.rates[m] - mean);
      const double sd = std::sqrt(ss / (n - 1));
      CHECK(mc->stats[m].mean == doctest::Approx(mean));
      CHECK(mc->stats[m].stddev == doctest::Approx(sd));
      CHECK(mc->stats[m].ci95_half == doctest::Approx(1.96 * sd / std::sqrt(n)));
    }
    if (small.stats[m].ci95_half > 0) {
      const double shrink = big.stats[m].ci95_half / small.stats[m].ci95_half;
      CHECK(shrink == doctest::Approx(1 / std::sqrt(2.0)).epsilon(0.25));
    }
  }
}

TEST_CASE("nearest-rank quantiles") {
  CHECK(quantile({5, 1, 3, 2, 4}, 0.5) == 3);
  CHECK(quantile({5, 1, 3, 2, 4}, 0.95) == 5);
  CHECK(quantile({5, 1, 3, 2, 4}, 0.0) == 1);
  CHECK(quantile({}, 0.5) == 0.0);
}

TEST_CASE("identity bench: uncongested central is about one service time") {
  IdBenchConfig cfg;
  cfg.load_rps = 1.0;
  cfg.requests = 500;
  cfg.rtt_ms = 40.0;
  auto r = identity_latency_bench(cfg, 3);
  CHECK(r.p50 == doctest::Approx(0.050));
  CHECK(r.mean == doctest::Approx(0.050).epsilon(0.01));
}

TEST_CASE("identity bench: M/D/1 mean sojourn matches Pollaczek-Khinchine") {
  IdBenchConfig cfg;
  cfg.load_rps = 50.0;  // utilization 0.5
  cfg.requests = 200000;
  auto r = identity_latency_bench(cfg, 8);
  const double s = 0.010, rho = cfg.load_rps * s;
  const double expected = s + rho * s / (2 * (1 - rho));
  CHECK(r.mean == doctest::Approx(expected).epsilon(0.03));
}

TEST_CASE("identity bench: one-member DHT is the central model; ten members win under overload") {
  IdBenchConfig central;
  central.requests = 3000;
  auto dht1 = central;
  dht1.model = identity::ResolutionModel::dht;
  auto c = identity_latency_bench(central, 21);
  auto d1 = identity_latency_bench(dht1, 21);
  CHECK(c.latency_s == d1.latency_s);

  auto dht10 = dht1;
  dht10.servers = 10;
  auto d10 = identity_latency_bench(dht10, 21);
  CHECK(d10.p50 < c.p50);
  CHECK(d10.p95 < c.p95);
  CHECK(d10.mean < c.mean);
  std::set<identity::ServerId> used(d10.station.begin(), d10.station.end());
  CHECK(used.size() == 10);

  IdBenchConfig none;
  none.servers = 0;
  CHECK_THROWS_AS((void)identity_latency_bench(none, 1), std::invalid_argument);
}
