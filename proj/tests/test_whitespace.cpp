#include <random>
#include <sstream>

#include "doctest.h"
#include "greenlinks/whitespace.hpp"

using namespace greenlinks::whitespace;

namespace {

MeasurementReport zero(Arfcn a, double at) { return MeasurementReport{0, a, 0.0, at}; }
MeasurementReport hit(Arfcn a, double at) { return MeasurementReport{0, a, 12.0, at}; }

ChannelState fresh(Arfcn a) {
  ChannelState s;
  s.arfcn = a;
  return s;
}

std::vector<ChannelState> band_states(int n) {
  std::vector<ChannelState> out;
  for (int a = 1; a <= n; ++a) out.push_back(fresh(a));
  return out;
}

}  // namespace

TEST_CASE("one positive marks a channel occupied") {
  DetectorConfig cfg;
  auto s = ingest_report(fresh(45), hit(45, 10), cfg);
  CHECK(s.verdict == Verdict::occupied);
  CHECK(s.positive_count == 1);
}

TEST_CASE("499 zeros then a positive is occupied") {
  DetectorConfig cfg;
  auto s = fresh(7);
  for (int i = 0; i < 499; ++i) s = ingest_report(s, zero(7, i * 10.0), cfg);
  CHECK(s.verdict == Verdict::unknown);
  CHECK(s.zero_count == 499);
  s = ingest_report(s, hit(7, 5000), cfg);
  CHECK(s.verdict == Verdict::occupied);
  CHECK(s.zero_count == 0);
}

TEST_CASE("free needs both the count and the time window") {
  DetectorConfig cfg;
  SUBCASE("500 zeros over 30 min") {
    auto s = fresh(3);
    for (int i = 0; i < 500; ++i) s = ingest_report(s, zero(3, i * (1800.0 / 499)), cfg);
    CHECK(s.verdict == Verdict::free);
    CHECK(*s.verdict_at == doctest::Approx(1800.0));
  }
  SUBCASE("500 zeros in 10 minutes wait for the window") {
    auto s = fresh(3);
    for (int i = 0; i < 500; ++i) s = ingest_report(s, zero(3, i * 1.2), cfg);
    CHECK(s.verdict == Verdict::unknown);
    s = ingest_report(s, zero(3, 1799.0), cfg);
    CHECK(s.verdict == Verdict::unknown);
    s = ingest_report(s, zero(3, 1800.0), cfg);
    CHECK(s.verdict == Verdict::free);
  }
  SUBCASE("a free channel flips on a positive") {
    auto s = fresh(3);
    for (int i = 0; i < 500; ++i) s = ingest_report(s, zero(3, i * 4.0), cfg);
    REQUIRE(s.verdict == Verdict::free);
    s = ingest_report(s, hit(3, 3000), cfg);
    CHECK(s.verdict == Verdict::occupied);
  }
}

TEST_CASE("occupied evidence expires after its TTL") {
  DetectorConfig cfg;
  auto s = ingest_report(fresh(9), hit(9, 100), cfg);
  s = ingest_report(s, zero(9, 100 + 86399), cfg);
  CHECK(s.verdict == Verdict::occupied);
  CHECK(s.zero_count == 0);
  s = expire(s, 100 + 86400, cfg);
  CHECK(s.verdict == Verdict::unknown);
  CHECK(s.positive_count == 1);
}

TEST_CASE("occupied implies a positive") {
  std::mt19937 rng(4);
  DetectorConfig cfg;
  cfg.n_free = 20;
  cfg.t_free_s = 60;
  for (int trial = 0; trial < 100; ++trial) {
    auto s = fresh(1);
    double t = 0;
    for (int i = 0; i < 300; ++i) {
      t += rng() % 50;
      s = ingest_report(s, rng() % 40 ? zero(1, t) : hit(1, t), cfg);
      if (s.verdict == Verdict::occupied) CHECK(s.positive_count >= 1);
      if (s.verdict == Verdict::free) CHECK(s.zero_count >= cfg.n_free);
    }
  }
}

TEST_CASE("plan starts at channel 1 and rotates") {
  auto states = band_states(124);
  auto p = plan_scan(states, 0);
  CHECK(p.fake_neighbors == std::vector<Arfcn>{1, 2, 3, 4, 5, 6});

  Detector d(Band{1, 124});
  CHECK(d.replan(0).fake_neighbors == std::vector<Arfcn>{1, 2, 3, 4, 5, 6});
  CHECK(d.replan(300).fake_neighbors == std::vector<Arfcn>{7, 8, 9, 10, 11, 12});
  d.set_serving(13);
  CHECK(d.replan(600).fake_neighbors == std::vector<Arfcn>{14, 15, 16, 17, 18, 19});
}

TEST_CASE("planner with a settled band re-verifies the stalest free channels") {
  auto states = band_states(124);
  for (auto& s : states) {
    s.verdict = s.arfcn % 13 == 0 ? Verdict::occupied : Verdict::free;
    s.verdict_at = 0;
    s.last_planned_at = 1000.0 + s.arfcn;
  }
  states[40].last_planned_at = 5;  // arfcn 41
  states[2].last_planned_at = 6;   // arfcn 3
  auto p = plan_scan(states, 2000, 6, 1);
  CHECK(p.fake_neighbors == std::vector<Arfcn>{41, 3, 2, 4, 5, 6});
  for (auto a : p.fake_neighbors) CHECK(a % 13 != 0);
}

TEST_CASE("a channel turning occupied leaves the plan at the next boundary") {
  Detector d(Band{1, 124});
  d.replan(0);
  CHECK(d.advertised(4));
  d.ingest(hit(4, 10));
  CHECK(d.advertised(4));  // still this cycle
  auto p = d.replan(300);
  CHECK_FALSE(d.advertised(4));
  CHECK(p.fake_neighbors.size() == 6);
  CHECK(p.fake_neighbors.front() == 7);
}

TEST_CASE("reports for unplanned channels are dropped") {
  Detector d(Band{1, 124});
  d.replan(0);
  CHECK_FALSE(d.ingest(zero(50, 1)));
  CHECK(d.dropped() == 1);
  CHECK_THROWS_AS(d.ingest_strict(zero(50, 1)), UnplannedChannel);
  CHECK_FALSE(d.ingest(zero(500, 1)));
  d.set_serving(50);
  CHECK(d.ingest(zero(50, 2)));  // the serving channel is always measured
}

TEST_CASE("channel switching") {
  auto states = band_states(10);
  states[2].verdict = Verdict::occupied;  // serving = 3
  states[6].verdict = Verdict::free;
  states[6].verdict_at = 50;
  states[8].verdict = Verdict::free;
  states[8].verdict_at = 20;

  auto now = maybe_switch_channel(3, states, 0);
  CHECK(now.action == SwitchDecision::Action::switch_now);
  CHECK(now.target == 9);  // verified longest ago

  auto wait = maybe_switch_channel(3, states, 2);
  CHECK(wait.action == SwitchDecision::Action::pending);
  CHECK(wait.target == 9);

  CHECK(maybe_switch_channel(7, states, 0).action == SwitchDecision::Action::stay);

  for (auto& s : states) s.verdict = Verdict::occupied;
  CHECK(maybe_switch_channel(3, states, 0).action == SwitchDecision::Action::quiesce);
}

TEST_CASE("power ramp") {
  PowerRamp r;
  CHECK(r.current_dbm() == 10);
  CHECK_FALSE(r.tick(false));
  CHECK(r.current_dbm() == 10);
  int steps = 0;
  while (r.tick(true)) ++steps;
  CHECK(steps == 7);  // 10 -> 13 -> ... -> 28 -> 30
  CHECK(r.current_dbm() == 30);
}

TEST_CASE("volunteer traffic arithmetic") {
  CHECK(volunteer_traffic(0, 60, 3600).empty());
  auto sms = volunteer_traffic(5, 60, 600);
  CHECK(sms.size() == 50);
  // Six advertised channels give 30 reports per minute.
  CHECK(sms.size() * 6 / 10 == 30);
  CHECK(sms[1].at == doctest::Approx(12));
  for (std::size_t i = 1; i < sms.size(); ++i) CHECK(sms[i].at >= sms[i - 1].at);
}

TEST_CASE("no traffic leaves every channel unknown") {
  WhitespaceConfig cfg;
  cfg.organic_sms_mean_s = 0;
  cfg.organic_call_mean_s = 0;
  cfg.serving = 124;
  cfg.horizon_s = 7200;
  auto run = run_whitespace(cfg, 1);
  CHECK(run.reports == 0);
  CHECK_FALSE(run.classified_at);
  for (const auto& s : run.states) CHECK(s.verdict == Verdict::unknown);
  std::ostringstream csv;
  write_occupancy_csv(csv, run.states);
  CHECK(csv.str().find("\n1,unknown,\n") != std::string::npos);
}

TEST_CASE("serving channel incumbent forces a switch after calls end") {
  WhitespaceConfig cfg;
  cfg.band = Band{1, 20};
  cfg.serving = 5;
  cfg.truth = {Interferer{5, 1500, 1500, 5000, 30}};  // heard everywhere
  cfg.users = 20;
  cfg.organic_call_mean_s = 300;
  cfg.call_duration_mean_s = 600;
  cfg.horizon_s = 6 * 3600;
  cfg.detector.t_free_s = 60;
  cfg.detector.n_free = 20;
  auto run = run_whitespace(cfg, 3);
  REQUIRE(run.serving_changes.size() >= 2);
  CHECK(run.serving_changes[1].from == 5);
  CHECK(run.serving != 5);
  CHECK(run.serving_collisions == 1);  // only the configured start
  CHECK(run.collision_seconds > 0);
}

TEST_CASE("power never steps while an advertised channel is unsettled") {
  WhitespaceConfig cfg;
  cfg.serving = 124;
  cfg.horizon_s = 4 * 3600;
  auto run = run_whitespace(cfg, 5);
  CHECK_FALSE(run.classified_at);
  CHECK(run.power.size() == 1);
}

TEST_CASE("identical traces give identical states") {
  WhitespaceConfig cfg;
  cfg.band = Band{1, 30};
  cfg.serving = 30;
  cfg.occupied = 3;
  cfg.horizon_s = 3 * 3600;
  cfg.record_reports = true;
  auto a = run_whitespace(cfg, 9);
  auto b = run_whitespace(cfg, 9);
  CHECK(a.trace == b.trace);
  CHECK(a.states == b.states);

  std::ostringstream out;
  write_reports_csv(out, a.trace);
  std::istringstream in(out.str());
  auto back = read_reports_csv(in);
  REQUIRE(back.size() == a.trace.size());
  CHECK(replay(back, Band{1, 30}, cfg.detector) == replay(a.trace, Band{1, 30}, cfg.detector));

  std::istringstream bad("reporter,arfcn,energy,time\n1,2,0,5\n1,2,x,5\n");
  CHECK_THROWS_WITH((void)read_reports_csv(bad), doctest::Contains("line 3"));
}

TEST_CASE("more reports never delay a verdict") {
  std::mt19937 rng(17);
  DetectorConfig cfg;
  cfg.n_free = 30;
  cfg.t_free_s = 120;
  const Band band{1, 8};
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<MeasurementReport> base;
    std::vector<MeasurementReport> extra;
    for (int i = 0; i < 400; ++i) {
      const auto a = 1 + static_cast<Arfcn>(rng() % 8);
      const double e = (a == 3 && rng() % 50 == 0) ? 5.0 : 0.0;
      (rng() % 2 ? base : extra).push_back(MeasurementReport{0, a, e, static_cast<double>(i)});
    }
    auto both = base;
    both.insert(both.end(), extra.begin(), extra.end());
    std::stable_sort(both.begin(), both.end(),
                     [](const auto& x, const auto& y) { return x.at < y.at; });
    auto s1 = replay(base, band, cfg);
    auto s2 = replay(both, band, cfg);
    for (std::size_t i = 0; i < s1.size(); ++i) {
      if (s1[i].first_verdict_at) {
        REQUIRE(s2[i].first_verdict_at);
        CHECK(*s2[i].first_verdict_at <= *s1[i].first_verdict_at);
      }
    }
  }
}

TEST_CASE("zero volunteers match the baseline") {
  WhitespaceConfig base;
  base.horizon_s = 2 * 86400;
  auto p = compare_ngsm(20, 0.0, 20, base, 3);
  CHECK(p.t_ngsm_min == p.t_volunteer_min);
}
