#include "greenlinks/whitespace.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <string>

#include "greenlinks/random.hpp"

namespace greenlinks::whitespace {

std::string_view to_string(Verdict v) noexcept {
  switch (v) {
    case Verdict::unknown: return "unknown";
    case Verdict::free: return "free";
    case Verdict::occupied: return "occupied";
  }
  return "unknown";
}

// --- estimator -------------------------------------------------------------

ChannelState expire(ChannelState s, SimTime now, const DetectorConfig& cfg) {
  if (s.verdict == Verdict::occupied && s.last_positive_at &&
      now - *s.last_positive_at >= cfg.evidence_ttl_s) {
    s.verdict = Verdict::unknown;
    s.verdict_at = now;
    s.zero_count = 0;
    s.zero_run_start.reset();
  }
  return s;
}

ChannelState ingest_report(ChannelState s, const MeasurementReport& r, const DetectorConfig& cfg) {
  s = expire(std::move(s), r.at, cfg);
  if (r.energy > 0.0) {
    if (s.verdict != Verdict::occupied) s.verdict_at = r.at;
    s.verdict = Verdict::occupied;
    s.last_positive_at = r.at;
    ++s.positive_count;
    s.zero_count = 0;
    s.zero_run_start.reset();
    if (!s.first_verdict_at) s.first_verdict_at = r.at;
    return s;
  }
  if (s.verdict == Verdict::occupied) return s;  // live evidence outranks silence
  ++s.zero_count;
  if (!s.zero_run_start) s.zero_run_start = r.at;
  if (s.verdict == Verdict::unknown && s.zero_count >= cfg.n_free &&
      r.at - *s.zero_run_start >= cfg.t_free_s) {
    s.verdict = Verdict::free;
    s.verdict_at = r.at;
    if (!s.first_verdict_at) s.first_verdict_at = r.at;
  }
  return s;
}

// --- planning --------------------------------------------------------------

ScanPlan plan_scan(const std::vector<ChannelState>& states, SimTime /*now*/, std::size_t slots,
                   std::optional<Arfcn> serving) {
  auto staler = [](const ChannelState* a, const ChannelState* b) {
    const double ta = a->last_planned_at.value_or(-std::numeric_limits<double>::infinity());
    const double tb = b->last_planned_at.value_or(-std::numeric_limits<double>::infinity());
    if (ta != tb) return ta < tb;
    return a->arfcn < b->arfcn;
  };
  std::vector<const ChannelState*> unknown;
  std::vector<const ChannelState*> free;
  for (const auto& s : states) {
    if (serving && s.arfcn == *serving) continue;
    if (s.verdict == Verdict::unknown) unknown.push_back(&s);
    if (s.verdict == Verdict::free) free.push_back(&s);
  }
  std::sort(unknown.begin(), unknown.end(), staler);
  std::sort(free.begin(), free.end(), staler);

  ScanPlan plan;
  plan.slots = slots;
  for (const auto* list : {&unknown, &free}) {
    for (const auto* s : *list) {
      if (plan.fake_neighbors.size() == slots) break;
      plan.fake_neighbors.push_back(s->arfcn);
    }
  }
  return plan;
}

SwitchDecision maybe_switch_channel(std::optional<Arfcn> serving,
                                    const std::vector<ChannelState>& states,
                                    std::size_t active_calls) {
  SwitchDecision d;
  if (serving) {
    auto it = std::find_if(states.begin(), states.end(),
                           [&](const ChannelState& s) { return s.arfcn == *serving; });
    if (it == states.end() || it->verdict != Verdict::occupied) return d;
  }
  const ChannelState* best = nullptr;
  for (const auto& s : states) {
    if (s.verdict != Verdict::free || (serving && s.arfcn == *serving)) continue;
    if (best == nullptr || *s.verdict_at < *best->verdict_at ||
        (*s.verdict_at == *best->verdict_at && s.arfcn < best->arfcn)) {
      best = &s;
    }
  }
  if (best == nullptr) {
    d.action = SwitchDecision::Action::quiesce;
    return d;
  }
  d.target = best->arfcn;
  d.action = active_calls == 0 ? SwitchDecision::Action::switch_now : SwitchDecision::Action::pending;
  return d;
}

bool PowerRamp::tick(bool all_free_over_interval) {
  if (!all_free_over_interval || current_ >= cfg_.max_dbm) return false;
  current_ = std::min(cfg_.max_dbm, current_ + cfg_.step_db);
  return true;
}

std::vector<VolunteerSms> volunteer_traffic(std::size_t volunteers, double period_s,
                                            SimTime horizon) {
  std::vector<VolunteerSms> out;
  if (volunteers == 0 || period_s <= 0.0) return out;
  for (std::uint64_t k = 0;; ++k) {
    const double base = static_cast<double>(k) * period_s;
    if (base >= horizon) break;
    for (std::size_t v = 0; v < volunteers; ++v) {
      const double at = base + period_s * static_cast<double>(v) / static_cast<double>(volunteers);
      if (at < horizon) out.push_back(VolunteerSms{at, v});
    }
  }
  return out;
}

// --- detector --------------------------------------------------------------

Detector::Detector(Band band, DetectorConfig cfg, std::size_t slots)
    : band_(band), cfg_(cfg), on_plan_(band.size(), false) {
  if (band.size() == 0) throw std::invalid_argument("empty band");
  plan_.slots = slots;
  for (Arfcn a = band.first; a <= band.last; ++a) {
    ChannelState s;
    s.arfcn = a;
    states_.push_back(s);
  }
}

bool Detector::advertised(Arfcn a) const { return band_.contains(a) && on_plan_[band_.index(a)]; }

bool Detector::ingest(const MeasurementReport& r) {
  const bool serving = serving_ && r.arfcn == *serving_;
  if (!band_.contains(r.arfcn) || (!serving && !on_plan_[band_.index(r.arfcn)])) {
    ++dropped_;
    return false;
  }
  auto& s = states_[band_.index(r.arfcn)];
  s = ingest_report(std::move(s), r, cfg_);
  return true;
}

void Detector::ingest_strict(const MeasurementReport& r) {
  if (!ingest(r)) {
    throw UnplannedChannel("report for channel " + std::to_string(r.arfcn) + " not on the plan");
  }
}

void Detector::expire_all(SimTime now) {
  for (auto& s : states_) s = expire(std::move(s), now, cfg_);
}

const ScanPlan& Detector::replan(SimTime now) {
  expire_all(now);
  plan_ = plan_scan(states_, now, plan_.slots, serving_);
  std::fill(on_plan_.begin(), on_plan_.end(), false);
  for (auto a : plan_.fake_neighbors) {
    on_plan_[band_.index(a)] = true;
    states_[band_.index(a)].last_planned_at = now;
  }
  return plan_;
}

void Detector::advertise_all() {
  plan_.fake_neighbors.clear();
  plan_.slots = band_.size();
  std::fill(on_plan_.begin(), on_plan_.end(), false);
  for (const auto& s : states_) {
    if (serving_ && s.arfcn == *serving_) continue;
    plan_.fake_neighbors.push_back(s.arfcn);
    on_plan_[band_.index(s.arfcn)] = true;
  }
}

std::size_t Detector::count(Verdict v) const {
  return static_cast<std::size_t>(
      std::count_if(states_.begin(), states_.end(), [v](const ChannelState& s) { return s.verdict == v; }));
}

std::optional<SimTime> Detector::fully_classified_at() const {
  SimTime latest = 0.0;
  for (const auto& s : states_) {
    if (!s.first_verdict_at) return std::nullopt;
    latest = std::max(latest, *s.first_verdict_at);
  }
  return latest;
}

// --- field simulation ------------------------------------------------------

namespace {

enum : std::uint64_t {
  kTruthStream = 1,
  kMobilityStream = 2,
  kSmsStream = 3,
  kCallStream = 4,
};

/// Random waypoint in a square; legs are drawn lazily as time advances.
class Walker {
 public:
  Walker(std::uint64_t seed, double side, double vmin, double vmax)
      : rng_(seed), side_(side), vmin_(vmin), vmax_(vmax) {
    x0_ = x1_ = rng_.uniform(0, side_);
    y0_ = y1_ = rng_.uniform(0, side_);
    next_leg();
  }

  std::pair<double, double> at(SimTime t) {
    while (t > t1_) next_leg();
    const double f = t1_ > t0_ ? (t - t0_) / (t1_ - t0_) : 1.0;
    return {x0_ + (x1_ - x0_) * f, y0_ + (y1_ - y0_) * f};
  }

 private:
  void next_leg() {
    x0_ = x1_;
    y0_ = y1_;
    t0_ = t1_;
    x1_ = rng_.uniform(0, side_);
    y1_ = rng_.uniform(0, side_);
    const double v = rng_.uniform(vmin_, vmax_);
    t1_ = t0_ + std::hypot(x1_ - x0_, y1_ - y0_) / std::max(v, 1e-6);
  }

  Rng rng_;
  double side_, vmin_, vmax_;
  double x0_ = 0, y0_ = 0, x1_ = 0, y1_ = 0;
  SimTime t0_ = 0, t1_ = 0;
};

std::vector<Interferer> draw_truth(const WhitespaceConfig& cfg, std::uint64_t seed) {
  Rng rng(derive_seed(seed, kTruthStream));
  std::vector<Arfcn> pool;
  for (Arfcn a = cfg.band.first; a <= cfg.band.last; ++a) {
    if (!cfg.serving || a != *cfg.serving) pool.push_back(a);
  }
  const auto n = std::min(cfg.occupied, pool.size());
  // Partial Fisher-Yates keeps the draw independent of the library shuffle.
  for (std::size_t i = 0; i < n; ++i) std::swap(pool[i], pool[i + rng.below(pool.size() - i)]);
  std::vector<Interferer> truth;
  for (std::size_t i = 0; i < n; ++i) {
    truth.push_back(Interferer{pool[i], rng.uniform(0, cfg.area_m), rng.uniform(0, cfg.area_m),
                               cfg.interferer_radius_m, 30.0});
  }
  std::sort(truth.begin(), truth.end(),
            [](const Interferer& a, const Interferer& b) { return a.arfcn < b.arfcn; });
  return truth;
}

class FieldSim {
 public:
  FieldSim(const WhitespaceConfig& cfg, std::uint64_t seed)
      : cfg_(cfg), detector_(cfg.band, cfg.detector, cfg.slots), ramp_(cfg.power) {
    run_.truth = cfg.truth.empty() ? draw_truth(cfg, seed) : cfg.truth;
    for (const auto& i : run_.truth) by_channel_[i.arfcn].push_back(i);
    for (std::size_t p = 0; p < cfg.users; ++p) {
      walkers_.emplace_back(derive_seed(seed, kMobilityStream, p), cfg.area_m, cfg.speed_min_mps,
                            cfg.speed_max_mps);
      sms_rng_.emplace_back(derive_seed(seed, kSmsStream, p));
      call_rng_.emplace_back(derive_seed(seed, kCallStream, p));
    }
  }

  WhitespaceRun run() {
    set_serving(cfg_.serving, 0.0);
    if (cfg_.advertise_all) {
      detector_.advertise_all();
    } else {
      detector_.replan(0.0);
      schedule_replan();
    }
    run_.power.push_back(PowerSample{0.0, ramp_.current_dbm()});
    schedule_ramp();

    for (std::size_t p = 0; p < cfg_.users; ++p) {
      schedule_sms(p);
      schedule_call(p);
    }
    const auto volunteers = static_cast<std::size_t>(
        std::lround(cfg_.volunteer_ratio * static_cast<double>(cfg_.users)));
    if (volunteers > 0) schedule_volunteers(std::min(volunteers, cfg_.users));

    while (!engine_.empty() && engine_.next_time() <= cfg_.horizon_s) {
      engine_.step();
      if (cfg_.stop_when_classified && detector_.fully_classified_at()) break;
    }
    const SimTime end = cfg_.stop_when_classified && detector_.fully_classified_at()
                            ? engine_.now()
                            : cfg_.horizon_s;
    account_collision(end);
    run_.ended_at = end;
    run_.states = detector_.states();
    run_.classified_at = detector_.fully_classified_at();
    run_.serving = detector_.serving();
    return std::move(run_);
  }

 private:
  bool truly_occupied(Arfcn a) const { return by_channel_.count(a) > 0; }

  void account_collision(SimTime now) {
    const auto s = detector_.serving();
    if (s && truly_occupied(*s)) run_.collision_seconds += now - serving_since_;
    serving_since_ = now;
  }

  void set_serving(std::optional<Arfcn> to, SimTime now) {
    account_collision(now);
    run_.serving_changes.push_back(ServingChange{now, detector_.serving(), to});
    detector_.set_serving(to);
    if (to && truly_occupied(*to)) ++run_.serving_collisions;
    if (cfg_.advertise_all) {
      detector_.advertise_all();
    } else {
      detector_.replan(now);
    }
  }

  void schedule_replan() {
    engine_.schedule_in(cfg_.replan_interval_s, EventKind::custom, [this] {
      detector_.replan(engine_.now());
      if (!detector_.serving()) evaluate_switch();
      schedule_replan();
    }, "replan");
  }

  void schedule_ramp() {
    engine_.schedule_in(cfg_.power.interval_s, EventKind::custom, [this] {
      const SimTime now = engine_.now();
      const SimTime since = now - cfg_.power.interval_s;
      auto free_throughout = [&](Arfcn a) {
        if (!detector_.band().contains(a)) return true;
        const auto& s = detector_.state(a);
        return s.verdict == Verdict::free && s.verdict_at && *s.verdict_at <= since;
      };
      bool ok = detector_.serving().has_value() && free_throughout(*detector_.serving());
      for (auto a : detector_.plan().fake_neighbors) ok = ok && free_throughout(a);
      if (ramp_.tick(ok)) run_.power.push_back(PowerSample{now, ramp_.current_dbm()});
      schedule_ramp();
    }, "power_ramp");
  }

  void schedule_sms(std::size_t p) {
    if (cfg_.organic_sms_mean_s <= 0.0) return;
    engine_.schedule_in(sms_rng_[p].exponential(cfg_.organic_sms_mean_s), EventKind::traffic,
                        [this, p] {
                          send_sms(p);
                          schedule_sms(p);
                        },
                        "sms");
  }

  void schedule_call(std::size_t p) {
    if (cfg_.organic_call_mean_s <= 0.0) return;
    auto& rng = call_rng_[p];
    const double gap = rng.exponential(cfg_.organic_call_mean_s);
    const double duration = rng.exponential(cfg_.call_duration_mean_s);
    engine_.schedule_in(gap, EventKind::traffic, [this, p, duration] {
      place_call(p, duration);
      schedule_call(p);
    }, "call");
  }

  void schedule_volunteers(std::size_t volunteers) {
    // One periodic chain per volunteer, staggered like volunteer_traffic.
    for (std::size_t v = 0; v < volunteers; ++v) {
      const double offset =
          cfg_.volunteer_period_s * static_cast<double>(v) / static_cast<double>(volunteers);
      engine_.schedule(offset, EventKind::traffic, [this, v] { volunteer_tick(v); }, "volunteer_sms");
    }
  }

  void volunteer_tick(std::size_t v) {
    send_sms(v);
    engine_.schedule_in(cfg_.volunteer_period_s, EventKind::traffic,
                        [this, v] { volunteer_tick(v); }, "volunteer_sms");
  }

  void send_sms(std::size_t p) {
    if (!detector_.serving()) return;  // nothing to attach to
    ++run_.sms;
    report_from(p);
  }

  void place_call(std::size_t p, double duration) {
    if (!detector_.serving() || switch_pending_) {
      ++run_.calls_refused;
      return;
    }
    ++run_.calls;
    ++active_calls_;
    report_from(p);
    engine_.schedule_in(duration, EventKind::call_end, [this] {
      --active_calls_;
      evaluate_switch();
    }, "call_end");
  }

  double energy_at(Arfcn a, double x, double y) const {
    auto it = by_channel_.find(a);
    if (it == by_channel_.end()) return 0.0;
    double e = 0.0;
    for (const auto& i : it->second) {
      if (std::hypot(x - i.x, y - i.y) <= i.radius_m) e += i.energy;
    }
    return e;
  }

  void report_from(std::size_t p) {
    const SimTime now = engine_.now();
    const auto [x, y] = walkers_[p].at(now);
    auto emit = [&](Arfcn a) {
      MeasurementReport r{static_cast<std::uint32_t>(p), a, energy_at(a, x, y), now};
      if (detector_.ingest(r)) {
        ++run_.reports;
        if (cfg_.record_reports) run_.trace.push_back(r);
      }
    };
    const auto plan = detector_.plan().fake_neighbors;
    for (auto a : plan) emit(a);
    if (auto s = detector_.serving(); s && detector_.band().contains(*s)) emit(*s);
    evaluate_switch();
  }

  void evaluate_switch() {
    const auto d = maybe_switch_channel(detector_.serving(), detector_.states(), active_calls_);
    switch (d.action) {
      case SwitchDecision::Action::stay:
        switch_pending_ = false;
        break;
      case SwitchDecision::Action::pending:
        switch_pending_ = true;
        break;
      case SwitchDecision::Action::switch_now:
        switch_pending_ = false;
        set_serving(d.target, engine_.now());
        break;
      case SwitchDecision::Action::quiesce:
        switch_pending_ = false;
        if (detector_.serving()) set_serving(std::nullopt, engine_.now());
        break;
    }
  }

  const WhitespaceConfig& cfg_;
  Engine engine_;
  Detector detector_;
  PowerRamp ramp_;
  WhitespaceRun run_;
  std::map<Arfcn, std::vector<Interferer>> by_channel_;
  std::vector<Walker> walkers_;
  std::vector<Rng> sms_rng_;
  std::vector<Rng> call_rng_;
  std::size_t active_calls_ = 0;
  bool switch_pending_ = false;
  SimTime serving_since_ = 0.0;
};

}  // namespace

WhitespaceRun run_whitespace(const WhitespaceConfig& cfg, std::uint64_t seed) {
  return FieldSim(cfg, seed).run();
}

NgsmPoint compare_ngsm(std::size_t users, double volunteer_ratio, std::size_t channels,
                       const WhitespaceConfig& base, std::uint64_t seed) {
  WhitespaceConfig cfg = base;
  cfg.users = users;
  cfg.band = Band{1, static_cast<Arfcn>(channels)};
  cfg.advertise_all = true;
  cfg.stop_when_classified = true;
  cfg.truth.clear();
  cfg.occupied = static_cast<std::size_t>(std::lround(
      static_cast<double>(base.occupied) * static_cast<double>(channels) /
      static_cast<double>(std::max<std::size_t>(base.band.size(), 1))));
  // The base station serves outside the scanned channels.
  cfg.serving = cfg.band.last + 1;

  auto minutes = [](const WhitespaceRun& r) {
    return r.classified_at ? *r.classified_at / 60.0 : std::numeric_limits<double>::infinity();
  };
  NgsmPoint point;
  point.ratio = volunteer_ratio;
  point.users = users;
  cfg.volunteer_ratio = 0.0;
  point.t_ngsm_min = minutes(run_whitespace(cfg, seed));
  cfg.volunteer_ratio = volunteer_ratio;
  point.t_volunteer_min = minutes(run_whitespace(cfg, seed));
  return point;
}

std::vector<ChannelState> replay(const std::vector<MeasurementReport>& trace, Band band,
                                 const DetectorConfig& cfg) {
  Detector d(band, cfg, band.size());
  d.advertise_all();
  for (const auto& r : trace) d.ingest(r);
  return d.states();
}

// --- csv -------------------------------------------------------------------

void write_occupancy_csv(std::ostream& out, const std::vector<ChannelState>& states) {
  out << "arfcn,verdict,t_verdict\n";
  for (const auto& s : states) {
    out << s.arfcn << ',' << to_string(s.verdict) << ',';
    if (s.verdict != Verdict::unknown && s.verdict_at) out << format_number(*s.verdict_at);
    out << '\n';
  }
}

void write_reports_csv(std::ostream& out, const std::vector<MeasurementReport>& reports) {
  out << "reporter,arfcn,energy,time\n";
  for (const auto& r : reports) {
    // Full precision: traces are meant to replay exactly.
    char at[32];
    std::snprintf(at, sizeof at, "%.17g", r.at);
    out << r.reporter << ',' << r.arfcn << ',' << format_number(r.energy) << ',' << at << '\n';
  }
}

std::vector<MeasurementReport> read_reports_csv(std::istream& in) {
  std::vector<MeasurementReport> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || (lineno == 1 && line.rfind("reporter", 0) == 0)) continue;
    std::istringstream ss(line);
    std::string f[4];
    for (auto& field : f) {
      if (!std::getline(ss, field, ',')) {
        throw std::runtime_error("line " + std::to_string(lineno) + ": expected 4 fields");
      }
    }
    try {
      std::size_t used = 0;
      MeasurementReport r;
      r.reporter = static_cast<std::uint32_t>(std::stoul(f[0], &used));
      r.arfcn = std::stoi(f[1]);
      r.energy = std::stod(f[2]);
      r.at = std::stod(f[3]);
      if (r.energy < 0.0) throw std::invalid_argument("negative energy");
      out.push_back(r);
    } catch (const std::exception& e) {
      throw std::runtime_error("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace greenlinks::whitespace
