#include "greenlinks/simcore.hpp"

#include <algorithm>
#include <atomic>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <memory>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "greenlinks/random.hpp"

namespace greenlinks::simcore {

namespace {

constexpr std::uint64_t kFailureStream = 0xfa11;
constexpr std::uint64_t kTrafficStream = 0x7aff;
constexpr std::uint64_t kWorkloadStream = 0x3011;
constexpr std::uint64_t kBenchStream = 0x1db;

std::size_t interval_count(SimTime horizon, double interval) {
  if (horizon <= 0.0 || interval <= 0.0) return 0;
  return static_cast<std::size_t>(std::ceil(horizon / interval));
}

// Service and architecture behind each metric.
std::pair<Service, bool> decode(Metric m) {
  switch (m) {
    case Metric::vce: return {Service::call, true};
    case Metric::cce: return {Service::call, false};
    case Metric::vse: return {Service::sms, true};
    case Metric::cse: return {Service::sms, false};
    case Metric::vde: return {Service::data, true};
    case Metric::cde: return {Service::data, false};
  }
  return {Service::call, true};
}

double ratio(const Counts& c) {
  return c.attempted == 0 ? 0.0 : static_cast<double>(c.dropped) / static_cast<double>(c.attempted);
}

}  // namespace

std::string_view to_string(Service s) noexcept {
  switch (s) {
    case Service::call: return "call";
    case Service::sms: return "sms";
    case Service::data: return "data";
  }
  return "?";
}

std::string_view to_string(Metric m) noexcept {
  switch (m) {
    case Metric::vce: return "vce";
    case Metric::cce: return "cce";
    case Metric::vse: return "vse";
    case Metric::cse: return "cse";
    case Metric::vde: return "vde";
    case Metric::cde: return "cde";
  }
  return "?";
}

void validate(const FailureSchedule& f) {
  if (!(f.interval_s > 0.0)) throw std::invalid_argument("failure interval must be positive");
  if (!(f.p_access >= 0.0 && f.p_access <= 1.0))
    throw std::invalid_argument("failure target mix must lie in [0, 1]");
  if (!(f.mean_duration_s > 0.0)) throw std::invalid_argument("outage mean must be positive");
}

void validate(const TrafficModel& t) {
  if (t.level2_share < 0.0 || t.level3_share < 0.0 ||
      std::abs(t.level2_share + t.level3_share - 1.0) > 1e-9)
    throw std::invalid_argument("level2 and level3 shares must sum to 1");
  for (double r : t.per_node) {
    if (!(r >= 0.0) || !std::isfinite(r)) throw std::invalid_argument("traffic rates must be >= 0");
  }
  if (t.same_node < 0.0 || t.same_zone < 0.0 || t.same_node + t.same_zone > 1.0 + 1e-9)
    throw std::invalid_argument("destination locality shares must lie in [0, 1]");
  if (t.local_data < 0.0 || t.local_data > 1.0)
    throw std::invalid_argument("local data share must lie in [0, 1]");
  if (!(t.call_mean_s > 0.0) || !(t.data_mean_s > 0.0))
    throw std::invalid_argument("session means must be positive");
}

// ---------------------------------------------------------------------------
// Plan generation

std::vector<Fault> inject_failures(const topology::Topology& topo, const FailureSchedule& f,
                                   SimTime horizon, std::uint64_t seed, bool clip) {
  validate(f);
  std::vector<LinkId> access, backhaul;
  for (const auto& l : topo.links()) {
    (l.touches(topo.cloud()) ? backhaul : access).push_back(l.id);
  }
  std::vector<Fault> out;
  if (access.empty() && backhaul.empty()) return out;

  Rng rng(derive_seed(seed, kFailureStream));
  std::map<LinkId, std::vector<std::pair<SimTime, SimTime>>> outages;
  const auto n = interval_count(horizon, f.interval_s);
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t j = 0; j < f.per_interval; ++j) {
      const double start = (static_cast<double>(k) + rng.uniform()) * f.interval_s;
      const bool want_access = rng.bernoulli(f.p_access);
      const auto& pool = (want_access && !access.empty()) || backhaul.empty() ? access : backhaul;
      const auto link = pool[rng.below(pool.size())];
      double end = start + rng.exponential(f.mean_duration_s);
      if (start >= horizon) continue;
      if (clip) end = std::min(end, horizon);
      if (end > start) outages[link].emplace_back(start, end);
    }
  }

  for (auto& [link, spans] : outages) {
    std::sort(spans.begin(), spans.end());
    SimTime down = spans[0].first, up = spans[0].second;
    for (std::size_t i = 1; i <= spans.size(); ++i) {
      if (i < spans.size() && spans[i].first <= up) {
        up = std::max(up, spans[i].second);
        continue;
      }
      out.push_back({down, link, topology::LinkState::down});
      out.push_back({up, link, topology::LinkState::up});
      if (i < spans.size()) {
        down = spans[i].first;
        up = spans[i].second;
      }
    }
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const Fault& a, const Fault& b) { return a.at < b.at; });
  return out;
}

std::vector<Attempt> generate_traffic(const topology::Topology& topo, const TrafficModel& t,
                                      double interval_s, SimTime horizon, std::uint64_t seed) {
  validate(t);
  std::vector<NodeId> l2, l3, all;
  for (const auto& n : topo.nodes()) {
    if (n.role == topology::Role::level2) l2.push_back(n.id);
    if (n.role == topology::Role::level3) l3.push_back(n.id);
    if (n.role != topology::Role::cloud) all.push_back(n.id);
  }
  std::vector<Attempt> out;
  if (all.empty()) return out;

  std::map<NodeId, std::vector<NodeId>> zone_peers, far_peers;
  for (auto n : all) {
    const auto* z = topo.zone_of(n);
    for (auto m : all) {
      if (m == n) continue;
      const bool same = z && topo.zone_of(m) == z;
      (same ? zone_peers : far_peers)[n].push_back(m);
    }
  }
  Rng rng(derive_seed(seed, kTrafficStream));
  const auto n_int = interval_count(horizon, interval_s);
  for (std::size_t k = 0; k < n_int; ++k) {
    for (std::size_t s = 0; s < kServices; ++s) {
      const auto count = static_cast<std::size_t>(std::llround(t.per_node[s] * static_cast<double>(all.size())));
      for (std::size_t i = 0; i < count; ++i) {
        Attempt a;
        a.service = static_cast<Service>(s);
        a.interval = k;
        a.at = (static_cast<double>(k) + rng.uniform()) * interval_s;
        const double u_origin = rng.uniform();
        const auto origin_draw = rng.next();
        const double u_dest = rng.uniform();
        const auto dest_draw = rng.next();
        const double u_dur = rng.uniform();
        if (a.at >= horizon) continue;

        const auto& pool = l3.empty() ? l2 : l2.empty() ? l3 : (u_origin < t.level2_share ? l2 : l3);
        a.origin = pool[origin_draw % pool.size()];
        if (a.service == Service::data) {
          if (u_dest < t.local_data) a.dest = a.origin;
          a.duration_s = -t.data_mean_s * std::log1p(-u_dur);
        } else {
          const auto& zp = zone_peers[a.origin];
          const auto& fp = far_peers[a.origin];
          if (u_dest < t.same_node) {
            a.dest = a.origin;
          } else if (u_dest < t.same_node + t.same_zone) {
            a.dest = zp.empty() ? a.origin : zp[dest_draw % zp.size()];
          } else {
            a.dest = !fp.empty() ? fp[dest_draw % fp.size()]
                                 : !zp.empty() ? zp[dest_draw % zp.size()] : a.origin;
          }
          if (a.service == Service::call) a.duration_s = -t.call_mean_s * std::log1p(-u_dur);
        }
        out.push_back(a);
      }
    }
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const Attempt& a, const Attempt& b) { return a.at < b.at; });
  for (std::size_t i = 0; i < out.size(); ++i) out[i].id = i + 1;
  return out;
}

// ---------------------------------------------------------------------------
// Ledger

void MetricsLedger::record(const Outcome& o) {
  if (o.interval >= intervals_.size()) intervals_.resize(o.interval + 1);
  auto& slot = intervals_[o.interval];
  const auto s = static_cast<std::size_t>(o.service);
  auto bump = [](Counts& c, bool ok) {
    ++c.attempted;
    ++(ok ? c.succeeded : c.dropped);
  };
  bump(slot.vc[s], o.vc_ok);
  bump(slot.cell[s], o.cell_ok);
  outcomes_.push_back(o);
}

double MetricsLedger::rate(std::size_t interval, Metric m) const {
  const auto [svc, vc] = decode(m);
  const auto& slot = intervals_.at(interval);
  return ratio((vc ? slot.vc : slot.cell)[static_cast<std::size_t>(svc)]);
}

Counts MetricsLedger::total(Metric m) const {
  const auto [svc, vc] = decode(m);
  Counts c;
  for (const auto& slot : intervals_) {
    const auto& x = (vc ? slot.vc : slot.cell)[static_cast<std::size_t>(svc)];
    c.attempted += x.attempted;
    c.succeeded += x.succeeded;
    c.dropped += x.dropped;
  }
  return c;
}

double MetricsLedger::total_rate(Metric m) const { return ratio(total(m)); }

std::uint64_t MetricsLedger::containment_violations() const {
  return static_cast<std::uint64_t>(std::count_if(
      outcomes_.begin(), outcomes_.end(), [](const Outcome& o) { return !o.vc_ok && o.cell_ok; }));
}

std::vector<std::string> MetricsLedger::check_invariants() const {
  std::vector<std::string> bad;
  for (std::size_t i = 0; i < intervals_.size(); ++i) {
    for (std::size_t s = 0; s < kServices; ++s) {
      const auto& v = intervals_[i].vc[s];
      const auto& c = intervals_[i].cell[s];
      const auto where = "interval " + std::to_string(i) + " " +
                         std::string(to_string(static_cast<Service>(s)));
      if (v.attempted != c.attempted) bad.push_back(where + ": attempted counts differ");
      if (v.attempted != v.succeeded + v.dropped) bad.push_back(where + ": VC-ISP counts leak");
      if (c.attempted != c.succeeded + c.dropped) bad.push_back(where + ": cellular counts leak");
    }
  }
  if (auto n = containment_violations()) {
    bad.push_back(std::to_string(n) + " attempts failed on VC-ISP but not on cellular");
  }
  return bad;
}

void MetricsLedger::write_csv(std::ostream& out) const {
  out << "interval,vce,cce,vse,cse,vde,cde\n";
  for (std::size_t i = 0; i < intervals_.size(); ++i) {
    out << i;
    for (auto m : kMetrics) out << ',' << format_number(rate(i, m));
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Dual evaluation

namespace {

class Components {
 public:
  explicit Components(const topology::Topology& topo) {
    for (const auto& n : topo.nodes()) index_.emplace(n.id, index_.size());
    for (const auto& l : topo.links()) {
      link_index_.emplace(l.id, links_.size());
      links_.push_back({index_.at(l.a), index_.at(l.b), true});
    }
    cloud_ = index_.at(topo.cloud());
    recompute();
  }

  void set(LinkId id, bool up) {
    links_[link_index_.at(id)].up = up;
    recompute();
  }
  [[nodiscard]] bool joined(NodeId a, NodeId b) const { return label_[index_.at(a)] == label_[index_.at(b)]; }
  [[nodiscard]] bool to_cloud(NodeId a) const { return label_[index_.at(a)] == label_[cloud_]; }

 private:
  struct L {
    std::size_t a, b;
    bool up;
  };

  void recompute() {
    std::vector<std::size_t> parent(index_.size());
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](std::size_t x) {
      while (parent[x] != x) x = parent[x] = parent[parent[x]];
      return x;
    };
    for (const auto& l : links_) {
      if (l.up) parent[find(l.a)] = find(l.b);
    }
    label_.resize(parent.size());
    for (std::size_t i = 0; i < parent.size(); ++i) label_[i] = find(i);
  }

  std::map<NodeId, std::size_t> index_;
  std::map<LinkId, std::size_t> link_index_;
  std::vector<L> links_;
  std::vector<std::size_t> label_;
  std::size_t cloud_ = 0;
};

bool vc_ok(const Components& c, const Attempt& a) {
  if (!a.dest) return c.to_cloud(a.origin);
  return c.joined(a.origin, *a.dest);
}

// Gateways live in the cloud, so every endpoint needs its cloud path.
bool cell_ok(const Components& c, const Attempt& a) {
  return c.to_cloud(a.origin) && (!a.dest || c.to_cloud(*a.dest));
}

}  // namespace

MetricsLedger evaluate_dual(const topology::Topology& topo, const RunTrace& trace) {
  MetricsLedger ledger(interval_count(trace.horizon, trace.interval_s));
  Components comp(topo);
  struct Active {
    const Attempt* a;
    SimTime end;
    bool vc;
    bool cell;
  };
  std::vector<Active> active;
  std::vector<Outcome> done;
  auto finish = [&](const Attempt& a, bool vc, bool cell) {
    done.push_back({a.id, a.service, a.interval, vc, cell});
  };
  auto settle_until = [&](SimTime t) {
    std::erase_if(active, [&](const Active& x) {
      if (x.end > t) return false;
      finish(*x.a, x.vc, x.cell);
      return true;
    });
  };

  std::size_t fi = 0, ai = 0;
  const auto& faults = trace.faults;
  const auto& attempts = trace.attempts;
  while (fi < faults.size() || ai < attempts.size()) {
    // A fault at the same instant as an attempt start is seen by the attempt.
    const bool take_fault =
        fi < faults.size() && (ai >= attempts.size() || faults[fi].at <= attempts[ai].at);
    if (take_fault) {
      const auto& f = faults[fi++];
      settle_until(f.at);
      const bool up = f.state == topology::LinkState::up;
      comp.set(f.link, up);
      if (up) continue;
      std::erase_if(active, [&](Active& x) {
        x.vc = x.vc && vc_ok(comp, *x.a);
        x.cell = x.cell && cell_ok(comp, *x.a);
        if (x.vc || x.cell) return false;
        finish(*x.a, false, false);
        return true;
      });
    } else {
      const auto& a = attempts[ai++];
      settle_until(a.at);
      const bool v = vc_ok(comp, a), c = cell_ok(comp, a);
      if (a.duration_s <= 0.0 || (!v && !c)) {
        finish(a, v, c);
      } else {
        active.push_back({&a, a.at + a.duration_s, v, c});
      }
    }
  }
  for (const auto& x : active) finish(*x.a, x.vc, x.cell);

  std::sort(done.begin(), done.end(),
            [](const Outcome& a, const Outcome& b) { return a.attempt < b.attempt; });
  for (const auto& o : done) ledger.record(o);
  return ledger;
}

// ---------------------------------------------------------------------------
// Runs

RunOutput run(const Scenario& sc, std::uint64_t seed, const RunOptions& opts) {
  RunOutput out;
  out.seed = seed;
  out.plan.horizon = std::max(0.0, sc.horizon_s);
  out.plan.interval_s = sc.failures.interval_s;
  auto topo = topology::build_topology(sc.topology);
  validate(sc.failures);
  validate(sc.traffic);
  if (sc.horizon_s <= 0.0) {
    out.metrics = MetricsLedger(0);
    std::ostringstream csv;
    csv << "request_id,class,app_type,bytes,enqueued_at,delivered_at\n";
    out.latency_csv = csv.str();
    return out;
  }

  if (sc.inject_failures) {
    out.plan.faults = inject_failures(topo, sc.failures, sc.horizon_s, seed, opts.restore_at_horizon);
  }
  out.plan.attempts = generate_traffic(topo, sc.traffic, sc.failures.interval_s, sc.horizon_s, seed);

  Engine engine;
  engine.enable_trace(opts.trace);
  identity::IdentityService ids(topo, sc.identity);
  auto cfg = sc.sync;
  if (opts.priority_queue) cfg.queue.priority_enabled = true;
  sync::SyncService svc(engine, topo, cfg, &ids);
  svc.start();

  std::unique_ptr<apps::WorkloadDriver> driver;
  if (sc.workload) {
    driver = std::make_unique<apps::WorkloadDriver>(engine, topo, ids, svc, *sc.workload,
                                                    derive_seed(seed, kWorkloadStream));
    driver->start(sc.horizon_s);
  }

  for (const auto& f : out.plan.faults) {
    const bool up = f.state == topology::LinkState::up;
    engine.schedule(
        f.at, up ? EventKind::link_restore : EventKind::link_fail,
        [&topo, &ids, &engine, f, up] {
          topo.set_link_state(f.link, f.state);
          if (up) ids.retry_pending(engine.now());
        },
        "link=" + std::to_string(f.link.value));
  }
  for (const auto& a : out.plan.attempts) {
    engine.schedule(a.at, EventKind::traffic, [] {},
                    "attempt=" + std::to_string(a.id) + " " + std::string(to_string(a.service)) +
                        " origin=" + std::to_string(a.origin.value));
  }

  engine.run_until(sc.horizon_s);
  if (opts.restore_at_horizon) {
    for (const auto& l : topo.links()) topo.set_link_state(l.id, topology::LinkState::up);
    ids.retry_pending(engine.now());
    const SimTime deadline = sc.horizon_s + opts.drain_limit_s;
    while (!engine.empty() && engine.next_time() <= deadline &&
           (svc.slowputs_outstanding() > 0 || svc.mailbox_size() > 0)) {
      engine.step();
    }
    // Let fastget replies and timeouts land.
    engine.run_until(std::min(deadline, engine.now() + 2 * cfg.fastget_timeout_s));
  }

  out.metrics = evaluate_dual(topo, out.plan);
  out.events_processed = engine.processed();
  if (opts.trace) out.events = engine.trace();
  out.latency = svc.latency_log();
  std::ostringstream csv;
  svc.write_latency_csv(csv);
  out.latency_csv = csv.str();

  for (const auto& c : svc.call_log()) {
    if (c.cls == sync::PrimitiveClass::slowput) ++out.slowputs;
  }
  std::set<sync::RequestId> applied;
  for (const auto& a : svc.apply_log()) {
    ++out.slowput_applies;
    if (!applied.insert(a.id).second) ++out.duplicate_applies;
  }
  out.duplicates_suppressed = svc.store().duplicates_suppressed();
  out.slowputs_outstanding = svc.slowputs_outstanding();
  out.resends = svc.resends();
  out.message_redeliveries_suppressed = svc.delivery_duplicates();
  if (driver) {
    out.workload = driver->stats();
    for (const auto& id : out.workload.message_ids) {
      if (svc.delivery_count(id) == 1) ++out.messages_delivered_once;
    }
    out.listed = driver->market().listed();
    for (const auto& l : out.listed) {
      const auto s = driver->market().sold(l.id);
      out.sold[l.id] = s;
      if (s > l.quantity) ++out.oversold;
    }
  }
  return out;
}

Stat summarize(const std::vector<double>& xs) {
  Stat s;
  if (xs.empty()) return s;
  const double n = static_cast<double>(xs.size());
  s.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - s.mean) * (x - s.mean);
    s.stddev = std::sqrt(ss / (n - 1.0));
  }
  s.ci95_half = 1.96 * s.stddev / std::sqrt(n);
  return s;
}

MonteCarloResult monte_carlo(const Scenario& sc, std::size_t runs, std::uint64_t base_seed,
                             unsigned threads, const RunOptions& opts, bool keep_first) {
  if (runs == 0) throw std::invalid_argument("runs must be at least 1");
  MonteCarloResult mc;
  mc.runs.resize(runs);
  std::vector<std::vector<std::array<double, 6>>> per_interval(runs);
  std::optional<RunOutput> first;

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < runs; i = next++) {
      auto r = run(sc, base_seed + i, opts);
      auto& sum = mc.runs[i];
      sum.index = i;
      sum.seed = base_seed + i;
      for (std::size_t m = 0; m < kMetrics.size(); ++m) sum.rates[m] = r.metrics.total_rate(kMetrics[m]);
      sum.containment_violations = r.metrics.containment_violations();
      sum.invariant_failures = r.metrics.check_invariants();
      auto& rows = per_interval[i];
      rows.resize(r.metrics.intervals().size());
      for (std::size_t k = 0; k < rows.size(); ++k) {
        for (std::size_t m = 0; m < kMetrics.size(); ++m) rows[k][m] = r.metrics.rate(k, kMetrics[m]);
      }
      if (i == 0 && keep_first) first = std::move(r);
    }
  };
  unsigned n = threads ? threads : std::max(1u, std::thread::hardware_concurrency());
  n = static_cast<unsigned>(std::min<std::size_t>(n, runs));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  for (std::size_t m = 0; m < kMetrics.size(); ++m) {
    std::vector<double> xs;
    for (const auto& r : mc.runs) xs.push_back(r.rates[m]);
    mc.stats[m] = summarize(xs);
  }
  std::size_t rows = 0;
  for (const auto& p : per_interval) rows = std::max(rows, p.size());
  mc.interval_means.assign(rows, {});
  for (std::size_t k = 0; k < rows; ++k) {
    for (std::size_t m = 0; m < kMetrics.size(); ++m) {
      double acc = 0.0;
      for (const auto& p : per_interval) acc += k < p.size() ? p[k][m] : 0.0;
      mc.interval_means[k][m] = acc / static_cast<double>(runs);
    }
  }
  for (const auto& r : mc.runs) {
    mc.containment_violations += r.containment_violations;
    for (const auto& e : r.invariant_failures) {
      mc.invariant_failures.push_back("run " + std::to_string(r.index) + ": " + e);
    }
  }
  mc.first = std::move(first);
  return mc;
}

void write_summary_csv(std::ostream& out, const MonteCarloResult& mc) {
  out << "metric,mean,stddev,ci95_half_width,runs\n";
  for (std::size_t m = 0; m < kMetrics.size(); ++m) {
    const auto& s = mc.stats[m];
    out << to_string(kMetrics[m]) << ',' << format_number(s.mean) << ',' << format_number(s.stddev)
        << ',' << format_number(s.ci95_half) << ',' << mc.runs.size() << '\n';
  }
}

void write_interval_means_csv(std::ostream& out, const MonteCarloResult& mc) {
  out << "interval,vce,cce,vse,cse,vde,cde\n";
  for (std::size_t k = 0; k < mc.interval_means.size(); ++k) {
    out << k;
    for (double v : mc.interval_means[k]) out << ',' << format_number(v);
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Identity bench

double quantile(std::vector<double> xs, double q) {
  if (xs.empty()) return 0.0;
  std::sort(xs.begin(), xs.end());
  const auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(xs.size())));
  return xs[std::clamp<std::size_t>(rank, 1, xs.size()) - 1];
}

IdBenchResult identity_latency_bench(const IdBenchConfig& cfg, std::uint64_t seed) {
  if (cfg.servers == 0) throw std::invalid_argument("idbench needs at least one server");
  if (!(cfg.load_rps > 0.0)) throw std::invalid_argument("idbench load must be positive");
  std::optional<identity::ResolverRing> ring;
  if (cfg.model == identity::ResolutionModel::dht) {
    std::vector<identity::ServerId> members(cfg.servers);
    std::iota(members.begin(), members.end(), identity::ServerId{0});
    ring.emplace(std::move(members), cfg.ring_seed);
  }
  const double service = cfg.service_ms / 1000.0;
  const double rtt = cfg.rtt_ms / 1000.0;
  std::vector<double> free_at(cfg.servers, 0.0);

  IdBenchResult r;
  Rng rng(derive_seed(seed, kBenchStream));
  double t = 0.0;
  for (std::size_t i = 0; i < cfg.requests; ++i) {
    t += rng.exponential(1.0 / cfg.load_rps);
    const auto name = "user" + std::to_string(i);
    const identity::ServerId st = ring ? identity::resolver_for(*ring, name) : 0;
    const double start = std::max(t, free_at[st]);
    free_at[st] = start + service;
    r.latency_s.push_back(free_at[st] - t + rtt);
    r.station.push_back(st);
  }
  if (!r.latency_s.empty()) {
    r.mean = std::accumulate(r.latency_s.begin(), r.latency_s.end(), 0.0) /
             static_cast<double>(r.latency_s.size());
  }
  r.p50 = quantile(r.latency_s, 0.5);
  r.p95 = quantile(r.latency_s, 0.95);
  return r;
}

void write_idbench_csv(std::ostream& out, const IdBenchResult& r) {
  out << "request,station,latency_s\n";
  for (std::size_t i = 0; i < r.latency_s.size(); ++i) {
    out << i << ',' << r.station[i] << ',' << format_number(r.latency_s[i]) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Traces

TraceCheck validate_trace(const std::vector<TraceRecord>& events, SimTime horizon) {
  TraceCheck check;
  auto fail = [&](std::size_t i, const std::string& what) {
    check.ok = false;
    check.errors.push_back("event " + std::to_string(i) + ": " + what);
  };
  std::map<std::string, bool> down;  // link -> currently down
  std::set<std::uint64_t> seqs;
  for (std::size_t i = 0; i < events.size(); ++i) {
    const auto& e = events[i];
    if (!seqs.insert(e.seq).second) fail(i, "sequence number reused");
    if (i > 0) {
      const auto& p = events[i - 1];
      if (e.at < p.at) fail(i, "time went backwards");
      if (e.at == p.at && e.seq < p.seq) fail(i, "same-time events out of insertion order");
    }
    if (e.kind == EventKind::link_fail || e.kind == EventKind::link_restore) {
      if (e.detail.rfind("link=", 0) != 0) {
        fail(i, "link event without a link");
        continue;
      }
      auto& d = down[e.detail];
      if (e.kind == EventKind::link_fail && d) fail(i, e.detail + " failed while down");
      if (e.kind == EventKind::link_restore && !d) fail(i, e.detail + " restored while up");
      d = e.kind == EventKind::link_fail;
    }
    if (e.kind == EventKind::traffic && e.detail.rfind("attempt=", 0) == 0 && e.at >= horizon) {
      fail(i, "attempt past the horizon");
    }
  }
  return check;
}

void write_trace(std::ostream& out, const std::vector<TraceRecord>& events) {
  char buf[64];
  for (const auto& e : events) {
    std::snprintf(buf, sizeof buf, "%.6f\t%" PRIu64 "\t", e.at, e.seq);
    out << buf << to_string(e.kind) << '\t' << e.detail << '\n';
  }
}

}  // namespace greenlinks::simcore
