#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "greenlinks/apps.hpp"
#include "greenlinks/engine.hpp"
#include "greenlinks/identity.hpp"
#include "greenlinks/sync.hpp"
#include "greenlinks/topology.hpp"
#include "greenlinks/whitespace.hpp"

namespace greenlinks::simcore {

using topology::LinkId;
using topology::NodeId;

enum class Service : std::uint8_t { call, sms, data };
inline constexpr std::size_t kServices = 3;
[[nodiscard]] std::string_view to_string(Service s) noexcept;

struct FailureSchedule {
  double interval_s = 600.0;
  /// Share of failures hitting a level2-level3 link; the rest hit a
  /// node-cloud link. Falls back to whichever class exists.
  double p_access = 0.5;
  double mean_duration_s = 600.0;  // exponential
  std::size_t per_interval = 1;
};

struct TrafficModel {
  double level2_share = 0.6;
  double level3_share = 0.4;
  /// Attempts per non-cloud node per interval, indexed by Service.
  std::array<double, kServices> per_node{2.0, 3.0, 2.0};
  // Call and SMS destinations: same node, else same zone, else another zone.
  double same_node = 0.3;
  double same_zone = 0.3;
  double local_data = 0.5;  // data served by the node's own edge server
  double call_mean_s = 120.0;
  double data_mean_s = 30.0;
};

/// Throws std::invalid_argument when shares or rates are out of range.
void validate(const FailureSchedule& f);
void validate(const TrafficModel& t);

struct Attempt {
  std::uint64_t id = 0;
  SimTime at = 0.0;
  Service service = Service::call;
  NodeId origin;
  std::optional<NodeId> dest;  // none: the wider internet, through the cloud
  double duration_s = 0.0;
  std::size_t interval = 0;
};

struct Fault {
  SimTime at = 0.0;
  LinkId link;
  topology::LinkState state = topology::LinkState::down;
};

/// Everything the dual evaluation needs: traffic plus the link timeline.
struct RunTrace {
  SimTime horizon = 0.0;
  double interval_s = 600.0;
  std::vector<Attempt> attempts;  // by time
  std::vector<Fault> faults;      // by time; only real state changes
};

/// Outages drawn per interval, merged per link so overlaps never flap.
/// With `clip`, every outage ends by the horizon.
[[nodiscard]] std::vector<Fault> inject_failures(const topology::Topology& topo,
                                                 const FailureSchedule& f, SimTime horizon,
                                                 std::uint64_t seed, bool clip = false);
[[nodiscard]] std::vector<Attempt> generate_traffic(const topology::Topology& topo,
                                                    const TrafficModel& t, double interval_s,
                                                    SimTime horizon, std::uint64_t seed);

struct Outcome {
  std::uint64_t attempt = 0;
  Service service = Service::call;
  std::size_t interval = 0;
  bool vc_ok = false;
  bool cell_ok = false;
};

struct Counts {
  std::uint64_t attempted = 0;
  std::uint64_t succeeded = 0;
  std::uint64_t dropped = 0;
};

struct IntervalCounts {
  std::array<Counts, kServices> vc{};
  std::array<Counts, kServices> cell{};
};

enum class Metric : std::uint8_t { vce, cce, vse, cse, vde, cde };
inline constexpr std::array<Metric, 6> kMetrics{Metric::vce, Metric::cce, Metric::vse,
                                                Metric::cse, Metric::vde, Metric::cde};
[[nodiscard]] std::string_view to_string(Metric m) noexcept;

class MetricsLedger {
 public:
  MetricsLedger() = default;
  explicit MetricsLedger(std::size_t intervals) : intervals_(intervals) {}

  void record(const Outcome& o);

  [[nodiscard]] const std::vector<IntervalCounts>& intervals() const noexcept { return intervals_; }
  [[nodiscard]] const std::vector<Outcome>& outcomes() const noexcept { return outcomes_; }
  /// dropped / attempted; 0 when nothing was attempted.
  [[nodiscard]] double rate(std::size_t interval, Metric m) const;
  [[nodiscard]] double total_rate(Metric m) const;
  [[nodiscard]] Counts total(Metric m) const;
  /// Attempts VC-ISP dropped but cellular carried.
  [[nodiscard]] std::uint64_t containment_violations() const;
  /// Conservation, matching attempt counts, rates within [0, 1], containment.
  [[nodiscard]] std::vector<std::string> check_invariants() const;

  // Columns: interval,vce,cce,vse,cse,vde,cde.
  void write_csv(std::ostream& out) const;

 private:
  std::vector<IntervalCounts> intervals_;
  std::vector<Outcome> outcomes_;
};

/// Scores every attempt under both architectures on one fault timeline.
/// VC-ISP needs its endpoints connected; cellular needs every endpoint
/// connected to the cloud. Calls and transfers must stay connected for
/// their whole duration.
[[nodiscard]] MetricsLedger evaluate_dual(const topology::Topology& topo, const RunTrace& trace);

// ---------------------------------------------------------------------------
// Scenarios and runs

struct SweepConfig {
  std::vector<double> ratios{0.0, 0.1, 0.2};
  std::vector<std::size_t> users{10, 20, 30, 40, 50, 60, 70, 80, 90, 100};
  std::size_t channels = 124;
};

struct IdBenchConfig {
  identity::ResolutionModel model = identity::ResolutionModel::central;
  std::uint32_t servers = 1;
  double load_rps = 150.0;
  std::size_t requests = 2000;
  double service_ms = 10.0;
  double rtt_ms = 0.0;
  std::uint32_t ring_seed = 0;
};

struct Scenario {
  std::string name = "scenario";
  topology::TopologySpec topology;
  SimTime horizon_s = 3600.0;
  FailureSchedule failures;
  TrafficModel traffic;
  bool inject_failures = true;
  sync::SyncConfig sync;
  identity::IdentityConfig identity;
  std::optional<apps::Workload> workload;
  std::optional<whitespace::WhitespaceConfig> whitespace;
  SweepConfig sweep;
  IdBenchConfig idbench;
};

struct RunOptions {
  bool trace = false;
  bool priority_queue = false;
  /// Bring every link back up at the horizon and keep running until the
  /// queues drain (bounded by `drain_limit_s`).
  bool restore_at_horizon = false;
  double drain_limit_s = 86400.0;
};

struct RunOutput {
  std::uint64_t seed = 0;
  RunTrace plan;
  MetricsLedger metrics;
  std::vector<TraceRecord> events;  // when tracing
  std::vector<sync::LatencyRecord> latency;
  std::string latency_csv;
  apps::WorkloadStats workload;
  std::vector<apps::Listing> listed;
  std::map<std::string, std::uint64_t> sold;
  std::uint64_t events_processed = 0;
  std::uint64_t slowputs = 0;
  std::uint64_t slowput_applies = 0;
  std::uint64_t duplicate_applies = 0;
  std::uint64_t duplicates_suppressed = 0;
  std::uint64_t slowputs_outstanding = 0;
  std::uint64_t resends = 0;
  std::uint64_t messages_delivered_once = 0;
  std::uint64_t message_redeliveries_suppressed = 0;  // repeat hand-offs the dedup dropped
  std::uint64_t oversold = 0;
};

/// One seeded simulation: failures, traffic, sync and the app workload all
/// share one engine. Same scenario and seed give the same output.
[[nodiscard]] RunOutput run(const Scenario& scenario, std::uint64_t seed, const RunOptions& opts = {});

struct Stat {
  double mean = 0.0;
  double stddev = 0.0;     // sample
  double ci95_half = 0.0;  // 1.96 * stddev / sqrt(n)
};
[[nodiscard]] Stat summarize(const std::vector<double>& samples);

struct RunSummary {
  std::size_t index = 0;
  std::uint64_t seed = 0;
  std::array<double, 6> rates{};  // by Metric
  std::uint64_t containment_violations = 0;
  std::vector<std::string> invariant_failures;
};

struct MonteCarloResult {
  std::vector<RunSummary> runs;  // by index
  std::array<Stat, 6> stats{};
  std::vector<std::array<double, 6>> interval_means;
  std::uint64_t containment_violations = 0;
  std::vector<std::string> invariant_failures;
  std::optional<RunOutput> first;  // run 0 in full, when kept
};

/// Run i uses seed base_seed + i. Runs go to worker threads; results are
/// reduced in index order so the output does not depend on scheduling.
[[nodiscard]] MonteCarloResult monte_carlo(const Scenario& scenario, std::size_t runs,
                                           std::uint64_t base_seed, unsigned threads = 0,
                                           const RunOptions& opts = {}, bool keep_first = false);

// Columns: metric,mean,stddev,ci95_half_width,runs.
void write_summary_csv(std::ostream& out, const MonteCarloResult& mc);
// Columns: interval,vce,cce,vse,cse,vde,cde (means over runs).
void write_interval_means_csv(std::ostream& out, const MonteCarloResult& mc);

// ---------------------------------------------------------------------------
// Identity issuance latency

struct IdBenchResult {
  std::vector<double> latency_s;  // per request, arrival order
  std::vector<identity::ServerId> station;
  double mean = 0.0;
  double p50 = 0.0;
  double p95 = 0.0;
};

/// Poisson arrivals into deterministic-service FIFO stations. Central sends
/// everything to station 0; dht picks resolver_for(name).
[[nodiscard]] IdBenchResult identity_latency_bench(const IdBenchConfig& cfg, std::uint64_t seed);

/// Nearest-rank quantile of unsorted samples.
[[nodiscard]] double quantile(std::vector<double> samples, double q);

// Columns: request,station,latency_s.
void write_idbench_csv(std::ostream& out, const IdBenchResult& r);

// ---------------------------------------------------------------------------
// Trace validation and output

struct TraceCheck {
  bool ok = true;
  std::vector<std::string> errors;
};

/// Single pass over a processed-event trace: time never goes back, same-time
/// events keep insertion order, each link alternates fail/restore starting
/// from up, and traffic attempts stay inside the horizon.
[[nodiscard]] TraceCheck validate_trace(const std::vector<TraceRecord>& events, SimTime horizon);

// One event per line: time<TAB>seq<TAB>kind<TAB>detail.
void write_trace(std::ostream& out, const std::vector<TraceRecord>& events);

}  // namespace greenlinks::simcore
