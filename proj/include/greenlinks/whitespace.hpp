#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "greenlinks/engine.hpp"

namespace greenlinks::whitespace {

using Arfcn = int;

/// A contiguous run of channel numbers. P-GSM-900 is 1..124.
struct Band {
  Arfcn first = 1;
  Arfcn last = 124;

  [[nodiscard]] std::size_t size() const noexcept {
    return last < first ? 0 : static_cast<std::size_t>(last - first + 1);
  }
  [[nodiscard]] bool contains(Arfcn a) const noexcept { return a >= first && a <= last; }
  [[nodiscard]] std::size_t index(Arfcn a) const noexcept {
    return static_cast<std::size_t>(a - first);
  }
};

enum class Verdict : std::uint8_t { unknown, free, occupied };
[[nodiscard]] std::string_view to_string(Verdict v) noexcept;

struct MeasurementReport {
  std::uint32_t reporter = 0;
  Arfcn arfcn = 0;
  double energy = 0.0;  // 0 means nothing heard
  SimTime at = 0.0;

  bool operator==(const MeasurementReport&) const = default;
};

struct ChannelState {
  Arfcn arfcn = 0;
  Verdict verdict = Verdict::unknown;
  std::optional<SimTime> last_positive_at;
  std::uint64_t zero_count = 0;  // consecutive zeros since the last positive
  std::uint64_t positive_count = 0;
  std::optional<SimTime> zero_run_start;
  std::optional<SimTime> verdict_at;        // when the current verdict was reached
  std::optional<SimTime> first_verdict_at;  // first time the channel left unknown
  std::optional<SimTime> last_planned_at;

  bool operator==(const ChannelState&) const = default;
};

struct DetectorConfig {
  std::uint64_t n_free = 500;
  double t_free_s = 1800.0;
  double evidence_ttl_s = 86400.0;
};

/// Drops occupied evidence older than the TTL back to unknown.
[[nodiscard]] ChannelState expire(ChannelState state, SimTime now, const DetectorConfig& cfg);

/// One estimator step. A positive marks the channel occupied at once; free
/// needs n_free consecutive zeros spanning at least t_free_s.
[[nodiscard]] ChannelState ingest_report(ChannelState state, const MeasurementReport& report,
                                         const DetectorConfig& cfg);

struct ScanPlan {
  std::vector<Arfcn> fake_neighbors;
  std::size_t slots = 6;
};

/// Unknown channels first, least recently advertised first (never before
/// ever), then by channel number; leftover slots go to the stalest free
/// channels for re-verification. Occupied channels and the serving channel
/// are never advertised.
[[nodiscard]] ScanPlan plan_scan(const std::vector<ChannelState>& states, SimTime now,
                                 std::size_t slots = 6, std::optional<Arfcn> serving = {});

struct SwitchDecision {
  enum class Action : std::uint8_t { stay, pending, switch_now, quiesce };
  Action action = Action::stay;
  std::optional<Arfcn> target;
};

/// Moves off an occupied serving channel to the free channel verified
/// longest ago, but only once no call is active. Quiesce means no free
/// channel exists (NoFreeChannel).
[[nodiscard]] SwitchDecision maybe_switch_channel(std::optional<Arfcn> serving,
                                                  const std::vector<ChannelState>& states,
                                                  std::size_t active_calls);

struct PowerRampConfig {
  double start_dbm = 10.0;
  double step_db = 3.0;
  double interval_s = 900.0;
  double max_dbm = 30.0;
};

class PowerRamp {
 public:
  explicit PowerRamp(PowerRampConfig cfg = {}) : cfg_(cfg), current_(cfg.start_dbm) {}

  [[nodiscard]] double current_dbm() const noexcept { return current_; }
  [[nodiscard]] const PowerRampConfig& config() const noexcept { return cfg_; }
  /// Called once per interval. Steps up only when every advertised channel
  /// and the serving channel stayed free throughout the interval.
  bool tick(bool all_free_over_interval);

 private:
  PowerRampConfig cfg_;
  double current_;
};

struct VolunteerSms {
  SimTime at = 0.0;
  std::size_t volunteer = 0;
};

/// Volunteer SMS in [0, horizon), time ordered: `volunteers` senders, one
/// message each per period, staggered evenly across the period.
[[nodiscard]] std::vector<VolunteerSms> volunteer_traffic(std::size_t volunteers, double period_s,
                                                          SimTime horizon);

class UnplannedChannel : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Channel states for one base station plus its active scan plan.
class Detector {
 public:
  Detector(Band band, DetectorConfig cfg = {}, std::size_t slots = 6);

  /// Applies `report` if its channel is advertised or serving; otherwise the
  /// report is dropped and counted.
  bool ingest(const MeasurementReport& report);
  /// Same, but throws UnplannedChannel instead of dropping.
  void ingest_strict(const MeasurementReport& report);

  /// Expires stale evidence and recomputes the plan.
  const ScanPlan& replan(SimTime now);
  void expire_all(SimTime now);
  void set_serving(std::optional<Arfcn> serving) { serving_ = serving; }
  /// Advertise every channel but the serving one, with no rotation.
  void advertise_all();

  [[nodiscard]] const Band& band() const noexcept { return band_; }
  [[nodiscard]] const DetectorConfig& config() const noexcept { return cfg_; }
  [[nodiscard]] const std::vector<ChannelState>& states() const noexcept { return states_; }
  [[nodiscard]] const ChannelState& state(Arfcn a) const { return states_.at(band_.index(a)); }
  [[nodiscard]] const ScanPlan& plan() const noexcept { return plan_; }
  [[nodiscard]] std::optional<Arfcn> serving() const noexcept { return serving_; }
  [[nodiscard]] bool advertised(Arfcn a) const;
  [[nodiscard]] std::uint64_t dropped() const noexcept { return dropped_; }
  [[nodiscard]] std::size_t count(Verdict v) const;
  /// Time every channel first left unknown, if all have.
  [[nodiscard]] std::optional<SimTime> fully_classified_at() const;

 private:
  Band band_;
  DetectorConfig cfg_;
  std::vector<ChannelState> states_;
  ScanPlan plan_;
  std::vector<bool> on_plan_;
  std::optional<Arfcn> serving_;
  std::uint64_t dropped_ = 0;
};

// ---------------------------------------------------------------------------
// Field simulation

struct Interferer {
  Arfcn arfcn = 0;
  double x = 0.0;
  double y = 0.0;
  double radius_m = 0.0;
  double energy = 30.0;
};

struct WhitespaceConfig {
  Band band;
  DetectorConfig detector;
  PowerRampConfig power;
  std::vector<Interferer> truth;  // empty: draw `occupied` interferers from the seed
  std::size_t occupied = 9;
  double interferer_radius_m = 600.0;
  double area_m = 3000.0;  // phones roam a square of this side
  double speed_min_mps = 0.5;
  double speed_max_mps = 1.5;
  std::size_t users = 60;
  double volunteer_ratio = 0.0;
  double volunteer_period_s = 60.0;
  double organic_sms_mean_s = 600.0;  // per user; 0 disables
  double organic_call_mean_s = 3600.0;
  double call_duration_mean_s = 120.0;
  std::size_t slots = 6;
  bool advertise_all = false;  // slots = channels, no rotation
  double replan_interval_s = 300.0;
  std::optional<Arfcn> serving;  // initial serving channel
  SimTime horizon_s = 12 * 3600.0;
  bool stop_when_classified = false;
  bool record_reports = false;
};

struct PowerSample {
  SimTime at = 0.0;
  double dbm = 0.0;
};

struct ServingChange {
  SimTime at = 0.0;
  std::optional<Arfcn> from;
  std::optional<Arfcn> to;
};

struct WhitespaceRun {
  std::vector<ChannelState> states;
  std::vector<Interferer> truth;
  std::optional<SimTime> classified_at;
  std::optional<Arfcn> serving;
  std::vector<ServingChange> serving_changes;
  std::vector<PowerSample> power;
  std::uint64_t sms = 0;
  std::uint64_t calls = 0;
  std::uint64_t calls_refused = 0;
  std::uint64_t reports = 0;
  std::uint64_t serving_collisions = 0;  // entries onto a channel that is truly occupied
  double collision_seconds = 0.0;
  std::vector<MeasurementReport> trace;  // when record_reports
  SimTime ended_at = 0.0;
};

/// Phones on random waypoints send organic and volunteer traffic; each
/// message yields a report for every advertised channel and the serving one.
[[nodiscard]] WhitespaceRun run_whitespace(const WhitespaceConfig& cfg, std::uint64_t seed);

struct NgsmPoint {
  double ratio = 0.0;
  std::size_t users = 0;
  double t_ngsm_min = 0.0;       // infinity when never classified
  double t_volunteer_min = 0.0;
};

/// Organic-only against organic plus volunteers on the same seeded trace,
/// with `channels` channels all advertised at once.
[[nodiscard]] NgsmPoint compare_ngsm(std::size_t users, double volunteer_ratio,
                                     std::size_t channels, const WhitespaceConfig& base,
                                     std::uint64_t seed);

/// Replays a report trace through a detector with every channel advertised.
[[nodiscard]] std::vector<ChannelState> replay(const std::vector<MeasurementReport>& trace,
                                               Band band, const DetectorConfig& cfg);

// Columns: arfcn,verdict,t_verdict. Unknown rows leave t_verdict empty.
void write_occupancy_csv(std::ostream& out, const std::vector<ChannelState>& states);
// Columns: reporter,arfcn,energy,time.
void write_reports_csv(std::ostream& out, const std::vector<MeasurementReport>& reports);
/// Throws std::runtime_error naming the offending line.
[[nodiscard]] std::vector<MeasurementReport> read_reports_csv(std::istream& in);

}  // namespace greenlinks::whitespace
