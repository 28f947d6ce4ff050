#pragma once

#include <cstdint>
#include <functional>
#include <queue>
#include <string>
#include <string_view>
#include <vector>

namespace greenlinks {

/// Simulated time in seconds since the start of a run.
using SimTime = double;

enum class EventKind : std::uint8_t {
  traffic,
  link_fail,
  link_restore,
  sync_tick,
  report,
  call_end,
  custom,
};

[[nodiscard]] std::string_view to_string(EventKind kind) noexcept;

/// One processed event as recorded in the run trace.
struct TraceRecord {
  SimTime at = 0.0;
  std::uint64_t seq = 0;
  EventKind kind = EventKind::custom;
  std::string detail;
};

/// Deterministic single-threaded discrete-event loop.
///
/// Events fire in nondecreasing time order; events scheduled for the same
/// instant fire in insertion order. Scheduling into the past is clamped to
/// the current time so causality is never violated.
class Engine {
 public:
  using Handler = std::function<void()>;

  Engine() = default;
  Engine(const Engine&) = delete;
  Engine& operator=(const Engine&) = delete;

  [[nodiscard]] SimTime now() const noexcept { return now_; }

  /// Returns the sequence number assigned to the event.
  std::uint64_t schedule(SimTime at, EventKind kind, Handler handler,
                         std::string detail = {});
  std::uint64_t schedule_in(SimTime delay, EventKind kind, Handler handler,
                            std::string detail = {}) {
    return schedule(now_ + delay, kind, std::move(handler), std::move(detail));
  }

  /// Processes every event with time <= horizon, then parks the clock at the
  /// horizon. Returns the number of events processed.
  std::size_t run_until(SimTime horizon);

  /// Processes a single event if one exists.
  bool step();

  [[nodiscard]] bool empty() const noexcept { return queue_.empty(); }
  /// Time of the next event; only meaningful when !empty().
  [[nodiscard]] SimTime next_time() const noexcept { return queue_.top().at; }
  [[nodiscard]] std::size_t pending() const noexcept { return queue_.size(); }
  [[nodiscard]] std::uint64_t processed() const noexcept { return processed_; }

  void enable_trace(bool on) noexcept { tracing_ = on; }
  [[nodiscard]] const std::vector<TraceRecord>& trace() const noexcept {
    return trace_;
  }

 private:
  struct Entry {
    SimTime at;
    std::uint64_t seq;
    EventKind kind;
    Handler handler;
    std::string detail;
  };
  struct Later {
    bool operator()(const Entry& a, const Entry& b) const noexcept {
      if (a.at != b.at) return a.at > b.at;
      return a.seq > b.seq;
    }
  };

  std::priority_queue<Entry, std::vector<Entry>, Later> queue_;
  SimTime now_ = 0.0;
  std::uint64_t next_seq_ = 0;
  std::uint64_t processed_ = 0;
  bool tracing_ = false;
  std::vector<TraceRecord> trace_;
};

/// Formats a double with six significant digits, the fixed precision used by
/// every CSV artifact.
[[nodiscard]] std::string format_number(double value);

}  // namespace greenlinks
