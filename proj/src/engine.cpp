#include "greenlinks/engine.hpp"

#include <cmath>
#include <cstdio>

namespace greenlinks {

std::string_view to_string(EventKind kind) noexcept {
  switch (kind) {
    case EventKind::traffic: return "traffic";
    case EventKind::link_fail: return "link_fail";
    case EventKind::link_restore: return "link_restore";
    case EventKind::sync_tick: return "sync_tick";
    case EventKind::report: return "report";
    case EventKind::call_end: return "call_end";
    case EventKind::custom: return "custom";
  }
  return "custom";
}

std::uint64_t Engine::schedule(SimTime at, EventKind kind, Handler handler,
                               std::string detail) {
  if (at < now_) at = now_;
  const auto seq = next_seq_++;
  queue_.push(Entry{at, seq, kind, std::move(handler), std::move(detail)});
  return seq;
}

bool Engine::step() {
  if (queue_.empty()) return false;
  // priority_queue::top is const; the handler is copied out before pop.
  Entry entry = queue_.top();
  queue_.pop();
  now_ = entry.at;
  ++processed_;
  if (tracing_) {
    trace_.push_back(TraceRecord{entry.at, entry.seq, entry.kind,
                                 std::move(entry.detail)});
  }
  if (entry.handler) entry.handler();
  return true;
}

std::size_t Engine::run_until(SimTime horizon) {
  std::size_t count = 0;
  while (!queue_.empty() && queue_.top().at <= horizon) {
    step();
    ++count;
  }
  if (horizon > now_) now_ = horizon;
  return count;
}

std::string format_number(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  if (value == 0.0) return "0";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", value);
  return buf;
}

}  // namespace greenlinks
