#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "greenlinks/engine.hpp"
#include "greenlinks/identity.hpp"
#include "greenlinks/topology.hpp"

namespace greenlinks::sync {

using topology::NodeId;
using RequestId = std::uint64_t;

enum class PrimitiveClass : std::uint8_t { slowput, fastget, fastsearch };
[[nodiscard]] std::string_view to_string(PrimitiveClass cls) noexcept;

/// A byte blob with a declared wire size. `data` may be shorter than `size`
/// for synthetic payloads (a 1 MB file is modelled without allocating it).
struct Payload {
  std::string data;
  std::uint64_t size = 0;

  [[nodiscard]] static Payload of(std::string bytes) {
    const auto n = bytes.size();
    return Payload{std::move(bytes), n};
  }
  [[nodiscard]] static Payload synthetic(std::string bytes, std::uint64_t declared) {
    const auto n = std::max<std::uint64_t>(declared, bytes.size());
    return Payload{std::move(bytes), n};
  }
  [[nodiscard]] std::uint32_t checksum() const noexcept;
};

struct SyncRequest {
  RequestId id = 0;
  NodeId origin;
  std::string identity;
  std::string app_type;
  std::string key;
  Payload payload;
  PrimitiveClass cls = PrimitiveClass::slowput;
  SimTime enqueued_at = 0.0;
  int priority = 0;  // lower is served first when priority scheduling is on
  std::uint64_t seq = 0;
  double bytes_sent = 0.0;
  std::uint32_t attempts = 0;

  [[nodiscard]] double remaining() const noexcept {
    return static_cast<double>(payload.size) - bytes_sent;
  }
};

enum class SyncErrc : std::uint8_t {
  queue_full,
  payload_empty,
  backhaul_down,
  timeout,
  expired,
  rejected,
};
[[nodiscard]] std::string_view to_string(SyncErrc code) noexcept;

// ---------------------------------------------------------------------------
// Lazy queue

struct Transmitted {
  SyncRequest request;
  SimTime finished_at = 0.0;
};

struct DrainResult {
  double bytes = 0.0;
  std::vector<Transmitted> completed;
};

class LazyQueue;

/// Transmits over the window [queue.last_drain_at(), now] at the given link
/// rate. The link state is taken as constant over the window, so callers
/// drain at every link change. Completed requests move to the awaiting-ack
/// set and are reported with their exact finish time.
DrainResult drain_step(LazyQueue& queue, bool up, double kbps, SimTime now);

struct QueuePolicy {
  /// Off: one common FIFO. On: sms-like requests go first, preempting only
  /// at request boundaries.
  bool priority_enabled = false;
  std::optional<std::size_t> max_pending;
  std::uint64_t sms_threshold_bytes = 1024;
  std::map<std::string, int, std::less<>> app_priority;

  [[nodiscard]] int priority_for(std::string_view app_type, std::uint64_t size) const;
};

/// Per-node persistent upload queue. Survives outages; a partially sent
/// request resumes from its byte offset.
class LazyQueue {
 public:
  explicit LazyQueue(QueuePolicy policy = {}) : policy_(std::move(policy)) {}

  /// Assigns seq and priority. Returns false when the queue is full.
  bool enqueue(SyncRequest request);

  [[nodiscard]] const QueuePolicy& policy() const noexcept { return policy_; }
  [[nodiscard]] std::size_t size() const noexcept { return pending_.size(); }
  [[nodiscard]] bool empty() const noexcept { return pending_.empty(); }
  [[nodiscard]] double bytes_pending() const noexcept;
  [[nodiscard]] std::vector<const SyncRequest*> pending() const;
  [[nodiscard]] const std::map<std::uint64_t, SyncRequest>& in_flight() const noexcept {
    return in_flight_;
  }
  [[nodiscard]] SimTime last_drain_at() const noexcept { return last_drain_; }
  [[nodiscard]] std::optional<std::uint64_t> in_progress() const noexcept { return in_progress_; }

  /// The request that transmits next.
  [[nodiscard]] SyncRequest* head();
  /// Seconds until the head finishes at `kbps`; nullopt when idle or stalled.
  [[nodiscard]] std::optional<double> time_to_next_completion(bool up, double kbps);

  /// Drops an acknowledged request. Returns false for unknown seq.
  bool acknowledge(std::uint64_t seq);
  /// Sends unacknowledged requests matching `lost` back for a full resend.
  /// Any requeue also clears the head's no-preemption pin, so resends go
  /// out in sequence order.
  std::size_t requeue_if(const std::function<bool(const SyncRequest&)>& lost);

  void set_priority_enabled(bool on) noexcept { policy_.priority_enabled = on; }

  /// Structured text dump, one line per request.
  void dump(std::ostream& out) const;

 private:
  friend DrainResult drain_step(LazyQueue& queue, bool up, double kbps, SimTime now);

  QueuePolicy policy_;
  std::map<std::uint64_t, SyncRequest> pending_;    // by seq
  std::map<std::uint64_t, SyncRequest> in_flight_;  // sent, awaiting ack
  std::optional<std::uint64_t> in_progress_;
  std::uint64_t next_seq_ = 0;
  SimTime last_drain_ = 0.0;
};

// ---------------------------------------------------------------------------
// Cloud store

struct Record {
  std::string value;
  std::uint64_t version = 0;
};

using StoreKey = std::pair<std::string, std::string>;  // (app_type, key)

class CloudStore {
 public:
  [[nodiscard]] const Record* find(std::string_view app_type, std::string_view key) const;
  /// Committed records of `app_type` accepted by `match`, ordered by key.
  [[nodiscard]] std::vector<std::pair<std::string, Record>> search(
      std::string_view app_type,
      const std::function<bool(std::string_view key, const Record&)>& match) const;
  /// Writes a new version; returns it.
  std::uint64_t write(const StoreKey& key, std::string value);

  [[nodiscard]] bool locked(const StoreKey& key) const { return locks_.contains(key); }
  bool try_lock(const StoreKey& key) { return locks_.insert(key).second; }
  void unlock(const StoreKey& key) { locks_.erase(key); }

  /// Records a slowput arrival; true the first time an id is seen.
  bool note_arrival(RequestId id);
  [[nodiscard]] std::uint64_t arrivals(RequestId id) const;
  [[nodiscard]] std::uint64_t duplicates_suppressed() const noexcept { return duplicates_; }
  [[nodiscard]] const std::map<StoreKey, Record>& records() const noexcept { return records_; }

 private:
  std::map<StoreKey, Record> records_;
  std::set<StoreKey> locks_;
  std::map<RequestId, std::uint64_t> arrivals_;
  std::uint64_t duplicates_ = 0;
};

// ---------------------------------------------------------------------------
// Primitives service

struct SyncConfig {
  QueuePolicy queue;
  double cloud_service_ms = 10.0;
  double fastget_timeout_s = 30.0;
  double sync_interval_s = 30.0;
  std::optional<double> message_ttl_s;  // none = never expire
};

struct SlowputAck {
  std::optional<SyncErrc> error;
  RequestId id = 0;
  SimTime acked_at = 0.0;
};

/// What a FASTGET does to the record at the cloud, run under the key's write
/// lock. Leaving `write` empty makes it a pure read.
struct FastgetApply {
  std::optional<std::string> write;
  std::string response;
  bool ok = true;
};
using FastgetOp = std::function<FastgetApply(const Record* current)>;

struct FastgetResult {
  RequestId id = 0;
  std::optional<SyncErrc> error;
  bool ok = false;  // the op's own verdict
  std::string response;
  std::uint64_t version = 0;
  SimTime issued_at = 0.0;
  SimTime completed_at = 0.0;
};

struct SearchResult {
  RequestId id = 0;
  std::optional<SyncErrc> error;
  std::vector<std::pair<std::string, Record>> records;
  SimTime issued_at = 0.0;
  SimTime completed_at = 0.0;
};

using SearchMatch = std::function<bool(std::string_view key, const Record&)>;

struct Message {
  std::string id;
  std::string from;
  std::string to;  // destination identity name
  Payload body;
  std::optional<double> ttl_s;
};

struct DeliveryReceipt {
  enum class Status : std::uint8_t { delivered, expired };
  std::string message_id;
  Status status = Status::delivered;
  SimTime at = 0.0;
  NodeId node;
  bool local = false;
};

struct LatencyRecord {
  RequestId id = 0;
  PrimitiveClass cls = PrimitiveClass::slowput;
  std::string app_type;
  std::uint64_t bytes = 0;
  SimTime enqueued_at = 0.0;
  SimTime delivered_at = 0.0;
};

struct PrimitiveCall {
  SimTime at = 0.0;
  NodeId origin;
  PrimitiveClass cls = PrimitiveClass::slowput;
  std::string app_type;
  RequestId id = 0;
};

struct ApplyRecord {
  SimTime at = 0.0;
  NodeId origin;
  RequestId id = 0;
  std::uint64_t seq = 0;
  int priority = 0;
  std::string app_type;
  std::string key;
};

/// The three intermittency-aware primitives over one cloud instance.
///
/// SLOWPUT acks locally and drains through the node's LazyQueue at the
/// bottleneck rate of the node's path to the cloud; the cloud applies each
/// request id once and acks. FASTGET and FASTSEARCH go out immediately and
/// answer only from the cloud.
class SyncService {
 public:
  using ApplyHook = std::function<void(const SyncRequest&, SimTime)>;
  using FastgetCallback = std::function<void(const FastgetResult&)>;
  using SearchCallback = std::function<void(const SearchResult&)>;
  using ReceiptCallback = std::function<void(const DeliveryReceipt&)>;

  SyncService(Engine& engine, topology::Topology& topo, SyncConfig config,
              const identity::IdentityService* ids = nullptr);
  SyncService(const SyncService&) = delete;
  SyncService& operator=(const SyncService&) = delete;

  SlowputAck slowput(NodeId origin, std::string identity, std::string app_type, std::string key,
                     Payload data);
  RequestId fastget(NodeId origin, std::string identity, std::string app_type, std::string key,
                    Payload data, FastgetOp op, FastgetCallback done);
  RequestId fastsearch(NodeId origin, std::string identity, std::string app_type, Payload query,
                       SearchMatch match, SearchCallback done);
  /// Persists `msg` at `origin` and delivers it to the node where `msg.to`
  /// lives once that node syncs. Short-circuits when the recipient is on
  /// `origin` already.
  void store_and_forward(NodeId origin, Message msg, ReceiptCallback receipt = {});

  /// Starts periodic per-node mailbox syncs.
  void start();
  /// Runs one mailbox sync for `node` now.
  void sync_node(NodeId node);

  /// Called for the first cloud apply of each slowput of `app_type`.
  void on_apply(std::string app_type, ApplyHook hook);

  [[nodiscard]] CloudStore& store() noexcept { return store_; }
  [[nodiscard]] const CloudStore& store() const noexcept { return store_; }
  [[nodiscard]] const LazyQueue& queue(NodeId node);
  [[nodiscard]] const std::vector<LatencyRecord>& latency_log() const noexcept { return latency_; }
  [[nodiscard]] const std::vector<PrimitiveCall>& call_log() const noexcept { return calls_; }
  [[nodiscard]] const std::vector<ApplyRecord>& apply_log() const noexcept { return applies_; }
  [[nodiscard]] std::uint64_t delivery_count(std::string_view message_id) const;
  [[nodiscard]] std::uint64_t delivery_duplicates() const noexcept { return delivery_dups_; }
  [[nodiscard]] std::uint64_t expired_messages() const noexcept { return expired_; }
  /// Slowputs sent again after being lost in flight.
  [[nodiscard]] std::uint64_t resends() const noexcept { return resends_; }
  [[nodiscard]] std::size_t mailbox_size() const;
  [[nodiscard]] std::uint64_t slowputs_outstanding() const;
  [[nodiscard]] const SyncConfig& config() const noexcept { return config_; }
  void set_priority_enabled(bool on);

  /// Columns: request_id,class,app_type,bytes,enqueued_at,delivered_at.
  void write_latency_csv(std::ostream& out) const;
  void dump_queues(std::ostream& out);

 private:
  struct NodeState {
    LazyQueue queue;
    bool up = false;
    double kbps = 0.0;
    double latency_ms = 0.0;
    topology::PathSnapshot path;  // current route to the cloud
    std::uint64_t drain_token = 0;
    std::map<std::uint64_t, topology::PathSnapshot> snapshots;  // seq -> path at send
  };
  struct Call {
    bool done = false;
    FastgetCallback fastget_done;
    SearchCallback search_done;
    SimTime issued_at = 0.0;
    PrimitiveClass cls = PrimitiveClass::fastget;
    std::string app_type;
    std::uint64_t bytes = 0;
  };
  struct MailItem {
    Message msg;
    SimTime created_at = 0.0;
    bool in_flight = false;
    ReceiptCallback receipt;
  };

  NodeState& node_state(NodeId node);
  void refresh_view(NodeId node, NodeState& st);
  void drain(NodeId node, NodeState& st);
  void reschedule(NodeId node, NodeState& st);
  void handle_link_change(topology::LinkId link, topology::LinkState state);
  void on_cloud_arrival(NodeId origin, SyncRequest req, topology::PathSnapshot snap);
  void with_lock(const StoreKey& key, std::function<void()> critical);
  void release(const StoreKey& key);
  void finish_call(RequestId id, const FastgetResult* fg, const SearchResult* sr);
  void deliver(NodeId node, MailItem& item, bool local);
  void schedule_sync(NodeId node);
  RequestId next_id() { return ++last_id_; }

  Engine* engine_;
  topology::Topology* topo_;
  SyncConfig config_;
  const identity::IdentityService* ids_;
  CloudStore store_;
  std::map<NodeId, NodeState> nodes_;
  std::map<StoreKey, std::vector<std::function<void()>>> lock_waiters_;
  std::map<RequestId, Call> calls_pending_;
  std::map<std::string, std::vector<ApplyHook>, std::less<>> hooks_;
  std::map<std::string, std::vector<std::string>, std::less<>> mailbox_order_;  // dest -> msg ids
  std::map<std::string, MailItem, std::less<>> mail_;                           // msg id -> item
  std::map<std::string, ReceiptCallback, std::less<>> pending_receipts_;
  std::map<std::string, std::pair<Message, SimTime>, std::less<>> outbox_;  // persisted at origin
  std::map<std::string, std::uint64_t, std::less<>> delivered_;
  std::vector<LatencyRecord> latency_;
  std::vector<PrimitiveCall> calls_;
  std::vector<ApplyRecord> applies_;
  std::uint64_t delivery_dups_ = 0;
  std::uint64_t expired_ = 0;
  std::uint64_t resends_ = 0;
  RequestId last_id_ = 0;
  bool started_ = false;
};

}  // namespace greenlinks::sync
