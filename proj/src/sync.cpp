#include "greenlinks/sync.hpp"

#include <algorithm>
#include <ostream>
#include <stdexcept>

namespace greenlinks::sync {

std::string_view to_string(PrimitiveClass cls) noexcept {
  switch (cls) {
    case PrimitiveClass::slowput: return "slowput";
    case PrimitiveClass::fastget: return "fastget";
    case PrimitiveClass::fastsearch: return "fastsearch";
  }
  return "slowput";
}

std::string_view to_string(SyncErrc code) noexcept {
  switch (code) {
    case SyncErrc::queue_full: return "QueueFull";
    case SyncErrc::payload_empty: return "PayloadEmpty";
    case SyncErrc::backhaul_down: return "BackhaulDown";
    case SyncErrc::timeout: return "Timeout";
    case SyncErrc::expired: return "Expired";
    case SyncErrc::rejected: return "Rejected";
  }
  return "SyncError";
}

std::uint32_t Payload::checksum() const noexcept {
  std::uint32_t h = 0x811c9dc5u;
  for (unsigned char c : data) {
    h ^= c;
    h *= 16777619u;
  }
  for (int shift = 0; shift < 64; shift += 8) {
    h ^= static_cast<unsigned char>(size >> shift);
    h *= 16777619u;
  }
  return h;
}

// --- queue -----------------------------------------------------------------

int QueuePolicy::priority_for(std::string_view app_type, std::uint64_t size) const {
  if (auto it = app_priority.find(app_type); it != app_priority.end()) return it->second;
  return size <= sms_threshold_bytes ? 0 : 1;
}

bool LazyQueue::enqueue(SyncRequest request) {
  if (policy_.max_pending && pending_.size() + in_flight_.size() >= *policy_.max_pending) {
    return false;
  }
  request.seq = next_seq_++;
  request.priority = policy_.priority_for(request.app_type, request.payload.size);
  request.bytes_sent = 0.0;
  const auto seq = request.seq;
  pending_.emplace(seq, std::move(request));
  return true;
}

double LazyQueue::bytes_pending() const noexcept {
  double total = 0.0;
  for (const auto& [seq, r] : pending_) total += r.remaining();
  return total;
}

std::vector<const SyncRequest*> LazyQueue::pending() const {
  std::vector<const SyncRequest*> out;
  for (const auto& [seq, r] : pending_) out.push_back(&r);
  return out;
}

SyncRequest* LazyQueue::head() {
  if (pending_.empty()) return nullptr;
  if (in_progress_) {
    if (auto it = pending_.find(*in_progress_); it != pending_.end()) return &it->second;
    in_progress_.reset();
  }
  if (!policy_.priority_enabled) return &pending_.begin()->second;
  auto best = pending_.begin();
  for (auto it = std::next(best); it != pending_.end(); ++it) {
    if (it->second.priority < best->second.priority) best = it;
  }
  return &best->second;
}

std::optional<double> LazyQueue::time_to_next_completion(bool up, double kbps) {
  if (!up || kbps <= 0.0) return std::nullopt;
  const auto* h = head();
  if (h == nullptr) return std::nullopt;
  return std::max(0.0, h->remaining()) / topology::bytes_per_second(kbps);
}

bool LazyQueue::acknowledge(std::uint64_t seq) { return in_flight_.erase(seq) > 0; }

std::size_t LazyQueue::requeue_if(const std::function<bool(const SyncRequest&)>& lost) {
  std::size_t n = 0;
  for (auto it = in_flight_.begin(); it != in_flight_.end();) {
    if (lost(it->second)) {
      auto req = std::move(it->second);
      req.bytes_sent = 0.0;
      ++req.attempts;
      pending_.emplace(req.seq, std::move(req));
      it = in_flight_.erase(it);
      ++n;
    } else {
      ++it;
    }
  }
  if (n > 0) in_progress_.reset();
  return n;
}

void LazyQueue::dump(std::ostream& out) const {
  auto line = [&](const SyncRequest& r, std::string_view state) {
    out << "seq=" << r.seq << "\tid=" << r.id << "\tstate=" << state
        << "\tclass=" << to_string(r.cls) << "\tapp_type=" << r.app_type << "\tkey=" << r.key
        << "\tbytes=" << r.payload.size << "\tsent=" << format_number(r.bytes_sent)
        << "\tpriority=" << r.priority << "\tenqueued_at=" << format_number(r.enqueued_at)
        << "\tattempts=" << r.attempts << '\n';
  };
  for (const auto& [seq, r] : pending_) line(r, in_progress_ == seq ? "sending" : "pending");
  for (const auto& [seq, r] : in_flight_) line(r, "awaiting_ack");
}

DrainResult drain_step(LazyQueue& queue, bool up, double kbps, SimTime now) {
  DrainResult result;
  SimTime cursor = queue.last_drain_;
  if (now > queue.last_drain_) queue.last_drain_ = now;
  if (!up || kbps <= 0.0) return result;

  const double rate = topology::bytes_per_second(kbps);
  constexpr double eps = 1e-9;
  while (true) {
    auto* h = queue.head();
    if (h == nullptr) break;
    const double need = std::max(0.0, h->remaining()) / rate;
    const double avail = std::max(0.0, now - cursor);
    if (need <= avail + eps) {
      cursor = std::min(now, cursor + need);
      result.bytes += std::max(0.0, h->remaining());
      h->bytes_sent = static_cast<double>(h->payload.size);
      const auto seq = h->seq;
      auto node = queue.pending_.extract(seq);
      queue.in_progress_.reset();
      result.completed.push_back(Transmitted{node.mapped(), cursor});
      queue.in_flight_.insert(std::move(node));
    } else {
      if (avail > 0.0) {
        h->bytes_sent += avail * rate;
        result.bytes += avail * rate;
        queue.in_progress_ = h->seq;
      }
      break;
    }
  }
  return result;
}

// --- cloud store -----------------------------------------------------------

const Record* CloudStore::find(std::string_view app_type, std::string_view key) const {
  auto it = records_.find(StoreKey{std::string(app_type), std::string(key)});
  return it == records_.end() ? nullptr : &it->second;
}

std::vector<std::pair<std::string, Record>> CloudStore::search(
    std::string_view app_type,
    const std::function<bool(std::string_view, const Record&)>& match) const {
  std::vector<std::pair<std::string, Record>> out;
  auto it = records_.lower_bound(StoreKey{std::string(app_type), std::string()});
  for (; it != records_.end() && it->first.first == app_type; ++it) {
    if (!match || match(it->first.second, it->second)) out.emplace_back(it->first.second, it->second);
  }
  return out;
}

std::uint64_t CloudStore::write(const StoreKey& key, std::string value) {
  auto& rec = records_[key];
  rec.value = std::move(value);
  return ++rec.version;
}

bool CloudStore::note_arrival(RequestId id) {
  const auto n = ++arrivals_[id];
  if (n > 1) ++duplicates_;
  return n == 1;
}

std::uint64_t CloudStore::arrivals(RequestId id) const {
  auto it = arrivals_.find(id);
  return it == arrivals_.end() ? 0 : it->second;
}

// --- service ---------------------------------------------------------------

namespace {
constexpr std::string_view kMailApp = "sf";
}

SyncService::SyncService(Engine& engine, topology::Topology& topo, SyncConfig config,
                         const identity::IdentityService* ids)
    : engine_(&engine), topo_(&topo), config_(std::move(config)), ids_(ids) {
  topo_->on_link_change([this](topology::LinkId l, topology::LinkState s) { handle_link_change(l, s); });
  on_apply(std::string(kMailApp), [this](const SyncRequest& req, SimTime) {
    auto it = outbox_.find(req.key);
    if (it == outbox_.end()) return;
    const auto& [msg, created] = it->second;
    mail_.emplace(msg.id, MailItem{msg, created, false, {}});
    mailbox_order_[msg.to].push_back(msg.id);
  });
}

SyncService::NodeState& SyncService::node_state(NodeId node) {
  auto it = nodes_.find(node);
  if (it == nodes_.end()) {
    it = nodes_.emplace(node, NodeState{LazyQueue(config_.queue), false, 0.0, 0.0, {}, 0, {}}).first;
    refresh_view(node, it->second);
  }
  return it->second;
}

const LazyQueue& SyncService::queue(NodeId node) { return node_state(node).queue; }

void SyncService::set_priority_enabled(bool on) {
  config_.queue.priority_enabled = on;
  for (auto& [id, st] : nodes_) st.queue.set_priority_enabled(on);
}

void SyncService::refresh_view(NodeId node, NodeState& st) {
  const auto path = topo_->path_to_cloud(node);
  st.up = path.has_value();
  st.kbps = path ? path->bottleneck_kbps : 0.0;
  st.latency_ms = path ? path->latency_ms : 0.0;
  st.path = path ? topo_->snapshot(*path) : topology::PathSnapshot{};
}

void SyncService::drain(NodeId node, NodeState& st) {
  auto result = drain_step(st.queue, st.up, st.kbps, engine_->now());
  for (auto& tx : result.completed) {
    const auto seq = tx.request.seq;
    st.snapshots[seq] = st.path;
    const SimTime arrive = tx.finished_at + st.latency_ms / 1000.0;
    engine_->schedule(
        arrive, EventKind::sync_tick,
        [this, node, req = std::move(tx.request), snap = st.path]() mutable {
          on_cloud_arrival(node, std::move(req), std::move(snap));
        },
        "slowput_arrive");
  }
}

void SyncService::reschedule(NodeId node, NodeState& st) {
  const auto token = ++st.drain_token;
  const auto dt = st.queue.time_to_next_completion(st.up, st.kbps);
  if (!dt) return;
  engine_->schedule_in(
      *dt, EventKind::sync_tick,
      [this, node, token] {
        auto& s = node_state(node);
        if (s.drain_token != token) return;
        drain(node, s);
        reschedule(node, s);
      },
      "drain");
}

void SyncService::handle_link_change(topology::LinkId, topology::LinkState state) {
  for (auto& [node, st] : nodes_) {
    drain(node, st);
    if (state == topology::LinkState::down) {
      resends_ += st.queue.requeue_if([&](const SyncRequest& r) {
        auto it = st.snapshots.find(r.seq);
        return it == st.snapshots.end() || !topo_->intact(it->second);
      });
      std::erase_if(st.snapshots, [&](const auto& kv) { return !st.queue.in_flight().contains(kv.first); });
    }
    refresh_view(node, st);
    reschedule(node, st);
  }
}

void SyncService::with_lock(const StoreKey& key, std::function<void()> critical) {
  if (store_.try_lock(key)) {
    critical();
  } else {
    lock_waiters_[key].push_back(std::move(critical));
  }
}

void SyncService::release(const StoreKey& key) {
  auto it = lock_waiters_.find(key);
  if (it == lock_waiters_.end() || it->second.empty()) {
    store_.unlock(key);
    if (it != lock_waiters_.end()) lock_waiters_.erase(it);
    return;
  }
  auto next = std::move(it->second.front());
  it->second.erase(it->second.begin());
  next();  // lock stays held by the next waiter
}

void SyncService::on_apply(std::string app_type, ApplyHook hook) {
  hooks_[std::move(app_type)].push_back(std::move(hook));
}

SlowputAck SyncService::slowput(NodeId origin, std::string identity, std::string app_type,
                                std::string key, Payload data) {
  SlowputAck ack;
  ack.acked_at = engine_->now();
  if (data.size == 0) {
    ack.error = SyncErrc::payload_empty;
    return ack;
  }
  auto& st = node_state(origin);
  drain(origin, st);

  SyncRequest req;
  req.id = next_id();
  req.origin = origin;
  req.identity = std::move(identity);
  req.app_type = std::move(app_type);
  req.key = key.empty() ? "req-" + std::to_string(req.id) : std::move(key);
  req.payload = std::move(data);
  req.cls = PrimitiveClass::slowput;
  req.enqueued_at = engine_->now();
  ack.id = req.id;
  const auto app = req.app_type;
  if (!st.queue.enqueue(std::move(req))) {
    ack.error = SyncErrc::queue_full;
    return ack;
  }
  calls_.push_back(PrimitiveCall{engine_->now(), origin, PrimitiveClass::slowput, app, ack.id});
  reschedule(origin, st);
  return ack;
}

void SyncService::on_cloud_arrival(NodeId origin, SyncRequest req, topology::PathSnapshot snap) {
  if (!topo_->intact(snap)) return;  // lost in an outage; requeued by the link handler
  const bool first = store_.note_arrival(req.id);
  StoreKey key{req.app_type, req.key};
  with_lock(key, [this, origin, key, first, req = std::move(req), snap = std::move(snap)]() mutable {
    engine_->schedule_in(
        config_.cloud_service_ms / 1000.0, EventKind::sync_tick,
        [this, origin, key, first, req = std::move(req), snap = std::move(snap)]() mutable {
          if (first) {
            store_.write(key, req.payload.data);
            applies_.push_back(ApplyRecord{engine_->now(), origin, req.id, req.seq, req.priority,
                                           req.app_type, req.key});
            if (auto h = hooks_.find(req.app_type); h != hooks_.end()) {
              for (const auto& hook : h->second) hook(req, engine_->now());
            }
          }
          release(key);
          const double back = node_state(origin).latency_ms / 1000.0;
          engine_->schedule_in(
              back, EventKind::sync_tick,
              [this, origin, req = std::move(req), snap = std::move(snap)] {
                if (!topo_->intact(snap)) return;
                auto& st = node_state(origin);
                if (!st.queue.acknowledge(req.seq)) return;
                st.snapshots.erase(req.seq);
                latency_.push_back(LatencyRecord{req.id, PrimitiveClass::slowput, req.app_type,
                                                 req.payload.size, req.enqueued_at, engine_->now()});
              },
              "slowput_ack");
        },
        "slowput_apply");
  });
}

void SyncService::finish_call(RequestId id, const FastgetResult* fg, const SearchResult* sr) {
  auto it = calls_pending_.find(id);
  if (it == calls_pending_.end() || it->second.done) return;
  Call call = std::move(it->second);
  calls_pending_.erase(it);
  const bool success = fg ? !fg->error.has_value() : !sr->error.has_value();
  if (success) {
    latency_.push_back(LatencyRecord{id, call.cls, call.app_type, call.bytes, call.issued_at,
                                     engine_->now()});
  }
  if (fg && call.fastget_done) call.fastget_done(*fg);
  if (sr && call.search_done) call.search_done(*sr);
}

RequestId SyncService::fastget(NodeId origin, std::string identity, std::string app_type,
                               std::string key, Payload data, FastgetOp op, FastgetCallback done) {
  (void)identity;
  const auto id = next_id();
  const auto now = engine_->now();
  calls_.push_back(PrimitiveCall{now, origin, PrimitiveClass::fastget, app_type, id});
  calls_pending_.emplace(id, Call{false, std::move(done), {}, now, PrimitiveClass::fastget, app_type,
                                  data.size});

  auto fail = [this, id, now](SyncErrc code) {
    FastgetResult r;
    r.id = id;
    r.error = code;
    r.issued_at = now;
    r.completed_at = engine_->now();
    finish_call(id, &r, nullptr);
  };

  const auto path = topo_->path_to_cloud(origin);
  if (!path) {
    engine_->schedule(now, EventKind::traffic, [fail] { fail(SyncErrc::backhaul_down); },
                      "fastget_refused");
    return id;
  }
  engine_->schedule_in(config_.fastget_timeout_s, EventKind::custom,
                       [fail] { fail(SyncErrc::timeout); }, "fastget_timeout");

  const double tx = static_cast<double>(data.size) / topology::bytes_per_second(path->bottleneck_kbps);
  const double one_way = path->latency_ms / 1000.0;
  StoreKey skey{std::move(app_type), std::move(key)};
  engine_->schedule_in(
      tx + one_way, EventKind::traffic,
      [this, id, origin, now, skey, op = std::move(op), snap = topo_->snapshot(*path)]() mutable {
        if (!topo_->intact(snap)) return;
        with_lock(skey, [this, id, origin, now, skey, op = std::move(op)]() mutable {
          engine_->schedule_in(
              config_.cloud_service_ms / 1000.0, EventKind::traffic,
              [this, id, origin, now, skey, op = std::move(op)] {
                const Record* cur = store_.find(skey.first, skey.second);
                FastgetApply applied = op(cur);
                std::uint64_t version = cur ? cur->version : 0;
                if (applied.write) version = store_.write(skey, std::move(*applied.write));
                release(skey);

                const auto back = topo_->path_to_cloud(origin);
                if (!back) return;
                FastgetResult r;
                r.id = id;
                r.ok = applied.ok;
                r.response = std::move(applied.response);
                r.version = version;
                r.issued_at = now;
                engine_->schedule_in(
                    back->latency_ms / 1000.0, EventKind::traffic,
                    [this, r = std::move(r), snap = topo_->snapshot(*back)]() mutable {
                      if (!topo_->intact(snap)) return;
                      r.completed_at = engine_->now();
                      finish_call(r.id, &r, nullptr);
                    },
                    "fastget_response");
              },
              "fastget_apply");
        });
      },
      "fastget_arrive");
  return id;
}

RequestId SyncService::fastsearch(NodeId origin, std::string identity, std::string app_type,
                                  Payload query, SearchMatch match, SearchCallback done) {
  (void)identity;
  const auto id = next_id();
  const auto now = engine_->now();
  calls_.push_back(PrimitiveCall{now, origin, PrimitiveClass::fastsearch, app_type, id});
  calls_pending_.emplace(id, Call{false, {}, std::move(done), now, PrimitiveClass::fastsearch,
                                  app_type, query.size});

  auto fail = [this, id, now](SyncErrc code) {
    SearchResult r;
    r.id = id;
    r.error = code;
    r.issued_at = now;
    r.completed_at = engine_->now();
    finish_call(id, nullptr, &r);
  };

  const auto path = topo_->path_to_cloud(origin);
  if (!path) {
    engine_->schedule(now, EventKind::traffic, [fail] { fail(SyncErrc::backhaul_down); },
                      "fastsearch_refused");
    return id;
  }
  engine_->schedule_in(config_.fastget_timeout_s, EventKind::custom,
                       [fail] { fail(SyncErrc::timeout); }, "fastsearch_timeout");

  const double tx = static_cast<double>(query.size) / topology::bytes_per_second(path->bottleneck_kbps);
  engine_->schedule_in(
      tx + path->latency_ms / 1000.0, EventKind::traffic,
      [this, id, origin, now, app = std::move(app_type), match = std::move(match),
       snap = topo_->snapshot(*path)] {
        if (!topo_->intact(snap)) return;
        // Reads take no lock: committed versions only.
        engine_->schedule_in(
            config_.cloud_service_ms / 1000.0, EventKind::traffic,
            [this, id, origin, now, app, match] {
              SearchResult r;
              r.id = id;
              r.issued_at = now;
              r.records = store_.search(app, match);
              const auto back = topo_->path_to_cloud(origin);
              if (!back) return;
              engine_->schedule_in(
                  back->latency_ms / 1000.0, EventKind::traffic,
                  [this, r = std::move(r), snap = topo_->snapshot(*back)]() mutable {
                    if (!topo_->intact(snap)) return;
                    r.completed_at = engine_->now();
                    finish_call(r.id, nullptr, &r);
                  },
                  "fastsearch_response");
            },
            "fastsearch_read");
      },
      "fastsearch_arrive");
  return id;
}

// --- store and forward -----------------------------------------------------

void SyncService::store_and_forward(NodeId origin, Message msg, ReceiptCallback receipt) {
  if (ids_ == nullptr) throw std::logic_error("store_and_forward needs an identity service");
  if (msg.id.empty()) msg.id = "msg-" + std::to_string(next_id());
  const auto now = engine_->now();

  const auto where = ids_->location(msg.to);
  if (where && *where == origin && ids_->cache(origin).pre_registered(msg.to)) {
    MailItem item{std::move(msg), now, false, std::move(receipt)};
    deliver(origin, item, true);
    return;
  }

  if (receipt) pending_receipts_.emplace(msg.id, std::move(receipt));
  std::string wire = msg.from + '\n' + msg.to + '\n' + msg.body.data;
  const auto size = std::max<std::uint64_t>(msg.body.size, 1) + msg.from.size() + msg.to.size() + 2;
  const auto id = msg.id;
  const auto from = msg.from;
  outbox_.insert_or_assign(id, std::make_pair(std::move(msg), now));
  slowput(origin, from, std::string(kMailApp), id, Payload::synthetic(std::move(wire), size));
}

void SyncService::deliver(NodeId node, MailItem& item, bool local) {
  auto& count = delivered_[item.msg.id];
  ++count;
  if (count > 1) {
    ++delivery_dups_;
    return;
  }
  DeliveryReceipt r{item.msg.id, DeliveryReceipt::Status::delivered, engine_->now(), node, local};
  if (item.receipt) {
    item.receipt(r);
  } else if (auto it = pending_receipts_.find(item.msg.id); it != pending_receipts_.end()) {
    auto cb = std::move(it->second);
    pending_receipts_.erase(it);
    if (cb) cb(r);
  }
}

std::uint64_t SyncService::delivery_count(std::string_view message_id) const {
  auto it = delivered_.find(message_id);
  return it == delivered_.end() ? 0 : std::min<std::uint64_t>(it->second, 1);
}

std::size_t SyncService::mailbox_size() const { return mail_.size(); }

std::uint64_t SyncService::slowputs_outstanding() const {
  std::uint64_t n = 0;
  for (const auto& [node, st] : nodes_) n += st.queue.size() + st.queue.in_flight().size();
  return n;
}

void SyncService::start() {
  if (started_) return;
  started_ = true;
  for (const auto& n : topo_->nodes()) {
    if (n.role == topology::Role::cloud) continue;
    schedule_sync(n.id);
  }
}

void SyncService::schedule_sync(NodeId node) {
  engine_->schedule_in(
      config_.sync_interval_s, EventKind::sync_tick,
      [this, node] {
        sync_node(node);
        schedule_sync(node);
      },
      "node_sync");
}

void SyncService::sync_node(NodeId node) {
  if (ids_ == nullptr) return;
  const auto path = topo_->path_to_cloud(node);
  if (!path) return;
  const auto* zone = topo_->zone_of(node);
  if (zone == nullptr) return;
  const auto now = engine_->now();
  const double rate = topology::bytes_per_second(path->bottleneck_kbps);

  for (auto& [dest, ids] : mailbox_order_) {
    const auto* b = ids_->binding(dest);
    if (b == nullptr || b->address.zone != zone->id) continue;
    const auto where = ids_->location(dest);
    if (!where || *where != node) continue;

    std::vector<std::string> expired;
    for (const auto& msg_id : ids) {
      auto it = mail_.find(msg_id);
      if (it == mail_.end() || it->second.in_flight) continue;
      auto& item = it->second;
      const auto ttl = item.msg.ttl_s ? item.msg.ttl_s : config_.message_ttl_s;
      if (ttl && now - item.created_at > *ttl) {
        expired.push_back(msg_id);
        continue;
      }
      item.in_flight = true;
      const double arrive = path->latency_ms / 1000.0 + static_cast<double>(item.msg.body.size) / rate;
      engine_->schedule_in(
          arrive, EventKind::sync_tick,
          [this, node, msg_id, snap = topo_->snapshot(*path), back = path->latency_ms / 1000.0] {
            auto it = mail_.find(msg_id);
            if (it == mail_.end()) return;
            auto& item = it->second;
            const auto here = ids_->location(item.msg.to);
            if (!topo_->intact(snap) || !here || *here != node) {
              item.in_flight = false;
              return;
            }
            deliver(node, item, false);
            engine_->schedule_in(
                back, EventKind::sync_tick,
                [this, msg_id, snap] {
                  auto it = mail_.find(msg_id);
                  if (it == mail_.end()) return;
                  if (!topo_->intact(snap)) {
                    it->second.in_flight = false;
                    return;
                  }
                  const auto to = it->second.msg.to;
                  mail_.erase(it);
                  auto& order = mailbox_order_[to];
                  std::erase(order, msg_id);
                },
                "mail_ack");
          },
          "mail_deliver");
    }
    for (const auto& msg_id : expired) {
      auto it = mail_.find(msg_id);
      ++expired_;
      DeliveryReceipt r{msg_id, DeliveryReceipt::Status::expired, now, node, false};
      if (auto pr = pending_receipts_.find(msg_id); pr != pending_receipts_.end()) {
        auto cb = std::move(pr->second);
        pending_receipts_.erase(pr);
        if (cb) cb(r);
      }
      mail_.erase(it);
      std::erase(ids, msg_id);
    }
  }
}

// --- output ----------------------------------------------------------------

void SyncService::write_latency_csv(std::ostream& out) const {
  out << "request_id,class,app_type,bytes,enqueued_at,delivered_at\n";
  auto rows = latency_;
  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  for (const auto& r : rows) {
    out << r.id << ',' << to_string(r.cls) << ',' << r.app_type << ',' << r.bytes << ','
        << format_number(r.enqueued_at) << ',' << format_number(r.delivered_at) << '\n';
  }
}

void SyncService::dump_queues(std::ostream& out) {
  for (const auto& n : topo_->nodes()) {
    if (n.role == topology::Role::cloud) continue;
    auto& st = node_state(n.id);
    drain(n.id, st);
    out << "# node=" << n.id.value << " name=" << n.name << " pending=" << st.queue.size()
        << " awaiting_ack=" << st.queue.in_flight().size() << '\n';
    st.queue.dump(out);
  }
}

}  // namespace greenlinks::sync
