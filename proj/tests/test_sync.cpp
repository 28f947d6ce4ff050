#include <map>
#include <random>
#include <set>
#include <sstream>

#include "doctest.h"
#include "greenlinks/sync.hpp"

using namespace greenlinks;
using namespace greenlinks::sync;
using topology::LinkState;
using topology::NodeId;

namespace {

constexpr double kEdgeRate = 200.0 * 1024 / 8;  // bytes per second

SyncRequest request(std::string app, std::uint64_t bytes) {
  SyncRequest r;
  r.app_type = std::move(app);
  r.payload = Payload::synthetic({}, bytes);
  return r;
}

void set_backhaul(topology::Topology& t, NodeId n, LinkState s) {
  for (const auto& l : t.links()) {
    if (l.touches(n) && l.touches(t.cloud())) t.set_link_state(l.id, s);
  }
}

struct World {
  Engine engine;
  topology::Topology topo = topology::build_topology(topology::three_node_deployment());
  identity::IdentityService ids{topo, {}};
  SyncService sync;

  explicit World(SyncConfig cfg = {}) : sync(engine, topo, std::move(cfg), &ids) {}
};

}  // namespace

TEST_CASE("drain_step: 1 MB on edge takes about 41 s") {
  LazyQueue q;
  q.enqueue(request("file", 1 << 20));
  auto r = drain_step(q, true, 200.0, 40.0);
  CHECK(r.completed.empty());
  CHECK(r.bytes == doctest::Approx(40.0 * kEdgeRate));
  r = drain_step(q, true, 200.0, 50.0);
  REQUIRE(r.completed.size() == 1);
  CHECK(r.completed[0].finished_at == doctest::Approx((1 << 20) / kEdgeRate));
  CHECK(r.completed[0].finished_at == doctest::Approx(40.96));
  CHECK(q.empty());
  CHECK(q.in_flight().size() == 1);
}

TEST_CASE("drain_step: link down moves nothing") {
  LazyQueue q;
  q.enqueue(request("sms", 140));
  auto r = drain_step(q, false, 200.0, 100.0);
  CHECK(r.bytes == 0.0);
  CHECK(r.completed.empty());
  CHECK(q.size() == 1);
  CHECK(q.last_drain_at() == 100.0);
}

TEST_CASE("drain_step: partial transfer resumes after an outage") {
  LazyQueue q;
  q.enqueue(request("file", 100000));
  drain_step(q, true, 200.0, 2.0);
  const double sent = q.head()->bytes_sent;
  CHECK(sent == doctest::Approx(2 * kEdgeRate));
  drain_step(q, false, 200.0, 500.0);
  CHECK(q.head()->bytes_sent == sent);
  auto r = drain_step(q, true, 200.0, 510.0);
  REQUIRE(r.completed.size() == 1);
  CHECK(r.completed[0].finished_at == doctest::Approx(500.0 + (100000 - sent) / kEdgeRate));
}

TEST_CASE("common FIFO keeps sms behind a file") {
  LazyQueue q;
  q.enqueue(request("file", 1 << 20));
  for (int i = 0; i < 10; ++i) q.enqueue(request("sms", 140));
  auto r = drain_step(q, true, 200.0, 1000.0);
  REQUIRE(r.completed.size() == 11);
  CHECK(r.completed[0].request.app_type == "file");
  for (int i = 1; i <= 10; ++i) {
    CHECK(r.completed[i].finished_at ==
          doctest::Approx(((1 << 20) + 140.0 * i) / kEdgeRate));
  }
}

TEST_CASE("priority preempts only at request boundaries") {
  QueuePolicy p;
  p.priority_enabled = true;
  LazyQueue q(p);
  q.enqueue(request("file", 2 * 25600));
  q.enqueue(request("file", 25600));
  drain_step(q, true, 200.0, 0.5);  // first file half way
  q.enqueue(request("sms", 140));
  auto r = drain_step(q, true, 200.0, 10.0);
  REQUIRE(r.completed.size() == 3);
  CHECK(r.completed[0].request.seq == 0);  // not cut mid-payload
  CHECK(r.completed[1].request.app_type == "sms");
  CHECK(r.completed[1].finished_at == doctest::Approx(2.0 + 140 / kEdgeRate));
  CHECK(r.completed[2].request.seq == 1);
}

TEST_CASE("queue bound and requeue") {
  QueuePolicy p;
  p.max_pending = 2;
  LazyQueue q(p);
  CHECK(q.enqueue(request("a", 10)));
  CHECK(q.enqueue(request("b", 10)));
  CHECK_FALSE(q.enqueue(request("c", 10)));
  drain_step(q, true, 200.0, 1.0);
  CHECK(q.in_flight().size() == 2);
  CHECK(q.requeue_if([](const SyncRequest& r) { return r.seq == 0; }) == 1);
  CHECK(q.size() == 1);
  CHECK(q.head()->attempts == 1);
  CHECK(q.acknowledge(1));
  CHECK_FALSE(q.acknowledge(1));
}

TEST_CASE("slowput sms on an idle edge link") {
  World w;
  auto ack = w.sync.slowput(NodeId{1}, "ama", "sms", "m1", Payload::of(std::string(140, 'x')));
  CHECK_FALSE(ack.error);
  CHECK(ack.acked_at == 0.0);
  w.engine.run_until(10.0);
  REQUIRE(w.sync.apply_log().size() == 1);
  // tx + one way + service
  CHECK(w.sync.apply_log()[0].at == doctest::Approx(140 / kEdgeRate + 0.3 + 0.01));
  REQUIRE(w.sync.latency_log().size() == 1);
  CHECK(w.sync.latency_log()[0].delivered_at == doctest::Approx(140 / kEdgeRate + 0.61));
  CHECK(w.sync.store().find("sms", "m1")->value == std::string(140, 'x'));
  CHECK(w.sync.slowput(NodeId{1}, "ama", "sms", "m2", Payload{}).error == SyncErrc::payload_empty);
}

TEST_CASE("slowput during an outage acks now and delivers in order after restore") {
  World w;
  set_backhaul(w.topo, NodeId{1}, LinkState::down);
  for (int i = 0; i < 5; ++i) {
    auto ack = w.sync.slowput(NodeId{1}, "ama", "sms", "k" + std::to_string(i),
                              Payload::of("hello " + std::to_string(i)));
    CHECK_FALSE(ack.error);
  }
  w.engine.run_until(100.0);
  CHECK(w.sync.apply_log().empty());
  w.engine.schedule(100.0, EventKind::link_restore,
                    [&] { set_backhaul(w.topo, NodeId{1}, LinkState::up); });
  w.engine.run_until(200.0);
  REQUIRE(w.sync.apply_log().size() == 5);
  for (std::size_t i = 0; i < 5; ++i) CHECK(w.sync.apply_log()[i].seq == i);
  CHECK(w.sync.apply_log()[0].at > 100.0);
  CHECK(w.sync.slowputs_outstanding() == 0);
}

TEST_CASE("fastget round trip, refusal and serialization") {
  World w;
  auto incr = [](const Record* cur) {
    const int v = cur ? std::stoi(cur->value) : 0;
    return FastgetApply{std::to_string(v + 1), std::to_string(v + 1), true};
  };
  std::vector<FastgetResult> got;
  auto keep = [&](const FastgetResult& r) { got.push_back(r); };

  w.sync.fastget(NodeId{2}, "joe", "counter", "c", Payload::of("x"), incr, keep);
  w.sync.fastget(NodeId{3}, "amal", "counter", "c", Payload::of("x"), incr, keep);
  w.engine.run_until(5.0);
  REQUIRE(got.size() == 2);
  CHECK(w.sync.store().find("counter", "c")->version == 2);
  CHECK(w.sync.store().find("counter", "c")->value == "2");
  std::set<std::string> responses{got[0].response, got[1].response};
  CHECK(responses == std::set<std::string>{"1", "2"});
  // Ethernet: 1 byte tx + 2 x 5 ms + 10 ms service.
  CHECK(got[0].completed_at - got[0].issued_at ==
        doctest::Approx(1 / (100000.0 * 128) + 0.02));

  set_backhaul(w.topo, NodeId{1}, LinkState::down);
  got.clear();
  w.sync.fastget(NodeId{1}, "ama", "counter", "c", Payload::of("x"), incr, keep);
  w.engine.run_until(10.0);
  REQUIRE(got.size() == 1);
  CHECK(got[0].error == SyncErrc::backhaul_down);
  CHECK(w.sync.store().find("counter", "c")->version == 2);
}

TEST_CASE("fastget times out when the response leg dies") {
  World w;
  std::optional<FastgetResult> got;
  w.sync.fastget(NodeId{1}, "ama", "t", "k", Payload::of("x"),
                 [](const Record*) { return FastgetApply{"v", "ok", true}; },
                 [&](const FastgetResult& r) { got = r; });
  w.engine.schedule(0.32, EventKind::link_fail,
                    [&] { set_backhaul(w.topo, NodeId{1}, LinkState::down); });
  w.engine.run_until(100.0);
  REQUIRE(got);
  CHECK(got->error == SyncErrc::timeout);
  CHECK(got->completed_at == doctest::Approx(30.0));
}

TEST_CASE("fastsearch is not blocked by a write lock on another key") {
  World w;
  w.sync.store().write({"market", "a"}, "maize 1");
  w.sync.store().write({"market", "b"}, "maize 2");
  w.sync.store().write({"market", "c"}, "yam 3");
  w.sync.store().write({"market", "d"}, "maize 4");

  std::optional<SearchResult> found;
  auto maize = [](std::string_view, const Record& r) { return r.value.starts_with("maize"); };
  // Node 2 is on ethernet: the write on "b" holds its lock from 5 ms to 15 ms.
  w.sync.fastget(NodeId{2}, "joe", "market", "b", Payload::of("x"),
                 [](const Record*) { return FastgetApply{"maize 2 sold", "ok", true}; }, {});
  w.sync.fastsearch(NodeId{1}, "kofi", "market", Payload::of("maize"), maize,
                    [&](const SearchResult& r) { found = r; });
  w.engine.run_until(0.010);
  CHECK(w.sync.store().locked({"market", "b"}));
  w.engine.run_until(2.0);
  REQUIRE(found);
  REQUIRE(found->records.size() == 3);
  CHECK(found->records[1].second.value == "maize 2 sold");

  found.reset();
  w.sync.fastsearch(NodeId{2}, "kofi", "market", Payload::of("rice"),
                    [](std::string_view, const Record& r) { return r.value.starts_with("rice"); },
                    [&](const SearchResult& r) { found = r; });
  w.engine.run_until(3.0);
  REQUIRE(found);
  CHECK_FALSE(found->error);
  CHECK(found->records.empty());
}

TEST_CASE("fastsearch reads the committed version of a locked key") {
  SyncConfig cfg;
  cfg.cloud_service_ms = 100;
  World w(cfg);
  w.sync.store().write({"market", "a"}, "v1");
  auto put = [](std::string v) {
    return [v](const Record*) { return FastgetApply{v, "ok", true}; };
  };
  // Two writes from node 3 (hsdpa, 100 ms): the first commits v2 at ~0.2 s,
  // the second then holds the lock until ~0.3 s.
  w.sync.fastget(NodeId{3}, "amal", "market", "a", Payload::of("x"), put("v2"), {});
  w.sync.fastget(NodeId{3}, "amal", "market", "a", Payload::of("x"), put("v3"), {});
  std::optional<SearchResult> found;
  bool locked_at_read = false;
  // From node 2 at 0.12 s: arrives 0.125 s, reads 0.225 s.
  w.engine.schedule(0.12, EventKind::traffic, [&] {
    w.sync.fastsearch(NodeId{2}, "kofi", "market", Payload::of("a"), {},
                      [&](const SearchResult& r) { found = r; });
  });
  w.engine.schedule(0.225, EventKind::custom,
                    [&] { locked_at_read = w.sync.store().locked({"market", "a"}); });
  w.engine.run_until(1.0);
  CHECK(locked_at_read);
  REQUIRE(found);
  REQUIRE(found->records.size() == 1);
  CHECK(found->records[0].second.value == "v2");
  CHECK(found->records[0].second.version == 2);
  CHECK(w.sync.store().find("market", "a")->version == 3);
}

TEST_CASE("store and forward") {
  World w;
  auto& ids = w.ids;
  ids.issue_identity(NodeId{1}, "620000000000001", identity::IdentityKind::local, "ama", 0);
  ids.issue_identity(NodeId{1}, "620000000000002", identity::IdentityKind::local, "yaw", 0);
  ids.issue_identity(NodeId{2}, "620000000000003", identity::IdentityKind::local, "joe", 0);

  SUBCASE("local short circuit") {
    std::optional<DeliveryReceipt> rcpt;
    w.sync.store_and_forward(NodeId{1}, Message{"m1", "ama", "yaw", Payload::of("hi"), {}},
                             [&](const DeliveryReceipt& r) { rcpt = r; });
    REQUIRE(rcpt);
    CHECK(rcpt->local);
    CHECK(w.sync.call_log().empty());
    CHECK(w.sync.delivery_count("m1") == 1);
  }

  SUBCASE("remote delivery waits for the destination's sync") {
    w.sync.start();
    std::optional<DeliveryReceipt> rcpt;
    w.sync.store_and_forward(NodeId{1}, Message{"m2", "ama", "joe", Payload::of("voice"), {}},
                             [&](const DeliveryReceipt& r) { rcpt = r; });
    w.engine.run_until(29.0);
    CHECK_FALSE(rcpt);
    w.engine.run_until(31.0);
    REQUIRE(rcpt);
    CHECK(rcpt->node == NodeId{2});
    CHECK_FALSE(rcpt->local);
    w.engine.run_until(100.0);
    CHECK(w.sync.mailbox_size() == 0);
    CHECK(w.sync.delivery_count("m2") == 1);
  }

  SUBCASE("offline recipient gets it after their node reconnects") {
    w.sync.start();
    set_backhaul(w.topo, NodeId{2}, LinkState::down);
    std::optional<DeliveryReceipt> rcpt;
    w.sync.store_and_forward(NodeId{1}, Message{"m3", "ama", "joe", Payload::of("voice"), {}},
                             [&](const DeliveryReceipt& r) { rcpt = r; });
    w.engine.run_until(300.0);
    CHECK_FALSE(rcpt);
    CHECK(w.sync.mailbox_size() == 1);
    set_backhaul(w.topo, NodeId{2}, LinkState::up);
    w.engine.run_until(340.0);
    REQUIRE(rcpt);
  }

  SUBCASE("ttl expiry") {
    w.sync.start();
    set_backhaul(w.topo, NodeId{2}, LinkState::down);
    std::optional<DeliveryReceipt> rcpt;
    w.sync.store_and_forward(NodeId{1}, Message{"m4", "ama", "joe", Payload::of("late"), 60.0},
                             [&](const DeliveryReceipt& r) { rcpt = r; });
    w.engine.run_until(100.0);
    set_backhaul(w.topo, NodeId{2}, LinkState::up);
    w.engine.run_until(200.0);
    REQUIRE(rcpt);
    CHECK(rcpt->status == DeliveryReceipt::Status::expired);
    CHECK(w.sync.expired_messages() == 1);
    CHECK(w.sync.delivery_count("m4") == 0);
  }
}

TEST_CASE("exactly once and per-origin order under random faults") {
  std::uint64_t resent = 0;
  for (int seed = 0; seed < 40; ++seed) {
    std::mt19937 rng(seed);
    World w;
    for (int i = 0; i < 3; ++i) {
      w.ids.issue_identity(NodeId{1 + static_cast<std::uint32_t>(i)},
                           "62000000000000" + std::to_string(i), identity::IdentityKind::local,
                           "u" + std::to_string(i), 0);
    }
    w.sync.start();
    int puts = 0;
    std::vector<std::string> msgs;
    for (int i = 0; i < 60; ++i) {
      const double at = std::uniform_real_distribution<double>(0, 600)(rng);
      const auto n = 1 + static_cast<std::uint32_t>(rng() % 3);
      const auto bytes = rng() % 2 ? 140 : 20000 + rng() % 50000;
      if (rng() % 4 == 0) {
        auto id = "msg" + std::to_string(i);
        msgs.push_back(id);
        const auto to = "u" + std::to_string(rng() % 3);
        w.engine.schedule(at, EventKind::traffic, [&w, n, id, to] {
          w.sync.store_and_forward(NodeId{n}, Message{id, "u", to, Payload::of("m"), {}});
        });
      } else {
        ++puts;
        w.engine.schedule(at, EventKind::traffic, [&w, n, i, bytes] {
          w.sync.slowput(NodeId{n}, "u", "data", "k" + std::to_string(i),
                         Payload::synthetic("d", bytes));
        });
      }
    }
    for (int f = 0; f < 20; ++f) {
      const double at = std::uniform_real_distribution<double>(0, 700)(rng);
      const auto& l = w.topo.links()[rng() % w.topo.links().size()];
      const double dur = std::uniform_real_distribution<double>(0.1, 60)(rng);
      const auto id = l.id;
      w.engine.schedule(at, EventKind::link_fail, [&w, id] { w.topo.set_link_state(id, LinkState::down); });
      w.engine.schedule(at + dur, EventKind::link_restore,
                        [&w, id] { w.topo.set_link_state(id, LinkState::up); });
    }
    w.engine.run_until(5000.0);

    std::map<std::uint64_t, int> applied;
    std::map<std::uint32_t, std::uint64_t> last_seq;
    for (const auto& a : w.sync.apply_log()) {
      ++applied[a.id];
      auto [it, fresh] = last_seq.try_emplace(a.origin.value, a.seq);
      if (!fresh) {
        CHECK(a.seq > it->second);
        it->second = a.seq;
      }
    }
    const auto slowputs = std::count_if(w.sync.call_log().begin(), w.sync.call_log().end(),
                                        [](const PrimitiveCall& c) { return c.cls == PrimitiveClass::slowput; });
    CHECK(slowputs >= puts);
    CHECK(applied.size() == static_cast<std::size_t>(slowputs));
    for (const auto& [id, n] : applied) CHECK(n == 1);
    for (const auto& m : msgs) CHECK(w.sync.delivery_count(m) == 1);
    CHECK(w.sync.delivery_duplicates() == 0);
    CHECK(w.sync.slowputs_outstanding() == 0);
    resent += w.sync.resends();
  }
  CHECK(resent > 0);  // the schedules really did lose data in flight
}

TEST_CASE("queue dump and latency csv") {
  World w;
  set_backhaul(w.topo, NodeId{1}, LinkState::down);
  w.sync.slowput(NodeId{1}, "ama", "sms", "k", Payload::of("hello"));
  std::ostringstream dump;
  w.sync.dump_queues(dump);
  CHECK(dump.str().find("state=pending") != std::string::npos);
  set_backhaul(w.topo, NodeId{1}, LinkState::up);
  w.engine.run_until(10);
  std::ostringstream csv;
  w.sync.write_latency_csv(csv);
  CHECK(csv.str().starts_with("request_id,class,app_type,bytes,enqueued_at,delivered_at\n1,slowput,sms,5,0,"));
}
