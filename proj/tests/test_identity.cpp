#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "doctest.h"
#include "greenlinks/identity.hpp"

using namespace greenlinks;
using namespace greenlinks::identity;
using topology::LinkState;
using topology::NodeId;

namespace {

// Exhaustive argmin over members; ties to the smaller id.
ServerId brute_resolver(const std::vector<ServerId>& members, std::uint32_t seed,
                        std::string_view name) {
  const auto h = ring_hash(name, seed);
  ServerId best = members.front();
  std::uint64_t best_d = UINT64_MAX;
  for (auto m : members) {
    const auto hm = ring_hash("cloud-" + std::to_string(m), seed);
    const std::uint64_t d = static_cast<std::uint32_t>(hm - h);
    if (d < best_d || (d == best_d && m < best)) {
      best = m;
      best_d = d;
    }
  }
  return best;
}

std::string imsi(int i) {
  auto s = std::to_string(i);
  return "620" + std::string(12 - s.size(), '0') + s;
}

void cut_backhaul(topology::Topology& t, NodeId n) {
  for (const auto& l : t.links()) {
    if (l.touches(n) && l.touches(t.cloud())) t.set_link_state(l.id, LinkState::down);
  }
}

void restore_all(topology::Topology& t) {
  for (const auto& l : t.links()) t.set_link_state(l.id, LinkState::up);
}

}  // namespace

TEST_CASE("ring distance wraps clockwise") {
  CHECK(ring_distance(10, 15) == 5u);
  CHECK(ring_distance(15, 10) == 0xFFFFFFFBu);
  CHECK(ring_distance(7, 7) == 0u);
}

TEST_CASE("resolver matches brute force") {
  std::mt19937 rng(42);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<ServerId> members;
    const auto n = 1 + rng() % 16;
    for (std::uint32_t i = 0; i < n; ++i) members.push_back(rng() % 64);
    const auto seed = static_cast<std::uint32_t>(rng());
    ResolverRing ring(members, seed);
    std::sort(members.begin(), members.end());
    members.erase(std::unique(members.begin(), members.end()), members.end());
    const auto name = "user-" + std::to_string(rng());
    CHECK(resolver_for(ring, name) == brute_resolver(members, seed, name));
  }
}

TEST_CASE("resolver degenerate cases") {
  CHECK_THROWS_AS(ResolverRing({}), IdentityError);
  ResolverRing one({5});
  CHECK(resolver_for(one, "anyone") == 5u);

  // An identity hashing exactly onto a member resolves to it.
  ResolverRing ring({1, 2, 3, 4}, 9);
  for (ServerId m : ring.members()) {
    CHECK(resolver_for(ring, "cloud-" + std::to_string(m)) == m);
  }
}

TEST_CASE("ring hash is uniform under chi-square") {
  constexpr int buckets = 16;
  constexpr int n = 16000;
  std::vector<int> counts(buckets);
  for (int i = 0; i < n; ++i) ++counts[ring_hash("id-" + std::to_string(i), 0) >> 28];
  double chi = 0;
  const double expect = static_cast<double>(n) / buckets;
  for (int c : counts) chi += (c - expect) * (c - expect) / expect;
  CHECK(chi < 37.70);  // chi-square 15 dof at p = 0.001
}

TEST_CASE("issue, re-request and duplicates") {
  auto topo = topology::build_topology(topology::three_node_deployment());
  IdentityService ids(topo, {});
  auto a = ids.issue_identity(NodeId{1}, imsi(1), IdentityKind::local, "kofi", 0.0);
  REQUIRE(a.identity);
  CHECK(a.created);
  CHECK(a.identity->name == "kofi");
  CHECK(ids.cache(NodeId{1}).pre_registered("kofi"));
  // Edge backhaul: 2 x 300 ms + 10 ms service.
  CHECK(a.latency_s == doctest::Approx(0.61));

  auto again = ids.issue_identity(NodeId{2}, imsi(1), IdentityKind::local, std::nullopt, 1.0);
  REQUIRE(again.identity);
  CHECK_FALSE(again.created);
  CHECK(ids.registry().size() == 1);
  CHECK(ids.binding("kofi")->address.node == NodeId{2});

  auto dup = ids.issue_identity(NodeId{2}, imsi(2), IdentityKind::local, "kofi", 2.0);
  CHECK(dup.error == IdentityErrc::duplicate_name);
  CHECK(ids.issue_identity(NodeId{2}, "123", IdentityKind::local, {}, 0).error ==
        IdentityErrc::invalid_imsi);

  auto g = ids.issue_identity(NodeId{3}, imsi(3), IdentityKind::global, "amal", 3.0);
  REQUIRE(g.identity);
  CHECK(g.identity->external_number == "+15557000000");
}

TEST_CASE("external allocation can run dry") {
  auto topo = topology::build_topology(topology::three_node_deployment());
  IdentityConfig cfg;
  cfg.egress_count = 1;
  IdentityService ids(topo, cfg);
  CHECK(ids.issue_identity(NodeId{1}, imsi(1), IdentityKind::global, {}, 0).identity);
  CHECK(ids.issue_identity(NodeId{1}, imsi(2), IdentityKind::global, {}, 0).error ==
        IdentityErrc::external_alloc_failed);
}

TEST_CASE("issuance during outage queues and completes after restore") {
  auto topo = topology::build_topology(topology::three_node_deployment());
  IdentityService ids(topo, {});
  cut_backhaul(topo, NodeId{1});
  auto r = ids.issue_identity(NodeId{1}, imsi(9), IdentityKind::local, {}, 0.0);
  CHECK(r.error == IdentityErrc::backhaul_down);
  CHECK(r.queued);
  CHECK(ids.retry_pending(1.0).empty());
  restore_all(topo);
  CHECK(ids.retry_pending(2.0) == std::vector<std::string>{imsi(9)});
  CHECK(ids.pending() == 0);
  CHECK(ids.binding(imsi(9)) != nullptr);
}

TEST_CASE("lookup stages") {
  auto topo = topology::build_topology(topology::three_node_deployment());
  IdentityService ids(topo, {});
  ids.issue_identity(NodeId{1}, imsi(1), IdentityKind::local, "ama", 0);
  ids.issue_identity(NodeId{1}, imsi(2), IdentityKind::local, "yaw", 0);
  ids.issue_identity(NodeId{2}, imsi(3), IdentityKind::local, "joe", 0);

  const auto before = ids.backhaul_messages();
  auto local = ids.lookup(NodeId{1}, "yaw", 1);
  CHECK(local.stage == LookupStage::intra_zone);
  CHECK(local.backhaul_messages == 0);
  CHECK(ids.backhaul_messages() == before);

  auto remote = ids.lookup(NodeId{1}, "joe", 1);
  CHECK(remote.stage == LookupStage::inter_zone);
  CHECK(remote.address->node == NodeId{2});
  CHECK(remote.latency_s == doctest::Approx(2 * 0.300));

  auto ext = ids.lookup(NodeId{1}, "+233201234567", 1);
  CHECK(ext.status == LookupResult::Status::external_route);
  CHECK(ids.lookup(NodeId{1}, "nobody", 1).status == LookupResult::Status::not_found);

  cut_backhaul(topo, NodeId{1});
  CHECK(ids.lookup(NodeId{1}, "yaw", 2).stage == LookupStage::intra_zone);
  CHECK(ids.lookup(NodeId{1}, "joe", 2).status == LookupResult::Status::cloud_unreachable);
}

TEST_CASE("migration") {
  auto topo = topology::build_topology(topology::generate_tree(2, 4));
  IdentityService ids(topo, {});
  ids.issue_identity(NodeId{3}, imsi(1), IdentityKind::local, "esi", 0);
  CHECK(ids.migrate_user("ghost", NodeId{3}, 0).error == IdentityErrc::unknown_identity);

  // Nodes 3 and 5 share gateway 1's zone.
  auto local = ids.migrate_user("esi", NodeId{5}, 1);
  CHECK_FALSE(local.error);
  CHECK_FALSE(local.cloud_round_trip);
  CHECK(ids.location("esi") == NodeId{5});
  CHECK(ids.lookup(NodeId{1}, "esi", 1).address->node == NodeId{5});

  auto cross = ids.migrate_user("esi", NodeId{4}, 2);
  CHECK(cross.cloud_round_trip);
  CHECK(ids.binding("esi")->address.zone == "z1");

  cut_backhaul(topo, NodeId{1});
  auto queued = ids.migrate_user("esi", NodeId{3}, 3);
  CHECK(queued.error == IdentityErrc::cloud_unreachable);
  CHECK(queued.queued);
  restore_all(topo);
  ids.retry_pending(4);
  CHECK(ids.binding("esi")->address.node == NodeId{3});
}

TEST_CASE("stale cache entry is invalidated on miss") {
  auto topo = topology::build_topology(topology::generate_tree(2, 2));
  IdentityService ids(topo, {});
  ids.issue_identity(NodeId{3}, imsi(1), IdentityKind::local, "kwame", 0);
  ids.migrate_user("kwame", NodeId{4}, 1);
  auto r = ids.lookup(NodeId{1}, "kwame", 2);
  CHECK(r.stage == LookupStage::inter_zone);
  CHECK(r.address->node == NodeId{4});
  CHECK_FALSE(ids.cache(NodeId{3}).pre_registered("kwame"));
}

TEST_CASE("names stay unique under random interleavings") {
  std::mt19937 rng(8);
  auto topo = topology::build_topology(topology::generate_tree(3, 6));
  IdentityService ids(topo, {});
  for (int i = 0; i < 2000; ++i) {
    const NodeId n{1 + static_cast<std::uint32_t>(rng() % 9)};
    switch (rng() % 4) {
      case 0:
      case 1: {
        std::optional<std::string> chosen;
        if (rng() % 2) chosen = "name" + std::to_string(rng() % 40);
        ids.issue_identity(n, imsi(static_cast<int>(rng() % 60)),
                           rng() % 3 ? IdentityKind::local : IdentityKind::global, chosen, i);
        break;
      }
      case 2:
        if (!ids.registry().empty()) {
          auto it = ids.registry().begin();
          std::advance(it, rng() % ids.registry().size());
          ids.migrate_user(it->first, n, i);
        }
        break;
      default: {
        const auto& l = topo.links()[rng() % topo.links().size()];
        topo.set_link_state(l.id, rng() % 2 ? LinkState::up : LinkState::down);
        ids.retry_pending(i);
      }
    }
  }
  std::set<std::string> imsis;
  std::set<std::string> numbers;
  for (const auto& [name, b] : ids.registry()) {
    CHECK(name == b.identity.name);
    CHECK(imsis.insert(b.identity.imsi).second);
    if (b.identity.external_number) CHECK(numbers.insert(*b.identity.external_number).second);
    const auto* z = topo.zone(b.address.zone);
    REQUIRE(z);
    CHECK(z->prefix.contains(b.address.local_addr));
  }
}

TEST_CASE("dht issuance adds inter-cloud hop only off the home server") {
  auto topo = topology::build_topology(topology::three_node_deployment());
  IdentityConfig cfg;
  cfg.model = ResolutionModel::dht;
  cfg.inter_cloud_rtt_ms = 40;
  IdentityService ids(topo, cfg);
  REQUIRE(ids.ring());
  int hop = 0;
  for (int i = 0; i < 50; ++i) {
    auto r = ids.issue_identity(NodeId{2}, imsi(i), IdentityKind::local, {}, 0);
    REQUIRE(r.identity);
    const bool home = ids.binding(r.identity->name)->resolver == ids.ring()->members()[2 % 10];
    CHECK(r.latency_s == doctest::Approx(home ? 0.020 : 0.060));
    hop += home ? 0 : 1;
  }
  CHECK(hop > 0);
}

TEST_CASE("dump and load round trip") {
  auto topo = topology::build_topology(topology::three_node_deployment());
  IdentityService ids(topo, {});
  ids.issue_identity(NodeId{1}, imsi(1), IdentityKind::global, "ama", 0.5);
  ids.issue_identity(NodeId{3}, imsi(2), IdentityKind::local, {}, 1.5);
  std::ostringstream out;
  ids.dump(out);

  IdentityService copy(topo, {});
  std::istringstream in(out.str());
  copy.load(in);
  std::ostringstream again;
  copy.dump(again);
  CHECK(again.str() == out.str());
  CHECK(copy.binding("ama")->identity.external_number == "+15557000000");
  // The egress cursor survives.
  auto next = copy.issue_identity(NodeId{2}, imsi(3), IdentityKind::global, {}, 2);
  CHECK(next.identity->external_number == "+15557000001");

  std::istringstream bad("# greenlinks-identity v1 egress_next=0\nimsi=1\tname=x\n");
  try {
    copy.load(bad);
    FAIL("expected malformed record");
  } catch (const IdentityError& e) {
    CHECK(e.code() == IdentityErrc::malformed_record);
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
}

TEST_CASE("application registry") {
  ApplicationRegistry reg;
  reg.add({"market", "L1", {"ama"}});
  CHECK(reg.find("market", "L1") != nullptr);
  CHECK(reg.find("ivr", "L1") == nullptr);
  CHECK_THROWS_AS(reg.add({"market", "L1", {"yaw"}}), std::invalid_argument);
  CHECK_THROWS_AS(reg.add({"market", "L2", {}}), std::invalid_argument);
  reg.add({"ivr", "L1", {"yaw"}});
  CHECK(reg.size() == 2);
}
