#include "greenlinks/topology.hpp"

#include <algorithm>
#include <charconv>
#include <limits>
#include <queue>
#include <set>

namespace greenlinks::topology {

std::string_view to_string(Role role) noexcept {
  switch (role) {
    case Role::cloud: return "cloud";
    case Role::level2: return "level2";
    case Role::level3: return "level3";
  }
  return "level2";
}

std::string_view to_string(LinkProfile profile) noexcept {
  switch (profile) {
    case LinkProfile::edge: return "edge";
    case LinkProfile::hsdpa: return "hsdpa";
    case LinkProfile::ethernet: return "ethernet";
    case LinkProfile::custom: return "custom";
  }
  return "custom";
}

std::string_view to_string(BondMode mode) noexcept {
  return mode == BondMode::active_backup ? "active_backup" : "load_balance";
}

std::optional<Role> parse_role(std::string_view text) noexcept {
  if (text == "cloud") return Role::cloud;
  if (text == "level2") return Role::level2;
  if (text == "level3") return Role::level3;
  return std::nullopt;
}

std::optional<LinkProfile> parse_profile(std::string_view text) noexcept {
  if (text == "edge") return LinkProfile::edge;
  if (text == "hsdpa") return LinkProfile::hsdpa;
  if (text == "ethernet") return LinkProfile::ethernet;
  if (text == "custom") return LinkProfile::custom;
  return std::nullopt;
}

std::optional<BondMode> parse_bond_mode(std::string_view text) noexcept {
  if (text == "active_backup") return BondMode::active_backup;
  if (text == "load_balance") return BondMode::load_balance;
  return std::nullopt;
}

ProfileDefaults profile_defaults(LinkProfile profile) noexcept {
  switch (profile) {
    case LinkProfile::edge: return {200.0, 300.0};
    case LinkProfile::hsdpa: return {2000.0, 100.0};
    case LinkProfile::ethernet: return {100000.0, 5.0};
    case LinkProfile::custom: return {1000.0, 50.0};
  }
  return {1000.0, 50.0};
}

std::string_view to_string(TopologyErrc code) noexcept {
  switch (code) {
    case TopologyErrc::duplicate_node_id: return "DuplicateNodeId";
    case TopologyErrc::missing_gateway: return "MissingGateway";
    case TopologyErrc::overlapping_prefix: return "OverlappingPrefix";
    case TopologyErrc::dangling_link_endpoint: return "DanglingLinkEndpoint";
    case TopologyErrc::empty_topology: return "EmptyTopology";
    case TopologyErrc::invalid_cloud: return "InvalidCloud";
    case TopologyErrc::invalid_zone: return "InvalidZone";
    case TopologyErrc::invalid_link: return "InvalidLink";
    case TopologyErrc::invalid_parent: return "InvalidParent";
    case TopologyErrc::unknown_link: return "UnknownLink";
    case TopologyErrc::unknown_node: return "UnknownNode";
  }
  return "TopologyError";
}

// --- addressing ------------------------------------------------------------

std::optional<std::uint32_t> parse_ipv4(std::string_view text) {
  std::uint32_t addr = 0;
  for (int octet = 0; octet < 4; ++octet) {
    unsigned value = 0;
    const auto* first = text.data();
    const auto* last = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr == first || value > 255) return std::nullopt;
    addr = (addr << 8) | value;
    text.remove_prefix(static_cast<std::size_t>(ptr - first));
    if (octet < 3) {
      if (text.empty() || text.front() != '.') return std::nullopt;
      text.remove_prefix(1);
    }
  }
  if (!text.empty()) return std::nullopt;
  return addr;
}

std::string format_ipv4(std::uint32_t addr) {
  return std::to_string((addr >> 24) & 0xff) + '.' + std::to_string((addr >> 16) & 0xff) +
         '.' + std::to_string((addr >> 8) & 0xff) + '.' + std::to_string(addr & 0xff);
}

std::optional<Prefix> Prefix::parse(std::string_view text) {
  const auto slash = text.find('/');
  if (slash == std::string_view::npos) return std::nullopt;
  const auto addr = parse_ipv4(text.substr(0, slash));
  if (!addr) return std::nullopt;
  const auto len_text = text.substr(slash + 1);
  unsigned len = 0;
  auto [ptr, ec] = std::from_chars(len_text.data(), len_text.data() + len_text.size(), len);
  if (ec != std::errc{} || ptr != len_text.data() + len_text.size() || len > 31 ||
      len_text.empty()) {
    return std::nullopt;
  }
  Prefix p{*addr, static_cast<std::uint8_t>(len)};
  p.base &= p.mask();
  return p;
}

std::string Prefix::to_string() const {
  return format_ipv4(base) + '/' + std::to_string(length);
}

// --- bonding ---------------------------------------------------------------

std::vector<double> effective_bandwidth(const BondedBackhaul& bond, std::size_t flows) {
  std::vector<double> alloc(flows, 0.0);
  std::vector<const Link*> live;
  for (const auto& l : bond.member_links) {
    if (l.up() && l.bandwidth_kbps > 0.0) live.push_back(&l);
  }
  if (live.empty() || flows == 0) return alloc;

  if (bond.mode == BondMode::active_backup) {
    const double share = live.front()->bandwidth_kbps / static_cast<double>(flows);
    std::fill(alloc.begin(), alloc.end(), share);
    return alloc;
  }

  std::vector<std::size_t> per_link(live.size(), 0);
  for (std::size_t f = 0; f < flows; ++f) ++per_link[f % live.size()];
  for (std::size_t f = 0; f < flows; ++f) {
    const auto k = f % live.size();
    alloc[f] = live[k]->bandwidth_kbps / static_cast<double>(per_link[k]);
  }
  return alloc;
}

// --- Topology --------------------------------------------------------------

namespace {

[[noreturn]] void fail(TopologyErrc code, const std::string& msg) {
  throw TopologyError(code, std::string(to_string(code)) + ": " + msg);
}

}  // namespace

Topology build_topology(const TopologySpec& spec) {
  if (spec.nodes.empty()) fail(TopologyErrc::empty_topology, "scenario declares no nodes");

  Topology topo;
  std::optional<NodeId> cloud;
  for (const auto& ns : spec.nodes) {
    const NodeId id{ns.id};
    if (topo.node_index_.contains(id)) {
      fail(TopologyErrc::duplicate_node_id, "node id " + std::to_string(ns.id) + " declared twice");
    }
    Node n;
    n.id = id;
    n.name = ns.name.empty() ? "node" + std::to_string(ns.id) : ns.name;
    n.role = ns.role;
    n.zone = ns.zone;
    if (ns.parent) n.parent = NodeId{*ns.parent};
    n.tx_power_dbm = ns.tx_power_dbm;
    if (n.role == Role::cloud) {
      if (cloud) fail(TopologyErrc::invalid_cloud, "more than one cloud node");
      if (n.zone) fail(TopologyErrc::invalid_cloud, "cloud node " + n.name + " must not belong to a zone");
      cloud = id;
    }
    topo.node_index_.emplace(id, topo.nodes_.size());
    topo.nodes_.push_back(std::move(n));
  }
  if (!cloud) fail(TopologyErrc::invalid_cloud, "scenario has no cloud node");
  topo.cloud_ = *cloud;

  for (const auto& n : topo.nodes_) {
    if (n.role == Role::level3) {
      if (!n.parent || !topo.has_node(*n.parent) || topo.node(*n.parent).role != Role::level2) {
        fail(TopologyErrc::invalid_parent, "level3 node " + n.name + " needs a level2 parent");
      }
    } else if (n.parent) {
      fail(TopologyErrc::invalid_parent, "only level3 nodes take a parent (" + n.name + ")");
    }
  }

  std::set<std::string> zone_ids;
  for (const auto& zs : spec.zones) {
    if (!zone_ids.insert(zs.id).second) {
      fail(TopologyErrc::invalid_zone, "zone " + zs.id + " declared twice");
    }
    const auto prefix = Prefix::parse(zs.prefix);
    if (!prefix) fail(TopologyErrc::invalid_zone, "zone " + zs.id + " has malformed prefix '" + zs.prefix + "'");
    Zone z;
    z.id = zs.id;
    z.gateway = NodeId{zs.gateway};
    z.prefix = *prefix;
    for (const auto& n : topo.nodes_) {
      if (n.zone && *n.zone == zs.id) z.node_ids.push_back(n.id);
    }
    std::sort(z.node_ids.begin(), z.node_ids.end());
    if (!std::binary_search(z.node_ids.begin(), z.node_ids.end(), z.gateway)) {
      fail(TopologyErrc::missing_gateway, "zone " + zs.id + " gateway " +
                                              std::to_string(zs.gateway) + " is not a member");
    }
    if (z.node_ids.size() >= z.prefix.capacity()) {
      fail(TopologyErrc::invalid_zone, "zone " + zs.id + " prefix too small for its nodes");
    }
    for (const auto& other : topo.zones_) {
      if (other.prefix.overlaps(z.prefix)) {
        fail(TopologyErrc::overlapping_prefix,
             "zones " + other.id + " and " + z.id + " share address space");
      }
    }
    topo.zones_.push_back(std::move(z));
  }
  for (const auto& n : topo.nodes_) {
    if (n.role == Role::cloud) continue;
    if (!n.zone) fail(TopologyErrc::invalid_zone, "node " + n.name + " has no zone");
    if (!zone_ids.contains(*n.zone)) {
      fail(TopologyErrc::missing_gateway, "node " + n.name + " names undeclared zone " + *n.zone);
    }
  }

  for (const auto& ls : spec.links) {
    if (!topo.has_node(NodeId{ls.a}) || !topo.has_node(NodeId{ls.b})) {
      fail(TopologyErrc::dangling_link_endpoint,
           "link " + std::to_string(ls.a) + "-" + std::to_string(ls.b) + " references a missing node");
    }
    if (ls.a == ls.b) fail(TopologyErrc::invalid_link, "self link on node " + std::to_string(ls.a));
    const auto defaults = profile_defaults(ls.profile);
    Link l;
    l.id = LinkId{static_cast<std::uint32_t>(topo.links_.size())};
    l.a = NodeId{ls.a};
    l.b = NodeId{ls.b};
    l.profile = ls.profile;
    l.bandwidth_kbps = ls.bandwidth_kbps.value_or(defaults.bandwidth_kbps);
    l.latency_ms = ls.latency_ms.value_or(defaults.latency_ms);
    if (!(l.bandwidth_kbps > 0.0) || !(l.latency_ms >= 0.0)) {
      fail(TopologyErrc::invalid_link, "link " + std::to_string(ls.a) + "-" +
                                           std::to_string(ls.b) + " needs bandwidth > 0 and latency >= 0");
    }
    topo.links_.push_back(l);
  }
  topo.epochs_.assign(topo.links_.size(), 0);

  for (const auto& bs : spec.bonded) {
    if (bs.member_links.empty()) fail(TopologyErrc::invalid_link, "bond " + bs.id + " has no members");
    for (auto idx : bs.member_links) {
      if (idx >= topo.links_.size()) {
        fail(TopologyErrc::invalid_link, "bond " + bs.id + " references link " + std::to_string(idx));
      }
    }
    topo.bond_specs_.push_back(bs);
  }
  return topo;
}

std::vector<BondedBackhaul> Topology::bonded() const {
  std::vector<BondedBackhaul> out;
  for (const auto& bs : bond_specs_) {
    BondedBackhaul b{bs.id, {}, bs.mode};
    for (auto idx : bs.member_links) b.member_links.push_back(links_[idx]);
    out.push_back(std::move(b));
  }
  return out;
}

bool Topology::has_node(NodeId id) const noexcept { return node_index_.contains(id); }

const Node& Topology::node(NodeId id) const {
  auto it = node_index_.find(id);
  if (it == node_index_.end()) {
    fail(TopologyErrc::unknown_node, "node " + std::to_string(id.value));
  }
  return nodes_[it->second];
}

std::size_t Topology::index_of(LinkId id) const {
  if (id.value >= links_.size()) {
    fail(TopologyErrc::unknown_link, "link " + std::to_string(id.value));
  }
  return id.value;
}

const Link& Topology::link(LinkId id) const { return links_[index_of(id)]; }

const Zone* Topology::zone(std::string_view id) const noexcept {
  for (const auto& z : zones_) {
    if (z.id == id) return &z;
  }
  return nullptr;
}

const Zone* Topology::zone_of(NodeId id) const {
  const auto& n = node(id);
  return n.zone ? zone(*n.zone) : nullptr;
}

std::vector<NodeId> Topology::nodes_with_role(Role role) const {
  std::vector<NodeId> out;
  for (const auto& n : nodes_) {
    if (n.role == role) out.push_back(n.id);
  }
  return out;
}

bool Topology::set_link_state(LinkId id, LinkState state) {
  auto& l = links_[index_of(id)];
  if (l.state == state) return false;
  l.state = state;
  if (state == LinkState::down) ++epochs_[id.value];
  for (const auto& obs : observers_) obs(id, state);
  return true;
}

std::optional<Path> Topology::shortest(NodeId from, NodeId to, bool zone_only) const {
  if (!has_node(from) || !has_node(to)) return std::nullopt;
  if (from == to) return Path{{}, 0.0, std::numeric_limits<double>::infinity()};

  const auto& from_zone = node(from).zone;
  if (zone_only) {
    if (!from_zone || node(to).zone != from_zone) return std::nullopt;
  }

  const auto n = nodes_.size();
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(n, inf);
  std::vector<std::optional<LinkId>> via(n);
  using Item = std::pair<double, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> frontier;
  const auto src = node_index_.at(from);
  dist[src] = 0.0;
  frontier.emplace(0.0, src);
  while (!frontier.empty()) {
    auto [d, u] = frontier.top();
    frontier.pop();
    if (d > dist[u]) continue;
    const auto uid = nodes_[u].id;
    if (uid == to) break;
    for (const auto& l : links_) {
      if (!l.up() || !l.touches(uid)) continue;
      const auto vid = l.other(uid);
      if (zone_only && nodes_[node_index_.at(vid)].zone != from_zone) continue;
      const auto v = node_index_.at(vid);
      const double nd = d + l.latency_ms;
      if (nd < dist[v]) {
        dist[v] = nd;
        via[v] = l.id;
        frontier.emplace(nd, v);
      }
    }
  }
  const auto dst = node_index_.at(to);
  if (dist[dst] == inf) return std::nullopt;

  Path p;
  p.latency_ms = dist[dst];
  p.bottleneck_kbps = inf;
  auto cur = to;
  while (cur != from) {
    const auto& l = links_[via[node_index_.at(cur)]->value];
    p.links.push_back(l.id);
    p.bottleneck_kbps = std::min(p.bottleneck_kbps, l.bandwidth_kbps);
    cur = l.other(cur);
  }
  std::reverse(p.links.begin(), p.links.end());
  return p;
}

std::optional<Path> Topology::path(NodeId from, NodeId to) const {
  return shortest(from, to, false);
}

std::optional<Path> Topology::path_within_zone(NodeId from, NodeId to) const {
  return shortest(from, to, true);
}

bool Topology::reachable(NodeId from, NodeId to) const { return path(from, to).has_value(); }

bool Topology::reachable_within_zone(NodeId from, NodeId to) const {
  return path_within_zone(from, to).has_value();
}

PathSnapshot Topology::snapshot(const Path& p) const {
  PathSnapshot snap;
  for (auto id : p.links) snap.links.emplace_back(id, epochs_[index_of(id)]);
  return snap;
}

bool Topology::intact(const PathSnapshot& snap) const {
  return std::all_of(snap.links.begin(), snap.links.end(), [&](const auto& entry) {
    const auto idx = index_of(entry.first);
    return links_[idx].up() && epochs_[idx] == entry.second;
  });
}

// --- generators ------------------------------------------------------------

TopologySpec generate_tree(std::size_t level2, std::size_t level3, LinkProfile backhaul,
                           LinkProfile access) {
  TopologySpec spec;
  spec.nodes.push_back(NodeSpec{0, "cloud", Role::cloud, std::nullopt, std::nullopt, 0.0});
  for (std::size_t i = 0; i < level2; ++i) {
    const auto id = static_cast<std::uint32_t>(1 + i);
    const auto zone = "z" + std::to_string(i);
    spec.nodes.push_back(NodeSpec{id, "l2-" + std::to_string(i), Role::level2, zone, std::nullopt, 10.0});
    // 10.<hi>.<lo>.0/24 keeps up to 65536 zones disjoint.
    spec.zones.push_back(ZoneSpec{zone, id,
                                  "10." + std::to_string((i >> 8) & 0xff) + "." +
                                      std::to_string(i & 0xff) + ".0/24"});
    spec.links.push_back(LinkSpec{0, id, backhaul, std::nullopt, std::nullopt});
  }
  for (std::size_t j = 0; j < level3 && level2 > 0; ++j) {
    const auto id = static_cast<std::uint32_t>(1 + level2 + j);
    const auto parent = static_cast<std::uint32_t>(1 + j % level2);
    spec.nodes.push_back(NodeSpec{id, "l3-" + std::to_string(j), Role::level3,
                                  "z" + std::to_string(j % level2), parent, 10.0});
    spec.links.push_back(LinkSpec{parent, id, access, std::nullopt, std::nullopt});
  }
  return spec;
}

TopologySpec three_node_deployment() {
  TopologySpec spec;
  spec.nodes = {
      NodeSpec{0, "frankfurt", Role::cloud, std::nullopt, std::nullopt, 0.0},
      NodeSpec{1, "ghana", Role::level2, "kumawu", std::nullopt, 30.0},
      NodeSpec{2, "newyork", Role::level2, "nyc", std::nullopt, 10.0},
      NodeSpec{3, "uae", Role::level2, "abudhabi", std::nullopt, 10.0},
  };
  spec.zones = {
      ZoneSpec{"kumawu", 1, "10.1.0.0/16"},
      ZoneSpec{"nyc", 2, "10.2.0.0/16"},
      ZoneSpec{"abudhabi", 3, "10.3.0.0/16"},
  };
  spec.links = {
      LinkSpec{0, 1, LinkProfile::edge, std::nullopt, std::nullopt},
      LinkSpec{0, 2, LinkProfile::ethernet, std::nullopt, std::nullopt},
      LinkSpec{0, 3, LinkProfile::hsdpa, std::nullopt, std::nullopt},
  };
  return spec;
}

}  // namespace greenlinks::topology
