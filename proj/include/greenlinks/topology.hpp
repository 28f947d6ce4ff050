#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace greenlinks::topology {

struct NodeId {
  std::uint32_t value = 0;
  auto operator<=>(const NodeId&) const = default;
};

struct LinkId {
  std::uint32_t value = 0;
  auto operator<=>(const LinkId&) const = default;
};

enum class Role : std::uint8_t { cloud, level2, level3 };
enum class LinkState : std::uint8_t { up, down };
enum class LinkProfile : std::uint8_t { edge, hsdpa, ethernet, custom };
enum class BondMode : std::uint8_t { active_backup, load_balance };

[[nodiscard]] std::string_view to_string(Role role) noexcept;
[[nodiscard]] std::string_view to_string(LinkProfile profile) noexcept;
[[nodiscard]] std::string_view to_string(BondMode mode) noexcept;
[[nodiscard]] std::optional<Role> parse_role(std::string_view text) noexcept;
[[nodiscard]] std::optional<LinkProfile> parse_profile(std::string_view text) noexcept;
[[nodiscard]] std::optional<BondMode> parse_bond_mode(std::string_view text) noexcept;

/// Default (bandwidth kbps, one-way latency ms) for a link profile.
struct ProfileDefaults {
  double bandwidth_kbps;
  double latency_ms;
};
[[nodiscard]] ProfileDefaults profile_defaults(LinkProfile profile) noexcept;

/// Bytes per second carried by a link of the given capacity (1 kbps = 1024 bit/s).
[[nodiscard]] constexpr double bytes_per_second(double kbps) noexcept {
  return kbps * 1024.0 / 8.0;
}

/// IPv4 address prefix, e.g. 10.1.0.0/16.
struct Prefix {
  std::uint32_t base = 0;
  std::uint8_t length = 0;

  [[nodiscard]] static std::optional<Prefix> parse(std::string_view text);
  [[nodiscard]] std::uint32_t mask() const noexcept {
    return length == 0 ? 0u : ~std::uint32_t{0} << (32 - length);
  }
  [[nodiscard]] bool contains(std::uint32_t addr) const noexcept {
    return (addr & mask()) == (base & mask());
  }
  [[nodiscard]] bool overlaps(const Prefix& other) const noexcept {
    const auto m = length < other.length ? mask() : other.mask();
    return (base & m) == (other.base & m);
  }
  /// Number of usable host slots (network address excluded).
  [[nodiscard]] std::uint64_t capacity() const noexcept {
    return (std::uint64_t{1} << (32 - length)) - 1;
  }
  [[nodiscard]] std::string to_string() const;
  bool operator==(const Prefix&) const = default;
};

[[nodiscard]] std::string format_ipv4(std::uint32_t addr);
[[nodiscard]] std::optional<std::uint32_t> parse_ipv4(std::string_view text);

struct Node {
  NodeId id;
  std::string name;
  Role role = Role::level2;
  std::optional<std::string> zone;  // absent for the cloud
  std::optional<NodeId> parent;     // level3 only
  double tx_power_dbm = 10.0;
};

struct Zone {
  std::string id;
  std::vector<NodeId> node_ids;  // sorted
  NodeId gateway;
  Prefix prefix;
};

struct Link {
  LinkId id;
  NodeId a;
  NodeId b;
  double bandwidth_kbps = 0.0;
  double latency_ms = 0.0;
  LinkState state = LinkState::up;
  LinkProfile profile = LinkProfile::custom;

  [[nodiscard]] bool up() const noexcept { return state == LinkState::up; }
  [[nodiscard]] bool touches(NodeId n) const noexcept { return a == n || b == n; }
  [[nodiscard]] NodeId other(NodeId n) const noexcept { return a == n ? b : a; }
};

struct BondedBackhaul {
  std::string id;
  std::vector<Link> member_links;
  BondMode mode = BondMode::active_backup;
};

/// Per-flow throughput for `flows` concurrent flows over a bond.
///
/// active_backup puts every flow on the first live member and shares its
/// capacity evenly. load_balance assigns flow j to live member j mod L and
/// shares each member evenly among its flows; a flow never spans members.
/// No live member yields an all-zero allocation.
[[nodiscard]] std::vector<double> effective_bandwidth(const BondedBackhaul& bond,
                                                      std::size_t flows);

// ---------------------------------------------------------------------------
// Build input

struct NodeSpec {
  std::uint32_t id = 0;
  std::string name;
  Role role = Role::level2;
  std::optional<std::string> zone;
  std::optional<std::uint32_t> parent;
  double tx_power_dbm = 10.0;
};

struct ZoneSpec {
  std::string id;
  std::uint32_t gateway = 0;
  std::string prefix;
};

struct LinkSpec {
  std::uint32_t a = 0;
  std::uint32_t b = 0;
  LinkProfile profile = LinkProfile::custom;
  std::optional<double> bandwidth_kbps;
  std::optional<double> latency_ms;
};

struct BondSpec {
  std::string id;
  std::vector<std::uint32_t> member_links;  // indices into links
  BondMode mode = BondMode::active_backup;
};

struct TopologySpec {
  std::vector<NodeSpec> nodes;
  std::vector<ZoneSpec> zones;
  std::vector<LinkSpec> links;
  std::vector<BondSpec> bonded;
};

enum class TopologyErrc : std::uint8_t {
  duplicate_node_id,
  missing_gateway,
  overlapping_prefix,
  dangling_link_endpoint,
  empty_topology,
  invalid_cloud,
  invalid_zone,
  invalid_link,
  invalid_parent,
  unknown_link,
  unknown_node,
};

[[nodiscard]] std::string_view to_string(TopologyErrc code) noexcept;

class TopologyError : public std::runtime_error {
 public:
  TopologyError(TopologyErrc code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  [[nodiscard]] TopologyErrc code() const noexcept { return code_; }

 private:
  TopologyErrc code_;
};

/// A route between two nodes over live links.
struct Path {
  std::vector<LinkId> links;
  double latency_ms = 0.0;
  double bottleneck_kbps = 0.0;
};

/// The links of a path together with their failure epochs at the time a
/// message left. A message survives iff every link is still up and no link
/// failed in between.
struct PathSnapshot {
  std::vector<std::pair<LinkId, std::uint64_t>> links;
};

// ---------------------------------------------------------------------------

class Topology {
 public:
  using LinkObserver = std::function<void(LinkId, LinkState)>;

  [[nodiscard]] const std::vector<Node>& nodes() const noexcept { return nodes_; }
  [[nodiscard]] const std::vector<Zone>& zones() const noexcept { return zones_; }
  [[nodiscard]] const std::vector<Link>& links() const noexcept { return links_; }
  /// Bonds with member links in their current state.
  [[nodiscard]] std::vector<BondedBackhaul> bonded() const;

  [[nodiscard]] const Node& node(NodeId id) const;
  [[nodiscard]] bool has_node(NodeId id) const noexcept;
  [[nodiscard]] const Link& link(LinkId id) const;
  [[nodiscard]] const Zone* zone(std::string_view id) const noexcept;
  [[nodiscard]] const Zone* zone_of(NodeId id) const;
  [[nodiscard]] NodeId cloud() const noexcept { return cloud_; }
  [[nodiscard]] std::vector<NodeId> nodes_with_role(Role role) const;

  /// Returns true when the state actually changed. Throws UnknownLink.
  bool set_link_state(LinkId id, LinkState state);
  void on_link_change(LinkObserver observer) { observers_.push_back(std::move(observer)); }
  [[nodiscard]] std::uint64_t link_epoch(LinkId id) const { return epochs_.at(index_of(id)); }

  /// Lowest-latency route over live links; nullopt when unreachable.
  [[nodiscard]] std::optional<Path> path(NodeId from, NodeId to) const;
  [[nodiscard]] std::optional<Path> path_to_cloud(NodeId from) const {
    return path(from, cloud_);
  }
  [[nodiscard]] bool reachable(NodeId from, NodeId to) const;
  /// Reachability restricted to links whose endpoints lie in one zone.
  [[nodiscard]] bool reachable_within_zone(NodeId from, NodeId to) const;
  [[nodiscard]] std::optional<Path> path_within_zone(NodeId from, NodeId to) const;

  [[nodiscard]] PathSnapshot snapshot(const Path& path) const;
  [[nodiscard]] bool intact(const PathSnapshot& snap) const;

 private:
  friend Topology build_topology(const TopologySpec& spec);

  [[nodiscard]] std::size_t index_of(LinkId id) const;
  [[nodiscard]] std::optional<Path> shortest(NodeId from, NodeId to,
                                             bool zone_only) const;

  std::vector<Node> nodes_;
  std::map<NodeId, std::size_t> node_index_;
  std::vector<Zone> zones_;
  std::vector<Link> links_;
  std::vector<std::uint64_t> epochs_;
  std::vector<BondSpec> bond_specs_;
  NodeId cloud_;
  std::vector<LinkObserver> observers_;
};

/// Validates `spec` and returns the topology. Throws TopologyError.
[[nodiscard]] Topology build_topology(const TopologySpec& spec);

/// 1 cloud, `level2` gateways each linked to the cloud, and `level3` nodes
/// attached round-robin to the gateways. Each gateway and its children form
/// one zone.
[[nodiscard]] TopologySpec generate_tree(std::size_t level2, std::size_t level3,
                                         LinkProfile backhaul = LinkProfile::hsdpa,
                                         LinkProfile access = LinkProfile::ethernet);

/// The Ghana / New York / UAE deployment with a Frankfurt cloud instance.
/// Ghana is on edge, UAE on hsdpa and New York on ethernet backhaul.
[[nodiscard]] TopologySpec three_node_deployment();

}  // namespace greenlinks::topology
