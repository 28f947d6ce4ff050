#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "greenlinks/engine.hpp"
#include "greenlinks/topology.hpp"

namespace greenlinks::identity {

using topology::NodeId;

enum class IdentityKind : std::uint8_t { local, global };

[[nodiscard]] std::string_view to_string(IdentityKind kind) noexcept;

struct UserIdentity {
  std::string imsi;  // 15 digits
  std::string name;  // the issued, network-unique name
  std::optional<std::string> chosen_name;
  IdentityKind kind = IdentityKind::local;
  std::optional<std::string> external_number;  // global identities only

  bool operator==(const UserIdentity&) const = default;
};

struct NetworkAddress {
  std::string zone;
  NodeId node;
  std::uint32_t local_addr = 0;

  bool operator==(const NetworkAddress&) const = default;
};

[[nodiscard]] bool is_valid_imsi(std::string_view imsi) noexcept;

enum class IdentityErrc : std::uint8_t {
  backhaul_down,
  duplicate_name,
  external_alloc_failed,
  empty_ring,
  unknown_identity,
  cloud_unreachable,
  not_found,
  invalid_imsi,
  address_exhausted,
  malformed_record,
};

[[nodiscard]] std::string_view to_string(IdentityErrc code) noexcept;

class IdentityError : public std::runtime_error {
 public:
  IdentityError(IdentityErrc code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  [[nodiscard]] IdentityErrc code() const noexcept { return code_; }

 private:
  IdentityErrc code_;
};

// ---------------------------------------------------------------------------
// Application identities

struct ApplicationIdentity {
  std::string app_type;
  std::string key;
  std::vector<std::string> owners;  // user identity names
};

/// Keys are unique within an application type; every item has an owner.
class ApplicationRegistry {
 public:
  /// Throws std::invalid_argument on a duplicate key or an empty owner set.
  const ApplicationIdentity& add(ApplicationIdentity item);
  [[nodiscard]] const ApplicationIdentity* find(std::string_view app_type,
                                                std::string_view key) const;
  [[nodiscard]] std::size_t size() const noexcept { return items_.size(); }

 private:
  std::map<std::pair<std::string, std::string>, ApplicationIdentity> items_;
};

// ---------------------------------------------------------------------------
// Resolver ring

using ServerId = std::uint32_t;

/// Seedable 32-bit FNV-1a with a murmur3 finalizer. Uniform, not secure.
[[nodiscard]] std::uint32_t ring_hash(std::string_view key, std::uint32_t seed = 0) noexcept;

/// Clockwise distance from `from` to `to` on the 2^32 ring.
[[nodiscard]] constexpr std::uint32_t ring_distance(std::uint32_t from, std::uint32_t to) noexcept {
  return to - from;
}

class ResolverRing {
 public:
  /// Throws IdentityError(empty_ring) when `members` is empty.
  explicit ResolverRing(std::vector<ServerId> members, std::uint32_t seed = 0);

  [[nodiscard]] const std::vector<ServerId>& members() const noexcept { return members_; }
  [[nodiscard]] std::uint32_t seed() const noexcept { return seed_; }
  [[nodiscard]] std::uint32_t member_hash(ServerId id) const noexcept;
  [[nodiscard]] std::uint32_t identity_hash(std::string_view identity) const noexcept {
    return ring_hash(identity, seed_);
  }

 private:
  friend ServerId resolver_for(const ResolverRing& ring, std::string_view identity);

  std::vector<ServerId> members_;  // sorted, unique
  std::uint32_t seed_;
  std::vector<std::pair<std::uint32_t, ServerId>> points_;  // sorted by (hash, id)
};

/// The member x minimizing ring_distance(H(m), H(x)); ties go to the smaller id.
[[nodiscard]] ServerId resolver_for(const ResolverRing& ring, std::string_view identity);

// ---------------------------------------------------------------------------
// Caches and the cloud registry

struct CacheEntry {
  UserIdentity identity;
  NetworkAddress address;
  SimTime registered_at = 0.0;
  bool active = false;
};

class IdentityCache {
 public:
  [[nodiscard]] const CacheEntry* find(std::string_view name) const;
  void upsert(CacheEntry entry);
  bool invalidate(std::string_view name);
  bool erase(std::string_view name);
  [[nodiscard]] const std::map<std::string, CacheEntry, std::less<>>& entries() const noexcept {
    return entries_;
  }
  /// Entries authenticated by the cloud and active on this node.
  [[nodiscard]] bool pre_registered(std::string_view name) const;

 private:
  std::map<std::string, CacheEntry, std::less<>> entries_;
};

/// Hands out external numbers from a fixed pool, standing in for a VoIP
/// provider.
class EgressAllocator {
 public:
  EgressAllocator(std::uint64_t first, std::uint64_t count, std::string prefix = "+1555")
      : next_(first), end_(first + count), prefix_(std::move(prefix)) {}

  [[nodiscard]] std::optional<std::string> allocate();
  [[nodiscard]] std::uint64_t remaining() const noexcept { return end_ - next_; }
  [[nodiscard]] std::uint64_t next() const noexcept { return next_; }
  void restore(std::uint64_t next) noexcept { next_ = std::min(next, end_); }

 private:
  std::uint64_t next_;
  std::uint64_t end_;
  std::string prefix_;
};

enum class ResolutionModel : std::uint8_t { central, dht };

struct IdentityConfig {
  ResolutionModel model = ResolutionModel::central;
  std::uint32_t ring_members = 10;  // dht only
  std::uint32_t ring_seed = 0;
  double issue_service_ms = 10.0;
  double lookup_service_ms = 0.0;
  double inter_cloud_rtt_ms = 0.0;  // extra hop when the resolver is not the home server
  std::uint64_t egress_first = 7000000;
  std::uint64_t egress_count = 10000;
};

struct Binding {
  UserIdentity identity;
  NetworkAddress address;
  SimTime registered_at = 0.0;
  ServerId resolver = 0;
};

struct IssueOutcome {
  std::optional<IdentityErrc> error;
  std::optional<UserIdentity> identity;
  double latency_s = 0.0;
  bool created = false;  // false when an existing identity was re-bound
  bool queued = false;   // deferred until the backhaul returns
};

enum class LookupStage : std::uint8_t { intra_zone, inter_zone, external, none };
[[nodiscard]] std::string_view to_string(LookupStage stage) noexcept;

struct LookupResult {
  enum class Status : std::uint8_t { address, external_route, not_found, cloud_unreachable };
  Status status = Status::not_found;
  LookupStage stage = LookupStage::none;
  std::optional<NetworkAddress> address;
  std::optional<std::string> external_route;
  double latency_s = 0.0;
  std::size_t backhaul_messages = 0;
};

struct MigrateOutcome {
  std::optional<IdentityErrc> error;
  bool cloud_round_trip = false;
  bool queued = false;
  std::optional<NetworkAddress> address;
};

/// Issues and resolves identities over a topology. All mutation happens on
/// the caller's event loop.
class IdentityService {
 public:
  IdentityService(const topology::Topology& topo, IdentityConfig config);

  IssueOutcome issue_identity(NodeId requester, std::string_view imsi, IdentityKind kind,
                              std::optional<std::string> chosen_name, SimTime now);
  LookupResult lookup(NodeId origin, std::string_view name, SimTime now);
  MigrateOutcome migrate_user(std::string_view name, NodeId new_node, SimTime now);

  /// Completes queued issuances and migrations whose backhaul is back.
  /// Returns the names that completed, in request order.
  std::vector<std::string> retry_pending(SimTime now);
  /// Piggyback refresh of `node`'s cache against the cloud, plus upload of
  /// pending intra-zone handovers. No-op when the cloud is unreachable.
  bool sync_node(NodeId node, SimTime now);

  [[nodiscard]] const IdentityCache& cache(NodeId node) const;
  [[nodiscard]] const Binding* binding(std::string_view name) const;
  [[nodiscard]] const Binding* binding_by_imsi(std::string_view imsi) const;
  /// Where the handset physically is.
  [[nodiscard]] std::optional<NodeId> location(std::string_view name) const;
  [[nodiscard]] std::size_t pending() const noexcept { return pending_.size(); }
  [[nodiscard]] std::uint64_t backhaul_messages() const noexcept { return backhaul_messages_; }
  [[nodiscard]] const std::map<std::string, Binding, std::less<>>& registry() const noexcept {
    return registry_;
  }
  [[nodiscard]] const std::optional<ResolverRing>& ring() const noexcept { return ring_; }
  [[nodiscard]] const IdentityConfig& config() const noexcept { return config_; }

  /// One tab-separated key=value record per binding.
  void dump(std::ostream& out) const;
  /// Replaces all state with the records in `in`. Throws IdentityError.
  void load(std::istream& in);

 private:
  struct PendingRequest {
    enum class Kind : std::uint8_t { issue, migrate } kind;
    NodeId node;
    std::string imsi_or_name;
    IdentityKind identity_kind = IdentityKind::local;
    std::optional<std::string> chosen_name;
  };

  IssueOutcome issue_now(NodeId requester, std::string_view imsi, IdentityKind kind,
                         const std::optional<std::string>& chosen_name, SimTime now,
                         const topology::Path& path);
  MigrateOutcome migrate_now(Binding& b, NodeId new_node, SimTime now, const topology::Path& path);
  NetworkAddress allocate_address(NodeId node);
  void release_address(const NetworkAddress& addr);
  void rebind(Binding& b, NodeId node);
  ServerId home_server(NodeId node) const;
  double cloud_round_trip_s(const topology::Path& path, double service_ms, ServerId resolver,
                            NodeId origin) const;
  IdentityCache& cache_mut(NodeId node);

  const topology::Topology* topo_;
  IdentityConfig config_;
  std::optional<ResolverRing> ring_;
  EgressAllocator egress_;
  std::map<std::string, Binding, std::less<>> registry_;          // name -> binding
  std::map<std::string, std::string, std::less<>> by_imsi_;       // imsi -> name
  std::map<std::string, std::string, std::less<>> by_external_;   // number -> name
  std::map<std::string, NodeId, std::less<>> presence_;
  std::map<NodeId, IdentityCache> caches_;
  std::map<std::string, std::set<std::uint32_t>> used_hosts_;     // zone -> host indices
  std::vector<PendingRequest> pending_;
  std::set<std::string, std::less<>> unsynced_handovers_;
  std::uint64_t backhaul_messages_ = 0;
};

}  // namespace greenlinks::identity
