#include "greenlinks/identity.hpp"

#include <algorithm>
#include <charconv>
#include <istream>
#include <ostream>
#include <sstream>

namespace greenlinks::identity {

std::string_view to_string(IdentityKind kind) noexcept {
  return kind == IdentityKind::local ? "local" : "global";
}

std::string_view to_string(IdentityErrc code) noexcept {
  switch (code) {
    case IdentityErrc::backhaul_down: return "BackhaulDown";
    case IdentityErrc::duplicate_name: return "DuplicateName";
    case IdentityErrc::external_alloc_failed: return "ExternalAllocFailed";
    case IdentityErrc::empty_ring: return "EmptyRing";
    case IdentityErrc::unknown_identity: return "UnknownIdentity";
    case IdentityErrc::cloud_unreachable: return "CloudUnreachable";
    case IdentityErrc::not_found: return "NotFound";
    case IdentityErrc::invalid_imsi: return "InvalidImsi";
    case IdentityErrc::address_exhausted: return "AddressExhausted";
    case IdentityErrc::malformed_record: return "MalformedRecord";
  }
  return "IdentityError";
}

std::string_view to_string(LookupStage stage) noexcept {
  switch (stage) {
    case LookupStage::intra_zone: return "intra_zone";
    case LookupStage::inter_zone: return "inter_zone";
    case LookupStage::external: return "external";
    case LookupStage::none: return "none";
  }
  return "none";
}

bool is_valid_imsi(std::string_view imsi) noexcept {
  return imsi.size() == 15 &&
         std::all_of(imsi.begin(), imsi.end(), [](char c) { return c >= '0' && c <= '9'; });
}

namespace {

bool looks_external(std::string_view name) {
  if (name.empty()) return false;
  if (name.front() == '+') name.remove_prefix(1);
  return name.size() >= 7 &&
         std::all_of(name.begin(), name.end(), [](char c) { return c >= '0' && c <= '9'; });
}

}  // namespace

// --- application identities ------------------------------------------------

const ApplicationIdentity& ApplicationRegistry::add(ApplicationIdentity item) {
  if (item.owners.empty()) {
    throw std::invalid_argument("application identity " + item.key + " has no owner");
  }
  auto key = std::make_pair(item.app_type, item.key);
  auto [it, inserted] = items_.emplace(std::move(key), std::move(item));
  if (!inserted) {
    throw std::invalid_argument("duplicate application key " + it->first.second + " for " +
                                it->first.first);
  }
  return it->second;
}

const ApplicationIdentity* ApplicationRegistry::find(std::string_view app_type,
                                                     std::string_view key) const {
  auto it = items_.find(std::make_pair(std::string(app_type), std::string(key)));
  return it == items_.end() ? nullptr : &it->second;
}

// --- ring ------------------------------------------------------------------

namespace {

constexpr std::uint32_t fmix32(std::uint32_t h) noexcept {
  h ^= h >> 16;
  h *= 0x85ebca6bu;
  h ^= h >> 13;
  h *= 0xc2b2ae35u;
  h ^= h >> 16;
  return h;
}

}  // namespace

std::uint32_t ring_hash(std::string_view key, std::uint32_t seed) noexcept {
  std::uint32_t h = 0x811c9dc5u ^ fmix32(seed + 0x9e3779b9u);
  for (unsigned char c : key) {
    h ^= c;
    h *= 16777619u;
  }
  return fmix32(h);
}

ResolverRing::ResolverRing(std::vector<ServerId> members, std::uint32_t seed)
    : members_(std::move(members)), seed_(seed) {
  std::sort(members_.begin(), members_.end());
  members_.erase(std::unique(members_.begin(), members_.end()), members_.end());
  if (members_.empty()) throw IdentityError(IdentityErrc::empty_ring, "resolver ring has no members");
  for (auto id : members_) points_.emplace_back(member_hash(id), id);
  std::sort(points_.begin(), points_.end());
}

std::uint32_t ResolverRing::member_hash(ServerId id) const noexcept {
  return ring_hash("cloud-" + std::to_string(id), seed_);
}

ServerId resolver_for(const ResolverRing& ring, std::string_view identity) {
  if (ring.points_.empty()) throw IdentityError(IdentityErrc::empty_ring, "resolver ring has no members");
  // The clockwise successor of H(m) has the least (H(x) - H(m)) mod 2^32.
  const auto h = ring.identity_hash(identity);
  auto it = std::lower_bound(ring.points_.begin(), ring.points_.end(),
                             std::make_pair(h, ServerId{0}));
  if (it == ring.points_.end()) it = ring.points_.begin();
  return it->second;
}

// --- caches ----------------------------------------------------------------

const CacheEntry* IdentityCache::find(std::string_view name) const {
  auto it = entries_.find(name);
  return it == entries_.end() ? nullptr : &it->second;
}

void IdentityCache::upsert(CacheEntry entry) {
  auto name = entry.identity.name;
  entries_.insert_or_assign(std::move(name), std::move(entry));
}

bool IdentityCache::invalidate(std::string_view name) {
  auto it = entries_.find(name);
  if (it == entries_.end() || !it->second.active) return false;
  it->second.active = false;
  return true;
}

bool IdentityCache::erase(std::string_view name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) return false;
  entries_.erase(it);
  return true;
}

bool IdentityCache::pre_registered(std::string_view name) const {
  const auto* e = find(name);
  return e != nullptr && e->active;
}

std::optional<std::string> EgressAllocator::allocate() {
  if (next_ >= end_) return std::nullopt;
  return prefix_ + std::to_string(next_++);
}

// --- service ---------------------------------------------------------------

IdentityService::IdentityService(const topology::Topology& topo, IdentityConfig config)
    : topo_(&topo), config_(config), egress_(config.egress_first, config.egress_count) {
  if (config_.model == ResolutionModel::dht) {
    std::vector<ServerId> members;
    for (std::uint32_t i = 0; i < std::max<std::uint32_t>(config_.ring_members, 1); ++i) {
      members.push_back(i);
    }
    ring_.emplace(std::move(members), config_.ring_seed);
  }
}

IdentityCache& IdentityService::cache_mut(NodeId node) { return caches_[node]; }

const IdentityCache& IdentityService::cache(NodeId node) const {
  static const IdentityCache empty;
  auto it = caches_.find(node);
  return it == caches_.end() ? empty : it->second;
}

const Binding* IdentityService::binding(std::string_view name) const {
  auto it = registry_.find(name);
  if (it != registry_.end()) return &it->second;
  auto ext = by_external_.find(name);
  if (ext != by_external_.end()) return &registry_.find(ext->second)->second;
  return nullptr;
}

const Binding* IdentityService::binding_by_imsi(std::string_view imsi) const {
  auto it = by_imsi_.find(imsi);
  return it == by_imsi_.end() ? nullptr : &registry_.find(it->second)->second;
}

std::optional<NodeId> IdentityService::location(std::string_view name) const {
  auto it = presence_.find(name);
  if (it == presence_.end()) return std::nullopt;
  return it->second;
}

ServerId IdentityService::home_server(NodeId node) const {
  if (!ring_) return 0;
  const auto& members = ring_->members();
  return members[node.value % members.size()];
}

double IdentityService::cloud_round_trip_s(const topology::Path& path, double service_ms,
                                           ServerId resolver, NodeId origin) const {
  double ms = 2.0 * path.latency_ms + service_ms;
  if (ring_ && resolver != home_server(origin)) ms += config_.inter_cloud_rtt_ms;
  return ms / 1000.0;
}

void IdentityService::release_address(const NetworkAddress& addr) {
  if (const auto* zone = topo_->zone(addr.zone)) {
    used_hosts_[zone->id].erase(addr.local_addr - zone->prefix.base);
  }
}

void IdentityService::rebind(Binding& b, NodeId node) {
  if (topo_->zone_of(node) != topo_->zone_of(b.address.node)) {
    release_address(b.address);
    b.address = allocate_address(node);
  } else {
    b.address.node = node;
  }
}

NetworkAddress IdentityService::allocate_address(NodeId node) {
  const auto* zone = topo_->zone_of(node);
  if (zone == nullptr) {
    throw IdentityError(IdentityErrc::address_exhausted,
                        "node " + std::to_string(node.value) + " has no zone");
  }
  auto& used = used_hosts_[zone->id];
  std::uint32_t host = 1;
  for (auto h : used) {
    if (h != host) break;
    ++host;
  }
  if (host >= zone->prefix.capacity()) {
    throw IdentityError(IdentityErrc::address_exhausted, "zone " + zone->id + " is out of addresses");
  }
  used.insert(host);
  return NetworkAddress{zone->id, node, zone->prefix.base + host};
}

IssueOutcome IdentityService::issue_identity(NodeId requester, std::string_view imsi,
                                             IdentityKind kind,
                                             std::optional<std::string> chosen_name, SimTime now) {
  if (!is_valid_imsi(imsi)) {
    return IssueOutcome{IdentityErrc::invalid_imsi, std::nullopt, 0.0, false, false};
  }
  const auto path = topo_->path_to_cloud(requester);
  if (!path) {
    pending_.push_back(PendingRequest{PendingRequest::Kind::issue, requester, std::string(imsi),
                                      kind, std::move(chosen_name)});
    return IssueOutcome{IdentityErrc::backhaul_down, std::nullopt, 0.0, false, true};
  }
  return issue_now(requester, imsi, kind, chosen_name, now, *path);
}

IssueOutcome IdentityService::issue_now(NodeId requester, std::string_view imsi, IdentityKind kind,
                                        const std::optional<std::string>& chosen_name,
                                        SimTime now, const topology::Path& path) {
  backhaul_messages_ += 2;
  IssueOutcome out;

  if (auto it = by_imsi_.find(imsi); it != by_imsi_.end()) {
    // Known SIM: only the address moves.
    auto& b = registry_.find(it->second)->second;
    if (kind == IdentityKind::global && b.identity.kind == IdentityKind::local) {
      auto number = egress_.allocate();
      if (!number) {
        out.error = IdentityErrc::external_alloc_failed;
        return out;
      }
      b.identity.kind = IdentityKind::global;
      b.identity.external_number = *number;
      by_external_.emplace(*number, b.identity.name);
    }
    if (b.address.node != requester) {
      rebind(b, requester);
      b.registered_at = now;
    }
    presence_.insert_or_assign(b.identity.name, requester);
    cache_mut(requester).upsert(CacheEntry{b.identity, b.address, now, true});
    out.identity = b.identity;
    out.latency_s = cloud_round_trip_s(path, config_.issue_service_ms, b.resolver, requester);
    return out;
  }

  std::string name = chosen_name.value_or(std::string(imsi));
  if (registry_.contains(name) || by_external_.contains(name)) {
    out.error = IdentityErrc::duplicate_name;
    return out;
  }

  UserIdentity id;
  id.imsi = std::string(imsi);
  id.name = name;
  id.chosen_name = chosen_name;
  id.kind = kind;
  if (kind == IdentityKind::global) {
    auto number = egress_.allocate();
    if (!number) {
      out.error = IdentityErrc::external_alloc_failed;
      return out;
    }
    id.external_number = *number;
  }

  Binding b;
  b.identity = id;
  b.address = allocate_address(requester);
  b.registered_at = now;
  b.resolver = ring_ ? resolver_for(*ring_, name) : 0;

  by_imsi_.emplace(id.imsi, name);
  if (id.external_number) by_external_.emplace(*id.external_number, name);
  presence_.insert_or_assign(name, requester);
  cache_mut(requester).upsert(CacheEntry{id, b.address, now, true});
  out.latency_s = cloud_round_trip_s(path, config_.issue_service_ms, b.resolver, requester);
  registry_.emplace(name, std::move(b));
  out.identity = std::move(id);
  out.created = true;
  return out;
}

LookupResult IdentityService::lookup(NodeId origin, std::string_view name, SimTime /*now*/) {
  LookupResult res;

  // Intra-zone: caches on nodes reachable without leaving the zone.
  if (const auto* zone = topo_->zone_of(origin)) {
    for (auto peer : zone->node_ids) {
      const auto local = topo_->path_within_zone(origin, peer);
      if (!local) continue;
      auto cit = caches_.find(peer);
      if (cit == caches_.end()) continue;
      const auto* entry = cit->second.find(name);
      if (entry == nullptr) {
        // Global numbers cached under their name.
        for (const auto& [n, e] : cit->second.entries()) {
          if (e.identity.external_number && *e.identity.external_number == name) {
            entry = &e;
            break;
          }
        }
      }
      if (entry == nullptr || !entry->active) continue;
      const auto where = location(entry->identity.name);
      if (where && *where == peer) {
        res.status = LookupResult::Status::address;
        res.stage = LookupStage::intra_zone;
        res.address = entry->address;
        res.latency_s = 2.0 * local->latency_ms / 1000.0;
        return res;
      }
      // Paging failed: the handset left. Invalidate on miss.
      cit->second.invalidate(entry->identity.name);
    }
  }

  const auto path = topo_->path_to_cloud(origin);
  if (!path) {
    res.status = LookupResult::Status::cloud_unreachable;
    return res;
  }
  res.backhaul_messages = 2;
  backhaul_messages_ += 2;

  if (const auto* b = binding(name)) {
    res.status = LookupResult::Status::address;
    res.stage = LookupStage::inter_zone;
    res.address = b->address;
    res.latency_s = cloud_round_trip_s(*path, config_.lookup_service_ms, b->resolver, origin);
    return res;
  }
  if (looks_external(name)) {
    res.status = LookupResult::Status::external_route;
    res.stage = LookupStage::external;
    res.external_route = "egress:" + std::string(name);
    res.latency_s = cloud_round_trip_s(*path, config_.lookup_service_ms, home_server(origin), origin);
    return res;
  }
  res.status = LookupResult::Status::not_found;
  res.latency_s = cloud_round_trip_s(*path, config_.lookup_service_ms, home_server(origin), origin);
  return res;
}

MigrateOutcome IdentityService::migrate_user(std::string_view name, NodeId new_node, SimTime now) {
  MigrateOutcome out;
  auto it = registry_.find(name);
  if (it == registry_.end()) {
    out.error = IdentityErrc::unknown_identity;
    return out;
  }
  auto& b = it->second;
  const auto old_node = location(name).value_or(b.address.node);
  if (old_node == new_node) {
    out.address = b.address;
    return out;
  }

  // Handover between overlapping cells of one zone stays local.
  const auto* old_zone = topo_->zone_of(old_node);
  const auto* new_zone = topo_->zone_of(new_node);
  if (old_zone != nullptr && old_zone == new_zone && topo_->reachable_within_zone(old_node, new_node)) {
    presence_.insert_or_assign(b.identity.name, new_node);
    cache_mut(old_node).invalidate(b.identity.name);
    NetworkAddress addr = b.address;
    addr.node = new_node;
    cache_mut(new_node).upsert(CacheEntry{b.identity, addr, now, true});
    unsynced_handovers_.insert(b.identity.name);
    out.address = addr;
    return out;
  }

  const auto path = topo_->path_to_cloud(new_node);
  // The handset has moved regardless of whether the cloud hears about it.
  presence_.insert_or_assign(b.identity.name, new_node);
  if (!path) {
    pending_.push_back(PendingRequest{PendingRequest::Kind::migrate, new_node, b.identity.name,
                                      b.identity.kind, std::nullopt});
    out.error = IdentityErrc::cloud_unreachable;
    out.queued = true;
    return out;
  }
  return migrate_now(b, new_node, now, *path);
}

MigrateOutcome IdentityService::migrate_now(Binding& b, NodeId new_node, SimTime now,
                                            const topology::Path& /*path*/) {
  backhaul_messages_ += 2;
  MigrateOutcome out;
  out.cloud_round_trip = true;
  rebind(b, new_node);
  b.registered_at = now;
  unsynced_handovers_.erase(b.identity.name);
  cache_mut(new_node).upsert(CacheEntry{b.identity, b.address, now, true});
  out.address = b.address;
  return out;
}

std::vector<std::string> IdentityService::retry_pending(SimTime now) {
  std::vector<std::string> done;
  std::vector<PendingRequest> still;
  for (auto& req : pending_) {
    const auto path = topo_->path_to_cloud(req.node);
    if (!path) {
      still.push_back(std::move(req));
      continue;
    }
    if (req.kind == PendingRequest::Kind::issue) {
      auto res = issue_now(req.node, req.imsi_or_name, req.identity_kind, req.chosen_name, now, *path);
      if (res.identity) done.push_back(res.identity->name);
    } else {
      auto it = registry_.find(req.imsi_or_name);
      if (it == registry_.end()) continue;
      // A later move supersedes this one.
      if (location(req.imsi_or_name) != req.node) continue;
      migrate_now(it->second, req.node, now, *path);
      done.push_back(req.imsi_or_name);
    }
  }
  pending_ = std::move(still);
  return done;
}

bool IdentityService::sync_node(NodeId node, SimTime now) {
  const auto path = topo_->path_to_cloud(node);
  if (!path) return false;
  backhaul_messages_ += 2;
  auto& c = cache_mut(node);

  // Upload handovers recorded on this node.
  for (auto it = unsynced_handovers_.begin(); it != unsynced_handovers_.end();) {
    auto where = location(*it);
    if (where && *where == node) {
      auto& b = registry_.find(*it)->second;
      b.address.node = node;
      b.registered_at = now;
      it = unsynced_handovers_.erase(it);
    } else {
      ++it;
    }
  }

  // Refresh: drop active flags the cloud no longer backs.
  std::vector<std::string> stale;
  for (const auto& [name, entry] : c.entries()) {
    const auto* b = binding(name);
    if (b == nullptr) {
      stale.push_back(name);
      continue;
    }
    if (entry.active && b->address.node != node && !unsynced_handovers_.contains(name)) {
      stale.push_back(name);
    }
  }
  for (const auto& name : stale) c.invalidate(name);
  for (const auto& [name, b] : registry_) {
    if (b.address.node == node) {
      c.upsert(CacheEntry{b.identity, b.address, b.registered_at, true});
    }
  }
  return true;
}

// --- checkpointing ---------------------------------------------------------

void IdentityService::dump(std::ostream& out) const {
  out << "# greenlinks-identity v1 egress_next=" << egress_.next() << '\n';
  for (const auto& [name, b] : registry_) {
    const auto where = location(name).value_or(b.address.node);
    out << "imsi=" << b.identity.imsi << "\tname=" << b.identity.name
        << "\tchosen=" << b.identity.chosen_name.value_or("")
        << "\tkind=" << to_string(b.identity.kind)
        << "\text=" << b.identity.external_number.value_or("") << "\tzone=" << b.address.zone
        << "\tnode=" << b.address.node.value
        << "\taddr=" << topology::format_ipv4(b.address.local_addr)
        << "\tregistered_at=" << format_number(b.registered_at) << "\tresolver=" << b.resolver
        << "\tat=" << where.value << '\n';
  }
}

namespace {

std::map<std::string, std::string> split_record(const std::string& line) {
  std::map<std::string, std::string> fields;
  std::istringstream ss(line);
  std::string token;
  while (std::getline(ss, token, '\t')) {
    const auto eq = token.find('=');
    if (eq == std::string::npos) {
      throw IdentityError(IdentityErrc::malformed_record, "field without '=': " + token);
    }
    fields.emplace(token.substr(0, eq), token.substr(eq + 1));
  }
  return fields;
}

template <typename T>
T parse_num(const std::string& text, const char* field) {
  T value{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw IdentityError(IdentityErrc::malformed_record, std::string("bad number in ") + field);
  }
  return value;
}

}  // namespace

void IdentityService::load(std::istream& in) {
  registry_.clear();
  by_imsi_.clear();
  by_external_.clear();
  presence_.clear();
  caches_.clear();
  used_hosts_.clear();
  pending_.clear();
  unsynced_handovers_.clear();

  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (line.front() == '#') {
      if (auto pos = line.find("egress_next="); pos != std::string::npos) {
        egress_.restore(parse_num<std::uint64_t>(line.substr(pos + 12), "egress_next"));
      }
      continue;
    }
    try {
      auto f = split_record(line);
      for (const char* key : {"imsi", "name", "kind", "zone", "node", "addr", "registered_at"}) {
        if (!f.contains(key)) {
          throw IdentityError(IdentityErrc::malformed_record, std::string("missing field ") + key);
        }
      }
      Binding b;
      b.identity.imsi = f["imsi"];
      b.identity.name = f["name"];
      if (!f["chosen"].empty()) b.identity.chosen_name = f["chosen"];
      if (f["kind"] == "global") {
        b.identity.kind = IdentityKind::global;
      } else if (f["kind"] != "local") {
        throw IdentityError(IdentityErrc::malformed_record, "bad kind " + f["kind"]);
      }
      if (!f["ext"].empty()) b.identity.external_number = f["ext"];
      b.address.zone = f["zone"];
      b.address.node = NodeId{parse_num<std::uint32_t>(f["node"], "node")};
      const auto addr = topology::parse_ipv4(f["addr"]);
      if (!addr) throw IdentityError(IdentityErrc::malformed_record, "bad addr " + f["addr"]);
      b.address.local_addr = *addr;
      b.registered_at = std::stod(f["registered_at"]);
      if (f.contains("resolver")) b.resolver = parse_num<ServerId>(f["resolver"], "resolver");
      const NodeId at{f.contains("at") ? parse_num<std::uint32_t>(f["at"], "at") : b.address.node.value};

      if (!is_valid_imsi(b.identity.imsi)) {
        throw IdentityError(IdentityErrc::invalid_imsi, "bad imsi " + b.identity.imsi);
      }
      if (registry_.contains(b.identity.name) || by_imsi_.contains(b.identity.imsi)) {
        throw IdentityError(IdentityErrc::duplicate_name, "duplicate record " + b.identity.name);
      }
      if (const auto* zone = topo_->zone(b.address.zone)) {
        const auto host = b.address.local_addr - zone->prefix.base;
        if (!used_hosts_[zone->id].insert(host).second) {
          throw IdentityError(IdentityErrc::malformed_record,
                              "address in use");
        }
      }
      by_imsi_.emplace(b.identity.imsi, b.identity.name);
      if (b.identity.external_number) by_external_.emplace(*b.identity.external_number, b.identity.name);
      presence_.insert_or_assign(b.identity.name, at);
      cache_mut(b.address.node).upsert(CacheEntry{b.identity, b.address, b.registered_at, true});
      registry_.emplace(b.identity.name, std::move(b));
    } catch (const IdentityError& e) {
      throw IdentityError(e.code(), "line " + std::to_string(lineno) + ": " + e.what());
    } catch (const std::invalid_argument&) {
      throw IdentityError(IdentityErrc::malformed_record, "line " + std::to_string(lineno));
    }
  }
}

}  // namespace greenlinks::identity
