#include "greenlinks/apps.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace greenlinks::apps {

std::string_view to_string(AppErrc code) noexcept {
  switch (code) {
    case AppErrc::invalid_listing: return "InvalidListing";
    case AppErrc::not_registered: return "NotRegistered";
    case AppErrc::backhaul_down: return "BackhaulDown";
    case AppErrc::timeout: return "Timeout";
    case AppErrc::listing_not_found: return "ListingNotFound";
    case AppErrc::sold_out: return "SoldOut";
    case AppErrc::invalid_trace: return "InvalidTrace";
    case AppErrc::invalid_message: return "InvalidMessage";
    case AppErrc::no_messages: return "NoMessages";
    case AppErrc::parse_error: return "ParseError";
    case AppErrc::queue_full: return "QueueFull";
  }
  return "?";
}

AppErrc from_sync(sync::SyncErrc code) noexcept {
  switch (code) {
    case sync::SyncErrc::queue_full: return AppErrc::queue_full;
    case sync::SyncErrc::backhaul_down: return AppErrc::backhaul_down;
    case sync::SyncErrc::payload_empty: return AppErrc::invalid_message;
    case sync::SyncErrc::timeout:
    case sync::SyncErrc::expired:
    case sync::SyncErrc::rejected: return AppErrc::timeout;
  }
  return AppErrc::timeout;
}

namespace {

std::string shortest(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  (void)ec;
  return std::string(buf, end);
}

std::optional<double> parse_double(std::string_view s) {
  double v = 0.0;
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || end != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

template <typename T>
std::optional<T> parse_uint(std::string_view s) {
  T v{};
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || end != s.data() + s.size()) return std::nullopt;
  return v;
}

std::vector<std::string_view> split_ws(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    const auto start = i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i > start) out.push_back(text.substr(start, i - start));
  }
  return out;
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool plain_word(std::string_view s) {
  if (s.empty()) return false;
  return std::none_of(s.begin(), s.end(), [](char c) {
    return c == ';' || c == '=' || c == '\n' || std::isspace(static_cast<unsigned char>(c));
  });
}

// key=value fields separated by ';'.
std::map<std::string, std::string, std::less<>> fields(std::string_view value) {
  std::map<std::string, std::string, std::less<>> out;
  std::size_t pos = 0;
  while (pos <= value.size()) {
    auto end = value.find(';', pos);
    if (end == std::string_view::npos) end = value.size();
    auto part = value.substr(pos, end - pos);
    if (auto eq = part.find('='); eq != std::string_view::npos) {
      out.emplace(std::string(part.substr(0, eq)), std::string(part.substr(eq + 1)));
    }
    pos = end + 1;
  }
  return out;
}

}  // namespace

std::vector<std::string> chunk_sms(std::string_view text, std::size_t limit) {
  std::vector<std::string> out;
  if (limit == 0) return out;
  while (!text.empty()) {
    if (text.size() <= limit) {
      out.emplace_back(text);
      break;
    }
    // Cut after the last newline that fits; failing that, cut hard.
    auto cut = text.substr(0, limit).rfind('\n');
    const std::size_t take = cut == std::string_view::npos ? limit : cut + 1;
    out.emplace_back(text.substr(0, take));
    text.remove_prefix(take);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Marketplace

std::string encode_listing(const Listing& l) {
  return "item=" + l.item + ";qty=" + std::to_string(l.quantity) + ";price=" + shortest(l.price) +
         ";seller=" + l.seller;
}

std::optional<Listing> decode_listing(std::string_view id, std::string_view value) {
  auto f = fields(value);
  auto it = f.find("item"), q = f.find("qty"), p = f.find("price"), s = f.find("seller");
  if (it == f.end() || q == f.end() || p == f.end() || s == f.end()) return std::nullopt;
  auto qty = parse_uint<std::uint32_t>(q->second);
  auto price = parse_double(p->second);
  if (!qty || !price) return std::nullopt;
  return Listing{std::string(id), it->second, *price, *qty, s->second};
}

ParseResult parse_command(std::string_view text) {
  const auto words = split_ws(text);
  if (words.empty()) return {std::nullopt, "empty message"};
  const auto verb = lower(words[0]);
  if (verb == "sell") {
    if (words.size() != 4) return {std::nullopt, "usage: SELL <item> <qty> <price>"};
    auto qty = parse_uint<std::uint32_t>(words[2]);
    if (!qty || *qty == 0) return {std::nullopt, "quantity must be a positive integer"};
    auto price = parse_double(words[3]);
    if (!price || *price <= 0.0) return {std::nullopt, "price must be positive"};
    if (!plain_word(words[1])) return {std::nullopt, "bad item name"};
    return {SellCommand{lower(words[1]), *qty, *price}, {}};
  }
  if (verb == "buy") {
    if (words.size() != 2) return {std::nullopt, "usage: BUY <listing_id>"};
    return {BuyCommand{std::string(words[1])}, {}};
  }
  if (verb == "search") {
    if (words.size() != 2) return {std::nullopt, "usage: SEARCH <item>"};
    return {SearchCommand{lower(words[1])}, {}};
  }
  return {std::nullopt, "unknown command " + std::string(words[0])};
}

Marketplace::Marketplace(Engine& engine, sync::SyncService& sync,
                         const identity::IdentityService* ids)
    : engine_(&engine), sync_(&sync), ids_(ids) {}

std::uint64_t Marketplace::sold(std::string_view listing_id) const {
  auto it = sold_.find(listing_id);
  return it == sold_.end() ? 0 : it->second;
}

SellResult Marketplace::sell(NodeId node, const std::string& seller, const std::string& item,
                             std::uint32_t quantity, double price) {
  SellResult out;
  out.acked_at = engine_->now();
  if (quantity == 0 || !(price > 0.0) || !std::isfinite(price) || !plain_word(item) ||
      !plain_word(seller)) {
    out.error = AppErrc::invalid_listing;
    return out;
  }
  if (ids_ && !ids_->cache(node).pre_registered(seller)) {
    out.error = AppErrc::not_registered;
    return out;
  }
  const auto n = ++next_listing_[node.value];
  Listing l{"L" + std::to_string(node.value) + "-" + std::to_string(n), item, price, quantity,
            seller};
  auto ack = sync_->slowput(node, seller, std::string(kApp), l.id, sync::Payload::of(encode_listing(l)));
  if (ack.error) {
    out.error = from_sync(*ack.error);
    return out;
  }
  registry_.add({std::string(kApp), l.id, {seller}});
  out.listing_id = l.id;
  out.request = ack.id;
  listed_.push_back(std::move(l));
  return out;
}

void Marketplace::buy(NodeId node, const std::string& buyer, const std::string& listing_id,
                      std::function<void(const BuyResult&)> done) {
  auto op = [this, listing_id](const sync::Record* cur) {
    sync::FastgetApply a;
    std::optional<Listing> l = cur ? decode_listing(listing_id, cur->value) : std::nullopt;
    if (!l) {
      a.ok = false;
      a.response = "NOTFOUND";
      return a;
    }
    if (l->quantity == 0) {
      a.ok = false;
      a.response = "SOLDOUT";
      return a;
    }
    a.response = encode_listing(*l);
    sold_[listing_id] += l->quantity;
    l->quantity = 0;
    a.write = encode_listing(*l);
    return a;
  };
  sync_->fastget(node, buyer, std::string(kApp), listing_id, sync::Payload::of("BUY " + listing_id),
                 std::move(op),
                 [this, buyer, listing_id, done = std::move(done)](const sync::FastgetResult& r) {
                   BuyResult out;
                   out.issued_at = r.issued_at;
                   out.completed_at = r.completed_at;
                   if (r.error) {
                     out.error = from_sync(*r.error);
                   } else if (!r.ok) {
                     out.error = r.response == "SOLDOUT" ? AppErrc::sold_out
                                                         : AppErrc::listing_not_found;
                   } else {
                     out.listing = decode_listing(listing_id, r.response);
                     if (out.listing) {
                       transactions_.push_back({r.completed_at, listing_id, buyer,
                                                out.listing->seller, out.listing->quantity});
                     }
                   }
                   if (done) done(out);
                 });
}

void Marketplace::search(NodeId node, const std::string& buyer, const std::string& item,
                         std::function<void(const SearchReply&)> done) {
  auto match = [item](std::string_view key, const sync::Record& rec) {
    auto l = decode_listing(key, rec.value);
    return l && l->item == item && l->quantity > 0;
  };
  sync_->fastsearch(
      node, buyer, std::string(kApp), sync::Payload::of("SEARCH " + item), std::move(match),
      [item, done = std::move(done)](const sync::SearchResult& r) {
        SearchReply out;
        out.issued_at = r.issued_at;
        out.completed_at = r.completed_at;
        if (r.error) {
          out.error = from_sync(*r.error);
        } else {
          std::string text;
          for (const auto& [key, rec] : r.records) {
            auto l = decode_listing(key, rec.value);
            if (!l) continue;
            if (!text.empty()) text += '\n';
            text += l->id + " " + l->item + " " + std::to_string(l->quantity) + "@" +
                    format_number(l->price) + " " + l->seller;
            out.listings.push_back(std::move(*l));
          }
          if (out.listings.empty()) text = "NO RESULTS FOR " + item;
          out.sms = chunk_sms(text);
        }
        if (done) done(out);
      });
}

void Marketplace::handle_sms(NodeId node, const std::string& user, std::string_view text,
                             std::function<void(const std::vector<std::string>&)> reply) {
  auto parsed = parse_command(text);
  if (!parsed.command) {
    reply({"ERROR " + parsed.error});
    return;
  }
  if (auto* s = std::get_if<SellCommand>(&*parsed.command)) {
    auto r = sell(node, user, s->item, s->quantity, s->price);
    reply({r.error ? "SELL FAILED " + std::string(to_string(*r.error)) : "SELL OK " + r.listing_id});
  } else if (auto* b = std::get_if<BuyCommand>(&*parsed.command)) {
    buy(node, user, b->listing_id, [reply, id = b->listing_id](const BuyResult& r) {
      if (r.error) {
        reply({"BUY FAILED " + id + " " + std::string(to_string(*r.error))});
      } else {
        reply({"BUY OK " + id + " CONTACT " + (r.listing ? r.listing->seller : std::string{})});
      }
    });
  } else {
    const auto& q = std::get<SearchCommand>(*parsed.command);
    search(node, user, q.item, [reply](const SearchReply& r) {
      if (r.error) {
        reply({"SEARCH FAILED " + std::string(to_string(*r.error))});
      } else {
        reply(r.sms);
      }
    });
  }
}

// ---------------------------------------------------------------------------
// IVR

std::string_view to_string(Language lang) noexcept {
  return lang == Language::twi ? "twi" : "english";
}

std::string encode_voice(const VoiceMessage& m) {
  std::string head = "author=" + m.author + ";lang=" + std::string(to_string(m.language)) +
                     ";at=" + shortest(m.recorded_at) + ";size=" + std::to_string(m.audio.size) +
                     "\n";
  return head + m.audio.data;
}

std::optional<VoiceMessage> decode_voice(std::string_view id, std::string_view value) {
  const auto nl = value.find('\n');
  if (nl == std::string_view::npos) return std::nullopt;
  auto f = fields(value.substr(0, nl));
  auto a = f.find("author"), l = f.find("lang"), t = f.find("at"), s = f.find("size");
  if (a == f.end() || l == f.end() || t == f.end() || s == f.end()) return std::nullopt;
  auto at = parse_double(t->second);
  auto size = parse_uint<std::uint64_t>(s->second);
  if (!at || !size || (l->second != "english" && l->second != "twi")) return std::nullopt;
  VoiceMessage m;
  m.id = std::string(id);
  m.author = a->second;
  m.language = l->second == "twi" ? Language::twi : Language::english;
  m.recorded_at = *at;
  m.audio = sync::Payload::synthetic(std::string(value.substr(nl + 1)), *size);
  return m;
}

Ivr::Ivr(Engine& engine, sync::SyncService& sync, double session_s)
    : engine_(&engine), sync_(&sync), session_s_(session_s) {}

RecordResult Ivr::record_message(NodeId node, const std::string& author, sync::Payload audio,
                                 Language language) {
  RecordResult out;
  out.acked_at = engine_->now();
  if (audio.size == 0 || author.empty()) {
    out.error = AppErrc::invalid_message;
    return out;
  }
  VoiceMessage m;
  m.id = "V" + std::to_string(node.value) + "-" + std::to_string(++next_id_);
  m.author = author;
  m.audio = std::move(audio);
  m.language = language;
  m.recorded_at = engine_->now();
  const auto encoded = encode_voice(m);
  auto ack = sync_->slowput(node, author, std::string(kApp), m.id,
                            sync::Payload::synthetic(encoded, encoded.size() + m.audio.size -
                                                                  m.audio.data.size()));
  if (ack.error) {
    out.error = from_sync(*ack.error);
    return out;
  }
  out.message_id = m.id;
  auto& cache = caches_[node];
  cache.session_start = engine_->now();
  cache.latest = std::move(m);
  return out;
}

void Ivr::fetch_latest(NodeId node, const std::string& listener,
                       std::function<void(const FetchResult&)> done) {
  const auto now = engine_->now();
  auto& cache = caches_[node];
  if (cache.session_start && now - *cache.session_start < session_s_ && cache.latest) {
    FetchResult r;
    r.message = cache.latest;
    r.source = FetchResult::Source::local_cache;
    r.issued_at = r.completed_at = now;
    engine_->schedule(now, EventKind::custom, [r, done] { if (done) done(r); }, "ivr_local");
    return;
  }
  auto fail = [done, now](AppErrc code, SimTime at) {
    FetchResult r;
    r.error = code;
    r.source = FetchResult::Source::cloud;
    r.issued_at = now;
    r.completed_at = at;
    if (done) done(r);
  };
  sync_->fastsearch(
      node, listener, std::string(kApp), sync::Payload::of("LATEST"),
      [](std::string_view, const sync::Record&) { return true; },
      [this, node, listener, now, done, fail](const sync::SearchResult& sr) {
        if (sr.error) return fail(from_sync(*sr.error), sr.completed_at);
        std::optional<VoiceMessage> newest;
        for (const auto& [key, rec] : sr.records) {
          auto m = decode_voice(key, rec.value);
          if (m && (!newest || m->recorded_at > newest->recorded_at)) newest = std::move(m);
        }
        if (!newest) return fail(AppErrc::no_messages, sr.completed_at);
        sync_->fastget(
            node, listener, std::string(kApp), newest->id, sync::Payload::of("GET " + newest->id),
            [](const sync::Record* cur) {
              sync::FastgetApply a;
              a.ok = cur != nullptr;
              if (cur) a.response = cur->value;
              return a;
            },
            [this, node, now, id = newest->id, done, fail](const sync::FastgetResult& fr) {
              if (fr.error) return fail(from_sync(*fr.error), fr.completed_at);
              auto m = fr.ok ? decode_voice(id, fr.response) : std::nullopt;
              if (!m) return fail(AppErrc::no_messages, fr.completed_at);
              auto& c = caches_[node];
              c.session_start = engine_->now();
              c.latest = m;
              FetchResult r;
              r.message = std::move(m);
              r.source = FetchResult::Source::cloud;
              r.issued_at = now;
              r.completed_at = fr.completed_at;
              if (done) done(r);
            });
      });
}

// ---------------------------------------------------------------------------
// Farm traces

std::string encode_farm(const FarmTrace& trace) {
  std::string out = "crop=" + trace.crop + "\n";
  char buf[96];
  for (const auto& [lat, lon] : trace.waypoints) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", lat, lon);
    out += buf;
  }
  return out;
}

std::optional<FarmTrace> decode_farm(std::string_view farm_id, std::string_view value) {
  FarmTrace t;
  t.farm_id = std::string(farm_id);
  std::size_t pos = 0;
  bool first = true;
  while (pos < value.size()) {
    auto end = value.find('\n', pos);
    if (end == std::string_view::npos) end = value.size();
    auto line = value.substr(pos, end - pos);
    pos = end + 1;
    if (first) {
      if (line.substr(0, 5) != "crop=") return std::nullopt;
      t.crop = std::string(line.substr(5));
      first = false;
      continue;
    }
    auto comma = line.find(',');
    if (comma == std::string_view::npos) return std::nullopt;
    auto lat = parse_double(line.substr(0, comma));
    auto lon = parse_double(line.substr(comma + 1));
    if (!lat || !lon) return std::nullopt;
    t.waypoints.emplace_back(*lat, *lon);
  }
  if (first) return std::nullopt;
  return t;
}

UploadResult upload_farm(sync::SyncService& sync, NodeId node, const std::string& surveyor,
                         const FarmTrace& trace) {
  UploadResult out;
  if (trace.waypoints.size() < 3 || !plain_word(trace.farm_id)) {
    out.error = AppErrc::invalid_trace;
    return out;
  }
  auto ack = sync.slowput(node, surveyor, std::string(kFarmApp), trace.farm_id,
                          sync::Payload::of(encode_farm(trace)));
  out.acked_at = ack.acked_at;
  out.request = ack.id;
  if (ack.error) out.error = from_sync(*ack.error);
  return out;
}

// ---------------------------------------------------------------------------
// Workload

WorkloadDriver::WorkloadDriver(Engine& engine, topology::Topology& topo,
                               identity::IdentityService& ids, sync::SyncService& sync,
                               Workload workload, std::uint64_t seed)
    : engine_(&engine),
      topo_(&topo),
      ids_(&ids),
      sync_(&sync),
      workload_(std::move(workload)),
      seed_(seed),
      market_(engine, sync, &ids) {}

Rng& WorkloadDriver::rng(const std::string& stream) {
  auto it = rngs_.find(stream);
  if (it == rngs_.end()) {
    it = rngs_.emplace(stream, Rng(derive_seed(seed_, identity::ring_hash(stream, 0x5eed)))).first;
  }
  return it->second;
}

std::string WorkloadDriver::enroll(NodeId node, const std::string& name) {
  char imsi[16];
  std::snprintf(imsi, sizeof imsi, "00101%010llu", static_cast<unsigned long long>(++next_imsi_));
  auto out = ids_->issue_identity(node, imsi, identity::IdentityKind::local, name, engine_->now());
  return out.identity ? out.identity->name : name;
}

bool WorkloadDriver::active() const { return engine_->now() < until_; }

void WorkloadDriver::start(SimTime horizon) {
  until_ = workload_.active_until.value_or(horizon);
  const auto tag = [](const char* kind, std::size_t a, std::size_t b = 0) {
    return std::string(kind) + "/" + std::to_string(a) + "/" + std::to_string(b);
  };

  for (std::size_t li = 0; li < workload_.market.size(); ++li) {
    const auto& load = workload_.market[li];
    const auto n = std::to_string(load.node.value);
    sellers_.emplace_back();
    buyers_.emplace_back();
    for (std::size_t i = 0; i < load.sellers; ++i) {
      sellers_[li].push_back({enroll(load.node, "seller" + n + "x" + std::to_string(i)), load.node});
      const double d = rng(tag("sell", li, i)).exponential(load.sell_mean_s);
      engine_->schedule_in(d, EventKind::traffic, [this, li, i] { schedule_sell(li, i); }, "sell");
    }
    for (std::size_t i = 0; i < load.buyers; ++i) {
      buyers_[li].push_back({enroll(load.node, "buyer" + n + "x" + std::to_string(i)), load.node});
      const double d = rng(tag("buy", li, i)).exponential(load.buy_mean_s);
      engine_->schedule_in(d, EventKind::traffic, [this, li, i] { schedule_buy(li, i); }, "buy");
    }
  }

  for (std::size_t fi = 0; fi < workload_.files.size(); ++fi) {
    const auto& load = workload_.files[fi];
    for (std::size_t k = 0; k < load.backlog; ++k) {
      sync_->slowput(load.node, "uploader", load.app, "f" + std::to_string(++file_seq_),
                     sync::Payload::synthetic("file", load.bytes));
      ++stats_.files;
    }
    if (load.interval_s > 0.0) {
      engine_->schedule_in(load.interval_s, EventKind::traffic, [this, fi] { schedule_file(fi); },
                           "file");
    }
  }

  for (std::size_t si = 0; si < workload_.sms.size(); ++si) {
    const auto& load = workload_.sms[si];
    sms_users_.emplace_back();
    for (std::size_t i = 0; i < load.users; ++i) {
      sms_users_[si].push_back(
          {enroll(load.node, "texter" + std::to_string(load.node.value) + "x" + std::to_string(i)),
           load.node});
      const double d = rng(tag("sms", si, i)).exponential(load.mean_s);
      engine_->schedule_in(d, EventKind::traffic, [this, si, i] { schedule_sms(si, i); }, "sms");
    }
  }

  if (workload_.messages) {
    for (const auto& node : topo_->nodes()) {
      if (node.role == topology::Role::cloud) continue;
      for (std::size_t i = 0; i < workload_.messages->users_per_node; ++i) {
        message_users_.push_back(
            {enroll(node.id, "user" + std::to_string(node.id.value) + "x" + std::to_string(i)),
             node.id});
      }
    }
    if (message_users_.size() >= 2) {
      for (std::size_t u = 0; u < message_users_.size(); ++u) {
        const double d = rng(tag("msg", u)).exponential(workload_.messages->mean_s);
        engine_->schedule_in(d, EventKind::traffic, [this, u] { schedule_message(u); }, "message");
      }
    }
  }
}

void WorkloadDriver::schedule_sell(std::size_t li, std::size_t i) {
  if (!active()) return;
  const auto& load = workload_.market[li];
  auto& r = rng("sell/" + std::to_string(li) + "/" + std::to_string(i));
  const auto& user = sellers_[li][i];
  const auto& item = load.items[r.below(load.items.size())];
  const auto qty = static_cast<std::uint32_t>(1 + r.below(5));
  const double price = static_cast<double>(1 + r.below(100));
  auto res = market_.sell(user.node, user.name, item, qty, price);
  ++stats_.sells;
  if (res.error) ++stats_.sells_rejected;
  engine_->schedule_in(r.exponential(load.sell_mean_s), EventKind::traffic,
                       [this, li, i] { schedule_sell(li, i); }, "sell");
}

void WorkloadDriver::schedule_buy(std::size_t li, std::size_t i) {
  if (!active()) return;
  const auto& load = workload_.market[li];
  auto& r = rng("buy/" + std::to_string(li) + "/" + std::to_string(i));
  const auto& user = buyers_[li][i];
  if (load.search_share > 0.0 && r.bernoulli(load.search_share)) {
    ++stats_.searches;
    market_.search(user.node, user.name, load.items[r.below(load.items.size())], {});
  } else if (!market_.listed().empty()) {
    const auto& listing = market_.listed()[r.below(market_.listed().size())];
    ++stats_.buys;
    market_.buy(user.node, user.name, listing.id, [this](const BuyResult& b) {
      if (b.error) {
        ++stats_.buys_failed;
      } else {
        ++stats_.buys_ok;
      }
    });
  }
  engine_->schedule_in(r.exponential(load.buy_mean_s), EventKind::traffic,
                       [this, li, i] { schedule_buy(li, i); }, "buy");
}

void WorkloadDriver::schedule_file(std::size_t fi) {
  if (!active()) return;
  const auto& load = workload_.files[fi];
  sync_->slowput(load.node, "uploader", load.app, "f" + std::to_string(++file_seq_),
                 sync::Payload::synthetic("file", load.bytes));
  ++stats_.files;
  engine_->schedule_in(load.interval_s, EventKind::traffic, [this, fi] { schedule_file(fi); },
                       "file");
}

void WorkloadDriver::schedule_sms(std::size_t si, std::size_t i) {
  if (!active()) return;
  const auto& load = workload_.sms[si];
  auto& r = rng("sms/" + std::to_string(si) + "/" + std::to_string(i));
  const auto& user = sms_users_[si][i];
  sync_->slowput(user.node, user.name, "sms", {}, sync::Payload::synthetic("sms", load.bytes));
  ++stats_.sms;
  engine_->schedule_in(r.exponential(load.mean_s), EventKind::traffic,
                       [this, si, i] { schedule_sms(si, i); }, "sms");
}

void WorkloadDriver::schedule_message(std::size_t u) {
  if (!active()) return;
  auto& r = rng("msg/" + std::to_string(u) + "/0");
  auto to = r.below(message_users_.size() - 1);
  if (to >= u) ++to;
  const auto& from = message_users_[u];
  sync::Message m;
  m.id = "m" + std::to_string(++msg_seq_);
  m.from = from.name;
  m.to = message_users_[to].name;
  m.body = sync::Payload::of("hello from " + from.name);
  stats_.message_ids.push_back(m.id);
  ++stats_.messages;
  sync_->store_and_forward(from.node, std::move(m));
  engine_->schedule_in(r.exponential(workload_.messages->mean_s), EventKind::traffic,
                       [this, u] { schedule_message(u); }, "message");
}

}  // namespace greenlinks::apps
