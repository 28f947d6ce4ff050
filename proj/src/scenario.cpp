#include "greenlinks/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <map>
#include <set>
#include <sstream>
#include <vector>

#include "json.hpp"

namespace greenlinks {

namespace {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Where each value sits in the source text.
//
// nlohmann/json does not keep positions, so the text is fed through an
// iterator that counts characters while a SAX pass records the line of
// every JSON pointer.

class CountingIterator {
 public:
  using iterator_category = std::input_iterator_tag;
  using value_type = char;
  using difference_type = std::ptrdiff_t;
  using pointer = const char*;
  using reference = const char&;

  CountingIterator(const char* p, std::size_t* count) : p_(p), count_(count) {}
  reference operator*() const { return *p_; }
  CountingIterator& operator++() {
    ++p_;
    ++*count_;
    return *this;
  }
  CountingIterator operator++(int) {
    auto old = *this;
    ++*this;
    return old;
  }
  bool operator==(const CountingIterator& o) const { return p_ == o.p_; }
  bool operator!=(const CountingIterator& o) const { return p_ != o.p_; }

 private:
  const char* p_;
  std::size_t* count_;
};

class Locator {
 public:
  explicit Locator(std::string_view text) : text_(text) {
    starts_.push_back(0);
    for (std::size_t i = 0; i < text.size(); ++i) {
      if (text[i] == '\n') starts_.push_back(i + 1);
    }
  }

  [[nodiscard]] int line_at(std::size_t offset) const {
    auto it = std::upper_bound(starts_.begin(), starts_.end(), offset);
    return static_cast<int>(it - starts_.begin());
  }

  // Line of the last character of the token that ends at `consumed`.
  [[nodiscard]] int token_line(std::size_t consumed) const {
    if (consumed == 0 || text_.empty()) return 1;
    std::size_t pos = std::min(consumed, text_.size()) - 1;
    while (pos > 0 && std::string_view(" \t\r\n,]}").find(text_[pos]) != std::string_view::npos) --pos;
    return line_at(pos);
  }

  void set(const std::string& pointer, int line) { lines_.emplace(pointer, line); }

  /// Line of `pointer`, or of its nearest recorded ancestor.
  [[nodiscard]] int line(std::string pointer) const {
    while (true) {
      if (auto it = lines_.find(pointer); it != lines_.end()) return it->second;
      if (pointer.empty()) return 1;
      pointer.resize(pointer.rfind('/'));
    }
  }

 private:
  std::string_view text_;
  std::vector<std::size_t> starts_;
  std::map<std::string, int> lines_;
};

class LineSax {
 public:
  LineSax(Locator& loc, const std::size_t& consumed) : loc_(loc), consumed_(consumed) {}

  bool null() { return scalar(); }
  bool boolean(bool) { return scalar(); }
  bool number_integer(json::number_integer_t) { return scalar(); }
  bool number_unsigned(json::number_unsigned_t) { return scalar(); }
  bool number_float(json::number_float_t, const std::string&) { return scalar(); }
  bool string(std::string&) { return scalar(); }
  bool binary(json::binary_t&) { return scalar(); }
  bool start_object(std::size_t) {
    frames_.push_back({value_path(), false, 0, {}});
    return true;
  }
  bool key(std::string& k) {
    auto& f = frames_.back();
    f.key = escape(k);
    loc_.set(f.path + "/" + f.key, loc_.token_line(consumed_));
    return true;
  }
  bool end_object() {
    frames_.pop_back();
    return true;
  }
  bool start_array(std::size_t) {
    frames_.push_back({value_path(), true, 0, {}});
    return true;
  }
  bool end_array() {
    frames_.pop_back();
    return true;
  }
  bool parse_error(std::size_t, const std::string&, const nlohmann::detail::exception&) {
    return false;
  }

 private:
  struct Frame {
    std::string path;
    bool array;
    std::size_t index;
    std::string key;
  };

  static std::string escape(const std::string& k) {
    std::string out;
    for (char c : k) {
      if (c == '~') out += "~0";
      else if (c == '/') out += "~1";
      else out += c;
    }
    return out;
  }

  // Path of the value that starts now; array elements get their line here.
  std::string value_path() {
    if (frames_.empty()) return {};
    auto& f = frames_.back();
    if (!f.array) return f.path + "/" + f.key;
    auto p = f.path + "/" + std::to_string(f.index++);
    loc_.set(p, loc_.token_line(consumed_));
    return p;
  }
  bool scalar() {
    value_path();
    return true;
  }

  Locator& loc_;
  const std::size_t& consumed_;
  std::vector<Frame> frames_;
};

// ---------------------------------------------------------------------------
// Typed reads with diagnostics.

struct Ctx {
  std::string source;
  const Locator* loc;

  [[noreturn]] void fail(const std::string& pointer, const std::string& msg) const {
    throw ScenarioError(source, loc->line(pointer), msg);
  }
};

std::string label(const std::string& pointer) {
  if (pointer.empty()) return "document";
  std::string out = pointer.substr(1);
  std::replace(out.begin(), out.end(), '/', '.');
  return out;
}

class Obj {
 public:
  Obj(const Ctx& ctx, const json& j, std::string pointer)
      : ctx_(&ctx), j_(&j), ptr_(std::move(pointer)) {
    if (!j.is_object()) ctx.fail(ptr_, label(ptr_) + " must be an object");
  }

  /// Rejects keys outside `allowed`.
  void only(std::initializer_list<std::string_view> allowed) const {
    for (const auto& [k, v] : j_->items()) {
      if (std::find(allowed.begin(), allowed.end(), k) == allowed.end()) {
        ctx_->fail(at(k), "unknown key '" + k + "' in " + label(ptr_));
      }
    }
  }

  [[nodiscard]] bool has(const std::string& k) const { return j_->contains(k) && !(*j_)[k].is_null(); }
  [[nodiscard]] std::string at(const std::string& k) const { return ptr_ + "/" + k; }
  [[nodiscard]] const json& raw(const std::string& k) const { return (*j_)[k]; }
  [[nodiscard]] Obj obj(const std::string& k) const {
    if (!has(k)) ctx_->fail(ptr_, "missing " + label(at(k)));
    return Obj(*ctx_, (*j_)[k], at(k));
  }
  [[nodiscard]] const Ctx& ctx() const { return *ctx_; }
  [[nodiscard]] const std::string& pointer() const { return ptr_; }

  [[nodiscard]] double num(const std::string& k, double def) const {
    if (!has(k)) return def;
    const auto& v = (*j_)[k];
    if (!v.is_number()) ctx_->fail(at(k), label(at(k)) + " must be a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) ctx_->fail(at(k), label(at(k)) + " must be finite");
    return d;
  }
  [[nodiscard]] double nonneg(const std::string& k, double def) const {
    const double d = num(k, def);
    if (d < 0) ctx_->fail(at(k), label(at(k)) + " must be >= 0");
    return d;
  }
  [[nodiscard]] double positive(const std::string& k, double def) const {
    const double d = num(k, def);
    if (!(d > 0)) ctx_->fail(at(k), label(at(k)) + " must be > 0");
    return d;
  }
  [[nodiscard]] double fraction(const std::string& k, double def) const {
    const double d = num(k, def);
    if (d < 0 || d > 1) ctx_->fail(at(k), label(at(k)) + " must lie in [0, 1]");
    return d;
  }
  [[nodiscard]] std::uint64_t count(const std::string& k, std::uint64_t def) const {
    if (!has(k)) return def;
    const auto& v = (*j_)[k];
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
      ctx_->fail(at(k), label(at(k)) + " must be a non-negative integer");
    }
    return v.get<std::uint64_t>();
  }
  [[nodiscard]] bool flag(const std::string& k, bool def) const {
    if (!has(k)) return def;
    const auto& v = (*j_)[k];
    if (!v.is_boolean()) ctx_->fail(at(k), label(at(k)) + " must be true or false");
    return v.get<bool>();
  }
  [[nodiscard]] std::string str(const std::string& k, const std::string& def) const {
    if (!has(k)) return def;
    const auto& v = (*j_)[k];
    if (!v.is_string()) ctx_->fail(at(k), label(at(k)) + " must be a string");
    return v.get<std::string>();
  }
  [[nodiscard]] std::string need_str(const std::string& k) const {
    if (!has(k)) ctx_->fail(ptr_, "missing " + label(at(k)));
    return str(k, {});
  }
  template <typename F>
  void each(const std::string& k, F&& f) const {
    if (!has(k)) return;
    const auto& v = (*j_)[k];
    if (!v.is_array()) ctx_->fail(at(k), label(at(k)) + " must be an array");
    for (std::size_t i = 0; i < v.size(); ++i) f(v[i], at(k) + "/" + std::to_string(i));
  }

 private:
  const Ctx* ctx_;
  const json* j_;
  std::string ptr_;
};

// ---------------------------------------------------------------------------
// Sections

topology::LinkProfile profile(const Obj& o, const std::string& k, topology::LinkProfile def) {
  if (!o.has(k)) return def;
  auto p = topology::parse_profile(o.str(k, {}));
  if (!p) o.ctx().fail(o.at(k), "unknown link profile '" + o.str(k, {}) + "' (edge, hsdpa, ethernet, custom)");
  return *p;
}

topology::TopologySpec read_topology(const Obj& t) {
  t.only({"preset", "tree", "nodes", "zones", "links", "bonded"});
  const bool explicit_nodes = t.has("nodes");
  const int kinds = int(t.has("preset")) + int(t.has("tree")) + int(explicit_nodes);
  if (kinds != 1) t.ctx().fail(t.pointer(), "topology needs exactly one of preset, tree or nodes");

  if (t.has("preset")) {
    const auto p = t.str("preset", {});
    if (p != "three_node") t.ctx().fail(t.at("preset"), "unknown preset '" + p + "' (three_node)");
    return topology::three_node_deployment();
  }
  if (t.has("tree")) {
    auto tr = t.obj("tree");
    tr.only({"level2", "level3", "backhaul", "access"});
    return topology::generate_tree(tr.count("level2", 3), tr.count("level3", 6),
                                   profile(tr, "backhaul", topology::LinkProfile::hsdpa),
                                   profile(tr, "access", topology::LinkProfile::ethernet));
  }

  topology::TopologySpec spec;
  t.each("nodes", [&](const json& j, const std::string& p) {
    Obj n(t.ctx(), j, p);
    n.only({"id", "name", "role", "zone", "parent", "tx_power_dbm"});
    topology::NodeSpec s;
    s.id = static_cast<std::uint32_t>(n.count("id", spec.nodes.size()));
    s.name = n.str("name", "node" + std::to_string(s.id));
    const auto role = n.need_str("role");
    auto r = topology::parse_role(role);
    if (!r) t.ctx().fail(n.at("role"), "unknown role '" + role + "' (cloud, level2, level3)");
    s.role = *r;
    if (n.has("zone")) s.zone = n.str("zone", {});
    if (n.has("parent")) s.parent = static_cast<std::uint32_t>(n.count("parent", 0));
    s.tx_power_dbm = n.num("tx_power_dbm", 10.0);
    spec.nodes.push_back(std::move(s));
  });
  t.each("zones", [&](const json& j, const std::string& p) {
    Obj z(t.ctx(), j, p);
    z.only({"id", "gateway", "prefix"});
    spec.zones.push_back({z.need_str("id"), static_cast<std::uint32_t>(z.count("gateway", 0)),
                          z.need_str("prefix")});
  });
  t.each("links", [&](const json& j, const std::string& p) {
    Obj l(t.ctx(), j, p);
    l.only({"a", "b", "profile", "bandwidth_kbps", "latency_ms"});
    topology::LinkSpec s;
    s.a = static_cast<std::uint32_t>(l.count("a", 0));
    s.b = static_cast<std::uint32_t>(l.count("b", 0));
    s.profile = profile(l, "profile", topology::LinkProfile::custom);
    if (l.has("bandwidth_kbps")) s.bandwidth_kbps = l.positive("bandwidth_kbps", 0);
    if (l.has("latency_ms")) s.latency_ms = l.nonneg("latency_ms", 0);
    spec.links.push_back(s);
  });
  t.each("bonded", [&](const json& j, const std::string& p) {
    Obj b(t.ctx(), j, p);
    b.only({"id", "links", "mode"});
    topology::BondSpec s;
    s.id = b.need_str("id");
    b.each("links", [&](const json& v, const std::string& lp) {
      if (!v.is_number_unsigned()) t.ctx().fail(lp, "bond member must be a link index");
      s.member_links.push_back(v.get<std::uint32_t>());
    });
    const auto mode = b.str("mode", "active_backup");
    auto m = topology::parse_bond_mode(mode);
    if (!m) t.ctx().fail(b.at("mode"), "unknown bond mode '" + mode + "'");
    s.mode = *m;
    spec.bonded.push_back(std::move(s));
  });
  return spec;
}

// Node references may be numeric ids or node names.
topology::NodeId node_ref(const Obj& o, const std::string& k, const topology::Topology& topo) {
  if (!o.has(k)) o.ctx().fail(o.pointer(), "missing " + label(o.at(k)));
  const auto& v = o.raw(k);
  if (v.is_string()) {
    for (const auto& n : topo.nodes()) {
      if (n.name == v.get<std::string>()) return n.id;
    }
    o.ctx().fail(o.at(k), "no node named '" + v.get<std::string>() + "'");
  }
  if (!v.is_number_unsigned()) o.ctx().fail(o.at(k), label(o.at(k)) + " must be a node id or name");
  topology::NodeId id{v.get<std::uint32_t>()};
  if (!topo.has_node(id)) o.ctx().fail(o.at(k), "no node with id " + std::to_string(id.value));
  if (topo.node(id).role == topology::Role::cloud) o.ctx().fail(o.at(k), "workload node cannot be the cloud");
  return id;
}

apps::Workload read_workload(const Obj& w, const topology::Topology& topo) {
  w.only({"market", "files", "sms", "messages", "active_until_s"});
  apps::Workload out;
  w.each("market", [&](const json& j, const std::string& p) {
    Obj m(w.ctx(), j, p);
    m.only({"node", "sellers", "buyers", "sell_mean_s", "buy_mean_s", "search_share", "items"});
    apps::MarketLoad l{node_ref(m, "node", topo)};
    l.sellers = m.count("sellers", l.sellers);
    l.buyers = m.count("buyers", l.buyers);
    l.sell_mean_s = m.positive("sell_mean_s", l.sell_mean_s);
    l.buy_mean_s = m.positive("buy_mean_s", l.buy_mean_s);
    l.search_share = m.fraction("search_share", l.search_share);
    if (m.has("items")) {
      l.items.clear();
      m.each("items", [&](const json& v, const std::string& ip) {
        if (!v.is_string() || v.get<std::string>().empty()) w.ctx().fail(ip, "item must be a non-empty string");
        l.items.push_back(v.get<std::string>());
      });
      if (l.items.empty()) w.ctx().fail(m.at("items"), "items must not be empty");
    }
    out.market.push_back(std::move(l));
  });
  w.each("files", [&](const json& j, const std::string& p) {
    Obj f(w.ctx(), j, p);
    f.only({"node", "bytes", "interval_s", "backlog", "app"});
    apps::FileLoad l{node_ref(f, "node", topo)};
    l.bytes = f.count("bytes", l.bytes);
    if (l.bytes == 0) w.ctx().fail(f.at("bytes"), "bytes must be > 0");
    l.interval_s = f.nonneg("interval_s", l.interval_s);
    l.backlog = f.count("backlog", l.backlog);
    l.app = f.str("app", l.app);
    out.files.push_back(std::move(l));
  });
  w.each("sms", [&](const json& j, const std::string& p) {
    Obj s(w.ctx(), j, p);
    s.only({"node", "users", "mean_s", "bytes"});
    apps::SmsLoad l{node_ref(s, "node", topo)};
    l.users = s.count("users", l.users);
    l.mean_s = s.positive("mean_s", l.mean_s);
    l.bytes = s.count("bytes", l.bytes);
    if (l.bytes == 0) w.ctx().fail(s.at("bytes"), "bytes must be > 0");
    out.sms.push_back(l);
  });
  if (w.has("messages")) {
    auto m = w.obj("messages");
    m.only({"users_per_node", "mean_s"});
    apps::MessageLoad l;
    l.users_per_node = m.count("users_per_node", l.users_per_node);
    l.mean_s = m.positive("mean_s", l.mean_s);
    out.messages = l;
  }
  if (w.has("active_until_s")) out.active_until = w.nonneg("active_until_s", 0);
  return out;
}

whitespace::WhitespaceConfig read_whitespace(const Obj& o, simcore::SweepConfig& sweep) {
  o.only({"band", "truth", "occupied", "interferer_radius_m", "area_m", "speed_min_mps",
          "speed_max_mps", "users", "volunteer_ratio", "volunteer_period_s", "organic_sms_mean_s",
          "organic_call_mean_s", "call_duration_mean_s", "slots", "advertise_all",
          "replan_interval_s", "serving", "horizon_s", "stop_when_classified", "detector",
          "power", "sweep"});
  whitespace::WhitespaceConfig c;
  if (o.has("band")) {
    auto b = o.obj("band");
    b.only({"first", "last"});
    c.band.first = static_cast<int>(b.count("first", 1));
    c.band.last = static_cast<int>(b.count("last", 124));
    if (c.band.last < c.band.first) o.ctx().fail(o.at("band"), "band.last must be >= band.first");
  }
  o.each("truth", [&](const json& j, const std::string& p) {
    Obj t(o.ctx(), j, p);
    t.only({"arfcn", "x", "y", "radius_m", "energy"});
    whitespace::Interferer i;
    i.arfcn = static_cast<int>(t.count("arfcn", 0));
    if (!c.band.contains(i.arfcn)) o.ctx().fail(t.at("arfcn"), "arfcn outside the band");
    i.x = t.num("x", 0);
    i.y = t.num("y", 0);
    i.radius_m = t.positive("radius_m", c.interferer_radius_m);
    i.energy = t.positive("energy", i.energy);
    c.truth.push_back(i);
  });
  c.occupied = o.count("occupied", c.occupied);
  if (c.occupied > c.band.size()) o.ctx().fail(o.at("occupied"), "more occupied channels than the band holds");
  c.interferer_radius_m = o.positive("interferer_radius_m", c.interferer_radius_m);
  c.area_m = o.positive("area_m", c.area_m);
  c.speed_min_mps = o.nonneg("speed_min_mps", c.speed_min_mps);
  c.speed_max_mps = o.nonneg("speed_max_mps", c.speed_max_mps);
  if (c.speed_max_mps < c.speed_min_mps) o.ctx().fail(o.at("speed_max_mps"), "speed_max_mps below speed_min_mps");
  c.users = o.count("users", c.users);
  c.volunteer_ratio = o.fraction("volunteer_ratio", c.volunteer_ratio);
  c.volunteer_period_s = o.positive("volunteer_period_s", c.volunteer_period_s);
  c.organic_sms_mean_s = o.nonneg("organic_sms_mean_s", c.organic_sms_mean_s);
  c.organic_call_mean_s = o.nonneg("organic_call_mean_s", c.organic_call_mean_s);
  c.call_duration_mean_s = o.positive("call_duration_mean_s", c.call_duration_mean_s);
  c.slots = o.count("slots", c.slots);
  c.advertise_all = o.flag("advertise_all", c.advertise_all);
  c.replan_interval_s = o.positive("replan_interval_s", c.replan_interval_s);
  if (o.has("serving")) {
    const auto s = static_cast<int>(o.count("serving", 0));
    if (!c.band.contains(s)) o.ctx().fail(o.at("serving"), "serving channel outside the band");
    c.serving = s;
  }
  c.horizon_s = o.positive("horizon_s", c.horizon_s);
  c.stop_when_classified = o.flag("stop_when_classified", c.stop_when_classified);
  if (o.has("detector")) {
    auto d = o.obj("detector");
    d.only({"n_free", "t_free_s", "evidence_ttl_s"});
    c.detector.n_free = d.count("n_free", c.detector.n_free);
    c.detector.t_free_s = d.nonneg("t_free_s", c.detector.t_free_s);
    c.detector.evidence_ttl_s = d.positive("evidence_ttl_s", c.detector.evidence_ttl_s);
  }
  if (o.has("power")) {
    auto p = o.obj("power");
    p.only({"start_dbm", "step_db", "interval_s", "max_dbm"});
    c.power.start_dbm = p.num("start_dbm", c.power.start_dbm);
    c.power.step_db = p.positive("step_db", c.power.step_db);
    c.power.interval_s = p.positive("interval_s", c.power.interval_s);
    c.power.max_dbm = p.num("max_dbm", c.power.max_dbm);
  }
  if (o.has("sweep")) {
    auto s = o.obj("sweep");
    s.only({"ratios", "users", "channels"});
    if (s.has("ratios")) sweep.ratios.clear();
    s.each("ratios", [&](const json& v, const std::string& p) {
      if (!v.is_number() || v.get<double>() < 0 || v.get<double>() > 1)
        o.ctx().fail(p, "ratio must lie in [0, 1]");
      sweep.ratios.push_back(v.get<double>());
    });
    if (s.has("users")) sweep.users.clear();
    s.each("users", [&](const json& v, const std::string& p) {
      if (!v.is_number_unsigned()) o.ctx().fail(p, "user count must be a non-negative integer");
      sweep.users.push_back(v.get<std::size_t>());
    });
    sweep.channels = s.count("channels", sweep.channels);
    if (sweep.channels == 0) o.ctx().fail(s.at("channels"), "channels must be > 0");
  }
  return c;
}

identity::ResolutionModel model_of(const Obj& o, const std::string& k) {
  const auto m = o.str(k, "central");
  if (m == "central") return identity::ResolutionModel::central;
  if (m == "dht") return identity::ResolutionModel::dht;
  o.ctx().fail(o.at(k), "unknown model '" + m + "' (central, dht)");
}

}  // namespace

simcore::Scenario parse_scenario(std::string_view text, const std::string& source) {
  Locator loc(text);
  std::size_t consumed = 0;
  {
    LineSax sax(loc, consumed);
    CountingIterator first(text.data(), &consumed), last(text.data() + text.size(), &consumed);
    try {
      json::sax_parse(first, last, &sax);
    } catch (const json::exception&) {
      // Reported with a position by the full parse below.
    }
  }
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    const auto at = e.byte == 0 ? 0 : e.byte - 1;
    std::string what = e.what();
    if (auto p = what.find("syntax error"); p != std::string::npos) what = what.substr(p);
    throw ScenarioError(source, loc.line_at(std::min<std::size_t>(at, text.size())), what);
  }

  Ctx ctx{source, &loc};
  Obj root(ctx, doc, "");
  root.only({"name", "horizon_s", "topology", "failures", "traffic", "sync", "identity", "workload",
             "whitespace", "idbench"});
  simcore::Scenario sc;
  sc.name = root.str("name", "scenario");
  sc.horizon_s = root.nonneg("horizon_s", sc.horizon_s);

  if (root.has("topology")) {
    auto t = root.obj("topology");
    sc.topology = read_topology(t);
    try {
      (void)topology::build_topology(sc.topology);
    } catch (const topology::TopologyError& e) {
      ctx.fail("/topology", e.what());
    }
  } else if (!root.has("whitespace") && !root.has("idbench")) {
    ctx.fail("", "missing topology");
  } else {
    sc.topology = topology::three_node_deployment();
  }
  const auto topo = topology::build_topology(sc.topology);

  if (root.has("failures")) {
    auto f = root.obj("failures");
    f.only({"enabled", "interval_s", "p_access", "mean_duration_s", "per_interval"});
    sc.inject_failures = f.flag("enabled", true);
    sc.failures.interval_s = f.positive("interval_s", sc.failures.interval_s);
    sc.failures.p_access = f.fraction("p_access", sc.failures.p_access);
    sc.failures.mean_duration_s = f.positive("mean_duration_s", sc.failures.mean_duration_s);
    sc.failures.per_interval = f.count("per_interval", sc.failures.per_interval);
  }
  if (root.has("traffic")) {
    auto t = root.obj("traffic");
    t.only({"level2_share", "level3_share", "calls_per_node", "sms_per_node", "data_per_node",
            "same_node", "same_zone", "local_data", "call_mean_s", "data_mean_s"});
    auto& m = sc.traffic;
    m.level2_share = t.fraction("level2_share", m.level2_share);
    m.level3_share = t.fraction("level3_share", 1.0 - m.level2_share);
    if (std::abs(m.level2_share + m.level3_share - 1.0) > 1e-9)
      ctx.fail(t.at("level3_share"), "level2_share and level3_share must sum to 1");
    m.per_node[0] = t.nonneg("calls_per_node", m.per_node[0]);
    m.per_node[1] = t.nonneg("sms_per_node", m.per_node[1]);
    m.per_node[2] = t.nonneg("data_per_node", m.per_node[2]);
    m.same_node = t.fraction("same_node", m.same_node);
    m.same_zone = t.fraction("same_zone", m.same_zone);
    if (m.same_node + m.same_zone > 1.0 + 1e-9)
      ctx.fail(t.at("same_zone"), "same_node plus same_zone must not exceed 1");
    m.local_data = t.fraction("local_data", m.local_data);
    m.call_mean_s = t.positive("call_mean_s", m.call_mean_s);
    m.data_mean_s = t.positive("data_mean_s", m.data_mean_s);
  }
  if (root.has("sync")) {
    auto s = root.obj("sync");
    s.only({"priority_queue", "max_pending", "sms_threshold_bytes", "cloud_service_ms",
            "fastget_timeout_s", "sync_interval_s", "message_ttl_s"});
    sc.sync.queue.priority_enabled = s.flag("priority_queue", false);
    if (s.has("max_pending")) sc.sync.queue.max_pending = s.count("max_pending", 0);
    sc.sync.queue.sms_threshold_bytes = s.count("sms_threshold_bytes", sc.sync.queue.sms_threshold_bytes);
    sc.sync.cloud_service_ms = s.nonneg("cloud_service_ms", sc.sync.cloud_service_ms);
    sc.sync.fastget_timeout_s = s.positive("fastget_timeout_s", sc.sync.fastget_timeout_s);
    sc.sync.sync_interval_s = s.positive("sync_interval_s", sc.sync.sync_interval_s);
    if (s.has("message_ttl_s")) sc.sync.message_ttl_s = s.positive("message_ttl_s", 0);
  }
  if (root.has("identity")) {
    auto i = root.obj("identity");
    i.only({"model", "ring_members", "ring_seed", "issue_service_ms", "lookup_service_ms",
            "inter_cloud_rtt_ms", "egress_first", "egress_count"});
    auto& c = sc.identity;
    c.model = model_of(i, "model");
    c.ring_members = static_cast<std::uint32_t>(i.count("ring_members", c.ring_members));
    if (c.model == identity::ResolutionModel::dht && c.ring_members == 0)
      ctx.fail(i.at("ring_members"), "a dht needs at least one ring member");
    c.ring_seed = static_cast<std::uint32_t>(i.count("ring_seed", c.ring_seed));
    c.issue_service_ms = i.nonneg("issue_service_ms", c.issue_service_ms);
    c.lookup_service_ms = i.nonneg("lookup_service_ms", c.lookup_service_ms);
    c.inter_cloud_rtt_ms = i.nonneg("inter_cloud_rtt_ms", c.inter_cloud_rtt_ms);
    c.egress_first = i.count("egress_first", c.egress_first);
    c.egress_count = i.count("egress_count", c.egress_count);
  }
  if (root.has("workload")) sc.workload = read_workload(root.obj("workload"), topo);
  if (root.has("whitespace")) sc.whitespace = read_whitespace(root.obj("whitespace"), sc.sweep);
  if (root.has("idbench")) {
    auto b = root.obj("idbench");
    b.only({"model", "servers", "load_rps", "requests", "service_ms", "rtt_ms", "ring_seed"});
    auto& c = sc.idbench;
    c.model = model_of(b, "model");
    c.servers = static_cast<std::uint32_t>(b.count("servers", c.servers));
    if (c.servers == 0) ctx.fail(b.at("servers"), "servers must be >= 1");
    c.load_rps = b.positive("load_rps", c.load_rps);
    c.requests = b.count("requests", c.requests);
    c.service_ms = b.positive("service_ms", c.service_ms);
    c.rtt_ms = b.nonneg("rtt_ms", c.rtt_ms);
    c.ring_seed = static_cast<std::uint32_t>(b.count("ring_seed", c.ring_seed));
  }
  return sc;
}

simcore::Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ScenarioError(path.string(), 0, "cannot open scenario file");
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_scenario(text, path.string());
}

}  // namespace greenlinks
