// greenlinks: run scenarios and benchmarks, write CSV artifacts.
//
// Exit codes: 0 ok, 1 I/O failure, 2 bad configuration, 3 invariant violation.

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "greenlinks/scenario.hpp"

namespace fs = std::filesystem;
using namespace greenlinks;

namespace {

constexpr int kOk = 0;
constexpr int kIoError = 1;
constexpr int kConfigError = 2;
constexpr int kInvariantError = 3;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string scenario;
  std::optional<std::uint64_t> seed;
  std::size_t runs = 1;
  std::optional<double> horizon;
  std::string out = "out";
  bool trace = false;
  bool priority_queue = false;

  // Flag first, then GREENLINKS_SEED, then 0.
  [[nodiscard]] std::uint64_t resolved_seed() const {
    if (seed) return *seed;
    if (const char* env = std::getenv("GREENLINKS_SEED"); env && *env) {
      char* end = nullptr;
      errno = 0;
      const auto v = std::strtoull(env, &end, 10);
      if (errno != 0 || *end != '\0' || *env == '-') {
        throw ConfigError(std::string("GREENLINKS_SEED is not an unsigned integer: ") + env);
      }
      return v;
    }
    return 0;
  }
};

void add_common(CLI::App& cmd, Common& c, bool scenario_required = true) {
  auto* s = cmd.add_option("--scenario", c.scenario, "scenario JSON file");
  if (scenario_required) s->required();
  s->check(CLI::ExistingFile);
  cmd.add_option("--seed", c.seed, "base seed (default: $GREENLINKS_SEED, then 0)");
  cmd.add_option("--out", c.out, "output directory")->capture_default_str();
  cmd.add_option("--horizon", c.horizon, "simulated seconds, overrides the scenario");
}

simcore::Scenario load(const Common& c) {
  return c.scenario.empty() ? simcore::Scenario{} : load_scenario(c.scenario);
}

// Output files never overwrite the scenario.
class OutDir {
 public:
  OutDir(const std::string& dir, const std::string& input) : dir_(dir), input_(input) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw IoError("cannot create " + dir_.string() + ": " + ec.message());
  }

  void write(const std::string& name, const std::string& content) const {
    const auto path = dir_ / name;
    std::error_code ec;
    if (!input_.empty() && fs::exists(path) && fs::equivalent(path, input_, ec)) {
      throw IoError("refusing to overwrite input file " + path.string());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << content;
    if (!out) throw IoError("cannot write " + path.string());
  }

 private:
  fs::path dir_;
  fs::path input_;
};

template <typename F>
std::string capture(F&& f) {
  std::ostringstream s;
  f(s);
  return s.str();
}

// ---------------------------------------------------------------------------

int cmd_simulate(const Common& c) {
  auto sc = load(c);
  if (c.horizon) sc.horizon_s = *c.horizon;
  if (!(sc.horizon_s > 0)) throw ConfigError("horizon must be > 0");
  if (c.runs < 1) throw ConfigError("runs must be >= 1");
  if (c.priority_queue) sc.sync.queue.priority_enabled = true;
  const auto seed = c.resolved_seed();

  simcore::RunOptions opts;
  opts.trace = c.trace;
  opts.priority_queue = c.priority_queue;
  auto mc = simcore::monte_carlo(sc, c.runs, seed, 0, opts, true);
  const auto& first = *mc.first;

  OutDir out(c.out, c.scenario);
  if (c.runs == 1) {
    out.write("metrics.csv", capture([&](auto& s) { first.metrics.write_csv(s); }));
  } else {
    out.write("metrics.csv", capture([&](auto& s) { simcore::write_interval_means_csv(s, mc); }));
    out.write("metrics_summary.csv", capture([&](auto& s) { simcore::write_summary_csv(s, mc); }));
  }
  out.write("latency.csv", first.latency_csv);

  int code = kOk;
  if (c.trace) {
    out.write("trace.log", capture([&](auto& s) { simcore::write_trace(s, first.events); }));
    const auto check = simcore::validate_trace(first.events, sc.horizon_s);
    for (const auto& e : check.errors) std::cerr << "trace: " << e << '\n';
    if (!check.ok) code = kInvariantError;
  }
  for (const auto& e : mc.invariant_failures) std::cerr << "invariant: " << e << '\n';
  if (!mc.invariant_failures.empty() || mc.containment_violations != 0) code = kInvariantError;

  std::cout << sc.name << ": " << c.runs << " run(s), seed " << seed << '\n';
  for (std::size_t m = 0; m < simcore::kMetrics.size(); ++m) {
    std::cout << "  " << simcore::to_string(simcore::kMetrics[m]) << " "
              << format_number(mc.stats[m].mean) << '\n';
  }
  return code;
}

int cmd_whitespace(const Common& c, bool sweep) {
  auto sc = load(c);
  if (!sc.whitespace) throw ConfigError(c.scenario + ": scenario has no whitespace section");
  auto cfg = *sc.whitespace;
  if (c.horizon) cfg.horizon_s = *c.horizon;
  if (!(cfg.horizon_s > 0)) throw ConfigError("horizon must be > 0");
  const auto seed = c.resolved_seed();

  const auto run = whitespace::run_whitespace(cfg, seed);
  OutDir out(c.out, c.scenario);
  out.write("occupancy.csv", capture([&](auto& s) { whitespace::write_occupancy_csv(s, run.states); }));

  std::size_t counts[3] = {0, 0, 0};
  for (const auto& st : run.states) ++counts[static_cast<int>(st.verdict)];
  const bool complete = counts[0] == 0;
  out.write("whitespace_summary.csv", capture([&](auto& s) {
              s << "key,value\n";
              s << "status," << (complete ? "classified" : "incomplete") << '\n';
              s << "occupied," << counts[2] << '\n';
              s << "free," << counts[1] << '\n';
              s << "unknown," << counts[0] << '\n';
              s << "classified_at," << (run.classified_at ? format_number(*run.classified_at) : "") << '\n';
              s << "serving_collisions," << run.serving_collisions << '\n';
              s << "reports," << run.reports << '\n';
            }));
  if (!complete) std::cerr << "warning: " << counts[0] << " channel(s) still unknown at the horizon\n";

  if (sweep) {
    out.write("ngsm_compare.csv", capture([&](auto& s) {
                s << "ratio,users,t_ngsm,t_volunteer\n";
                for (double ratio : sc.sweep.ratios) {
                  for (auto users : sc.sweep.users) {
                    const auto p = whitespace::compare_ngsm(users, ratio, sc.sweep.channels, cfg, seed);
                    s << format_number(ratio) << ',' << users << ',' << format_number(p.t_ngsm_min)
                      << ',' << format_number(p.t_volunteer_min) << '\n';
                  }
                }
              }));
  }
  std::cout << "occupied " << counts[2] << ", free " << counts[1] << ", unknown " << counts[0]
            << ", serving collisions " << run.serving_collisions << '\n';
  return kOk;
}

int cmd_idbench(const Common& c, const std::optional<std::string>& model,
                std::optional<std::uint32_t> servers, std::optional<double> load_rps) {
  auto sc = load(c);
  auto cfg = sc.idbench;
  if (model) {
    if (*model == "central") cfg.model = identity::ResolutionModel::central;
    else if (*model == "dht") cfg.model = identity::ResolutionModel::dht;
    else throw ConfigError("unknown model '" + *model + "' (central, dht)");
  }
  if (servers) cfg.servers = *servers;
  if (load_rps) cfg.load_rps = *load_rps;
  if (cfg.servers < 1) throw ConfigError("servers must be >= 1");
  if (!(cfg.load_rps > 0)) throw ConfigError("load must be > 0");
  const auto seed = c.resolved_seed();

  const auto r = simcore::identity_latency_bench(cfg, seed);
  OutDir out(c.out, c.scenario);
  out.write("idbench.csv", capture([&](auto& s) { simcore::write_idbench_csv(s, r); }));
  out.write("idbench_summary.csv", capture([&](auto& s) {
              s << "statistic,value\n";
              s << "model," << (cfg.model == identity::ResolutionModel::dht ? "dht" : "central") << '\n';
              s << "servers," << cfg.servers << '\n';
              s << "load_rps," << format_number(cfg.load_rps) << '\n';
              s << "requests," << r.latency_s.size() << '\n';
              s << "mean," << format_number(r.mean) << '\n';
              s << "p50," << format_number(r.p50) << '\n';
              s << "p95," << format_number(r.p95) << '\n';
            }));
  std::cout << "p50 " << format_number(r.p50) << " s, p95 " << format_number(r.p95) << " s\n";
  return kOk;
}

// Each command is "[user:] TEXT", sent from `node`; it runs until replied.
int cmd_apps(const Common& c, const std::string& node_ref, const std::string& default_user,
             double gap_s, const std::vector<std::string>& commands) {
  if (gap_s < 0) throw ConfigError("gap must be >= 0");
  auto sc = load(c);
  if (sc.topology.nodes.empty()) sc.topology = topology::three_node_deployment();
  Engine engine;
  auto topo = topology::build_topology(sc.topology);
  identity::IdentityService ids(topo, sc.identity);
  sync::SyncService svc(engine, topo, sc.sync, &ids);
  svc.start();
  apps::Marketplace market(engine, svc, &ids);

  std::optional<topology::NodeId> node;
  for (const auto& n : topo.nodes()) {
    if (n.name == node_ref || std::to_string(n.id.value) == node_ref) node = n.id;
  }
  if (!node || topo.node(*node).role == topology::Role::cloud) {
    throw ConfigError("no non-cloud node '" + node_ref + "'");
  }

  std::map<std::string, std::string> names;
  std::uint64_t imsi = 0;
  auto user_name = [&](const std::string& u) {
    if (auto it = names.find(u); it != names.end()) return it->second;
    char buf[16];
    std::snprintf(buf, sizeof buf, "00101%010llu", static_cast<unsigned long long>(++imsi));
    auto issued = ids.issue_identity(*node, buf, identity::IdentityKind::local, u, engine.now());
    const auto name = issued.identity ? issued.identity->name : u;
    names.emplace(u, name);
    return name;
  };

  std::ostringstream log;
  log << "time,user,command,reply\n";
  const double wait = sc.sync.fastget_timeout_s + 1.0;
  for (const auto& raw : commands) {
    std::string user = default_user;
    std::string text = raw;
    if (auto colon = raw.find(':'); colon != std::string::npos && raw.find(' ') > colon) {
      user = raw.substr(0, colon);
      text = raw.substr(colon + 1);
      while (!text.empty() && text.front() == ' ') text.erase(0, 1);
    }
    const auto who = user_name(user);
    std::optional<std::vector<std::string>> reply;
    const auto sent = engine.now();
    market.handle_sms(*node, who, text, [&](const std::vector<std::string>& r) { reply = r; });
    while (!reply && !engine.empty() && engine.next_time() <= sent + wait) engine.step();
    std::string joined;
    for (const auto& line : reply.value_or(std::vector<std::string>{"(no reply)"})) {
      std::cout << who << "> " << line << '\n';
      if (!joined.empty()) joined += " | ";
      joined += line;
    }
    auto quote = [](std::string s) {
      for (std::size_t i = 0; (i = s.find('"', i)) != std::string::npos; i += 2) s.insert(i, "\"");
      return '"' + s + '"';
    };
    log << format_number(engine.now()) << ',' << who << ',' << quote(text) << ',' << quote(joined) << '\n';
    // Let slowputs settle before the next command.
    const auto until = engine.now() + gap_s;
    while (!engine.empty() && engine.next_time() <= until) engine.step();
  }
  OutDir(c.out, c.scenario).write("apps.csv", log.str());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"greenlinks: virtual cellular ISP simulator"};
  app.require_subcommand(1);

  Common sim_opts, ws_opts, id_opts, app_opts;

  auto* sim = app.add_subcommand("simulate", "failure-injected dual-architecture run");
  add_common(*sim, sim_opts);
  sim->add_option("--runs", sim_opts.runs, "Monte Carlo runs")->capture_default_str();
  sim->add_flag("--trace", sim_opts.trace, "write and validate trace.log");
  sim->add_flag("--priority-queue", sim_opts.priority_queue, "serve SMS-sized requests first");

  bool no_sweep = false;
  auto* ws = app.add_subcommand("whitespace", "whitespace detection and volunteer comparison");
  add_common(*ws, ws_opts);
  ws->add_flag("--no-sweep", no_sweep, "skip ngsm_compare.csv");

  std::optional<std::string> model;
  std::optional<std::uint32_t> servers;
  std::optional<double> load_rps;
  auto* id = app.add_subcommand("idbench", "identity issuance latency");
  add_common(*id, id_opts, false);
  id->add_option("--model", model, "central or dht");
  id->add_option("--servers", servers, "resolver count");
  id->add_option("--load", load_rps, "requests per second");

  std::string node = "1";
  std::string user = "desk";
  double gap_s = 5.0;
  std::vector<std::string> commands;
  auto* ap = app.add_subcommand("apps", "one-shot marketplace SMS commands");
  add_common(*ap, app_opts, false);
  ap->add_option("--node", node, "node id or name")->capture_default_str();
  ap->add_option("--user", user, "sender for commands without a user: prefix")->capture_default_str();
  ap->add_option("--gap", gap_s, "simulated seconds between commands")->capture_default_str();
  ap->add_option("commands", commands, "e.g. \"ama: SELL maize 2 10\"")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfigError;
  }

  try {
    if (*sim) return cmd_simulate(sim_opts);
    if (*ws) return cmd_whitespace(ws_opts, !no_sweep);
    if (*id) return cmd_idbench(id_opts, model, servers, load_rps);
    if (*ap) return cmd_apps(app_opts, node, user, gap_s, commands);
  } catch (const ScenarioError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfigError;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfigError;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIoError;
  }
  return kOk;
}
