// kapps: command-line entry point over the store, codecs, validation,
// simulation and the unscrewing loop.
//
// Exit codes: 0 success / conforms, 1 violation found, 2 usage error,
// 3 runtime error.

#include <charconv>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "kapps/flexconveyor.hpp"
#include "kapps/history.hpp"
#include "kapps/middleware.hpp"
#include "kapps/ogm.hpp"
#include "kapps/resources.hpp"
#include "kapps/shacl.hpp"
#include "kapps/sparql.hpp"
#include "kapps/store_dump.hpp"
#include "kapps/timeutil.hpp"
#include "kapps/turtle.hpp"
#include "kapps/unscrew.hpp"

namespace fs = std::filesystem;
using namespace kapps;

namespace {

constexpr int kOk = 0, kViolation = 1, kUsage = 2, kRuntime = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Globals {
  std::string store_dump;
  std::vector<std::string> shapes;
  std::vector<std::string> ontology;
  bool verbose = false;
};

void note(const Globals& g, const std::string& msg) {
  if (g.verbose) std::cerr << "kapps: " << msg << "\n";
}

// `builtin:<path>` names a file compiled in from data/.
std::string read_source(const std::string& name) {
  if (name.rfind("builtin:", 0) == 0) return std::string(resource(name.substr(8)));
  std::ifstream in(name, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + name);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string compact(const Term& t) {
  if (t.is_iri()) return compact_iri(t.value(), standard_prefixes());
  return t.to_string();
}

std::string compact(const std::string& iri) { return compact_iri(iri, standard_prefixes()); }

// Full IRI from `prefix:local` or `<iri>` or a bare absolute IRI.
std::string expand(const std::string& text) {
  if (text.size() > 1 && text.front() == '<' && text.back() == '>') return text.substr(1, text.size() - 2);
  auto colon = text.find(':');
  if (colon != std::string::npos) {
    const auto& p = standard_prefixes();
    auto it = p.find(text.substr(0, colon));
    if (it != p.end() && text.compare(colon + 1, 2, "//") != 0) return it->second + text.substr(colon + 1);
  }
  return text;
}

class Session {
 public:
  explicit Session(const Globals& g) : g_(g) {}

  // Store restored from --store-dump (when present) plus --ontology/--shapes.
  Store& store() {
    if (!store_) {
      store_ = std::make_unique<Store>(shacl::make_admission_gate());
      if (!g_.store_dump.empty() && fs::exists(g_.store_dump)) {
        load_store(*store_, g_.store_dump);
        note(g_, "restored " + std::to_string(store_->head()) + " transactions from " + g_.store_dump);
      }
      for (const auto& f : g_.ontology) load(f, vocab::kOntologyGraph);
      for (const auto& f : g_.shapes) load(f, vocab::kShapesGraph);
    }
    return *store_;
  }

  void touch() { dirty_ = true; }

  void save() {
    if (store_ && dirty_ && !g_.store_dump.empty()) {
      save_store(*store_, g_.store_dump);
      note(g_, "wrote " + std::to_string(store_->head()) + " transactions to " + g_.store_dump);
    }
  }

  const Globals& globals() const { return g_; }

 private:
  void load(const std::string& file, const std::string& graph) {
    TxnId before = store_->head();
    TxnId t = store_->load_graph(read_source(file), graph);
    if (t != before) dirty_ = true;
    note(g_, "loaded " + file + " into <" + graph + ">");
  }

  const Globals& g_;
  std::unique_ptr<Store> store_;
  bool dirty_ = false;
};

Snapshot resolve_at(Store& store, const std::string& at) {
  if (at.empty()) return store.snapshot();
  if (std::all_of(at.begin(), at.end(), ::isdigit)) {
    TxnId k = std::stoull(at);
    if (k > store.head()) throw UsageError("no transaction " + at + " (head is " + std::to_string(store.head()) + ")");
    return store.state_at(k);
  }
  auto ts = parse_timestamp(at);
  if (!ts) throw UsageError("expected a transaction id or an xsd:dateTime, got '" + at + "'");
  return store.state_at(*ts);
}

Snapshot with_data(const Snapshot& base, const std::vector<std::string>& files) {
  if (files.empty()) return base;
  auto q = base.quads();
  std::set<Quad> all(q.begin(), q.end());
  Term g = Term::iri(vocab::kDefaultGraph);
  for (const auto& f : files)
    for (const auto& t : parse_turtle(read_source(f)).triples) all.insert({t.s, t.p, t.o, g});
  return Snapshot::from_quads(all, base.txn());
}

std::string query_text(const std::string& arg) {
  if (!arg.empty() && arg.front() == '@') return read_source(arg.substr(1));
  std::error_code ec;
  if (arg.find('{') == std::string::npos && fs::is_regular_file(arg, ec)) return read_source(arg);
  return arg;
}

void print_result(const sparql::QueryResult& r) {
  if (r.is_ask) {
    std::cout << (r.ask ? "true" : "false") << "\n";
    return;
  }
  std::cout << sparql::format_tsv(r);
}

void print_object(const ogm::GraphObject& o, int indent, std::set<std::string>& seen) {
  std::string pad(indent * 2, ' ');
  std::cout << pad << compact(o.iri()) << " a " << compact(o.class_iri()) << "\n";
  if (!seen.insert(o.iri()).second) return;
  for (const auto& [piri, p] : o.schema().properties) {
    const auto& vals = o.values(piri);
    if (vals.empty()) continue;
    for (const auto& v : vals) {
      if (const auto* t = std::get_if<Term>(&v)) {
        std::cout << pad << "  " << compact(piri) << " " << compact(*t) << "\n";
      } else {
        const auto& ref = std::get<ogm::ObjectRef>(v);
        std::cout << pad << "  " << compact(piri) << " " << compact(ref.iri) << "\n";
        if (ref.resolved && !seen.count(ref.iri)) print_object(*ref.resolved, indent + 2, seen);
      }
    }
  }
}

std::optional<std::string> type_of(const Snapshot& view, const std::string& iri) {
  auto m = view.match({Term::iri(iri), Term::iri(vocab::rdf::type), std::nullopt, std::nullopt});
  for (const auto& q : m)
    if (q.o.is_iri()) return q.o.value();
  return std::nullopt;
}

bool has_uc1_vocabulary(const Store& store) {
  return !store.snapshot()
              .match({Term::iri(uc1::uc("Screw")), Term::iri(vocab::rdf::type), std::nullopt, std::nullopt})
              .empty();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"kapps: knowledge-graph runtime for circular-factory production systems", "kapps"};
  app.set_help_all_flag("--help-all", "Show help for all subcommands");
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--store-dump", g.store_dump, "Persistent store: transaction log restored at start, rewritten after changes");
  app.add_option("--shapes", g.shapes, "SHACL shape files (or builtin:shapes/<name>.ttl)");
  app.add_option("--ontology", g.ontology, "Ontology files (or builtin:ontology/<name>.ttl)");
  app.add_flag("-v,--verbose", g.verbose, "Progress on stderr");

  int status = kOk;
  std::function<void(Session&)> action;

  // validate
  auto* validate = app.add_subcommand("validate", "Validate Turtle data against the loaded shapes");
  std::vector<std::string> v_data;
  bool v_rdf4j = false;
  validate->add_option("data", v_data, "Turtle data files")->required();
  validate->add_flag("--rdf4j", v_rdf4j, "Add the rdf4j vendor triples to the report");
  validate->callback([&] {
    action = [&](Session& s) {
      Snapshot view = with_data(s.store().snapshot(), v_data);
      auto shapes = shacl::load_shapes(view);
      auto report = shacl::validate(view, shapes);
      shacl::ReportOptions ro;
      ro.rdf4j_compat = v_rdf4j;
      std::cout << shacl::serialize_report(report, ro);
      status = report.conforms ? kOk : kViolation;
    };
  });

  // query
  auto* query = app.add_subcommand("query", "Evaluate a SPARQL query (text, file or @file)");
  std::string q_text, q_at;
  std::vector<std::string> q_data;
  query->add_option("query", q_text, "Query text or file")->required();
  query->add_option("--at", q_at, "Transaction id or xsd:dateTime to query in the past");
  query->add_option("--data", q_data, "Extra Turtle files merged into the default graph");
  query->callback([&] {
    action = [&](Session& s) {
      Snapshot view = with_data(resolve_at(s.store(), q_at), q_data);
      print_result(sparql::evaluate(sparql::parse_query(query_text(q_text), standard_prefixes()), view));
    };
  });

  // load
  auto* load = app.add_subcommand("load", "Load Turtle into the store through the admission gate");
  std::vector<std::string> l_files;
  std::string l_graph = vocab::kDefaultGraph, l_actor = "urn:kapps:actor:cli";
  bool l_bootstrap = false;
  load->add_option("files", l_files, "Turtle files")->required();
  load->add_option("--graph", l_graph, "Target named graph")->capture_default_str();
  load->add_option("--actor", l_actor, "Actor recorded in the history")->capture_default_str();
  load->add_flag("--bootstrap", l_bootstrap, "Bypass the gate (initial data)");
  load->callback([&] {
    action = [&](Session& s) {
      Store& store = s.store();
      for (const auto& f : l_files) {
        std::string text = read_source(f);
        TxnId before = store.head();
        TxnId t = 0;
        if (l_bootstrap) {
          t = store.load_graph(text, l_graph);
        } else {
          TransactionDelta d;
          d.actor = l_actor;
          Term gterm = Term::iri(l_graph);
          for (const auto& tr : parse_turtle(text).triples) d.inserts.insert({tr.s, tr.p, tr.o, gterm});
          try {
            t = store.apply_transaction(d);
          } catch (const TransactionRejected& e) {
            std::cout << shacl::serialize_report(e.report());
            std::cerr << "kapps: " << f << " rejected by the admission gate\n";
            status = kViolation;
            return;
          }
        }
        s.touch();
        if (t == before)
          std::cout << f << ": no change\n";
        else
          std::cout << f << ": txn " << t << " (" << store.history().entry(t).inserts.size() << " quads)\n";
      }
    };
  });

  // simulate
  auto* simulate = app.add_subcommand("simulate", "Run the FlexConveyor multi-agent simulation");
  conveyor::SimConfig sc;
  std::string s_fault = "none", s_report, s_final;
  bool s_quiet = false;
  simulate->add_option("--width", sc.width)->capture_default_str()->check(CLI::PositiveNumber);
  simulate->add_option("--height", sc.height)->capture_default_str()->check(CLI::PositiveNumber);
  simulate->add_option("--boxes", sc.boxes)->capture_default_str()->check(CLI::NonNegativeNumber);
  simulate->add_option("--fault", s_fault, "none | skip-reservation | deliver-while-possessed")
      ->capture_default_str()
      ->check(CLI::IsMember({"none", "skip-reservation", "deliver-while-possessed"}));
  simulate->add_option("--fault-probability", sc.fault_probability)->capture_default_str()->check(CLI::Range(0.0, 1.0));
  simulate->add_option("--seed", sc.seed)->capture_default_str();
  simulate->add_option("--max-ticks", sc.max_ticks, "0 picks 50*(width+height)*boxes")->capture_default_str();
  simulate->add_option("--report", s_report, "Write the report (with rejection reports) to this file");
  simulate->add_option("--final-state", s_final, "Write the final graph as Turtle");
  simulate->add_flag("--stage-occupied", sc.stage_occupied, "Park a blocker in the first box's next hop");
  simulate->add_flag("--validate", sc.validate_every_commit, "Full validation after every admitted transaction");
  simulate->add_flag("--threaded", sc.threaded, "Free-running agents on threads");
  simulate->add_flag("--focus-scope", sc.focus_scope, "Gate validates only affected focus nodes");
  simulate->add_flag("-q,--quiet", s_quiet, "No event trace on stdout");
  simulate->callback([&] {
    action = [&](Session& s) {
      sc.fault = *conveyor::parse_fault_mode(s_fault);
      auto sim = std::make_unique<conveyor::Simulation>(sc);
      note(s.globals(), "simulating " + std::to_string(sc.width) + "x" + std::to_string(sc.height));
      auto report = sim->run();
      if (!s_quiet)
        for (const auto& line : report.trace) std::cout << line << "\n";
      std::string text = report.to_text();
      for (const auto& r : report.rejections)
        text += "\n# rejection at tick " + std::to_string(r.tick) + " (" + r.action + ")\n" + r.report;
      if (s_report.empty()) {
        std::cout << text;
      } else {
        std::ofstream(s_report) << text;
        note(s.globals(), "report written to " + s_report);
      }
      if (!s_final.empty()) {
        auto quads = sim->store().snapshot().quads();
        std::ofstream(s_final) << serialize_turtle(quads, standard_prefixes());
      }
      if (report.nonconforming_transactions || report.possession_violations) status = kViolation;
      // The simulation builds its own store; keep it for later history/query runs.
      if (!s.globals().store_dump.empty()) save_store(sim->store(), s.globals().store_dump);
    };
  });

  // uc1
  auto* uc1cmd = app.add_subcommand("uc1", "Unscrewing anomaly-detection and learning loop");
  uc1cmd->require_subcommand(1);
  auto* uc1run = uc1cmd->add_subcommand("run", "Run the closed loop over recorded or generated cycles");
  uc1::LoopConfig lc;
  std::string u_recordings, u_ts_dir;
  std::uint64_t u_seed = 7;
  int u_corpus = 0;
  uc1run->add_option("--recordings", u_recordings, "Corpus directory (see 'uc1 generate'); generated when omitted");
  uc1run->add_option("--cycles", lc.cycles)->capture_default_str()->check(CLI::NonNegativeNumber);
  uc1run->add_option("--learn-every", lc.learn_every, "0 disables learning")->capture_default_str();
  uc1run->add_option("--nmin", lc.nmin, "Minimum completed operations before learning")->capture_default_str();
  uc1run->add_option("--seed", u_seed, "Generator seed when no recordings are given")->capture_default_str();
  uc1run->add_option("--corpus-size", u_corpus, "Generated corpus size (default: cycles)");
  uc1run->add_option("--ts-dir", u_ts_dir, "Keep raw records in this directory (default with --store-dump: <dump>.ts)");
  uc1run->add_option("--screw", lc.screw)->capture_default_str();
  uc1run->add_option("--resource", lc.resource)->capture_default_str();
  uc1run->add_flag("--services", lc.via_middleware, "Run the three roles as middleware services");
  uc1run->callback([&] {
    action = [&](Session& s) {
      Store& store = s.store();
      if (!has_uc1_vocabulary(store)) {
        uc1::load_vocabulary(store);
        s.touch();
      }
      // Records referenced by a persisted graph have to outlive the process.
      if (u_ts_dir.empty() && !s.globals().store_dump.empty()) u_ts_dir = s.globals().store_dump + ".ts";
      std::unique_ptr<TsStore> ts = u_ts_dir.empty() ? std::make_unique<TsStore>() : std::make_unique<TsStore>(u_ts_dir);
      lc.screw = expand(lc.screw);
      lc.resource = expand(lc.resource);
      uc1::LoopReport report;
      if (u_recordings.empty()) {
        uc1::GeneratorConfig gc;
        gc.count = u_corpus > 0 ? u_corpus : std::max(1, lc.cycles);
        gc.seed = u_seed;
        report = uc1::run_loop(lc, uc1::generate_corpus(gc), store, *ts);
      } else {
        report = uc1::run_loop(lc, u_recordings, store, *ts);
      }
      s.touch();
      std::cout << report.to_text();
    };
  });
  auto* uc1gen = uc1cmd->add_subcommand("generate", "Write a seeded synthetic recording corpus");
  uc1::GeneratorConfig gen;
  std::string g_out;
  uc1gen->add_option("--out", g_out, "Target directory")->required();
  uc1gen->add_option("--count", gen.count)->capture_default_str()->check(CLI::NonNegativeNumber);
  uc1gen->add_option("--seed", gen.seed)->capture_default_str();
  uc1gen->add_option("--success-share", gen.success_share)->capture_default_str()->check(CLI::Range(0.0, 1.0));
  uc1gen->callback([&] {
    action = [&](Session&) {
      auto corpus = uc1::generate_corpus(gen);
      uc1::write_corpus(corpus, g_out);
      std::cout << "wrote " << corpus.size() << " cycles to " << g_out << "\n";
    };
  });
  auto* uc1trace = uc1cmd->add_subcommand("trace", "Rebuild the context of a past decision");
  std::string t_op;
  uc1trace->add_option("operation", t_op, "Operation IRI (ex:UnscrewOp_N or full IRI)")->required();
  uc1trace->callback([&] {
    action = [&](Session& s) {
      auto t = uc1::trace_operation(s.store(), expand(t_op));
      std::cout << "operation: " << compact(t.operation) << "\n"
                << "screw: " << compact(t.screw) << "\n"
                << "resource: " << compact(t.resource) << "\n";
      for (const auto& u : t.record_uris) std::cout << "record: " << u << "\n";
      std::cout << "label: " << uc1::to_string(t.label) << "\n"
                << "success: " << (t.success ? "true" : "false") << "\n"
                << "decided-by: " << t.decided_by << "\n"
                << "activity: " << compact(t.activity) << "\n"
                << "decided-at: " << format_timestamp(t.decided_at) << "\n";
      auto num = [](double x) {
        char buf[64];
        return std::string(buf, std::to_chars(buf, buf + sizeof buf, x).ptr);
      };
      const auto& p = t.parameters;
      std::cout << "parameters: M_lower=" << num(p.m_lower) << " M_upper=" << num(p.m_upper)
                << " F_max=" << num(p.f_max) << " P_travel_min=" << num(p.travel_min)
                << " P_travel_max=" << num(p.travel_max) << "\n";
    };
  });

  // history
  auto* history = app.add_subcommand("history", "Inspect the transaction log");
  history->require_subcommand(1);
  auto* hlist = history->add_subcommand("list", "One line per transaction: id, timestamp, actor, +inserts -deletes");
  hlist->callback([&] {
    action = [&](Session& s) {
      for (const auto& e : s.store().history().entries())
        std::cout << e.txn << "\t" << format_timestamp(e.timestamp) << "\t" << e.actor << "\t+" << e.inserts.size()
                  << "\t-" << e.deletes.size() << "\n";
    };
  });
  auto* hat = history->add_subcommand("at", "State at a transaction id or timestamp, as Turtle or query result");
  std::string h_at, h_query, h_graph;
  hat->add_option("when", h_at, "Transaction id or xsd:dateTime")->required();
  hat->add_option("--query", h_query, "Run this query on the past state instead of dumping it");
  hat->add_option("--graph", h_graph, "Dump only this named graph");
  hat->callback([&] {
    action = [&](Session& s) {
      Snapshot view = resolve_at(s.store(), h_at);
      if (!h_query.empty()) {
        print_result(sparql::evaluate(sparql::parse_query(query_text(h_query), standard_prefixes()), view));
        return;
      }
      std::vector<Quad> quads;
      for (const auto& q : view.quads())
        if (h_graph.empty() || q.g == Term::iri(expand(h_graph))) quads.push_back(q);
      std::cout << serialize_turtle(quads, standard_prefixes());
    };
  });

  // replay
  auto* replay = app.add_subcommand("replay", "Serve recorded CSV channels through the replay connector");
  std::vector<std::string> r_files;
  std::size_t r_limit = 0;
  replay->add_option("files", r_files, "Per-channel CSV recordings")->required();
  replay->add_option("--limit", r_limit, "Stop after this many messages (0: all)");
  replay->callback([&] {
    action = [&](Session&) {
      mw::ReplayConnector c(r_files);
      c.connect();
      std::size_t n = 0;
      std::cout << "t\tchannel\tvalue\tunit\n";
      while (auto m = c.consume()) {
        std::cout << m->fields.at("t").value() << "\t" << m->fields.at("channel").value() << "\t"
                  << m->fields.at("value").value() << "\t" << m->fields.at("unit").value() << "\n";
        if (r_limit && ++n >= r_limit) break;
      }
      c.disconnect();
    };
  });

  // fetch
  auto* fetch = app.add_subcommand("fetch", "Materialize an individual through the object-graph mapper");
  std::string f_iri, f_class, f_at;
  int f_depth = 0;
  fetch->add_option("iri", f_iri, "Individual (prefixed name or IRI)")->required();
  fetch->add_option("--class", f_class, "Class to map to (default: its rdf:type)");
  fetch->add_option("--depth", f_depth, "Expansion depth")->capture_default_str()->check(CLI::NonNegativeNumber);
  fetch->add_option("--at", f_at, "Transaction id or xsd:dateTime");
  fetch->callback([&] {
    action = [&](Session& s) {
      Store& store = s.store();
      Snapshot view = resolve_at(store, f_at);
      std::string iri = expand(f_iri);
      std::string cls = f_class.empty() ? type_of(view, iri).value_or("") : expand(f_class);
      if (cls.empty()) throw std::runtime_error(f_iri + " has no rdf:type; pass --class");
      ogm::Ogm ogm(store, "urn:kapps:actor:cli");
      ogm::ScopeSpec scope;
      scope.depth = f_depth;
      auto obj = ogm.fetch(iri, cls, scope, view);
      std::set<std::string> seen;
      print_object(*obj, 0, seen);
    };
  });

  if (argc <= 1) {
    std::cout << app.help();
    return kUsage;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    Session session(g);
    if (action) action(session);
    session.save();
  } catch (const UsageError& e) {
    std::cerr << "kapps: " << e.what() << "\n";
    return kUsage;
  } catch (const TransactionRejected& e) {
    std::cerr << "kapps: transaction rejected\n" << shacl::serialize_report(e.report());
    return kViolation;
  } catch (const std::exception& e) {
    std::cerr << "kapps: " << e.what() << "\n";
    return kRuntime;
  }
  return status;
}
