#include "kapps/flexconveyor.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <deque>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

#include "kapps/history.hpp"
#include "kapps/resources.hpp"
#include "kapps/shacl.hpp"
#include "kapps/vocab.hpp"

namespace kapps::conveyor {

namespace {

std::string fc(const std::string& l) { return vocab::kFc + l; }
std::string fci(const std::string& l) { return vocab::kFci + l; }

const std::string kWmsActor = "urn:kapps:agent:wms";

std::string local(const std::string& iri) {
  auto cut = iri.find_last_of("#/");
  return cut == std::string::npos ? iri : iri.substr(cut + 1);
}

}  // namespace

const char* to_string(Dir d) {
  switch (d) {
    case Dir::N: return "N";
    case Dir::E: return "E";
    case Dir::S: return "S";
    case Dir::W: return "W";
  }
  return "?";
}

const std::string& neighbor_property(Dir d) {
  static const std::string n = fc("hasNeighborNorth"), e = fc("hasNeighborEast"),
                           s = fc("hasNeighborSouth"), w = fc("hasNeighborWest");
  switch (d) {
    case Dir::N: return n;
    case Dir::E: return e;
    case Dir::S: return s;
    case Dir::W: return w;
  }
  return n;
}

std::pair<int, int> Topology::position(const std::string& module) const {
  auto it = std::find(modules.begin(), modules.end(), module);
  if (it == modules.end()) throw std::invalid_argument("module not in topology: " + module);
  int i = static_cast<int>(it - modules.begin());
  return {i % width, i / width};
}

Topology make_grid(int width, int height) {
  if (width < 1 || height < 1) throw std::invalid_argument("grid dimensions must be >= 1");
  Topology t;
  t.width = width;
  t.height = height;
  for (int i = 0; i < width * height; ++i) t.modules.push_back(fci("Module" + std::to_string(i + 1)));
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      auto& adj = t.adjacency[t.at(x, y)];
      if (y > 0) adj[Dir::N] = t.at(x, y - 1);
      if (x + 1 < width) adj[Dir::E] = t.at(x + 1, y);
      if (y + 1 < height) adj[Dir::S] = t.at(x, y + 1);
      if (x > 0) adj[Dir::W] = t.at(x - 1, y);
    }
  }
  return t;
}

void load_vocabulary(Store& store) {
  store.load_graph(resource("ontology/cfc_core.ttl"), vocab::kOntologyGraph);
  store.load_graph(resource("ontology/service.ttl"), vocab::kOntologyGraph);
  store.load_graph(resource("ontology/flexconveyor.ttl"), vocab::kOntologyGraph);
  store.load_graph(resource("shapes/flexconveyor_shapes.ttl"), vocab::kShapesGraph);
}

std::unique_ptr<Store> make_store(bool focus_scope) {
  shacl::GateOptions opts;
  opts.focus_scope = focus_scope;
  auto store = std::make_unique<Store>(shacl::make_admission_gate(opts));
  load_vocabulary(*store);
  return store;
}

Topology build_topology(int width, int height, ogm::Ogm& ogm) {
  Topology t = make_grid(width, height);
  std::map<std::string, ogm::ObjectPtr> objs;
  for (const auto& m : t.modules) objs[m] = ogm.create(fc("FlexConveyorModule"), m);
  std::vector<ogm::ObjectPtr> batch;
  for (const auto& m : t.modules) {
    auto [x, y] = t.position(m);
    auto& o = objs[m];
    o->set_literal(fc("hasGridX"), Term::integer(x));
    o->set_literal(fc("hasGridY"), Term::integer(y));
    for (const auto& [d, n] : t.adjacency[m]) o->set_ref(neighbor_property(d), n);
    batch.push_back(o);
  }
  ogm.commit(batch);
  return t;
}

Topology read_topology(const Snapshot& view) {
  GraphSelector sel = GraphSelector::except({Term::iri(vocab::kShapesGraph)});
  std::map<std::pair<int, int>, std::string> cells;
  int w = 0, h = 0;
  for (const auto& t : view.match_triples(std::nullopt, Term::iri(vocab::rdf::type),
                                          Term::iri(fc("FlexConveyorModule")), sel)) {
    auto xs = view.match_triples(t.s, Term::iri(fc("hasGridX")), std::nullopt, sel);
    auto ys = view.match_triples(t.s, Term::iri(fc("hasGridY")), std::nullopt, sel);
    if (xs.size() != 1 || ys.size() != 1) throw std::runtime_error("module without grid position: " + t.s.value());
    int x = static_cast<int>(*xs[0].o.numeric_value()), y = static_cast<int>(*ys[0].o.numeric_value());
    cells[{y, x}] = t.s.value();
    w = std::max(w, x + 1);
    h = std::max(h, y + 1);
  }
  if (cells.empty()) throw std::runtime_error("no conveyor modules in the graph");
  if (static_cast<int>(cells.size()) != w * h) throw std::runtime_error("module grid is not rectangular");
  Topology topo;
  topo.width = w;
  topo.height = h;
  for (const auto& [pos, m] : cells) topo.modules.push_back(m);
  for (const auto& m : topo.modules) {
    auto& adj = topo.adjacency[m];
    for (Dir d : kDirs) {
      auto n = view.match_triples(Term::iri(m), Term::iri(neighbor_property(d)), std::nullopt, sel);
      if (!n.empty()) adj[d] = n[0].o.value();
    }
  }
  return topo;
}

Dir next_hop(const Topology& topo, const std::string& from, const std::string& to,
             const std::set<Dir>& excluded) {
  // BFS distances from the destination over the adjacency relation.
  std::map<std::string, int> dist{{to, 0}};
  std::deque<std::string> q{to};
  while (!q.empty()) {
    std::string cur = q.front();
    q.pop_front();
    auto it = topo.adjacency.find(cur);
    if (it == topo.adjacency.end()) continue;
    for (const auto& [d, n] : it->second) {
      if (dist.count(n)) continue;
      dist[n] = dist[cur] + 1;
      q.push_back(n);
    }
  }
  const auto& adj = topo.adjacency.at(from);
  std::optional<Dir> best;
  int best_dist = 0;
  for (Dir d : kDirs) {
    if (excluded.count(d)) continue;
    auto it = adj.find(d);
    if (it == adj.end()) continue;
    auto di = dist.find(it->second);
    if (di == dist.end()) continue;
    if (!best || di->second < best_dist) {
      best = d;
      best_dist = di->second;
    }
  }
  if (!best) {
    if (!excluded.empty()) return next_hop(topo, from, to, {});
    throw std::runtime_error("no route from " + from + " to " + to);
  }
  return *best;
}

const char* to_string(FaultMode m) {
  switch (m) {
    case FaultMode::None: return "none";
    case FaultMode::SkipReservation: return "skip-reservation";
    case FaultMode::DeliverWhilePossessed: return "deliver-while-possessed";
  }
  return "none";
}

std::optional<FaultMode> parse_fault_mode(const std::string& text) {
  for (auto m : {FaultMode::None, FaultMode::SkipReservation, FaultMode::DeliverWhilePossessed})
    if (text == to_string(m)) return m;
  return std::nullopt;
}

std::vector<BoxPlan> draw_plans(const Topology& topo, int boxes, std::mt19937_64& rng,
                                const std::set<std::string>& excluded) {
  std::vector<std::string> free;
  for (const auto& m : topo.modules)
    if (!excluded.count(m)) free.push_back(m);
  if (boxes <= 0) return {};
  if (static_cast<std::size_t>(boxes) > free.size()) throw std::invalid_argument("more boxes than free modules");
  std::shuffle(free.begin(), free.end(), rng);
  std::vector<std::string> origins(free.begin(), free.begin() + boxes);
  std::vector<BoxPlan> plans;
  if (boxes == 1) {
    std::vector<std::string> others;
    for (const auto& m : topo.modules)
      if (m != origins[0]) others.push_back(m);
    std::string d = others.empty() ? origins[0]
                                   : others[std::uniform_int_distribution<std::size_t>(0, others.size() - 1)(rng)];
    return {{origins[0], d}};
  }
  // Destinations are a derangement of the origins: every box heads for a
  // module that starts out occupied, so routes contend.
  std::vector<std::string> dests = origins;
  for (;;) {
    std::shuffle(dests.begin(), dests.end(), rng);
    bool fixed = false;
    for (std::size_t i = 0; i < dests.size(); ++i) fixed = fixed || dests[i] == origins[i];
    if (!fixed) break;
  }
  for (std::size_t i = 0; i < origins.size(); ++i) plans.push_back({origins[i], dests[i]});
  return plans;
}

std::size_t SimReport::rejections_with(const std::string& component) const {
  return static_cast<std::size_t>(std::count_if(rejections.begin(), rejections.end(), [&](const RejectionEvent& e) {
    return e.source_constraint_component == component;
  }));
}

std::string SimReport::to_text() const {
  std::ostringstream out;
  out << "boxes: " << boxes << "\n"
      << "delivered: " << delivered << "\n"
      << "ticks: " << ticks << "\n"
      << "admitted-transactions: " << admitted_transactions << "\n";
  if (validated_transactions)
    out << "validated-transactions: " << validated_transactions << "\n"
        << "nonconforming-transactions: " << nonconforming_transactions << "\n"
        << "possession-violations: " << possession_violations << "\n";
  out << "rejections: " << rejections.size() << "\n";
  for (const auto& e : rejections)
    out << "  - tick " << e.tick << " " << local(e.actor) << " " << e.action << " " << local(e.box) << " "
        << local(e.source_constraint_component) << " focus " << local(e.focus_node) << " quads "
        << e.quads_before << "->" << e.quads_after << "\n";
  out << "paths:\n";
  for (const auto& [box, path] : paths) {
    out << "  " << local(box) << ":";
    for (const auto& m : path) out << " " << local(m);
    out << "\n";
  }
  return out.str();
}

// Simulation -------------------------------------------------------------------

struct Simulation::Agent {
  std::string module;
  std::unique_ptr<ogm::Ogm> ogm;
  std::unique_ptr<mw::Middleware> mw;
  std::mt19937_64 rng;

  std::mutex mu;  // guards everything below
  int backoff = 0;
  // Directions refused since the last successful move.
  std::set<Dir> denied;
  bool faulty = false;
  struct Reservation {
    std::string sender, box;
    std::int64_t expires;
  };
  std::optional<Reservation> reservation;
  int received_tick = -1;
  int hold_until = -1;
};

struct Simulation::Shared {
  mw::LocalNetwork net;
  std::unique_ptr<ogm::Ogm> wms;
  std::vector<std::unique_ptr<Agent>> agents;
  std::map<std::string, Agent*> by_module;
  std::set<std::string> boxes, blockers;
  std::mutex report_mu;
  SimReport report;
  std::atomic<int> tick{0};
  std::atomic<bool> done{false};
  bool threaded = false;
  shacl::ShapeSet shapes;
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

  std::int64_t now() const {
    if (threaded)
      return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start).count();
    return static_cast<std::int64_t>(tick.load()) * 100;
  }
  std::int64_t reservation_ttl() const { return threaded ? 200 : 200; }

  void trace(const std::string& line) {
    std::lock_guard lock(report_mu);
    report.trace.push_back("tick " + std::to_string(tick.load()) + " " + line);
  }
};

namespace {

Term uri(const std::string& s) { return Term::any_uri(s); }

std::vector<std::string> possessions(const Snapshot& s, const std::string& module) {
  std::vector<std::string> out;
  for (const auto& t : s.match_triples(Term::iri(module), Term::iri(fc("hasPossession")), std::nullopt))
    out.push_back(t.o.value());
  return out;
}

std::string workflow_iri(const std::string& module, const std::string& kind) {
  return module + kind + "Workflow";
}

}  // namespace

Simulation::Simulation(SimConfig config) : config_(std::move(config)), shared_(std::make_unique<Shared>()) {
  if (config_.max_ticks <= 0) config_.max_ticks = 50 * (config_.width + config_.height) * std::max(1, config_.boxes);
  store_ = make_store(config_.focus_scope);
  shared_->threaded = config_.threaded;
  shared_->shapes = shacl::load_shapes(store_->snapshot());

  if (config_.validate_every_commit) {
    Shared* sh = shared_.get();
    store_->add_commit_listener([sh](TxnId, const TransactionDelta&, const Snapshot& snap) {
      auto report = shacl::validate(snap, sh->shapes);
      std::uint64_t poss = 0;
      for (const auto& t : snap.match_triples(std::nullopt, Term::iri(fc("hasState")), std::nullopt)) {
        auto n = snap.match_triples(t.s, Term::iri(fc("isPossessedBy")), std::nullopt).size();
        bool in_transit = t.o == Term::iri(fc("StateInTransit"));
        if (in_transit ? n != 1 : n != 0) ++poss;
      }
      std::lock_guard lock(sh->report_mu);
      ++sh->report.validated_transactions;
      if (!report.conforms) ++sh->report.nonconforming_transactions;
      sh->report.possession_violations += poss;
    });
  }
  shared_->wms = std::make_unique<ogm::Ogm>(*store_, kWmsActor);
  build_topology(config_.width, config_.height, *shared_->wms);
  // Agents work from the graph's view of the grid, not the builder's.
  topology_ = read_topology(store_->snapshot());
  shared_->report.boxes = config_.boxes;
}

Simulation::~Simulation() {
  // Middleware instances unbind from the network before it goes away.
  for (auto& a : shared_->agents) a->mw.reset();
}

SimReport Simulation::run() {
  Shared& sh = *shared_;
  Store& store = *store_;
  const Topology& topo = topology_;
  const SimConfig cfg = config_;
  std::mt19937_64 rng(cfg.seed);

  auto record_rejection = [&](Agent* a, const std::string& actor, const std::string& action, const std::string& box,
                              const mw::Fault& f, std::size_t qb, TxnId hb) {
    RejectionEvent e;
    e.tick = sh.tick.load();
    e.actor = actor;
    e.action = action;
    e.box = box;
    e.source_constraint_component = f.source_constraint_component.value_or("");
    e.focus_node = f.focus_node.value_or("");
    e.message = f.message.value_or(f.detail);
    e.report = f.report.value_or("");
    e.quads_before = qb;
    e.head_before = hb;
    Snapshot after = store.snapshot();
    e.quads_after = after.size();
    e.head_after = after.txn();
    (void)a;
    std::lock_guard lock(sh.report_mu);
    sh.report.rejections.push_back(std::move(e));
  };

  auto fault_fires = [&](Agent& a) {
    std::lock_guard lock(a.mu);
    if (!a.faulty) return false;
    return std::uniform_real_distribution<double>(0, 1)(a.rng) < cfg.fault_probability;
  };

  // Delivery at the owning module; performed by Receive.
  auto deliver = [&](Agent& a, const std::string& box) -> bool {
    if (cfg.fault == FaultMode::DeliverWhilePossessed && fault_fires(a)) {
      auto b = a.ogm->fetch(box, fc("Box"));
      b->set_ref(fc("hasState"), fc("StateDelivered"));
      std::size_t qb = store.snapshot().size();
      TxnId hb = store.head();
      try {
        a.ogm->commit(b);
        sh.trace(local(a.module) + " deliver-while-possessed " + local(box) + " admitted");
      } catch (const TransactionRejected& e) {
        mw::Fault f;
        f.kind = mw::FaultKind::HandlerFault;
        f.detail = e.what();
        f.report = shacl::serialize_report(e.report());
        for (const auto& r : e.report().results) {
          if (r.severity != vocab::sh::Violation) continue;
          f.source_constraint_component = r.source_constraint_component;
          f.focus_node = r.focus_node.value();
          f.message = r.message;
          break;
        }
        record_rejection(&a, a.module, "deliver", box, f, qb, hb);
        sh.trace(local(a.module) + " deliver-while-possessed " + local(box) + " rejected " +
                 local(f.source_constraint_component.value_or("")));
        std::lock_guard lock(a.mu);
        a.faulty = false;
      }
    }
    auto b = a.ogm->fetch(box, fc("Box"));
    if (b->ref(fc("hasState")) == fc("StateDelivered") && !b->has(fc("isPossessedBy"))) return true;
    b->set_ref(fc("hasState"), fc("StateDelivered"));
    b->clear(fc("isPossessedBy"));
    TxnId id = a.ogm->commit(b);
    sh.trace(local(a.module) + " deliver " + local(box) + " txn " + std::to_string(id));
    std::lock_guard lock(sh.report_mu);
    if (sh.boxes.count(box)) {
      ++sh.report.delivered;
      if (sh.report.delivered == cfg.boxes) sh.done = true;
    }
    return true;
  };

  // Agents, middleware and handlers.
  for (std::size_t i = 0; i < topo.modules.size(); ++i) {
    auto a = std::make_unique<Agent>();
    a->module = topo.modules[i];
    a->ogm = std::make_unique<ogm::Ogm>(store, a->module);
    a->mw = std::make_unique<mw::Middleware>(cfg.node_prefix + std::to_string(i + 1), *a->ogm, sh.net);
    a->rng.seed(cfg.seed * 1000003ULL + i);
    a->faulty = cfg.fault != FaultMode::None;
    sh.by_module[a->module] = a.get();
    sh.agents.push_back(std::move(a));
  }
  for (auto& up : sh.agents) {
    Agent* a = up.get();
    mw::ServiceDescriptor d;
    d.service_iri = a->module + "Service";
    d.provided_by = a->module;
    auto wf = [&](const std::string& kind, std::vector<mw::ParameterSpec> params) {
      mw::WorkflowDescriptor w;
      w.workflow_iri = workflow_iri(a->module, kind);
      w.workflow_class = fc(kind + "Workflow");
      w.parameters = std::move(params);
      w.outcome = {"ok", vocab::xsd::boolean};
      return w;
    };
    d.workflows = {wf("Reserve", {{"box", vocab::xsd::anyURI}, {"from", vocab::xsd::anyURI}}),
                   wf("Convey", {{"box", vocab::xsd::anyURI}, {"to", vocab::xsd::anyURI}}),
                   wf("Receive", {{"box", vocab::xsd::anyURI}})};
    std::map<std::string, mw::Handler> h;
    h[workflow_iri(a->module, "Reserve")] = [&sh, &store, a](const mw::Args& args) {
      std::string from = args.at("from").value(), box = args.at("box").value();
      std::lock_guard lock(a->mu);
      if (a->reservation && a->reservation->expires < sh.now()) a->reservation.reset();
      bool occupied = !possessions(store.snapshot(), a->module).empty();
      if (occupied || (a->reservation && a->reservation->sender != from)) return Term::boolean(false);
      a->reservation = Agent::Reservation{from, box, sh.now() + sh.reservation_ttl()};
      return Term::boolean(true);
    };
    h[workflow_iri(a->module, "Convey")] = [a](const mw::Args& args) {
      auto b = a->ogm->fetch(args.at("box").value(), fc("Box"));
      b->set_ref(fc("isPossessedBy"), args.at("to").value());
      a->ogm->commit(b);
      return Term::boolean(true);
    };
    h[workflow_iri(a->module, "Receive")] = [&sh, a, deliver](const mw::Args& args) {
      std::string box = args.at("box").value();
      int hold;
      {
        std::lock_guard lock(a->mu);
        if (a->reservation && a->reservation->box == box) a->reservation.reset();
        a->received_tick = sh.tick.load();
        hold = a->hold_until;
      }
      auto b = a->ogm->fetch(box, fc("Box"));
      if (b->ref(fc("hasDestination")) != a->module || hold > sh.tick.load()) return Term::boolean(false);
      return Term::boolean(deliver(*a, box));
    };
    a->mw->register_service(d, h);
  }

  // Box plans.
  std::vector<BoxPlan> plans = cfg.plans;
  if (plans.empty()) {
    std::set<std::string> reserved;
    if (cfg.stage_occupied && topo.modules.size() > 1) {
      BoxPlan first{topo.modules.front(), topo.modules.back()};
      reserved.insert(first.origin);
      reserved.insert(topo.adjacency.at(first.origin).at(next_hop(topo, first.origin, first.destination)));
      plans.push_back(first);
    }
    auto rest = draw_plans(topo, cfg.boxes - static_cast<int>(plans.size()), rng, reserved);
    plans.insert(plans.end(), rest.begin(), rest.end());
  }

  // Staged blocker in the first box's next hop.
  if (cfg.stage_occupied && !plans.empty() && plans[0].origin != plans[0].destination) {
    std::string target = topo.adjacency.at(plans[0].origin).at(next_hop(topo, plans[0].origin, plans[0].destination));
    std::string blocker = fci("Blocker1");
    auto b = sh.wms->create(fc("Box"), blocker);
    b->set_ref(fc("hasState"), fc("StateInTransit"));
    b->set_ref(fc("hasOrigin"), target);
    b->set_ref(fc("hasDestination"), target);
    b->set_ref(fc("isPossessedBy"), target);
    sh.wms->commit(b);
    sh.blockers.insert(blocker);
    sh.by_module[target]->hold_until = cfg.stage_hold_ticks;
    sh.trace("wms stage " + local(blocker) + " at " + local(target));
  }

  // WMS: create each box, then hand it to its origin.
  for (std::size_t i = 0; i < plans.size(); ++i) {
    std::string box = fci("Box" + std::to_string(i + 1));
    sh.boxes.insert(box);
    auto b = sh.wms->create(fc("Box"), box);
    b->set_ref(fc("hasState"), fc("StateCreated"));
    b->set_ref(fc("hasOrigin"), plans[i].origin);
    b->set_ref(fc("hasDestination"), plans[i].destination);
    sh.wms->commit(b);
    b->set_ref(fc("hasState"), fc("StateInTransit"));
    b->set_ref(fc("isPossessedBy"), plans[i].origin);
    std::size_t qb = store.snapshot().size();
    TxnId hb = store.head();
    try {
      TxnId id = sh.wms->commit(b);
      sh.report.paths[box] = {plans[i].origin};
      sh.trace("wms create " + local(box) + " " + local(plans[i].origin) + "->" + local(plans[i].destination) +
               " txn " + std::to_string(id));
    } catch (const TransactionRejected& e) {
      mw::Fault f;
      f.report = shacl::serialize_report(e.report());
      if (!e.report().results.empty()) {
        f.source_constraint_component = e.report().results.front().source_constraint_component;
        f.focus_node = e.report().results.front().focus_node.value();
        f.message = e.report().results.front().message;
      }
      record_rejection(nullptr, kWmsActor, "create", box, f, qb, hb);
      sh.trace("wms create " + local(box) + " rejected");
    }
  }

  // One agent step.
  auto step = [&](Agent& a) {
    Snapshot view = store.snapshot();
    auto held = possessions(view, a.module);
    if (held.empty()) return;
    std::string box = held.front();
    int now_tick = sh.tick.load();
    {
      std::lock_guard lock(a.mu);
      if (a.hold_until > now_tick) return;
      if (!sh.threaded && a.received_tick == now_tick) return;
    }
    auto b = a.ogm->fetch(box, fc("Box"));
    if (b->ref(fc("hasState")) != fc("StateInTransit")) return;
    auto dest = b->ref(fc("hasDestination"));
    if (!dest) return;
    if (*dest == a.module) {
      auto res = a.mw->invoke(workflow_iri(a.module, "Receive"), *a.mw->address(), {{"box", uri(box)}});
      if (!res.ok) sh.trace(local(a.module) + " receive " + local(box) + " fault " + res.fault->detail);
      return;
    }
    std::set<Dir> excluded;
    {
      std::lock_guard lock(a.mu);
      if (a.backoff > 0) {
        --a.backoff;
        return;
      }
      if (a.denied.size() >= topo.adjacency.at(a.module).size()) a.denied.clear();
      excluded = a.denied;
    }
    Dir dir = next_hop(topo, a.module, *dest, excluded);
    auto next = a.ogm->fetch(a.module, fc("FlexConveyorModule"))->ref(neighbor_property(dir));
    if (!next) return;
    std::string receiver = *next;
    auto backoff = [&](const std::string& why) {
      std::lock_guard lock(a.mu);
      a.backoff = std::uniform_int_distribution<int>(1, 3)(a.rng);
      a.denied.insert(dir);
      sh.trace(local(a.module) + " " + why + " " + local(box) + " " + to_string(dir) + " " + local(receiver) +
               " backoff " + std::to_string(a.backoff));
    };
    // Peers are found through the graph only.
    auto reserve_ep = a.mw->discover(fc("ReserveWorkflow"), receiver);
    auto receive_ep = a.mw->discover(fc("ReceiveWorkflow"), receiver);
    if (reserve_ep.empty() || receive_ep.empty()) return backoff("no-endpoint");

    bool skip = cfg.fault == FaultMode::SkipReservation && fault_fires(a);
    if (!skip) {
      auto r = a.mw->invoke(reserve_ep[0].workflow_iri, reserve_ep[0].address, {{"box", uri(box)}, {"from", uri(a.module)}});
      if (!r.ok || r.outcome != Term::boolean(true)) return backoff("reserve-denied");
    }
    std::size_t qb = view.size();
    TxnId hb = store.head();
    qb = store.snapshot().size();
    auto c = a.mw->invoke(workflow_iri(a.module, "Convey"), *a.mw->address(), {{"box", uri(box)}, {"to", uri(receiver)}});
    if (!c.ok) {
      if (c.fault && c.fault->report) {
        record_rejection(&a, a.module, skip ? "convey-unreserved" : "convey", box, *c.fault, qb, hb);
        if (c.fault->source_constraint_component == vocab::sh::MaxCountConstraintComponent) {
          std::lock_guard lock(a.mu);
          a.faulty = false;
        }
      }
      return backoff(skip ? "convey-unreserved-rejected" : "convey-rejected");
    }
    {
      std::lock_guard lock(a.mu);
      a.denied.clear();
    }
    {
      std::lock_guard lock(sh.report_mu);
      sh.report.paths[box].push_back(receiver);
    }
    sh.trace(local(a.module) + (skip ? " convey-unreserved " : " convey ") + local(box) + " " + to_string(dir) + " " +
             local(receiver) + " txn " + std::to_string(store.head()));
    auto r = a.mw->invoke(receive_ep[0].workflow_iri, receive_ep[0].address, {{"box", uri(box)}});
    if (!r.ok) sh.trace(local(a.module) + " receive " + local(box) + " fault " + r.fault->detail);
  };

  {
    std::lock_guard lock(sh.report_mu);
    if (sh.report.delivered == cfg.boxes) sh.done = true;
  }
  if (!cfg.threaded) {
    int t = 0;
    for (; t < cfg.max_ticks && !sh.done; ++t) {
      sh.tick = t;
      std::vector<Agent*> order;
      for (auto& a : sh.agents) order.push_back(a.get());
      std::shuffle(order.begin(), order.end(), rng);
      for (Agent* a : order) step(*a);
    }
    sh.report.ticks = t;
  } else {
    auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(20LL * cfg.max_ticks);
    std::atomic<int> iterations{0};
    std::vector<std::thread> threads;
    for (auto& up : sh.agents) {
      Agent* a = up.get();
      threads.emplace_back([&, a] {
        while (!sh.done && std::chrono::steady_clock::now() < deadline) {
          try {
            step(*a);
          } catch (const std::exception& e) {
            sh.trace(local(a->module) + " error " + e.what());
          }
          sh.tick = ++iterations / static_cast<int>(sh.agents.size());
          std::this_thread::sleep_for(std::chrono::microseconds(200));
        }
      });
    }
    for (auto& th : threads) th.join();
    sh.report.ticks = sh.tick.load();
  }

  std::lock_guard lock(sh.report_mu);
  sh.report.admitted_transactions = 0;
  for (const auto& e : store.history().entries())
    if (e.actor != "urn:kapps:actor:bootstrap") ++sh.report.admitted_transactions;
  return sh.report;
}

SimReport run_simulation(const SimConfig& config) {
  Simulation sim(config);
  return sim.run();
}

}  // namespace kapps::conveyor
