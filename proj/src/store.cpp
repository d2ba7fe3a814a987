#include "kapps/store.hpp"

#include <algorithm>
#include <array>

#include "kapps/history.hpp"
#include "kapps/turtle.hpp"

namespace kapps {

namespace detail {

using Key = std::array<Term, 3>;

struct GraphIndex {
  std::set<Key> spo, pos, osp;

  void insert(const Triple& t) {
    spo.insert({t.s, t.p, t.o});
    pos.insert({t.p, t.o, t.s});
    osp.insert({t.o, t.s, t.p});
  }
  void erase(const Triple& t) {
    spo.erase({t.s, t.p, t.o});
    pos.erase({t.p, t.o, t.s});
    osp.erase({t.o, t.s, t.p});
  }
  std::size_t size() const { return spo.size(); }
};

struct StoreState {
  std::map<Term, std::shared_ptr<const GraphIndex>> graphs;
  std::map<Term, TxnId> versions;
  std::size_t size = 0;
  TxnId txn = 0;
};

}  // namespace detail

namespace {

using detail::GraphIndex;
using detail::Key;

// Visits keys of `idx` whose leading components equal the bound ones. Bound
// components must form a prefix (k1 bound implies k0 bound, and so on).
template <class F>
void scan_prefix(const std::set<Key>& idx, const Term* k0, const Term* k1, const Term* k2,
                 F&& visit) {
  Key lo{k0 ? *k0 : Term(), k1 ? *k1 : Term(), k2 ? *k2 : Term()};
  for (auto it = idx.lower_bound(lo); it != idx.end(); ++it) {
    if (k0 && (*it)[0] != *k0) break;
    if (k1 && (*it)[1] != *k1) break;
    if (k2 && (*it)[2] != *k2) break;
    visit(*it);
  }
}

template <class F>
void match_graph(const GraphIndex& gi, const std::optional<Term>& s, const std::optional<Term>& p,
                 const std::optional<Term>& o, F&& visit) {
  const Term* S = s ? &*s : nullptr;
  const Term* P = p ? &*p : nullptr;
  const Term* O = o ? &*o : nullptr;
  auto from_spo = [&](const Key& k) { visit(Triple{k[0], k[1], k[2]}); };
  auto from_pos = [&](const Key& k) { visit(Triple{k[2], k[0], k[1]}); };
  auto from_osp = [&](const Key& k) { visit(Triple{k[1], k[2], k[0]}); };
  if (S && P && O) {
    if (gi.spo.count({*S, *P, *O})) visit(Triple{*S, *P, *O});
  } else if (S && P) {
    scan_prefix(gi.spo, S, P, nullptr, from_spo);
  } else if (S && O) {
    scan_prefix(gi.osp, O, S, nullptr, from_osp);
  } else if (S) {
    scan_prefix(gi.spo, S, nullptr, nullptr, from_spo);
  } else if (P && O) {
    scan_prefix(gi.pos, P, O, nullptr, from_pos);
  } else if (P) {
    scan_prefix(gi.pos, P, nullptr, nullptr, from_pos);
  } else if (O) {
    scan_prefix(gi.osp, O, nullptr, nullptr, from_osp);
  } else {
    for (const auto& k : gi.spo) from_spo(k);
  }
}

bool matches(const QuadPattern& pat, const Quad& q) {
  return (!pat.s || *pat.s == q.s) && (!pat.p || *pat.p == q.p) && (!pat.o || *pat.o == q.o) &&
         (!pat.g || *pat.g == q.g);
}

}  // namespace

bool GraphSelector::admits(const Term& graph) const {
  switch (mode) {
    case Mode::All: return true;
    case Mode::Only: return graphs.count(graph) > 0;
    case Mode::Except: return graphs.count(graph) == 0;
  }
  return false;
}

Snapshot::Snapshot() : state_(std::make_shared<detail::StoreState>()) {}
Snapshot::Snapshot(std::shared_ptr<const detail::StoreState> state) : state_(std::move(state)) {}

std::vector<Quad> Snapshot::match(const QuadPattern& pattern) const {
  std::vector<Quad> out;
  auto visit_graph = [&](const Term& g, const GraphIndex& gi) {
    match_graph(gi, pattern.s, pattern.p, pattern.o,
                [&](const Triple& t) { out.push_back({t.s, t.p, t.o, g}); });
  };
  if (pattern.g) {
    auto it = state_->graphs.find(*pattern.g);
    if (it != state_->graphs.end()) visit_graph(it->first, *it->second);
  } else {
    for (const auto& [g, gi] : state_->graphs) visit_graph(g, *gi);
  }
  return out;
}

std::vector<Triple> Snapshot::match_triples(const std::optional<Term>& s,
                                            const std::optional<Term>& p,
                                            const std::optional<Term>& o,
                                            const GraphSelector& graphs) const {
  std::vector<Triple> out;
  int contributing = 0;
  auto visit_graph = [&](const GraphIndex& gi) {
    auto before = out.size();
    match_graph(gi, s, p, o, [&](const Triple& t) { out.push_back(t); });
    if (out.size() != before) ++contributing;
  };
  if (graphs.mode == GraphSelector::Mode::Only) {
    for (const auto& g : graphs.graphs) {
      auto it = state_->graphs.find(g);
      if (it != state_->graphs.end()) visit_graph(*it->second);
    }
  } else {
    for (const auto& [g, gi] : state_->graphs)
      if (graphs.admits(g)) visit_graph(*gi);
  }
  if (contributing > 1) {
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
  }
  return out;
}

bool Snapshot::contains(const Quad& q) const {
  auto it = state_->graphs.find(q.g);
  return it != state_->graphs.end() && it->second->spo.count({q.s, q.p, q.o}) > 0;
}

bool Snapshot::mentions(const Term& node) const {
  for (const auto& [g, gi] : state_->graphs) {
    bool found = false;
    scan_prefix(gi->spo, &node, nullptr, nullptr, [&](const Key&) { found = true; });
    if (found) return true;
    scan_prefix(gi->osp, &node, nullptr, nullptr, [&](const Key&) { found = true; });
    if (found) return true;
  }
  return false;
}

std::size_t Snapshot::size() const { return state_->size; }
TxnId Snapshot::txn() const { return state_->txn; }

std::vector<Term> Snapshot::graph_names() const {
  std::vector<Term> out;
  for (const auto& [g, gi] : state_->graphs) out.push_back(g);
  return out;
}

TxnId Snapshot::graph_version(const Term& graph) const {
  auto it = state_->versions.find(graph);
  return it == state_->versions.end() ? 0 : it->second;
}

std::vector<Quad> Snapshot::quads() const {
  std::vector<Quad> out;
  out.reserve(state_->size);
  for (const auto& [g, gi] : state_->graphs)
    for (const auto& k : gi->spo) out.push_back({k[0], k[1], k[2], g});
  return out;
}

std::vector<Quad> Snapshot::scan(const QuadPattern& pattern) const {
  std::vector<Quad> out;
  for (auto& q : quads())
    if (matches(pattern, q)) out.push_back(std::move(q));
  return out;
}

Snapshot Snapshot::with_changes(const std::set<Quad>& inserts, const std::set<Quad>& deletes,
                                TxnId txn) const {
  auto next = std::make_shared<detail::StoreState>(*state_);
  std::map<Term, std::shared_ptr<GraphIndex>> touched;
  auto writable = [&](const Term& g) -> GraphIndex& {
    auto it = touched.find(g);
    if (it != touched.end()) return *it->second;
    auto cur = next->graphs.find(g);
    auto copy = cur == next->graphs.end() ? std::make_shared<GraphIndex>()
                                          : std::make_shared<GraphIndex>(*cur->second);
    touched.emplace(g, copy);
    return *copy;
  };
  for (const auto& q : deletes) {
    auto& gi = writable(q.g);
    auto before = gi.size();
    gi.erase(q.triple());
    next->size -= before - gi.size();
  }
  for (const auto& q : inserts) {
    auto& gi = writable(q.g);
    auto before = gi.size();
    gi.insert(q.triple());
    next->size += gi.size() - before;
  }
  for (auto& [g, gi] : touched) {
    next->versions[g] = txn;
    if (gi->size() == 0)
      next->graphs.erase(g);
    else
      next->graphs[g] = gi;
  }
  next->txn = txn;
  return Snapshot(std::move(next));
}

Snapshot Snapshot::from_quads(const std::set<Quad>& quads, TxnId txn) {
  return Snapshot().with_changes(quads, {}, txn);
}

bool Snapshot::operator==(const Snapshot& o) const {
  return state_ == o.state_ || (size() == o.size() && quads() == o.quads());
}

TransactionRejected::TransactionRejected(ValidationReport report)
    : std::runtime_error("transaction rejected: " + std::to_string(report.results.size()) +
                         " constraint violation(s)"),
      report_(std::move(report)) {}

Store::Store(AdmissionGate gate, Clock clock)
    : gate_(std::move(gate)), clock_(std::move(clock)), history_(std::make_unique<HistoryLog>()) {
  if (!clock_) {
    clock_ = [] {
      return std::chrono::floor<std::chrono::microseconds>(std::chrono::system_clock::now());
    };
  }
}

Store::~Store() = default;

Snapshot Store::snapshot() const {
  std::lock_guard lock(head_mu_);
  return head_;
}

Timestamp Store::stamp_locked(std::optional<Timestamp> requested) {
  Timestamp ts = requested ? *requested : clock_();
  if (last_ts_ && ts <= *last_ts_) ts = *last_ts_ + std::chrono::microseconds(1);
  last_ts_ = ts;
  return ts;
}

TxnId Store::apply_transaction(TransactionDelta delta) {
  std::lock_guard lock(write_mu_);
  delta.timestamp = stamp_locked(delta.timestamp);
  return commit_locked(std::move(delta), /*gated=*/true, /*skolemize_all=*/false);
}

TxnId Store::transact(const DeltaBuilder& build) {
  std::lock_guard lock(write_mu_);
  Timestamp ts = stamp_locked(std::nullopt);
  TransactionDelta delta = build(snapshot(), ts);
  delta.timestamp = ts;
  return commit_locked(std::move(delta), true, false);
}

TxnId Store::load_graph(std::string_view turtle, const std::string& graph,
                        const std::string& base) {
  Term g = Term::iri(graph);
  TurtleDocument doc = parse_turtle(turtle, base);
  TransactionDelta delta;
  delta.actor = "urn:kapps:actor:bootstrap";
  for (const auto& t : doc.triples) delta.inserts.insert({t.s, t.p, t.o, g});
  std::lock_guard lock(write_mu_);
  delta.timestamp = stamp_locked(std::nullopt);
  return commit_locked(std::move(delta), /*gated=*/false, /*skolemize_all=*/true);
}

TxnId Store::replay(TransactionDelta delta) {
  if (!delta.timestamp) throw MalformedDelta("replayed transaction without timestamp");
  for (const auto& q : delta.inserts) check_quad(q);
  for (const auto& q : delta.deletes) check_quad(q);
  std::lock_guard lock(write_mu_);
  Snapshot head = snapshot();
  for (const auto& q : delta.deletes)
    if (!head.contains(q)) throw MalformedDelta("replayed delete of absent quad: " + to_string(q));
  for (const auto& q : delta.inserts)
    if (head.contains(q)) throw MalformedDelta("replayed insert of present quad: " + to_string(q));
  if (last_ts_ && *delta.timestamp <= *last_ts_) throw MalformedDelta("replayed timestamps must increase");
  last_ts_ = delta.timestamp;
  // Keep later skolem labels clear of the restored ones.
  auto bump = [&](const Term& t) {
    if (t.is_blank() && t.value().rfind("sk", 0) == 0) {
      try {
        skolem_counter_ = std::max<std::uint64_t>(skolem_counter_, std::stoull(t.value().substr(2)));
      } catch (const std::exception&) {
      }
    }
  };
  for (const auto& q : delta.inserts) {
    bump(q.s);
    bump(q.o);
  }
  TxnId next = head.txn() + 1;
  Snapshot candidate = head.with_changes(delta.inserts, delta.deletes, next);
  history_->record({next, *delta.timestamp, delta.actor, delta.inserts, delta.deletes});
  {
    std::lock_guard hl(head_mu_);
    head_ = candidate;
  }
  for (const auto& listener : listeners_) listener(next, delta, candidate);
  return next;
}

TxnId Store::commit_locked(TransactionDelta delta, bool gated, bool skolemize_all) {
  for (const auto& q : delta.inserts) check_quad(q);
  for (const auto& q : delta.deletes) check_quad(q);
  for (const auto& q : delta.inserts)
    if (delta.deletes.count(q))
      throw MalformedDelta("quad both inserted and deleted: " + to_string(q));

  Snapshot head = snapshot();

  // Blank nodes are scoped to the delta unless they already name a stored node.
  std::map<std::string, Term> relabel;
  auto skolem = [&](const Term& t) -> Term {
    if (!t.is_blank()) return t;
    auto it = relabel.find(t.value());
    if (it != relabel.end()) return it->second;
    Term mapped = (!skolemize_all && head.mentions(t))
                      ? t
                      : Term::blank("sk" + std::to_string(++skolem_counter_));
    relabel.emplace(t.value(), mapped);
    return mapped;
  };
  auto skolemize = [&](const std::set<Quad>& in) {
    std::set<Quad> out;
    for (const auto& q : in) out.insert({skolem(q.s), q.p, skolem(q.o), q.g});
    return out;
  };

  TransactionDelta effective;
  effective.actor = delta.actor;
  effective.timestamp = delta.timestamp;
  for (auto& q : skolemize(delta.deletes))
    if (head.contains(q)) effective.deletes.insert(q);
  for (auto& q : skolemize(delta.inserts))
    if (!head.contains(q)) effective.inserts.insert(q);
  if (effective.empty()) return head.txn();

  TxnId next = head.txn() + 1;
  Snapshot candidate = head.with_changes(effective.inserts, effective.deletes, next);
  if (gated && gate_) {
    if (auto report = gate_(head, effective, candidate)) throw TransactionRejected(*report);
  }
  history_->record({next, *effective.timestamp, effective.actor, effective.inserts,
                    effective.deletes});
  {
    std::lock_guard lock(head_mu_);
    head_ = candidate;
  }
  for (const auto& listener : listeners_) listener(next, effective, candidate);
  return next;
}

Snapshot Store::state_at(TxnId txn) const { return history_->state_at(snapshot(), txn); }

Snapshot Store::state_at(Timestamp when) const {
  Snapshot head = snapshot();
  return history_->state_at(head, std::min(history_->txn_at(when), head.txn()));
}

void Store::add_commit_listener(CommitListener listener) {
  std::lock_guard lock(write_mu_);
  listeners_.push_back(std::move(listener));
}

}  // namespace kapps
