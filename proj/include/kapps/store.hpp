#pragma once
// Transactional in-memory quad store.
//
// State lives in immutable, reference-counted snapshots; a commit builds the
// next snapshot copy-on-write (only touched graphs are cloned) and swaps it
// in under the writer lock. Readers never block writers.

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "kapps/term.hpp"
#include "kapps/timeutil.hpp"
#include "kapps/validation_report.hpp"

namespace kapps {

using TxnId = std::uint64_t;

struct QuadPattern {
  std::optional<Term> s, p, o, g;
};

// Which named graphs a triple-level read ranges over.
struct GraphSelector {
  enum class Mode { All, Only, Except };
  Mode mode = Mode::All;
  std::set<Term> graphs;

  static GraphSelector all() { return {}; }
  static GraphSelector only(std::set<Term> g) { return {Mode::Only, std::move(g)}; }
  static GraphSelector except(std::set<Term> g) { return {Mode::Except, std::move(g)}; }
  bool admits(const Term& graph) const;
};

namespace detail {
struct StoreState;
}

class Snapshot {
 public:
  Snapshot();

  std::vector<Quad> match(const QuadPattern& pattern) const;
  // Distinct triples matching (s, p, o) across the selected graphs.
  std::vector<Triple> match_triples(const std::optional<Term>& s, const std::optional<Term>& p,
                                    const std::optional<Term>& o,
                                    const GraphSelector& graphs = {}) const;
  bool contains(const Quad& q) const;
  bool mentions(const Term& node) const;  // occurs as subject or object
  std::size_t size() const;
  TxnId txn() const;
  std::vector<Term> graph_names() const;
  // Transaction that last modified `graph` (0 if never).
  TxnId graph_version(const Term& graph) const;
  // All quads in (g, s, p, o) order.
  std::vector<Quad> quads() const;
  // Linear scan over every quad; reference path for index cross-checks.
  std::vector<Quad> scan(const QuadPattern& pattern) const;

  Snapshot with_changes(const std::set<Quad>& inserts, const std::set<Quad>& deletes,
                        TxnId txn) const;
  static Snapshot from_quads(const std::set<Quad>& quads, TxnId txn);

  bool operator==(const Snapshot& o) const;  // content equality

 private:
  explicit Snapshot(std::shared_ptr<const detail::StoreState> state);
  std::shared_ptr<const detail::StoreState> state_;
};

struct TransactionDelta {
  std::set<Quad> inserts;
  std::set<Quad> deletes;
  std::string actor;
  std::optional<Timestamp> timestamp;

  bool empty() const { return inserts.empty() && deletes.empty(); }
};

class MalformedDelta : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class TransactionRejected : public std::runtime_error {
 public:
  explicit TransactionRejected(ValidationReport report);
  const ValidationReport& report() const { return report_; }

 private:
  ValidationReport report_;
};

// Returns a report when the candidate state must not be admitted.
using AdmissionGate = std::function<std::optional<ValidationReport>(
    const Snapshot& base, const TransactionDelta& delta, const Snapshot& candidate)>;
using Clock = std::function<Timestamp()>;
using CommitListener = std::function<void(TxnId, const TransactionDelta&, const Snapshot&)>;

class HistoryLog;

class Store {
 public:
  explicit Store(AdmissionGate gate = {}, Clock clock = {});
  ~Store();
  Store(const Store&) = delete;
  Store& operator=(const Store&) = delete;

  // Atomically applies `delta` if the gate admits the post-state. Deleting an
  // absent quad or inserting a present one is a no-op; a delta with no
  // effective change returns the current head id without recording anything.
  // Throws TransactionRejected or MalformedDelta.
  TxnId apply_transaction(TransactionDelta delta);

  // Like apply_transaction, but the delta is built under the writer lock from
  // the current head and the timestamp the transaction will carry.
  using DeltaBuilder = std::function<TransactionDelta(const Snapshot& head, Timestamp ts)>;
  TxnId transact(const DeltaBuilder& build);

  // Bootstrap path: parses Turtle and applies it ungated into `graph`.
  TxnId load_graph(std::string_view turtle, const std::string& graph,
                   const std::string& base = {});

  // Restore path: re-applies a recorded effective delta verbatim, ungated
  // and without relabeling blank nodes. Timestamp and actor are kept.
  TxnId replay(TransactionDelta delta);

  Snapshot snapshot() const;
  std::vector<Quad> match(const QuadPattern& pattern) const { return snapshot().match(pattern); }
  TxnId head() const { return snapshot().txn(); }

  const HistoryLog& history() const { return *history_; }
  Snapshot state_at(TxnId txn) const;
  Snapshot state_at(Timestamp when) const;

  void add_commit_listener(CommitListener listener);

  // Store-wide counter for minting fresh identifiers.
  std::uint64_t next_sequence() { return ++sequence_; }

 private:
  TxnId commit_locked(TransactionDelta delta, bool gated, bool skolemize_all);
  Timestamp stamp_locked(std::optional<Timestamp> requested);

  AdmissionGate gate_;
  Clock clock_;
  std::mutex write_mu_;
  mutable std::mutex head_mu_;
  Snapshot head_;
  std::unique_ptr<HistoryLog> history_;
  std::vector<CommitListener> listeners_;
  std::optional<Timestamp> last_ts_;
  std::uint64_t skolem_counter_ = 0;
  std::atomic<std::uint64_t> sequence_{0};
};

}  // namespace kapps
