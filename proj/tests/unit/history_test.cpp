#include <gtest/gtest.h>

#include "kapps/history.hpp"
#include "kapps/store.hpp"
#include "kapps/store_dump.hpp"
#include "kapps/vocab.hpp"
#include "random_rdf.hpp"

using namespace kapps;

namespace {

const Term kG = Term::iri(vocab::kDefaultGraph);
Term ex(const std::string& l) { return Term::iri(oracle::ex(l)); }

struct ReplayRun {
  std::vector<std::set<Quad>> states;  // forward replay: states[k] after txn k
};

// Drives random deltas into the store while replaying them forward on a
// plain std::set as the oracle.
ReplayRun random_run(Store& store, oracle::Rng& rng, int txns) {
  ReplayRun run;
  std::set<Quad> cur;
  run.states.push_back(cur);
  while (static_cast<int>(run.states.size()) <= txns) {
    TransactionDelta d;
    d.actor = "urn:test";
    for (int i = 0, n = 1 + rng() % 4; i < n; ++i) {
      Quad q{ex("n" + std::to_string(rng() % 6)), ex("p" + std::to_string(rng() % 2)),
             Term::integer(static_cast<std::int64_t>(rng() % 4)), kG};
      if (d.inserts.count(q) || d.deletes.count(q)) continue;
      if (cur.count(q) && rng() % 2) {
        d.deletes.insert(q);
      } else {
        d.inserts.insert(q);
      }
    }
    std::set<Quad> next = cur;
    for (const auto& q : d.deletes) next.erase(q);
    for (const auto& q : d.inserts) next.insert(q);
    if (next == cur) continue;
    store.apply_transaction(d);
    cur = next;
    run.states.push_back(cur);
  }
  return run;
}

}  // namespace

TEST(History, StateAtMatchesForwardReplay) {
  oracle::Rng rng(3);
  Store store;
  ReplayRun run = random_run(store, rng, 60);
  ASSERT_EQ(store.head(), 60u);
  for (TxnId k = 0; k <= 60; ++k) {
    auto snap = store.state_at(k);
    auto quads = snap.quads();
    EXPECT_EQ(std::set<Quad>(quads.begin(), quads.end()), run.states[k]) << "txn " << k;
    EXPECT_EQ(snap.txn(), k);
  }
}

TEST(History, EntriesAreDenseAndEffective) {
  Store store;
  TransactionDelta d;
  d.inserts = {{ex("a"), ex("p"), ex("b"), kG}};
  store.apply_transaction(d);
  d.inserts.insert({ex("a"), ex("p"), ex("c"), kG});
  store.apply_transaction(d);
  auto e = store.history().entry(2);
  EXPECT_EQ(e.inserts.size(), 1u);  // the re-inserted quad was not recorded
  EXPECT_THROW(store.history().entry(3), HistoryOutOfRange);
  EXPECT_THROW(store.state_at(TxnId{9}), HistoryOutOfRange);
}

TEST(History, TxnAtTimestamp) {
  Timestamp t0 = *parse_timestamp("2026-01-01T00:00:00Z");
  int tick = 0;
  Store store({}, [&] { return t0 + std::chrono::seconds(10 * ++tick); });
  for (int i = 0; i < 3; ++i) {
    TransactionDelta d;
    d.inserts = {{ex("a"), ex("p"), Term::integer(i), kG}};
    store.apply_transaction(d);
  }
  const auto& h = store.history();
  EXPECT_EQ(h.txn_at(t0), 0u);
  EXPECT_EQ(h.txn_at(t0 + std::chrono::seconds(10)), 1u);
  EXPECT_EQ(h.txn_at(t0 + std::chrono::seconds(25)), 2u);
  EXPECT_EQ(h.txn_at(t0 + std::chrono::hours(1)), 3u);
  EXPECT_EQ(store.state_at(t0 + std::chrono::seconds(25)).size(), 2u);
}

TEST(History, DiffRangeCancelsRoundTrips) {
  Store store;
  Quad a{ex("a"), ex("p"), ex("b"), kG}, c{ex("a"), ex("p"), ex("c"), kG};
  TransactionDelta d1;
  d1.inserts = {a};
  store.apply_transaction(d1);
  TransactionDelta d2;
  d2.deletes = {a};
  d2.inserts = {c};
  store.apply_transaction(d2);
  TransactionDelta d3;
  d3.inserts = {a};
  store.apply_transaction(d3);
  auto net = store.history().diff_range(1, 3);
  EXPECT_EQ(net.inserts, std::set<Quad>{c});
  EXPECT_TRUE(net.deletes.empty());
  auto full = store.history().diff_range(0, 3);
  EXPECT_EQ(full.inserts, (std::set<Quad>{a, c}));
}

TEST(StoreDump, RestorePreservesEveryPastState) {
  oracle::Rng rng(8);
  Store store;
  store.load_graph("@prefix ex: <http://example.org/> . ex:a ex:b [ ex:c 1 ] .", vocab::kDefaultGraph);
  ReplayRun run = random_run(store, rng, 40);
  Store back;
  restore_store(back, dump_store(store));
  ASSERT_EQ(back.head(), store.head());
  for (TxnId k = 0; k <= store.head(); ++k) EXPECT_EQ(back.state_at(k), store.state_at(k)) << "txn " << k;
  auto a = store.history().entries(), b = back.history().entries();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].timestamp, b[i].timestamp);
    EXPECT_EQ(a[i].actor, b[i].actor);
    EXPECT_EQ(a[i].inserts, b[i].inserts);
  }
  // Fresh blank nodes after a restore do not reuse restored labels.
  std::size_t before = back.snapshot().size();
  back.load_graph("@prefix ex: <http://example.org/> . ex:a ex:b [ ex:c 1 ] .", vocab::kDefaultGraph);
  EXPECT_EQ(back.snapshot().size(), before + 2);
  // Timestamps stay monotone past the restored log.
  EXPECT_GT(back.history().entry(back.head()).timestamp, a.back().timestamp);
}

TEST(StoreDump, RejectsMalformedInput) {
  Store s;
  EXPECT_THROW(restore_store(s, "{}"), DumpFormatError);
  EXPECT_THROW(restore_store(s, "not json"), DumpFormatError);
  EXPECT_THROW(restore_store(s, R"({"format":"kapps-store-dump","transactions":[{"txn":2,"timestamp":"2026-01-01T00:00:00Z","actor":"a","insert":[],"delete":[]}]})"),
               DumpFormatError);
}
