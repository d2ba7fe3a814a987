#include <gtest/gtest.h>

#include <atomic>
#include <thread>

#include "kapps/history.hpp"
#include "kapps/store.hpp"
#include "kapps/vocab.hpp"
#include "random_rdf.hpp"

using namespace kapps;

namespace {

Term ex(const std::string& l) { return Term::iri(oracle::ex(l)); }
const Term kG = Term::iri(vocab::kDefaultGraph);

Quad q(const std::string& s, const std::string& p, const Term& o) { return {ex(s), ex(p), o, kG}; }

TransactionDelta ins(std::set<Quad> quads, std::string actor = "urn:test") {
  TransactionDelta d;
  d.inserts = std::move(quads);
  d.actor = std::move(actor);
  return d;
}

}  // namespace

TEST(Store, EmptyStore) {
  Store store;
  EXPECT_EQ(store.head(), 0u);
  EXPECT_EQ(store.snapshot().size(), 0u);
  EXPECT_TRUE(store.match({}).empty());
}

TEST(Store, InsertAndMatchByEveryPosition) {
  Store store;
  TxnId t = store.apply_transaction(ins({q("m1", "has", ex("b1")), q("m2", "has", ex("b2")),
                                         q("b1", "weight", Term::integer(2))}));
  EXPECT_EQ(t, 1u);
  EXPECT_EQ(store.match({ex("m1"), {}, {}, {}}).size(), 1u);
  EXPECT_EQ(store.match({{}, ex("has"), {}, {}}).size(), 2u);
  EXPECT_EQ(store.match({{}, {}, ex("b2"), {}}).size(), 1u);
  EXPECT_EQ(store.match({{}, {}, Term::integer(2), kG}).size(), 1u);
  EXPECT_TRUE(store.match({{}, {}, {}, Term::iri("urn:other")}).empty());
}

TEST(Store, NoOpDeltaReturnsHeadWithoutHistory) {
  Store store;
  store.apply_transaction(ins({q("a", "p", ex("b"))}));
  TransactionDelta d = ins({q("a", "p", ex("b"))});
  d.deletes.insert(q("x", "p", ex("y")));
  EXPECT_EQ(store.apply_transaction(d), 1u);
  EXPECT_EQ(store.history().size(), 1u);
}

TEST(Store, MalformedDeltaRejected) {
  Store store;
  TransactionDelta d = ins({q("a", "p", ex("b"))});
  d.deletes.insert(q("a", "p", ex("b")));
  EXPECT_THROW(store.apply_transaction(d), MalformedDelta);
  EXPECT_THROW(store.apply_transaction(ins({{Term::integer(1), ex("p"), ex("b"), kG}})), InvalidTerm);
  EXPECT_EQ(store.head(), 0u);
}

TEST(Store, GateRejectionLeavesStateUntouched) {
  AdmissionGate gate = [](const Snapshot&, const TransactionDelta&, const Snapshot& cand)
      -> std::optional<ValidationReport> {
    if (cand.size() > 2) {
      ValidationReport r;
      r.conforms = false;
      return r;
    }
    return std::nullopt;
  };
  Store store(gate);
  store.apply_transaction(ins({q("a", "p", ex("b")), q("a", "p", ex("c"))}));
  Snapshot before = store.snapshot();
  EXPECT_THROW(store.apply_transaction(ins({q("a", "p", ex("d"))})), TransactionRejected);
  EXPECT_EQ(store.snapshot(), before);
  EXPECT_EQ(store.head(), 1u);
  EXPECT_EQ(store.history().size(), 1u);
}

TEST(Store, SnapshotsAreIsolatedFromLaterCommits) {
  Store store;
  store.apply_transaction(ins({q("a", "p", ex("b"))}));
  Snapshot s1 = store.snapshot();
  TransactionDelta d;
  d.deletes.insert(q("a", "p", ex("b")));
  store.apply_transaction(d);
  EXPECT_TRUE(s1.contains(q("a", "p", ex("b"))));
  EXPECT_FALSE(store.snapshot().contains(q("a", "p", ex("b"))));
}

TEST(Store, IndexesAgreeWithLinearScan) {
  oracle::Rng rng(11);
  for (int round = 0; round < 30; ++round) {
    Store store;
    store.apply_transaction(ins(oracle::random_graph(rng, 150)));
    Snapshot snap = store.snapshot();
    auto all = snap.quads();
    for (int k = 0; k < 40; ++k) {
      const Quad& probe = all.empty() ? Quad{} : all[rng() % all.size()];
      QuadPattern pat;
      if (rng() % 2) pat.s = probe.s;
      if (rng() % 2) pat.p = probe.p;
      if (rng() % 2) pat.o = probe.o;
      if (rng() % 3 == 0) pat.g = probe.g;
      if (all.empty()) pat = {};
      auto a = snap.match(pat), b = snap.scan(pat);
      std::sort(a.begin(), a.end());
      std::sort(b.begin(), b.end());
      EXPECT_EQ(a, b);
    }
  }
}

TEST(Store, BlankNodesAreScopedPerDelta) {
  Store store;
  Quad a{Term::blank("x"), ex("p"), Term::integer(1), kG};
  store.apply_transaction(ins({a}));
  store.apply_transaction(ins({{Term::blank("x"), ex("p"), Term::integer(2), kG}}));
  // The second delta's _:x is fresh because no stored node is named "x".
  auto rows = store.match({{}, ex("p"), {}, {}});
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_NE(rows[0].s, rows[1].s);
  // A stored label can be referenced again.
  Term stored = rows[0].s;
  store.apply_transaction(ins({{stored, ex("q"), Term::integer(3), kG}}));
  EXPECT_EQ(store.match({stored, {}, {}, {}}).size(), 2u);
}

TEST(Store, TimestampsStrictlyIncrease) {
  Timestamp fixed = *parse_timestamp("2026-01-01T00:00:00Z");
  Store store({}, [&] { return fixed; });
  for (int i = 0; i < 5; ++i) store.apply_transaction(ins({q("a", "p", Term::integer(i))}));
  auto entries = store.history().entries();
  for (std::size_t i = 1; i < entries.size(); ++i) EXPECT_LT(entries[i - 1].timestamp, entries[i].timestamp);
}

TEST(Store, TransactBuildsFromHeadWithKnownTimestamp) {
  Store store;
  store.apply_transaction(ins({q("c", "n", Term::integer(0))}));
  Timestamp seen{};
  store.transact([&](const Snapshot& head, Timestamp ts) {
    seen = ts;
    auto cur = head.match({ex("c"), ex("n"), {}, {}});
    TransactionDelta d;
    d.deletes.insert(cur.front());
    d.inserts.insert(q("c", "n", Term::integer(1)));
    d.inserts.insert(q("c", "at", Term::date_time(format_timestamp(ts))));
    return d;
  });
  EXPECT_EQ(store.history().entry(2).timestamp, seen);
  EXPECT_EQ(store.match({ex("c"), ex("n"), {}, {}}).front().o, Term::integer(1));
}

TEST(Store, LoadGraphBypassesGateAndSkolemizes) {
  int calls = 0;
  AdmissionGate gate = [&](const Snapshot&, const TransactionDelta&, const Snapshot&)
      -> std::optional<ValidationReport> {
    ++calls;
    return std::nullopt;
  };
  Store store(gate);
  store.load_graph("<http://e/s> <http://e/p> [ <http://e/q> 1 ] .", vocab::kOntologyGraph);
  EXPECT_EQ(calls, 0);
  EXPECT_EQ(store.snapshot().size(), 2u);
  EXPECT_EQ(store.history().entry(1).actor, "urn:kapps:actor:bootstrap");
}

TEST(Store, ConcurrentWritersAndReaders) {
  Store store;
  std::atomic<bool> stop{false};
  std::thread reader([&] {
    while (!stop) {
      Snapshot s = store.snapshot();
      // Every snapshot is internally consistent: size equals its quad list.
      ASSERT_EQ(s.size(), s.quads().size());
    }
  });
  std::vector<std::thread> writers;
  for (int w = 0; w < 4; ++w) {
    writers.emplace_back([&, w] {
      for (int i = 0; i < 50; ++i)
        store.apply_transaction(ins({q("w" + std::to_string(w), "i", Term::integer(i))}));
    });
  }
  for (auto& t : writers) t.join();
  stop = true;
  reader.join();
  EXPECT_EQ(store.snapshot().size(), 200u);
  EXPECT_EQ(store.head(), 200u);
}
