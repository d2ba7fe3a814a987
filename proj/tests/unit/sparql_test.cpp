#include <gtest/gtest.h>

#include "kapps/sparql.hpp"
#include "kapps/store.hpp"
#include "kapps/vocab.hpp"
#include "random_rdf.hpp"

using namespace kapps;
using namespace kapps::sparql;

namespace {

Snapshot load(const std::string& ttl) {
  Store store;
  store.load_graph(ttl, vocab::kDefaultGraph);
  return store.snapshot();
}

const char* kCell = R"(
@prefix fc: <http://w3id.org/circularfactory/FlexConveyor#> .
@prefix fci: <http://w3id.org/circularfactory/FlexConveyorInstances#> .
fci:Module1 a fc:FlexConveyorModule ; fc:hasPossession fci:Box1 ; fc:hasGridX 1 .
fci:Module2 a fc:FlexConveyorModule ; fc:hasGridX 2 .
fci:Module3 a fc:FlexConveyorModule ; fc:hasPossession fci:Box2 , fci:Box3 ; fc:hasGridX 3 .
fci:Box1 fc:isPossessedBy fci:Module1 ; fc:hasState fc:StateInTransit .
fci:Box2 fc:isPossessedBy fci:Module3 ; fc:hasState fc:StateInTransit .
fci:Box3 fc:isPossessedBy fci:Module3 .
fci:Box4 fc:hasState fc:StateInTransit .
fc:StateInTransit a fc:InTransit .
)";

const std::string kPrefixes =
    "PREFIX fc: <http://w3id.org/circularfactory/FlexConveyor#>\n"
    "PREFIX fci: <http://w3id.org/circularfactory/FlexConveyorInstances#>\n";

Term fci(const std::string& l) { return Term::iri(vocab::kFci + l); }

}  // namespace

TEST(SparqlParse, RejectsUnsupportedConstructsByName) {
  const char* cases[][2] = {
      {"SELECT ?s WHERE { ?s ?p ?o OPTIONAL { ?s ?p ?x } }", "OPTIONAL"},
      {"SELECT ?s WHERE { { ?s ?p ?o } UNION { ?o ?p ?s } }", "UNION"},
      {"SELECT ?s WHERE { ?s ?p ?o } ORDER BY ?s", "ORDER"},
      {"SELECT ?s WHERE { ?s ?p ?o } LIMIT 3", "LIMIT"},
      {"CONSTRUCT { ?s ?p ?o } WHERE { ?s ?p ?o }", "CONSTRUCT"},
      {"SELECT ?s WHERE { ?s <http://e/p>/<http://e/q> ?o }", "property path"},
      {"SELECT (SUM(?o) AS ?x) WHERE { ?s ?p ?o }", "SUM"},
      {"SELECT ?s WHERE { ?s ?p ?o FILTER (?o + 1 > 2) }", "arithmetic expression"},
      {"SELECT ?s WHERE { ?s ?p _:b }", "blank node in pattern"},
  };
  for (auto& c : cases) {
    try {
      parse_query(c[0]);
      ADD_FAILURE() << "accepted: " << c[0];
    } catch (const UnsupportedFeature& e) {
      EXPECT_EQ(e.construct(), c[1]) << c[0];
    }
  }
}

TEST(SparqlParse, SyntaxErrors) {
  EXPECT_THROW(parse_query("SELECT ?s WHERE { ?s ?p }"), SparqlSyntaxError);
  EXPECT_THROW(parse_query("SELECT ?x WHERE { ?s ?p ?o }"), SparqlSyntaxError);
  EXPECT_THROW(parse_query("SELECT ?s WHERE { ex:a ?p ?s }"), SparqlSyntaxError);
  EXPECT_THROW(parse_query("SELECT ?s ?o (COUNT(?o) AS ?n) WHERE { ?s ?p ?o } GROUP BY ?s"),
               SparqlSyntaxError);
  EXPECT_NO_THROW(parse_query("select distinct ?s where { ?s a <http://e/C> . }"));
}

TEST(SparqlEval, BasicJoinAndProjection) {
  auto snap = load(kCell);
  auto q = parse_query(kPrefixes + "SELECT ?m ?b WHERE { ?m a fc:FlexConveyorModule . ?m fc:hasPossession ?b }");
  auto r = evaluate(q, snap);
  ASSERT_EQ(r.rows.size(), 3u);
  EXPECT_EQ(r.rows[0].at("m"), fci("Module1"));
  EXPECT_EQ(r.rows[2].at("b"), fci("Box3"));
}

TEST(SparqlEval, CountGroupByAndFilter) {
  auto snap = load(kCell);
  auto q = parse_query(kPrefixes +
                       "SELECT ?m (COUNT(?b) AS ?n) WHERE { ?m fc:hasPossession ?b } GROUP BY ?m");
  auto r = evaluate(q, snap);
  ASSERT_EQ(r.rows.size(), 2u);
  EXPECT_EQ(r.rows[1].at("n"), Term::integer(2));
  auto f = parse_query(kPrefixes + "SELECT ?m WHERE { ?m fc:hasGridX ?x FILTER (?x >= 2 && ?x != 3) }");
  auto rf = evaluate(f, snap);
  ASSERT_EQ(rf.rows.size(), 1u);
  EXPECT_EQ(rf.rows[0].at("m"), fci("Module2"));
}

TEST(SparqlEval, CountOverEmptyGroupIsZero) {
  auto snap = load(kCell);
  auto q = parse_query(kPrefixes + "SELECT (COUNT(*) AS ?n) WHERE { ?m fc:nothing ?b }");
  auto r = evaluate(q, snap);
  ASSERT_EQ(r.rows.size(), 1u);
  EXPECT_EQ(r.rows[0].at("n"), Term::integer(0));
}

TEST(SparqlEval, PrebindingRestrictsSolutions) {
  auto snap = load(kCell);
  auto q = parse_query(kPrefixes + "SELECT $this ?b WHERE { $this fc:hasPossession ?b }");
  auto r = evaluate(q, snap, {{"this", fci("Module3")}});
  EXPECT_EQ(r.rows.size(), 2u);
}

// The InTransit query: zero possessors only count as a violation when
// grouped sub-selects emit a zero row for a pre-bound key.
TEST(SparqlEval, InTransitPossessorCountPerFocusNode) {
  auto snap = load(kCell);
  auto q = parse_query(R"(
    SELECT $this WHERE {
      $this fc:hasState ?state .
      ?state rdf:type fc:InTransit .
      { SELECT $this (COUNT(?possessor) AS ?count)
        WHERE { $this fc:isPossessedBy ?possessor . } GROUP BY $this }
      FILTER (?count != 1)
    })",
                       {{"fc", vocab::kFc}, {"rdf", vocab::kRdf}});
  EvalOptions zero;
  zero.zero_fill_prebound_groups = true;
  for (const auto& [box, violates] : std::vector<std::pair<std::string, bool>>{
           {"Box1", false}, {"Box2", false}, {"Box4", true}}) {
    auto r = evaluate(q, snap, {{"this", fci(box)}}, zero);
    EXPECT_EQ(!r.rows.empty(), violates) << box;
  }
  // Without the zero row the possessor-less box slips through.
  EXPECT_TRUE(evaluate(q, snap, {{"this", fci("Box4")}}).rows.empty());
}

TEST(SparqlEval, AskAndTypeErrors) {
  auto snap = load(kCell);
  EXPECT_TRUE(evaluate(parse_query(kPrefixes + "ASK { fci:Box3 fc:isPossessedBy fci:Module3 }"), snap).ask);
  EXPECT_FALSE(evaluate(parse_query(kPrefixes + "ASK { fci:Box3 fc:isPossessedBy fci:Module1 }"), snap).ask);
  auto bad = parse_query(kPrefixes + "SELECT ?m WHERE { ?m fc:hasPossession ?b FILTER (?b < 3) }");
  EXPECT_THROW(evaluate(bad, snap), SparqlTypeError);
  // Unbound variables make the filter false instead of failing.
  auto unbound = parse_query(kPrefixes + "SELECT ?m WHERE { ?m fc:hasGridX ?x FILTER (?y < 3) }");
  EXPECT_TRUE(evaluate(unbound, snap).rows.empty());
}

TEST(SparqlEval, TsvOutput) {
  auto snap = load(kCell);
  auto r = evaluate(parse_query(kPrefixes + "SELECT ?x WHERE { fci:Module2 fc:hasGridX ?x }"), snap);
  EXPECT_EQ(format_tsv(r), "?x\n\"2\"^^<http://www.w3.org/2001/XMLSchema#integer>\n");
}

TEST(SparqlEval, MatchesBruteForceOracle) {
  oracle::Rng rng(20260315);
  int compared = 0, errors = 0, nonempty = 0;
  for (int i = 0; i < 300; ++i) {
    auto quads = oracle::random_graph(rng, 100);
    Snapshot snap = Snapshot::from_quads(quads, 1);
    auto oq = oracle::random_query(rng);
    std::string text = oracle::render_query(oq);
    Query q = parse_query(text);
    bool oracle_failed = false;
    std::vector<oracle::Row> expected;
    bool expected_ask = false;
    try {
      if (oq.ask) {
        expected_ask = oracle::oracle_ask(oq, quads);
      } else {
        expected = oracle::oracle_select(oq, quads);
      }
    } catch (const oracle::OracleTypeError&) {
      oracle_failed = true;
    }
    if (oracle_failed) {
      EXPECT_THROW(evaluate(q, snap), SparqlTypeError) << text;
      ++errors;
      continue;
    }
    auto r = evaluate(q, snap);
    if (oq.ask) {
      EXPECT_EQ(r.ask, expected_ask) << text;
    } else {
      auto rows = r.rows;
      std::sort(rows.begin(), rows.end());
      if (!rows.empty()) ++nonempty;
      EXPECT_EQ(rows, expected) << text;
    }
    ++compared;
  }
  EXPECT_GT(compared, 200);
  EXPECT_GT(nonempty, 100);
  std::printf("compared=%d type-errors=%d nonempty=%d\n", compared, errors, nonempty);
}
