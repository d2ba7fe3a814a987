#include <gtest/gtest.h>

#include "kapps/resources.hpp"
#include "kapps/shacl.hpp"
#include "kapps/store.hpp"
#include "kapps/vocab.hpp"
#include "random_rdf.hpp"

using namespace kapps;
namespace sh = kapps::vocab::sh;

namespace {

Term fc(const std::string& l) { return Term::iri(vocab::kFc + l); }
Term fci(const std::string& l) { return Term::iri(vocab::kFci + l); }
const Term kG = Term::iri(vocab::kDefaultGraph);

const std::string kData = R"(
@prefix fc: <http://w3id.org/circularfactory/FlexConveyor#> .
@prefix fci: <http://w3id.org/circularfactory/FlexConveyorInstances#> .
fci:Module1 a fc:FlexConveyorModule .
fci:Module2 a fc:FlexConveyorModule .
fci:Module3 a fc:FlexConveyorModule ; fc:hasPossession fci:Box1 .
fci:Box1 a fc:Box ; fc:hasState fc:StateInTransit ; fc:isPossessedBy fci:Module3 .
fci:Box2 a fc:Box ; fc:hasState fc:StateInTransit ; fc:isPossessedBy fci:Module2 .
fci:Module2 fc:hasPossession fci:Box2 .
)";

std::unique_ptr<Store> cell(bool gated = true, bool focus = false) {
  auto store = std::make_unique<Store>(gated ? shacl::make_admission_gate({vocab::kShapesGraph, focus})
                                             : AdmissionGate{});
  store->load_graph(resource("ontology/cfc_core.ttl"), vocab::kOntologyGraph);
  store->load_graph(resource("ontology/flexconveyor.ttl"), vocab::kOntologyGraph);
  store->load_graph(resource("shapes/flexconveyor_shapes.ttl"), vocab::kShapesGraph);
  store->load_graph(kData, vocab::kDefaultGraph);
  return store;
}

ValidationReport full(const Snapshot& s) {
  return shacl::validate(s, shacl::load_shapes(s));
}

std::size_t contains(const std::string& hay, const std::string& needle) {
  return hay.find(needle) != std::string::npos;
}

}  // namespace

TEST(ShaclLoad, FixtureShapes) {
  auto store = cell(false);
  auto shapes = shacl::load_shapes(store->snapshot());
  ASSERT_EQ(shapes.shapes.size(), 4u);
  const shacl::Shape* intransit = nullptr;
  const shacl::Shape* module = nullptr;
  for (const auto& s : shapes.shapes) {
    if (s.id == fc("InTransitBoxPossessedShape")) intransit = &s;
    if (s.id == fc("FlexConveyorModuleShape")) module = &s;
  }
  ASSERT_TRUE(intransit && module);
  ASSERT_EQ(intransit->sparql.size(), 1u);
  EXPECT_EQ(intransit->sparql[0].message,
            "A Box in InTransit state must be possessed by exactly one resource.");
  ASSERT_EQ(module->properties.size(), 1u);
  EXPECT_EQ(module->properties[0].path, fc("hasPossession"));
  EXPECT_EQ(module->properties[0].max_count, 1);
}

TEST(ShaclLoad, EmptyShapesGraph) {
  Store store;
  EXPECT_TRUE(shacl::load_shapes(store.snapshot()).empty());
  EXPECT_TRUE(shacl::validate(store.snapshot(), {}).conforms);
}

TEST(ShaclLoad, UnsupportedComponentIsAHardError) {
  const char* ttl = R"(
@prefix sh: <http://www.w3.org/ns/shacl#> .
@prefix ex: <http://example.org/circularfactory/> .
ex:OrShape a sh:NodeShape ; sh:targetClass ex:C ; sh:or ( ex:A ex:B ) .
)";
  EXPECT_ANY_THROW(shacl::parse_shapes(ttl));  // collections are not even parsed
  const char* ttl2 = R"(
@prefix sh: <http://www.w3.org/ns/shacl#> .
@prefix ex: <http://example.org/circularfactory/> .
ex:PatternShape a sh:NodeShape ; sh:targetClass ex:C ;
  sh:property [ sh:path ex:p ; sh:pattern "^a" ] .
)";
  try {
    shacl::parse_shapes(ttl2);
    FAIL();
  } catch (const shacl::ShapesError& e) {
    EXPECT_EQ(e.component(), vocab::kSh + "pattern");
    EXPECT_EQ(e.shape(), Term::iri(vocab::kEx + "PatternShape"));
  }
}

TEST(ShaclValidate, ConformingCell) {
  auto store = cell(false);
  EXPECT_TRUE(full(store->snapshot()).conforms);
}

TEST(ShaclValidate, SecondPossessionViolatesMaxCount) {
  auto store = cell(false);
  TransactionDelta d;
  d.inserts = {{fci("Module3"), fc("hasPossession"), fci("Box2"), kG}};
  d.deletes = {{fci("Module2"), fc("hasPossession"), fci("Box2"), kG},
               {fci("Box2"), fc("isPossessedBy"), fci("Module2"), kG}};
  d.inserts.insert({fci("Box2"), fc("isPossessedBy"), fci("Module3"), kG});
  store->apply_transaction(d);
  auto report = full(store->snapshot());
  ASSERT_EQ(report.results.size(), 1u);
  const auto& r = report.results[0];
  EXPECT_EQ(r.focus_node, fci("Module3"));
  EXPECT_EQ(r.result_path, fc("hasPossession"));
  EXPECT_EQ(r.source_constraint_component, sh::MaxCountConstraintComponent);
  EXPECT_EQ(r.severity, sh::Violation);
  EXPECT_EQ(r.message, "A FlexConveyorModule may possess at most one Box at a time.");

  std::string text = shacl::serialize_report(report);
  for (const char* needle :
       {"rdf:type sh:ValidationReport", "sh:conforms \"false\"^^xsd:boolean",
        "rdf:type sh:ValidationResult", "sh:focusNode fci:Module3", "sh:resultPath fc:hasPossession",
        "sh:sourceConstraintComponent sh:MaxCountConstraintComponent",
        "sh:resultSeverity sh:Violation",
        "sh:resultMessage \"A FlexConveyorModule may possess at most one Box at a time.\"",
        "rdf:type sh:PropertyShape", "sh:path fc:hasPossession", "sh:maxCount \"1\"^^xsd:integer",
        "sh:message \"A FlexConveyorModule may possess at most one Box at a time.\""})
    EXPECT_TRUE(contains(text, needle)) << needle << "\n" << text;
  EXPECT_FALSE(contains(text, "rdf4j"));
  EXPECT_EQ(text, shacl::serialize_report(report));
  std::string compat = shacl::serialize_report(report, {true});
  EXPECT_TRUE(contains(compat, "rdf4j:truncated \"false\"^^xsd:boolean"));
  EXPECT_TRUE(contains(compat, "rdf4j-sh:shapesGraph rdf4j:SHACLShapeGraph"));
}

TEST(ShaclValidate, ConformingReportSerialization) {
  ValidationReport ok;
  std::string text = shacl::serialize_report(ok);
  EXPECT_TRUE(contains(text, "sh:conforms \"true\"^^xsd:boolean"));
  EXPECT_FALSE(contains(text, "sh:result "));
}

TEST(ShaclValidate, InTransitPossessorCounts) {
  // 0, 1, 2 possessors -> violation, conforms, violation.
  for (int possessors = 0; possessors <= 2; ++possessors) {
    auto store = cell(false);
    TransactionDelta d;
    d.deletes = {{fci("Box1"), fc("isPossessedBy"), fci("Module3"), kG},
                 {fci("Module3"), fc("hasPossession"), fci("Box1"), kG}};
    if (possessors >= 1) d.deletes.clear();
    if (possessors == 2) d.inserts = {{fci("Box1"), fc("isPossessedBy"), fci("Module1"), kG}};
    store->apply_transaction(d);
    auto report = full(store->snapshot());
    bool sparql_hit = std::any_of(report.results.begin(), report.results.end(), [](const auto& r) {
      return r.source_shape == fc("InTransitBoxPossessedShape") && r.focus_node == fci("Box1") &&
             r.source_constraint_component == sh::SPARQLConstraintComponent;
    });
    EXPECT_EQ(sparql_hit, possessors != 1) << possessors;
  }
}

TEST(ShaclValidate, DeliveredWhilePossessed) {
  auto store = cell(false);
  TransactionDelta d;
  d.deletes = {{fci("Box1"), fc("hasState"), fc("StateInTransit"), kG}};
  d.inserts = {{fci("Box1"), fc("hasState"), fc("StateDelivered"), kG}};
  store->apply_transaction(d);
  auto report = full(store->snapshot());
  ASSERT_EQ(report.results.size(), 1u);
  EXPECT_EQ(report.results[0].source_constraint_component, sh::SPARQLConstraintComponent);
  EXPECT_EQ(report.results[0].source_shape, fc("DeliveredBoxNotPossessedShape"));
  EXPECT_EQ(report.results[0].message, "A Box in Delivered state must not be possessed by any resource.");
}

TEST(ShaclGate, LegalHandoverPassesIllegalIsRejected) {
  for (bool focus : {false, true}) {
    auto store = cell(true, focus);
    TransactionDelta handover;
    handover.deletes = {{fci("Module3"), fc("hasPossession"), fci("Box1"), kG},
                        {fci("Box1"), fc("isPossessedBy"), fci("Module3"), kG}};
    handover.inserts = {{fci("Module1"), fc("hasPossession"), fci("Box1"), kG},
                        {fci("Box1"), fc("isPossessedBy"), fci("Module1"), kG}};
    EXPECT_NO_THROW(store->apply_transaction(handover));

    Snapshot before = store->snapshot();
    TransactionDelta second;
    second.inserts = {{fci("Module1"), fc("hasPossession"), fci("Box2"), kG}};
    try {
      store->apply_transaction(second);
      FAIL() << "second possession admitted";
    } catch (const TransactionRejected& e) {
      EXPECT_FALSE(e.report().conforms);
      EXPECT_EQ(e.report().results.front().focus_node, fci("Module1"));
    }
    EXPECT_EQ(store->snapshot(), before);
    EXPECT_TRUE(full(store->snapshot()).conforms);
  }
}

TEST(ShaclGate, WarningsDoNotBlock) {
  Store store(shacl::make_admission_gate());
  store.load_graph(R"(
@prefix sh: <http://www.w3.org/ns/shacl#> .
@prefix ex: <http://example.org/circularfactory/> .
ex:Soft a sh:NodeShape ; sh:targetClass ex:C ; sh:severity sh:Warning ;
  sh:property [ sh:path ex:p ; sh:minCount 1 ] .
)", vocab::kShapesGraph);
  TransactionDelta d;
  d.inserts = {{Term::iri(vocab::kEx + "x"), Term::iri(vocab::kRdf + "type"), Term::iri(vocab::kEx + "C"), kG}};
  EXPECT_NO_THROW(store.apply_transaction(d));
  auto report = full(store.snapshot());
  EXPECT_FALSE(report.conforms);
  EXPECT_FALSE(report.has_violations());
}

TEST(ShaclValidate, MatchesNaiveOracle) {
  oracle::Rng rng(99);
  for (int i = 0; i < 100; ++i) {
    auto quads = oracle::random_graph(rng, 200);
    auto shapes = oracle::random_shapes(rng);
    auto expected = oracle::oracle_validate(shapes, quads);
    auto report = shacl::validate(Snapshot::from_quads(quads, 1),
                                  shacl::parse_shapes(oracle::render_shapes(shapes)));
    std::set<oracle::OResult> got;
    for (const auto& r : report.results)
      got.insert({r.focus_node, r.result_path, r.value, r.source_constraint_component, r.source_shape});
    EXPECT_EQ(got, expected) << oracle::render_shapes(shapes);
    EXPECT_EQ(report.conforms, expected.empty());
  }
}

TEST(ShaclValidate, FocusScopeMatchesFullValidation) {
  oracle::Rng rng(5);
  for (int i = 0; i < 60; ++i) {
    auto quads = oracle::random_graph(rng, 120);
    auto shapes = shacl::parse_shapes(oracle::render_shapes(oracle::random_shapes(rng)));
    Snapshot base = Snapshot::from_quads(quads, 1);
    auto delta_src = oracle::random_graph(rng, 12);
    TransactionDelta d;
    std::vector<Quad> existing(quads.begin(), quads.end());
    for (const auto& q : delta_src)
      if (!quads.count(q)) d.inserts.insert(q);
    for (int k = 0; k < 4 && !existing.empty(); ++k) {
      const Quad& q = existing[rng() % existing.size()];
      if (!d.inserts.count(q)) d.deletes.insert(q);
    }
    Snapshot cand = base.with_changes(d.inserts, d.deletes, 2);
    auto nodes = shacl::affected_nodes(base, d, cand);
    auto scoped = nodes ? shacl::validate(cand, shapes, shacl::Scope::focus(*nodes))
                        : shacl::validate(cand, shapes);
    auto whole = shacl::validate(cand, shapes);
    // (a) the scoped run reports exactly the full run's results on affected
    // nodes (SPARQL shapes always run on every target);
    std::vector<ValidationResult> expected;
    for (const auto& r : whole.results)
      if (!nodes || nodes->count(r.focus_node) || r.source_constraint_component == sh::SPARQLConstraintComponent)
        expected.push_back(r);
    EXPECT_EQ(scoped.results, expected);
    // (b) every result the delta introduces lies inside the scope, so the
    // gate verdict on a conforming base is the same either way.
    auto base_report = shacl::validate(base, shapes);
    for (const auto& r : whole.results) {
      if (std::binary_search(base_report.results.begin(), base_report.results.end(), r)) continue;
      EXPECT_TRUE(std::binary_search(scoped.results.begin(), scoped.results.end(), r))
          << r.focus_node.to_string() << " " << r.source_constraint_component;
    }
  }
}
