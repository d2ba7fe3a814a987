#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "kapps/turtle.hpp"
#include "kapps/vocab.hpp"
#include "random_rdf.hpp"

using namespace kapps;

namespace {

const char* kModuleDoc = R"(
@prefix fc: <http://w3id.org/circularfactory/FlexConveyor#> .
@prefix fci: <http://w3id.org/circularfactory/FlexConveyorInstances#> .
@prefix xsd: <http://www.w3.org/2001/XMLSchema#> .

fci:Module1 a fc:FlexConveyorModule ;
    fc:hasPossession fci:Box1 ;
    fc:label "Module \"one\"\n" , 'alt'@en ;
    fc:speed 1.5e0 ; fc:count 3 ; fc:ratio 0.25 ; fc:on true .
fci:Box1 fc:meta [ fc:weight "2"^^xsd:integer ] .
)";

// Blank labels are renamed on parse, so compare up to a consistent renaming
// by serializing both sides.
std::string canon(const std::vector<Triple>& t) { return serialize_turtle(t, standard_prefixes()); }

}  // namespace

TEST(Turtle, ParsesModuleDocument) {
  auto doc = parse_turtle(kModuleDoc);
  EXPECT_EQ(doc.triples.size(), 10u);
  EXPECT_EQ(doc.prefixes.at("fc"), vocab::kFc);
  auto has = [&](const Term& o) {
    return std::any_of(doc.triples.begin(), doc.triples.end(),
                       [&](const Triple& t) { return t.o == o; });
  };
  EXPECT_TRUE(has(Term::string("Module \"one\"\n")));
  EXPECT_TRUE(has(Term::literal("alt", {}, "en")));
  EXPECT_TRUE(has(Term::dbl(1.5)));
  EXPECT_TRUE(has(Term::integer(3)));
  EXPECT_TRUE(has(Term::literal("0.25", vocab::xsd::decimal)));
  EXPECT_TRUE(has(Term::boolean(true)));
  EXPECT_TRUE(has(Term::integer(2)));
}

TEST(Turtle, RoundTripIsStable) {
  auto doc = parse_turtle(kModuleDoc);
  std::string once = serialize_turtle(doc.triples, standard_prefixes());
  auto again = parse_turtle(once);
  EXPECT_EQ(canon(again.triples), once);
  EXPECT_EQ(serialize_turtle(doc.triples, standard_prefixes()), once);
}

TEST(Turtle, RandomGraphRoundTrip) {
  oracle::Rng rng(7);
  for (int i = 0; i < 50; ++i) {
    auto quads = oracle::random_graph(rng, 120);
    std::vector<Triple> triples;
    for (const auto& q : quads) triples.push_back(q.triple());
    std::sort(triples.begin(), triples.end());
    triples.erase(std::unique(triples.begin(), triples.end()), triples.end());
    std::string text = serialize_turtle(triples, standard_prefixes());
    auto back = parse_turtle(text).triples;
    std::sort(back.begin(), back.end());
    EXPECT_EQ(back, triples) << text;
  }
}

TEST(Turtle, ErrorsCarryPosition) {
  try {
    parse_turtle("@prefix ex: <http://e/> .\nex:a ex:b ex:c ;\n  ex:d ( ex:e ) .");
    FAIL() << "collection accepted";
  } catch (const TurtleError& e) {
    EXPECT_EQ(e.line(), 3);
    EXPECT_NE(std::string(e.what()).find("collection"), std::string::npos);
  }
  EXPECT_THROW(parse_turtle("undeclared:a <http://e/p> 1 ."), TurtleError);
  EXPECT_THROW(parse_turtle("<rel> <http://e/p> 1 ."), TurtleError);
  EXPECT_THROW(parse_turtle("<http://e/s> <http://e/p> \"open ."), TurtleError);
}

TEST(Turtle, RelativeIrisResolveAgainstBase) {
  auto doc = parse_turtle("<a> <p> <#b> .", "http://example.org/dir/doc");
  ASSERT_EQ(doc.triples.size(), 1u);
  EXPECT_EQ(doc.triples[0].s.value(), "http://example.org/dir/a");
  EXPECT_EQ(doc.triples[0].o.value(), "http://example.org/dir/doc#b");
}

TEST(Turtle, EmptyDocument) {
  EXPECT_TRUE(parse_turtle("").triples.empty());
  EXPECT_TRUE(parse_turtle("# only a comment\n").triples.empty());
}

TEST(Turtle, SerializerPutsTypeFirstAndUsesTypedForm) {
  std::vector<Triple> t = {
      {Term::iri(vocab::kFci + "Module1"), Term::iri(vocab::kFc + "a"), Term::integer(1)},
      {Term::iri(vocab::kFci + "Module1"), Term::iri(vocab::rdf::type), Term::iri(vocab::kFc + "FlexConveyorModule")},
  };
  std::string out = serialize_turtle(t, standard_prefixes());
  EXPECT_NE(out.find("fci:Module1 rdf:type fc:FlexConveyorModule ;\n    fc:a \"1\"^^xsd:integer ."),
            std::string::npos)
      << out;
}
