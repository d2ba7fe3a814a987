#pragma once
// Seeded random graphs, queries and shapes for oracle cross-checks. Every
// generated artefact comes with a plain-data description that the oracles
// evaluate directly, so the engines under test never grade themselves.

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "kapps/term.hpp"

namespace kapps::oracle {

using Rng = std::mt19937_64;
using Row = std::map<std::string, Term>;

std::string ex(const std::string& local);

// Graph over ex:n0..n9, predicates ex:p0..p3 (p0/p1 IRIs, p2 integers,
// p3 strings), classes ex:C0..C3 with a small subclass chain in the
// ontology graph.
std::set<Quad> random_graph(Rng& rng, std::size_t max_quads);

// ---- SPARQL -----------------------------------------------------------------

using OTerm = std::variant<std::string, Term>;  // variable name or constant

struct OPattern {
  OTerm s, p, o;
};

struct OExpr {
  enum class Op { Eq, Ne, Lt, Gt, Le, Ge, And, Or, Not, Bound };
  Op op = Op::Eq;
  std::vector<OExpr> args;  // And/Or/Not
  OTerm lhs, rhs;           // comparisons; lhs var for Bound
};

struct OSub {
  std::string key;    // GROUP BY variable
  std::string counted;
  bool distinct = false;
  std::string out;
  std::vector<OPattern> patterns;
};

struct OQuery {
  bool ask = false;
  bool distinct = false;
  bool select_all = false;
  std::vector<std::string> projection;
  std::vector<OPattern> patterns;
  std::vector<OPattern> nested;  // inner { } group, possibly empty
  std::optional<OSub> sub;
  std::optional<OExpr> filter;
  // Top-level aggregate: SELECT [?group] (COUNT(?counted) AS ?cnt)
  bool aggregate = false;
  std::optional<std::string> group;
  std::optional<std::string> counted;  // nullopt = COUNT(*)
};

OQuery random_query(Rng& rng);
std::string render_query(const OQuery& q);

struct OracleTypeError {};

// Solutions restricted to the projection (all variables for SELECT *).
// Throws OracleTypeError when a FILTER compares incomparable terms.
std::vector<Row> oracle_select(const OQuery& q, const std::set<Quad>& quads);
bool oracle_ask(const OQuery& q, const std::set<Quad>& quads);

// ---- SHACL ------------------------------------------------------------------

struct OProperty {
  std::string id;  // IRI of the property shape
  std::string path;
  std::optional<int> max_count, min_count;
  std::optional<std::string> datatype, class_iri, node_kind;
};

struct OSparqlRule {
  enum class Kind { LinkedTyped, CountNotEqual };
  Kind kind = Kind::LinkedTyped;
  std::string predicate;
  std::string cls;  // LinkedTyped: object must not be typed with this class
  int expected = 1; // CountNotEqual: violation when count != expected
};

struct OShape {
  std::string id;
  std::string target;
  std::vector<OProperty> properties;
  std::vector<OSparqlRule> rules;
};

std::vector<OShape> random_shapes(Rng& rng);
std::string render_shapes(const std::vector<OShape>& shapes);

struct OResult {
  Term focus;
  std::optional<Term> path;
  std::optional<Term> value;
  std::string component;
  Term shape;
  auto operator<=>(const OResult&) const = default;
};

std::set<OResult> oracle_validate(const std::vector<OShape>& shapes,
                                  const std::set<Quad>& quads);

}  // namespace kapps::oracle
