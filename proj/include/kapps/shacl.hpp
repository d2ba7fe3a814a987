#pragma once
// SHACL core subset (targetClass, single-predicate property shapes with
// maxCount/minCount/datatype/class/nodeKind) plus SHACL-SPARQL constraints.
// The admission gate built here is what the store consults on every commit.

#include <cstdint>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "kapps/sparql.hpp"
#include "kapps/store.hpp"
#include "kapps/turtle.hpp"
#include "kapps/validation_report.hpp"
#include "kapps/vocab.hpp"

namespace kapps::shacl {

struct PropertyConstraint {
  Term node;  // the property shape (blank or IRI)
  Term path;
  std::optional<std::int64_t> max_count;
  std::optional<std::int64_t> min_count;
  std::optional<std::string> datatype;
  std::optional<std::string> class_iri;
  std::optional<std::string> node_kind;
  std::string message;  // empty when the shape gives none
  std::string severity;
  std::vector<std::pair<Term, Term>> description;
};

struct SparqlConstraint {
  Term node;
  std::string select;
  std::shared_ptr<const sparql::Query> query;
  std::string message;
  std::string severity;
};

struct Shape {
  Term id;
  std::vector<Term> target_classes;
  std::vector<PropertyConstraint> properties;
  std::vector<SparqlConstraint> sparql;
  std::string severity;
};

struct ShapeSet {
  std::vector<Shape> shapes;
  bool empty() const { return shapes.empty(); }
  bool has_sparql() const;
};

// Thrown for shapes the engine cannot evaluate faithfully.
class ShapesError : public std::runtime_error {
 public:
  ShapesError(const std::string& component, const Term& shape, const std::string& detail = {});
  const std::string& component() const { return component_; }
  const Term& shape() const { return shape_; }

 private:
  std::string component_;
  Term shape_;
};

ShapeSet load_shapes(const Snapshot& view, const std::string& shapes_graph = vocab::kShapesGraph);
// Convenience for tools: parses Turtle into a throwaway snapshot first.
ShapeSet parse_shapes(std::string_view turtle);

struct Scope {
  bool full = true;
  std::set<Term> nodes;  // focus nodes to check when !full

  static Scope all() { return {}; }
  static Scope focus(std::set<Term> n) { return {false, std::move(n)}; }
};

// Data graph is every graph except the shapes graph.
ValidationReport validate(const Snapshot& candidate, const ShapeSet& shapes,
                          const Scope& scope = Scope::all(),
                          const std::string& shapes_graph = vocab::kShapesGraph);

// Focus nodes that may change verdict under `delta`: touched subjects and
// objects plus their one-hop inbound neighbours in either state. Returns
// nullopt when only a full run is safe (subclass axioms or shapes touched).
std::optional<std::set<Term>> affected_nodes(const Snapshot& base, const TransactionDelta& delta,
                                             const Snapshot& candidate,
                                             const std::string& shapes_graph = vocab::kShapesGraph);

struct GateOptions {
  std::string shapes_graph = vocab::kShapesGraph;
  bool focus_scope = false;
};

// Shapes are re-read whenever the shapes graph version changes.
AdmissionGate make_admission_gate(GateOptions options = {});

struct ReportOptions {
  bool rdf4j_compat = false;  // adds the rdf4j vendor triples
};

std::string serialize_report(const ValidationReport& report, const ReportOptions& options = {});

}  // namespace kapps::shacl
