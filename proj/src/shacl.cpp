#include "kapps/shacl.hpp"

#include <algorithm>
#include <cstdio>
#include <deque>
#include <map>
#include <mutex>

#include "kapps/vocab.hpp"

namespace kapps {

bool ValidationReport::has_violations() const {
  return std::any_of(results.begin(), results.end(), [](const ValidationResult& r) {
    return r.severity == vocab::sh::Violation;
  });
}

void ValidationReport::finalize() {
  std::sort(results.begin(), results.end());
  results.erase(std::unique(results.begin(), results.end()), results.end());
  conforms = results.empty();
}

}  // namespace kapps

namespace kapps::shacl {

namespace sh = vocab::sh;

ShapesError::ShapesError(const std::string& component, const Term& shape,
                         const std::string& detail)
    : std::runtime_error("unsupported SHACL component " + component + " on shape " +
                         shape.to_string() + (detail.empty() ? "" : ": " + detail)),
      component_(component),
      shape_(shape) {}

bool ShapeSet::has_sparql() const {
  return std::any_of(shapes.begin(), shapes.end(),
                     [](const Shape& s) { return !s.sparql.empty(); });
}

namespace {

class ShapesReader {
 public:
  ShapesReader(const Snapshot& view, const std::string& graph)
      : view_(view), graphs_(GraphSelector::only({Term::iri(graph)})) {}

  std::vector<Term> objects(const Term& s, const std::string& p) const {
    std::vector<Term> out;
    for (const auto& t : view_.match_triples(s, Term::iri(p), std::nullopt, graphs_))
      out.push_back(t.o);
    return out;
  }

  std::optional<Term> single(const Term& s, const std::string& p, const Term& shape) const {
    auto v = objects(s, p);
    if (v.empty()) return std::nullopt;
    if (v.size() > 1) throw ShapesError(p, shape, "multiple values");
    return v.front();
  }

  std::vector<Triple> about(const Term& s) const {
    return view_.match_triples(s, std::nullopt, std::nullopt, graphs_);
  }

  std::vector<Term> subjects(const std::string& p, const std::optional<Term>& o) const {
    std::set<Term> out;
    for (const auto& t : view_.match_triples(std::nullopt, Term::iri(p), o, graphs_))
      out.insert(t.s);
    return {out.begin(), out.end()};
  }

 private:
  const Snapshot& view_;
  GraphSelector graphs_;
};

bool is_sh(const Term& p) { return p.value().rfind(vocab::kSh, 0) == 0; }

void check_supported(const ShapesReader& r, const Term& node, const Term& shape,
                     const std::set<std::string>& allowed) {
  for (const auto& t : r.about(node)) {
    if (t.p.value() == vocab::rdf::type) {
      if (is_sh(t.o) && t.o.value() != sh::NodeShape && t.o.value() != sh::PropertyShape &&
          t.o.value() != sh::SPARQLConstraintComponent)
        throw ShapesError(t.o.value(), shape);
      continue;
    }
    if (is_sh(t.p) && !allowed.count(t.p.value())) throw ShapesError(t.p.value(), shape);
  }
}

std::int64_t count_param(const Term& v, const std::string& p, const Term& shape) {
  if (!v.is_literal() || v.datatype() != vocab::xsd::integer || !v.well_formed())
    throw ShapesError(p, shape, "expects an xsd:integer");
  auto n = std::stoll(v.value());
  if (n < 0) throw ShapesError(p, shape, "negative count");
  return n;
}

std::string iri_param(const Term& v, const std::string& p, const Term& shape) {
  if (!v.is_iri()) throw ShapesError(p, shape, "expects an IRI");
  return v.value();
}

bool is_true(const std::optional<Term>& t) {
  return t && t->boolean_value().value_or(false);
}

std::string severity_of(const ShapesReader& r, const Term& node, const Term& shape,
                        const std::string& fallback) {
  auto s = r.single(node, sh::severity, shape);
  if (!s) return fallback;
  return iri_param(*s, sh::severity, shape);
}

std::string message_of(const ShapesReader& r, const Term& node) {
  auto m = r.objects(node, sh::message);
  if (m.empty()) return {};
  std::sort(m.begin(), m.end());
  return m.front().value();
}

PrefixMap declared_prefixes(const ShapesReader& r, const Term& constraint, const Term& shape) {
  PrefixMap out;
  for (const auto& holder : r.objects(constraint, sh::prefixes)) {
    check_supported(r, holder, shape, {sh::declare});
    for (const auto& decl : r.objects(holder, sh::declare)) {
      check_supported(r, decl, shape, {sh::prefix, sh::namespace_});
      auto prefix = r.single(decl, sh::prefix, shape);
      auto ns = r.single(decl, sh::namespace_, shape);
      if (!prefix || !ns || !prefix->is_literal() || !ns->is_literal())
        throw ShapesError(sh::declare, shape, "needs literal sh:prefix and sh:namespace");
      out[prefix->value()] = ns->value();
    }
  }
  return out;
}

PropertyConstraint read_property(const ShapesReader& r, const Term& node, const Term& shape,
                                 const std::string& shape_severity) {
  check_supported(r, node, shape,
                  {sh::path, sh::maxCount, sh::minCount, sh::datatype, sh::class_, sh::nodeKind,
                   sh::message, sh::severity, sh::name, sh::description});
  PropertyConstraint pc;
  pc.node = node;
  auto paths = r.objects(node, sh::path);
  if (paths.size() != 1) throw ShapesError(sh::path, shape, "property shape needs exactly one sh:path");
  if (!paths.front().is_iri()) throw ShapesError(sh::path, shape, "only predicate paths are supported");
  pc.path = paths.front();
  if (auto v = r.single(node, sh::maxCount, shape)) pc.max_count = count_param(*v, sh::maxCount, shape);
  if (auto v = r.single(node, sh::minCount, shape)) pc.min_count = count_param(*v, sh::minCount, shape);
  if (auto v = r.single(node, sh::datatype, shape)) pc.datatype = iri_param(*v, sh::datatype, shape);
  if (auto v = r.single(node, sh::class_, shape)) pc.class_iri = iri_param(*v, sh::class_, shape);
  if (auto v = r.single(node, sh::nodeKind, shape)) {
    static const std::set<std::string> kinds = {sh::IRI,           sh::BlankNode,
                                                sh::Literal,       sh::BlankNodeOrIRI,
                                                sh::BlankNodeOrLiteral, sh::IRIOrLiteral};
    pc.node_kind = iri_param(*v, sh::nodeKind, shape);
    if (!kinds.count(*pc.node_kind)) throw ShapesError(sh::nodeKind, shape, "unknown node kind");
  }
  pc.message = message_of(r, node);
  pc.severity = severity_of(r, node, shape, shape_severity);
  if (node.is_blank()) {
    pc.description.emplace_back(Term::iri(vocab::rdf::type), Term::iri(sh::PropertyShape));
    for (const auto& t : r.about(node))
      if (is_sh(t.p)) pc.description.emplace_back(t.p, t.o);
  }
  return pc;
}

SparqlConstraint read_sparql(const ShapesReader& r, const Term& node, const Term& shape,
                             const std::string& shape_severity) {
  check_supported(r, node, shape, {sh::select, sh::message, sh::prefixes, sh::severity});
  SparqlConstraint sc;
  sc.node = node;
  auto select = r.single(node, sh::select, shape);
  if (!select || !select->is_literal())
    throw ShapesError(sh::sparql, shape, "sh:sparql needs one sh:select string");
  sc.select = select->value();
  // Standard vocabularies are always available; sh:declare may add more.
  PrefixMap prefixes = {{"rdf", vocab::kRdf}, {"rdfs", vocab::kRdfs}, {"xsd", vocab::kXsd},
                        {"owl", vocab::kOwl}, {"sh", vocab::kSh}};
  for (auto& [k, v] : declared_prefixes(r, node, shape)) prefixes[k] = v;
  try {
    sc.query = std::make_shared<const sparql::Query>(sparql::parse_query(sc.select, prefixes));
  } catch (const sparql::SparqlSyntaxError& e) {
    throw ShapesError(sh::select, shape, e.what());
  }
  if (sc.query->form != sparql::Query::Form::Select) throw ShapesError(sh::select, shape, "not a SELECT");
  auto vars = sc.query->result_variables();
  if (std::find(vars.begin(), vars.end(), "this") == vars.end())
    throw ShapesError(sh::select, shape, "query must project $this");
  sc.message = message_of(r, node);
  sc.severity = severity_of(r, node, shape, shape_severity);
  return sc;
}

class DataView {
 public:
  DataView(const Snapshot& snap, const std::string& shapes_graph)
      : snap_(snap), graphs_(GraphSelector::except({Term::iri(shapes_graph)})) {}

  const GraphSelector& graphs() const { return graphs_; }

  std::vector<Term> values(const Term& s, const Term& p) const {
    std::vector<Term> out;
    for (const auto& t : snap_.match_triples(s, p, std::nullopt, graphs_)) out.push_back(t.o);
    return out;
  }

  // C and everything declared (transitively) rdfs:subClassOf C.
  const std::set<Term>& subclasses(const Term& c) const {
    auto it = sub_cache_.find(c);
    if (it != sub_cache_.end()) return it->second;
    std::set<Term> seen{c};
    std::deque<Term> todo{c};
    const Term sub = Term::iri(vocab::rdfs::subClassOf);
    while (!todo.empty()) {
      Term cur = todo.front();
      todo.pop_front();
      for (const auto& t : snap_.match_triples(std::nullopt, sub, cur, graphs_))
        if (seen.insert(t.s).second) todo.push_back(t.s);
    }
    return sub_cache_.emplace(c, std::move(seen)).first->second;
  }

  std::set<Term> instances(const Term& c) const {
    std::set<Term> out;
    const Term type = Term::iri(vocab::rdf::type);
    for (const auto& k : subclasses(c))
      for (const auto& t : snap_.match_triples(std::nullopt, type, k, graphs_)) out.insert(t.s);
    return out;
  }

  bool instance_of(const Term& node, const Term& c) const {
    const auto& classes = subclasses(c);
    for (const auto& t : values(node, Term::iri(vocab::rdf::type)))
      if (classes.count(t)) return true;
    return false;
  }

 private:
  const Snapshot& snap_;
  GraphSelector graphs_;
  mutable std::map<Term, std::set<Term>> sub_cache_;
};

bool datatype_ok(const Term& v, const std::string& dt) {
  return v.is_literal() && v.datatype() == dt && v.well_formed();
}

bool node_kind_ok(const Term& v, const std::string& kind) {
  bool iri = v.is_iri(), blank = v.is_blank(), lit = v.is_literal();
  if (kind == sh::IRI) return iri;
  if (kind == sh::BlankNode) return blank;
  if (kind == sh::Literal) return lit;
  if (kind == sh::BlankNodeOrIRI) return blank || iri;
  if (kind == sh::BlankNodeOrLiteral) return blank || lit;
  return iri || lit;
}

std::string local_name(const std::string& iri) {
  auto cut = iri.find_last_of("#/");
  return cut == std::string::npos ? iri : iri.substr(cut + 1);
}

ValidationResult make_result(const Term& focus, const PropertyConstraint& pc,
                             const std::string& component, std::optional<Term> value,
                             const std::string& fallback_message) {
  ValidationResult r;
  r.focus_node = focus;
  r.result_path = pc.path;
  r.value = std::move(value);
  r.source_constraint_component = component;
  r.severity = pc.severity;
  r.message = pc.message.empty() ? fallback_message : pc.message;
  r.source_shape = pc.node;
  r.shape_description = pc.description;
  return r;
}

void check_property(const DataView& data, const Term& focus, const PropertyConstraint& pc,
                    std::vector<ValidationResult>& out) {
  auto vals = data.values(focus, pc.path);
  const std::string path = local_name(pc.path.value());
  auto n = static_cast<std::int64_t>(vals.size());
  if (pc.max_count && n > *pc.max_count)
    out.push_back(make_result(focus, pc, sh::MaxCountConstraintComponent, std::nullopt,
                              "More than " + std::to_string(*pc.max_count) + " values for " + path));
  if (pc.min_count && n < *pc.min_count)
    out.push_back(make_result(focus, pc, sh::MinCountConstraintComponent, std::nullopt,
                              "Fewer than " + std::to_string(*pc.min_count) + " values for " + path));
  for (const auto& v : vals) {
    if (pc.datatype && !datatype_ok(v, *pc.datatype))
      out.push_back(make_result(focus, pc, sh::DatatypeConstraintComponent, v,
                                "Value of " + path + " is not a valid " + local_name(*pc.datatype)));
    if (pc.class_iri && (v.is_literal() || !data.instance_of(v, Term::iri(*pc.class_iri))))
      out.push_back(make_result(focus, pc, sh::ClassConstraintComponent, v,
                                "Value of " + path + " is not an instance of " + local_name(*pc.class_iri)));
    if (pc.node_kind && !node_kind_ok(v, *pc.node_kind))
      out.push_back(make_result(focus, pc, sh::NodeKindConstraintComponent, v,
                                "Value of " + path + " is not of kind " + local_name(*pc.node_kind)));
  }
}

void check_sparql(const Snapshot& candidate, const DataView& data, const Shape& shape,
                  const Term& focus, const SparqlConstraint& sc,
                  std::vector<ValidationResult>& out) {
  sparql::EvalOptions opts;
  opts.graphs = data.graphs();
  opts.zero_fill_prebound_groups = true;
  auto base = [&] {
    ValidationResult r;
    r.focus_node = focus;
    r.source_constraint_component = sh::SPARQLConstraintComponent;
    r.severity = sc.severity;
    r.source_shape = shape.id;
    r.message = sc.message.empty() ? "SPARQL constraint produced a solution" : sc.message;
    return r;
  };
  try {
    auto res = sparql::evaluate(*sc.query, candidate, {{"this", focus}}, opts);
    for (const auto& row : res.rows) {
      ValidationResult r = base();
      if (auto it = row.find("path"); it != row.end() && it->second.is_iri()) r.result_path = it->second;
      if (auto it = row.find("value"); it != row.end()) r.value = it->second;
      out.push_back(std::move(r));
    }
  } catch (const sparql::SparqlTypeError& e) {
    ValidationResult r = base();
    r.message = std::string("SPARQL constraint could not be evaluated: ") + e.what();
    out.push_back(std::move(r));
  }
}

}  // namespace

ShapeSet load_shapes(const Snapshot& view, const std::string& shapes_graph) {
  ShapesReader r(view, shapes_graph);
  std::set<Term> roots;
  for (const auto& s : r.subjects(vocab::rdf::type, Term::iri(sh::NodeShape))) roots.insert(s);
  for (const auto& s : r.subjects(sh::targetClass, std::nullopt)) roots.insert(s);
  std::set<Term> referenced;
  for (const auto& p : {sh::property, sh::sparql})
    for (const auto& s : r.subjects(p, std::nullopt))
      for (const auto& o : r.objects(s, p)) referenced.insert(o);

  ShapeSet set;
  for (const auto& id : roots) {
    if (referenced.count(id)) continue;  // nested, handled by its parent
    check_supported(r, id, id,
                    {sh::targetClass, sh::property, sh::sparql, sh::severity, sh::message,
                     sh::name, sh::description, sh::deactivated});
    if (is_true(r.single(id, sh::deactivated, id))) continue;
    Shape shape;
    shape.id = id;
    shape.severity = severity_of(r, id, id, sh::Violation);
    for (const auto& c : r.objects(id, sh::targetClass))
      shape.target_classes.push_back(Term::iri(iri_param(c, sh::targetClass, id)));
    for (const auto& p : r.objects(id, sh::property))
      shape.properties.push_back(read_property(r, p, id, shape.severity));
    for (const auto& s : r.objects(id, sh::sparql))
      shape.sparql.push_back(read_sparql(r, s, id, shape.severity));
    set.shapes.push_back(std::move(shape));
  }
  // A shape that only constrains but has no target would silently never fire.
  for (const auto& s : set.shapes)
    if (s.target_classes.empty() && (!s.properties.empty() || !s.sparql.empty()))
      throw ShapesError(sh::targetClass, s.id, "shape has constraints but no supported target");
  return set;
}

ShapeSet parse_shapes(std::string_view turtle) {
  auto doc = parse_turtle(turtle);
  std::set<Quad> quads;
  const Term g = Term::iri(vocab::kShapesGraph);
  for (const auto& t : doc.triples) quads.insert({t.s, t.p, t.o, g});
  return load_shapes(Snapshot::from_quads(quads, 0));
}

ValidationReport validate(const Snapshot& candidate, const ShapeSet& shapes, const Scope& scope,
                          const std::string& shapes_graph) {
  DataView data(candidate, shapes_graph);
  ValidationReport report;
  for (const auto& shape : shapes.shapes) {
    std::set<Term> targets;
    for (const auto& c : shape.target_classes) {
      auto inst = data.instances(c);
      targets.insert(inst.begin(), inst.end());
    }
    for (const auto& focus : targets) {
      if (scope.full || scope.nodes.count(focus))
        for (const auto& pc : shape.properties) check_property(data, focus, pc, report.results);
      // SPARQL constraints may read arbitrary nodes, so every target is re-checked.
      for (const auto& sc : shape.sparql) check_sparql(candidate, data, shape, focus, sc, report.results);
    }
  }
  report.finalize();
  return report;
}

std::optional<std::set<Term>> affected_nodes(const Snapshot& base, const TransactionDelta& delta,
                                             const Snapshot& candidate,
                                             const std::string& shapes_graph) {
  const Term sg = Term::iri(shapes_graph);
  const Term sub = Term::iri(vocab::rdfs::subClassOf);
  std::set<Term> touched;
  for (const auto* quads : {&delta.inserts, &delta.deletes}) {
    for (const auto& q : *quads) {
      if (q.g == sg || q.p == sub) return std::nullopt;
      touched.insert(q.s);
      if (!q.o.is_literal()) touched.insert(q.o);
    }
  }
  std::set<Term> out = touched;
  auto data = GraphSelector::except({sg});
  for (const auto& n : touched) {
    for (const Snapshot* snap : {&base, &candidate})
      for (const auto& t : snap->match_triples(std::nullopt, std::nullopt, n, data)) out.insert(t.s);
  }
  return out;
}

AdmissionGate make_admission_gate(GateOptions options) {
  struct Cache {
    std::mutex mu;
    std::optional<TxnId> version;
    ShapeSet shapes;
  };
  auto cache = std::make_shared<Cache>();
  return [cache, options](const Snapshot& base, const TransactionDelta& delta,
                          const Snapshot& candidate) -> std::optional<ValidationReport> {
    const Term sg = Term::iri(options.shapes_graph);
    bool shapes_touched = std::any_of(delta.inserts.begin(), delta.inserts.end(),
                                      [&](const Quad& q) { return q.g == sg; }) ||
                          std::any_of(delta.deletes.begin(), delta.deletes.end(),
                                      [&](const Quad& q) { return q.g == sg; });
    ShapeSet shapes;
    if (shapes_touched) {
      shapes = load_shapes(candidate, options.shapes_graph);
    } else {
      std::lock_guard lock(cache->mu);
      TxnId v = candidate.graph_version(sg);
      if (cache->version != v) {
        cache->shapes = load_shapes(candidate, options.shapes_graph);
        cache->version = v;
      }
      shapes = cache->shapes;
    }
    if (shapes.empty()) return std::nullopt;
    Scope scope = Scope::all();
    if (options.focus_scope) {
      if (auto nodes = affected_nodes(base, delta, candidate, options.shapes_graph))
        scope = Scope::focus(std::move(*nodes));
    }
    ValidationReport report = validate(candidate, shapes, scope, options.shapes_graph);
    if (report.has_violations()) return report;
    return std::nullopt;
  };
}

std::string serialize_report(const ValidationReport& report, const ReportOptions& options) {
  const std::string rdf4j = vocab::kRdf4j;
  std::vector<Triple> triples;
  auto iri = [](const std::string& s) { return Term::iri(s); };
  const Term type = iri(vocab::rdf::type);
  const Term root = Term::blank("r0");
  triples.push_back({root, type, iri(sh::ValidationReport)});
  triples.push_back({root, iri(sh::conforms), Term::boolean(report.conforms)});
  if (options.rdf4j_compat) triples.push_back({root, iri(rdf4j + "truncated"), Term::boolean(false)});

  std::map<Term, Term> shape_nodes;
  char buf[16];
  for (std::size_t i = 0; i < report.results.size(); ++i) {
    const auto& r = report.results[i];
    std::snprintf(buf, sizeof buf, "r%06zu", i + 1);
    const Term node = Term::blank(buf);
    triples.push_back({root, iri(sh::result), node});
    triples.push_back({node, type, iri(sh::ValidationResult)});
    triples.push_back({node, iri(sh::focusNode), r.focus_node});
    if (r.result_path) triples.push_back({node, iri(sh::resultPath), *r.result_path});
    if (r.value) triples.push_back({node, iri(sh::value), *r.value});
    triples.push_back({node, iri(sh::sourceConstraintComponent), iri(r.source_constraint_component)});
    triples.push_back({node, iri(sh::resultSeverity), iri(r.severity)});
    triples.push_back({node, iri(sh::resultMessage), Term::string(r.message)});
    if (options.rdf4j_compat)
      triples.push_back({node, iri(vocab::kRdf4jSh + "shapesGraph"), iri(rdf4j + "SHACLShapeGraph")});
    Term shape = r.source_shape;
    if (shape.is_blank()) {
      auto it = shape_nodes.find(shape);
      if (it == shape_nodes.end()) {
        std::snprintf(buf, sizeof buf, "s%06zu", shape_nodes.size() + 1);
        it = shape_nodes.emplace(shape, Term::blank(buf)).first;
        for (const auto& [p, o] : r.shape_description) triples.push_back({it->second, p, o});
      }
      shape = it->second;
    }
    triples.push_back({node, iri(sh::sourceShape), shape});
  }
  PrefixMap prefixes = {{"sh", vocab::kSh},   {"rdf", vocab::kRdf}, {"xsd", vocab::kXsd},
                        {"fc", vocab::kFc},   {"fci", vocab::kFci}, {"uc", vocab::kUc},
                        {"ex", vocab::kEx},   {"cfc", vocab::kCfc}};
  if (options.rdf4j_compat) {
    prefixes["rdf4j"] = vocab::kRdf4j;
    prefixes["rdf4j-sh"] = vocab::kRdf4jSh;
  }
  return serialize_turtle(triples, prefixes);
}

}  // namespace kapps::shacl
