#include "kapps/ogm.hpp"

#include <algorithm>
#include <functional>

#include "kapps/timeutil.hpp"

namespace kapps::ogm {

namespace {

using vocab::kXsd;

Term I(const std::string& s) { return Term::iri(s); }

std::vector<Term> objects(const Snapshot& view, const GraphSelector& sel, const std::string& s,
                          const std::string& p) {
  std::vector<Term> out;
  for (const auto& t : view.match_triples(I(s), I(p), std::nullopt, sel)) out.push_back(t.o);
  return out;
}

std::vector<Term> subjects(const Snapshot& view, const GraphSelector& sel, const std::string& p,
                           const std::string& o) {
  std::vector<Term> out;
  for (const auto& t : view.match_triples(std::nullopt, I(p), I(o), sel)) out.push_back(t.s);
  return out;
}

bool has_triple(const Snapshot& view, const GraphSelector& sel, const std::string& s,
                const std::string& p, const std::string& o) {
  return !view.match_triples(I(s), I(p), I(o), sel).empty();
}

std::optional<std::int64_t> int_value(const Term& t) {
  if (!t.is_literal()) return std::nullopt;
  if (auto v = t.numeric_value()) return static_cast<std::int64_t>(*v);
  // xsd:nonNegativeInteger and friends are not in the value-space set.
  const std::string& lex = t.value();
  if (lex.empty() || lex.size() > 18 ||
      !std::all_of(lex.begin(), lex.end(), [](char c) { return c >= '0' && c <= '9'; }))
    return std::nullopt;
  return std::stoll(lex);
}

bool is_datatype_iri(const std::string& iri) {
  return iri.rfind(kXsd, 0) == 0 || iri == vocab::kRdfs + "Literal" ||
         iri == vocab::rdf::langString;
}

void tighten_max(std::optional<std::int64_t>& slot, std::int64_t v) {
  if (!slot || v < *slot) slot = v;
}

void tighten_min(std::optional<std::int64_t>& slot, std::int64_t v) {
  if (!slot || v > *slot) slot = v;
}

std::string local_name(const std::string& iri) {
  auto cut = iri.find_last_of("#/:");
  return cut == std::string::npos ? iri : iri.substr(cut + 1);
}

std::string describe(const Value& v) {
  if (auto t = std::get_if<Term>(&v)) return t->to_string();
  return "<" + std::get<ObjectRef>(v).iri + ">";
}

Term value_term(const Value& v) {
  if (auto t = std::get_if<Term>(&v)) return *t;
  return I(std::get<ObjectRef>(v).iri);
}

bool same_value(const Value& a, const Value& b) { return value_term(a) == value_term(b); }

}  // namespace

BoundaryViolation::BoundaryViolation(std::string subject, std::string property,
                                     std::string constraint, const std::string& detail)
    : std::invalid_argument("boundary violation on <" + subject + "> " + local_name(property) +
                            " (" + constraint + "): " + detail),
      subject_(std::move(subject)),
      property_(std::move(property)),
      constraint_(std::move(constraint)) {}

const PropertySpec* ClassSchema::find(const std::string& property) const {
  auto it = properties.find(property);
  return it == properties.end() ? nullptr : &it->second;
}

ClassSchema derive_schema(const std::string& class_iri, const Snapshot& view,
                          const std::string& data_graph, const std::string& shapes_graph) {
  GraphSelector sel = GraphSelector::except({I(data_graph), I(shapes_graph)});

  bool known = has_triple(view, sel, class_iri, vocab::rdf::type, vocab::owl::Class) ||
               has_triple(view, sel, class_iri, vocab::rdf::type, vocab::rdfs::Class) ||
               !objects(view, sel, class_iri, vocab::rdfs::subClassOf).empty();
  if (!known) throw UnknownClass("unknown class <" + class_iri + ">");

  ClassSchema schema;
  schema.class_iri = class_iri;
  std::vector<std::string> queue{class_iri};
  std::vector<Term> restrictions;
  while (!queue.empty()) {
    std::string c = queue.back();
    queue.pop_back();
    if (!schema.super_classes.insert(c).second) continue;
    for (const auto& sup : objects(view, sel, c, vocab::rdfs::subClassOf)) {
      if (sup.is_iri()) {
        queue.push_back(sup.value());
      } else if (sup.is_blank()) {
        restrictions.push_back(sup);
      }
    }
  }

  auto spec_for = [&](const std::string& p) -> PropertySpec& {
    auto [it, fresh] = schema.properties.try_emplace(p);
    PropertySpec& spec = it->second;
    if (!fresh) return spec;
    spec.iri = p;
    auto types = objects(view, sel, p, vocab::rdf::type);
    auto ranges = objects(view, sel, p, vocab::rdfs::range);
    bool object_decl = std::count(types.begin(), types.end(), I(vocab::owl::ObjectProperty));
    bool data_decl = std::count(types.begin(), types.end(), I(vocab::owl::DatatypeProperty));
    std::optional<std::string> range;
    for (const auto& r : ranges)
      if (r.is_iri()) range = r.value();
    if (object_decl) {
      spec.kind = PropertySpec::Kind::Object;
    } else if (data_decl) {
      spec.kind = PropertySpec::Kind::Data;
    } else {
      spec.kind = range && !is_datatype_iri(*range) ? PropertySpec::Kind::Object
                                                    : PropertySpec::Kind::Data;
    }
    if (range) {
      if (spec.kind == PropertySpec::Kind::Object) {
        spec.range_class = range;
      } else if (*range != vocab::kRdfs + "Literal") {
        spec.datatype = range;
      }
    }
    if (std::count(types.begin(), types.end(), I(vocab::owl::FunctionalProperty)))
      spec.max_cardinality = 1;
    for (const auto& inv : objects(view, sel, p, vocab::owl::inverseOf))
      if (inv.is_iri()) spec.inverse = inv.value();
    if (!spec.inverse) {
      for (const auto& inv : subjects(view, sel, vocab::owl::inverseOf, p))
        if (inv.is_iri()) spec.inverse = inv.value();
    }
    return spec;
  };

  for (const auto& c : schema.super_classes) {
    for (const auto& p : subjects(view, sel, vocab::rdfs::domain, c))
      if (p.is_iri()) spec_for(p.value());
  }

  for (const auto& r : restrictions) {
    std::optional<std::string> on;
    for (const auto& t : view.match_triples(r, I(vocab::owl::onProperty), std::nullopt, sel))
      if (t.o.is_iri()) on = t.o.value();
    if (!on) continue;
    PropertySpec& spec = spec_for(*on);
    for (const auto& t : view.match_triples(r, std::nullopt, std::nullopt, sel)) {
      const std::string& p = t.p.value();
      auto n = int_value(t.o);
      if (!n) continue;
      if (p == vocab::owl::maxCardinality || p == vocab::owl::maxQualifiedCardinality) {
        tighten_max(spec.max_cardinality, *n);
      } else if (p == vocab::owl::minCardinality || p == vocab::owl::minQualifiedCardinality) {
        tighten_min(spec.min_cardinality, *n);
      } else if (p == vocab::owl::cardinality || p == vocab::owl::qualifiedCardinality) {
        tighten_max(spec.max_cardinality, *n);
        tighten_min(spec.min_cardinality, *n);
      }
    }
  }
  return schema;
}

// GraphObject ---------------------------------------------------------------

GraphObject::GraphObject(std::string iri, std::shared_ptr<const ClassSchema> schema, bool is_new)
    : iri_(std::move(iri)), schema_(std::move(schema)), is_new_(is_new) {}

const std::vector<Value>& GraphObject::values(const std::string& property) const {
  static const std::vector<Value> kEmpty;
  auto it = values_.find(property);
  return it == values_.end() ? kEmpty : it->second;
}

std::optional<Term> GraphObject::literal(const std::string& property) const {
  for (const auto& v : values(property))
    if (auto t = std::get_if<Term>(&v)) return *t;
  return std::nullopt;
}

std::optional<double> GraphObject::number(const std::string& property) const {
  auto t = literal(property);
  if (!t) return std::nullopt;
  auto v = t->numeric_value();
  if (!v) return std::nullopt;
  return static_cast<double>(*v);
}

std::vector<std::string> GraphObject::refs(const std::string& property) const {
  std::vector<std::string> out;
  for (const auto& v : values(property))
    if (auto r = std::get_if<ObjectRef>(&v)) out.push_back(r->iri);
  return out;
}

std::optional<std::string> GraphObject::ref(const std::string& property) const {
  auto all = refs(property);
  if (all.empty()) return std::nullopt;
  return all.front();
}

std::shared_ptr<GraphObject> GraphObject::object(const std::string& property) const {
  for (const auto& v : values(property))
    if (auto r = std::get_if<ObjectRef>(&v)) return r->resolved;
  return nullptr;
}

void GraphObject::validate(const std::string& property, const std::vector<Value>& vals) const {
  if (property == vocab::rdf::type)
    throw BoundaryViolation(iri_, property, "unknownProperty", "rdf:type is managed by the mapper");
  const PropertySpec* spec = schema_->find(property);
  if (!spec)
    throw BoundaryViolation(iri_, property, "unknownProperty",
                            "not a property of <" + schema_->class_iri + ">");
  for (const auto& v : vals) {
    if (spec->kind == PropertySpec::Kind::Data) {
      auto t = std::get_if<Term>(&v);
      if (!t || !t->is_literal())
        throw BoundaryViolation(iri_, property, "kind", "expected a literal, got " + describe(v));
      if (spec->datatype) {
        std::string dt = t->datatype().empty() ? vocab::xsd::string : t->datatype();
        if (dt != *spec->datatype)
          throw BoundaryViolation(iri_, property, "datatype",
                                  describe(v) + " is not of datatype <" + *spec->datatype + ">");
      }
      if (!t->well_formed())
        throw BoundaryViolation(iri_, property, "datatype", describe(v) + " is ill-formed");
    } else {
      auto r = std::get_if<ObjectRef>(&v);
      if (!r) {
        auto t = std::get<Term>(v);
        if (!t.is_iri())
          throw BoundaryViolation(iri_, property, "kind", "expected an object, got " + describe(v));
      } else if (r->iri.empty()) {
        throw BoundaryViolation(iri_, property, "kind", "empty object reference");
      }
    }
  }
  if (spec->max_cardinality && static_cast<std::int64_t>(vals.size()) > *spec->max_cardinality)
    throw BoundaryViolation(iri_, property, "maxCardinality",
                            std::to_string(vals.size()) + " values, at most " +
                                std::to_string(*spec->max_cardinality) + " allowed");
}

void GraphObject::set(const std::string& property, std::vector<Value> vals) {
  // Object values given as bare IRI terms become refs; duplicates collapse.
  std::vector<Value> norm;
  for (auto& v : vals) {
    if (auto t = std::get_if<Term>(&v); t && t->is_iri()) {
      const PropertySpec* spec = schema_->find(property);
      if (spec && spec->kind == PropertySpec::Kind::Object) v = ObjectRef{t->value(), nullptr};
    }
    bool dup = std::any_of(norm.begin(), norm.end(), [&](const Value& n) { return same_value(n, v); });
    if (!dup) norm.push_back(std::move(v));
  }
  validate(property, norm);
  values_[property] = std::move(norm);
  dirty_.insert(property);
}

void GraphObject::set_object(const std::string& property, std::shared_ptr<GraphObject> obj) {
  std::string target = obj->iri();
  set(property, {Value(ObjectRef{target, std::move(obj)})});
}

void GraphObject::add(const std::string& property, Value value) {
  auto next = values(property);
  next.push_back(std::move(value));
  set(property, std::move(next));
}

void GraphObject::remove(const std::string& property, const Value& value) {
  auto next = values(property);
  next.erase(std::remove_if(next.begin(), next.end(),
                            [&](const Value& v) { return same_value(v, value); }),
             next.end());
  set(property, std::move(next));
}

// Ogm -----------------------------------------------------------------------

Ogm::Ogm(Store& store, std::string actor, OgmOptions options)
    : store_(store), actor_(std::move(actor)), options_(std::move(options)) {
  if (!has_scheme(actor_)) throw std::invalid_argument("actor must be an IRI: " + actor_);
}

TxnId Ogm::ontology_version(const Snapshot& view) const {
  TxnId v = 0;
  for (const auto& g : view.graph_names()) {
    if (g.value() == options_.data_graph || g.value() == options_.shapes_graph) continue;
    v = std::max(v, view.graph_version(g));
  }
  return v;
}

std::shared_ptr<const ClassSchema> Ogm::schema_for(const std::string& class_iri,
                                                   const Snapshot& view) {
  auto key = std::make_pair(class_iri, ontology_version(view));
  {
    std::lock_guard lock(cache_mu_);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
  }
  auto schema = std::make_shared<const ClassSchema>(
      derive_schema(class_iri, view, options_.data_graph, options_.shapes_graph));
  std::lock_guard lock(cache_mu_);
  cache_.emplace(key, schema);
  return schema;
}

std::shared_ptr<const ClassSchema> Ogm::schema(const std::string& class_iri) {
  return schema_for(class_iri, store_.snapshot());
}

std::string Ogm::class_for(const std::string& iri, const std::optional<std::string>& range,
                           const Snapshot& view) {
  GraphSelector sel = GraphSelector::except({I(options_.shapes_graph)});
  auto types = objects(view, sel, iri, vocab::rdf::type);
  if (types.empty()) {
    if (!view.mentions(I(iri))) throw UnknownInstance("unknown instance <" + iri + ">");
    throw SchemaViolation("<" + iri + "> has no rdf:type");
  }
  if (range) {
    // Prefer the most specific asserted type that lies under the range.
    std::optional<std::string> best;
    std::size_t best_depth = 0;
    for (const auto& t : types) {
      if (!t.is_iri()) continue;
      std::shared_ptr<const ClassSchema> s;
      try {
        s = schema_for(t.value(), view);
      } catch (const UnknownClass&) {
        continue;
      }
      if (!s->super_classes.count(*range)) continue;
      if (!best || s->super_classes.size() > best_depth) {
        best = t.value();
        best_depth = s->super_classes.size();
      }
    }
    if (!best)
      throw SchemaViolation("<" + iri + "> is not an instance of the range <" + *range + ">");
    return *best;
  }
  for (const auto& t : types) {
    if (!t.is_iri()) continue;
    try {
      schema_for(t.value(), view);
      return t.value();
    } catch (const UnknownClass&) {
    }
  }
  throw SchemaViolation("<" + iri + "> has no type known to the ontology");
}

ObjectPtr Ogm::materialize(const std::string& iri, std::shared_ptr<const ClassSchema> schema,
                           const ScopeSpec& scope, int depth, const Snapshot& view,
                           std::map<std::string, ObjectPtr>& seen) {
  if (auto it = seen.find(iri); it != seen.end()) return it->second;
  auto obj = ObjectPtr(new GraphObject(iri, schema, false));
  seen.emplace(iri, obj);
  GraphSelector sel = GraphSelector::except({I(options_.shapes_graph)});

  for (const auto& [p, spec] : schema->properties) {
    if (scope.include_properties && !scope.include_properties->count(p)) continue;
    std::vector<Term> found = objects(view, sel, iri, p);
    if (found.empty()) continue;
    if (spec.max_cardinality && static_cast<std::int64_t>(found.size()) > *spec.max_cardinality)
      throw SchemaViolation("<" + iri + "> has " + std::to_string(found.size()) + " values for <" +
                            p + ">, at most " + std::to_string(*spec.max_cardinality) + " allowed");
    std::vector<Value> vals;
    for (const auto& o : found) {
      if (spec.kind == PropertySpec::Kind::Data) {
        if (!o.is_literal())
          throw SchemaViolation("<" + iri + "> <" + p + "> expects a literal, found " + o.to_string());
        if (spec.datatype) {
          std::string dt = o.datatype().empty() ? vocab::xsd::string : o.datatype();
          if (dt != *spec.datatype || !o.well_formed())
            throw SchemaViolation("<" + iri + "> <" + p + "> value " + o.to_string() +
                                  " is not a valid <" + *spec.datatype + ">");
        }
        vals.emplace_back(o);
      } else {
        if (!o.is_iri())
          throw SchemaViolation("<" + iri + "> <" + p + "> expects an object, found " + o.to_string());
        ObjectRef ref{o.value(), nullptr};
        if (scope.follow_object_properties && depth < scope.depth) {
          std::string cls = class_for(o.value(), spec.range_class, view);
          ScopeSpec inner = scope;
          inner.include_properties.reset();
          ref.resolved = materialize(o.value(), schema_for(cls, view), inner, depth + 1, view, seen);
        }
        vals.emplace_back(std::move(ref));
      }
    }
    obj->values_[p] = std::move(vals);
  }
  return obj;
}

ObjectPtr Ogm::fetch(const std::string& iri, const std::string& class_iri, const ScopeSpec& scope) {
  return fetch(iri, class_iri, scope, store_.snapshot());
}

ObjectPtr Ogm::fetch(const std::string& iri, const std::string& class_iri, const ScopeSpec& scope,
                     const Snapshot& view) {
  auto schema = schema_for(class_iri, view);
  GraphSelector sel = GraphSelector::except({I(options_.shapes_graph)});
  auto types = objects(view, sel, iri, vocab::rdf::type);
  if (types.empty()) {
    if (!view.mentions(I(iri))) throw UnknownInstance("unknown instance <" + iri + ">");
    throw UnknownInstance("<" + iri + "> is not typed");
  }
  bool ok = false;
  for (const auto& t : types) {
    if (!t.is_iri()) continue;
    if (t.value() == class_iri) {
      ok = true;
      break;
    }
    try {
      if (schema_for(t.value(), view)->super_classes.count(class_iri)) {
        ok = true;
        break;
      }
    } catch (const UnknownClass&) {
    }
  }
  if (!ok) throw UnknownInstance("<" + iri + "> is not an instance of <" + class_iri + ">");
  std::map<std::string, ObjectPtr> seen;
  return materialize(iri, schema, scope, 0, view, seen);
}

ObjectPtr Ogm::expand(ObjectRef& ref, const std::string& class_iri, const ScopeSpec& scope) {
  if (!ref.resolved) ref.resolved = fetch(ref.iri, class_iri, scope);
  return ref.resolved;
}

ObjectPtr Ogm::create(const std::string& class_iri, const std::string& iri) {
  if (!has_scheme(iri)) throw std::invalid_argument("not an absolute IRI: " + iri);
  Snapshot view = store_.snapshot();
  auto schema = schema_for(class_iri, view);
  GraphSelector sel = GraphSelector::except({I(options_.shapes_graph)});
  if (!objects(view, sel, iri, vocab::rdf::type).empty())
    throw std::invalid_argument("<" + iri + "> already denotes a typed individual");
  return ObjectPtr(new GraphObject(iri, schema, true));
}

std::string Ogm::mint_iri(const std::string& ns, const std::string& stem) {
  Snapshot view = store_.snapshot();
  for (;;) {
    std::string iri = ns + stem + "_" + std::to_string(store_.next_sequence());
    if (!view.mentions(I(iri))) return iri;
  }
}

sparql::QueryResult Ogm::query(const std::string& text) const {
  sparql::EvalOptions opts;
  opts.graphs = GraphSelector::except({I(options_.shapes_graph)});
  return sparql::evaluate(sparql::parse_query(text), store_.snapshot(), {}, opts);
}

TxnId Ogm::commit(const ObjectPtr& object) { return commit(std::vector<ObjectPtr>{object}); }

TxnId Ogm::commit(const std::vector<ObjectPtr>& roots) {
  // Collect dirty objects, following resolved refs.
  std::vector<ObjectPtr> dirty;
  std::set<const GraphObject*> visited;
  std::function<void(const ObjectPtr&)> walk = [&](const ObjectPtr& o) {
    if (!o || !visited.insert(o.get()).second) return;
    if (o->dirty()) dirty.push_back(o);
    for (const auto& [p, vals] : o->values_)
      for (const auto& v : vals)
        if (auto r = std::get_if<ObjectRef>(&v)) walk(r->resolved);
  };
  for (const auto& r : roots) walk(r);
  if (dirty.empty()) return store_.head();

  Term g = I(options_.data_graph);
  GraphSelector data_sel = GraphSelector::except({I(options_.shapes_graph)});

  // Minimum cardinalities hold for the committed state, not per assignment.
  {
    Snapshot head = store_.snapshot();
    for (const auto& o : dirty) {
      for (const auto& [p, spec] : o->schema().properties) {
        if (!spec.min_cardinality || *spec.min_cardinality <= 0) continue;
        std::size_t n = o->dirty_.count(p) || o->is_new()
                            ? o->values(p).size()
                            : objects(head, data_sel, o->iri(), p).size();
        if (static_cast<std::int64_t>(n) < *spec.min_cardinality)
          throw BoundaryViolation(o->iri(), p, "minCardinality",
                                  std::to_string(n) + " values, at least " +
                                      std::to_string(*spec.min_cardinality) + " required");
      }
    }
  }

  TxnId id = store_.transact([&](const Snapshot& head, Timestamp ts) {
    std::set<Quad> ins, del;
    auto insert = [&](const Quad& q) {
      del.erase(q);
      ins.insert(q);
    };
    auto erase = [&](const Quad& q) {
      ins.erase(q);
      del.insert(q);
    };
    struct InverseOp {
      bool add;
      Quad q;
    };
    std::vector<InverseOp> inverse_ops;

    for (const auto& o : dirty) {
      Term s = I(o->iri());
      if (o->is_new()) insert({s, I(vocab::rdf::type), I(o->class_iri()), g});
      for (const auto& p : o->dirty_) {
        Term pt = I(p);
        const PropertySpec* spec = o->schema().find(p);
        std::set<Term> old_vals, new_vals;
        for (const auto& q : head.match({s, pt, std::nullopt, g})) old_vals.insert(q.o);
        for (const auto& v : o->values(p)) new_vals.insert(value_term(v));
        for (const auto& t : old_vals)
          if (!new_vals.count(t)) erase({s, pt, t, g});
        for (const auto& t : new_vals)
          if (!old_vals.count(t)) insert({s, pt, t, g});
        if (spec && spec->inverse) {
          Term inv = I(*spec->inverse);
          for (const auto& t : old_vals)
            if (!new_vals.count(t) && t.is_iri()) inverse_ops.push_back({false, {t, inv, s, g}});
          for (const auto& t : new_vals)
            if (!old_vals.count(t) && t.is_iri()) inverse_ops.push_back({true, {t, inv, s, g}});
        }
      }
    }
    for (const auto& op : inverse_ops) {
      if (op.add) {
        insert(op.q);
      } else {
        erase(op.q);
      }
    }

    // Drop no-op entries so an unchanged object yields no provenance.
    for (auto it = ins.begin(); it != ins.end();) it = head.contains(*it) ? ins.erase(it) : std::next(it);
    for (auto it = del.begin(); it != del.end();) it = head.contains(*it) ? std::next(it) : del.erase(it);

    TransactionDelta delta;
    delta.actor = actor_;
    if (ins.empty() && del.empty()) return delta;

    if (options_.record_provenance) {
      Term act = I("urn:kapps:activity:" + std::to_string(store_.next_sequence()));
      ins.insert({act, I(vocab::rdf::type), I(vocab::prov::Activity), g});
      ins.insert({act, I(vocab::prov::wasAssociatedWith), I(actor_), g});
      ins.insert({act, I(vocab::prov::endedAtTime), Term::date_time(format_timestamp(ts)), g});
      std::set<Term> touched;
      for (const auto& q : ins) touched.insert(q.s);
      for (const auto& q : del) touched.insert(q.s);
      for (const auto& o : dirty) {
        Term s = I(o->iri());
        if (o->is_new()) {
          ins.insert({s, I(vocab::prov::wasGeneratedBy), act, g});
        } else if (touched.count(s)) {
          ins.insert({act, I(vocab::prov::influenced), s, g});
        }
      }
    }
    delta.inserts = std::move(ins);
    delta.deletes = std::move(del);
    return delta;
  });

  for (const auto& o : dirty) {
    o->dirty_.clear();
    o->is_new_ = false;
  }
  return id;
}

}  // namespace kapps::ogm
