#pragma once
// Object-graph mapper. Class schemas are derived from the ontology graphs at
// runtime; objects validate single-entity constraints on assignment and are
// written back through Ogm::commit, the only mutating path into the store.

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "kapps/sparql.hpp"
#include "kapps/store.hpp"
#include "kapps/term.hpp"
#include "kapps/vocab.hpp"

namespace kapps::ogm {

struct PropertySpec {
  enum class Kind { Object, Data };
  std::string iri;
  Kind kind = Kind::Data;
  std::optional<std::string> range_class;  // object properties
  std::optional<std::string> datatype;     // data properties
  std::optional<std::int64_t> max_cardinality;
  std::optional<std::int64_t> min_cardinality;
  std::optional<std::string> inverse;
};

struct ClassSchema {
  std::string class_iri;
  std::set<std::string> super_classes;  // transitive, includes class_iri
  std::map<std::string, PropertySpec> properties;

  const PropertySpec* find(const std::string& property) const;
};

class UnknownClass : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class UnknownInstance : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Stored data contradicts the ontology (e.g. a literal where an object is
// declared). Raised on fetch, never silently coerced.
class SchemaViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Single-entity constraint broken on assignment or at commit, before any
// delta reaches the store.
class BoundaryViolation : public std::invalid_argument {
 public:
  BoundaryViolation(std::string subject, std::string property, std::string constraint,
                    const std::string& detail);
  const std::string& subject() const { return subject_; }
  const std::string& property() const { return property_; }
  // "datatype", "maxCardinality", "minCardinality", "kind", "unknownProperty"
  const std::string& constraint() const { return constraint_; }

 private:
  std::string subject_, property_, constraint_;
};

// Ontology graphs are every graph except the data and shapes graphs.
ClassSchema derive_schema(const std::string& class_iri, const Snapshot& view,
                          const std::string& data_graph = vocab::kDefaultGraph,
                          const std::string& shapes_graph = vocab::kShapesGraph);

class GraphObject;

struct ObjectRef {
  std::string iri;
  std::shared_ptr<GraphObject> resolved;

  bool operator==(const ObjectRef& o) const { return iri == o.iri; }
};

using Value = std::variant<Term, ObjectRef>;

struct ScopeSpec {
  int depth = 0;
  std::optional<std::set<std::string>> include_properties;
  bool follow_object_properties = true;
};

class GraphObject {
 public:
  const std::string& iri() const { return iri_; }
  const std::string& class_iri() const { return schema_->class_iri; }
  const ClassSchema& schema() const { return *schema_; }
  bool is_new() const { return is_new_; }
  bool dirty() const { return is_new_ || !dirty_.empty(); }
  const std::set<std::string>& dirty_properties() const { return dirty_; }

  const std::vector<Value>& values(const std::string& property) const;
  bool has(const std::string& property) const { return !values(property).empty(); }
  // First literal value, if any.
  std::optional<Term> literal(const std::string& property) const;
  std::optional<double> number(const std::string& property) const;
  // IRIs of all object values.
  std::vector<std::string> refs(const std::string& property) const;
  std::optional<std::string> ref(const std::string& property) const;
  // Resolved object behind the first ref (nullptr when not expanded).
  std::shared_ptr<GraphObject> object(const std::string& property) const;

  // Replace all values; validates datatype, kind and maximum cardinality.
  void set(const std::string& property, std::vector<Value> values);
  void set_literal(const std::string& property, Term value) { set(property, {Value(std::move(value))}); }
  void set_ref(const std::string& property, const std::string& iri) {
    set(property, {Value(ObjectRef{iri, nullptr})});
  }
  void set_object(const std::string& property, std::shared_ptr<GraphObject> obj);
  void add(const std::string& property, Value value);
  void remove(const std::string& property, const Value& value);
  void clear(const std::string& property) { set(property, {}); }

 private:
  friend class Ogm;
  GraphObject(std::string iri, std::shared_ptr<const ClassSchema> schema, bool is_new);
  void validate(const std::string& property, const std::vector<Value>& values) const;

  std::string iri_;
  std::shared_ptr<const ClassSchema> schema_;
  bool is_new_;
  std::map<std::string, std::vector<Value>> values_;
  std::set<std::string> dirty_;
};

using ObjectPtr = std::shared_ptr<GraphObject>;

struct OgmOptions {
  std::string data_graph = vocab::kDefaultGraph;
  std::string shapes_graph = vocab::kShapesGraph;
  bool record_provenance = true;
};

class Ogm {
 public:
  Ogm(Store& store, std::string actor, OgmOptions options = {});

  const std::string& actor() const { return actor_; }

  // Cached per (class, ontology version).
  std::shared_ptr<const ClassSchema> schema(const std::string& class_iri);

  ObjectPtr fetch(const std::string& iri, const std::string& class_iri, const ScopeSpec& scope = {});
  // Reads from an explicit snapshot, e.g. a historical state.
  ObjectPtr fetch(const std::string& iri, const std::string& class_iri, const ScopeSpec& scope,
                  const Snapshot& view);
  ObjectPtr expand(ObjectRef& ref, const std::string& class_iri, const ScopeSpec& scope = {});

  // Stages a new typed individual; nothing is written until commit.
  ObjectPtr create(const std::string& class_iri, const std::string& iri);

  // One transaction for all dirty objects (and dirty objects reachable
  // through resolved refs). Returns the head id unchanged when nothing is
  // dirty. Throws BoundaryViolation or TransactionRejected; on rejection the
  // objects keep their pending changes.
  TxnId commit(const ObjectPtr& object);
  TxnId commit(const std::vector<ObjectPtr>& objects);

  // Read-only access used by services for discovery and inspection.
  Snapshot snapshot() const { return store_.snapshot(); }
  sparql::QueryResult query(const std::string& text) const;
  Snapshot state_at(TxnId txn) const { return store_.state_at(txn); }
  Snapshot state_at(Timestamp when) const { return store_.state_at(when); }

  // Fresh IRI `<ns><stem>_<n>` that is unused in the store.
  std::string mint_iri(const std::string& ns, const std::string& stem);

  const OgmOptions& options() const { return options_; }

 private:
  TxnId ontology_version(const Snapshot& view) const;
  ObjectPtr materialize(const std::string& iri, std::shared_ptr<const ClassSchema> schema,
                        const ScopeSpec& scope, int depth, const Snapshot& view,
                        std::map<std::string, ObjectPtr>& seen);
  std::shared_ptr<const ClassSchema> schema_for(const std::string& class_iri, const Snapshot& view);
  std::string class_for(const std::string& iri, const std::optional<std::string>& range,
                        const Snapshot& view);

  Store& store_;
  std::string actor_;
  OgmOptions options_;
  std::mutex cache_mu_;
  std::map<std::pair<std::string, TxnId>, std::shared_ptr<const ClassSchema>> cache_;
};

}  // namespace kapps::ogm
