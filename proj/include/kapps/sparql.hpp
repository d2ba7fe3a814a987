#pragma once
// Read-only SPARQL subset: SELECT / ASK over basic graph patterns with
// FILTER, nested groups, and nested SELECT with COUNT and GROUP BY.

#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "kapps/store.hpp"
#include "kapps/term.hpp"
#include "kapps/turtle.hpp"

namespace kapps::sparql {

struct Variable {
  std::string name;  // without the ?/$ sigil; ?this and $this are the same variable
  bool operator==(const Variable&) const = default;
};

using VarOrTerm = std::variant<Term, Variable>;

struct TriplePattern {
  VarOrTerm s, p, o;
};

struct Expression;
using ExprPtr = std::shared_ptr<const Expression>;

struct Expression {
  enum class Op { Or, And, Not, Eq, Ne, Lt, Le, Gt, Ge, Var, Const, Bound };
  Op op = Op::Const;
  std::vector<ExprPtr> args;
  std::string var;
  Term constant;
};

struct Query;
struct GroupPattern;

using PatternElement = std::variant<TriplePattern, std::shared_ptr<const Query>,
                                    std::shared_ptr<const GroupPattern>>;

struct GroupPattern {
  std::vector<PatternElement> elements;
  std::vector<ExprPtr> filters;  // scoped to the whole group
};

struct Projection {
  std::string var;  // output variable
  bool is_count = false;
  bool count_distinct = false;
  std::optional<std::string> count_var;  // nullopt means COUNT(*)
};

struct Query {
  enum class Form { Select, Ask };
  Form form = Form::Select;
  bool distinct = false;
  bool select_all = false;
  std::vector<Projection> projection;
  GroupPattern where;
  std::vector<std::string> group_by;
  PrefixMap prefixes;

  bool is_aggregate() const;
  std::vector<std::string> result_variables() const;
};

// Ordered map variable -> term; unbound variables are absent.
using BindingSet = std::map<std::string, Term>;

struct QueryResult {
  bool is_ask = false;
  bool ask = false;
  std::vector<std::string> variables;
  std::vector<BindingSet> rows;
};

class SparqlSyntaxError : public std::runtime_error {
 public:
  SparqlSyntaxError(const std::string& what, std::size_t position);
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

class UnsupportedFeature : public SparqlSyntaxError {
 public:
  UnsupportedFeature(const std::string& construct, std::size_t position);
  const std::string& construct() const { return construct_; }

 private:
  std::string construct_;
};

class SparqlTypeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// `predeclared` prefixes are visible without PREFIX lines (SHACL-SPARQL
// constraints get theirs from sh:prefixes).
Query parse_query(std::string_view text, const PrefixMap& predeclared = {});

struct EvalOptions {
  GraphSelector graphs;
  // A grouped sub-select whose GROUP BY keys are all pre-bound yields one row
  // with empty aggregates (COUNT = 0) instead of no row.
  bool zero_fill_prebound_groups = false;
};

QueryResult evaluate(const Query& query, const Snapshot& view, const BindingSet& initial = {},
                     const EvalOptions& options = {});

// Header line of ?vars, then one tab-separated row per solution.
std::string format_tsv(const QueryResult& result);

}  // namespace kapps::sparql
