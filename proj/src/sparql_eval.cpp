#include <algorithm>
#include <set>
#include <sstream>

#include "kapps/sparql.hpp"
#include "kapps/timeutil.hpp"
#include "kapps/vocab.hpp"

namespace kapps::sparql {

namespace {

using Solutions = std::vector<BindingSet>;

bool compatible(const BindingSet& a, const BindingSet& b) {
  const BindingSet& small = a.size() <= b.size() ? a : b;
  const BindingSet& large = a.size() <= b.size() ? b : a;
  for (const auto& [k, v] : small) {
    auto it = large.find(k);
    if (it != large.end() && it->second != v) return false;
  }
  return true;
}

BindingSet merge(BindingSet a, const BindingSet& b) {
  for (const auto& kv : b) a.insert(kv);
  return a;
}

bool is_plain_string(const Term& t) {
  return t.is_literal() && t.lang().empty() &&
         (t.datatype().empty() || t.datatype() == vocab::xsd::string);
}

// Unbound variables and errors both surface as nullopt.
using Value = std::optional<Term>;

Term bool_term(bool b) { return Term::boolean(b); }

std::optional<bool> ebv(const Value& v) {
  if (!v) return std::nullopt;
  const Term& t = *v;
  if (!t.is_literal())
    throw SparqlTypeError("effective boolean value undefined for " + t.to_string());
  if (auto b = t.boolean_value()) return *b;
  if (t.datatype() == vocab::xsd::boolean) return false;  // ill-formed boolean
  if (t.is_numeric()) {
    auto n = t.numeric_value();
    return n && *n != 0;
  }
  if (is_plain_string(t) || !t.lang().empty()) return !t.value().empty();
  throw SparqlTypeError("effective boolean value undefined for " + t.to_string());
}

int ordering(const Term& a, const Term& b) {
  if (a.is_literal() && b.is_literal()) {
    if (a.is_numeric() && b.is_numeric()) {
      auto x = a.numeric_value(), y = b.numeric_value();
      if (x && y) return *x < *y ? -1 : (*x > *y ? 1 : 0);
    }
    if (is_plain_string(a) && is_plain_string(b)) return a.value().compare(b.value()) < 0 ? -1 : (a.value() == b.value() ? 0 : 1);
    if (a.datatype() == vocab::xsd::boolean && b.datatype() == vocab::xsd::boolean) {
      auto x = a.boolean_value(), y = b.boolean_value();
      if (x && y) return int(*x) - int(*y);
    }
    if (a.datatype() == vocab::xsd::dateTime && b.datatype() == vocab::xsd::dateTime) {
      auto x = parse_timestamp(a.value()), y = parse_timestamp(b.value());
      if (x && y) return *x < *y ? -1 : (*x > *y ? 1 : 0);
    }
  }
  throw SparqlTypeError("cannot order " + a.to_string() + " and " + b.to_string());
}

bool equal_terms(const Term& a, const Term& b) {
  if (a.is_numeric() && b.is_numeric()) {
    auto x = a.numeric_value(), y = b.numeric_value();
    if (x && y) return *x == *y;
  }
  return a == b;
}

Value eval_expr(const Expression& e, const BindingSet& mu) {
  using Op = Expression::Op;
  switch (e.op) {
    case Op::Const: return e.constant;
    case Op::Var: {
      auto it = mu.find(e.var);
      if (it == mu.end()) return std::nullopt;
      return it->second;
    }
    case Op::Bound: return bool_term(mu.count(e.var) > 0);
    case Op::Not: {
      auto b = ebv(eval_expr(*e.args[0], mu));
      if (!b) return std::nullopt;
      return bool_term(!*b);
    }
    case Op::And:
    case Op::Or: {
      std::optional<bool> l, r;
      l = ebv(eval_expr(*e.args[0], mu));
      r = ebv(eval_expr(*e.args[1], mu));
      if (e.op == Op::And) {
        if ((l && !*l) || (r && !*r)) return bool_term(false);
        if (l && r) return bool_term(true);
      } else {
        if ((l && *l) || (r && *r)) return bool_term(true);
        if (l && r) return bool_term(false);
      }
      return std::nullopt;
    }
    default: break;
  }
  Value l = eval_expr(*e.args[0], mu);
  Value r = eval_expr(*e.args[1], mu);
  if (!l || !r) return std::nullopt;
  switch (e.op) {
    case Op::Eq: return bool_term(equal_terms(*l, *r));
    case Op::Ne: return bool_term(!equal_terms(*l, *r));
    case Op::Lt: return bool_term(ordering(*l, *r) < 0);
    case Op::Le: return bool_term(ordering(*l, *r) <= 0);
    case Op::Gt: return bool_term(ordering(*l, *r) > 0);
    case Op::Ge: return bool_term(ordering(*l, *r) >= 0);
    default: return std::nullopt;
  }
}

class Evaluator {
 public:
  Evaluator(const Snapshot& view, const EvalOptions& opts) : view_(view), opts_(opts) {}

  Solutions run_query(const Query& q, const BindingSet& initial) {
    Solutions sols = eval_group(q.where, {initial}, initial);
    if (q.form == Query::Form::Ask) return sols;
    auto vars = q.result_variables();
    Solutions out;
    if (q.is_aggregate()) {
      out = aggregate(q, sols, initial);
    } else {
      for (const auto& s : sols) out.push_back(project(s, vars));
    }
    if (q.distinct) {
      std::set<BindingSet> seen;
      Solutions d;
      for (auto& s : out)
        if (seen.insert(s).second) d.push_back(std::move(s));
      out = std::move(d);
    }
    return out;
  }

 private:
  static BindingSet project(const BindingSet& s, const std::vector<std::string>& vars) {
    BindingSet r;
    for (const auto& v : vars) {
      auto it = s.find(v);
      if (it != s.end()) r.insert(*it);
    }
    return r;
  }

  Solutions aggregate(const Query& q, const Solutions& sols, const BindingSet& initial) {
    std::map<std::vector<std::optional<Term>>, Solutions> groups;
    for (const auto& s : sols) {
      std::vector<std::optional<Term>> key;
      for (const auto& g : q.group_by) {
        auto it = s.find(g);
        key.push_back(it == s.end() ? std::nullopt : std::optional<Term>(it->second));
      }
      groups[key].push_back(s);
    }
    if (groups.empty()) {
      bool all_prebound = std::all_of(q.group_by.begin(), q.group_by.end(),
                                      [&](const std::string& g) { return initial.count(g) > 0; });
      if (q.group_by.empty()) {
        groups[{}];
      } else if (opts_.zero_fill_prebound_groups && all_prebound) {
        std::vector<std::optional<Term>> key;
        for (const auto& g : q.group_by) key.push_back(initial.at(g));
        groups[key];
      }
    }
    Solutions out;
    for (const auto& [key, rows] : groups) {
      BindingSet r;
      for (std::size_t i = 0; i < q.group_by.size(); ++i)
        if (key[i]) r[q.group_by[i]] = *key[i];
      BindingSet out_row;
      for (const auto& p : q.projection) {
        if (!p.is_count) {
          auto it = r.find(p.var);
          if (it != r.end()) out_row[p.var] = it->second;
          continue;
        }
        std::int64_t n = 0;
        if (p.count_var) {
          std::set<Term> distinct;
          for (const auto& row : rows) {
            auto it = row.find(*p.count_var);
            if (it == row.end()) continue;
            if (p.count_distinct) {
              distinct.insert(it->second);
            } else {
              ++n;
            }
          }
          if (p.count_distinct) n = static_cast<std::int64_t>(distinct.size());
        } else if (p.count_distinct) {
          n = static_cast<std::int64_t>(std::set<BindingSet>(rows.begin(), rows.end()).size());
        } else {
          n = static_cast<std::int64_t>(rows.size());
        }
        out_row[p.var] = Term::integer(n);
      }
      out.push_back(std::move(out_row));
    }
    return out;
  }

  Solutions eval_group(const GroupPattern& g, Solutions current, const BindingSet& initial) {
    for (const auto& el : g.elements) {
      if (current.empty()) break;
      if (auto tp = std::get_if<TriplePattern>(&el)) {
        current = extend(*tp, current);
      } else if (auto sq = std::get_if<std::shared_ptr<const Query>>(&el)) {
        current = join_subquery(**sq, current);
      } else {
        const auto& sub = *std::get<std::shared_ptr<const GroupPattern>>(el);
        Solutions inner = eval_group(sub, {initial}, initial);
        Solutions joined;
        for (const auto& a : current)
          for (const auto& b : inner)
            if (compatible(a, b)) joined.push_back(merge(a, b));
        current = std::move(joined);
      }
    }
    if (g.filters.empty()) return current;
    Solutions kept;
    for (auto& s : current) {
      bool ok = true;
      for (const auto& f : g.filters) {
        auto b = ebv(eval_expr(*f, s));
        if (!b || !*b) {
          ok = false;
          break;
        }
      }
      if (ok) kept.push_back(std::move(s));
    }
    return kept;
  }

  static std::optional<Term> resolve(const VarOrTerm& x, const BindingSet& mu) {
    if (auto t = std::get_if<Term>(&x)) return *t;
    auto it = mu.find(std::get<Variable>(x).name);
    if (it == mu.end()) return std::nullopt;
    return it->second;
  }

  Solutions extend(const TriplePattern& tp, const Solutions& current) {
    Solutions out;
    for (const auto& mu : current) {
      auto s = resolve(tp.s, mu), p = resolve(tp.p, mu), o = resolve(tp.o, mu);
      if ((s && s->is_literal()) || (p && !p->is_iri())) continue;
      for (const auto& t : view_.match_triples(s, p, o, opts_.graphs)) {
        BindingSet next = mu;
        bool ok = true;
        auto bind = [&](const VarOrTerm& x, const Term& v) {
          auto var = std::get_if<Variable>(&x);
          if (!var) return;
          auto [it, inserted] = next.emplace(var->name, v);
          if (!inserted && it->second != v) ok = false;  // repeated variable in one pattern
        };
        bind(tp.s, t.s);
        bind(tp.p, t.p);
        bind(tp.o, t.o);
        if (ok) out.push_back(std::move(next));
      }
    }
    return out;
  }

  Solutions join_subquery(const Query& sub, const Solutions& current) {
    auto vars = sub.result_variables();
    std::map<BindingSet, Solutions> cache;
    Solutions out;
    for (const auto& mu : current) {
      BindingSet restricted = project(mu, vars);
      auto it = cache.find(restricted);
      if (it == cache.end()) it = cache.emplace(restricted, run_query(sub, restricted)).first;
      for (const auto& r : it->second)
        if (compatible(mu, r)) out.push_back(merge(mu, r));
    }
    return out;
  }

  const Snapshot& view_;
  const EvalOptions& opts_;
};

}  // namespace

QueryResult evaluate(const Query& query, const Snapshot& view, const BindingSet& initial,
                     const EvalOptions& options) {
  Evaluator ev(view, options);
  Solutions sols = ev.run_query(query, initial);
  QueryResult r;
  if (query.form == Query::Form::Ask) {
    r.is_ask = true;
    r.ask = !sols.empty();
    return r;
  }
  r.variables = query.result_variables();
  auto key = [&](const BindingSet& b) {
    std::vector<std::optional<Term>> k;
    for (const auto& v : r.variables) {
      auto it = b.find(v);
      k.push_back(it == b.end() ? std::nullopt : std::optional<Term>(it->second));
    }
    return k;
  };
  std::stable_sort(sols.begin(), sols.end(),
                   [&](const BindingSet& a, const BindingSet& b) { return key(a) < key(b); });
  r.rows = std::move(sols);
  return r;
}

std::string format_tsv(const QueryResult& result) {
  std::ostringstream out;
  if (result.is_ask) {
    out << "?ask\n" << (result.ask ? "true" : "false") << "\n";
    return out.str();
  }
  for (std::size_t i = 0; i < result.variables.size(); ++i)
    out << (i ? "\t" : "") << "?" << result.variables[i];
  out << "\n";
  for (const auto& row : result.rows) {
    for (std::size_t i = 0; i < result.variables.size(); ++i) {
      if (i) out << "\t";
      auto it = row.find(result.variables[i]);
      if (it != row.end()) out << it->second.to_string();
    }
    out << "\n";
  }
  return out.str();
}

}  // namespace kapps::sparql
