#include <algorithm>
#include <cctype>
#include <map>
#include <set>

#include "kapps/sparql.hpp"
#include "kapps/vocab.hpp"

namespace kapps::sparql {

SparqlSyntaxError::SparqlSyntaxError(const std::string& what, std::size_t position)
    : std::runtime_error("sparql:" + std::to_string(position) + ": " + what),
      position_(position) {}

UnsupportedFeature::UnsupportedFeature(const std::string& construct, std::size_t position)
    : SparqlSyntaxError("unsupported feature: " + construct, position), construct_(construct) {}

bool Query::is_aggregate() const {
  if (!group_by.empty()) return true;
  return std::any_of(projection.begin(), projection.end(),
                     [](const Projection& p) { return p.is_count; });
}

namespace {

enum class Tok { Iri, PName, Var, String, LangTag, Number, Word, Punct, End };

struct Token {
  Tok kind = Tok::End;
  std::string text;
  std::size_t pos = 0;
  std::string datatype;  // numbers
};

bool name_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' ||
         static_cast<unsigned char>(c) >= 0x80;
}

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    for (;;) {
      skip_ws();
      Token t;
      t.pos = pos_;
      if (pos_ >= src_.size()) {
        out.push_back(t);
        return out;
      }
      char c = src_[pos_];
      bool after_value = !out.empty() && (out.back().kind == Tok::Var ||
                                          out.back().kind == Tok::Number ||
                                          out.back().kind == Tok::Iri ||
                                          out.back().kind == Tok::PName ||
                                          out.back().kind == Tok::String ||
                                          (out.back().kind == Tok::Punct && out.back().text == ")"));
      if (c == '<' && iri_ahead()) {
        t.kind = Tok::Iri;
        auto end = src_.find('>', pos_);
        t.text = std::string(src_.substr(pos_ + 1, end - pos_ - 1));
        pos_ = end + 1;
      } else if ((c == '?' || c == '$') && pos_ + 1 < src_.size() && name_char(src_[pos_ + 1])) {
        ++pos_;
        auto s = pos_;
        while (pos_ < src_.size() && name_char(src_[pos_]) && src_[pos_] != '-') ++pos_;
        t.kind = Tok::Var;
        t.text = std::string(src_.substr(s, pos_ - s));
      } else if (c == '"' || c == '\'') {
        t.kind = Tok::String;
        t.text = string_body();
      } else if (c == '@' && pos_ + 1 < src_.size() && std::isalpha(static_cast<unsigned char>(src_[pos_ + 1]))) {
        ++pos_;
        auto s = pos_;
        while (pos_ < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '-')) ++pos_;
        t.kind = Tok::LangTag;
        t.text = std::string(src_.substr(s, pos_ - s));
      } else if (std::isdigit(static_cast<unsigned char>(c)) ||
                 ((c == '-' || c == '+') && !after_value && pos_ + 1 < src_.size() &&
                  std::isdigit(static_cast<unsigned char>(src_[pos_ + 1])))) {
        number(t);
      } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == ':') {
        word_or_pname(t);
      } else {
        t.kind = Tok::Punct;
        static const char* two[] = {"!=", "<=", ">=", "&&", "||", "^^"};
        for (const char* op : two) {
          if (src_.substr(pos_, 2) == op) {
            t.text = op;
            break;
          }
        }
        if (t.text.empty()) t.text = std::string(1, c);
        pos_ += t.text.size();
      }
      out.push_back(std::move(t));
    }
  }

 private:
  void skip_ws() {
    while (pos_ < src_.size()) {
      char c = src_[pos_];
      if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else if (c == '#') {
        while (pos_ < src_.size() && src_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  bool iri_ahead() const {
    for (auto i = pos_ + 1; i < src_.size(); ++i) {
      char c = src_[i];
      if (c == '>') return true;
      if (std::isspace(static_cast<unsigned char>(c)) || c == '<' || c == '"' || c == '{' ||
          c == '}' || c == '|' || c == '^' || c == '`' || c == '\\')
        return false;
    }
    return false;
  }

  std::string string_body() {
    auto start = pos_;
    char q = src_[pos_];
    bool long_form = src_.substr(pos_, 3) == std::string(3, q);
    pos_ += long_form ? 3 : 1;
    std::string v;
    for (;;) {
      if (pos_ >= src_.size()) throw SparqlSyntaxError("unterminated string", start);
      char c = src_[pos_];
      if (long_form && src_.substr(pos_, 3) == std::string(3, q)) {
        pos_ += 3;
        return v;
      }
      if (!long_form && c == q) {
        ++pos_;
        return v;
      }
      if (c == '\\' && pos_ + 1 < src_.size()) {
        char e = src_[pos_ + 1];
        pos_ += 2;
        switch (e) {
          case 'n': v += '\n'; break;
          case 't': v += '\t'; break;
          case 'r': v += '\r'; break;
          case '"': v += '"'; break;
          case '\'': v += '\''; break;
          case '\\': v += '\\'; break;
          default: throw SparqlSyntaxError("invalid escape in string", pos_ - 2);
        }
        continue;
      }
      v += c;
      ++pos_;
    }
  }

  void number(Token& t) {
    auto s = pos_;
    if (src_[pos_] == '+' || src_[pos_] == '-') ++pos_;
    auto digits = [&] {
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    };
    digits();
    t.datatype = vocab::xsd::integer;
    if (pos_ + 1 < src_.size() && src_[pos_] == '.' &&
        std::isdigit(static_cast<unsigned char>(src_[pos_ + 1]))) {
      ++pos_;
      digits();
      t.datatype = vocab::xsd::decimal;
    }
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      auto save = pos_;
      ++pos_;
      if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) ++pos_;
      auto ds = pos_;
      digits();
      if (pos_ == ds) {
        pos_ = save;
      } else {
        t.datatype = vocab::xsd::double_;
      }
    }
    t.kind = Tok::Number;
    t.text = std::string(src_.substr(s, pos_ - s));
  }

  void word_or_pname(Token& t) {
    auto s = pos_;
    while (pos_ < src_.size() && (name_char(src_[pos_]) || src_[pos_] == '.')) ++pos_;
    if (pos_ < src_.size() && src_[pos_] == ':') {
      ++pos_;
      while (pos_ < src_.size() && (name_char(src_[pos_]) || src_[pos_] == '.' || src_[pos_] == ':')) ++pos_;
      while (src_[pos_ - 1] == '.') --pos_;
      t.kind = Tok::PName;
    } else {
      while (pos_ > s && src_[pos_ - 1] == '.') --pos_;
      t.kind = Tok::Word;
    }
    t.text = std::string(src_.substr(s, pos_ - s));
  }

  std::string_view src_;
  std::size_t pos_ = 0;
};

std::string upper(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  return s;
}

const std::set<std::string>& unsupported_keywords() {
  static const std::set<std::string> kw = {
      "OPTIONAL", "UNION",  "MINUS",    "BIND",     "VALUES", "SERVICE", "GRAPH",
      "CONSTRUCT", "DESCRIBE", "INSERT", "DELETE",   "LOAD",   "CLEAR",   "DROP",
      "CREATE",   "HAVING", "ORDER",    "LIMIT",    "OFFSET", "FROM",    "EXISTS",
      "NOT",      "SUM",    "AVG",      "MIN",      "MAX",    "SAMPLE",  "GROUP_CONCAT",
      "REGEX",    "STR",    "LANG",     "DATATYPE", "IF",     "COALESCE", "FILTER_NOT"};
  return kw;
}

class Parser {
 public:
  Parser(std::vector<Token> toks, const PrefixMap& predeclared) : toks_(std::move(toks)) {
    prefixes_ = predeclared;
  }

  Query run() {
    prologue();
    Query q;
    if (is_word("SELECT")) {
      q = select_query();
    } else if (is_word("ASK")) {
      next();
      q.form = Query::Form::Ask;
      if (is_word("WHERE")) next();
      q.where = group_pattern();
    } else if (cur().kind == Tok::Word && unsupported_keywords().count(upper(cur().text))) {
      throw UnsupportedFeature(upper(cur().text), cur().pos);
    } else {
      throw SparqlSyntaxError("expected SELECT or ASK", cur().pos);
    }
    if (cur().kind != Tok::End) {
      if (cur().kind == Tok::Word && unsupported_keywords().count(upper(cur().text)))
        throw UnsupportedFeature(upper(cur().text), cur().pos);
      throw SparqlSyntaxError("unexpected trailing input '" + cur().text + "'", cur().pos);
    }
    q.prefixes = prefixes_;
    check_scoping(q);
    return q;
  }

 private:
  const Token& cur() const { return toks_[i_]; }
  const Token& peek(std::size_t n = 1) const { return toks_[std::min(i_ + n, toks_.size() - 1)]; }
  void next() {
    if (i_ + 1 < toks_.size()) ++i_;
  }
  bool is_word(const char* w) const { return cur().kind == Tok::Word && upper(cur().text) == w; }
  bool is_punct(const char* p) const { return cur().kind == Tok::Punct && cur().text == p; }
  void expect_punct(const char* p) {
    if (!is_punct(p))
      throw SparqlSyntaxError(std::string("expected '") + p + "' but found '" + cur().text + "'",
                              cur().pos);
    next();
  }
  void expect_word(const char* w) {
    if (!is_word(w))
      throw SparqlSyntaxError(std::string("expected ") + w + " but found '" + cur().text + "'",
                              cur().pos);
    next();
  }
  void reject_unsupported() {
    if (cur().kind == Tok::Word && unsupported_keywords().count(upper(cur().text)))
      throw UnsupportedFeature(upper(cur().text), cur().pos);
  }

  void prologue() {
    for (;;) {
      if (is_word("PREFIX")) {
        next();
        if (cur().kind != Tok::PName || cur().text.back() != ':')
          throw SparqlSyntaxError("expected prefix name", cur().pos);
        std::string name = cur().text.substr(0, cur().text.size() - 1);
        next();
        if (cur().kind != Tok::Iri) throw SparqlSyntaxError("expected IRI", cur().pos);
        prefixes_[name] = cur().text;
        next();
      } else if (is_word("BASE")) {
        throw UnsupportedFeature("BASE", cur().pos);
      } else {
        return;
      }
    }
  }

  Query select_query() {
    Query q;
    q.form = Query::Form::Select;
    expect_word("SELECT");
    if (is_word("DISTINCT")) {
      q.distinct = true;
      next();
    } else if (is_word("REDUCED")) {
      next();
    }
    if (is_punct("*")) {
      q.select_all = true;
      next();
    } else {
      while (cur().kind == Tok::Var || is_punct("(")) {
        if (cur().kind == Tok::Var) {
          Projection p;
          p.var = cur().text;
          q.projection.push_back(std::move(p));
          next();
          continue;
        }
        auto at = cur().pos;
        next();
        reject_unsupported();
        if (!is_word("COUNT")) throw UnsupportedFeature("projection expression", at);
        next();
        expect_punct("(");
        Projection p;
        p.is_count = true;
        if (is_word("DISTINCT")) {
          p.count_distinct = true;
          next();
        }
        if (is_punct("*")) {
          next();
        } else if (cur().kind == Tok::Var) {
          p.count_var = cur().text;
          next();
        } else {
          throw UnsupportedFeature("aggregate over expression", cur().pos);
        }
        expect_punct(")");
        expect_word("AS");
        if (cur().kind != Tok::Var) throw SparqlSyntaxError("expected variable after AS", cur().pos);
        p.var = cur().text;
        next();
        expect_punct(")");
        q.projection.push_back(std::move(p));
      }
      if (q.projection.empty()) throw SparqlSyntaxError("empty projection", cur().pos);
    }
    if (is_word("WHERE")) next();
    q.where = group_pattern();
    if (is_word("GROUP")) {
      next();
      expect_word("BY");
      if (cur().kind != Tok::Var) throw SparqlSyntaxError("expected GROUP BY variable", cur().pos);
      while (cur().kind == Tok::Var) {
        q.group_by.push_back(cur().text);
        next();
      }
    }
    reject_unsupported();
    return q;
  }

  GroupPattern group_pattern() {
    expect_punct("{");
    GroupPattern g;
    if (is_word("SELECT")) {
      g.elements.push_back(std::make_shared<const Query>(sub_select()));
      expect_punct("}");
      return g;
    }
    while (!is_punct("}")) {
      if (cur().kind == Tok::End) throw SparqlSyntaxError("unterminated group", cur().pos);
      reject_unsupported();
      if (is_punct("{")) {
        if (peek().kind == Tok::Word && upper(peek().text) == "SELECT") {
          next();
          g.elements.push_back(std::make_shared<const Query>(sub_select()));
          expect_punct("}");
        } else {
          g.elements.push_back(std::make_shared<const GroupPattern>(group_pattern()));
        }
        if (is_punct(".")) next();
        continue;
      }
      if (is_word("FILTER")) {
        next();
        g.filters.push_back(constraint());
        if (is_punct(".")) next();
        continue;
      }
      triples_block(g);
    }
    next();
    return g;
  }

  Query sub_select() {
    Query q = select_query();
    q.prefixes = prefixes_;
    return q;
  }

  void triples_block(GroupPattern& g) {
    VarOrTerm subject = term_or_var(/*subject=*/true);
    for (;;) {
      if (is_punct("^")) throw UnsupportedFeature("property path", cur().pos);
      VarOrTerm verb;
      if (cur().kind == Tok::Word && cur().text == "a") {
        verb = Term::iri(vocab::rdf::type);
        next();
      } else {
        verb = term_or_var(false);
        if (std::holds_alternative<Term>(verb) && !std::get<Term>(verb).is_iri())
          throw SparqlSyntaxError("predicate must be an IRI or variable", cur().pos);
      }
      if (cur().kind == Tok::Punct &&
          (cur().text == "/" || cur().text == "|" || cur().text == "*" || cur().text == "+" ||
           cur().text == "?"))
        throw UnsupportedFeature("property path", cur().pos);
      for (;;) {
        VarOrTerm object = term_or_var(false);
        g.elements.push_back(TriplePattern{subject, verb, object});
        if (!is_punct(",")) break;
        next();
      }
      if (!is_punct(";")) break;
      while (is_punct(";")) next();
      if (is_punct(".") || is_punct("}")) break;
    }
    if (is_punct(".")) {
      next();
    } else if (!is_punct("}") && !is_word("FILTER") && !is_punct("{")) {
      reject_unsupported();
      throw SparqlSyntaxError("expected '.' or '}' after triple pattern, found '" + cur().text + "'",
                              cur().pos);
    }
  }

  Term resolve_pname(const Token& t) {
    auto colon = t.text.find(':');
    std::string prefix = t.text.substr(0, colon);
    auto it = prefixes_.find(prefix);
    if (it == prefixes_.end())
      throw SparqlSyntaxError("undeclared prefix '" + prefix + "'", t.pos);
    return Term::iri(it->second + t.text.substr(colon + 1));
  }

  Term literal_tail(std::string lexical) {
    if (cur().kind == Tok::LangTag) {
      std::string lang = cur().text;
      next();
      return Term::literal(std::move(lexical), {}, lang);
    }
    if (is_punct("^^")) {
      next();
      Term dt = iri_token();
      return Term::literal(std::move(lexical), dt.value());
    }
    return Term::string(std::move(lexical));
  }

  Term iri_token() {
    if (cur().kind == Tok::Iri) {
      auto t = cur();
      next();
      try {
        return Term::iri(t.text);
      } catch (const InvalidTerm& e) {
        throw SparqlSyntaxError(e.what(), t.pos);
      }
    }
    if (cur().kind == Tok::PName) {
      auto t = cur();
      next();
      return resolve_pname(t);
    }
    throw SparqlSyntaxError("expected IRI", cur().pos);
  }

  VarOrTerm term_or_var(bool subject) {
    const Token& t = cur();
    switch (t.kind) {
      case Tok::Var: {
        Variable v{t.text};
        next();
        return v;
      }
      case Tok::Iri: return iri_token();
      case Tok::PName:
        if (t.text.rfind("_:", 0) == 0) throw UnsupportedFeature("blank node in pattern", t.pos);
        return iri_token();
      case Tok::String: {
        if (subject) throw SparqlSyntaxError("literal in subject position", t.pos);
        std::string lex = t.text;
        next();
        return literal_tail(std::move(lex));
      }
      case Tok::Number: {
        Term n = Term::literal(t.text, t.datatype);
        next();
        return n;
      }
      case Tok::Word:
        if (t.text == "true" || t.text == "false") {
          bool b = t.text == "true";
          next();
          return Term::boolean(b);
        }
        reject_unsupported();
        break;
      case Tok::Punct:
        if (t.text == "[" || t.text == "(") throw UnsupportedFeature("blank node or collection in pattern", t.pos);
        break;
      default: break;
    }
    throw SparqlSyntaxError("expected term or variable, found '" + t.text + "'", t.pos);
  }

  ExprPtr constraint() {
    if (is_punct("(")) {
      next();
      ExprPtr e = or_expr();
      expect_punct(")");
      return e;
    }
    if (is_word("BOUND")) return primary();
    reject_unsupported();
    throw SparqlSyntaxError("expected '(' after FILTER", cur().pos);
  }

  static ExprPtr make(Expression::Op op, std::vector<ExprPtr> args) {
    auto e = std::make_shared<Expression>();
    e->op = op;
    e->args = std::move(args);
    return e;
  }

  ExprPtr or_expr() {
    ExprPtr l = and_expr();
    while (is_punct("||")) {
      next();
      l = make(Expression::Op::Or, {l, and_expr()});
    }
    return l;
  }

  ExprPtr and_expr() {
    ExprPtr l = rel_expr();
    while (is_punct("&&")) {
      next();
      l = make(Expression::Op::And, {l, rel_expr()});
    }
    return l;
  }

  ExprPtr rel_expr() {
    ExprPtr l = unary();
    if (cur().kind == Tok::Punct) {
      static const std::map<std::string, Expression::Op> ops = {
          {"=", Expression::Op::Eq},  {"!=", Expression::Op::Ne}, {"<", Expression::Op::Lt},
          {"<=", Expression::Op::Le}, {">", Expression::Op::Gt},  {">=", Expression::Op::Ge}};
      auto it = ops.find(cur().text);
      if (it != ops.end()) {
        next();
        return make(it->second, {l, unary()});
      }
      if (cur().text == "+" || cur().text == "-" || cur().text == "*" || cur().text == "/")
        throw UnsupportedFeature("arithmetic expression", cur().pos);
    }
    return l;
  }

  ExprPtr unary() {
    if (is_punct("!")) {
      next();
      return make(Expression::Op::Not, {unary()});
    }
    return primary();
  }

  ExprPtr primary() {
    if (is_punct("(")) {
      next();
      ExprPtr e = or_expr();
      expect_punct(")");
      return e;
    }
    if (cur().kind == Tok::Var) {
      auto e = std::make_shared<Expression>();
      e->op = Expression::Op::Var;
      e->var = cur().text;
      next();
      return e;
    }
    if (is_word("BOUND")) {
      next();
      expect_punct("(");
      if (cur().kind != Tok::Var) throw SparqlSyntaxError("BOUND expects a variable", cur().pos);
      auto e = std::make_shared<Expression>();
      e->op = Expression::Op::Bound;
      e->var = cur().text;
      next();
      expect_punct(")");
      return e;
    }
    if (cur().kind == Tok::Word && peek().kind == Tok::Punct && peek().text == "(" &&
        cur().text != "true" && cur().text != "false")
      throw UnsupportedFeature("function " + upper(cur().text), cur().pos);
    auto e = std::make_shared<Expression>();
    e->op = Expression::Op::Const;
    VarOrTerm t = term_or_var(false);
    e->constant = std::get<Term>(t);
    return e;
  }

  // Every projected / grouped variable must be bound somewhere in WHERE.
  static void collect_vars(const GroupPattern& g, std::set<std::string>& out) {
    for (const auto& el : g.elements) {
      if (auto tp = std::get_if<TriplePattern>(&el)) {
        for (const VarOrTerm* x : {&tp->s, &tp->p, &tp->o})
          if (auto v = std::get_if<Variable>(x)) out.insert(v->name);
      } else if (auto sq = std::get_if<std::shared_ptr<const Query>>(&el)) {
        for (auto& v : (*sq)->result_variables()) out.insert(v);
      } else {
        collect_vars(*std::get<std::shared_ptr<const GroupPattern>>(el), out);
      }
    }
  }

  static void check_scoping(const Query& q) {
    std::set<std::string> bound;
    collect_vars(q.where, bound);
    std::set<std::string> grouped(q.group_by.begin(), q.group_by.end());
    for (const auto& g : q.group_by)
      if (!bound.count(g)) throw SparqlSyntaxError("GROUP BY variable ?" + g + " is not bound", 0);
    for (const auto& p : q.projection) {
      if (p.is_count) {
        if (p.count_var && !bound.count(*p.count_var))
          throw SparqlSyntaxError("aggregated variable ?" + *p.count_var + " is not bound", 0);
        continue;
      }
      if (!bound.count(p.var))
        throw SparqlSyntaxError("projected variable ?" + p.var + " is not bound in WHERE", 0);
      if (q.is_aggregate() && !grouped.count(p.var))
        throw SparqlSyntaxError("projected variable ?" + p.var + " is not grouped", 0);
    }
    if (q.select_all && q.is_aggregate())
      throw SparqlSyntaxError("SELECT * cannot be combined with GROUP BY", 0);
    for (const auto& el : q.where.elements) {
      if (auto sq = std::get_if<std::shared_ptr<const Query>>(&el)) check_scoping(**sq);
    }
  }

  std::vector<Token> toks_;
  std::size_t i_ = 0;
  PrefixMap prefixes_;
};

void vars_in_order(const GroupPattern& g, std::vector<std::string>& out) {
  auto add = [&](const std::string& v) {
    if (std::find(out.begin(), out.end(), v) == out.end()) out.push_back(v);
  };
  for (const auto& el : g.elements) {
    if (auto tp = std::get_if<TriplePattern>(&el)) {
      for (const VarOrTerm* x : {&tp->s, &tp->p, &tp->o})
        if (auto v = std::get_if<Variable>(x)) add(v->name);
    } else if (auto sq = std::get_if<std::shared_ptr<const Query>>(&el)) {
      for (auto& v : (*sq)->result_variables()) add(v);
    } else {
      vars_in_order(*std::get<std::shared_ptr<const GroupPattern>>(el), out);
    }
  }
}

}  // namespace

std::vector<std::string> Query::result_variables() const {
  std::vector<std::string> out;
  if (form == Form::Ask) return out;
  if (select_all) {
    vars_in_order(where, out);
    return out;
  }
  for (const auto& p : projection) out.push_back(p.var);
  return out;
}

Query parse_query(std::string_view text, const PrefixMap& predeclared) {
  return Parser(Lexer(text).run(), predeclared).run();
}

}  // namespace kapps::sparql
