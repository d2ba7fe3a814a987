#include "kapps/turtle.hpp"

#include <algorithm>
#include <cctype>
#include <deque>
#include <regex>

#include "kapps/vocab.hpp"

namespace kapps {

TurtleError::TurtleError(const std::string& what, int line, int column, std::string token)
    : std::runtime_error("turtle:" + std::to_string(line) + ":" + std::to_string(column) + ": " +
                         what + (token.empty() ? "" : " near '" + token + "'")),
      line_(line),
      column_(column),
      token_(std::move(token)) {}

namespace {

bool is_pn_chars_base(char c) {
  return std::isalpha(static_cast<unsigned char>(c)) || static_cast<unsigned char>(c) >= 0x80;
}
bool is_pn_chars(char c) {
  return is_pn_chars_base(c) || std::isdigit(static_cast<unsigned char>(c)) || c == '_' ||
         c == '-';
}

void append_utf8(std::string& out, unsigned long cp) {
  if (cp < 0x80) {
    out += static_cast<char>(cp);
  } else if (cp < 0x800) {
    out += static_cast<char>(0xC0 | (cp >> 6));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else if (cp < 0x10000) {
    out += static_cast<char>(0xE0 | (cp >> 12));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else {
    out += static_cast<char>(0xF0 | (cp >> 18));
    out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  }
}

std::string resolve_iri(const std::string& ref, const std::string& base) {
  if (has_scheme(ref)) return ref;
  if (base.empty()) return {};
  if (ref.empty()) return base;
  if (ref[0] == '#') {
    auto hash = base.find('#');
    return base.substr(0, hash) + ref;
  }
  char last = base.back();
  if (last == '/' || last == '#') return base + ref;
  auto slash = base.rfind('/');
  return slash == std::string::npos ? base + ref : base.substr(0, slash + 1) + ref;
}

class TurtleParser {
 public:
  TurtleParser(std::string_view src, std::string_view base) : src_(src), base_(base) {}

  TurtleDocument run() {
    for (;;) {
      skip_ws();
      if (eof()) break;
      if (peek() == '@') {
        directive_at();
      } else if (keyword_ahead("PREFIX")) {
        pos_ += 6;
        prefix_body(false);
      } else if (keyword_ahead("BASE")) {
        pos_ += 4;
        base_body(false);
      } else {
        triples_statement();
        skip_ws();
        expect('.');
        seen_statement_ = true;
      }
    }
    return std::move(doc_);
  }

 private:
  [[noreturn]] void fail(const std::string& what) const { fail_at(pos_, what); }

  [[noreturn]] void fail_at(std::size_t at, const std::string& what) const {
    int line = 1, col = 1;
    for (std::size_t i = 0; i < at && i < src_.size(); ++i) {
      if (src_[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    std::string token;
    for (std::size_t i = at; i < src_.size() && token.size() < 16; ++i) {
      if (std::isspace(static_cast<unsigned char>(src_[i]))) break;
      token += src_[i];
    }
    throw TurtleError(what, line, col, token);
  }

  bool eof() const { return pos_ >= src_.size(); }
  char peek(std::size_t ahead = 0) const {
    return pos_ + ahead < src_.size() ? src_[pos_ + ahead] : '\0';
  }

  void skip_ws() {
    while (!eof()) {
      char c = peek();
      if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else if (c == '#') {
        while (!eof() && peek() != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  void expect(char c) {
    if (peek() != c) fail(std::string("expected '") + c + "'");
    ++pos_;
  }

  bool keyword_ahead(std::string_view kw) const {
    if (pos_ + kw.size() > src_.size()) return false;
    for (std::size_t i = 0; i < kw.size(); ++i) {
      if (std::toupper(static_cast<unsigned char>(src_[pos_ + i])) != kw[i]) return false;
    }
    char after = peek(kw.size());
    return after == '\0' || std::isspace(static_cast<unsigned char>(after)) || after == '<';
  }

  void directive_at() {
    if (src_.substr(pos_, 7) == "@prefix") {
      pos_ += 7;
      prefix_body(true);
    } else if (src_.substr(pos_, 5) == "@base") {
      pos_ += 5;
      base_body(true);
    } else {
      fail("unknown directive");
    }
  }

  void prefix_body(bool dotted) {
    skip_ws();
    std::size_t start = pos_;
    while (!eof() && peek() != ':') {
      char c = peek();
      if (!(is_pn_chars(c) || c == '.')) fail("invalid prefix name");
      ++pos_;
    }
    std::string name(src_.substr(start, pos_ - start));
    expect(':');
    skip_ws();
    std::string ns = iri_ref();
    doc_.prefixes[name] = ns;
    if (dotted) {
      skip_ws();
      expect('.');
    }
  }

  void base_body(bool dotted) {
    if (seen_statement_) fail("unsupported Turtle feature: @base redefinition after statements");
    skip_ws();
    base_ = iri_ref();
    if (dotted) {
      skip_ws();
      expect('.');
    }
  }

  std::string iri_ref() {
    std::size_t start = pos_;
    expect('<');
    std::string raw;
    while (!eof() && peek() != '>') {
      char c = peek();
      if (c == ' ' || c == '\n' || c == '<' || c == '"') fail_at(start, "malformed IRI");
      if (c == '\\') {
        ++pos_;
        raw += unicode_escape();
        continue;
      }
      raw += c;
      ++pos_;
    }
    if (eof()) fail_at(start, "unterminated IRI");
    ++pos_;
    std::string resolved = resolve_iri(raw, base_);
    if (resolved.empty()) fail_at(start, "relative IRI without a base: <" + raw + ">");
    return resolved;
  }

  std::string unicode_escape() {
    char kind = peek();
    int len = kind == 'u' ? 4 : kind == 'U' ? 8 : 0;
    if (len == 0) fail("invalid escape sequence");
    ++pos_;
    if (pos_ + len > src_.size()) fail("truncated unicode escape");
    std::string hex(src_.substr(pos_, len));
    if (!std::all_of(hex.begin(), hex.end(), [](char c) { return std::isxdigit(static_cast<unsigned char>(c)); }))
      fail("invalid unicode escape");
    pos_ += len;
    std::string out;
    append_utf8(out, std::stoul(hex, nullptr, 16));
    return out;
  }

  std::string prefixed_name_iri() {
    std::size_t start = pos_;
    while (!eof() && (is_pn_chars(peek()) || peek() == '.')) ++pos_;
    std::string prefix(src_.substr(start, pos_ - start));
    if (peek() != ':') {
      pos_ = start;
      fail("expected a term");
    }
    ++pos_;
    std::size_t lstart = pos_;
    while (!eof() && (is_pn_chars(peek()) || peek() == '.' || peek() == ':')) ++pos_;
    while (pos_ > lstart && src_[pos_ - 1] == '.') --pos_;
    std::string local(src_.substr(lstart, pos_ - lstart));
    auto it = doc_.prefixes.find(prefix);
    if (it == doc_.prefixes.end()) fail_at(start, "undeclared prefix '" + prefix + "'");
    return it->second + local;
  }

  Term iri_term() {
    std::size_t start = pos_;
    std::string iri = peek() == '<' ? iri_ref() : prefixed_name_iri();
    try {
      return Term::iri(iri);
    } catch (const InvalidTerm& e) {
      fail_at(start, e.what());
    }
  }

  Term blank_label() {
    pos_ += 2;  // "_:"
    std::size_t start = pos_;
    while (!eof() && (is_pn_chars(peek()) || peek() == '.')) ++pos_;
    while (pos_ > start && src_[pos_ - 1] == '.') --pos_;
    if (pos_ == start) fail("empty blank node label");
    return Term::blank("u:" + std::string(src_.substr(start, pos_ - start)));
  }

  Term fresh_blank() { return Term::blank("a:" + std::to_string(++anon_)); }

  Term blank_property_list() {
    expect('[');
    Term node = fresh_blank();
    skip_ws();
    if (peek() != ']') predicate_object_list(node);
    skip_ws();
    expect(']');
    return node;
  }

  void triples_statement() {
    Term subject;
    if (peek() == '[') {
      subject = blank_property_list();
      skip_ws();
      if (peek() == '.') return;
    } else if (peek() == '(') {
      fail("unsupported Turtle feature: collection");
    } else if (peek() == '_' && peek(1) == ':') {
      subject = blank_label();
    } else if (peek() == '"' || peek() == '\'') {
      fail("literal in subject position");
    } else {
      subject = iri_term();
    }
    skip_ws();
    predicate_object_list(subject);
  }

  void predicate_object_list(const Term& subject) {
    for (;;) {
      skip_ws();
      Term pred = verb();
      for (;;) {
        skip_ws();
        Term obj = object();
        doc_.triples.push_back({subject, pred, obj});
        skip_ws();
        if (peek() != ',') break;
        ++pos_;
      }
      skip_ws();
      if (peek() != ';') break;
      while (peek() == ';') {
        ++pos_;
        skip_ws();
      }
      if (peek() == '.' || peek() == ']' || eof()) break;
    }
  }

  Term verb() {
    if (peek() == 'a') {
      char n = peek(1);
      if (!(is_pn_chars(n) || n == ':' || n == '.')) {
        ++pos_;
        return Term::iri(vocab::rdf::type);
      }
    }
    if (peek() == '_' || peek() == '[' || peek() == '"') fail("predicate must be an IRI");
    return iri_term();
  }

  Term object() {
    char c = peek();
    if (c == '<') return iri_term();
    if (c == '_' && peek(1) == ':') return blank_label();
    if (c == '[') return blank_property_list();
    if (c == '(') fail("unsupported Turtle feature: collection");
    if (c == '"' || c == '\'') return string_literal();
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '+' || c == '-' ||
        (c == '.' && std::isdigit(static_cast<unsigned char>(peek(1)))))
      return numeric_literal();
    if (word_ahead("true")) {
      pos_ += 4;
      return Term::boolean(true);
    }
    if (word_ahead("false")) {
      pos_ += 5;
      return Term::boolean(false);
    }
    return iri_term();
  }

  bool word_ahead(std::string_view w) const {
    if (src_.substr(pos_, w.size()) != w) return false;
    char n = peek(w.size());
    return !(is_pn_chars(n) || n == ':' || n == '.');
  }

  Term numeric_literal() {
    std::size_t start = pos_;
    if (peek() == '+' || peek() == '-') ++pos_;
    auto digits = [&] {
      std::size_t n = 0;
      while (std::isdigit(static_cast<unsigned char>(peek()))) {
        ++pos_;
        ++n;
      }
      return n;
    };
    std::size_t int_digits = digits();
    bool has_dot = false, has_exp = false;
    if (peek() == '.' && std::isdigit(static_cast<unsigned char>(peek(1)))) {
      has_dot = true;
      ++pos_;
      digits();
    }
    if (peek() == 'e' || peek() == 'E') {
      std::size_t save = pos_;
      ++pos_;
      if (peek() == '+' || peek() == '-') ++pos_;
      if (digits() == 0) {
        pos_ = save;
      } else {
        has_exp = true;
      }
    }
    if (int_digits == 0 && !has_dot) fail_at(start, "malformed number");
    std::string lex(src_.substr(start, pos_ - start));
    if (has_exp) return Term::literal(lex, vocab::xsd::double_);
    if (has_dot) return Term::literal(lex, vocab::xsd::decimal);
    return Term::literal(lex, vocab::xsd::integer);
  }

  Term string_literal() {
    std::size_t start = pos_;
    char q = peek();
    bool long_form = peek(1) == q && peek(2) == q;
    pos_ += long_form ? 3 : 1;
    std::string value;
    for (;;) {
      if (eof()) fail_at(start, "unterminated string literal");
      char c = peek();
      if (long_form) {
        if (c == q && peek(1) == q && peek(2) == q) {
          pos_ += 3;
          break;
        }
      } else {
        if (c == q) {
          ++pos_;
          break;
        }
        if (c == '\n' || c == '\r') fail_at(start, "newline in short string literal");
      }
      if (c == '\\') {
        ++pos_;
        char e = peek();
        switch (e) {
          case 't': value += '\t'; ++pos_; break;
          case 'n': value += '\n'; ++pos_; break;
          case 'r': value += '\r'; ++pos_; break;
          case 'b': value += '\b'; ++pos_; break;
          case 'f': value += '\f'; ++pos_; break;
          case '"': value += '"'; ++pos_; break;
          case '\'': value += '\''; ++pos_; break;
          case '\\': value += '\\'; ++pos_; break;
          case 'u':
          case 'U': value += unicode_escape(); break;
          default: fail("invalid escape sequence");
        }
        continue;
      }
      value += c;
      ++pos_;
    }
    if (peek() == '@') {
      ++pos_;
      std::size_t ls = pos_;
      while (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '-') ++pos_;
      if (pos_ == ls) fail("empty language tag");
      return Term::literal(std::move(value), {}, std::string(src_.substr(ls, pos_ - ls)));
    }
    std::size_t after = pos_;
    skip_ws();
    if (peek() == '^' && peek(1) == '^') {
      pos_ += 2;
      skip_ws();
      Term dt = iri_term();
      return Term::literal(std::move(value), dt.value());
    }
    pos_ = after;
    return Term::string(std::move(value));
  }

  std::string_view src_;
  std::string base_;
  std::size_t pos_ = 0;
  bool seen_statement_ = false;
  int anon_ = 0;
  TurtleDocument doc_;
};

bool valid_local(const std::string& local) {
  static const std::regex re(R"(^([A-Za-z0-9_]([A-Za-z0-9_.\-]*[A-Za-z0-9_\-])?)?$)");
  return std::regex_match(local, re);
}

std::string escape_string(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\t': out += "\\t"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

TurtleDocument parse_turtle(std::string_view text, std::string_view base) {
  return TurtleParser(text, base).run();
}

std::string compact_iri(const std::string& iri, const PrefixMap& prefixes) {
  const std::string* best_prefix = nullptr;
  std::size_t best_len = 0;
  for (const auto& [p, ns] : prefixes) {
    if (ns.size() > best_len && iri.size() >= ns.size() && iri.compare(0, ns.size(), ns) == 0 &&
        valid_local(iri.substr(ns.size()))) {
      best_prefix = &p;
      best_len = ns.size();
    }
  }
  if (!best_prefix) return "<" + iri + ">";
  return *best_prefix + ":" + iri.substr(best_len);
}

std::string serialize_turtle(const std::vector<Triple>& triples, const PrefixMap& prefixes) {
  std::string out;
  for (const auto& [p, ns] : prefixes) out += "@prefix " + p + ": <" + ns + "> .\n";
  if (triples.empty()) return out;

  std::map<Term, std::map<Term, std::set<Term>>> by_subject;
  for (const auto& t : triples) by_subject[t.s][t.p].insert(t.o);

  std::map<Term, std::string> labels;
  std::deque<Term> pending;  // labeled blank subjects awaiting emission
  std::set<Term> emitted;
  auto label_of = [&](const Term& b) -> const std::string& {
    auto it = labels.find(b);
    if (it == labels.end()) {
      it = labels.emplace(b, "_:b" + std::to_string(labels.size() + 1)).first;
      if (by_subject.count(b)) pending.push_back(b);
    }
    return it->second;
  };
  const Term type = Term::iri(vocab::rdf::type);
  auto render = [&](const Term& t) -> std::string {
    switch (t.kind()) {
      case TermKind::Iri: return compact_iri(t.value(), prefixes);
      case TermKind::Blank: return label_of(t);
      case TermKind::Literal: {
        std::string s = "\"" + escape_string(t.value()) + "\"";
        if (!t.lang().empty()) return s + "@" + t.lang();
        if (t.datatype() == vocab::xsd::string) return s;
        return s + "^^" + compact_iri(t.datatype(), prefixes);
      }
    }
    return {};
  };
  auto emit = [&](const Term& subject) {
    emitted.insert(subject);
    const auto& preds = by_subject.at(subject);
    std::vector<const Term*> order;
    if (preds.count(type)) order.push_back(&preds.find(type)->first);
    for (const auto& [p, objs] : preds)
      if (p != type) order.push_back(&p);
    out += "\n" + render(subject);
    bool first_pred = true;
    for (const Term* p : order) {
      out += first_pred ? " " : " ;\n    ";
      first_pred = false;
      std::string pred = *p == type && compact_iri(type.value(), prefixes)[0] == '<'
                             ? std::string("a")
                             : render(*p);
      out += pred + " ";
      bool first_obj = true;
      for (const auto& o : preds.at(*p)) {
        if (!first_obj) out += ", ";
        first_obj = false;
        out += render(o);
      }
    }
    out += " .\n";
  };

  for (const auto& [s, preds] : by_subject)
    if (!s.is_blank()) emit(s);
  for (;;) {
    while (!pending.empty()) {
      Term b = pending.front();
      pending.pop_front();
      if (!emitted.count(b)) emit(b);
    }
    auto root = std::find_if(by_subject.begin(), by_subject.end(),
                             [&](const auto& kv) { return !emitted.count(kv.first); });
    if (root == by_subject.end()) break;
    label_of(root->first);
  }
  return out;
}

std::string serialize_turtle(const std::vector<Quad>& quads, const PrefixMap& prefixes) {
  std::vector<Triple> triples;
  triples.reserve(quads.size());
  for (const auto& q : quads) triples.push_back(q.triple());
  return serialize_turtle(triples, prefixes);
}

const PrefixMap& standard_prefixes() {
  static const PrefixMap prefixes = {
      {"rdf", vocab::kRdf},   {"rdfs", vocab::kRdfs}, {"xsd", vocab::kXsd},
      {"owl", vocab::kOwl},   {"sh", vocab::kSh},     {"prov", vocab::kProv},
      {"cfc", vocab::kCfc},   {"svc", vocab::kSvc},   {"fc", vocab::kFc},
      {"fci", vocab::kFci},   {"uc", vocab::kUc},     {"ex", vocab::kEx},
  };
  return prefixes;
}

}  // namespace kapps
