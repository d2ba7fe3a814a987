#include "kapps/term.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <regex>

#include "kapps/vocab.hpp"

namespace kapps {

namespace {

bool all_digits(std::string_view s) {
  return !s.empty() &&
         std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

bool valid_integer(std::string_view s) {
  if (!s.empty() && (s[0] == '+' || s[0] == '-')) s.remove_prefix(1);
  return all_digits(s);
}

bool valid_decimal(std::string_view s) {
  if (!s.empty() && (s[0] == '+' || s[0] == '-')) s.remove_prefix(1);
  auto dot = s.find('.');
  if (dot == std::string_view::npos) return all_digits(s);
  auto intpart = s.substr(0, dot);
  auto frac = s.substr(dot + 1);
  if (intpart.empty() && frac.empty()) return false;
  return (intpart.empty() || all_digits(intpart)) && (frac.empty() || all_digits(frac));
}

bool valid_floating(std::string_view s) {
  if (s == "INF" || s == "-INF" || s == "+INF" || s == "NaN") return true;
  std::string_view mant = s;
  auto e = s.find_first_of("eE");
  if (e != std::string_view::npos) {
    mant = s.substr(0, e);
    if (!valid_integer(s.substr(e + 1))) return false;
  }
  return valid_decimal(mant);
}

bool valid_date_time(const std::string& s) {
  static const std::regex re(
      R"(-?\d{4,}-\d{2}-\d{2}T\d{2}:\d{2}:\d{2}(\.\d+)?(Z|[+-]\d{2}:\d{2})?)");
  return std::regex_match(s, re);
}

std::string canonical_integer(std::string_view s) {
  bool neg = false;
  if (s[0] == '+' || s[0] == '-') {
    neg = s[0] == '-';
    s.remove_prefix(1);
  }
  auto nz = s.find_first_not_of('0');
  if (nz == std::string_view::npos) return "0";
  std::string out = neg ? "-" : "";
  out.append(s.substr(nz));
  return out;
}

std::string shortest(double v) {
  if (std::isnan(v)) return "NaN";
  if (std::isinf(v)) return v > 0 ? "INF" : "-INF";
  std::array<char, 64> buf{};
  auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

std::string shortest(float v) {
  if (std::isnan(v)) return "NaN";
  if (std::isinf(v)) return v > 0 ? "INF" : "-INF";
  std::array<char, 64> buf{};
  auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

double parse_floating(const std::string& s) {
  if (s == "INF" || s == "+INF") return HUGE_VAL;
  if (s == "-INF") return -HUGE_VAL;
  if (s == "NaN") return std::nan("");
  return std::strtod(s.c_str(), nullptr);
}

std::string canonicalize(const std::string& lex, const std::string& dt) {
  using namespace vocab;
  if (dt == xsd::integer) {
    return valid_integer(lex) ? canonical_integer(lex) : lex;
  }
  if (dt == xsd::boolean) {
    if (lex == "1") return "true";
    if (lex == "0") return "false";
    return lex;
  }
  if (dt == xsd::double_) {
    return valid_floating(lex) ? shortest(parse_floating(lex)) : lex;
  }
  if (dt == xsd::float_) {
    return valid_floating(lex) ? shortest(static_cast<float>(parse_floating(lex))) : lex;
  }
  return lex;
}

}  // namespace

bool has_scheme(std::string_view iri) {
  if (iri.empty() || !std::isalpha(static_cast<unsigned char>(iri[0]))) return false;
  for (std::size_t i = 1; i < iri.size(); ++i) {
    char c = iri[i];
    if (c == ':') return true;
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '+' || c == '-' || c == '.'))
      return false;
  }
  return false;
}

Term Term::iri(std::string iri) {
  if (!has_scheme(iri)) throw InvalidTerm("IRI is not absolute: <" + iri + ">");
  for (char c : iri) {
    if (c == ' ' || c == '<' || c == '>' || c == '"' || c == '\n')
      throw InvalidTerm("IRI contains an illegal character: <" + iri + ">");
  }
  Term t;
  t.kind_ = TermKind::Iri;
  t.value_ = std::move(iri);
  return t;
}

Term Term::blank(std::string label) {
  if (label.empty()) throw InvalidTerm("blank node label must not be empty");
  Term t;
  t.kind_ = TermKind::Blank;
  t.value_ = std::move(label);
  return t;
}

Term Term::literal(std::string lexical, std::string datatype, std::string lang) {
  Term t;
  t.kind_ = TermKind::Literal;
  if (!lang.empty()) {
    std::transform(lang.begin(), lang.end(), lang.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    t.lang_ = std::move(lang);
    t.datatype_ = vocab::rdf::langString;
    t.value_ = std::move(lexical);
    return t;
  }
  if (datatype.empty()) datatype = vocab::xsd::string;
  if (!has_scheme(datatype)) throw InvalidTerm("datatype IRI is not absolute: " + datatype);
  if (datatype == vocab::rdf::langString)
    throw InvalidTerm("rdf:langString literal requires a language tag");
  t.value_ = canonicalize(lexical, datatype);
  t.datatype_ = std::move(datatype);
  return t;
}

Term Term::integer(std::int64_t v) { return literal(std::to_string(v), vocab::xsd::integer); }
Term Term::boolean(bool v) { return literal(v ? "true" : "false", vocab::xsd::boolean); }
Term Term::dbl(double v) { return literal(shortest(v), vocab::xsd::double_); }
Term Term::date_time(std::string iso) { return literal(std::move(iso), vocab::xsd::dateTime); }
Term Term::any_uri(std::string uri) { return literal(std::move(uri), vocab::xsd::anyURI); }

bool Term::is_numeric() const {
  if (kind_ != TermKind::Literal) return false;
  using namespace vocab;
  return (datatype_ == xsd::integer || datatype_ == xsd::double_ ||
          datatype_ == xsd::float_ || datatype_ == xsd::decimal) &&
         well_formed();
}

std::optional<long double> Term::numeric_value() const {
  if (!is_numeric()) return std::nullopt;
  if (datatype_ == vocab::xsd::double_ || datatype_ == vocab::xsd::float_) {
    return static_cast<long double>(parse_floating(value_));
  }
  return std::strtold(value_.c_str(), nullptr);
}

std::optional<bool> Term::boolean_value() const {
  if (kind_ != TermKind::Literal || datatype_ != vocab::xsd::boolean) return std::nullopt;
  if (value_ == "true") return true;
  if (value_ == "false") return false;
  return std::nullopt;
}

bool Term::well_formed() const {
  if (kind_ != TermKind::Literal) return true;
  using namespace vocab;
  if (datatype_ == xsd::integer) return valid_integer(value_);
  if (datatype_ == xsd::decimal) return valid_decimal(value_);
  if (datatype_ == xsd::double_ || datatype_ == xsd::float_) return valid_floating(value_);
  if (datatype_ == xsd::boolean) return value_ == "true" || value_ == "false";
  if (datatype_ == xsd::dateTime) return valid_date_time(value_);
  if (datatype_ == xsd::anyURI) return value_.find(' ') == std::string::npos;
  return true;
}

namespace {
std::string escape_literal(const std::string& s) {
  std::string out;
  out.reserve(s.size() + 2);
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

std::string Term::to_string() const {
  switch (kind_) {
    case TermKind::Iri: return "<" + value_ + ">";
    case TermKind::Blank: return "_:" + value_;
    case TermKind::Literal: {
      std::string out = "\"" + escape_literal(value_) + "\"";
      if (!lang_.empty()) return out + "@" + lang_;
      if (datatype_ != vocab::xsd::string) out += "^^<" + datatype_ + ">";
      return out;
    }
  }
  return {};
}

void check_quad(const Quad& q) {
  if (q.s.is_literal()) throw InvalidTerm("literal in subject position: " + to_string(q));
  if (!q.p.is_iri()) throw InvalidTerm("predicate must be an IRI: " + to_string(q));
  if (!q.g.is_iri()) throw InvalidTerm("graph name must be an IRI: " + to_string(q));
  if (q.s.is_iri() && q.s.value().empty()) throw InvalidTerm("empty subject IRI");
}

std::string to_string(const Quad& q) {
  return q.s.to_string() + " " + q.p.to_string() + " " + q.o.to_string() + " " +
         q.g.to_string() + " .";
}

std::size_t TermHash::operator()(const Term& t) const noexcept {
  std::size_t h = std::hash<std::string>{}(t.value());
  h ^= std::hash<std::string>{}(t.datatype()) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  h ^= static_cast<std::size_t>(t.kind()) * 0x100000001b3ULL;
  return h;
}

}  // namespace kapps
