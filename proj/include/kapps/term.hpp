#pragma once
// RDF atoms: IRIs, blank nodes and typed literals, plus quads.
//
// Literals of the supported value-space datatypes are stored in canonical
// lexical form, so term equality is value equality within one datatype
// ("01"^^xsd:integer == "1"^^xsd:integer). Unsupported datatypes compare
// lexically.

#include <compare>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace kapps {

enum class TermKind : std::uint8_t { Iri = 0, Blank = 1, Literal = 2 };

class InvalidTerm : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class Term {
 public:
  // Default-constructed term is the smallest term in the total order; it is
  // used as an index lower bound and is never stored.
  Term() = default;

  static Term iri(std::string iri);
  static Term blank(std::string label);
  static Term literal(std::string lexical, std::string datatype = {},
                      std::string lang = {});
  static Term string(std::string value) { return literal(std::move(value)); }
  static Term integer(std::int64_t v);
  static Term boolean(bool v);
  static Term dbl(double v);
  static Term date_time(std::string iso);
  static Term any_uri(std::string uri);

  TermKind kind() const { return kind_; }
  bool is_iri() const { return kind_ == TermKind::Iri; }
  bool is_blank() const { return kind_ == TermKind::Blank; }
  bool is_literal() const { return kind_ == TermKind::Literal; }

  // IRI string, blank label, or literal lexical form.
  const std::string& value() const { return value_; }
  const std::string& datatype() const { return datatype_; }
  const std::string& lang() const { return lang_; }

  bool is_numeric() const;
  std::optional<long double> numeric_value() const;
  std::optional<bool> boolean_value() const;
  // True when the lexical form is valid for the datatype (always true for
  // datatypes outside the supported set).
  bool well_formed() const;

  // N-Triples style rendering, used in diagnostics and TSV output.
  std::string to_string() const;

  auto operator<=>(const Term&) const = default;
  bool operator==(const Term&) const = default;

 private:
  TermKind kind_ = TermKind::Iri;
  std::string value_;
  std::string datatype_;
  std::string lang_;
};

bool has_scheme(std::string_view iri);

struct Triple {
  Term s, p, o;
  auto operator<=>(const Triple&) const = default;
  bool operator==(const Triple&) const = default;
};

struct Quad {
  Term s, p, o, g;
  Triple triple() const { return {s, p, o}; }
  auto operator<=>(const Quad&) const = default;
  bool operator==(const Quad&) const = default;
};

// Throws InvalidTerm when the positional constraints of a quad are broken
// (literal subject, non-IRI predicate or graph).
void check_quad(const Quad& q);

std::string to_string(const Quad& q);

struct TermHash {
  std::size_t operator()(const Term& t) const noexcept;
};

}  // namespace kapps
