#pragma once
// Turtle subset codec: prefixes, prefixed names, `a`, predicate/object lists,
// blank-node property lists, short and long strings, numeric and boolean
// literals, datatypes and language tags. Collections are rejected.

#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "kapps/term.hpp"

namespace kapps {

using PrefixMap = std::map<std::string, std::string>;

struct TurtleDocument {
  PrefixMap prefixes;
  std::vector<Triple> triples;
};

class TurtleError : public std::runtime_error {
 public:
  TurtleError(const std::string& what, int line, int column, std::string token);
  int line() const { return line_; }
  int column() const { return column_; }
  const std::string& token() const { return token_; }

 private:
  int line_;
  int column_;
  std::string token_;
};

TurtleDocument parse_turtle(std::string_view text, std::string_view base = {});

// Deterministic output: IRI subjects in lexicographic order, then blank
// nodes relabeled _:b1, _:b2, ... in first-use order. Predicates list
// rdf:type first. Non-string literals are always written in "lex"^^dt form.
std::string serialize_turtle(const std::vector<Triple>& triples, const PrefixMap& prefixes);
std::string serialize_turtle(const std::vector<Quad>& quads, const PrefixMap& prefixes);

// rdf, rdfs, xsd, owl, sh, prov plus the factory vocabularies.
const PrefixMap& standard_prefixes();

// Compacts an IRI to prefix:local when a prefix covers it and the local part
// is a valid name; otherwise returns <iri>.
std::string compact_iri(const std::string& iri, const PrefixMap& prefixes);

}  // namespace kapps
