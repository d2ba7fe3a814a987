#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "kapps/term.hpp"

namespace kapps {

struct ValidationResult {
  Term focus_node;
  std::optional<Term> result_path;
  std::optional<Term> value;
  std::string source_constraint_component;  // full IRI
  std::string severity;                     // full IRI
  std::string message;
  Term source_shape;
  // Description of a blank-node source shape, copied into serialized reports
  // so the report stays self-contained.
  std::vector<std::pair<Term, Term>> shape_description;

  auto key() const {
    return std::tie(focus_node, source_shape, source_constraint_component, result_path, value,
                    severity, message);
  }
  bool operator<(const ValidationResult& o) const { return key() < o.key(); }
  bool operator==(const ValidationResult& o) const { return key() == o.key(); }
};

struct ValidationReport {
  bool conforms = true;
  std::vector<ValidationResult> results;

  // Only sh:Violation results block admission.
  bool has_violations() const;
  // Sorts results and recomputes `conforms`.
  void finalize();
};

}  // namespace kapps
