#pragma once
// Ontologies, shapes and fixtures compiled into the library.

#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace kapps {

const std::map<std::string, std::string_view>& resource_table();

// `name` is the path below data/, e.g. "shapes/flexconveyor_shapes.ttl".
std::string_view resource(std::string_view name);
std::vector<std::string> resource_names(std::string_view prefix = {});

}  // namespace kapps
