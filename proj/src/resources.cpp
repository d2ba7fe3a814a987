#include "kapps/resources.hpp"

namespace kapps {

std::string_view resource(std::string_view name) {
  const auto& t = resource_table();
  auto it = t.find(std::string(name));
  if (it == t.end()) throw std::out_of_range("no bundled resource named " + std::string(name));
  return it->second;
}

std::vector<std::string> resource_names(std::string_view prefix) {
  std::vector<std::string> out;
  for (const auto& [k, v] : resource_table())
    if (k.rfind(prefix, 0) == 0) out.push_back(k);
  return out;
}

}  // namespace kapps
