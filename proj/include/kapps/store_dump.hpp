#pragma once
// JSON dump of a store's complete transaction log. Restoring replays every
// transaction with its original id, timestamp and actor, so time travel
// keeps working across processes.

#include <stdexcept>
#include <string>
#include <string_view>

#include "kapps/store.hpp"

namespace kapps {

class DumpFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string dump_store(const Store& store);
// `store` must be empty (no transactions yet).
void restore_store(Store& store, std::string_view dump);

void save_store(const Store& store, const std::string& path);
void load_store(Store& store, const std::string& path);

}  // namespace kapps
