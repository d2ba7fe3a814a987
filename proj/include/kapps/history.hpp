#pragma once
// Triple-granularity change log. Every admitted transaction is recorded with
// its effective inserts and deletes, so any past state can be rebuilt.

#include <set>
#include <shared_mutex>
#include <stdexcept>
#include <string>
#include <vector>

#include "kapps/store.hpp"

namespace kapps {

struct HistoryEntry {
  TxnId txn = 0;
  Timestamp timestamp{};
  std::string actor;
  std::set<Quad> inserts;
  std::set<Quad> deletes;
};

struct NetChange {
  std::set<Quad> inserts;
  std::set<Quad> deletes;
};

class HistoryOutOfRange : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

class HistoryLog {
 public:
  // Called from the store's write path only. Ids must be dense.
  void record(HistoryEntry entry);

  std::size_t size() const;
  TxnId head() const;
  std::vector<HistoryEntry> entries() const;
  HistoryEntry entry(TxnId txn) const;

  // Reverse-applies entries head..k+1 to `head_state`.
  Snapshot state_at(const Snapshot& head_state, TxnId txn) const;
  // Last transaction whose timestamp is <= when (0 if none).
  TxnId txn_at(Timestamp when) const;
  NetChange diff_range(TxnId from, TxnId to) const;

 private:
  mutable std::shared_mutex mu_;
  std::vector<HistoryEntry> entries_;
};

}  // namespace kapps
