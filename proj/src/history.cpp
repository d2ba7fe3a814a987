#include "kapps/history.hpp"

#include <algorithm>
#include <mutex>

namespace kapps {

void HistoryLog::record(HistoryEntry entry) {
  std::unique_lock lock(mu_);
  if (entry.txn != entries_.size() + 1)
    throw std::logic_error("history ids must be dense: expected " +
                           std::to_string(entries_.size() + 1) + ", got " +
                           std::to_string(entry.txn));
  entries_.push_back(std::move(entry));
}

std::size_t HistoryLog::size() const {
  std::shared_lock lock(mu_);
  return entries_.size();
}

TxnId HistoryLog::head() const { return size(); }

std::vector<HistoryEntry> HistoryLog::entries() const {
  std::shared_lock lock(mu_);
  return entries_;
}

HistoryEntry HistoryLog::entry(TxnId txn) const {
  std::shared_lock lock(mu_);
  if (txn == 0 || txn > entries_.size())
    throw HistoryOutOfRange("no history entry " + std::to_string(txn));
  return entries_[txn - 1];
}

Snapshot HistoryLog::state_at(const Snapshot& head_state, TxnId txn) const {
  TxnId head = head_state.txn();
  if (txn > head) throw HistoryOutOfRange("transaction " + std::to_string(txn) +
                                          " is beyond head " + std::to_string(head));
  if (txn == head) return head_state;
  auto all = head_state.quads();
  std::set<Quad> quads(all.begin(), all.end());
  std::shared_lock lock(mu_);
  for (TxnId k = head; k > txn; --k) {
    const auto& e = entries_[k - 1];
    for (const auto& q : e.inserts) quads.erase(q);
    for (const auto& q : e.deletes) quads.insert(q);
  }
  return Snapshot::from_quads(quads, txn);
}

TxnId HistoryLog::txn_at(Timestamp when) const {
  std::shared_lock lock(mu_);
  auto it = std::upper_bound(entries_.begin(), entries_.end(), when,
                             [](Timestamp t, const HistoryEntry& e) { return t < e.timestamp; });
  return static_cast<TxnId>(it - entries_.begin());
}

NetChange HistoryLog::diff_range(TxnId from, TxnId to) const {
  std::shared_lock lock(mu_);
  if (from > to) throw HistoryOutOfRange("diff_range requires from <= to");
  if (to > entries_.size())
    throw HistoryOutOfRange("transaction " + std::to_string(to) + " is beyond head");
  NetChange net;
  for (TxnId k = from + 1; k <= to; ++k) {
    const auto& e = entries_[k - 1];
    for (const auto& q : e.deletes) {
      if (!net.inserts.erase(q)) net.deletes.insert(q);
    }
    for (const auto& q : e.inserts) {
      if (!net.deletes.erase(q)) net.inserts.insert(q);
    }
  }
  return net;
}

}  // namespace kapps
