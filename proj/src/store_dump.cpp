#include "kapps/store_dump.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "kapps/history.hpp"
#include "kapps/timeutil.hpp"

namespace kapps {

using nlohmann::json;

namespace {

constexpr const char* kFormat = "kapps-store-dump";

json term_json(const Term& t) {
  if (t.is_iri()) return {{"iri", t.value()}};
  if (t.is_blank()) return {{"blank", t.value()}};
  json j = {{"lexical", t.value()}, {"datatype", t.datatype()}};
  if (!t.lang().empty()) j["lang"] = t.lang();
  return j;
}

Term json_term(const json& j) {
  if (j.contains("iri")) return Term::iri(j.at("iri").get<std::string>());
  if (j.contains("blank")) return Term::blank(j.at("blank").get<std::string>());
  return Term::literal(j.at("lexical").get<std::string>(), j.value("datatype", std::string()),
                       j.value("lang", std::string()));
}

json quads_json(const std::set<Quad>& quads) {
  json out = json::array();
  for (const auto& q : quads) out.push_back({term_json(q.s), term_json(q.p), term_json(q.o), term_json(q.g)});
  return out;
}

std::set<Quad> json_quads(const json& arr) {
  std::set<Quad> out;
  for (const auto& q : arr) {
    if (!q.is_array() || q.size() != 4) throw DumpFormatError("quad must be a 4-element array");
    out.insert({json_term(q[0]), json_term(q[1]), json_term(q[2]), json_term(q[3])});
  }
  return out;
}

}  // namespace

std::string dump_store(const Store& store) {
  json txns = json::array();
  for (const auto& e : store.history().entries())
    txns.push_back({{"txn", e.txn},
                    {"timestamp", format_timestamp(e.timestamp)},
                    {"actor", e.actor},
                    {"insert", quads_json(e.inserts)},
                    {"delete", quads_json(e.deletes)}});
  return json{{"format", kFormat}, {"version", 1}, {"transactions", txns}}.dump(1) + "\n";
}

void restore_store(Store& store, std::string_view dump) {
  if (store.head() != 0) throw std::logic_error("restore_store needs an empty store");
  json doc;
  try {
    doc = json::parse(dump);
    if (doc.value("format", std::string()) != kFormat) throw DumpFormatError("not a store dump");
    TxnId expect = 1;
    for (const auto& t : doc.at("transactions")) {
      if (t.at("txn").get<TxnId>() != expect)
        throw DumpFormatError("transaction ids must be dense from 1");
      TransactionDelta d;
      d.actor = t.at("actor").get<std::string>();
      d.timestamp = parse_timestamp(t.at("timestamp").get<std::string>());
      if (!d.timestamp) throw DumpFormatError("bad timestamp in transaction " + std::to_string(expect));
      d.inserts = json_quads(t.at("insert"));
      d.deletes = json_quads(t.at("delete"));
      store.replay(std::move(d));
      ++expect;
    }
  } catch (const json::exception& e) {
    throw DumpFormatError(std::string("malformed store dump: ") + e.what());
  } catch (const MalformedDelta& e) {
    throw DumpFormatError(std::string("inconsistent store dump: ") + e.what());
  }
}

void save_store(const Store& store, const std::string& path) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    out << dump_store(store);
    if (!out) throw std::runtime_error("cannot write " + tmp);
  }
  std::rename(tmp.c_str(), path.c_str());
}

void load_store(Store& store, const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  restore_store(store, ss.str());
}

}  // namespace kapps
