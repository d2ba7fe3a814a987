#include "kapps/middleware.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "kapps/shacl.hpp"
#include "kapps/sparql.hpp"

namespace kapps::mw {

using nlohmann::json;

namespace {

const std::string kLocalScheme = "kapps-local://";

std::string svc(const std::string& l) { return vocab::kSvc + l; }

json term_json(const Term& t) {
  if (t.is_iri()) return json{{"iri", t.value()}};
  json j{{"lexical", t.value()}, {"datatype", t.datatype()}};
  if (!t.lang().empty()) j["lang"] = t.lang();
  return j;
}

Term json_term(const json& j) {
  if (j.contains("iri")) return Term::iri(j.at("iri").get<std::string>());
  return Term::literal(j.at("lexical").get<std::string>(), j.value("datatype", std::string{}),
                       j.value("lang", std::string{}));
}

std::string datatype_of(const Term& t) {
  return t.datatype().empty() ? vocab::xsd::string : t.datatype();
}

}  // namespace

std::string to_string(FaultKind kind) {
  switch (kind) {
    case FaultKind::TransportUnreachable: return "transport-unreachable";
    case FaultKind::ArgumentMismatch: return "argument-mismatch";
    case FaultKind::HandlerFault: return "handler-fault";
    case FaultKind::UnknownWorkflow: return "unknown-workflow";
  }
  return "handler-fault";
}

std::optional<FaultKind> parse_fault_kind(const std::string& text) {
  for (auto k : {FaultKind::TransportUnreachable, FaultKind::ArgumentMismatch,
                 FaultKind::HandlerFault, FaultKind::UnknownWorkflow})
    if (to_string(k) == text) return k;
  return std::nullopt;
}

std::string encode_request(const InvocationRequest& req) {
  json args = json::object();
  for (const auto& [k, v] : req.args) args[k] = term_json(v);
  return json{{"workflow", req.workflow}, {"args", args}}.dump();
}

InvocationRequest decode_request(const std::string& text) {
  json j = json::parse(text);
  InvocationRequest req;
  req.workflow = j.at("workflow").get<std::string>();
  for (const auto& [k, v] : j.at("args").items()) req.args.emplace(k, json_term(v));
  return req;
}

std::string encode_result(const InvocationResult& res) {
  json j{{"ok", res.ok}};
  if (res.outcome) j["outcome"] = term_json(*res.outcome);
  if (res.fault) {
    json f{{"kind", to_string(res.fault->kind)}, {"detail", res.fault->detail}};
    if (res.fault->report) f["report"] = *res.fault->report;
    if (res.fault->source_constraint_component)
      f["sourceConstraintComponent"] = *res.fault->source_constraint_component;
    if (res.fault->focus_node) f["focusNode"] = *res.fault->focus_node;
    if (res.fault->message) f["message"] = *res.fault->message;
    j["fault"] = f;
  }
  return j.dump();
}

InvocationResult decode_result(const std::string& text) {
  json j = json::parse(text);
  InvocationResult res;
  res.ok = j.at("ok").get<bool>();
  if (j.contains("outcome")) res.outcome = json_term(j.at("outcome"));
  if (j.contains("fault")) {
    const json& f = j.at("fault");
    Fault fault;
    fault.kind = parse_fault_kind(f.at("kind").get<std::string>()).value_or(FaultKind::HandlerFault);
    fault.detail = f.value("detail", std::string{});
    if (f.contains("report")) fault.report = f.at("report").get<std::string>();
    if (f.contains("sourceConstraintComponent"))
      fault.source_constraint_component = f.at("sourceConstraintComponent").get<std::string>();
    if (f.contains("focusNode")) fault.focus_node = f.at("focusNode").get<std::string>();
    if (f.contains("message")) fault.message = f.at("message").get<std::string>();
    res.fault = fault;
  }
  return res;
}

// LocalNetwork ---------------------------------------------------------------

std::string LocalNetwork::bind(const std::string& node_id, Endpoint endpoint) {
  std::string address = kLocalScheme + node_id;
  std::lock_guard lock(mu_);
  routes_[address] = std::make_shared<Endpoint>(std::move(endpoint));
  return address;
}

void LocalNetwork::unbind(const std::string& address) {
  std::lock_guard lock(mu_);
  routes_.erase(address);
}

InvocationResult LocalNetwork::send(const std::string& address, const InvocationRequest& req) {
  std::shared_ptr<Endpoint> target;
  {
    std::lock_guard lock(mu_);
    auto it = routes_.find(address);
    if (it == routes_.end())
      return InvocationResult::failure(FaultKind::TransportUnreachable, "no endpoint at " + address);
    target = it->second;
    ++delivered_;
  }
  return (*target)(req);
}

std::size_t LocalNetwork::delivered() const {
  std::lock_guard lock(mu_);
  return delivered_;
}

// Discovery --------------------------------------------------------------------

std::vector<Discovered> discover(const std::string& workflow_class, const Snapshot& view,
                                 const std::optional<std::string>& provider) {
  // Subclass closure first; the query engine has no property paths.
  std::set<std::string> classes;
  std::vector<std::string> stack{workflow_class};
  while (!stack.empty()) {
    std::string c = stack.back();
    stack.pop_back();
    if (!classes.insert(c).second) continue;
    for (const auto& t : view.match_triples(std::nullopt, Term::iri(vocab::rdfs::subClassOf), Term::iri(c)))
      if (t.s.is_iri()) stack.push_back(t.s.value());
  }
  std::set<std::pair<std::string, std::string>> hits;
  for (const auto& c : classes) {
    std::string q = "PREFIX svc: <" + vocab::kSvc + ">\n"
                    "SELECT ?w ?a WHERE { ?w a <" + c + "> . ?s svc:hasWorkflow ?w . ?s svc:hasAddress ?a . " +
                    (provider ? "?s svc:isProvidedBy <" + *provider + "> . " : std::string()) + "}";
    auto res = sparql::evaluate(sparql::parse_query(q), view);
    for (const auto& row : res.rows) hits.insert({row.at("w").value(), row.at("a").value()});
  }
  std::vector<Discovered> out;
  for (const auto& [w, a] : hits) out.push_back({w, a});
  return out;
}

std::size_t count_services(const Snapshot& view) {
  std::set<std::string> classes;
  std::vector<std::string> stack{svc("Service")};
  while (!stack.empty()) {
    std::string c = stack.back();
    stack.pop_back();
    if (!classes.insert(c).second) continue;
    for (const auto& t : view.match_triples(std::nullopt, Term::iri(vocab::rdfs::subClassOf), Term::iri(c)))
      if (t.s.is_iri()) stack.push_back(t.s.value());
  }
  std::set<Term> services;
  for (const auto& c : classes)
    for (const auto& t : view.match_triples(std::nullopt, Term::iri(vocab::rdf::type), Term::iri(c)))
      services.insert(t.s);
  return services.size();
}

// Middleware -------------------------------------------------------------------

Middleware::Middleware(std::string node_id, ogm::Ogm& ogm, Transport& transport)
    : node_id_(std::move(node_id)), ogm_(ogm), transport_(transport) {}

Middleware::~Middleware() {
  if (address_) transport_.unbind(*address_);
}

TxnId Middleware::register_service(ServiceDescriptor descriptor,
                                   std::map<std::string, Handler> handlers) {
  if (!address_) address_ = transport_.bind(node_id_, [this](const InvocationRequest& r) { return dispatch(r); });
  {
    std::lock_guard lock(handler_mu_);
    handlers_ = std::move(handlers);
  }
  descriptor.address = address_;
  descriptor_ = descriptor;

  Snapshot view = ogm_.snapshot();
  auto typed = [&](const std::string& iri) {
    return !view.match_triples(Term::iri(iri), Term::iri(vocab::rdf::type), std::nullopt).empty();
  };
  std::vector<ogm::ObjectPtr> batch;
  ogm::ObjectPtr service = typed(descriptor.service_iri)
                               ? ogm_.fetch(descriptor.service_iri, descriptor.service_class)
                               : ogm_.create(descriptor.service_class, descriptor.service_iri);
  std::vector<ogm::Value> workflows;
  for (const auto& w : descriptor.workflows) {
    ogm::ObjectPtr wf;
    if (typed(w.workflow_iri)) {
      wf = ogm_.fetch(w.workflow_iri, w.workflow_class);
    } else {
      wf = ogm_.create(w.workflow_class, w.workflow_iri);
    }
    std::vector<ogm::Value> names;
    for (const auto& p : w.parameters) names.emplace_back(Term::string(p.name));
    wf->set(svc("hasArgument"), names);
    workflows.emplace_back(ogm::ObjectRef{w.workflow_iri, wf});
  }
  service->set(svc("hasWorkflow"), workflows);
  if (descriptor.provided_by) service->set_ref(svc("isProvidedBy"), *descriptor.provided_by);
  service->set_literal(svc("hasAddress"), Term::any_uri(*address_));
  batch.push_back(service);
  return ogm_.commit(batch);
}

TxnId Middleware::deregister_service() {
  if (descriptor_.service_iri.empty()) throw UnknownService("no service registered on " + node_id_);
  ogm::ObjectPtr service;
  try {
    service = ogm_.fetch(descriptor_.service_iri, descriptor_.service_class);
  } catch (const ogm::UnknownInstance& e) {
    throw UnknownService(e.what());
  }
  if (address_) {
    transport_.unbind(*address_);
    address_.reset();
  }
  if (!service->has(svc("hasAddress"))) return ogm_.snapshot().txn();
  service->clear(svc("hasAddress"));
  return ogm_.commit(service);
}

std::vector<Discovered> Middleware::discover(const std::string& workflow_class,
                                            const std::optional<std::string>& provider) const {
  return mw::discover(workflow_class, ogm_.snapshot(), provider);
}

InvocationResult Middleware::invoke(const std::string& workflow_iri, const std::string& address,
                                    const Args& args) const {
  return transport_.send(address, {workflow_iri, args});
}

InvocationResult Middleware::dispatch(const InvocationRequest& req) {
  const WorkflowDescriptor* wd = nullptr;
  for (const auto& w : descriptor_.workflows)
    if (w.workflow_iri == req.workflow) wd = &w;
  if (!wd) return InvocationResult::failure(FaultKind::UnknownWorkflow, req.workflow);

  for (const auto& p : wd->parameters) {
    auto it = req.args.find(p.name);
    if (it == req.args.end())
      return InvocationResult::failure(FaultKind::ArgumentMismatch, "missing argument " + p.name);
    if (!it->second.is_literal() || datatype_of(it->second) != p.datatype || !it->second.well_formed())
      return InvocationResult::failure(FaultKind::ArgumentMismatch,
                                       "argument " + p.name + " must be a <" + p.datatype + ">, got " +
                                           it->second.to_string());
  }
  for (const auto& [name, v] : req.args) {
    bool declared = std::any_of(wd->parameters.begin(), wd->parameters.end(),
                                [&](const ParameterSpec& p) { return p.name == name; });
    if (!declared) return InvocationResult::failure(FaultKind::ArgumentMismatch, "unexpected argument " + name);
  }

  std::lock_guard lock(handler_mu_);
  auto h = handlers_.find(req.workflow);
  if (h == handlers_.end()) return InvocationResult::failure(FaultKind::UnknownWorkflow, req.workflow);
  try {
    return InvocationResult::success(h->second(req.args));
  } catch (const TransactionRejected& e) {
    auto res = InvocationResult::failure(FaultKind::HandlerFault, e.what());
    res.fault->report = shacl::serialize_report(e.report());
    for (const auto& r : e.report().results) {
      if (r.severity != vocab::sh::Violation) continue;
      res.fault->source_constraint_component = r.source_constraint_component;
      res.fault->focus_node = r.focus_node.value();
      res.fault->message = r.message;
      break;
    }
    return res;
  } catch (const std::exception& e) {
    return InvocationResult::failure(FaultKind::HandlerFault, e.what());
  }
}

// Connectors -------------------------------------------------------------------

void LoopbackConnector::connect() {
  std::lock_guard lock(mu_);
  connected_ = true;
}

void LoopbackConnector::disconnect() {
  std::lock_guard lock(mu_);
  connected_ = false;
  queue_.clear();
}

bool LoopbackConnector::connected() const {
  std::lock_guard lock(mu_);
  return connected_;
}

void LoopbackConnector::provide(const Message& message) {
  std::lock_guard lock(mu_);
  if (!connected_) throw NotConnected("loopback connector is not connected");
  queue_.push_back(message);
}

std::optional<Message> LoopbackConnector::consume() {
  std::lock_guard lock(mu_);
  if (!connected_) throw NotConnected("loopback connector is not connected");
  if (queue_.empty()) return std::nullopt;
  Message m = std::move(queue_.front());
  queue_.pop_front();
  return m;
}

namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_number(const std::string& text, const std::string& where) {
  std::string t = trim(text);
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(t, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (t.empty() || used != t.size()) throw RecordingFormatError(where + ": not a number: '" + t + "'");
  return v;
}

}  // namespace

Recording parse_recording(const std::string& text, const std::string& source) {
  std::istringstream in(text);
  std::string line;
  Recording rec;
  int lineno = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto comma = line.find(',');
    std::string where = source + ":" + std::to_string(lineno);
    if (comma == std::string::npos || line.find(',', comma + 1) != std::string::npos)
      throw RecordingFormatError(where + ": expected two comma-separated fields");
    std::string a = trim(line.substr(0, comma)), b = trim(line.substr(comma + 1));
    if (!header) {
      if (a.empty()) throw RecordingFormatError(where + ": empty channel name");
      rec.channel = a;
      rec.unit = b;
      header = true;
      continue;
    }
    double t = parse_number(a, where), v = parse_number(b, where);
    if (!rec.samples.empty() && t <= rec.samples.back().first)
      throw RecordingFormatError(where + ": timestamps must increase strictly");
    rec.samples.emplace_back(t, v);
  }
  if (!header) throw RecordingFormatError(source + ": missing header line");
  return rec;
}

Recording read_recording(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw RecordingFormatError("cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_recording(buf.str(), path);
}

std::string format_recording(const Recording& rec) {
  // Shortest form that reads back to the same double.
  auto num = [](double x) {
    char buf[64];
    auto r = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, r.ptr);
  };
  std::string out = rec.channel + "," + rec.unit + "\n";
  for (const auto& [t, v] : rec.samples) out += num(t) + "," + num(v) + "\n";
  return out;
}

ReplayConnector::ReplayConnector(std::vector<std::string> paths) : paths_(std::move(paths)) {}

ReplayConnector::ReplayConnector(std::vector<Recording> recordings)
    : recordings_(std::move(recordings)) {}

void ReplayConnector::connect() {
  if (!paths_.empty()) {
    recordings_.clear();
    for (const auto& p : paths_) recordings_.push_back(read_recording(p));
  }
  cursor_.assign(recordings_.size(), 0);
  connected_ = true;
}

void ReplayConnector::disconnect() { connected_ = false; }

void ReplayConnector::provide(const Message& message) {
  if (!connected_) throw NotConnected("replay connector is not connected");
  provided_.push_back(message);
}

std::optional<Message> ReplayConnector::consume() {
  if (!connected_) throw NotConnected("replay connector is not connected");
  std::optional<std::size_t> next;
  for (std::size_t i = 0; i < recordings_.size(); ++i) {
    if (cursor_[i] >= recordings_[i].samples.size()) continue;
    if (!next || recordings_[i].samples[cursor_[i]].first < recordings_[*next].samples[cursor_[*next]].first)
      next = i;
  }
  if (!next) return std::nullopt;
  const Recording& r = recordings_[*next];
  auto [t, v] = r.samples[cursor_[*next]++];
  Message m;
  m.topic = "sample";
  m.fields["channel"] = Term::string(r.channel);
  m.fields["unit"] = Term::string(r.unit);
  m.fields["t"] = Term::dbl(t);
  m.fields["value"] = Term::dbl(v);
  return m;
}

}  // namespace kapps::mw
