#pragma once
// Service middleware: registration of services and workflows in the graph,
// discovery by query, invocation over an addressable transport, and the
// connector contract for protocol mediation.

#include <condition_variable>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "kapps/ogm.hpp"
#include "kapps/store.hpp"
#include "kapps/term.hpp"

namespace kapps::mw {

using Args = std::map<std::string, Term>;

struct ParameterSpec {
  std::string name;
  std::string datatype;
};

struct WorkflowDescriptor {
  std::string workflow_iri;
  std::string workflow_class;
  std::vector<ParameterSpec> parameters;
  ParameterSpec outcome;
};

struct ServiceDescriptor {
  std::string service_iri;
  std::string service_class = vocab::kSvc + "Service";
  std::optional<std::string> provided_by;
  std::optional<std::string> address;  // filled in by register_service
  std::vector<WorkflowDescriptor> workflows;
};

enum class FaultKind { TransportUnreachable, ArgumentMismatch, HandlerFault, UnknownWorkflow };

std::string to_string(FaultKind kind);
std::optional<FaultKind> parse_fault_kind(const std::string& text);

struct Fault {
  FaultKind kind = FaultKind::HandlerFault;
  std::string detail;
  // Serialized validation report when a handler's commit was rejected.
  std::optional<std::string> report;
  std::optional<std::string> source_constraint_component;
  std::optional<std::string> focus_node;
  std::optional<std::string> message;
};

struct InvocationRequest {
  std::string workflow;
  Args args;
};

struct InvocationResult {
  bool ok = false;
  std::optional<Term> outcome;
  std::optional<Fault> fault;

  static InvocationResult success(Term value) { return {true, std::move(value), std::nullopt}; }
  static InvocationResult failure(FaultKind kind, std::string detail) {
    return {false, std::nullopt, Fault{kind, std::move(detail), {}, {}, {}, {}}};
  }
};

// Wire form used by socket transports.
std::string encode_request(const InvocationRequest& req);
InvocationRequest decode_request(const std::string& text);
std::string encode_result(const InvocationResult& res);
InvocationResult decode_result(const std::string& text);

using Endpoint = std::function<InvocationResult(const InvocationRequest&)>;

// Addressable request/response channel.
class Transport {
 public:
  virtual ~Transport() = default;
  // Allocates an address for `node_id` and routes requests to `endpoint`.
  virtual std::string bind(const std::string& node_id, Endpoint endpoint) = 0;
  virtual void unbind(const std::string& address) = 0;
  // Never throws for delivery problems; those come back as
  // transport-unreachable faults.
  virtual InvocationResult send(const std::string& address, const InvocationRequest& req) = 0;
};

// In-process transport with `kapps-local://<node-id>` addresses.
class LocalNetwork : public Transport {
 public:
  std::string bind(const std::string& node_id, Endpoint endpoint) override;
  void unbind(const std::string& address) override;
  InvocationResult send(const std::string& address, const InvocationRequest& req) override;
  std::size_t delivered() const;

 private:
  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<Endpoint>> routes_;
  std::size_t delivered_ = 0;
};

// HTTP transport on 127.0.0.1: one POST per invocation, JSON payloads.
class HttpTransport : public Transport {
 public:
  HttpTransport();
  ~HttpTransport() override;
  std::string bind(const std::string& node_id, Endpoint endpoint) override;
  void unbind(const std::string& address) override;
  InvocationResult send(const std::string& address, const InvocationRequest& req) override;

 private:
  struct Server;
  std::mutex mu_;
  std::map<std::string, std::unique_ptr<Server>> servers_;
};

class UnknownService : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

using Handler = std::function<Term(const Args&)>;

struct Discovered {
  std::string workflow_iri;
  std::string address;
  bool operator==(const Discovered&) const = default;
};

// Workflows of `workflow_class` or any subclass whose hosting service
// currently carries an address, ordered by workflow IRI. With `provider`,
// only services provided by that resource are considered.
std::vector<Discovered> discover(const std::string& workflow_class, const Snapshot& view,
                                 const std::optional<std::string>& provider = std::nullopt);

// Number of typed service individuals, online or not.
std::size_t count_services(const Snapshot& view);

// One middleware instance wraps one service. Handler executions are
// serialized per instance.
class Middleware {
 public:
  Middleware(std::string node_id, ogm::Ogm& ogm, Transport& transport);
  ~Middleware();
  Middleware(const Middleware&) = delete;
  Middleware& operator=(const Middleware&) = delete;

  TxnId register_service(ServiceDescriptor descriptor, std::map<std::string, Handler> handlers);
  // Retracts the address; service and workflow individuals stay.
  TxnId deregister_service();

  std::vector<Discovered> discover(const std::string& workflow_class,
                                   const std::optional<std::string>& provider = std::nullopt) const;
  InvocationResult invoke(const std::string& workflow_iri, const std::string& address,
                          const Args& args) const;

  const std::string& node_id() const { return node_id_; }
  const std::optional<std::string>& address() const { return address_; }
  const ServiceDescriptor& descriptor() const { return descriptor_; }
  ogm::Ogm& ogm() const { return ogm_; }

 private:
  InvocationResult dispatch(const InvocationRequest& req);

  std::string node_id_;
  ogm::Ogm& ogm_;
  Transport& transport_;
  ServiceDescriptor descriptor_;
  std::map<std::string, Handler> handlers_;
  std::optional<std::string> address_;
  std::mutex handler_mu_;
};

// Connector contract ---------------------------------------------------------

struct Message {
  std::string topic;
  std::map<std::string, Term> fields;
  bool operator==(const Message&) const = default;
};

class NotConnected : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class Connector {
 public:
  virtual ~Connector() = default;
  virtual void connect() = 0;
  virtual void disconnect() = 0;
  virtual bool connected() const = 0;
  virtual void provide(const Message& message) = 0;
  // Next message, or nullopt when none is pending.
  virtual std::optional<Message> consume() = 0;
};

class LoopbackConnector : public Connector {
 public:
  void connect() override;
  void disconnect() override;
  bool connected() const override;
  void provide(const Message& message) override;
  std::optional<Message> consume() override;

 private:
  mutable std::mutex mu_;
  bool connected_ = false;
  std::deque<Message> queue_;
};

struct Recording {
  std::string channel;
  std::string unit;
  std::vector<std::pair<double, double>> samples;  // (t seconds, value)
};

class RecordingFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// CSV: header `<channel>,<unit>`, then `t_seconds,value` rows with strictly
// increasing t.
Recording parse_recording(const std::string& text, const std::string& source = "<memory>");
Recording read_recording(const std::string& path);
std::string format_recording(const Recording& rec);

// Serves recorded samples, one message per sample, channels interleaved by
// time. Messages on topic "sample" carry channel, unit, t and value.
class ReplayConnector : public Connector {
 public:
  explicit ReplayConnector(std::vector<std::string> paths);
  explicit ReplayConnector(std::vector<Recording> recordings);
  void connect() override;
  void disconnect() override;
  bool connected() const override { return connected_; }
  // Accepted and kept for inspection; the replay source is read-only.
  void provide(const Message& message) override;
  std::optional<Message> consume() override;
  const std::vector<Message>& provided() const { return provided_; }
  const std::vector<Recording>& recordings() const { return recordings_; }

 private:
  std::vector<std::string> paths_;
  std::vector<Recording> recordings_;
  std::vector<std::size_t> cursor_;
  std::vector<Message> provided_;
  bool connected_ = false;
};

}  // namespace kapps::mw
