#include "kapps/unscrew.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "kapps/resources.hpp"
#include "kapps/shacl.hpp"
#include "kapps/sparql.hpp"
#include "kapps/timeutil.hpp"

namespace kapps::uc1 {

namespace fs = std::filesystem;
using nlohmann::json;

std::string uc(const std::string& local) { return vocab::kUc + local; }

namespace {

const std::string kProv = vocab::kProv;

struct ParamProperty {
  const char* local;
  double DetectionParameters::*field;
};

const ParamProperty kParamProps[] = {
    {"hasTorqueLowerBound", &DetectionParameters::m_lower},
    {"hasTorqueUpperBound", &DetectionParameters::m_upper},
    {"hasMaxAxialForce", &DetectionParameters::f_max},
    {"hasMinTravel", &DetectionParameters::travel_min},
    {"hasMaxTravel", &DetectionParameters::travel_max},
};

const std::vector<std::string> kChannels = {kTorqueChannel, kForceChannel, kPositionChannel};

std::string bracket(const std::string& iri) { return "<" + iri + ">"; }

sparql::QueryResult run(const Snapshot& view, const std::string& text) {
  return sparql::evaluate(sparql::parse_query(text), view);
}

double num(const Term& t, const std::string& what) {
  // Straight to double: going through long double could round twice.
  if (t.is_literal() && t.datatype() == vocab::xsd::double_ && t.well_formed()) return std::stod(t.value());
  auto v = t.numeric_value();
  if (!v) throw std::runtime_error("not a number for " + what + ": " + t.to_string());
  return static_cast<double>(*v);
}

std::string local_name(const std::string& iri) {
  auto p = iri.find_last_of("#/");
  return p == std::string::npos ? iri : iri.substr(p + 1);
}

// {channel -> record uri} from a TimeSeriesData JSON payload.
std::pair<std::string, std::string> decode_record_ref(const std::string& text) {
  try {
    auto j = json::parse(text);
    return {j.at("channel").get<std::string>(), j.at("uri").get<std::string>()};
  } catch (const json::exception& e) {
    throw MissingRecords(std::string("malformed time-series reference: ") + e.what());
  }
}

RecordUris order_records(const std::map<std::string, std::string>& by_channel, const std::string& op) {
  RecordUris r;
  auto pick = [&](const std::string& ch, std::string& out) {
    auto it = by_channel.find(ch);
    if (it == by_channel.end()) throw MissingRecords(op + " has no " + ch + " record");
    out = it->second;
  };
  pick(kTorqueChannel, r.torque);
  pick(kForceChannel, r.force);
  pick(kPositionChannel, r.position);
  return r;
}

RecordUris records_of(const ogm::GraphObject& op) {
  std::map<std::string, std::string> by_channel;
  for (const auto& v : op.values(uc("hasTimeSeriesData"))) {
    const auto* ref = std::get_if<ogm::ObjectRef>(&v);
    if (!ref || !ref->resolved) continue;
    auto payload = ref->resolved->literal(uc("hasJSONEncodedTimeSeriesData"));
    if (!payload) continue;
    auto [ch, uri] = decode_record_ref(payload->value());
    by_channel[ch] = uri;
  }
  return order_records(by_channel, op.iri());
}

Features features_of(const TsStore& ts, const RecordUris& r) {
  try {
    return extract_features(ts.get(r.torque), ts.get(r.force), ts.get(r.position));
  } catch (const UnknownRecord& e) {
    throw MissingRecords(e.what());
  }
}

}  // namespace

std::string to_string(Label label) {
  switch (label) {
    case Label::Success: return "success";
    case Label::MissingScrew: return "missing_screw";
    case Label::OccludedOrRoundedHead: return "occluded_or_rounded_head";
    case Label::LooseAnchor: return "loose_anchor";
    case Label::StuckScrew: return "stuck_screw";
  }
  return "stuck_screw";
}

Label parse_label(const std::string& text) {
  for (auto l : {Label::Success, Label::MissingScrew, Label::OccludedOrRoundedHead, Label::LooseAnchor,
                 Label::StuckScrew})
    if (to_string(l) == text) return l;
  throw std::invalid_argument("unknown anomaly label: " + text);
}

Features extract_features(const mw::Recording& torque, const mw::Recording& force,
                          const mw::Recording& position) {
  auto peak = [](const mw::Recording& r) {
    if (r.samples.empty()) throw MissingRecords("empty " + r.channel + " record");
    double m = r.samples.front().second;
    for (const auto& s : r.samples) m = std::max(m, s.second);
    return m;
  };
  Features f;
  f.m_peak = peak(torque);
  f.f_peak = peak(force);
  if (position.samples.empty()) throw MissingRecords("empty " + position.channel + " record");
  for (std::size_t i = 1; i < position.samples.size(); ++i)
    f.travel += std::abs(position.samples[i].second - position.samples[i - 1].second);
  return f;
}

Label classify_features(const Features& f, const DetectionParameters& p) {
  bool low_torque = f.m_peak < p.m_lower;
  if (low_torque && f.f_peak > p.f_max) return Label::OccludedOrRoundedHead;
  if (low_torque) return f.travel < p.travel_min ? Label::MissingScrew : Label::LooseAnchor;
  if (f.m_peak >= p.m_upper) return Label::StuckScrew;
  if (f.travel >= p.travel_min && f.travel <= p.travel_max) return Label::Success;
  return Label::StuckScrew;
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("percentile of an empty sample");
  std::sort(values.begin(), values.end());
  double h = (values.size() - 1) * q / 100.0;
  auto lo = static_cast<std::size_t>(std::floor(h));
  std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - lo) * (values[hi] - values[lo]);
}

DetectionParameters estimate_parameters(const std::vector<Features>& successes) {
  if (successes.empty()) throw InsufficientData("no success-labeled operations to learn from");
  std::vector<double> m, f, t;
  for (const auto& s : successes) {
    m.push_back(s.m_peak);
    f.push_back(s.f_peak);
    t.push_back(s.travel);
  }
  DetectionParameters p;
  p.m_lower = 0.8 * percentile(m, 5);
  p.m_upper = 1.2 * percentile(m, 95);
  p.f_max = 1.2 * percentile(f, 95);
  p.travel_min = 0.8 * percentile(t, 5);
  p.travel_max = 1.2 * percentile(t, 95);
  return p;
}

void load_vocabulary(Store& store) {
  store.load_graph(resource("ontology/cfc_core.ttl"), vocab::kOntologyGraph);
  store.load_graph(resource("ontology/service.ttl"), vocab::kOntologyGraph);
  store.load_graph(resource("ontology/unscrewing.ttl"), vocab::kOntologyGraph);
  store.load_graph(resource("shapes/unscrewing_shapes.ttl"), vocab::kShapesGraph);
  store.load_graph(resource("fixtures/uc1_instances.ttl"), vocab::kDefaultGraph);
}

std::unique_ptr<Store> make_store() {
  auto store = std::make_unique<Store>(shacl::make_admission_gate());
  load_vocabulary(*store);
  return store;
}

DetectionParameters read_parameters(const ogm::GraphObject& screw) {
  DetectionParameters p;
  for (const auto& pp : kParamProps) {
    auto v = screw.literal(uc(pp.local));
    if (!v) throw MissingParameters(screw.iri() + " has no " + pp.local);
    p.*pp.field = num(*v, pp.local);
  }
  return p;
}

std::optional<DetectionParameters> parameters_in(const Snapshot& view, const std::string& screw) {
  std::string q = "SELECT ?mlo ?mhi ?fmax ?plo ?phi WHERE {\n";
  const char* vars[] = {"mlo", "mhi", "fmax", "plo", "phi"};
  for (int i = 0; i < 5; ++i)
    q += "  " + bracket(screw) + " " + bracket(uc(kParamProps[i].local)) + " ?" + vars[i] + " .\n";
  q += "}";
  auto res = run(view, q);
  if (res.rows.empty()) return std::nullopt;
  DetectionParameters p;
  for (int i = 0; i < 5; ++i) p.*kParamProps[i].field = num(res.rows.front().at(vars[i]), vars[i]);
  return p;
}

// --- perception -------------------------------------------------------------

RecordUris PerceptionService::ingest(mw::Connector& source) {
  source.connect();
  std::map<std::string, mw::Recording> by_channel;
  while (auto msg = source.consume()) {
    if (msg->topic != "sample") continue;
    const auto& f = msg->fields;
    auto field = [&](const char* k) -> const Term& {
      auto it = f.find(k);
      if (it == f.end()) throw mw::RecordingFormatError(std::string("sample without ") + k);
      return it->second;
    };
    auto& rec = by_channel[field("channel").value()];
    rec.channel = field("channel").value();
    rec.unit = field("unit").value();
    double t = num(field("t"), "t");
    if (!rec.samples.empty() && t <= rec.samples.back().first)
      throw mw::RecordingFormatError(rec.channel + ": timestamps must increase strictly");
    rec.samples.emplace_back(t, num(field("value"), "value"));
  }
  source.disconnect();
  for (const auto& [ch, _] : by_channel)
    if (std::find(kChannels.begin(), kChannels.end(), ch) == kChannels.end())
      throw mw::RecordingFormatError("unexpected channel " + ch);
  for (const auto& ch : kChannels)
    if (!by_channel.count(ch)) throw mw::RecordingFormatError("no samples on channel " + ch);
  RecordUris r;
  r.torque = ts_.put(by_channel[kTorqueChannel]);
  r.force = ts_.put(by_channel[kForceChannel]);
  r.position = ts_.put(by_channel[kPositionChannel]);
  return r;
}

RecordUris PerceptionService::ingest_files(const std::vector<std::string>& csv_paths) {
  mw::ReplayConnector replay(csv_paths);
  return ingest(replay);
}

std::string PerceptionService::create_operation(const std::string& screw, const std::string& resource,
                                                const RecordUris& records) {
  std::string op_iri = ogm_.mint_iri(vocab::kEx, "UnscrewOp");
  auto op = ogm_.create(uc("UnscrewingOperation"), op_iri);
  if (!screw.empty()) op->set_ref(uc("hasScrew"), screw);
  if (!resource.empty()) op->set_ref(uc("hasResource"), resource);
  std::vector<ogm::Value> links;
  for (const auto& uri : records.all()) {
    auto rec = ts_.get(uri);
    std::string ts_iri = ogm_.mint_iri(vocab::kEx, "TimeSeries");
    auto obj = ogm_.create(uc("TimeSeriesData"), ts_iri);
    json payload = {{"channel", rec.channel}, {"unit", rec.unit}, {"uri", uri}};
    obj->set_literal(uc("hasJSONEncodedTimeSeriesData"), Term::string(payload.dump()));
    links.emplace_back(ogm::ObjectRef{ts_iri, obj});
  }
  op->set(uc("hasTimeSeriesData"), std::move(links));
  auto now = std::chrono::floor<std::chrono::microseconds>(std::chrono::system_clock::now());
  op->set_literal(uc("hasTimestamp"), Term::date_time(format_timestamp(now)));
  ogm_.commit(op);
  return op_iri;
}

// --- anomaly detection ------------------------------------------------------

Outcome DetectionService::classify(const std::string& operation) {
  ogm::ScopeSpec scope;
  scope.depth = 1;
  auto op = ogm_.fetch(operation, uc("UnscrewingOperation"), scope);
  auto screw_iri = op->ref(uc("hasScrew"));
  if (!screw_iri) throw MissingParameters(operation + " is not linked to a screw");
  auto screw = ogm_.fetch(*screw_iri, uc("Screw"));
  last_params_ = read_parameters(*screw);
  last_features_ = features_of(ts_, records_of(*op));
  Outcome out{classify_features(last_features_, last_params_)};
  op->set_literal(uc("hasSuccessStatus"), Term::boolean(out.success()));
  op->set_literal(uc("hasAnomalyLabel"), Term::string(to_string(out.label)));
  ogm_.commit(op);
  return out;
}

// --- learning ---------------------------------------------------------------

DetectionParameters LearningService::learn(const std::string& screw) {
  auto res = ogm_.query("SELECT ?op ?status WHERE { ?op " + bracket(uc("hasScrew")) + " " + bracket(screw) +
                        " . ?op " + bracket(uc("hasSuccessStatus")) + " ?status . }");
  if (static_cast<int>(res.rows.size()) < nmin_)
    throw InsufficientData(screw + " has " + std::to_string(res.rows.size()) + " completed operations, " +
                           std::to_string(nmin_) + " required");
  std::vector<Features> successes;
  ogm::ScopeSpec scope;
  scope.depth = 1;
  scope.include_properties = std::set<std::string>{uc("hasTimeSeriesData")};
  for (const auto& row : res.rows) {
    if (row.at("status").boolean_value() != true) continue;
    auto op = ogm_.fetch(row.at("op").value(), uc("UnscrewingOperation"), scope);
    successes.push_back(features_of(ts_, records_of(*op)));
  }
  DetectionParameters p = estimate_parameters(successes);
  auto obj = ogm_.fetch(screw, uc("Screw"));
  for (const auto& pp : kParamProps) obj->set_literal(uc(pp.local), Term::dbl(p.*pp.field));
  last_txn_ = ogm_.commit(obj);
  return p;
}

// --- traceability -----------------------------------------------------------

Trace trace_operation(const Store& store, const std::string& operation) {
  Snapshot head = store.snapshot();
  std::string op = bracket(operation);
  auto outcome = run(head, "SELECT ?screw ?resource ?status ?label WHERE {\n  " + op + " " +
                               bracket(uc("hasScrew")) + " ?screw .\n  " + op + " " + bracket(uc("hasResource")) +
                               " ?resource .\n  " + op + " " + bracket(uc("hasSuccessStatus")) + " ?status .\n  " +
                               op + " " + bracket(uc("hasAnomalyLabel")) + " ?label .\n}");
  if (outcome.rows.empty()) throw std::invalid_argument(operation + " is not a classified operation");
  const auto& row = outcome.rows.front();
  Trace t;
  t.operation = operation;
  t.screw = row.at("screw").value();
  t.resource = row.at("resource").value();
  t.success = row.at("status").boolean_value().value_or(false);
  t.label = parse_label(row.at("label").value());

  auto refs = run(head, "SELECT ?json WHERE {\n  " + op + " " + bracket(uc("hasTimeSeriesData")) + " ?ts .\n  ?ts " +
                            bracket(uc("hasJSONEncodedTimeSeriesData")) + " ?json .\n}");
  std::map<std::string, std::string> by_channel;
  for (const auto& r : refs.rows) {
    auto [ch, uri] = decode_record_ref(r.at("json").value());
    by_channel[ch] = uri;
  }
  t.record_uris = order_records(by_channel, operation).all();

  // The decision is the earliest activity on the operation after which the
  // current outcome holds.
  auto acts = run(head, "SELECT ?act ?actor ?time WHERE {\n  ?act " + bracket(kProv + "influenced") + " " + op +
                            " .\n  ?act " + bracket(kProv + "wasAssociatedWith") + " ?actor .\n  ?act " +
                            bracket(kProv + "endedAtTime") + " ?time .\n}");
  std::vector<std::tuple<Timestamp, std::string, std::string>> ordered;
  for (const auto& r : acts.rows) {
    auto when = parse_timestamp(r.at("time").value());
    if (when) ordered.emplace_back(*when, r.at("act").value(), r.at("actor").value());
  }
  std::sort(ordered.begin(), ordered.end());
  std::string label_q = "ASK { " + op + " " + bracket(uc("hasAnomalyLabel")) + " " +
                        Term::string(to_string(t.label)).to_string() + " . }";
  for (const auto& [when, act, actor] : ordered) {
    Snapshot then = store.state_at(when);
    if (!run(then, label_q).ask) continue;
    t.decided_at = when;
    t.activity = act;
    t.decided_by = actor;
    auto params = parameters_in(then, t.screw);
    if (!params) throw MissingParameters(t.screw + " carried no detection parameters at " + format_timestamp(when));
    t.parameters = *params;
    return t;
  }
  throw std::runtime_error("no provenance activity recorded the decision on " + operation);
}

// --- synthetic corpus -------------------------------------------------------

CycleInput synthesize(Label label, std::mt19937_64& rng, const GeneratorConfig& cfg) {
  auto U = [&](double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); };
  std::normal_distribution<double> noise(0.0, 1.0);
  auto round4 = [](double v) { return std::round(v * 1e4) / 1e4; };

  double m_peak = 0, f_peak = 0, travel = 0, torque_noise = 0.01;
  switch (label) {
    case Label::Success: m_peak = U(2, 8); f_peak = U(20, 40); travel = U(8, 12); torque_noise = 0.02; break;
    case Label::MissingScrew: m_peak = 0; f_peak = U(2, 8); travel = U(1, 3); break;
    case Label::LooseAnchor: m_peak = U(0.02, 0.06); f_peak = U(5, 15); travel = U(8, 12); break;
    case Label::OccludedOrRoundedHead: m_peak = U(0.02, 0.06); f_peak = U(60, 90); travel = U(0.5, 2); break;
    case Label::StuckScrew: m_peak = U(11, 15); f_peak = U(20, 40); travel = U(0.2, 1.5); torque_noise = 0.05; break;
  }
  double breakaway = U(0.3, 0.5);
  int n = std::max(2, static_cast<int>(std::lround(cfg.duration_s * cfg.sample_rate_hz)));
  CycleInput c;
  c.expected = label;
  c.torque = {kTorqueChannel, "N*m", {}};
  c.force = {kForceChannel, "N", {}};
  c.position = {kPositionChannel, "mm", {}};
  for (int i = 0; i < n; ++i) {
    double t = i / cfg.sample_rate_hz;
    double u = static_cast<double>(i) / (n - 1);
    // Torque builds up to the breakaway point, then settles to a running level.
    double m = u <= breakaway ? m_peak * u / breakaway
                              : m_peak * (0.05 + 0.95 * std::exp(-(u - breakaway) * 12.0));
    if (label != Label::Success) m = m_peak * std::min(1.0, u / breakaway);
    m = std::max(0.0, m + torque_noise * 0.1 * noise(rng));
    if (label == Label::MissingScrew) m = std::min(0.05, std::abs(0.01 * noise(rng)));
    double f = f_peak * std::min(1.0, u / 0.2) * (1.0 - 0.2 * std::max(0.0, (u - 0.2) / 0.8));
    // Position is monotone, so travel equals its net displacement.
    double p = u <= breakaway ? 0.0 : travel * (u - breakaway) / (1.0 - breakaway);
    c.torque.samples.emplace_back(round4(t), round4(m));
    c.force.samples.emplace_back(round4(t), round4(f));
    c.position.samples.emplace_back(round4(t), round4(p));
  }
  return c;
}

std::vector<CycleInput> generate_corpus(const GeneratorConfig& cfg) {
  std::mt19937_64 rng(cfg.seed);
  const Label faults[] = {Label::MissingScrew, Label::OccludedOrRoundedHead, Label::LooseAnchor, Label::StuckScrew};
  std::vector<CycleInput> out;
  for (int i = 0; i < cfg.count; ++i) {
    double r = std::uniform_real_distribution<double>(0, 1)(rng);
    Label l = Label::Success;
    if (r >= cfg.success_share) {
      double share = (1.0 - cfg.success_share) / 4;
      int k = std::min(3, static_cast<int>((r - cfg.success_share) / share));
      l = faults[k];
    }
    out.push_back(synthesize(l, rng, cfg));
  }
  return out;
}

namespace {

std::string cycle_dir_name(int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "cycle_%04d", index + 1);
  return buf;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + p.string());
}

}  // namespace

std::vector<std::string> cycle_files(const std::string& dir, int index) {
  fs::path d = fs::path(dir) / cycle_dir_name(index);
  std::vector<std::string> out;
  for (const auto& ch : kChannels) out.push_back((d / (ch + ".csv")).string());
  return out;
}

void write_corpus(const std::vector<CycleInput>& corpus, const std::string& dir) {
  fs::create_directories(dir);
  std::string labels = "cycle,label\n";
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& c = corpus[i];
    fs::create_directories(fs::path(dir) / cycle_dir_name(static_cast<int>(i)));
    auto files = cycle_files(dir, static_cast<int>(i));
    write_text(files[0], mw::format_recording(c.torque));
    write_text(files[1], mw::format_recording(c.force));
    write_text(files[2], mw::format_recording(c.position));
    labels += std::to_string(i + 1) + "," + (c.expected ? to_string(*c.expected) : "") + "\n";
  }
  write_text(fs::path(dir) / "labels.csv", labels);
}

std::vector<CycleInput> read_corpus(const std::string& dir) {
  if (!fs::is_directory(dir)) throw std::runtime_error("no recordings directory: " + dir);
  std::map<int, Label> labels;
  std::ifstream in(fs::path(dir) / "labels.csv");
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (header) {
      header = false;
      continue;
    }
    auto comma = line.find(',');
    if (comma == std::string::npos || comma + 1 >= line.size()) continue;
    labels[std::stoi(line.substr(0, comma))] = parse_label(line.substr(comma + 1));
  }
  std::vector<CycleInput> out;
  for (int i = 0; fs::is_directory(fs::path(dir) / cycle_dir_name(i)); ++i) {
    auto files = cycle_files(dir, i);
    CycleInput c;
    c.torque = mw::read_recording(files[0]);
    c.force = mw::read_recording(files[1]);
    c.position = mw::read_recording(files[2]);
    if (auto it = labels.find(i + 1); it != labels.end()) c.expected = it->second;
    out.push_back(std::move(c));
  }
  return out;
}

// --- closed loop ------------------------------------------------------------

namespace {

using SourceFactory = std::function<std::unique_ptr<mw::Connector>(int index)>;

// The three roles; each owns its OGM session and shares nothing else with
// the others.
struct Roles {
  ogm::Ogm perception_ogm, detection_ogm, learning_ogm;
  PerceptionService perception;
  DetectionService detection;
  LearningService learning;

  Roles(Store& store, TsStore& ts, int nmin)
      : perception_ogm(store, kPerceptionActor),
        detection_ogm(store, kDetectionActor),
        learning_ogm(store, kLearningActor),
        perception(perception_ogm, ts),
        detection(detection_ogm, ts),
        learning(learning_ogm, ts, nmin) {}
};

// Uniform driver interface over the cooperative and the service mode.
struct Driver {
  std::function<std::string(int index)> perceive;
  std::function<void(const std::string& op)> classify;
  // Empty string on success, else the error text.
  std::function<std::string(const std::string& screw)> learn;
};

LoopReport drive(const LoopConfig& cfg, int corpus_size, const std::vector<std::optional<Label>>& expected,
                 Store& store, TsStore& ts, Driver& d) {
  LoopReport report;
  if (cfg.cycles <= 0) return report;
  if (corpus_size == 0) throw std::invalid_argument("empty recording corpus");
  for (int c = 1; c <= cfg.cycles; ++c) {
    int idx = (c - 1) % corpus_size;
    std::string op = d.perceive(idx);
    d.classify(op);
    Trace tr = trace_operation(store, op);
    CycleRecord rec;
    rec.cycle = c;
    rec.operation = op;
    rec.label = tr.label;
    rec.expected = expected[idx];
    rec.parameters = tr.parameters;
    RecordUris r{tr.record_uris[0], tr.record_uris[1], tr.record_uris[2]};
    rec.features = features_of(ts, r);
    report.cycles.push_back(rec);

    if (cfg.learn_every > 0 && c % cfg.learn_every == 0) {
      LearnEvent ev;
      ev.after_cycle = c;
      if (auto p = parameters_in(store.snapshot(), cfg.screw)) ev.before = *p;
      TxnId before = store.head();
      ev.error = d.learn(cfg.screw);
      ev.applied = ev.error.empty();
      if (auto p = parameters_in(store.snapshot(), cfg.screw)) ev.after = *p;
      ev.txn = store.head() != before ? store.head() : 0;
      report.learn_events.push_back(ev);
    }
  }
  return report;
}

LoopReport run_with(const LoopConfig& cfg, int corpus_size, const std::vector<std::optional<Label>>& expected,
                    const SourceFactory& source, Store& store, TsStore& ts) {
  Roles roles(store, ts, cfg.nmin);
  if (!cfg.via_middleware) {
    Driver d;
    d.perceive = [&](int idx) {
      auto src = source(idx);
      auto uris = roles.perception.ingest(*src);
      return roles.perception.create_operation(cfg.screw, cfg.resource, uris);
    };
    d.classify = [&](const std::string& op) { roles.detection.classify(op); };
    d.learn = [&](const std::string& screw) -> std::string {
      try {
        roles.learning.learn(screw);
        return {};
      } catch (const InsufficientData& e) {
        return std::string("insufficient-data: ") + e.what();
      } catch (const TransactionRejected& e) {
        return std::string("rejected: ") + e.what();
      }
    };
    return drive(cfg, corpus_size, expected, store, ts, d);
  }

  mw::LocalNetwork net;
  mw::Middleware perception_mw("uc1-perception", roles.perception_ogm, net);
  mw::Middleware detection_mw("uc1-anomaly-detection", roles.detection_ogm, net);
  mw::Middleware learning_mw("uc1-learning", roles.learning_ogm, net);
  auto service = [&](mw::Middleware& m, const std::string& name, const std::string& wf_class,
                     mw::ParameterSpec param, mw::ParameterSpec outcome, mw::Handler h) {
    mw::ServiceDescriptor d;
    d.service_iri = vocab::kEx + name + "Service";
    d.provided_by = cfg.resource;
    mw::WorkflowDescriptor w;
    w.workflow_iri = vocab::kEx + name + "Workflow";
    w.workflow_class = uc(wf_class);
    w.parameters = {std::move(param)};
    w.outcome = std::move(outcome);
    d.workflows = {w};
    m.register_service(d, {{w.workflow_iri, std::move(h)}});
  };
  service(perception_mw, "Perception", "PerceptionWorkflow", {"cycle", vocab::xsd::integer},
          {"operation", vocab::xsd::anyURI}, [&](const mw::Args& a) {
            auto src = source(static_cast<int>(*a.at("cycle").numeric_value()));
            auto uris = roles.perception.ingest(*src);
            return Term::any_uri(roles.perception.create_operation(cfg.screw, cfg.resource, uris));
          });
  service(detection_mw, "AnomalyDetection", "AnomalyDetectionWorkflow", {"operation", vocab::xsd::anyURI},
          {"label", vocab::xsd::string}, [&](const mw::Args& a) {
            return Term::string(to_string(roles.detection.classify(a.at("operation").value()).label));
          });
  service(learning_mw, "Learning", "LearningWorkflow", {"screw", vocab::xsd::anyURI},
          {"ok", vocab::xsd::boolean}, [&](const mw::Args& a) {
            roles.learning.learn(a.at("screw").value());
            return Term::boolean(true);
          });

  // The driver only knows workflow classes; endpoints come from discovery.
  auto endpoint = [&](const std::string& wf_class) {
    auto found = mw::discover(uc(wf_class), store.snapshot());
    if (found.empty()) throw std::runtime_error("no " + wf_class + " online");
    return found.front();
  };
  auto call = [&](const mw::Middleware& via, const std::string& wf_class, const mw::Args& args) {
    auto ep = endpoint(wf_class);
    return via.invoke(ep.workflow_iri, ep.address, args);
  };
  Driver d;
  d.perceive = [&](int idx) {
    auto r = call(perception_mw, "PerceptionWorkflow", {{"cycle", Term::integer(idx)}});
    if (!r.ok) throw std::runtime_error("perception failed: " + r.fault->detail);
    return r.outcome->value();
  };
  d.classify = [&](const std::string& op) {
    auto r = call(detection_mw, "AnomalyDetectionWorkflow", {{"operation", Term::any_uri(op)}});
    if (!r.ok) throw std::runtime_error("classification failed: " + r.fault->detail);
  };
  d.learn = [&](const std::string& screw) -> std::string {
    auto r = call(learning_mw, "LearningWorkflow", {{"screw", Term::any_uri(screw)}});
    return r.ok ? std::string() : r.fault->detail;
  };
  auto report = drive(cfg, corpus_size, expected, store, ts, d);
  perception_mw.deregister_service();
  detection_mw.deregister_service();
  learning_mw.deregister_service();
  return report;
}

}  // namespace

LoopReport run_loop(const LoopConfig& cfg, const std::vector<CycleInput>& corpus, Store& store, TsStore& ts) {
  std::vector<std::optional<Label>> expected;
  for (const auto& c : corpus) expected.push_back(c.expected);
  SourceFactory source = [&](int idx) -> std::unique_ptr<mw::Connector> {
    const auto& c = corpus[idx];
    return std::make_unique<mw::ReplayConnector>(std::vector<mw::Recording>{c.torque, c.force, c.position});
  };
  return run_with(cfg, static_cast<int>(corpus.size()), expected, source, store, ts);
}

LoopReport run_loop(const LoopConfig& cfg, const std::string& recordings_dir, Store& store, TsStore& ts) {
  auto corpus = read_corpus(recordings_dir);
  std::vector<std::optional<Label>> expected;
  for (const auto& c : corpus) expected.push_back(c.expected);
  SourceFactory source = [&](int idx) -> std::unique_ptr<mw::Connector> {
    return std::make_unique<mw::ReplayConnector>(cycle_files(recordings_dir, idx));
  };
  return run_with(cfg, static_cast<int>(corpus.size()), expected, source, store, ts);
}

std::string LoopReport::to_text() const {
  std::ostringstream out;
  auto params = [](const DetectionParameters& p) {
    char buf[200];
    std::snprintf(buf, sizeof buf, "M_lower=%.6g M_upper=%.6g F_max=%.6g P_travel_min=%.6g P_travel_max=%.6g",
                  p.m_lower, p.m_upper, p.f_max, p.travel_min, p.travel_max);
    return std::string(buf);
  };
  int agree = 0, known = 0;
  out << "cycles: " << cycles.size() << "\n";
  for (const auto& c : cycles) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "cycle %d %s label=%s Mpeak=%.4f Fpeak=%.4f travel=%.4f", c.cycle,
                  local_name(c.operation).c_str(), to_string(c.label).c_str(), c.features.m_peak,
                  c.features.f_peak, c.features.travel);
    out << buf;
    if (c.expected) {
      ++known;
      agree += *c.expected == c.label;
      out << " expected=" << to_string(*c.expected);
    }
    out << "\n";
  }
  out << "learn events: " << learn_events.size() << "\n";
  for (const auto& e : learn_events) {
    out << "learn after cycle " << e.after_cycle << (e.applied ? " applied" : " skipped");
    if (!e.error.empty()) out << " (" << e.error << ")";
    out << "\n  before " << params(e.before) << "\n  after  " << params(e.after) << "\n";
  }
  if (known > 0) out << "agreement with generator labels: " << agree << "/" << known << "\n";
  return out.str();
}

}  // namespace kapps::uc1
