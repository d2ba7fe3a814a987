#pragma once
// UC1: perception, anomaly detection and parameter learning for robotic
// unscrewing. The three roles run in separate OGM sessions and exchange
// state only through the graph.

#include <memory>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "kapps/middleware.hpp"
#include "kapps/ogm.hpp"
#include "kapps/store.hpp"
#include "kapps/timeseries.hpp"

namespace kapps::uc1 {

inline const std::string kTorqueChannel = "torque_My";
inline const std::string kForceChannel = "force_Fy";
inline const std::string kPositionChannel = "position_Py";

inline const std::string kPerceptionActor = "urn:kapps:agent:perception";
inline const std::string kDetectionActor = "urn:kapps:agent:anomaly-detection";
inline const std::string kLearningActor = "urn:kapps:agent:learning";

inline const std::string kDefaultScrew = vocab::kEx + "Screw_4711";
inline const std::string kDefaultResource = vocab::kEx + "ScrewingResource_1";

std::string uc(const std::string& local);

// Only the torque bounds have established names; the other three are ours.
struct DetectionParameters {
  double m_lower = 0.1;
  double m_upper = 10.0;
  double f_max = 50.0;
  double travel_min = 5.0;
  double travel_max = 15.0;

  bool valid() const { return m_lower < m_upper && travel_min < travel_max && f_max > 0; }
  bool operator==(const DetectionParameters&) const = default;
};

enum class Label { Success, MissingScrew, OccludedOrRoundedHead, LooseAnchor, StuckScrew };
std::string to_string(Label label);
Label parse_label(const std::string& text);

struct Outcome {
  Label label = Label::StuckScrew;
  bool success() const { return label == Label::Success; }
  bool operator==(const Outcome&) const = default;
};

struct Features {
  double m_peak = 0;    // max torque
  double f_peak = 0;    // max axial force
  double travel = 0;    // total position travel, sum of |dP|
};

Features extract_features(const mw::Recording& torque, const mw::Recording& force,
                          const mw::Recording& position);

// Rule (4) is tested before (1) and (2); otherwise its antecedent would be
// shadowed by theirs and it could never fire.
Label classify_features(const Features& f, const DetectionParameters& p);

// Linear-interpolation percentile (numpy's default), q in [0, 100].
double percentile(std::vector<double> values, double q);

// The estimator behind learn(), exposed for direct use.
DetectionParameters estimate_parameters(const std::vector<Features>& successes);

class InsufficientData : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class MissingRecords : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class MissingParameters : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Ontology, shapes and the example screw/resource individuals.
void load_vocabulary(Store& store);
std::unique_ptr<Store> make_store();

DetectionParameters read_parameters(const ogm::GraphObject& screw);
std::optional<DetectionParameters> parameters_in(const Snapshot& view, const std::string& screw);

// Three record URIs ordered torque, force, position.
struct RecordUris {
  std::string torque, force, position;
  std::vector<std::string> all() const { return {torque, force, position}; }
};

class PerceptionService {
 public:
  PerceptionService(ogm::Ogm& ogm, TsStore& ts) : ogm_(ogm), ts_(ts) {}
  // Pulls every sample from the connector and stores one record per channel.
  RecordUris ingest(mw::Connector& source);
  RecordUris ingest_files(const std::vector<std::string>& csv_paths);
  std::string create_operation(const std::string& screw, const std::string& resource,
                               const RecordUris& records);

 private:
  ogm::Ogm& ogm_;
  TsStore& ts_;
};

class DetectionService {
 public:
  DetectionService(ogm::Ogm& ogm, TsStore& ts) : ogm_(ogm), ts_(ts) {}
  Outcome classify(const std::string& operation);
  // Parameters seen by the most recent classify().
  const DetectionParameters& last_parameters() const { return last_params_; }
  const Features& last_features() const { return last_features_; }

 private:
  ogm::Ogm& ogm_;
  TsStore& ts_;
  DetectionParameters last_params_;
  Features last_features_;
};

class LearningService {
 public:
  LearningService(ogm::Ogm& ogm, TsStore& ts, int nmin = 10) : ogm_(ogm), ts_(ts), nmin_(nmin) {}
  // Throws InsufficientData (graph untouched) or TransactionRejected.
  DetectionParameters learn(const std::string& screw);
  TxnId last_txn() const { return last_txn_; }

 private:
  ogm::Ogm& ogm_;
  TsStore& ts_;
  int nmin_;
  TxnId last_txn_ = 0;
};

// Context of one past decision, rebuilt from queries and history only.
struct Trace {
  std::string operation;
  std::string screw;
  std::string resource;
  std::vector<std::string> record_uris;  // torque, force, position
  Label label = Label::StuckScrew;
  bool success = false;
  std::string decided_by;
  std::string activity;
  Timestamp decided_at{};
  DetectionParameters parameters;  // active when the decision was committed
};

Trace trace_operation(const Store& store, const std::string& operation);

// --- synthetic corpus -------------------------------------------------------

struct CycleInput {
  mw::Recording torque, force, position;
  std::optional<Label> expected;
};

struct GeneratorConfig {
  int count = 30;
  std::uint64_t seed = 7;
  double success_share = 0.7;  // the rest is split evenly among the faults
  double sample_rate_hz = 100;
  double duration_s = 1.5;
};

CycleInput synthesize(Label label, std::mt19937_64& rng, const GeneratorConfig& cfg = {});
std::vector<CycleInput> generate_corpus(const GeneratorConfig& cfg);

// Layout: `cycle_NNNN/{torque_My,force_Fy,position_Py}.csv` plus `labels.csv`.
void write_corpus(const std::vector<CycleInput>& corpus, const std::string& dir);
std::vector<CycleInput> read_corpus(const std::string& dir);
std::vector<std::string> cycle_files(const std::string& dir, int index);  // index from 0

// --- closed loop ------------------------------------------------------------

struct LoopConfig {
  int cycles = 30;
  int learn_every = 10;  // 0 disables learning
  int nmin = 10;
  std::string screw = kDefaultScrew;
  std::string resource = kDefaultResource;
  // Drive the three roles as middleware services on a local network.
  bool via_middleware = false;
};

struct CycleRecord {
  int cycle = 0;
  std::string operation;
  Label label = Label::StuckScrew;
  std::optional<Label> expected;
  Features features;
  DetectionParameters parameters;
};

struct LearnEvent {
  int after_cycle = 0;
  bool applied = false;
  std::string error;
  DetectionParameters before, after;
  TxnId txn = 0;
};

struct LoopReport {
  std::vector<CycleRecord> cycles;
  std::vector<LearnEvent> learn_events;
  std::string to_text() const;
};

// Cycles past the end of the corpus wrap around to its start. With a
// recordings directory, samples are replayed from the files.
LoopReport run_loop(const LoopConfig& cfg, const std::vector<CycleInput>& corpus, Store& store,
                    TsStore& ts);
LoopReport run_loop(const LoopConfig& cfg, const std::string& recordings_dir, Store& store,
                    TsStore& ts);

}  // namespace kapps::uc1
