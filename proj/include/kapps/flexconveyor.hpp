#pragma once
// Conveyor-network demonstrator: one agent per module, boxes handed over by a
// Reserve / Convey / Receive handshake, every state change admitted by the
// shapes gate.

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "kapps/middleware.hpp"
#include "kapps/ogm.hpp"
#include "kapps/store.hpp"

namespace kapps::conveyor {

enum class Dir { N, E, S, W };
inline constexpr Dir kDirs[] = {Dir::N, Dir::E, Dir::S, Dir::W};
const char* to_string(Dir d);
// fc:hasNeighborNorth etc.
const std::string& neighbor_property(Dir d);

struct Topology {
  int width = 0, height = 0;
  std::vector<std::string> modules;  // row-major, fci:Module1..N
  std::map<std::string, std::map<Dir, std::string>> adjacency;

  std::pair<int, int> position(const std::string& module) const;
  const std::string& at(int x, int y) const { return modules[static_cast<std::size_t>(y * width + x)]; }
};

// Pure grid; no graph access.
Topology make_grid(int width, int height);

// Loads the core, service and conveyor ontologies and the conveyor shapes.
void load_vocabulary(Store& store);
// Store with the shapes gate installed and the vocabulary loaded.
std::unique_ptr<Store> make_store(bool focus_scope = false);

// Commits the module individuals with grid positions and neighbor links.
Topology build_topology(int width, int height, ogm::Ogm& ogm);
// Reconstructs the grid from module positions and neighbor links.
Topology read_topology(const Snapshot& view);

// Direction of the next step along a shortest grid path, ties broken in the
// order N, E, S, W. Excluded directions are skipped and the best remaining
// neighbor is taken even if it is a detour; when every neighbor is excluded
// the exclusions are ignored.
Dir next_hop(const Topology& topo, const std::string& from, const std::string& to,
             const std::set<Dir>& excluded = {});

enum class FaultMode { None, SkipReservation, DeliverWhilePossessed };
const char* to_string(FaultMode m);
std::optional<FaultMode> parse_fault_mode(const std::string& text);

struct BoxPlan {
  std::string origin, destination;
};

// Seeded plans over modules outside `excluded`: distinct origins, and
// destinations that are a derangement of the origins.
std::vector<BoxPlan> draw_plans(const Topology& topo, int boxes, std::mt19937_64& rng,
                                const std::set<std::string>& excluded = {});

struct SimConfig {
  int width = 3, height = 3;
  int boxes = 5;
  FaultMode fault = FaultMode::None;
  // Chance that a faulty agent takes the faulty path on a given attempt
  // until its first rejection, after which it reverts to the protocol.
  double fault_probability = 1.0;
  std::uint64_t seed = 42;
  int max_ticks = 0;  // 0: 50 * (width + height) * boxes
  // Explicit origins/destinations; drawn from the seed when empty.
  std::vector<BoxPlan> plans;
  // Parks a blocker box in the first box's next hop for `stage_hold_ticks`.
  bool stage_occupied = false;
  int stage_hold_ticks = 2;
  // Run the full shapes validation after every admitted transaction.
  bool validate_every_commit = false;
  // Free-running agents on threads instead of seeded round-robin ticks.
  bool threaded = false;
  // Prefix for transport node ids; changes every endpoint address.
  std::string node_prefix = "module";
  bool focus_scope = false;
};

struct RejectionEvent {
  int tick = 0;
  std::string actor;
  std::string action;
  std::string box;
  std::string source_constraint_component;
  std::string focus_node;
  std::string message;
  std::string report;  // Turtle
  std::size_t quads_before = 0;
  std::size_t quads_after = 0;
  TxnId head_before = 0;
  TxnId head_after = 0;
};

struct SimReport {
  int boxes = 0;
  int delivered = 0;
  int ticks = 0;
  std::uint64_t admitted_transactions = 0;
  std::uint64_t validated_transactions = 0;
  std::uint64_t nonconforming_transactions = 0;
  std::uint64_t possession_violations = 0;
  std::vector<RejectionEvent> rejections;
  std::map<std::string, std::vector<std::string>> paths;  // box -> modules
  std::vector<std::string> trace;

  std::size_t rejections_with(const std::string& component) const;
  // Structured text; stable for a fixed configuration in round-robin mode.
  std::string to_text() const;
};

class Simulation {
 public:
  explicit Simulation(SimConfig config);
  ~Simulation();

  SimReport run();

  Store& store() { return *store_; }
  const Topology& topology() const { return topology_; }

 private:
  struct Agent;
  struct Shared;

  SimConfig config_;
  std::unique_ptr<Store> store_;
  Topology topology_;
  std::unique_ptr<Shared> shared_;
};

SimReport run_simulation(const SimConfig& config);

}  // namespace kapps::conveyor
