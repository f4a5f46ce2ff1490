#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

#include "syncdmpc/coupling_graph.hpp"
#include "syncdmpc/sync.hpp"

namespace syncdmpc {

enum class MessageKind { MeasuredState, PredictionBundle, SyncValue, ConsistencyVote, FeasibilityVote };

std::string to_string(MessageKind k);

/// Sender's measured state, last applied input and mission reference window.
struct MeasuredStatePayload {
  VehicleState state;
  VehicleInput previous_input;
  std::vector<VehicleState> reference;
};

/// One sync round's values: target -> state sequence.
struct SyncValuePayload {
  std::map<AgentId, std::vector<VehicleState>> values;
};

struct VotePayload {
  bool value = true;
};

using Payload = std::variant<MeasuredStatePayload, PredictionBundle, SyncValuePayload, VotePayload>;

struct Message {
  AgentId sender = 0;
  AgentId receiver = 0;
  MessageKind kind = MessageKind::MeasuredState;
  Payload payload;

  /// Wire size: 9-byte header (two 32-bit ids, one kind byte) plus 8 bytes per
  /// double, 4 per id and 1 per flag.
  std::size_t bytes() const;
};

struct TraceEntry {
  long round = 0;
  AgentId sender = 0;
  AgentId receiver = 0;
  MessageKind kind = MessageKind::MeasuredState;
  std::size_t bytes = 0;
};

/// Delivered messages per receiver, each list sorted by sender.
using Delivery = std::map<AgentId, std::vector<Message>>;

/// Synchronous lossless round-based bus over the coupling topology.
class MessageBus {
 public:
  explicit MessageBus(CouplingGraph topology);

  /// Delivers one round. Throws on a message between non-adjacent agents.
  /// Messages from the same sender keep their submission order.
  Delivery run_round(std::vector<Message> pending);

  /// Per-message latency hook; values are summed into `latency()` only.
  void set_latency_model(std::function<double(const Message&)> model) { latency_model_ = std::move(model); }
  void enable_trace(bool on) { tracing_ = on; }

  const CouplingGraph& topology() const { return topology_; }
  long rounds() const { return rounds_; }
  std::size_t messages() const { return messages_; }
  std::size_t bytes() const { return bytes_; }
  double latency() const { return latency_; }
  const std::vector<TraceEntry>& trace() const { return trace_; }

  /// CSV header: round,sender,receiver,kind,bytes
  static void write_trace_header(std::ostream& os);
  static void write_trace(std::ostream& os, const std::vector<TraceEntry>& entries);

 private:
  CouplingGraph topology_;
  std::function<double(const Message&)> latency_model_;
  bool tracing_ = false;
  long rounds_ = 0;
  std::size_t messages_ = 0;
  std::size_t bytes_ = 0;
  double latency_ = 0.0;
  std::vector<TraceEntry> trace_;
};

/// Global AND of per-agent flags within each connected component by flooding:
/// every agent sends its running AND to all neighbors for diameter rounds.
/// Returns every agent's final decision.
std::map<AgentId, bool> flood_vote(MessageBus& bus, const std::map<AgentId, bool>& local,
                                   MessageKind kind);

}  // namespace syncdmpc
