#include "syncdmpc/network.hpp"

#include <algorithm>

namespace syncdmpc {

std::string to_string(MessageKind k) {
  switch (k) {
    case MessageKind::MeasuredState: return "measured_state";
    case MessageKind::PredictionBundle: return "prediction_bundle";
    case MessageKind::SyncValue: return "sync_value";
    case MessageKind::ConsistencyVote: return "consistency_vote";
    case MessageKind::FeasibilityVote: return "feasibility_vote";
  }
  return "unknown";
}

namespace {

constexpr std::size_t kHeader = 9;
constexpr std::size_t kState = 4 * 8;
constexpr std::size_t kInput = 2 * 8;
constexpr std::size_t kId = 4;

struct PayloadSize {
  std::size_t operator()(const MeasuredStatePayload& p) const {
    return kState + kInput + kId + p.reference.size() * kState;
  }
  std::size_t operator()(const PredictionBundle& b) const {
    std::size_t n = kId;
    for (const auto& [j, p] : b.targets) n += kId + p.states.size() * kState + p.inputs.size() * kInput;
    return n;
  }
  std::size_t operator()(const SyncValuePayload& s) const {
    std::size_t n = 0;
    for (const auto& [j, seq] : s.values) n += kId + seq.size() * kState;
    return n;
  }
  std::size_t operator()(const VotePayload&) const { return 1; }
};

}  // namespace

std::size_t Message::bytes() const { return kHeader + std::visit(PayloadSize{}, payload); }

MessageBus::MessageBus(CouplingGraph topology) : topology_(std::move(topology)) {}

Delivery MessageBus::run_round(std::vector<Message> pending) {
  for (const auto& m : pending) {
    if (!topology_.contains(m.sender) || !topology_.contains(m.receiver) ||
        !topology_.adjacent(m.sender, m.receiver)) {
      throw Error("network: agent " + std::to_string(m.sender) + " sent " + to_string(m.kind) +
                  " to non-neighbor " + std::to_string(m.receiver));
    }
  }
  std::stable_sort(pending.begin(), pending.end(),
                   [](const Message& a, const Message& b) { return a.sender < b.sender; });
  Delivery out;
  for (auto& m : pending) {
    const std::size_t b = m.bytes();
    ++messages_;
    bytes_ += b;
    if (latency_model_) latency_ += latency_model_(m);
    if (tracing_) trace_.push_back({rounds_, m.sender, m.receiver, m.kind, b});
    out[m.receiver].push_back(std::move(m));
  }
  ++rounds_;
  return out;
}

void MessageBus::write_trace_header(std::ostream& os) { os << "round,sender,receiver,kind,bytes\n"; }

void MessageBus::write_trace(std::ostream& os, const std::vector<TraceEntry>& entries) {
  for (const auto& e : entries) {
    os << e.round << ',' << e.sender << ',' << e.receiver << ',' << to_string(e.kind) << ','
       << e.bytes << '\n';
  }
}

std::map<AgentId, bool> flood_vote(MessageBus& bus, const std::map<AgentId, bool>& local,
                                   MessageKind kind) {
  std::map<AgentId, bool> state = local;
  const int rounds = diameter(bus.topology());
  for (int r = 0; r < rounds; ++r) {
    std::vector<Message> pending;
    for (const auto& [i, v] : state) {
      for (AgentId q : bus.topology().neighbors(i)) {
        if (state.count(q)) pending.push_back({i, q, kind, VotePayload{v}});
      }
    }
    const auto delivered = bus.run_round(std::move(pending));
    for (const auto& [i, inbox] : delivered) {
      for (const auto& m : inbox) state.at(i) = state.at(i) && std::get<VotePayload>(m.payload).value;
    }
  }
  return state;
}

}  // namespace syncdmpc
