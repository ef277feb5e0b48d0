#pragma once

// Carries logical control messages over the simulator. Every core-flagged
// message is serviced exactly once by the core processor node, which models
// the (throttled) machine hosting all central-core elements; HOP-relayed
// messages pass through the HOP's relay check.

#include "encor/messages.hpp"

#include <functional>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>

namespace encor::control
{

class ControlFabric
{
  public:
    using Receiver = std::function<void(const ControlMessage&)>;
    /// Returns an error string if the relay must refuse the message.
    using RelayCheck = std::function<std::optional<std::string>(const ControlMessage&)>;
    using Observer = std::function<void(const ControlMessage&)>;

    ControlFabric(sim::Simulator& sim, NodeId core_processor);

    sim::Simulator& simulator() { return sim_; }
    NodeId core_processor() const { return cpu_; }

    /// Marks a node as a central-core element colocated with the core processor.
    void add_core_element(NodeId node);
    bool is_core(NodeId node) const { return core_.contains(node.value); }

    void bind(NodeId node, Receiver receiver);
    void bind_relay(NodeId relay, RelayCheck check, Receiver terminal);

    /// Called each time the core processor finishes servicing a message.
    void on_core_service(Observer observer) { core_observer_ = std::move(observer); }
    /// Called on final delivery with the number of link legs the message used.
    void on_delivered(std::function<void(const ControlMessage&, std::uint32_t)> observer)
    {
        delivered_observer_ = std::move(observer);
    }

    /// Computes via_core, dispatches, and returns the message as sent.
    /// `core_anchored` charges a core service to a message whose endpoints are both
    /// outside the core, without detouring it.
    ControlMessage send(ControlMessage msg, std::optional<NodeId> relay = std::nullopt,
                        bool core_anchored = false);

    std::uint64_t relay_errors() const { return relay_errors_; }

  private:
    struct Transit
    {
        ControlMessage msg;
        std::vector<NodeId> legs;
        std::size_t at = 0;
        std::uint32_t hops = 0;
        std::uint64_t join = 0;  // nonzero: one half of a core-anchored pair
    };

    void arrive(NodeId node, sim::Envelope&& env);
    void forward(Transit&& t);
    void deliver(const Transit& t);
    void complete_join(std::uint64_t token, const Transit* physical);

    sim::Simulator& sim_;
    NodeId cpu_;
    std::unordered_set<std::uint32_t> core_;
    std::unordered_map<std::uint32_t, Receiver> receivers_;
    std::unordered_map<std::uint32_t, RelayCheck> relays_;
    Observer core_observer_;
    std::function<void(const ControlMessage&, std::uint32_t)> delivered_observer_;
    struct Join
    {
        int remaining = 2;
        std::optional<Transit> physical;
    };
    std::unordered_map<std::uint64_t, Join> joins_;
    std::uint64_t next_join_ = 1;
    std::uint64_t relay_errors_ = 0;
};

}  // namespace encor::control
