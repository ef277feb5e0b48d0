#include "encor/fabric.hpp"

#include <stdexcept>

namespace encor::control
{

ControlFabric::ControlFabric(sim::Simulator& sim, NodeId core_processor)
    : sim_(sim), cpu_(core_processor)
{
    sim_.set_handler(cpu_, [this](sim::Envelope&& env) { arrive(cpu_, std::move(env)); });
}

void ControlFabric::add_core_element(NodeId node)
{
    core_.insert(node.value);
}

void ControlFabric::bind(NodeId node, Receiver receiver)
{
    receivers_[node.value] = std::move(receiver);
    sim_.set_handler(node, [this, node](sim::Envelope&& env) { arrive(node, std::move(env)); });
}

void ControlFabric::bind_relay(NodeId relay, RelayCheck check, Receiver terminal)
{
    relays_[relay.value] = std::move(check);
    bind(relay, std::move(terminal));
}

ControlMessage ControlFabric::send(ControlMessage msg, std::optional<NodeId> relay,
                                   bool core_anchored)
{
    msg.via_core = is_core(msg.src) || is_core(msg.dst) || core_anchored;

    Transit t;
    t.msg = msg;
    if (relay)
    {
        if (msg.via_core)
            throw std::logic_error("core messages are never HOP-relayed");
        t.legs = {msg.src, *relay, msg.dst};
    }
    else if (msg.via_core && !core_anchored)
    {
        t.legs = {msg.src, cpu_, msg.dst};
    }
    else
    {
        t.legs = {msg.src, msg.dst};
    }

    if (core_anchored && !is_core(msg.src) && !is_core(msg.dst))
    {
        const auto token = next_join_++;
        joins_.emplace(token, Join{});
        t.join = token;
        Transit charge;
        charge.msg = msg;
        charge.legs = {cpu_};
        charge.join = token;
        sim_.submit(cpu_, to_string(msg.kind), std::move(charge));
    }

    forward(std::move(t));
    return msg;
}

void ControlFabric::forward(Transit&& t)
{
    const NodeId from = t.legs[t.at];
    const NodeId to = t.legs[t.at + 1];
    ++t.at;
    ++t.hops;
    const auto category = to_string(t.msg.kind);
    sim_.send(from, to, category, std::move(t));
}

void ControlFabric::arrive(NodeId node, sim::Envelope&& env)
{
    auto t = std::any_cast<Transit>(std::move(env.payload));

    if (node == cpu_)
    {
        if (core_observer_)
            core_observer_(t.msg);
        if (t.join != 0 && t.legs.size() == 1)
        {
            complete_join(t.join, nullptr);
            return;
        }
        forward(std::move(t));
        return;
    }

    const bool final_leg = t.at + 1 == t.legs.size();
    if (!final_leg)
    {
        auto rit = relays_.find(node.value);
        if (rit != relays_.end())
        {
            if (auto err = rit->second(t.msg))
            {
                ++relay_errors_;
                ControlMessage bounce;
                bounce.kind = MessageKind::RelayError;
                bounce.src = node;
                bounce.dst = t.msg.src;
                bounce.payload = t.msg.payload;
                bounce.payload.cause = *err;
                Transit back;
                back.msg = bounce;
                back.legs = {node, t.msg.src};
                forward(std::move(back));
                return;
            }
        }
        forward(std::move(t));
        return;
    }

    if (t.join != 0)
    {
        complete_join(t.join, &t);
        return;
    }
    deliver(t);
}

void ControlFabric::complete_join(std::uint64_t token, const Transit* physical)
{
    auto it = joins_.find(token);
    if (it == joins_.end())
        return;
    if (physical)
        it->second.physical = *physical;
    if (--it->second.remaining > 0)
        return;
    Transit t = std::move(*it->second.physical);
    joins_.erase(it);
    deliver(t);
}

void ControlFabric::deliver(const Transit& t)
{
    if (delivered_observer_)
        delivered_observer_(t.msg, t.hops);
    auto it = receivers_.find(t.msg.dst.value);
    if (it != receivers_.end() && it->second)
        it->second(t.msg);
}

}  // namespace encor::control
