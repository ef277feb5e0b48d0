#pragma once

// Deterministic discrete-event engine: simulated clock, latency/loss links,
// capacity-limited FIFO nodes and a seeded random source.

#include <any>
#include <chrono>
#include <compare>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace encor::sim
{

/// Simulated time since the start of a run, microsecond resolution.
using SimTime = std::chrono::duration<std::uint64_t, std::micro>;

constexpr SimTime from_ms(double ms)
{
    return SimTime{static_cast<std::uint64_t>(ms * 1000.0 + 0.5)};
}

constexpr SimTime from_seconds(double s)
{
    return SimTime{static_cast<std::uint64_t>(s * 1e6 + 0.5)};
}

constexpr double to_ms(SimTime t)
{
    return static_cast<double>(t.count()) / 1000.0;
}

constexpr double to_seconds(SimTime t)
{
    return static_cast<double>(t.count()) / 1e6;
}

struct NodeId
{
    std::uint32_t value = 0;
    friend auto operator<=>(const NodeId&, const NodeId&) = default;
};

struct EventHandle
{
    std::uint64_t sequence = 0;
};

class SchedulingError : public std::logic_error
{
  public:
    using std::logic_error::logic_error;
};

class RoutingError : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

enum class ServiceModel
{
    Deterministic,
    Exponential,
};

struct NodeConfig
{
    std::string name;
    /// Messages per simulated second. Zero means service is instantaneous.
    double service_rate = 0.0;
    ServiceModel service_model = ServiceModel::Deterministic;
};

/// A message as seen by the kernel: routing metadata plus an opaque payload.
struct Envelope
{
    std::uint64_t id = 0;
    NodeId src;
    NodeId dst;
    std::string category;
    std::any payload;
    SimTime sent_at{};
    SimTime arrived_at{};
};

using Handler = std::function<void(Envelope&&)>;

struct NodeStats
{
    std::uint64_t arrivals = 0;
    std::uint64_t served = 0;
    SimTime busy_time{};
    /// Sum over served messages of (service completion - arrival).
    SimTime total_sojourn{};
    std::size_t max_queue = 0;
};

struct CategoryStats
{
    std::uint64_t sent = 0;
    std::uint64_t delivered = 0;
    std::uint64_t dropped = 0;
    /// Per delivered message: service completion at the destination minus send time.
    std::vector<SimTime> latencies;
};

struct RunStats
{
    SimTime now{};
    std::uint64_t events_processed = 0;
    std::uint64_t in_flight = 0;
    std::map<std::string, CategoryStats> by_category;
    std::map<std::string, NodeStats> by_node;

    std::uint64_t total_sent() const;
    std::uint64_t total_delivered() const;
    std::uint64_t total_dropped() const;

    /// Rows of `metric,category,value`.
    std::string to_csv() const;
};

class Simulator
{
  public:
    explicit Simulator(std::uint64_t seed = 1);

    Simulator(const Simulator&) = delete;
    Simulator& operator=(const Simulator&) = delete;

    SimTime now() const { return now_; }

    EventHandle schedule(SimTime at, std::function<void()> action);
    EventHandle schedule_in(SimTime delay, std::function<void()> action)
    {
        return schedule(now_ + delay, std::move(action));
    }
    /// Returns false if the event already ran or was cancelled.
    bool cancel(EventHandle handle);

    NodeId add_node(NodeConfig config);
    void set_handler(NodeId node, Handler handler);
    void set_service_rate(NodeId node, double rate);
    const NodeConfig& node_config(NodeId node) const;
    std::size_t node_count() const { return nodes_.size(); }
    std::size_t queue_length(NodeId node) const;
    const NodeStats& node_stats(NodeId node) const;

    void add_link(NodeId a, NodeId b, SimTime latency, double loss_probability = 0.0);
    void remove_link(NodeId a, NodeId b);
    bool has_link(NodeId a, NodeId b) const;
    bool has_route(NodeId src, NodeId dst) const;
    /// Minimum-latency path between two nodes; throws RoutingError when disconnected.
    SimTime path_latency(NodeId src, NodeId dst) const;

    /// Sends over the minimum-latency route. Intermediate nodes forward without service.
    /// Returns the envelope id. Throws RoutingError if no route exists.
    std::uint64_t send(NodeId src, NodeId dst, std::string category, std::any payload);
    /// Enqueues a message at `node` itself with no link traversal.
    std::uint64_t submit(NodeId node, std::string category, std::any payload);

    /// Executes every event with time <= t_end, then advances the clock to t_end.
    RunStats run_until(SimTime t_end);
    /// Executes events until the queue is empty.
    RunStats run();
    /// Executes the next pending event. Returns false when the queue is empty.
    bool step();
    RunStats stats() const;
    bool idle() const { return live_events_ == 0; }

    std::mt19937_64& rng() { return rng_; }

  private:
    struct Event
    {
        SimTime at;
        std::uint64_t sequence;
        std::function<void()> action;
    };
    struct EventLater
    {
        bool operator()(const Event& a, const Event& b) const
        {
            if (a.at != b.at)
                return a.at > b.at;
            return a.sequence > b.sequence;
        }
    };
    struct Link
    {
        SimTime latency;
        double loss_probability;
    };
    struct Node
    {
        NodeConfig config;
        Handler handler;
        std::deque<Envelope> queue;
        bool busy = false;
        SimTime busy_until{};
        NodeStats stats;
    };
    struct Route
    {
        SimTime latency;
        std::vector<NodeId> hops;
    };

    static std::uint64_t link_key(NodeId a, NodeId b);
    Node& node_ref(NodeId id);
    const Node& node_ref(NodeId id) const;
    std::optional<Route> route(NodeId src, NodeId dst) const;
    void arrive(Envelope&& env);
    void start_service(NodeId id);
    void finish_service(NodeId id);
    SimTime draw_service_time(const Node& node);

    SimTime now_{};
    std::uint64_t next_sequence_ = 0;
    std::uint64_t next_envelope_ = 0;
    std::uint64_t events_processed_ = 0;
    std::uint64_t in_flight_ = 0;
    std::size_t live_events_ = 0;
    std::vector<Event> heap_;
    std::unordered_set<std::uint64_t> cancelled_;
    std::unordered_set<std::uint64_t> pending_;
    std::vector<Node> nodes_;
    std::unordered_map<std::uint64_t, Link> links_;
    std::vector<std::vector<NodeId>> adjacency_;
    mutable std::unordered_map<std::uint64_t, std::optional<Route>> route_cache_;
    std::map<std::string, CategoryStats> categories_;
    std::mt19937_64 rng_;
};

}  // namespace encor::sim
