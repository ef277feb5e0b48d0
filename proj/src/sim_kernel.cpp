#include "encor/sim_kernel.hpp"

#include <algorithm>
#include <limits>
#include <queue>
#include <sstream>

namespace encor::sim
{

std::uint64_t RunStats::total_sent() const
{
    std::uint64_t n = 0;
    for (const auto& [_, c] : by_category)
        n += c.sent;
    return n;
}

std::uint64_t RunStats::total_delivered() const
{
    std::uint64_t n = 0;
    for (const auto& [_, c] : by_category)
        n += c.delivered;
    return n;
}

std::uint64_t RunStats::total_dropped() const
{
    std::uint64_t n = 0;
    for (const auto& [_, c] : by_category)
        n += c.dropped;
    return n;
}

std::string RunStats::to_csv() const
{
    std::ostringstream out;
    out << "metric,category,value\n";
    out << "now_us,," << now.count() << '\n';
    out << "events_processed,," << events_processed << '\n';
    out << "in_flight,," << in_flight << '\n';
    for (const auto& [name, c] : by_category)
    {
        out << "sent," << name << ',' << c.sent << '\n';
        out << "delivered," << name << ',' << c.delivered << '\n';
        out << "dropped," << name << ',' << c.dropped << '\n';
        std::uint64_t sum = 0;
        for (auto l : c.latencies)
            sum += l.count();
        out << "latency_sum_us," << name << ',' << sum << '\n';
    }
    for (const auto& [name, n] : by_node)
    {
        out << "node_served," << name << ',' << n.served << '\n';
        out << "node_busy_us," << name << ',' << n.busy_time.count() << '\n';
        out << "node_sojourn_us," << name << ',' << n.total_sojourn.count() << '\n';
    }
    return out.str();
}

Simulator::Simulator(std::uint64_t seed) : rng_(seed) {}

EventHandle Simulator::schedule(SimTime at, std::function<void()> action)
{
    if (at < now_)
        throw SchedulingError("cannot schedule at t=" + std::to_string(at.count()) +
                              "us before now=" + std::to_string(now_.count()) + "us");
    const auto seq = next_sequence_++;
    heap_.push_back(Event{at, seq, std::move(action)});
    std::push_heap(heap_.begin(), heap_.end(), EventLater{});
    pending_.insert(seq);
    ++live_events_;
    return EventHandle{seq};
}

bool Simulator::cancel(EventHandle handle)
{
    if (pending_.erase(handle.sequence) == 0)
        return false;
    cancelled_.insert(handle.sequence);
    --live_events_;
    return true;
}

NodeId Simulator::add_node(NodeConfig config)
{
    if (config.service_rate < 0.0)
        throw std::invalid_argument("service_rate must be >= 0");
    NodeId id{static_cast<std::uint32_t>(nodes_.size())};
    Node node;
    node.config = std::move(config);
    nodes_.push_back(std::move(node));
    adjacency_.emplace_back();
    return id;
}

void Simulator::set_handler(NodeId node, Handler handler)
{
    node_ref(node).handler = std::move(handler);
}

void Simulator::set_service_rate(NodeId node, double rate)
{
    if (rate < 0.0)
        throw std::invalid_argument("service_rate must be >= 0");
    node_ref(node).config.service_rate = rate;
}

const NodeConfig& Simulator::node_config(NodeId node) const
{
    return node_ref(node).config;
}

std::size_t Simulator::queue_length(NodeId node) const
{
    return node_ref(node).queue.size();
}

const NodeStats& Simulator::node_stats(NodeId node) const
{
    return node_ref(node).stats;
}

std::uint64_t Simulator::link_key(NodeId a, NodeId b)
{
    if (b < a)
        std::swap(a, b);
    return (static_cast<std::uint64_t>(a.value) << 32) | b.value;
}

Simulator::Node& Simulator::node_ref(NodeId id)
{
    if (id.value >= nodes_.size())
        throw std::out_of_range("unknown node id " + std::to_string(id.value));
    return nodes_[id.value];
}

const Simulator::Node& Simulator::node_ref(NodeId id) const
{
    if (id.value >= nodes_.size())
        throw std::out_of_range("unknown node id " + std::to_string(id.value));
    return nodes_[id.value];
}

void Simulator::add_link(NodeId a, NodeId b, SimTime latency, double loss_probability)
{
    node_ref(a);
    node_ref(b);
    if (a == b)
        throw std::invalid_argument("self links are not allowed");
    if (!(loss_probability >= 0.0 && loss_probability <= 1.0))
        throw std::invalid_argument("loss_probability must lie in [0,1]");
    const auto key = link_key(a, b);
    if (!links_.contains(key))
    {
        adjacency_[a.value].push_back(b);
        adjacency_[b.value].push_back(a);
    }
    links_[key] = Link{latency, loss_probability};
    route_cache_.clear();
}

void Simulator::remove_link(NodeId a, NodeId b)
{
    if (links_.erase(link_key(a, b)) == 0)
        return;
    std::erase(adjacency_[a.value], b);
    std::erase(adjacency_[b.value], a);
    route_cache_.clear();
}

bool Simulator::has_link(NodeId a, NodeId b) const
{
    return links_.contains(link_key(a, b));
}

std::optional<Simulator::Route> Simulator::route(NodeId src, NodeId dst) const
{
    const auto key = (static_cast<std::uint64_t>(src.value) << 32) | dst.value;
    if (auto it = route_cache_.find(key); it != route_cache_.end())
        return it->second;

    // Dijkstra on link latency; ties resolved by node id for determinism.
    constexpr auto kInf = std::numeric_limits<std::uint64_t>::max();
    std::vector<std::uint64_t> dist(nodes_.size(), kInf);
    std::vector<std::uint32_t> prev(nodes_.size(), std::numeric_limits<std::uint32_t>::max());
    using Item = std::pair<std::uint64_t, std::uint32_t>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> frontier;
    dist[src.value] = 0;
    frontier.emplace(0, src.value);
    while (!frontier.empty())
    {
        auto [d, u] = frontier.top();
        frontier.pop();
        if (d != dist[u])
            continue;
        if (u == dst.value)
            break;
        for (NodeId v : adjacency_[u])
        {
            const auto& link = links_.at(link_key(NodeId{u}, v));
            const auto nd = d + link.latency.count();
            if (nd < dist[v.value])
            {
                dist[v.value] = nd;
                prev[v.value] = u;
                frontier.emplace(nd, v.value);
            }
        }
    }

    std::optional<Route> result;
    if (dist[dst.value] != kInf)
    {
        Route r{SimTime{dist[dst.value]}, {}};
        for (std::uint32_t at = dst.value; at != src.value; at = prev[at])
            r.hops.push_back(NodeId{at});
        r.hops.push_back(src);
        std::reverse(r.hops.begin(), r.hops.end());
        result = std::move(r);
    }
    route_cache_.emplace(key, result);
    return result;
}

bool Simulator::has_route(NodeId src, NodeId dst) const
{
    return route(src, dst).has_value();
}

SimTime Simulator::path_latency(NodeId src, NodeId dst) const
{
    auto r = route(src, dst);
    if (!r)
        throw RoutingError("no route from node " + std::to_string(src.value) + " to node " +
                           std::to_string(dst.value));
    return r->latency;
}

std::uint64_t Simulator::send(NodeId src, NodeId dst, std::string category, std::any payload)
{
    auto r = route(src, dst);
    if (!r)
        throw RoutingError("no route from " + node_ref(src).config.name + " to " +
                           node_ref(dst).config.name);

    Envelope env;
    env.id = next_envelope_++;
    env.src = src;
    env.dst = dst;
    env.category = std::move(category);
    env.payload = std::move(payload);
    env.sent_at = now_;

    auto& cat = categories_[env.category];
    ++cat.sent;

    for (std::size_t i = 0; i + 1 < r->hops.size(); ++i)
    {
        const auto& link = links_.at(link_key(r->hops[i], r->hops[i + 1]));
        if (link.loss_probability > 0.0)
        {
            std::bernoulli_distribution lost(link.loss_probability);
            if (lost(rng_))
            {
                ++cat.dropped;
                return env.id;
            }
        }
    }

    ++in_flight_;
    const auto id = env.id;
    schedule(now_ + r->latency, [this, e = std::move(env)]() mutable { arrive(std::move(e)); });
    return id;
}

std::uint64_t Simulator::submit(NodeId node, std::string category, std::any payload)
{
    node_ref(node);
    Envelope env;
    env.id = next_envelope_++;
    env.src = node;
    env.dst = node;
    env.category = std::move(category);
    env.payload = std::move(payload);
    env.sent_at = now_;
    ++categories_[env.category].sent;
    ++in_flight_;
    const auto id = env.id;
    schedule(now_, [this, e = std::move(env)]() mutable { arrive(std::move(e)); });
    return id;
}

SimTime Simulator::draw_service_time(const Node& node)
{
    const double rate = node.config.service_rate;
    if (rate <= 0.0)
        return SimTime{0};
    if (node.config.service_model == ServiceModel::Exponential)
    {
        std::exponential_distribution<double> service(rate);
        return from_seconds(service(rng_));
    }
    return from_seconds(1.0 / rate);
}

void Simulator::arrive(Envelope&& env)
{
    env.arrived_at = now_;
    auto& node = node_ref(env.dst);
    ++node.stats.arrivals;
    const auto id = env.dst;
    node.queue.push_back(std::move(env));
    node.stats.max_queue = std::max(node.stats.max_queue, node.queue.size());
    if (!node.busy)
        start_service(id);
}

void Simulator::start_service(NodeId id)
{
    auto& node = node_ref(id);
    if (node.queue.empty())
        return;
    node.busy = true;
    const auto service = draw_service_time(node);
    node.busy_until = now_ + service;
    node.stats.busy_time += service;
    if (service.count() == 0)
    {
        finish_service(id);
        return;
    }
    schedule(node.busy_until, [this, id] { finish_service(id); });
}

void Simulator::finish_service(NodeId id)
{
    auto& node = node_ref(id);
    Envelope env = std::move(node.queue.front());
    node.queue.pop_front();
    node.busy = false;
    ++node.stats.served;
    node.stats.total_sojourn += now_ - env.arrived_at;

    auto& cat = categories_[env.category];
    ++cat.delivered;
    cat.latencies.push_back(now_ - env.sent_at);
    --in_flight_;

    if (node.handler)
        node.handler(std::move(env));
    // The handler may have enqueued more work at this node.
    auto& again = node_ref(id);
    if (!again.busy && !again.queue.empty())
        start_service(id);
}

bool Simulator::step()
{
    while (!heap_.empty())
    {
        std::pop_heap(heap_.begin(), heap_.end(), EventLater{});
        Event ev = std::move(heap_.back());
        heap_.pop_back();
        if (cancelled_.erase(ev.sequence) != 0)
            continue;
        pending_.erase(ev.sequence);
        --live_events_;
        now_ = ev.at;
        ++events_processed_;
        ev.action();
        return true;
    }
    return false;
}

RunStats Simulator::run_until(SimTime t_end)
{
    while (!heap_.empty())
    {
        // Skip cancelled entries at the top so the peek below is accurate.
        if (cancelled_.contains(heap_.front().sequence))
        {
            std::pop_heap(heap_.begin(), heap_.end(), EventLater{});
            cancelled_.erase(heap_.back().sequence);
            heap_.pop_back();
            continue;
        }
        if (heap_.front().at > t_end)
            break;
        step();
    }
    if (t_end > now_)
        now_ = t_end;
    return stats();
}

RunStats Simulator::run()
{
    while (step())
    {
    }
    return stats();
}

RunStats Simulator::stats() const
{
    RunStats out;
    out.now = now_;
    out.events_processed = events_processed_;
    out.in_flight = in_flight_;
    out.by_category = categories_;
    for (const auto& node : nodes_)
        out.by_node[node.config.name] = node.stats;
    return out;
}

}  // namespace encor::sim
