#include "encor/experiments.hpp"

#include "encor/encor_network.hpp"
#include "encor/lte_network.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <iomanip>
#include <map>
#include <memory>
#include <random>
#include <sstream>
#include <stdexcept>

namespace encor::experiments
{

using control::HandoverMode;
using control::HandoverTrace;
using sim::NodeId;
using sim::SimTime;

const char* to_string(Architecture arch)
{
    return arch == Architecture::Encor ? "encor" : "lte";
}

namespace
{

security::Key128 key_for(std::uint64_t imsi)
{
    security::Key128 k{};
    std::mt19937_64 g(imsi * 0x9E3779B97F4A7C15ULL + 1);
    for (auto& b : k)
        b = static_cast<std::uint8_t>(g());
    return k;
}

std::string num(double v)
{
    char buf[64];
    auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

// Both networks behind one interface so the sweep loop is shared.
class Driver
{
  public:
    virtual ~Driver() = default;
    virtual const std::vector<NodeId>& cells() const = 0;
    virtual NodeId cpu() const = 0;
    virtual void add(std::uint64_t imsi, NodeId cell) = 0;
    virtual bool attach(std::uint64_t imsi) = 0;
    virtual void handover(std::uint64_t imsi, NodeId target, std::function<void(const HandoverTrace&)> done) = 0;
};

class EncorDriver : public Driver
{
  public:
    EncorDriver(sim::Simulator& sim, const LoadScenario& s) : net_(sim, config(s)) {}
    const std::vector<NodeId>& cells() const override { return net_.inb_ids(); }
    NodeId cpu() const override { return net_.core_processor(); }
    void add(std::uint64_t imsi, NodeId cell) override
    {
        net_.provision(security::SubscriberRecord{imsi, key_for(imsi), 0, 9, security::Unlimited{}});
        net_.add_ue(imsi, key_for(imsi), cell);
    }
    bool attach(std::uint64_t imsi) override { return net_.attach(imsi).ok; }
    void handover(std::uint64_t imsi, NodeId target, std::function<void(const HandoverTrace&)> done) override
    {
        net_.start_handover(imsi, target, HandoverMode::CoreAssisted, std::move(done));
    }

  private:
    static control::EncorConfig config(const LoadScenario& s)
    {
        control::EncorConfig c;
        c.inb_count = s.cell_count;
        c.inbs_per_hop = s.cells_per_group;
        c.radio_latency = s.radio_latency;
        c.backhaul_latency = s.backhaul_latency;
        c.core_service_rate = s.core_service_rate;
        return c;
    }
    control::EncorNetwork net_;
};

class LteDriver : public Driver
{
  public:
    LteDriver(sim::Simulator& sim, const LoadScenario& s) : net_(sim, config(s)) {}
    const std::vector<NodeId>& cells() const override { return net_.enb_ids(); }
    NodeId cpu() const override { return net_.core_processor(); }
    void add(std::uint64_t imsi, NodeId cell) override
    {
        net_.provision(security::SubscriberRecord{imsi, key_for(imsi), 0, 9, security::Unlimited{}});
        net_.add_ue(imsi, key_for(imsi), cell);
    }
    bool attach(std::uint64_t imsi) override { return net_.attach_lte(imsi).ok; }
    void handover(std::uint64_t imsi, NodeId target, std::function<void(const HandoverTrace&)> done) override
    {
        net_.start_handover(imsi, target, std::move(done));
    }

  private:
    static lte::LteConfig config(const LoadScenario& s)
    {
        lte::LteConfig c;
        c.enb_count = s.cell_count;
        c.radio_latency = s.radio_latency;
        c.backhaul_latency = s.backhaul_latency;
        c.core_service_rate = s.core_service_rate;
        return c;
    }
    lte::LteNetwork net_;
};

std::unique_ptr<Driver> make_driver(sim::Simulator& sim, const LoadScenario& s, Architecture arch)
{
    if (arch == Architecture::Encor)
        return std::make_unique<EncorDriver>(sim, s);
    return std::make_unique<LteDriver>(sim, s);
}

double percentile(std::vector<double> v, double p)
{
    if (v.empty())
        return 0.0;
    std::sort(v.begin(), v.end());
    auto rank = static_cast<std::size_t>(std::ceil(p * static_cast<double>(v.size())));
    return v[std::clamp<std::size_t>(rank, 1, v.size()) - 1];
}

}  // namespace

LoadRow run_load_point(const LoadScenario& s, Architecture arch, double rate)
{
    if (s.ue_count == 0 || s.cells_per_group < 2 || s.cell_count % s.cells_per_group != 0)
        throw std::invalid_argument("load scenario needs UEs and groups of at least two cells");
    if (!(rate > 0.0) || !(s.core_service_rate > 0.0))
        throw std::invalid_argument("load rate and core service rate must be positive");
    if (s.warmup >= s.window)
        throw std::invalid_argument("warm-up must be shorter than the window");

    sim::Simulator sim(s.seed);
    auto net = make_driver(sim, s, arch);
    const auto& cells = net->cells();

    std::vector<std::size_t> where(s.ue_count);
    for (std::size_t i = 0; i < s.ue_count; ++i)
    {
        where[i] = (i * cells.size() / s.ue_count) % cells.size();
        net->add(i + 1, cells[where[i]]);
        if (!net->attach(i + 1))
            throw std::runtime_error("load scenario attach failed for UE " + std::to_string(i + 1));
    }

    LoadRow row;
    row.arch = arch;
    row.rate_per_s = rate;
    const double per_ho = arch == Architecture::Encor ? 2.0 : 15.0;
    row.saturated = rate * per_ho > s.core_service_rate;

    // Same arrival stream for both architectures at a given rate.
    std::mt19937_64 rng(s.seed ^ (static_cast<std::uint64_t>(rate * 1000.0) * 0x9E3779B97F4A7C15ULL));
    std::exponential_distribution<double> gap(rate);

    const SimTime t0 = sim.now();
    const SimTime measure_from = t0 + s.warmup;
    const SimTime t_end = t0 + s.window;
    std::vector<bool> busy(s.ue_count, false);
    std::vector<double> durations;
    std::vector<std::uint32_t> services;

    std::function<void()> arrival = [&] {
        std::vector<std::size_t> idle;
        for (std::size_t i = 0; i < s.ue_count; ++i)
            if (!busy[i])
                idle.push_back(i);
        if (idle.empty())
        {
            ++row.skipped;
        }
        else
        {
            std::size_t ue = idle[std::uniform_int_distribution<std::size_t>(0, idle.size() - 1)(rng)];
            std::size_t group = where[ue] / s.cells_per_group;
            std::size_t offset = std::uniform_int_distribution<std::size_t>(0, s.cells_per_group - 2)(rng);
            std::size_t local = where[ue] % s.cells_per_group;
            if (offset >= local)
                ++offset;
            std::size_t target = group * s.cells_per_group + offset;
            bool measured = sim.now() >= measure_from;
            busy[ue] = true;
            net->handover(ue + 1, cells[target], [&, ue, target, measured](const HandoverTrace& t) {
                busy[ue] = false;
                if (t.completed && !t.failed)
                    where[ue] = target;
                if (!measured)
                    return;
                if (t.completed && !t.failed)
                {
                    ++row.completed;
                    durations.push_back(sim::to_ms(t.duration()));
                    services.push_back(t.core_services);
                }
                else
                {
                    ++row.failed;
                }
            });
        }
        SimTime next = sim.now() + sim::from_seconds(gap(rng));
        if (next < t_end)
            sim.schedule(next, arrival);
    };
    sim.schedule(t0 + sim::from_seconds(gap(rng)), arrival);

    sim.run_until(measure_from);
    const SimTime busy_start = sim.node_stats(net->cpu()).busy_time;
    sim.run_until(t_end);
    const SimTime busy_end = sim.node_stats(net->cpu()).busy_time;
    sim.run();

    row.utilization = sim::to_seconds(busy_end - busy_start) / sim::to_seconds(t_end - measure_from);
    if (!durations.empty())
    {
        double sum = 0.0;
        for (double d : durations)
            sum += d;
        row.mean_ms = sum / static_cast<double>(durations.size());
        row.p95_ms = percentile(durations, 0.95);
        if (durations.size() > 1)
        {
            double ss = 0.0;
            for (double d : durations)
                ss += (d - row.mean_ms) * (d - row.mean_ms);
            row.sd_ms = std::sqrt(ss / static_cast<double>(durations.size() - 1));
        }
        double svc = 0.0;
        for (auto c : services)
        {
            svc += c;
            if (c != services.front())
                row.counts_constant = false;
        }
        row.core_msgs_per_ho = svc / static_cast<double>(services.size());
    }
    return row;
}

LoadResult run_load_sweep(const LoadScenario& scenario)
{
    if (!std::is_sorted(scenario.rates.begin(), scenario.rates.end()))
        throw std::invalid_argument("load rates must be ascending");
    LoadResult out;
    for (Architecture arch : {Architecture::Encor, Architecture::Lte})
        for (double rate : scenario.rates)
            out.rows.push_back(run_load_point(scenario, arch, rate));
    return out;
}

const LoadRow& LoadResult::at(Architecture arch, double rate) const
{
    for (const auto& r : rows)
        if (r.arch == arch && r.rate_per_s == rate)
            return r;
    throw std::out_of_range("no load row for " + std::string(to_string(arch)) + " at " + num(rate));
}

std::string load_csv(const LoadResult& result)
{
    std::string out = "arch,rate_per_s,mean_ms,p95_ms,core_msgs_per_ho,saturated\n";
    for (const auto& r : result.rows)
    {
        out += to_string(r.arch);
        out += ',' + num(r.rate_per_s) + ',' + num(r.mean_ms) + ',' + num(r.p95_ms) + ',' +
               num(r.core_msgs_per_ho) + ',' + (r.saturated ? "true" : "false") + '\n';
    }
    return out;
}

// ---- message table ----

bool MessageRow::matches() const
{
    if (expected_max == 0)
        return total == expected_total && via_core == expected_via_core;
    return total >= expected_total && total <= expected_max && via_core == expected_via_core;
}

bool MessageTable::matches() const
{
    return std::all_of(rows.begin(), rows.end(), [](const MessageRow& r) { return r.matches(); });
}

const MessageRow& MessageTable::row(const std::string& label) const
{
    for (const auto& r : rows)
        if (r.label == label)
            return r;
    throw std::out_of_range("no message row " + label);
}

namespace
{

MessageRow counted(std::string label, const HandoverTrace& t, std::uint32_t total, std::uint32_t core)
{
    auto c = control::count_messages(t);
    MessageRow r;
    r.label = std::move(label);
    r.total = c.total;
    r.via_core = c.via_core;
    r.expected_total = total;
    r.expected_via_core = core;
    if (!t.completed || t.failed)
        r.total = 0;
    return r;
}

HandoverTrace encor_trace(HandoverMode mode)
{
    sim::Simulator sim(1);
    control::EncorNetwork net(sim, control::EncorConfig{});
    net.provision(security::SubscriberRecord{1, key_for(1), 0, 9, security::Unlimited{}});
    net.add_ue(1, key_for(1), net.inb_ids()[0]);
    net.attach(1);
    return mode == HandoverMode::Direct ? net.handover_direct(1, net.inb_ids()[1])
                                        : net.handover_core_assisted(1, net.inb_ids()[1]);
}

}  // namespace

MessageTable run_message_table()
{
    MessageTable table;
    {
        sim::Simulator sim(1);
        lte::LteNetwork net(sim, lte::LteConfig{});
        net.provision(security::SubscriberRecord{1, key_for(1), 0, 9, security::Unlimited{}});
        net.add_ue(1, key_for(1), net.enb_ids()[0]);
        net.attach_lte(1);
        table.rows.push_back(counted("lte", net.s1_handover(1, net.enb_ids()[1]), 15, 15));
    }
    const HandoverTrace core = encor_trace(HandoverMode::CoreAssisted);
    table.rows.push_back(counted("encor", core, 7, 2));
    table.rows.push_back(counted("encor-direct", encor_trace(HandoverMode::Direct), 6, 0));

    // Transport extras: one idle-gap migration of a live stream whose forwarding entry has expired.
    transport::TransportConfig cfg;
    cfg.path.moved_ttl = sim::from_ms(1);
    transport::LiveOptions opt;
    opt.handovers = {sim::from_seconds(2)};
    opt.duration = sim::from_seconds(6);
    const auto base = control::count_messages(core);

    opt.policy.mode = transport::PolicyMode::PassiveOnly;
    auto passive = transport::run_live(cfg, opt);
    MessageRow p;
    p.label = "encor+transport-passive";
    p.total = base.total + static_cast<std::uint32_t>(passive.pings + passive.path_validation_packets);
    p.via_core = base.via_core;
    p.expected_total = 7;
    p.expected_max = 9;
    p.expected_via_core = 2;
    table.rows.push_back(p);

    opt.policy.mode = transport::PolicyMode::PingOnIdle;
    auto ping = transport::run_live(cfg, opt);
    MessageRow q;
    q.label = "encor+transport";
    q.total = base.total + static_cast<std::uint32_t>(ping.pings + ping.path_validation_packets);
    q.via_core = base.via_core;
    q.expected_total = 8;
    q.expected_max = 10;
    q.expected_via_core = 2;
    table.rows.push_back(q);
    return table;
}

namespace
{

std::string expected_text(const MessageRow& r)
{
    std::string t = std::to_string(r.expected_total);
    if (r.expected_max != 0)
        t += "-" + std::to_string(r.expected_max);
    return t + "(" + std::to_string(r.expected_via_core) + ")";
}

}  // namespace

std::string message_table_csv(const MessageTable& table)
{
    std::string out = "label,total,via_core,expected\n";
    for (const auto& r : table.rows)
        out += r.label + ',' + std::to_string(r.total) + ',' + std::to_string(r.via_core) + ',' + expected_text(r) +
               '\n';
    return out;
}

std::string message_table_pretty(const MessageTable& table)
{
    std::ostringstream os;
    os << std::left << std::setw(26) << "handover" << std::setw(12) << "messages" << std::setw(12) << "expected"
       << "ok\n";
    for (const auto& r : table.rows)
    {
        std::string got = std::to_string(r.total) + "(" + std::to_string(r.via_core) + ")";
        os << std::setw(26) << r.label << std::setw(12) << got << std::setw(12) << expected_text(r)
           << (r.matches() ? "yes" : "NO") << '\n';
    }
    return os.str();
}

// ---- path latency ----

PathTopology default_path_topology()
{
    lte::LteConfig lc;
    control::EncorConfig ec;
    PathTopology t;
    t.nodes = {"cell", "sgw", "pgw", "internet"};
    t.links = {{"cell", "sgw", lc.enb_sgw_latency},
               {"sgw", "pgw", lc.sgw_pgw_latency},
               {"pgw", "internet", lc.pgw_internet_latency},
               {"cell", "internet", ec.internet_latency}};
    t.cell = "cell";
    t.anchor = "pgw";
    t.destination = "internet";
    t.radio_latency = lc.radio_latency;
    return t;
}

PathLatency run_path_latency(const PathTopology& topology)
{
    sim::Simulator sim(1);
    std::map<std::string, NodeId> ids;
    for (const auto& n : topology.nodes)
    {
        if (ids.contains(n))
            throw std::invalid_argument("duplicate topology node " + n);
        ids.emplace(n, sim.add_node(sim::NodeConfig{n, 0.0, {}}));
    }
    auto id = [&](const std::string& n) {
        auto it = ids.find(n);
        if (it == ids.end())
            throw std::invalid_argument("unknown topology node " + n);
        return it->second;
    };
    for (const auto& [a, b, lat] : topology.links)
        sim.add_link(id(a), id(b), lat);

    const NodeId cell = id(topology.cell);
    const NodeId dest = id(topology.destination);
    const NodeId anchor = id(topology.anchor);
    PathLatency out;
    out.encor_rtt = 2 * (topology.radio_latency + sim.path_latency(cell, dest));
    out.lte_rtt = 2 * (topology.radio_latency + sim.path_latency(cell, anchor) + sim.path_latency(anchor, dest));
    out.detour = out.lte_rtt - out.encor_rtt;
    return out;
}

}  // namespace encor::experiments
