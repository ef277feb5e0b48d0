#pragma once

// Headline scenarios: handover completion under core load, the per-handover
// message table, and user-plane path latency with and without an anchor.

#include "encor/messages.hpp"
#include "encor/sim_kernel.hpp"
#include "encor/transport.hpp"

#include <cstdint>
#include <string>
#include <tuple>
#include <vector>

namespace encor::experiments
{

enum class Architecture
{
    Encor,
    Lte,
};

const char* to_string(Architecture arch);

struct LoadScenario
{
    std::size_t ue_count = 32;
    std::size_t cell_count = 64;
    std::size_t cells_per_group = 8;
    /// Offered handovers per second, ascending.
    std::vector<double> rates{1, 2, 4, 8, 16, 32, 48, 60, 64};
    /// Core processor throttle, messages per second, identical for both architectures.
    double core_service_rate = 1000.0;
    sim::SimTime radio_latency = sim::from_ms(5);
    sim::SimTime backhaul_latency = sim::from_ms(10);
    sim::SimTime window = sim::from_seconds(60);
    /// Handovers started before this offset into the window are not measured.
    sim::SimTime warmup = sim::from_seconds(5);
    std::uint64_t seed = 1;
};

struct LoadRow
{
    Architecture arch = Architecture::Encor;
    double rate_per_s = 0.0;
    double mean_ms = 0.0;
    double p95_ms = 0.0;
    double core_msgs_per_ho = 0.0;
    bool saturated = false;

    /// Sample standard deviation of the measured completion times.
    double sd_ms = 0.0;
    std::uint64_t completed = 0;
    std::uint64_t failed = 0;
    /// Arrivals dropped because every UE was already mid-handover.
    std::uint64_t skipped = 0;
    /// Core processor busy fraction over the window.
    double utilization = 0.0;
    /// Every measured trace had the same core service count.
    bool counts_constant = true;
};

struct LoadResult
{
    std::vector<LoadRow> rows;

    const LoadRow& at(Architecture arch, double rate) const;
};

/// One point: a fresh network, Poisson handover arrivals for the window, then a drain.
LoadRow run_load_point(const LoadScenario& scenario, Architecture arch, double rate);
/// Both architectures at every rate on the same topology and throttle.
LoadResult run_load_sweep(const LoadScenario& scenario);
/// Header `arch,rate_per_s,mean_ms,p95_ms,core_msgs_per_ho,saturated`.
std::string load_csv(const LoadResult& result);

struct MessageRow
{
    std::string label;
    std::uint32_t total = 0;
    std::uint32_t via_core = 0;
    std::uint32_t expected_total = 0;
    std::uint32_t expected_via_core = 0;
    /// For transport rows the total is a range rather than a constant.
    std::uint32_t expected_max = 0;

    bool matches() const;
};

struct MessageTable
{
    std::vector<MessageRow> rows;

    bool matches() const;
    const MessageRow& row(const std::string& label) const;
};

/// One canonical handover per architecture and mode, plus transport-layer extras
/// measured from a live-stream migration with and without the ping fix.
MessageTable run_message_table();
/// Header `label,total,via_core,expected`.
std::string message_table_csv(const MessageTable& table);
std::string message_table_pretty(const MessageTable& table);

struct PathTopology
{
    std::vector<std::string> nodes;
    std::vector<std::tuple<std::string, std::string, sim::SimTime>> links;
    std::string cell;
    std::string anchor;
    std::string destination;
    sim::SimTime radio_latency = sim::from_ms(5);
};

struct PathLatency
{
    /// UE to destination and back.
    sim::SimTime encor_rtt{};
    sim::SimTime lte_rtt{};
    sim::SimTime detour{};
};

/// Cell to S-GW to P-GW to Internet versus local egress at the cell, from the LTE defaults.
PathTopology default_path_topology();
PathLatency run_path_latency(const PathTopology& topology);

}  // namespace encor::experiments
