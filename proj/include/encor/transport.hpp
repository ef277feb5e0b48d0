#pragma once

// Mobility-tolerant transport over the EnCoR data plane. The server learns
// the client's path passively from received packets; three toy
// applications (bulk download, buffered ABR video, live stream) run on top.

#include "encor/addressing.hpp"
#include "encor/sim_kernel.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace encor::transport
{

/// Connection state relevant to migration.
struct MobiConn
{
    std::uint64_t id = 0;
    /// Address the client's packets currently carry (after NAT).
    addr::Addr128 client_addr;
    /// Where the server sends.
    addr::Addr128 server_path;
    std::uint64_t path_updates = 0;
};

/// The client moved; nothing is sent, so the server does not learn about it.
void client_migrate(MobiConn& conn, const addr::Addr128& new_addr);

/// Server-side receipt. The path changes only for a recognised id arriving from a new address.
/// Returns true when the path changed.
bool server_on_packet(MobiConn& conn, std::uint64_t conn_id, const addr::Addr128& from);

enum class PolicyMode
{
    PassiveOnly,
    PingOnIdle,
};

const char* to_string(PolicyMode mode);

struct MigrationPolicy
{
    PolicyMode mode = PolicyMode::PassiveOnly;
    /// Zero selects 1.5 frame intervals.
    sim::SimTime idle_deadline{0};
};

struct AbrLevel
{
    int level = 1;
    double mbps = 1.0;
};

std::vector<AbrLevel> default_ladder();

/// Level for a buffer length: below thresholds[0] gives level 1, at or above the last gives the top level.
int abr_select(const std::vector<double>& thresholds, double buffer_s);

struct AbrState
{
    double buffer_s = 0.0;
    std::vector<AbrLevel> ladder = default_ladder();
    std::vector<double> thresholds{5.0, 10.0, 15.0, 20.0};
    double chunk_s = 2.0;

    const AbrLevel& select() const;
};

struct PathConfig
{
    sim::SimTime internet_latency = sim::from_ms(20);
    sim::SimTime radio_latency = sim::from_ms(5);
    sim::SimTime inter_inb_latency = sim::from_ms(4);
    double bottleneck_mbps = 50.0;
    std::uint32_t packet_bytes = 1200;
    /// UE is without a cell for this long after receiving the handover command.
    sim::SimTime radio_sync = sim::from_ms(10);
    /// Target to source notification (via the HOP) after the UE confirms.
    sim::SimTime notify_latency = sim::from_ms(4);
    bool forwarding_enabled = true;
    sim::SimTime moved_ttl = addr::RecentlyMovedTable::kDefaultTtl;
};

struct TransportConfig
{
    PathConfig path;
    sim::SimTime max_ack_delay = sim::from_ms(25);
    std::uint32_t ack_every = 2;
    std::uint32_t initial_cwnd_packets = 10;
    std::uint32_t min_cwnd_packets = 2;
    double cwnd_cap_bdp = 1.5;
    std::uint32_t packet_threshold = 3;
    sim::SimTime initial_rto = sim::from_ms(200);
};

struct AppMetrics
{
    std::string app;
    std::string policy;
    std::uint32_t handovers = 0;
    double throughput_mbps = 0.0;
    double retx_rate = 0.0;
    double stall_s = 0.0;
    double buffer_s = 0.0;
    double quality = 0.0;
    double fps = 0.0;
    bool deadlocked = false;

    std::uint64_t data_packets = 0;
    std::uint64_t retransmissions = 0;
    std::uint64_t pings = 0;
    /// PATH_CHALLENGE / PATH_RESPONSE packets that could not ride on another packet.
    std::uint64_t path_validation_packets = 0;
    std::uint64_t frames = 0;
    std::uint64_t downlink_drops = 0;
    std::uint64_t forwarded = 0;
    std::uint64_t path_updates = 0;
    /// Longest gap between consecutive frame deliveries (live only).
    sim::SimTime max_frame_gap{};
    /// Migrations where the client had nothing queued or pending to send when it reattached.
    std::uint32_t idle_migrations = 0;
    /// Longest span, over handovers, from the last downlink packet before reattach to the first one after.
    sim::SimTime max_resume_gap{};

    static std::string csv_header();
    std::string csv_row() const;
};

struct BulkOptions
{
    std::uint64_t file_bytes = 100'000'000;
    std::vector<sim::SimTime> handovers;
    std::uint64_t seed = 1;
    sim::SimTime time_limit = sim::from_seconds(600);
};

struct BufferedOptions
{
    sim::SimTime duration = sim::from_seconds(120);
    std::vector<AbrLevel> ladder = default_ladder();
    std::vector<double> thresholds{5.0, 10.0, 15.0, 20.0};
    double chunk_s = 2.0;
    double max_buffer_s = 40.0;
    /// Quality and buffer averages ignore the start-up ramp before this time.
    sim::SimTime warmup = sim::from_seconds(30);
    std::vector<sim::SimTime> handovers;
    /// When set, each handover fires `align_offset` after the server sends the first
    /// packet of the first chunk requested at or after the listed time.
    bool align_to_chunk = false;
    sim::SimTime align_offset = sim::from_ms(10);
    std::uint64_t seed = 1;
};

struct LiveOptions
{
    sim::SimTime frame_interval = sim::SimTime{41'667};
    std::uint64_t frame_bytes = 4800;
    MigrationPolicy policy;
    std::vector<sim::SimTime> handovers;
    /// When set, each handover lands in the client's idle gap after the first frame sent at or after the listed time.
    bool align_idle = true;
    sim::SimTime duration = sim::from_seconds(30);
    sim::SimTime give_up = sim::from_seconds(5);
    std::uint64_t seed = 1;
};

AppMetrics run_bulk(const TransportConfig& cfg, const BulkOptions& opt);
AppMetrics run_buffered(const TransportConfig& cfg, const BufferedOptions& opt);
AppMetrics run_live(const TransportConfig& cfg, const LiveOptions& opt);

}  // namespace encor::transport
