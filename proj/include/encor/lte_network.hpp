#pragma once

// LTE reference network: MME, S-GW, P-GW and HSS hosted on one core
// processor, eNBs on the backhaul, GTP tunnel anchoring and the S1 handover
// with downlink buffering.

#include "encor/addressing.hpp"
#include "encor/fabric.hpp"
#include "encor/messages.hpp"
#include "encor/security.hpp"
#include "encor/sim_kernel.hpp"

#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace encor::lte
{

using control::ControlMessage;
using control::HandoverTrace;
using control::MessageKind;
using control::TraceEntry;
using sim::NodeId;

struct GtpTunnel
{
    /// S1-U TEID at the S-GW (uplink) and at the eNB (downlink).
    std::uint32_t teid_up = 0;
    std::uint32_t teid_down = 0;
    NodeId enb;
    /// S5 segment between S-GW and P-GW; stays put across handovers.
    std::uint32_t s5_teid = 0;
};

struct AnchorState
{
    addr::Addr128 public_ip;
    GtpTunnel tunnel;
    bool buffering = false;
    std::deque<std::uint64_t> buffer;
};

enum class LteUeState
{
    Detached,
    Attaching,
    Connected,
    HandingOver,
};

struct LteConfig
{
    std::size_t enb_count = 8;
    sim::SimTime radio_latency = sim::from_ms(5);
    /// eNB to core site, used by S1-MME signalling.
    sim::SimTime backhaul_latency = sim::from_ms(10);
    sim::SimTime enb_sgw_latency = sim::from_ms(10);
    sim::SimTime sgw_pgw_latency = sim::from_ms(5);
    sim::SimTime pgw_internet_latency = sim::from_ms(20);
    sim::SimTime radio_sync = sim::from_ms(10);
    double core_service_rate = 0.0;
    double enb_service_rate = 0.0;
    std::size_t enb_ue_cap = 0;  // 0 = unlimited
    std::size_t buffer_cap = 0;  // 0 = unbounded
    std::uint64_t pgw_locator = 0x2001'0db8'ffff'0000ULL;
};

struct LteAttachResult
{
    std::uint64_t imsi = 0;
    bool ok = false;
    std::string cause;
    std::vector<TraceEntry> messages;
};

struct UserPath
{
    std::vector<std::string> nodes;
    sim::SimTime latency{};
};

struct LteDataStats
{
    std::uint64_t sent = 0;
    std::uint64_t delivered = 0;
    std::uint64_t dropped = 0;
    std::uint64_t buffered = 0;
    std::vector<std::uint64_t> delivered_ids;
};

class LteNetwork
{
  public:
    using HandoverCallback = std::function<void(const HandoverTrace&)>;
    using AttachCallback = std::function<void(const LteAttachResult&)>;

    LteNetwork(sim::Simulator& sim, LteConfig config);
    LteNetwork(const LteNetwork&) = delete;
    LteNetwork& operator=(const LteNetwork&) = delete;

    const LteConfig& config() const { return config_; }
    NodeId mme() const { return mme_; }
    NodeId sgw() const { return sgw_; }
    NodeId pgw() const { return pgw_; }
    NodeId hss() const { return hss_; }
    NodeId core_processor() const { return cpu_; }
    const std::vector<NodeId>& enb_ids() const { return enb_ids_; }
    bool is_core(NodeId node) const { return fabric_.is_core(node); }
    std::string name_of(NodeId node) const;

    void provision(security::SubscriberRecord record);
    NodeId add_ue(std::uint64_t imsi, const security::Key128& k, NodeId cell);
    LteUeState state(std::uint64_t imsi) const;
    std::optional<NodeId> serving_enb(std::uint64_t imsi) const;
    const AnchorState* anchor(std::uint64_t imsi) const;

    void start_attach(std::uint64_t imsi, AttachCallback done);
    LteAttachResult attach_lte(std::uint64_t imsi);

    void start_handover(std::uint64_t imsi, NodeId target, HandoverCallback done);
    HandoverTrace s1_handover(std::uint64_t imsi, NodeId target);

    /// UE to Internet through the tunnels; nullopt when no tunnel exists.
    std::optional<UserPath> route_user_packet(std::uint64_t imsi) const;

    /// Downlink packet from the Internet to the UE's public address.
    void send_downlink(std::uint64_t imsi, std::uint64_t packet_id);
    const LteDataStats& data_plane() const { return data_; }

    const std::vector<TraceEntry>& message_log() const { return log_; }

  private:
    struct UeNode
    {
        NodeId node;
        security::Key128 k{};
        security::UeSqnState sqn;
        std::optional<security::Digest> k_asme;
        std::optional<security::SessionKeys> keys;
        std::optional<NodeId> radio_cell;
        std::optional<NodeId> serving;
        LteUeState state = LteUeState::Detached;
    };
    struct MmeEntry
    {
        std::optional<security::AuthVector> pending;
        std::optional<security::SessionKeys> keys;
        std::optional<NodeId> cell;
    };
    struct Procedure
    {
        bool is_handover = false;
        HandoverTrace trace;
        LteAttachResult attach;
        HandoverCallback on_handover;
        AttachCallback on_attach;
        std::uint32_t next_seq = 1;
        std::uint32_t target_teid = 0;
    };

    UeNode& ue_mut(std::uint64_t imsi);
    void emit(std::uint64_t procedure, ControlMessage msg, bool core_anchored = false);
    ControlMessage make(MessageKind kind, NodeId src, NodeId dst, const ControlMessage* from = nullptr) const;
    void finish_handover(std::uint64_t procedure, bool failed, std::string cause);
    void finish_attach(std::uint64_t procedure, bool ok, std::string cause);

    void on_core(NodeId self, const ControlMessage& msg);
    void on_enb(NodeId self, const ControlMessage& msg);
    void on_ue(std::uint64_t imsi, const ControlMessage& msg);

    void downlink_at_enb(NodeId enb, std::uint64_t imsi, std::uint64_t packet_id);
    void radio_deliver(NodeId enb, std::uint64_t imsi, std::uint64_t packet_id);
    void flush_buffer(std::uint64_t imsi, NodeId target);

    sim::Simulator& sim_;
    LteConfig config_;
    NodeId cpu_;
    NodeId mme_, sgw_, pgw_, hss_;
    control::ControlFabric fabric_;
    std::vector<NodeId> enb_ids_;
    std::map<std::uint32_t, std::string> names_;
    std::map<std::uint32_t, std::size_t> enb_load_;
    std::map<std::uint64_t, security::SubscriberRecord> hss_db_;
    std::map<std::uint64_t, MmeEntry> mme_state_;
    std::map<std::uint64_t, AnchorState> anchors_;
    std::map<std::uint64_t, UeNode> ues_;
    std::map<std::uint64_t, Procedure> procedures_;
    std::uint64_t next_procedure_ = 1;
    std::uint32_t next_teid_ = 0x100;
    std::uint64_t next_public_ = 1;
    std::vector<TraceEntry> log_;
    LteDataStats data_;
};

}  // namespace encor::lte
