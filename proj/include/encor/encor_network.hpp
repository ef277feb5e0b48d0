#pragma once

// EnCoR control plane: SubDB + SME in the core, stateless HOPs, and iNBs
// that hold per-UE radio contexts, terminate the user plane and keep a
// recently-moved forwarding table.

#include "encor/addressing.hpp"
#include "encor/fabric.hpp"
#include "encor/messages.hpp"
#include "encor/security.hpp"
#include "encor/sim_kernel.hpp"

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <variant>
#include <vector>

namespace encor::control
{

class ConfigurationError : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

enum class UeState
{
    Detached,
    Attaching,
    Connected,
    HandingOver,
};

const char* to_string(UeState state);

struct UeContext
{
    std::uint64_t imsi = 0;
    UeState state = UeState::Detached;
    std::optional<NodeId> serving_inb;
    std::optional<NodeId> source_inb;
    std::optional<NodeId> target_inb;
    std::optional<addr::UePrivateAddr> private_addr;
    std::optional<security::SessionKeys> keys;
    int qci = 0;
    /// Remaining volume quota carried between iNBs; 0 when the policy is not volume-based.
    std::uint64_t quota_bytes = 0;
};

struct RelayFailure
{
    std::string reason;
};

/// Handover proxy. Holds only its identity and the iNBs registered with it.
class HopNode
{
  public:
    HopNode(NodeId id, std::set<NodeId> inbs) : id_(id), inbs_(std::move(inbs)) {}

    NodeId id() const { return id_; }
    const std::set<NodeId>& inbs() const { return inbs_; }
    bool serves(NodeId inb) const { return inbs_.contains(inb); }
    void connect(NodeId inb) { inbs_.insert(inb); }

    /// Forwards unchanged when the destination iNB is registered here.
    std::variant<ControlMessage, RelayFailure> relay(const ControlMessage& msg) const;

    std::vector<std::uint8_t> serialize_state() const;

  private:
    NodeId id_;
    std::set<NodeId> inbs_;
};

enum class ContextRole
{
    Active,
    Pending,
    Departed,
};

struct InbContext
{
    UeContext ue;
    ContextRole role = ContextRole::Pending;
    std::uint64_t procedure = 0;
};

struct InbNode
{
    NodeId id;
    std::string name;
    addr::InbPrefix prefix;
    std::map<std::uint64_t, InbContext> contexts;
    std::unordered_set<std::uint64_t> radio_attached;
    addr::RecentlyMovedTable moved;
    addr::NatCounters nat;
    std::uint64_t next_crnti = 1;

    std::size_t admitted() const;
};

struct EncorConfig
{
    std::size_t inb_count = 8;
    std::size_t inbs_per_hop = 8;
    sim::SimTime radio_latency = sim::from_ms(5);
    sim::SimTime backhaul_latency = sim::from_ms(10);
    sim::SimTime hop_latency = sim::from_ms(2);
    sim::SimTime internet_latency = sim::from_ms(20);
    sim::SimTime inter_inb_latency = sim::from_ms(4);
    /// Gap between the UE leaving the source cell and reaching the target.
    sim::SimTime radio_sync = sim::from_ms(10);
    double core_service_rate = 0.0;
    double hop_service_rate = 0.0;
    double inb_service_rate = 0.0;
    std::size_t inb_ue_cap = 0;  // 0 = unlimited
    bool rekey_after_direct = false;
    bool forwarding_enabled = true;
    sim::SimTime moved_ttl = addr::RecentlyMovedTable::kDefaultTtl;
    std::uint64_t prefix_base = 0x2001'0db8'0000'0000ULL;
};

struct AttachResult
{
    std::uint64_t imsi = 0;
    bool ok = false;
    std::string cause;
    std::vector<TraceEntry> messages;
};

struct DataPlaneStats
{
    std::uint64_t sent = 0;
    std::uint64_t delivered = 0;
    std::uint64_t dropped = 0;
    std::uint64_t forwarded = 0;
    std::vector<std::uint64_t> delivered_ids;
    std::vector<std::uint64_t> dropped_ids;
};

class EncorNetwork
{
  public:
    using HandoverCallback = std::function<void(const HandoverTrace&)>;
    using AttachCallback = std::function<void(const AttachResult&)>;

    EncorNetwork(sim::Simulator& sim, EncorConfig config);
    EncorNetwork(const EncorNetwork&) = delete;
    EncorNetwork& operator=(const EncorNetwork&) = delete;

    const EncorConfig& config() const { return config_; }
    sim::Simulator& simulator() { return sim_; }
    NodeId sme() const { return sme_; }
    NodeId core_processor() const { return cpu_; }
    const std::vector<NodeId>& inb_ids() const { return inb_ids_; }
    const std::vector<HopNode>& hops() const { return hops_; }
    const InbNode& inb(NodeId id) const;
    bool is_core(NodeId node) const { return fabric_.is_core(node); }
    std::string name_of(NodeId node) const;

    void provision(security::SubscriberRecord record);
    const security::SubscriberRecord* subscriber(std::uint64_t imsi) const;
    /// Creates the UE's node camped on `cell`. The SIM holds `k`.
    NodeId add_ue(std::uint64_t imsi, const security::Key128& k, NodeId cell);
    const UeContext& ue(std::uint64_t imsi) const;
    NodeId ue_node(std::uint64_t imsi) const;
    /// The UE's current key as held by the UE itself.
    const std::optional<security::SessionKeys>& ue_keys(std::uint64_t imsi) const;

    void start_attach(std::uint64_t imsi, AttachCallback done);
    AttachResult attach(std::uint64_t imsi);
    /// Forgets all session state for the UE (SME, iNB and UE side).
    void detach(std::uint64_t imsi);

    /// Makes the SME present `vector` on the next attach of `imsi` instead of a fresh one.
    void inject_stale_vector(std::uint64_t imsi, const security::AuthVector& vector);

    /// Throws ConfigurationError when the cells share no HOP, or the UE is not Connected at `source`.
    void start_handover(std::uint64_t imsi, NodeId target, HandoverMode mode, HandoverCallback done);
    HandoverTrace handover_core_assisted(std::uint64_t imsi, NodeId target);
    HandoverTrace handover_direct(std::uint64_t imsi, NodeId target);

    std::optional<NodeId> shared_hop(NodeId a, NodeId b) const;
    std::uint64_t hop_logged_releases() const { return hop_logged_releases_; }
    std::uint64_t relay_errors() const { return fabric_.relay_errors(); }

    /// Downlink packet from the Internet addressed to a public (locator, identifier) address.
    void send_downlink(const addr::Addr128& dest, std::uint64_t packet_id);
    const DataPlaneStats& data_plane() const { return data_; }

    /// Every message sent through the fabric, in send order.
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
        UeContext context;
    };
    struct SmeEntry
    {
        std::optional<security::AuthVector> pending;
        std::optional<security::Digest> k_asme;
        std::optional<security::SessionKeys> keys;
        std::optional<NodeId> serving;
    };
    struct Procedure
    {
        bool is_handover = false;
        HandoverTrace trace;
        AttachResult attach;
        HandoverCallback on_handover;
        AttachCallback on_attach;
        std::optional<NodeId> hop;
        std::uint32_t next_seq = 1;
    };

    InbNode& inb_mut(NodeId id);
    UeNode& ue_mut(std::uint64_t imsi);
    const HopNode* hop_node(NodeId id) const;
    std::optional<NodeId> inb_for_locator(std::uint64_t locator) const;

    void emit(std::uint64_t procedure, ControlMessage msg, std::optional<NodeId> relay = std::nullopt);
    void finish_handover(std::uint64_t procedure, bool failed, std::string cause);
    void finish_attach(std::uint64_t procedure, bool ok, std::string cause);

    void on_sme(const ControlMessage& msg);
    void on_inb(NodeId self, const ControlMessage& msg);
    void on_ue(std::uint64_t imsi, const ControlMessage& msg);
    void on_hop_terminal(const ControlMessage& msg);

    void inb_admit(InbNode& tgt, const ControlMessage& msg, security::SessionKeys keys);
    void downlink_at(NodeId cell, const addr::Addr128& dest, std::uint64_t packet_id);

    sim::Simulator& sim_;
    EncorConfig config_;
    NodeId cpu_;
    NodeId sme_;
    ControlFabric fabric_;
    std::vector<NodeId> inb_ids_;
    std::unordered_map<std::uint32_t, InbNode> inbs_;
    std::vector<HopNode> hops_;
    std::unordered_map<std::uint32_t, std::string> names_;
    std::map<std::uint64_t, security::SubscriberRecord> subdb_;
    std::map<std::uint64_t, SmeEntry> sme_state_;
    std::map<std::uint64_t, security::AuthVector> injected_;
    std::map<std::uint64_t, UeNode> ues_;
    std::unordered_map<std::uint32_t, std::uint64_t> ue_by_node_;
    std::map<std::uint64_t, Procedure> procedures_;
    std::uint64_t next_procedure_ = 1;
    std::uint64_t hop_logged_releases_ = 0;
    std::vector<TraceEntry> log_;
    DataPlaneStats data_;
};

}  // namespace encor::control
