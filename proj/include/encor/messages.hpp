#pragma once

// Control-plane message vocabulary shared by the EnCoR and LTE models,
// plus handover traces and their accounting.

#include "encor/addressing.hpp"
#include "encor/security.hpp"
#include "encor/sim_kernel.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace encor::control
{

using sim::NodeId;
using sim::SimTime;

enum class MessageKind : std::uint8_t
{
    // Attach (both architectures).
    AttachRequest,
    AuthChallenge,
    AuthResponse,
    AttachAccept,
    AttachReject,
    // Handover.
    HoRequired,
    HoRequest,
    HoRequestAck,
    HoPreparationFailure,
    HoCommand,
    HoConfirm,
    HoCompleteNotify,
    UeContextRelease,
    RelayError,
    RekeyRequest,
    RekeyResponse,
    // LTE only.
    AuthInfoRequest,
    AuthInfoAnswer,
    CreateSessionRequest,
    CreateSessionResponse,
    InitialContextSetup,
    CreateIndirectTunnelReq,
    CreateIndirectTunnelResp,
    EnbStatusTransfer,
    MmeStatusTransfer,
    HoNotify,
    ModifyBearerReq,
    ModifyBearerResp,
    UeContextReleaseCommand,
    UeContextReleaseComplete,
    // Charging.
    CreditRequest,
    CreditGrant,
    OcsRequest,
    OcsGrant,
};

const char* to_string(MessageKind kind);

/// Kind-specific fields. Unused fields stay at their defaults.
struct MessagePayload
{
    std::uint64_t procedure = 0;  // handover / attach id the message belongs to
    std::uint64_t ue = 0;         // subscriber id
    NodeId source_cell;
    NodeId target_cell;
    std::optional<security::SessionKeys> keys;
    std::vector<std::uint8_t> radio_config;
    int qci = 0;
    std::optional<addr::Addr128> ue_addr;
    std::optional<security::Nonce> rand;
    std::optional<security::Autn> autn;
    std::optional<security::Digest> res;
    std::uint32_t teid = 0;
    std::uint64_t bytes = 0;
    std::string cause;

    std::vector<std::uint8_t> serialize() const;
};

struct ControlMessage
{
    MessageKind kind{};
    NodeId src;
    NodeId dst;
    bool via_core = false;
    MessagePayload payload;

    std::vector<std::uint8_t> serialize() const;
};

enum class HandoverMode
{
    CoreAssisted,
    Direct,
    LteS1,
};

const char* to_string(HandoverMode mode);

struct TraceEntry
{
    std::uint32_t seq = 0;
    SimTime time{};
    ControlMessage message;
    std::string src_name;
    std::string dst_name;
    /// Physical link traversals, counting relays; filled on delivery.
    std::uint32_t physical_hops = 0;
};

struct HandoverTrace
{
    std::uint64_t id = 0;
    HandoverMode mode = HandoverMode::CoreAssisted;
    std::uint64_t ue = 0;
    NodeId source;
    NodeId target;
    SimTime start{};
    SimTime end{};
    bool completed = false;
    bool failed = false;
    std::string failure;
    /// Messages serviced by the throttled core processor on behalf of this handover.
    std::uint32_t core_services = 0;
    std::vector<TraceEntry> messages;

    SimTime duration() const { return end - start; }

    /// Columns: seq,time_us,kind,src,dst,via_core
    std::string to_csv() const;
    /// Plain-text message sequence chart.
    std::string to_msc() const;
};

struct MessageCounts
{
    std::map<MessageKind, std::uint32_t> per_kind;
    std::uint32_t total = 0;
    std::uint32_t via_core = 0;
    friend bool operator==(const MessageCounts&, const MessageCounts&) = default;
};

MessageCounts count_messages(const HandoverTrace& trace);
MessageCounts count_messages(const std::vector<ControlMessage>& messages);

}  // namespace encor::control
