#include "encor/messages.hpp"

#include <algorithm>
#include <sstream>

namespace encor::control
{

const char* to_string(MessageKind kind)
{
    switch (kind)
    {
    case MessageKind::AttachRequest: return "AttachRequest";
    case MessageKind::AuthChallenge: return "AuthChallenge";
    case MessageKind::AuthResponse: return "AuthResponse";
    case MessageKind::AttachAccept: return "AttachAccept";
    case MessageKind::AttachReject: return "AttachReject";
    case MessageKind::HoRequired: return "HoRequired";
    case MessageKind::HoRequest: return "HoRequest";
    case MessageKind::HoRequestAck: return "HoRequestAck";
    case MessageKind::HoPreparationFailure: return "HoPreparationFailure";
    case MessageKind::HoCommand: return "HoCommand";
    case MessageKind::HoConfirm: return "HoConfirm";
    case MessageKind::HoCompleteNotify: return "HoCompleteNotify";
    case MessageKind::UeContextRelease: return "UeContextRelease";
    case MessageKind::RelayError: return "RelayError";
    case MessageKind::RekeyRequest: return "RekeyRequest";
    case MessageKind::RekeyResponse: return "RekeyResponse";
    case MessageKind::AuthInfoRequest: return "AuthInfoRequest";
    case MessageKind::AuthInfoAnswer: return "AuthInfoAnswer";
    case MessageKind::CreateSessionRequest: return "CreateSessionRequest";
    case MessageKind::CreateSessionResponse: return "CreateSessionResponse";
    case MessageKind::InitialContextSetup: return "InitialContextSetup";
    case MessageKind::CreateIndirectTunnelReq: return "CreateIndirectTunnelReq";
    case MessageKind::CreateIndirectTunnelResp: return "CreateIndirectTunnelResp";
    case MessageKind::EnbStatusTransfer: return "EnbStatusTransfer";
    case MessageKind::MmeStatusTransfer: return "MmeStatusTransfer";
    case MessageKind::HoNotify: return "HoNotify";
    case MessageKind::ModifyBearerReq: return "ModifyBearerReq";
    case MessageKind::ModifyBearerResp: return "ModifyBearerResp";
    case MessageKind::UeContextReleaseCommand: return "UeContextReleaseCommand";
    case MessageKind::UeContextReleaseComplete: return "UeContextReleaseComplete";
    case MessageKind::CreditRequest: return "CreditRequest";
    case MessageKind::CreditGrant: return "CreditGrant";
    case MessageKind::OcsRequest: return "OcsRequest";
    case MessageKind::OcsGrant: return "OcsGrant";
    }
    return "Unknown";
}

const char* to_string(HandoverMode mode)
{
    switch (mode)
    {
    case HandoverMode::CoreAssisted: return "core-assisted";
    case HandoverMode::Direct: return "direct";
    case HandoverMode::LteS1: return "lte-s1";
    }
    return "unknown";
}

namespace
{

class ByteWriter
{
  public:
    void u8(std::uint8_t v) { out_.push_back(v); }
    void u32(std::uint32_t v)
    {
        for (int i = 3; i >= 0; --i)
            out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v)
    {
        for (int i = 7; i >= 0; --i)
            out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    template <typename Range>
    void bytes(const Range& r)
    {
        u32(static_cast<std::uint32_t>(std::size(r)));
        out_.insert(out_.end(), std::begin(r), std::end(r));
    }
    template <typename T, typename Fn>
    void opt(const std::optional<T>& v, Fn&& write)
    {
        u8(v.has_value() ? 1 : 0);
        if (v)
            write(*v);
    }
    std::vector<std::uint8_t> take() { return std::move(out_); }

  private:
    std::vector<std::uint8_t> out_;
};

void write_payload(ByteWriter& w, const MessagePayload& p)
{
    w.u64(p.procedure);
    w.u64(p.ue);
    w.u32(p.source_cell.value);
    w.u32(p.target_cell.value);
    w.opt(p.keys, [&](const security::SessionKeys& k) {
        w.bytes(k.k_enb);
        w.u32(k.ncc);
    });
    w.bytes(p.radio_config);
    w.u32(static_cast<std::uint32_t>(p.qci));
    w.opt(p.ue_addr, [&](const addr::Addr128& a) {
        w.u64(a.locator);
        w.u64(a.identifier);
    });
    w.opt(p.rand, [&](const security::Nonce& n) { w.bytes(n); });
    w.opt(p.autn, [&](const security::Autn& a) {
        w.u64(a.sqn);
        w.bytes(a.mac);
    });
    w.opt(p.res, [&](const security::Digest& d) { w.bytes(d); });
    w.u32(p.teid);
    w.u64(p.bytes);
    w.bytes(p.cause);
}

}  // namespace

std::vector<std::uint8_t> MessagePayload::serialize() const
{
    ByteWriter w;
    write_payload(w, *this);
    return w.take();
}

std::vector<std::uint8_t> ControlMessage::serialize() const
{
    ByteWriter w;
    w.u8(static_cast<std::uint8_t>(kind));
    w.u32(src.value);
    w.u32(dst.value);
    w.u8(via_core ? 1 : 0);
    write_payload(w, payload);
    return w.take();
}

std::string HandoverTrace::to_csv() const
{
    std::ostringstream out;
    out << "seq,time_us,kind,src,dst,via_core\n";
    for (const auto& e : messages)
    {
        out << e.seq << ',' << e.time.count() << ',' << to_string(e.message.kind) << ','
            << e.src_name << ',' << e.dst_name << ',' << (e.message.via_core ? 1 : 0) << '\n';
    }
    return out.str();
}

std::string HandoverTrace::to_msc() const
{
    std::ostringstream out;
    out << "# " << to_string(mode) << " handover of ue " << ue
        << (failed ? " (failed: " + failure + ")" : "") << '\n';
    std::size_t width = 0;
    for (const auto& e : messages)
        width = std::max({width, e.src_name.size(), e.dst_name.size()});
    for (const auto& e : messages)
    {
        std::string src = e.src_name;
        src.resize(width, ' ');
        out << std::string(3 - std::min<std::size_t>(3, std::to_string(e.seq).size()), ' ')
            << e.seq << "  t=" << e.time.count() << "us  " << src << " --"
            << to_string(e.message.kind) << "--> " << e.dst_name
            << (e.message.via_core ? "  [core]" : "") << '\n';
    }
    return out.str();
}

MessageCounts count_messages(const HandoverTrace& trace)
{
    MessageCounts c;
    for (const auto& e : trace.messages)
    {
        ++c.per_kind[e.message.kind];
        ++c.total;
        if (e.message.via_core)
            ++c.via_core;
    }
    return c;
}

MessageCounts count_messages(const std::vector<ControlMessage>& messages)
{
    MessageCounts c;
    for (const auto& m : messages)
    {
        ++c.per_kind[m.kind];
        ++c.total;
        if (m.via_core)
            ++c.via_core;
    }
    return c;
}

}  // namespace encor::control
