#include "encor/lte_network.hpp"

#include <stdexcept>

namespace encor::lte
{

namespace
{

NodeId make_node(sim::Simulator& sim, std::string name, double rate)
{
    return sim.add_node(sim::NodeConfig{std::move(name), rate, sim::ServiceModel::Deterministic});
}

std::vector<std::uint8_t> radio_config(NodeId target, std::uint32_t ncc)
{
    std::vector<std::uint8_t> out;
    for (std::uint32_t v : {target.value, ncc})
        for (int i = 3; i >= 0; --i)
            out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    return out;
}

std::uint32_t radio_config_ncc(const std::vector<std::uint8_t>& cfg)
{
    if (cfg.size() < 8)
        throw std::invalid_argument("radio configuration container too short");
    std::uint32_t v = 0;
    for (std::size_t i = 4; i < 8; ++i)
        v = (v << 8) | cfg[i];
    return v;
}

}  // namespace

LteNetwork::LteNetwork(sim::Simulator& sim, LteConfig config)
    : sim_(sim),
      config_(std::move(config)),
      cpu_(make_node(sim_, "core-cpu", config_.core_service_rate)),
      mme_(make_node(sim_, "mme", 0.0)),
      sgw_(make_node(sim_, "sgw", 0.0)),
      pgw_(make_node(sim_, "pgw", 0.0)),
      hss_(make_node(sim_, "hss", 0.0)),
      fabric_(sim_, cpu_)
{
    if (config_.enb_count == 0)
        throw std::invalid_argument("need at least one eNB");
    names_[cpu_.value] = "core-cpu";
    const std::pair<NodeId, const char*> core[] = {{mme_, "mme"}, {sgw_, "sgw"}, {pgw_, "pgw"}, {hss_, "hss"}};
    for (const auto& [id, name] : core)
    {
        names_[id.value] = name;
        sim_.add_link(cpu_, id, sim::SimTime{0});
        fabric_.add_core_element(id);
        fabric_.bind(id, [this, id = id](const ControlMessage& m) { on_core(id, m); });
    }
    fabric_.on_core_service([this](const ControlMessage& m) {
        auto it = procedures_.find(m.payload.procedure);
        if (it != procedures_.end())
            ++it->second.trace.core_services;
    });

    for (std::size_t i = 0; i < config_.enb_count; ++i)
    {
        const std::string name = "enb-" + std::to_string(i);
        const NodeId id = make_node(sim_, name, config_.enb_service_rate);
        names_[id.value] = name;
        enb_ids_.push_back(id);
        enb_load_[id.value] = 0;
        sim_.add_link(id, cpu_, config_.backhaul_latency);
        fabric_.bind(id, [this, id](const ControlMessage& m) { on_enb(id, m); });
    }
}

std::string LteNetwork::name_of(NodeId node) const
{
    auto it = names_.find(node.value);
    return it == names_.end() ? "node-" + std::to_string(node.value) : it->second;
}

void LteNetwork::provision(security::SubscriberRecord record)
{
    const auto imsi = record.imsi;
    hss_db_[imsi] = std::move(record);
}

NodeId LteNetwork::add_ue(std::uint64_t imsi, const security::Key128& k, NodeId cell)
{
    if (ues_.contains(imsi))
        throw std::invalid_argument("duplicate UE " + std::to_string(imsi));
    if (!enb_load_.contains(cell.value))
        throw std::out_of_range("not an eNB: " + std::to_string(cell.value));
    const std::string name = "ue-" + std::to_string(imsi);
    const NodeId id = make_node(sim_, name, 0.0);
    names_[id.value] = name;
    sim_.add_link(id, cell, config_.radio_latency);
    UeNode node;
    node.node = id;
    node.k = k;
    node.radio_cell = cell;
    ues_.emplace(imsi, std::move(node));
    fabric_.bind(id, [this, imsi](const ControlMessage& m) { on_ue(imsi, m); });
    return id;
}

LteNetwork::UeNode& LteNetwork::ue_mut(std::uint64_t imsi)
{
    auto it = ues_.find(imsi);
    if (it == ues_.end())
        throw std::out_of_range("unknown UE " + std::to_string(imsi));
    return it->second;
}

LteUeState LteNetwork::state(std::uint64_t imsi) const
{
    auto it = ues_.find(imsi);
    if (it == ues_.end())
        throw std::out_of_range("unknown UE " + std::to_string(imsi));
    return it->second.state;
}

std::optional<NodeId> LteNetwork::serving_enb(std::uint64_t imsi) const
{
    auto it = ues_.find(imsi);
    return it == ues_.end() ? std::nullopt : it->second.serving;
}

const AnchorState* LteNetwork::anchor(std::uint64_t imsi) const
{
    auto it = anchors_.find(imsi);
    return it == anchors_.end() ? nullptr : &it->second;
}

ControlMessage LteNetwork::make(MessageKind kind, NodeId src, NodeId dst, const ControlMessage* from) const
{
    ControlMessage m;
    if (from)
        m.payload = from->payload;
    m.payload.cause.clear();
    m.kind = kind;
    m.src = src;
    m.dst = dst;
    return m;
}

void LteNetwork::emit(std::uint64_t procedure, ControlMessage msg, bool core_anchored)
{
    msg.payload.procedure = procedure;
    ControlMessage sent = fabric_.send(std::move(msg), std::nullopt, core_anchored);
    TraceEntry entry;
    entry.time = sim_.now();
    entry.message = sent;
    entry.src_name = name_of(sent.src);
    entry.dst_name = name_of(sent.dst);
    auto it = procedures_.find(procedure);
    if (it != procedures_.end())
    {
        entry.seq = it->second.next_seq++;
        if (it->second.is_handover)
            it->second.trace.messages.push_back(entry);
        else
            it->second.attach.messages.push_back(entry);
    }
    log_.push_back(std::move(entry));
}

void LteNetwork::finish_handover(std::uint64_t procedure, bool failed, std::string cause)
{
    auto it = procedures_.find(procedure);
    if (it == procedures_.end())
        return;
    Procedure proc = std::move(it->second);
    procedures_.erase(it);
    proc.trace.end = sim_.now();
    proc.trace.completed = !failed;
    proc.trace.failed = failed;
    proc.trace.failure = std::move(cause);
    if (proc.on_handover)
        proc.on_handover(proc.trace);
}

void LteNetwork::finish_attach(std::uint64_t procedure, bool ok, std::string cause)
{
    auto it = procedures_.find(procedure);
    if (it == procedures_.end())
        return;
    Procedure proc = std::move(it->second);
    procedures_.erase(it);
    proc.attach.ok = ok;
    proc.attach.cause = std::move(cause);
    if (proc.on_attach)
        proc.on_attach(proc.attach);
}

// ---- attach ---------------------------------------------------------------

void LteNetwork::start_attach(std::uint64_t imsi, AttachCallback done)
{
    auto& ue = ue_mut(imsi);
    if (ue.state != LteUeState::Detached)
        throw std::logic_error("attach requires a Detached UE");
    const auto id = next_procedure_++;
    Procedure proc;
    proc.attach.imsi = imsi;
    proc.on_attach = std::move(done);
    procedures_.emplace(id, std::move(proc));
    ue.state = LteUeState::Attaching;
    auto m = make(MessageKind::AttachRequest, ue.node, mme_);
    m.payload.ue = imsi;
    m.payload.source_cell = *ue.radio_cell;
    emit(id, std::move(m));
}

LteAttachResult LteNetwork::attach_lte(std::uint64_t imsi)
{
    std::optional<LteAttachResult> out;
    start_attach(imsi, [&out](const LteAttachResult& r) { out = r; });
    while (!out && sim_.step())
    {
    }
    if (!out)
        throw std::logic_error("attach did not complete");
    return *out;
}

// ---- handover -------------------------------------------------------------

void LteNetwork::start_handover(std::uint64_t imsi, NodeId target, HandoverCallback done)
{
    auto& ue = ue_mut(imsi);
    if (ue.state != LteUeState::Connected || !ue.serving)
        throw std::logic_error("handover requires a Connected UE");
    if (!enb_load_.contains(target.value))
        throw std::out_of_range("not an eNB: " + std::to_string(target.value));
    if (target == *ue.serving)
        throw std::invalid_argument("source and target cell are the same");

    const auto id = next_procedure_++;
    Procedure proc;
    proc.is_handover = true;
    proc.trace.id = id;
    proc.trace.mode = control::HandoverMode::LteS1;
    proc.trace.ue = imsi;
    proc.trace.source = *ue.serving;
    proc.trace.target = target;
    proc.trace.start = sim_.now();
    proc.on_handover = std::move(done);
    procedures_.emplace(id, std::move(proc));
    ue.state = LteUeState::HandingOver;

    auto m = make(MessageKind::HoRequired, *ue.serving, mme_);
    m.payload.ue = imsi;
    m.payload.source_cell = *ue.serving;
    m.payload.target_cell = target;
    emit(id, std::move(m));
}

HandoverTrace LteNetwork::s1_handover(std::uint64_t imsi, NodeId target)
{
    std::optional<HandoverTrace> out;
    start_handover(imsi, target, [&out](const HandoverTrace& t) { out = t; });
    while (!out && sim_.step())
    {
    }
    if (!out)
        throw std::logic_error("handover did not complete");
    return *out;
}

// ---- node behaviour ---------------------------------------------------------

void LteNetwork::on_core(NodeId self, const ControlMessage& msg)
{
    const auto imsi = msg.payload.ue;
    const auto proc = msg.payload.procedure;
    auto& entry = mme_state_[imsi];

    if (self == hss_)
    {
        if (msg.kind != MessageKind::AuthInfoRequest)
            return;
        auto reply = make(MessageKind::AuthInfoAnswer, hss_, mme_, &msg);
        auto rec = hss_db_.find(imsi);
        if (rec == hss_db_.end())
        {
            reply.payload.cause = "unknown-subscriber";
        }
        else
        {
            security::Nonce rand{};
            for (auto& b : rand)
                b = static_cast<std::uint8_t>(sim_.rng()());
            entry.pending = security::generate_auth_vector(rec->second, rand);
            reply.payload.rand = entry.pending->rand;
            reply.payload.autn = entry.pending->autn;
        }
        emit(proc, std::move(reply));
        return;
    }

    if (self == sgw_)
    {
        auto& a = anchors_[imsi];
        if (msg.kind == MessageKind::CreateSessionRequest)
        {
            a.public_ip = addr::Addr128{config_.pgw_locator, next_public_++};
            a.tunnel.teid_up = next_teid_++;
            a.tunnel.s5_teid = next_teid_++;
            auto reply = make(MessageKind::CreateSessionResponse, sgw_, mme_, &msg);
            reply.payload.teid = a.tunnel.teid_up;
            reply.payload.ue_addr = a.public_ip;
            emit(proc, std::move(reply));
        }
        else if (msg.kind == MessageKind::CreateIndirectTunnelReq)
        {
            auto reply = make(MessageKind::CreateIndirectTunnelResp, sgw_, mme_, &msg);
            reply.payload.teid = next_teid_++;
            emit(proc, std::move(reply));
        }
        else if (msg.kind == MessageKind::ModifyBearerReq)
        {
            a.tunnel.enb = msg.payload.target_cell;
            a.tunnel.teid_down = msg.payload.teid;
            a.tunnel.teid_up = next_teid_++;
            emit(proc, make(MessageKind::ModifyBearerResp, sgw_, mme_, &msg));
        }
        return;
    }

    if (self != mme_)
        return;

    switch (msg.kind)
    {
    case MessageKind::AttachRequest:
        entry.cell = msg.payload.source_cell;
        emit(proc, make(MessageKind::AuthInfoRequest, mme_, hss_, &msg));
        return;
    case MessageKind::AuthInfoAnswer: {
        const auto ue_node = ue_mut(imsi).node;
        if (!msg.payload.cause.empty())
        {
            auto reject = make(MessageKind::AttachReject, mme_, ue_node, &msg);
            reject.payload.cause = msg.payload.cause;
            emit(proc, std::move(reject));
            return;
        }
        emit(proc, make(MessageKind::AuthChallenge, mme_, ue_node, &msg));
        return;
    }
    case MessageKind::AuthResponse: {
        if (!entry.pending || !msg.payload.res || *msg.payload.res != entry.pending->xres)
        {
            auto reject = make(MessageKind::AttachReject, mme_, msg.src, &msg);
            reject.payload.cause = "auth-failure";
            emit(proc, std::move(reject));
            return;
        }
        entry.keys = security::derive_k_enb(entry.pending->k_asme);
        entry.pending.reset();
        emit(proc, make(MessageKind::CreateSessionRequest, mme_, sgw_, &msg));
        return;
    }
    case MessageKind::CreateSessionResponse: {
        auto setup = make(MessageKind::InitialContextSetup, mme_, *entry.cell, &msg);
        setup.payload.keys = entry.keys;
        setup.payload.qci = hss_db_.at(imsi).qci;
        emit(proc, std::move(setup));
        return;
    }
    case MessageKind::HoRequired: {
        entry.keys = security::chain_k_enb(*entry.keys);
        auto req = make(MessageKind::HoRequest, mme_, msg.payload.target_cell, &msg);
        req.payload.keys = entry.keys;
        emit(proc, std::move(req));
        return;
    }
    case MessageKind::HoRequestAck:
        emit(proc, make(MessageKind::CreateIndirectTunnelReq, mme_, sgw_, &msg));
        return;
    case MessageKind::HoPreparationFailure: {
        auto fail = make(MessageKind::HoPreparationFailure, mme_, msg.payload.source_cell, &msg);
        fail.payload.cause = msg.payload.cause;
        emit(proc, std::move(fail));
        return;
    }
    case MessageKind::CreateIndirectTunnelResp:
        emit(proc, make(MessageKind::HoCommand, mme_, msg.payload.source_cell, &msg));
        return;
    case MessageKind::EnbStatusTransfer:
        emit(proc, make(MessageKind::MmeStatusTransfer, mme_, msg.payload.target_cell, &msg));
        return;
    case MessageKind::HoNotify: {
        auto pit = procedures_.find(proc);
        auto req = make(MessageKind::ModifyBearerReq, mme_, sgw_, &msg);
        if (pit != procedures_.end())
            req.payload.teid = pit->second.target_teid;
        emit(proc, std::move(req));
        return;
    }
    case MessageKind::ModifyBearerResp:
        emit(proc, make(MessageKind::UeContextReleaseCommand, mme_, msg.payload.source_cell, &msg));
        return;
    case MessageKind::UeContextReleaseComplete: {
        entry.cell = msg.payload.target_cell;
        finish_handover(proc, false, "");
        return;
    }
    default:
        return;
    }
}

void LteNetwork::on_enb(NodeId self, const ControlMessage& msg)
{
    const auto imsi = msg.payload.ue;
    const auto proc = msg.payload.procedure;
    switch (msg.kind)
    {
    case MessageKind::InitialContextSetup: {
        auto& a = anchors_[imsi];
        a.tunnel.enb = self;
        a.tunnel.teid_down = next_teid_++;
        ++enb_load_[self.value];
        auto accept = make(MessageKind::AttachAccept, self, ue_mut(imsi).node, &msg);
        accept.payload.keys.reset();
        emit(proc, std::move(accept));
        return;
    }
    case MessageKind::HoRequest: {
        if (config_.enb_ue_cap != 0 && enb_load_[self.value] >= config_.enb_ue_cap)
        {
            auto fail = make(MessageKind::HoPreparationFailure, self, mme_, &msg);
            fail.payload.keys.reset();
            fail.payload.cause = "admission-refused";
            emit(proc, std::move(fail));
            return;
        }
        ++enb_load_[self.value];
        if (auto pit = procedures_.find(proc); pit != procedures_.end())
            pit->second.target_teid = next_teid_++;
        auto ack = make(MessageKind::HoRequestAck, self, mme_, &msg);
        ack.payload.radio_config = radio_config(self, msg.payload.keys ? msg.payload.keys->ncc : 0);
        ack.payload.keys.reset();
        emit(proc, std::move(ack));
        return;
    }
    case MessageKind::HoPreparationFailure: {
        ue_mut(imsi).state = LteUeState::Connected;
        finish_handover(proc, true, msg.payload.cause);
        return;
    }
    case MessageKind::HoCommand: {
        emit(proc, make(MessageKind::HoCommand, self, ue_mut(imsi).node, &msg), true);
        anchors_[imsi].buffering = true;
        emit(proc, make(MessageKind::EnbStatusTransfer, self, mme_, &msg));
        return;
    }
    case MessageKind::MmeStatusTransfer:
        return;
    case MessageKind::HoConfirm: {
        auto& ue = ue_mut(imsi);
        ue.serving = self;
        ue.state = LteUeState::Connected;
        flush_buffer(imsi, self);
        emit(proc, make(MessageKind::HoNotify, self, mme_, &msg));
        return;
    }
    case MessageKind::UeContextReleaseCommand: {
        auto& load = enb_load_[self.value];
        if (load > 0)
            --load;
        emit(proc, make(MessageKind::UeContextReleaseComplete, self, mme_, &msg));
        return;
    }
    default:
        return;
    }
}

void LteNetwork::on_ue(std::uint64_t imsi, const ControlMessage& msg)
{
    auto& ue = ue_mut(imsi);
    const auto proc = msg.payload.procedure;
    switch (msg.kind)
    {
    case MessageKind::AuthChallenge: {
        if (!msg.payload.rand || !msg.payload.autn)
            return;
        auto r = security::ue_process_challenge(ue.k, ue.sqn, *msg.payload.rand, *msg.payload.autn);
        if (auto* f = std::get_if<security::AuthFailure>(&r))
        {
            ue.state = LteUeState::Detached;
            finish_attach(proc, false, security::to_string(*f));
            return;
        }
        const auto& resp = std::get<security::AuthResponse>(r);
        ue.k_asme = resp.k_asme;
        auto out = make(MessageKind::AuthResponse, ue.node, mme_, &msg);
        out.payload.rand.reset();
        out.payload.autn.reset();
        out.payload.res = resp.res;
        emit(proc, std::move(out));
        return;
    }
    case MessageKind::AttachAccept:
        ue.keys = security::derive_k_enb(*ue.k_asme);
        ue.serving = msg.src;
        ue.state = LteUeState::Connected;
        finish_attach(proc, true, "");
        return;
    case MessageKind::AttachReject:
        ue.state = LteUeState::Detached;
        finish_attach(proc, false, msg.payload.cause);
        return;
    case MessageKind::HoCommand: {
        const NodeId source = msg.payload.source_cell;
        const NodeId target = msg.payload.target_cell;
        const auto ncc = radio_config_ncc(msg.payload.radio_config);
        sim_.remove_link(ue.node, source);
        ue.radio_cell.reset();
        ControlMessage confirm = make(MessageKind::HoConfirm, ue.node, target, &msg);
        confirm.payload.radio_config.clear();
        sim_.schedule_in(config_.radio_sync, [this, imsi, target, ncc, proc, confirm]() mutable {
            auto& u = ue_mut(imsi);
            sim_.add_link(u.node, target, config_.radio_latency);
            u.radio_cell = target;
            while (u.keys && u.keys->ncc < ncc)
                u.keys = security::chain_k_enb(*u.keys);
            emit(proc, std::move(confirm), true);
        });
        return;
    }
    default:
        return;
    }
}

// ---- user plane -------------------------------------------------------------

std::optional<UserPath> LteNetwork::route_user_packet(std::uint64_t imsi) const
{
    auto a = anchors_.find(imsi);
    auto u = ues_.find(imsi);
    if (a == anchors_.end() || u == ues_.end() || a->second.tunnel.teid_down == 0 || !u->second.serving)
        return std::nullopt;
    UserPath p;
    p.nodes = {name_of(u->second.node), name_of(a->second.tunnel.enb), "sgw", "pgw", "internet"};
    p.latency = config_.radio_latency + config_.enb_sgw_latency + config_.sgw_pgw_latency +
                config_.pgw_internet_latency;
    return p;
}

void LteNetwork::send_downlink(std::uint64_t imsi, std::uint64_t packet_id)
{
    ++data_.sent;
    if (!anchors_.contains(imsi) || anchors_.at(imsi).tunnel.teid_down == 0)
    {
        ++data_.dropped;
        return;
    }
    // Internet -> P-GW -> S-GW; the S-GW picks the tunnel on arrival.
    sim_.schedule_in(config_.pgw_internet_latency + config_.sgw_pgw_latency, [this, imsi, packet_id] {
        const NodeId enb = anchors_.at(imsi).tunnel.enb;
        sim_.schedule_in(config_.enb_sgw_latency,
                         [this, enb, imsi, packet_id] { downlink_at_enb(enb, imsi, packet_id); });
    });
}

void LteNetwork::downlink_at_enb(NodeId enb, std::uint64_t imsi, std::uint64_t packet_id)
{
    auto& a = anchors_.at(imsi);
    const auto& ue = ue_mut(imsi);
    if (a.buffering && a.tunnel.enb == enb)
    {
        if (config_.buffer_cap != 0 && a.buffer.size() >= config_.buffer_cap)
        {
            ++data_.dropped;
            return;
        }
        ++data_.buffered;
        a.buffer.push_back(packet_id);
        return;
    }
    if (ue.serving == enb)
    {
        radio_deliver(enb, imsi, packet_id);
        return;
    }
    if (ue.serving)
    {
        // Late arrival at the old eNB: indirect tunnel through the S-GW to the target.
        const NodeId next = *ue.serving;
        sim_.schedule_in(config_.enb_sgw_latency * 2,
                         [this, next, imsi, packet_id] { downlink_at_enb(next, imsi, packet_id); });
        return;
    }
    ++data_.dropped;
}

void LteNetwork::radio_deliver(NodeId enb, std::uint64_t imsi, std::uint64_t packet_id)
{
    sim_.schedule_in(config_.radio_latency, [this, enb, imsi, packet_id] {
        if (ue_mut(imsi).radio_cell == enb)
        {
            ++data_.delivered;
            data_.delivered_ids.push_back(packet_id);
        }
        else
        {
            ++data_.dropped;
        }
    });
}

void LteNetwork::flush_buffer(std::uint64_t imsi, NodeId target)
{
    auto& a = anchors_.at(imsi);
    a.buffering = false;
    while (!a.buffer.empty())
    {
        const auto id = a.buffer.front();
        a.buffer.pop_front();
        sim_.schedule_in(config_.enb_sgw_latency * 2,
                         [this, target, imsi, id] { radio_deliver(target, imsi, id); });
    }
}

}  // namespace encor::lte
