#include "encor/encor_network.hpp"

#include <algorithm>

namespace encor::control
{

const char* to_string(UeState state)
{
    switch (state)
    {
    case UeState::Detached: return "Detached";
    case UeState::Attaching: return "Attaching";
    case UeState::Connected: return "Connected";
    case UeState::HandingOver: return "HandingOver";
    }
    return "Unknown";
}

std::variant<ControlMessage, RelayFailure> HopNode::relay(const ControlMessage& msg) const
{
    if (!serves(msg.dst))
        return RelayFailure{"destination " + std::to_string(msg.dst.value) +
                            " is not registered with hop " + std::to_string(id_.value)};
    return msg;
}

std::vector<std::uint8_t> HopNode::serialize_state() const
{
    std::vector<std::uint8_t> out;
    auto put = [&out](std::uint32_t v) {
        for (int i = 3; i >= 0; --i)
            out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    };
    put(id_.value);
    put(static_cast<std::uint32_t>(inbs_.size()));
    for (NodeId n : inbs_)
        put(n.value);
    return out;
}

std::size_t InbNode::admitted() const
{
    return static_cast<std::size_t>(std::count_if(contexts.begin(), contexts.end(), [](const auto& kv) {
        return kv.second.role != ContextRole::Departed;
    }));
}

namespace
{

sim::NodeId make_node(sim::Simulator& sim, std::string name, double rate)
{
    return sim.add_node(sim::NodeConfig{std::move(name), rate, sim::ServiceModel::Deterministic});
}

std::vector<std::uint8_t> encode_radio_config(NodeId target, std::uint32_t crnti, std::uint32_t ncc)
{
    std::vector<std::uint8_t> out;
    for (std::uint32_t v : {target.value, crnti, ncc})
        for (int i = 3; i >= 0; --i)
            out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    return out;
}

std::uint32_t radio_config_ncc(const std::vector<std::uint8_t>& cfg)
{
    if (cfg.size() < 12)
        throw std::invalid_argument("radio configuration container too short");
    std::uint32_t v = 0;
    for (std::size_t i = 8; i < 12; ++i)
        v = (v << 8) | cfg[i];
    return v;
}

}  // namespace

EncorNetwork::EncorNetwork(sim::Simulator& sim, EncorConfig config)
    : sim_(sim),
      config_(std::move(config)),
      cpu_(make_node(sim_, "core-cpu", config_.core_service_rate)),
      sme_(make_node(sim_, "sme", 0.0)),
      fabric_(sim_, cpu_)
{
    if (config_.inb_count == 0 || config_.inbs_per_hop == 0)
        throw ConfigurationError("need at least one iNB and one iNB per HOP");

    names_[cpu_.value] = "core-cpu";
    names_[sme_.value] = "sme";
    sim_.add_link(cpu_, sme_, sim::SimTime{0});
    fabric_.add_core_element(sme_);
    fabric_.bind(sme_, [this](const ControlMessage& m) { on_sme(m); });

    fabric_.on_core_service([this](const ControlMessage& m) {
        auto it = procedures_.find(m.payload.procedure);
        if (it != procedures_.end())
            ++it->second.trace.core_services;
    });
    fabric_.on_delivered([this](const ControlMessage& m, std::uint32_t hops) {
        auto it = procedures_.find(m.payload.procedure);
        if (it == procedures_.end())
            return;
        auto& entries = it->second.is_handover ? it->second.trace.messages : it->second.attach.messages;
        for (auto e = entries.rbegin(); e != entries.rend(); ++e)
        {
            if (e->message.kind == m.kind && e->physical_hops == 0)
            {
                e->physical_hops = hops;
                break;
            }
        }
    });

    for (std::size_t i = 0; i < config_.inb_count; ++i)
    {
        const std::string name = "inb-" + std::to_string(i);
        const NodeId id = make_node(sim_, name, config_.inb_service_rate);
        names_[id.value] = name;
        InbNode node;
        node.id = id;
        node.name = name;
        node.prefix = addr::InbPrefix{config_.prefix_base + i + 1};
        node.moved = addr::RecentlyMovedTable{config_.moved_ttl};
        inbs_.emplace(id.value, std::move(node));
        inb_ids_.push_back(id);
        sim_.add_link(id, cpu_, config_.backhaul_latency);
        fabric_.bind(id, [this, id](const ControlMessage& m) { on_inb(id, m); });
    }

    const std::size_t hop_count = (config_.inb_count + config_.inbs_per_hop - 1) / config_.inbs_per_hop;
    for (std::size_t h = 0; h < hop_count; ++h)
    {
        const std::string name = "hop-" + std::to_string(h);
        const NodeId id = make_node(sim_, name, config_.hop_service_rate);
        names_[id.value] = name;
        std::set<NodeId> members;
        for (std::size_t i = h * config_.inbs_per_hop;
             i < std::min(config_.inb_count, (h + 1) * config_.inbs_per_hop); ++i)
        {
            members.insert(inb_ids_[i]);
            sim_.add_link(inb_ids_[i], id, config_.hop_latency);
        }
        hops_.emplace_back(id, std::move(members));
        const std::size_t index = hops_.size() - 1;
        fabric_.bind_relay(
            id,
            [this, index](const ControlMessage& m) -> std::optional<std::string> {
                auto result = hops_[index].relay(m);
                if (auto* f = std::get_if<RelayFailure>(&result))
                    return f->reason;
                return std::nullopt;
            },
            [this](const ControlMessage& m) { on_hop_terminal(m); });
    }
}

const InbNode& EncorNetwork::inb(NodeId id) const
{
    auto it = inbs_.find(id.value);
    if (it == inbs_.end())
        throw std::out_of_range("not an iNB: " + std::to_string(id.value));
    return it->second;
}

InbNode& EncorNetwork::inb_mut(NodeId id)
{
    auto it = inbs_.find(id.value);
    if (it == inbs_.end())
        throw std::out_of_range("not an iNB: " + std::to_string(id.value));
    return it->second;
}

std::string EncorNetwork::name_of(NodeId node) const
{
    auto it = names_.find(node.value);
    return it == names_.end() ? "node-" + std::to_string(node.value) : it->second;
}

void EncorNetwork::provision(security::SubscriberRecord record)
{
    const auto imsi = record.imsi;
    subdb_[imsi] = std::move(record);
}

const security::SubscriberRecord* EncorNetwork::subscriber(std::uint64_t imsi) const
{
    auto it = subdb_.find(imsi);
    return it == subdb_.end() ? nullptr : &it->second;
}

NodeId EncorNetwork::add_ue(std::uint64_t imsi, const security::Key128& k, NodeId cell)
{
    if (ues_.contains(imsi))
        throw std::invalid_argument("duplicate UE " + std::to_string(imsi));
    inb(cell);
    const std::string name = "ue-" + std::to_string(imsi);
    const NodeId id = make_node(sim_, name, 0.0);
    names_[id.value] = name;
    sim_.add_link(id, cell, config_.radio_latency);
    UeNode node;
    node.node = id;
    node.k = k;
    node.radio_cell = cell;
    node.context.imsi = imsi;
    ues_.emplace(imsi, std::move(node));
    ue_by_node_[id.value] = imsi;
    fabric_.bind(id, [this, imsi](const ControlMessage& m) { on_ue(imsi, m); });
    return id;
}

EncorNetwork::UeNode& EncorNetwork::ue_mut(std::uint64_t imsi)
{
    auto it = ues_.find(imsi);
    if (it == ues_.end())
        throw std::out_of_range("unknown UE " + std::to_string(imsi));
    return it->second;
}

const UeContext& EncorNetwork::ue(std::uint64_t imsi) const
{
    auto it = ues_.find(imsi);
    if (it == ues_.end())
        throw std::out_of_range("unknown UE " + std::to_string(imsi));
    return it->second.context;
}

NodeId EncorNetwork::ue_node(std::uint64_t imsi) const
{
    auto it = ues_.find(imsi);
    if (it == ues_.end())
        throw std::out_of_range("unknown UE " + std::to_string(imsi));
    return it->second.node;
}

const std::optional<security::SessionKeys>& EncorNetwork::ue_keys(std::uint64_t imsi) const
{
    auto it = ues_.find(imsi);
    if (it == ues_.end())
        throw std::out_of_range("unknown UE " + std::to_string(imsi));
    return it->second.keys;
}

std::optional<NodeId> EncorNetwork::shared_hop(NodeId a, NodeId b) const
{
    for (const auto& hop : hops_)
        if (hop.serves(a) && hop.serves(b))
            return hop.id();
    return std::nullopt;
}

const HopNode* EncorNetwork::hop_node(NodeId id) const
{
    for (const auto& hop : hops_)
        if (hop.id() == id)
            return &hop;
    return nullptr;
}

std::optional<NodeId> EncorNetwork::inb_for_locator(std::uint64_t locator) const
{
    if (locator <= config_.prefix_base || locator > config_.prefix_base + inb_ids_.size())
        return std::nullopt;
    return inb_ids_[locator - config_.prefix_base - 1];
}

void EncorNetwork::emit(std::uint64_t procedure, ControlMessage msg, std::optional<NodeId> relay)
{
    msg.payload.procedure = procedure;
    ControlMessage sent = fabric_.send(std::move(msg), relay);
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

// ---- attach ---------------------------------------------------------------

void EncorNetwork::start_attach(std::uint64_t imsi, AttachCallback done)
{
    auto& ue = ue_mut(imsi);
    if (ue.context.state != UeState::Detached)
        throw std::logic_error("attach requires a Detached UE");
    if (!ue.radio_cell)
        throw std::logic_error("UE is not camped on any cell");

    const auto id = next_procedure_++;
    Procedure proc;
    proc.attach.imsi = imsi;
    proc.on_attach = std::move(done);
    procedures_.emplace(id, std::move(proc));

    ue.context.state = UeState::Attaching;
    ControlMessage msg;
    msg.kind = MessageKind::AttachRequest;
    msg.src = ue.node;
    msg.dst = sme_;
    msg.payload.ue = imsi;
    msg.payload.source_cell = *ue.radio_cell;
    emit(id, std::move(msg));
}

AttachResult EncorNetwork::attach(std::uint64_t imsi)
{
    std::optional<AttachResult> out;
    start_attach(imsi, [&out](const AttachResult& r) { out = r; });
    while (!out && sim_.step())
    {
    }
    if (!out)
        throw std::logic_error("attach did not complete");
    return *out;
}

void EncorNetwork::finish_attach(std::uint64_t procedure, bool ok, std::string cause)
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

void EncorNetwork::detach(std::uint64_t imsi)
{
    auto& ue = ue_mut(imsi);
    for (auto& [_, node] : inbs_)
    {
        node.contexts.erase(imsi);
        node.radio_attached.erase(imsi);
    }
    auto& entry = sme_state_[imsi];
    entry.keys.reset();
    entry.k_asme.reset();
    entry.pending.reset();
    ue.k_asme.reset();
    ue.keys.reset();
    const auto cell = ue.radio_cell;
    ue.context = UeContext{};
    ue.context.imsi = imsi;
    ue.radio_cell = cell;
}

void EncorNetwork::inject_stale_vector(std::uint64_t imsi, const security::AuthVector& vector)
{
    injected_[imsi] = vector;
}

// ---- handover -------------------------------------------------------------

void EncorNetwork::start_handover(std::uint64_t imsi, NodeId target, HandoverMode mode,
                                  HandoverCallback done)
{
    if (mode == HandoverMode::LteS1)
        throw std::invalid_argument("S1 handover belongs to the LTE baseline");
    auto& ue = ue_mut(imsi);
    if (ue.context.state != UeState::Connected || !ue.context.serving_inb)
        throw std::logic_error("handover requires a Connected UE");
    const NodeId source = *ue.context.serving_inb;
    inb(target);
    if (source == target)
        throw std::invalid_argument("source and target cell are the same");
    const auto hop = shared_hop(source, target);
    if (!hop)
        throw ConfigurationError(name_of(source) + " and " + name_of(target) + " share no HOP");

    auto& src = inb_mut(source);
    auto ctx = src.contexts.find(imsi);
    if (ctx == src.contexts.end() || ctx->second.role != ContextRole::Active)
        throw std::logic_error("source holds no active context");

    const auto id = next_procedure_++;
    Procedure proc;
    proc.is_handover = true;
    proc.trace.id = id;
    proc.trace.mode = mode;
    proc.trace.ue = imsi;
    proc.trace.source = source;
    proc.trace.target = target;
    proc.trace.start = sim_.now();
    proc.on_handover = std::move(done);
    proc.hop = hop;
    procedures_.emplace(id, std::move(proc));

    for (UeContext* c : {&ue.context, &ctx->second.ue})
    {
        c->state = UeState::HandingOver;
        c->source_inb = source;
        c->target_inb = target;
    }
    ctx->second.procedure = id;

    ControlMessage msg;
    msg.kind = MessageKind::HoRequired;
    msg.src = source;
    msg.payload.ue = imsi;
    msg.payload.source_cell = source;
    msg.payload.target_cell = target;
    msg.payload.qci = ctx->second.ue.qci;
    msg.payload.bytes = ctx->second.ue.quota_bytes;
    if (ctx->second.ue.private_addr)
        msg.payload.ue_addr = ctx->second.ue.private_addr->addr();
    if (mode == HandoverMode::CoreAssisted)
    {
        msg.dst = sme_;
        emit(id, std::move(msg));
    }
    else
    {
        msg.dst = target;
        msg.payload.keys = ctx->second.ue.keys;
        emit(id, std::move(msg), hop);
    }
}

HandoverTrace EncorNetwork::handover_core_assisted(std::uint64_t imsi, NodeId target)
{
    std::optional<HandoverTrace> out;
    start_handover(imsi, target, HandoverMode::CoreAssisted, [&out](const HandoverTrace& t) { out = t; });
    while (!out && sim_.step())
    {
    }
    if (!out)
        throw std::logic_error("handover did not complete");
    return *out;
}

HandoverTrace EncorNetwork::handover_direct(std::uint64_t imsi, NodeId target)
{
    std::optional<HandoverTrace> out;
    start_handover(imsi, target, HandoverMode::Direct, [&out](const HandoverTrace& t) { out = t; });
    while (!out && sim_.step())
    {
    }
    if (!out)
        throw std::logic_error("handover did not complete");
    return *out;
}

void EncorNetwork::finish_handover(std::uint64_t procedure, bool failed, std::string cause)
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

// ---- node behaviour ---------------------------------------------------------

void EncorNetwork::on_sme(const ControlMessage& msg)
{
    const auto imsi = msg.payload.ue;
    auto& entry = sme_state_[imsi];
    switch (msg.kind)
    {
    case MessageKind::AttachRequest: {
        auto rec = subdb_.find(imsi);
        ControlMessage out;
        out.src = sme_;
        out.dst = msg.src;
        out.payload.ue = imsi;
        if (rec == subdb_.end())
        {
            out.kind = MessageKind::AttachReject;
            out.payload.cause = "unknown-subscriber";
            emit(msg.payload.procedure, std::move(out));
            return;
        }
        security::AuthVector vector;
        if (auto inj = injected_.find(imsi); inj != injected_.end())
        {
            vector = inj->second;
            injected_.erase(inj);
        }
        else
        {
            security::Nonce rand{};
            for (auto& b : rand)
                b = static_cast<std::uint8_t>(sim_.rng()());
            vector = security::generate_auth_vector(rec->second, rand);
        }
        entry.pending = vector;
        entry.serving = msg.payload.source_cell;
        out.kind = MessageKind::AuthChallenge;
        out.payload.rand = vector.rand;
        out.payload.autn = vector.autn;
        emit(msg.payload.procedure, std::move(out));
        return;
    }
    case MessageKind::AuthResponse: {
        const auto& rec = subdb_.at(imsi);
        if (!entry.pending || !msg.payload.res || *msg.payload.res != entry.pending->xres)
        {
            ControlMessage out;
            out.kind = MessageKind::AttachReject;
            out.src = sme_;
            out.dst = msg.src;
            out.payload.ue = imsi;
            out.payload.cause = "auth-failure";
            emit(msg.payload.procedure, std::move(out));
            return;
        }
        entry.k_asme = entry.pending->k_asme;
        entry.pending.reset();
        entry.keys = security::derive_k_enb(*entry.k_asme);
        ControlMessage out;
        out.kind = MessageKind::AttachAccept;
        out.src = sme_;
        out.dst = *entry.serving;
        out.payload.ue = imsi;
        out.payload.keys = entry.keys;
        out.payload.ue_addr = addr::assign_private_addr(imsi).addr();
        out.payload.qci = rec.qci;
        if (auto* vol = std::get_if<security::VolumeQuota>(&rec.quota_policy))
            out.payload.bytes = vol->bytes;
        emit(msg.payload.procedure, std::move(out));
        return;
    }
    case MessageKind::HoRequired: {
        if (!entry.keys)
            throw std::logic_error("SME has no security context for UE " + std::to_string(imsi));
        entry.keys = security::chain_k_enb(*entry.keys);
        entry.serving = msg.payload.target_cell;
        ControlMessage out = msg;
        out.kind = MessageKind::HoRequest;
        out.src = sme_;
        out.dst = msg.payload.target_cell;
        out.payload.keys = entry.keys;
        emit(msg.payload.procedure, std::move(out));
        return;
    }
    case MessageKind::RekeyRequest: {
        if (!entry.keys)
            return;
        entry.keys = security::chain_k_enb(*entry.keys);
        ControlMessage out;
        out.kind = MessageKind::RekeyResponse;
        out.src = sme_;
        out.dst = msg.src;
        out.payload.ue = imsi;
        out.payload.keys = entry.keys;
        emit(0, std::move(out));
        return;
    }
    default:
        return;
    }
}

void EncorNetwork::inb_admit(InbNode& tgt, const ControlMessage& msg, security::SessionKeys keys)
{
    const auto proc = msg.payload.procedure;
    const auto imsi = msg.payload.ue;
    auto pit = procedures_.find(proc);
    const auto hop = pit != procedures_.end() ? pit->second.hop : shared_hop(msg.payload.source_cell, tgt.id);

    ControlMessage reply;
    reply.src = tgt.id;
    reply.dst = msg.payload.source_cell;
    reply.payload.ue = imsi;
    reply.payload.source_cell = msg.payload.source_cell;
    reply.payload.target_cell = tgt.id;

    if (config_.inb_ue_cap != 0 && tgt.admitted() >= config_.inb_ue_cap)
    {
        reply.kind = MessageKind::HoPreparationFailure;
        reply.payload.cause = "admission-refused";
        emit(proc, std::move(reply), hop);
        return;
    }

    InbContext ctx;
    ctx.role = ContextRole::Pending;
    ctx.procedure = proc;
    ctx.ue.imsi = imsi;
    ctx.ue.state = UeState::HandingOver;
    ctx.ue.source_inb = msg.payload.source_cell;
    ctx.ue.target_inb = tgt.id;
    ctx.ue.serving_inb = msg.payload.source_cell;
    ctx.ue.keys = keys;
    ctx.ue.qci = msg.payload.qci;
    ctx.ue.quota_bytes = msg.payload.bytes;
    if (msg.payload.ue_addr)
        ctx.ue.private_addr = addr::UePrivateAddr{msg.payload.ue_addr->identifier};
    tgt.contexts[imsi] = ctx;

    reply.kind = MessageKind::HoRequestAck;
    reply.payload.radio_config =
        encode_radio_config(tgt.id, static_cast<std::uint32_t>(tgt.next_crnti++), keys.ncc);
    emit(proc, std::move(reply), hop);
}

void EncorNetwork::on_inb(NodeId self, const ControlMessage& msg)
{
    auto& node = inb_mut(self);
    const auto imsi = msg.payload.ue;
    const auto proc = msg.payload.procedure;

    switch (msg.kind)
    {
    case MessageKind::AttachAccept: {
        InbContext ctx;
        ctx.role = ContextRole::Active;
        ctx.ue.imsi = imsi;
        ctx.ue.state = UeState::Connected;
        ctx.ue.serving_inb = self;
        ctx.ue.keys = msg.payload.keys;
        ctx.ue.qci = msg.payload.qci;
        ctx.ue.quota_bytes = msg.payload.bytes;
        if (msg.payload.ue_addr)
            ctx.ue.private_addr = addr::UePrivateAddr{msg.payload.ue_addr->identifier};
        node.contexts[imsi] = ctx;
        node.radio_attached.insert(imsi);
        ControlMessage out = msg;
        out.src = self;
        out.dst = ue_mut(imsi).node;
        out.payload.keys.reset();
        emit(proc, std::move(out));
        return;
    }
    case MessageKind::HoRequest:
        if (msg.payload.keys)
            inb_admit(node, msg, *msg.payload.keys);
        return;
    case MessageKind::HoRequired:
        // Direct mode: the source shares its current key.
        if (msg.payload.keys)
            inb_admit(node, msg, *msg.payload.keys);
        return;
    case MessageKind::HoRequestAck: {
        auto ctx = node.contexts.find(imsi);
        if (ctx == node.contexts.end())
            return;
        ControlMessage cmd;
        cmd.kind = MessageKind::HoCommand;
        cmd.src = self;
        cmd.dst = ue_mut(imsi).node;
        cmd.payload = msg.payload;
        emit(proc, std::move(cmd));
        ctx->second.role = ContextRole::Departed;
        node.radio_attached.erase(imsi);
        return;
    }
    case MessageKind::HoPreparationFailure:
    case MessageKind::RelayError: {
        auto ctx = node.contexts.find(imsi);
        if (ctx != node.contexts.end() && ctx->second.procedure == proc)
        {
            ctx->second.ue.state = UeState::Connected;
            ctx->second.ue.source_inb.reset();
            ctx->second.ue.target_inb.reset();
        }
        auto& ue = ue_mut(imsi);
        ue.context.state = UeState::Connected;
        ue.context.source_inb.reset();
        ue.context.target_inb.reset();
        finish_handover(proc, true, msg.payload.cause.empty() ? to_string(msg.kind) : msg.payload.cause);
        return;
    }
    case MessageKind::HoConfirm: {
        auto ctx = node.contexts.find(imsi);
        if (ctx == node.contexts.end())
            return;
        ctx->second.role = ContextRole::Active;
        ctx->second.ue.state = UeState::Connected;
        ctx->second.ue.serving_inb = self;
        ctx->second.ue.source_inb.reset();
        ctx->second.ue.target_inb.reset();
        node.radio_attached.insert(imsi);

        auto& ue = ue_mut(imsi);
        ue.context.state = UeState::Connected;
        ue.context.serving_inb = self;
        ue.context.keys = ctx->second.ue.keys;
        ue.context.source_inb.reset();
        ue.context.target_inb.reset();

        auto pit = procedures_.find(proc);
        const auto hop = pit != procedures_.end() ? pit->second.hop : shared_hop(self, msg.payload.source_cell);
        ControlMessage out;
        out.kind = MessageKind::HoCompleteNotify;
        out.src = self;
        out.dst = msg.payload.source_cell;
        out.payload.ue = imsi;
        out.payload.source_cell = msg.payload.source_cell;
        out.payload.target_cell = self;
        emit(proc, std::move(out), hop);

        if (config_.rekey_after_direct && pit != procedures_.end() &&
            pit->second.trace.mode == HandoverMode::Direct)
        {
            ControlMessage rekey;
            rekey.kind = MessageKind::RekeyRequest;
            rekey.src = self;
            rekey.dst = sme_;
            rekey.payload.ue = imsi;
            emit(0, std::move(rekey));
        }
        return;
    }
    case MessageKind::HoCompleteNotify: {
        node.contexts.erase(imsi);
        if (config_.forwarding_enabled)
            node.moved.record_move(imsi, inb(msg.payload.target_cell).prefix, sim_.now());
        auto pit = procedures_.find(proc);
        if (pit == procedures_.end() || !pit->second.hop)
            return;
        ControlMessage release;
        release.kind = MessageKind::UeContextRelease;
        release.src = self;
        release.dst = *pit->second.hop;
        release.payload.ue = imsi;
        release.payload.source_cell = self;
        release.payload.target_cell = msg.payload.target_cell;
        emit(proc, std::move(release));
        return;
    }
    case MessageKind::RekeyResponse: {
        auto ctx = node.contexts.find(imsi);
        if (ctx == node.contexts.end() || !msg.payload.keys)
            return;
        ctx->second.ue.keys = msg.payload.keys;
        ue_mut(imsi).context.keys = msg.payload.keys;
        ControlMessage out;
        out.kind = MessageKind::RekeyResponse;
        out.src = self;
        out.dst = ue_mut(imsi).node;
        out.payload.ue = imsi;
        out.payload.keys = security::SessionKeys{{}, msg.payload.keys->ncc};
        emit(0, std::move(out));
        return;
    }
    default:
        return;
    }
}

void EncorNetwork::on_ue(std::uint64_t imsi, const ControlMessage& msg)
{
    auto& ue = ue_mut(imsi);
    const auto proc = msg.payload.procedure;
    switch (msg.kind)
    {
    case MessageKind::AuthChallenge: {
        if (!msg.payload.rand || !msg.payload.autn)
            return;
        auto result = security::ue_process_challenge(ue.k, ue.sqn, *msg.payload.rand, *msg.payload.autn);
        if (auto* failure = std::get_if<security::AuthFailure>(&result))
        {
            ue.context.state = UeState::Detached;
            finish_attach(proc, false, security::to_string(*failure));
            return;
        }
        const auto& resp = std::get<security::AuthResponse>(result);
        ue.k_asme = resp.k_asme;
        ControlMessage out;
        out.kind = MessageKind::AuthResponse;
        out.src = ue.node;
        out.dst = sme_;
        out.payload.ue = imsi;
        out.payload.res = resp.res;
        emit(proc, std::move(out));
        return;
    }
    case MessageKind::AttachAccept: {
        if (!ue.k_asme)
            return;
        ue.keys = security::derive_k_enb(*ue.k_asme);
        ue.context.state = UeState::Connected;
        ue.context.serving_inb = msg.src;
        ue.context.keys = ue.keys;
        ue.context.qci = msg.payload.qci;
        ue.context.quota_bytes = msg.payload.bytes;
        if (msg.payload.ue_addr)
            ue.context.private_addr = addr::UePrivateAddr{msg.payload.ue_addr->identifier};
        finish_attach(proc, true, "");
        return;
    }
    case MessageKind::AttachReject:
        ue.context.state = UeState::Detached;
        finish_attach(proc, false, msg.payload.cause);
        return;
    case MessageKind::HoCommand: {
        const NodeId source = msg.payload.source_cell;
        const NodeId target = msg.payload.target_cell;
        const auto ncc = radio_config_ncc(msg.payload.radio_config);
        sim_.remove_link(ue.node, source);
        ue.radio_cell.reset();
        sim_.schedule_in(config_.radio_sync, [this, imsi, source, target, ncc, proc] {
            auto& u = ue_mut(imsi);
            sim_.add_link(u.node, target, config_.radio_latency);
            u.radio_cell = target;
            while (u.keys && u.keys->ncc < ncc)
                u.keys = security::chain_k_enb(*u.keys);
            ControlMessage confirm;
            confirm.kind = MessageKind::HoConfirm;
            confirm.src = u.node;
            confirm.dst = target;
            confirm.payload.ue = imsi;
            confirm.payload.source_cell = source;
            confirm.payload.target_cell = target;
            emit(proc, std::move(confirm));
        });
        return;
    }
    case MessageKind::RekeyResponse:
        if (msg.payload.keys)
            while (ue.keys && ue.keys->ncc < msg.payload.keys->ncc)
                ue.keys = security::chain_k_enb(*ue.keys);
        return;
    default:
        return;
    }
}

void EncorNetwork::on_hop_terminal(const ControlMessage& msg)
{
    if (msg.kind != MessageKind::UeContextRelease)
        return;
    ++hop_logged_releases_;
    finish_handover(msg.payload.procedure, false, "");
}

// ---- user plane -------------------------------------------------------------

void EncorNetwork::send_downlink(const addr::Addr128& dest, std::uint64_t packet_id)
{
    ++data_.sent;
    const auto cell = inb_for_locator(dest.locator);
    if (!cell)
    {
        ++data_.dropped;
        data_.dropped_ids.push_back(packet_id);
        return;
    }
    sim_.schedule_in(config_.internet_latency,
                     [this, c = *cell, dest, packet_id] { downlink_at(c, dest, packet_id); });
}

void EncorNetwork::downlink_at(NodeId cell, const addr::Addr128& dest, std::uint64_t packet_id)
{
    static const addr::RecentlyMovedTable kNoForwarding{};
    auto& node = inb_mut(cell);
    const auto& table = config_.forwarding_enabled ? node.moved : kNoForwarding;
    const auto decision = addr::nat_downlink(dest, node.radio_attached, table, sim_.now(), &node.nat);

    if (std::holds_alternative<addr::DeliverLocal>(decision))
    {
        const auto imsi = dest.identifier;
        sim_.schedule_in(config_.radio_latency, [this, cell, imsi, packet_id] {
            auto it = ues_.find(imsi);
            if (it != ues_.end() && it->second.radio_cell == cell)
            {
                ++data_.delivered;
                data_.delivered_ids.push_back(packet_id);
            }
            else
            {
                ++data_.dropped;
                data_.dropped_ids.push_back(packet_id);
            }
        });
        return;
    }
    if (const auto* fwd = std::get_if<addr::ForwardTo>(&decision))
    {
        ++data_.forwarded;
        const auto next = inb_for_locator(fwd->dest.locator);
        if (!next)
        {
            ++data_.dropped;
            data_.dropped_ids.push_back(packet_id);
            return;
        }
        sim_.schedule_in(config_.inter_inb_latency,
                         [this, n = *next, d = fwd->dest, packet_id] { downlink_at(n, d, packet_id); });
        return;
    }
    ++data_.dropped;
    data_.dropped_ids.push_back(packet_id);
}

}  // namespace encor::control
