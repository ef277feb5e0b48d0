#include <doctest.h>

#include "encor/encor_network.hpp"

#include <random>

using namespace encor;
using namespace encor::control;
using sim::from_ms;

namespace
{

security::Key128 key_for(std::uint64_t imsi)
{
    security::Key128 k{};
    for (std::size_t i = 0; i < k.size(); ++i)
        k[i] = static_cast<std::uint8_t>(imsi * 31 + i);
    return k;
}

struct Fixture
{
    sim::Simulator sim{7};
    EncorNetwork net;

    explicit Fixture(EncorConfig cfg = {}) : net(sim, cfg) {}

    void add(std::uint64_t imsi, std::size_t cell = 0, bool provision = true)
    {
        if (provision)
            net.provision(security::SubscriberRecord{imsi, key_for(imsi), 0, 7, security::Unlimited{}});
        net.add_ue(imsi, key_for(imsi), net.inb_ids()[cell]);
    }

    NodeId cell(std::size_t i) const { return net.inb_ids()[i]; }

    std::size_t active_holders(std::uint64_t imsi) const
    {
        std::size_t n = 0;
        for (auto id : net.inb_ids())
        {
            const auto& c = net.inb(id).contexts;
            auto it = c.find(imsi);
            if (it != c.end() && it->second.role == ContextRole::Active)
                ++n;
        }
        return n;
    }
};

std::vector<MessageKind> kinds(const HandoverTrace& t)
{
    std::vector<MessageKind> out;
    for (const auto& e : t.messages)
        out.push_back(e.message.kind);
    return out;
}

}  // namespace

TEST_CASE("attach of a provisioned UE")
{
    Fixture f;
    f.add(1001);
    auto r = f.net.attach(1001);
    REQUIRE(r.ok);
    const auto& ue = f.net.ue(1001);
    CHECK(ue.state == UeState::Connected);
    CHECK(ue.serving_inb == f.cell(0));
    REQUIRE(ue.private_addr.has_value());
    CHECK(*ue.private_addr == addr::assign_private_addr(1001));
    CHECK(ue.qci == 7);
    REQUIRE(ue.keys.has_value());
    CHECK(f.net.ue_keys(1001) == ue.keys);
    CHECK(f.net.inb(f.cell(0)).contexts.at(1001).ue.keys == ue.keys);
    CHECK(f.net.subscriber(1001)->sqn == 1);
}

TEST_CASE("attach of an unknown subscriber is rejected")
{
    Fixture f;
    f.add(5, 0, false);
    auto r = f.net.attach(5);
    CHECK_FALSE(r.ok);
    CHECK(r.cause == "unknown-subscriber");
    CHECK(f.net.ue(5).state == UeState::Detached);
}

TEST_CASE("replayed stale vector leaves the UE detached")
{
    Fixture f;
    f.add(9);
    REQUIRE(f.net.attach(9).ok);
    // Capture a vector the UE has already accepted, then replay it.
    auto rec = *f.net.subscriber(9);
    rec.sqn -= 1;
    security::Nonce rand{};
    rand[0] = 1;
    const auto stale = security::generate_auth_vector(rec, rand);
    f.net.detach(9);
    f.net.inject_stale_vector(9, stale);
    auto r = f.net.attach(9);
    CHECK_FALSE(r.ok);
    CHECK(r.cause == "replay");
    CHECK(f.net.ue(9).state == UeState::Detached);
    // A fresh attempt succeeds.
    CHECK(f.net.attach(9).ok);
}

TEST_CASE("core-assisted handover follows the 7-message sequence")
{
    Fixture f;
    f.add(1);
    REQUIRE(f.net.attach(1).ok);
    const auto before = *f.net.ue_keys(1);
    auto t = f.net.handover_core_assisted(1, f.cell(3));
    CHECK(t.completed);
    CHECK(kinds(t) == std::vector<MessageKind>{MessageKind::HoRequired, MessageKind::HoRequest,
                                               MessageKind::HoRequestAck, MessageKind::HoCommand,
                                               MessageKind::HoConfirm, MessageKind::HoCompleteNotify,
                                               MessageKind::UeContextRelease});
    const auto c = count_messages(t);
    CHECK(c.total == 7);
    CHECK(c.via_core == 2);
    CHECK(t.core_services == 2);
    CHECK(t.messages.back().message.src == f.cell(0));
    const auto& ue = f.net.ue(1);
    CHECK(ue.state == UeState::Connected);
    CHECK(ue.serving_inb == f.cell(3));
    CHECK(f.net.ue_keys(1)->ncc == before.ncc + 1);
    CHECK(f.net.ue_keys(1)->k_enb != before.k_enb);
    CHECK(f.net.inb(f.cell(3)).contexts.at(1).ue.keys == f.net.ue_keys(1));
    CHECK_FALSE(f.net.inb(f.cell(0)).contexts.contains(1));
    CHECK(f.net.inb(f.cell(0)).moved.lookup(1, f.sim.now()) == f.net.inb(f.cell(3)).prefix);
    CHECK(f.net.hop_logged_releases() == 1);
    CHECK(t.duration() > sim::SimTime{0});
}

TEST_CASE("HoCommand reaching the UE is byte-identical to the target's acknowledgement")
{
    Fixture f;
    f.add(1);
    REQUIRE(f.net.attach(1).ok);
    auto t = f.net.handover_core_assisted(1, f.cell(2));
    const auto& ack = t.messages[2].message;
    const auto& cmd = t.messages[3].message;
    REQUIRE(ack.kind == MessageKind::HoRequestAck);
    REQUIRE(cmd.kind == MessageKind::HoCommand);
    CHECK(ack.payload.serialize() == cmd.payload.serialize());
}

TEST_CASE("two core-assisted handovers raise NCC by two")
{
    Fixture f;
    f.add(1);
    REQUIRE(f.net.attach(1).ok);
    const auto n0 = f.net.ue_keys(1)->ncc;
    f.net.handover_core_assisted(1, f.cell(1));
    f.net.handover_core_assisted(1, f.cell(2));
    CHECK(f.net.ue_keys(1)->ncc == n0 + 2);
}

TEST_CASE("direct handover: 6 messages, none via core, key reused")
{
    Fixture f;
    f.add(1);
    REQUIRE(f.net.attach(1).ok);
    const auto hop = f.net.hops().front();
    const auto before_state = hop.serialize_state();
    const auto before = *f.net.ue_keys(1);
    auto t = f.net.handover_direct(1, f.cell(5));
    CHECK(t.completed);
    CHECK(kinds(t) == std::vector<MessageKind>{MessageKind::HoRequired, MessageKind::HoRequestAck,
                                               MessageKind::HoCommand, MessageKind::HoConfirm,
                                               MessageKind::HoCompleteNotify, MessageKind::UeContextRelease});
    const auto c = count_messages(t);
    CHECK(c.total == 6);
    CHECK(c.via_core == 0);
    CHECK(t.core_services == 0);
    CHECK(*f.net.ue_keys(1) == before);
    CHECK(f.net.inb(f.cell(5)).contexts.at(1).ue.keys == before);
    CHECK(f.net.hops().front().serialize_state() == before_state);
}

TEST_CASE("direct handover without a shared HOP is a configuration error")
{
    EncorConfig cfg;
    cfg.inb_count = 4;
    cfg.inbs_per_hop = 2;
    Fixture f(cfg);
    f.add(1);
    REQUIRE(f.net.attach(1).ok);
    CHECK_THROWS_AS(f.net.handover_direct(1, f.cell(3)), ConfigurationError);
    CHECK(f.net.handover_direct(1, f.cell(1)).completed);
}

TEST_CASE("admission refusal aborts and leaves the UE at the source")
{
    EncorConfig cfg;
    cfg.inb_ue_cap = 1;
    Fixture f(cfg);
    f.add(1, 0);
    f.add(2, 1);
    REQUIRE(f.net.attach(1).ok);
    REQUIRE(f.net.attach(2).ok);
    const auto keys = *f.net.ue_keys(1);
    for (auto mode : {HandoverMode::CoreAssisted, HandoverMode::Direct})
    {
        auto t = mode == HandoverMode::CoreAssisted ? f.net.handover_core_assisted(1, f.cell(1))
                                                    : f.net.handover_direct(1, f.cell(1));
        CHECK(t.failed);
        CHECK_FALSE(t.completed);
        CHECK(t.failure == "admission-refused");
        const auto& ue = f.net.ue(1);
        CHECK(ue.state == UeState::Connected);
        CHECK(ue.serving_inb == f.cell(0));
        CHECK(*f.net.ue_keys(1) == keys);
        CHECK(f.active_holders(1) == 1);
    }
    // The SME may have chained ahead; the next handover still lands a consistent key.
    auto ok = f.net.handover_core_assisted(1, f.cell(4));
    CHECK(ok.completed);
    CHECK(f.net.inb(f.cell(4)).contexts.at(1).ue.keys == f.net.ue_keys(1));
}

TEST_CASE("at most one iNB holds the active context at every instant")
{
    Fixture f;
    for (std::uint64_t u = 1; u <= 6; ++u)
    {
        f.add(u, u % 8);
        REQUIRE(f.net.attach(u).ok);
    }
    std::mt19937_64 rng(5);
    int completed = 0;
    for (int round = 0; round < 10; ++round)
    {
        for (std::uint64_t u = 1; u <= 6; ++u)
        {
            const auto& ue = f.net.ue(u);
            if (ue.state != UeState::Connected)
                continue;
            auto tgt = f.cell(rng() % 8);
            if (tgt == *ue.serving_inb)
                continue;
            f.net.start_handover(u, tgt, rng() % 2 ? HandoverMode::Direct : HandoverMode::CoreAssisted,
                                 [&](const HandoverTrace& t) { completed += t.completed ? 1 : 0; });
        }
        while (f.sim.step())
        {
            for (std::uint64_t u = 1; u <= 6; ++u)
            {
                REQUIRE(f.active_holders(u) <= 1);
                const auto& ue = f.net.ue(u);
                if (ue.state == UeState::HandingOver)
                {
                    CHECK(ue.source_inb.has_value());
                    CHECK(ue.target_inb.has_value());
                }
                if (ue.state == UeState::Connected)
                {
                    CHECK(ue.serving_inb.has_value());
                    CHECK(ue.keys.has_value());
                    CHECK(ue.private_addr.has_value());
                }
            }
        }
    }
    CHECK(completed > 20);
}

TEST_CASE("HOP relays unchanged, rejects unknown destinations, keeps no per-UE state")
{
    HopNode hop(NodeId{100}, {NodeId{1}, NodeId{2}});
    const auto before = hop.serialize_state();
    ControlMessage m;
    m.kind = MessageKind::HoRequestAck;
    m.src = NodeId{1};
    m.dst = NodeId{2};
    m.payload.ue = 77;
    m.payload.radio_config = {1, 2, 3};
    for (int i = 0; i < 1000; ++i)
    {
        m.payload.ue = static_cast<std::uint64_t>(i);
        auto r = hop.relay(m);
        REQUIRE(std::holds_alternative<ControlMessage>(r));
        CHECK(std::get<ControlMessage>(r).serialize() == m.serialize());
    }
    CHECK(hop.serialize_state() == before);
    m.dst = NodeId{3};
    CHECK(std::holds_alternative<RelayFailure>(hop.relay(m)));
}

TEST_CASE("counting an empty trace gives zeros")
{
    HandoverTrace t;
    auto c = count_messages(t);
    CHECK(c.total == 0);
    CHECK(c.via_core == 0);
    CHECK(c.per_kind.empty());
}

TEST_CASE("trace exports")
{
    Fixture f;
    f.add(1);
    REQUIRE(f.net.attach(1).ok);
    auto t = f.net.handover_core_assisted(1, f.cell(1));
    const auto csv = t.to_csv();
    CHECK(csv.rfind("seq,time_us,kind,src,dst,via_core\n", 0) == 0);
    CHECK(csv.find("HoRequired,inb-0,sme,1") != std::string::npos);
    CHECK(t.to_msc().find("--HoCommand--> ue-1") != std::string::npos);
}

TEST_CASE("downlink: forwarded after handover while the entry lives, dropped after expiry")
{
    EncorConfig cfg;
    cfg.moved_ttl = from_ms(500);
    Fixture f(cfg);
    f.add(1);
    REQUIRE(f.net.attach(1).ok);
    const auto old_public = addr::nat_uplink(f.net.ue(1).private_addr->addr(), f.net.inb(f.cell(0)).prefix);
    f.net.handover_core_assisted(1, f.cell(1));
    f.net.send_downlink(old_public, 1);
    f.sim.run();
    CHECK(f.net.data_plane().delivered == 1);
    CHECK(f.net.data_plane().forwarded == 1);
    f.sim.run_until(f.sim.now() + from_ms(600));
    f.net.send_downlink(old_public, 2);
    f.sim.run();
    CHECK(f.net.data_plane().dropped == 1);
}

TEST_CASE("no downlink buffering at the source during handover")
{
    EncorConfig cfg;
    cfg.forwarding_enabled = false;
    Fixture f(cfg);
    f.add(1);
    REQUIRE(f.net.attach(1).ok);
    const auto pub = addr::nat_uplink(f.net.ue(1).private_addr->addr(), f.net.inb(f.cell(0)).prefix);
    bool done = false;
    f.sim.schedule_in(from_ms(30), [&] {
        f.net.start_handover(1, f.cell(1), HandoverMode::Direct, [&](const HandoverTrace&) { done = true; });
    });
    // Stream packets every millisecond across the handover window.
    for (int i = 0; i < 80; ++i)
        f.sim.schedule(f.sim.now() + from_ms(i), [&f, &pub, i] { f.net.send_downlink(pub, static_cast<std::uint64_t>(i)); });
    f.sim.run();
    CHECK(done);
    const auto& dp = f.net.data_plane();
    CHECK(dp.sent == 80);
    CHECK(dp.delivered + dp.dropped == 80);
    CHECK(dp.dropped > 0);
    CHECK(dp.delivered > 0);
}

TEST_CASE("optional rekey after direct handover advances NCC outside the trace")
{
    EncorConfig cfg;
    cfg.rekey_after_direct = true;
    Fixture f(cfg);
    f.add(1);
    REQUIRE(f.net.attach(1).ok);
    const auto n0 = f.net.ue_keys(1)->ncc;
    auto t = f.net.handover_direct(1, f.cell(1));
    CHECK(count_messages(t).total == 6);
    f.sim.run();
    CHECK(f.net.ue_keys(1)->ncc == n0 + 1);
    CHECK(f.net.inb(f.cell(1)).contexts.at(1).ue.keys == f.net.ue_keys(1));
}

TEST_CASE("fabric bounces a refused relay back to the sender")
{
    sim::Simulator s;
    auto cpu = s.add_node({"cpu"});
    auto a = s.add_node({"a"});
    auto b = s.add_node({"b"});
    auto hop = s.add_node({"hop"});
    s.add_link(a, hop, from_ms(1));
    s.add_link(b, hop, from_ms(1));
    ControlFabric fabric(s, cpu);
    std::vector<MessageKind> at_a, at_b;
    fabric.bind(a, [&](const ControlMessage& m) { at_a.push_back(m.kind); });
    fabric.bind(b, [&](const ControlMessage& m) { at_b.push_back(m.kind); });
    HopNode h(hop, {a});
    fabric.bind_relay(
        hop,
        [&](const ControlMessage& m) -> std::optional<std::string> {
            auto r = h.relay(m);
            if (auto* f = std::get_if<RelayFailure>(&r))
                return f->reason;
            return std::nullopt;
        },
        [](const ControlMessage&) {});
    ControlMessage m;
    m.kind = MessageKind::HoRequestAck;
    m.src = a;
    m.dst = b;
    fabric.send(m, hop);
    s.run();
    CHECK(at_b.empty());
    CHECK(at_a == std::vector<MessageKind>{MessageKind::RelayError});
    CHECK(fabric.relay_errors() == 1);
}
