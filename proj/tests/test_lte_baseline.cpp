#include <doctest.h>

#include "encor/lte_network.hpp"

#include <algorithm>

using namespace encor;
using namespace encor::lte;
using sim::from_ms;

namespace
{

security::Key128 key_for(std::uint64_t imsi)
{
    security::Key128 k{};
    for (std::size_t i = 0; i < k.size(); ++i)
        k[i] = static_cast<std::uint8_t>(imsi * 17 + i);
    return k;
}

struct Fixture
{
    sim::Simulator sim{3};
    LteNetwork net;
    explicit Fixture(LteConfig cfg = {}) : net(sim, cfg) {}
    void add(std::uint64_t imsi, std::size_t cell = 0, bool provision = true)
    {
        if (provision)
            net.provision(security::SubscriberRecord{imsi, key_for(imsi), 0, 9, security::Unlimited{}});
        net.add_ue(imsi, key_for(imsi), net.enb_ids()[cell]);
    }
    NodeId cell(std::size_t i) const { return net.enb_ids()[i]; }
};

}  // namespace

TEST_CASE("nominal attach installs both tunnel segments")
{
    Fixture f;
    f.add(1);
    auto r = f.net.attach_lte(1);
    REQUIRE(r.ok);
    CHECK(f.net.state(1) == LteUeState::Connected);
    const auto* a = f.net.anchor(1);
    REQUIRE(a);
    CHECK(a->tunnel.teid_up != 0);
    CHECK(a->tunnel.teid_down != 0);
    CHECK(a->tunnel.s5_teid != 0);
    CHECK(a->tunnel.enb == f.cell(0));
    CHECK(a->public_ip.locator == f.net.config().pgw_locator);
}

TEST_CASE("unknown imsi is rejected")
{
    Fixture f;
    f.add(2, 0, false);
    auto r = f.net.attach_lte(2);
    CHECK_FALSE(r.ok);
    CHECK(r.cause == "unknown-subscriber");
    CHECK(f.net.state(2) == LteUeState::Detached);
}

TEST_CASE("S1 handover: 15 messages, all via core, in canonical order")
{
    Fixture f;
    f.add(1);
    REQUIRE(f.net.attach_lte(1).ok);
    const auto before = *f.net.anchor(1);
    auto t = f.net.s1_handover(1, f.cell(2));
    REQUIRE(t.completed);
    const std::vector<MessageKind> expected = {
        MessageKind::HoRequired,           MessageKind::HoRequest,
        MessageKind::HoRequestAck,         MessageKind::CreateIndirectTunnelReq,
        MessageKind::CreateIndirectTunnelResp, MessageKind::HoCommand,
        MessageKind::HoCommand,            MessageKind::EnbStatusTransfer,
        MessageKind::MmeStatusTransfer,    MessageKind::HoConfirm,
        MessageKind::HoNotify,             MessageKind::ModifyBearerReq,
        MessageKind::ModifyBearerResp,     MessageKind::UeContextReleaseCommand,
        MessageKind::UeContextReleaseComplete};
    std::vector<MessageKind> got;
    for (const auto& e : t.messages)
        got.push_back(e.message.kind);
    CHECK(got == expected);
    const auto c = control::count_messages(t);
    CHECK(c.total == 15);
    CHECK(c.via_core == 15);
    CHECK(t.core_services == 15);
    CHECK(f.net.serving_enb(1) == f.cell(2));
    const auto& after = *f.net.anchor(1);
    CHECK(after.tunnel.enb == f.cell(2));
    CHECK(after.tunnel.teid_down != before.tunnel.teid_down);
    CHECK(after.tunnel.teid_up != before.tunnel.teid_up);
    CHECK(after.tunnel.s5_teid == before.tunnel.s5_teid);
}

TEST_CASE("public IP is invariant across many handovers")
{
    Fixture f;
    f.add(1);
    REQUIRE(f.net.attach_lte(1).ok);
    const auto ip = f.net.anchor(1)->public_ip;
    for (int i = 1; i <= 20; ++i)
    {
        auto t = f.net.s1_handover(1, f.cell(static_cast<std::size_t>(i % 8)));
        REQUIRE(t.completed);
        CHECK(f.net.anchor(1)->public_ip == ip);
        CHECK(control::count_messages(t).total == 15);
        CHECK(control::count_messages(t).via_core == 15);
    }
}

TEST_CASE("downlink across a handover: zero loss with unbounded buffers")
{
    Fixture f;
    f.add(1);
    REQUIRE(f.net.attach_lte(1).ok);
    bool done = false;
    f.sim.schedule_in(from_ms(40), [&] { f.net.start_handover(1, f.cell(1), [&](auto&) { done = true; }); });
    const int n = 400;
    for (int i = 0; i < n; ++i)
        f.sim.schedule_in(from_ms(i * 0.5), [&f, i] { f.net.send_downlink(1, static_cast<std::uint64_t>(i)); });
    f.sim.run();
    REQUIRE(done);
    const auto& dp = f.net.data_plane();
    CHECK(dp.delivered == static_cast<std::uint64_t>(n));
    CHECK(dp.dropped == 0);
    CHECK(dp.buffered > 0);
    auto ids = dp.delivered_ids;
    std::sort(ids.begin(), ids.end());
    CHECK(std::adjacent_find(ids.begin(), ids.end()) == ids.end());
}

TEST_CASE("a buffer cap turns overflow into loss")
{
    LteConfig cfg;
    cfg.buffer_cap = 3;
    Fixture f(cfg);
    f.add(1);
    REQUIRE(f.net.attach_lte(1).ok);
    f.sim.schedule_in(from_ms(40), [&] { f.net.start_handover(1, f.cell(1), nullptr); });
    for (int i = 0; i < 400; ++i)
        f.sim.schedule_in(from_ms(i * 0.5), [&f, i] { f.net.send_downlink(1, static_cast<std::uint64_t>(i)); });
    f.sim.run();
    CHECK(f.net.data_plane().dropped > 0);
    CHECK(f.net.data_plane().delivered + f.net.data_plane().dropped == 400);
}

TEST_CASE("admission refusal leaves the UE at the source")
{
    LteConfig cfg;
    cfg.enb_ue_cap = 1;
    Fixture f(cfg);
    f.add(1, 0);
    f.add(2, 1);
    REQUIRE(f.net.attach_lte(1).ok);
    REQUIRE(f.net.attach_lte(2).ok);
    auto t = f.net.s1_handover(1, f.cell(1));
    CHECK(t.failed);
    CHECK(f.net.state(1) == LteUeState::Connected);
    CHECK(f.net.serving_enb(1) == f.cell(0));
    CHECK(f.net.s1_handover(1, f.cell(3)).completed);
}

TEST_CASE("user path goes through the anchors and matches segment sums")
{
    Fixture f;
    f.add(1);
    CHECK_FALSE(f.net.route_user_packet(1).has_value());
    REQUIRE(f.net.attach_lte(1).ok);
    auto p = f.net.route_user_packet(1);
    REQUIRE(p);
    CHECK(std::find(p->nodes.begin(), p->nodes.end(), "pgw") != p->nodes.end());
    const auto& c = f.net.config();
    CHECK(p->latency == c.radio_latency + c.enb_sgw_latency + c.sgw_pgw_latency + c.pgw_internet_latency);
}

TEST_CASE("trace csv schema matches the EnCoR one")
{
    Fixture f;
    f.add(1);
    REQUIRE(f.net.attach_lte(1).ok);
    auto csv = f.net.s1_handover(1, f.cell(1)).to_csv();
    CHECK(csv.rfind("seq,time_us,kind,src,dst,via_core\n", 0) == 0);
}
