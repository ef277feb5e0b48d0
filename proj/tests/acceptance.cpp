// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include "encor/addressing.hpp"
#include "encor/charging.hpp"
#include "encor/encor_network.hpp"
#include "encor/experiments.hpp"
#include "encor/mec_sweep.hpp"
#include "encor/placement.hpp"
#include "encor/security.hpp"
#include "encor/transport.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>

using namespace encor;
using sim::from_ms;
using sim::from_seconds;

namespace
{

struct Outcome
{
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what)
    {
        if (!ok && pass)
        {
            pass = false;
            detail = what;
        }
    }
};

std::string fmt(const char* f, double a, double b = 0, double c = 0)
{
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c);
    return buf;
}

// ---- 1 ----

Outcome message_table()
{
    Outcome o;
    auto t = experiments::run_message_table();
    const auto& lte = t.row("lte");
    const auto& core = t.row("encor");
    const auto& tp = t.row("encor+transport");
    o.require(lte.total == 15 && lte.via_core == 15, fmt("LTE %g(%g)", lte.total, lte.via_core));
    o.require(core.total == 7 && core.via_core == 2, fmt("EnCoR %g(%g)", core.total, core.via_core));
    o.require(tp.total >= 8 && tp.total <= 10, fmt("EnCoR+transport %g", tp.total));
    if (o.pass)
        o.detail = fmt("LTE 15(15), EnCoR 7(2), EnCoR+transport %g", tp.total);
    return o;
}

// ---- 2 ----

Outcome load()
{
    Outcome o;
    using experiments::Architecture;
    experiments::LoadScenario s;
    auto res = experiments::run_load_sweep(s);
    const experiments::LoadRow* top = nullptr;
    for (double r : s.rates)
    {
        const auto& e = res.at(Architecture::Encor, r);
        const auto& l = res.at(Architecture::Lte, r);
        o.require(e.mean_ms <= l.mean_ms, fmt("EnCoR %g ms > LTE %g ms at %g/s", e.mean_ms, l.mean_ms, r));
        o.require(e.counts_constant && e.core_msgs_per_ho == 2.0, fmt("EnCoR core msgs/HO %g at %g/s", e.core_msgs_per_ho, r));
        o.require(l.counts_constant && l.core_msgs_per_ho == 15.0, fmt("LTE core msgs/HO %g at %g/s", l.core_msgs_per_ho, r));
        if (l.utilization >= 0.9)
            top = &l;
    }
    o.require(top != nullptr, "LTE core utilization never reaches 0.9");
    if (top)
    {
        const auto& e = res.at(Architecture::Encor, top->rate_per_s);
        double ratio = top->mean_ms / e.mean_ms;
        o.require(ratio >= 2.0, fmt("ratio %g at %g/s", ratio, top->rate_per_s));
        if (o.pass)
            o.detail = fmt("at %g/s (LTE util %.3f) LTE/EnCoR = %.2f", top->rate_per_s, top->utilization, ratio);
    }
    return o;
}

// ---- 3 ----

Outcome mec_scaling()
{
    Outcome o;
    mec::GridNetwork g;
    auto pts = mec::sweep(g, {1, 4, 16, 25, 100, 400}, 10.0, 1);
    o.require(pts.front().k == 1 && pts.front().ratio_vs_k1 == 1.0, "ratio(k=1) != 1");
    for (std::size_t i = 1; i < pts.size(); ++i)
        o.require(pts[i].ratio_vs_k1 >= pts[i - 1].ratio_vs_k1, fmt("ratio drops at k=%g", pts[i].k));
    double last = pts.back().ratio_vs_k1;
    o.require(pts.back().k == 400 && std::abs(last - 3.33) <= 0.05, fmt("ratio(k=400) = %g", last));
    if (o.pass)
        o.detail = fmt("ratio(400) = %.4f", last);
    return o;
}

// ---- 4 ----

Outcome costs()
{
    Outcome o;
    placement::CostModel m;
    auto ten = placement::cost_compare(m, 10, 10);
    auto all = placement::cost_compare(m, 10, 33);
    o.require(ten.cost_3gpp == 27'500'000, "ten core sites != $27.5M");
    o.require(all.cost_encor == 6'600'000, "routers at all PoPs != $6.6M");
    o.require(ten.cost_encor == 2'000'000, "ten PoP routers != $2.0M");
    o.require(ten.savings >= 0.9, fmt("savings %g", ten.savings));
    if (o.pass)
        o.detail = fmt("$27.5M vs $%.1fM / $%.1fM, savings %.4f", all.cost_encor / 1e6, ten.cost_encor / 1e6, ten.savings);
    return o;
}

// ---- 5 ----

double best_subset(const placement::Dataset& d, std::size_t n, double budget)
{
    const std::size_t p = d.pops.size();
    double best = 0.0;
    for (std::uint32_t mask = 0; mask < (1u << p); ++mask)
    {
        if (static_cast<std::size_t>(std::popcount(mask)) != std::min(n, p))
            continue;
        std::vector<placement::SitePoint> cores;
        for (std::size_t i = 0; i < p; ++i)
            if (mask & (1u << i))
                cores.push_back(d.pops[i]);
        best = std::max(best, placement::coverage_3gpp(d.counties, cores, d.pops, d.cdns, budget));
    }
    return best;
}

Outcome placement_properties()
{
    Outcome o;
    int exact = 0, nontrivial = 0;
    double worst = 1.0;
    const std::vector<double> budgets{100, 250, 500, 750, 1000, 1500, 2500};
    for (std::uint64_t seed = 1; seed <= 50; ++seed)
    {
        placement::SyntheticSpec spec;
        spec.counties = 60;
        spec.pops = 4 + seed % 5;
        spec.cdns = 3;
        spec.clusters = 6;
        auto d = placement::generate_synthetic(seed, spec);
        const std::size_t n = 1 + seed % 4;

        std::vector<double> enc;
        for (const auto& c : d.counties)
            enc.push_back(placement::county_distance_encor(c, d.pops, d.cdns));
        std::nth_element(enc.begin(), enc.begin() + enc.size() / 2, enc.end());
        const double budget = enc[enc.size() / 2] * 1.3;

        auto dep = placement::greedy_place(d.counties, d.pops, d.cdns, n, budget);
        double greedy = placement::coverage_3gpp(d.counties, placement::deployed_sites(dep, d.pops), d.pops, d.cdns, budget);
        double opt = best_subset(d, n, budget);
        o.require(greedy <= opt, fmt("seed %g: greedy above brute force", double(seed)));
        if (greedy == opt)
            ++exact;
        o.require(greedy >= (1.0 - 1.0 / std::exp(1.0)) * opt, fmt("seed %g: greedy %g < (1-1/e) opt %g", double(seed), greedy, opt));
        if (opt > 0 && opt < 1)
            ++nontrivial;
        if (opt > 0)
            worst = std::min(worst, greedy / opt);

        for (double b : budgets)
        {
            auto at_b = placement::greedy_place(d.counties, d.pops, d.cdns, n, b);
            double g3 = placement::coverage_3gpp(d.counties, placement::deployed_sites(at_b, d.pops), d.pops, d.cdns, b);
            double en = placement::coverage_encor(d.counties, d.pops, d.cdns, b);
            o.require(en >= g3, fmt("seed %g: EnCoR below 3GPP at %g km", double(seed), b));
            double full = placement::coverage_3gpp(d.counties, d.pops, d.pops, d.cdns, b);
            o.require(full == en, fmt("seed %g: all-PoP 3GPP %g != EnCoR at %g km", double(seed), full, b));
        }
    }
    o.require(exact >= 45, fmt("greedy optimal on %g/50", exact));
    if (o.pass)
        o.detail = fmt("greedy optimal on %g/50 (%g with partial optimum), worst ratio %.4f", exact, nontrivial, worst);
    return o;
}

// ---- 6 ----

Outcome transport_behaviours()
{
    Outcome o;
    transport::TransportConfig expired;
    expired.path.moved_ttl = from_ms(1);
    int passive_dead = 0, ping_dead = 0, ping_over = 0;
    for (std::uint64_t seed = 1; seed <= 100; ++seed)
    {
        transport::LiveOptions l;
        l.seed = seed;
        l.handovers = {from_seconds(5) + from_ms(static_cast<double>(seed) * 7)};
        l.policy.mode = transport::PolicyMode::PassiveOnly;
        passive_dead += transport::run_live(expired, l).deadlocked ? 1 : 0;
        l.policy.mode = transport::PolicyMode::PingOnIdle;
        auto m = transport::run_live(expired, l);
        ping_dead += m.deadlocked ? 1 : 0;
        ping_over += m.pings > m.handovers ? 1 : 0;
    }
    o.require(passive_dead == 100, fmt("PassiveOnly deadlocked %g/100", passive_dead));
    o.require(ping_dead == 0, fmt("PingOnIdle deadlocked %g/100", ping_dead));
    o.require(ping_over == 0, fmt("%g runs sent more than one ping per migration", ping_over));

    transport::TransportConfig ample;
    transport::BufferedOptions v;
    v.handovers = {from_seconds(60)};
    auto b = transport::run_buffered(ample, v);
    o.require(b.handovers == 1, "buffered run saw no handover");
    o.require(b.stall_s == 0.0, fmt("buffered stall %g s", b.stall_s));
    o.require(b.quality == 5.0, fmt("buffered quality %g", b.quality));
    if (o.pass)
        o.detail = fmt("deadlocks passive %g/100 ping %g/100; buffered stall 0, quality 5", passive_dead, ping_dead);
    return o;
}

// ---- 7 ----

Outcome loss_ordering()
{
    Outcome o;
    transport::TransportConfig nofwd;
    nofwd.path.forwarding_enabled = false;
    transport::TransportConfig fwd;
    int ordered = 0, reduced = 0;
    double bulk_sum = 0, buf_sum = 0;
    for (std::uint64_t seed = 1; seed <= 30; ++seed)
    {
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> bulk_at(4.0, 12.0), buf_at(40.0, 80.0);

        transport::BulkOptions bulk;
        bulk.seed = seed;
        auto bulk_base = transport::run_bulk(nofwd, bulk);
        bulk.handovers = {from_seconds(bulk_at(rng))};
        auto bulk_ho = transport::run_bulk(nofwd, bulk);
        auto bulk_fwd = transport::run_bulk(fwd, bulk);

        transport::BufferedOptions buf;
        buf.seed = seed;
        auto buf_base = transport::run_buffered(nofwd, buf);
        buf.handovers = {from_seconds(buf_at(rng))};
        buf.align_to_chunk = true;
        auto buf_ho = transport::run_buffered(nofwd, buf);

        double d_bulk = bulk_ho.retx_rate - bulk_base.retx_rate;
        double d_buf = buf_ho.retx_rate - buf_base.retx_rate;
        bulk_sum += d_bulk;
        buf_sum += d_buf;
        if (d_bulk > d_buf && d_buf > 0)
            ++ordered;
        if (bulk_fwd.retransmissions < bulk_ho.retransmissions)
            ++reduced;
    }
    o.require(ordered == 30, fmt("bulk > buffered > 0 on %g/30 seeds", ordered));
    o.require(reduced == 30, fmt("forwarding reduced bulk retransmissions on %g/30 seeds", reduced));
    if (o.pass)
        o.detail = fmt("mean increase bulk %.5f > buffered %.6f > 0 (30/30); forwarding helps 30/30", bulk_sum / 30, buf_sum / 30);
    return o;
}

// ---- 8 ----

security::Key128 key_of(std::uint64_t seed)
{
    security::Key128 k{};
    std::mt19937_64 g(seed);
    for (auto& b : k)
        b = static_cast<std::uint8_t>(g());
    return k;
}

bool addressing_round_trip()
{
    std::mt19937_64 rng(2024);
    addr::RecentlyMovedTable none;
    for (int i = 0; i < 100000; ++i)
    {
        const addr::Addr128 a{addr::kPrivateLocator, rng()};
        const addr::InbPrefix p{(rng() & ~addr::kPrivateMask) | 0x2000000000000000ULL};
        const auto up = addr::nat_uplink(a, p);
        if (up.identifier != a.identifier || up.locator != p.locator)
            return false;
        auto d = addr::nat_downlink(up, {a.identifier}, none, sim::SimTime{0});
        if (!std::holds_alternative<addr::DeliverLocal>(d) || !(std::get<addr::DeliverLocal>(d).dest == a))
            return false;
    }
    return true;
}

bool hop_stateless()
{
    sim::Simulator s(5);
    control::EncorConfig cfg;
    cfg.inb_count = 16;
    cfg.inbs_per_hop = 8;
    control::EncorNetwork net(s, cfg);
    std::vector<std::vector<std::uint8_t>> before;
    for (const auto& h : net.hops())
        before.push_back(h.serialize_state());
    for (std::uint64_t u = 1; u <= 8; ++u)
    {
        net.provision(security::SubscriberRecord{u, key_of(u), 0, 9, security::Unlimited{}});
        net.add_ue(u, key_of(u), net.inb_ids()[u % 8]);
        if (!net.attach(u).ok)
            return false;
    }
    std::mt19937_64 rng(3);
    int done = 0;
    for (int round = 0; round < 20; ++round)
    {
        for (std::uint64_t u = 1; u <= 8; ++u)
        {
            const auto& ue = net.ue(u);
            if (ue.state != control::UeState::Connected)
                continue;
            auto src = std::find(net.inb_ids().begin(), net.inb_ids().end(), *ue.serving_inb) - net.inb_ids().begin();
            auto group = src / 8;
            auto tgt = net.inb_ids()[group * 8 + rng() % 8];
            if (tgt == *ue.serving_inb)
                continue;
            net.start_handover(u, tgt, rng() % 2 ? control::HandoverMode::Direct : control::HandoverMode::CoreAssisted,
                               [&](const control::HandoverTrace& t) { done += t.completed ? 1 : 0; });
        }
        s.run();
        for (std::size_t i = 0; i < net.hops().size(); ++i)
            if (net.hops()[i].serialize_state() != before[i])
                return false;
    }
    return done > 50;
}

bool charging_conservation()
{
    for (std::uint64_t seed = 1; seed <= 20; ++seed)
    {
        sim::Simulator s(seed);
        charging::ChargingConfig cfg;
        cfg.sub_quota = 200'000;
        charging::ChargingNetwork net(s, cfg);
        const std::uint64_t subs = 1 + seed % 4;
        const std::uint64_t balance = seed % 3 == 0 ? 3'000'000 : 40'000'000;
        for (std::uint64_t u = 1; u <= subs; ++u)
            net.open_account(u, balance);
        std::mt19937_64 rng(seed);
        std::vector<std::size_t> where(subs + 1);
        for (auto& w : where)
            w = rng() % net.inb_count();
        std::uint64_t consumed = 0;
        for (int e = 0; e < 1000; ++e)
        {
            s.run_until(s.now() + from_ms(static_cast<double>(rng() % 20)));
            const std::uint64_t u = 1 + rng() % subs;
            const auto roll = rng() % 100;
            if (roll < 8)
            {
                const auto to = rng() % net.inb_count();
                net.move(u, where[u], to);
                where[u] = to;
            }
            else if (seed % 2 == 0 && roll < 10)
            {
                net.restart_cp(rng() % cfg.cp_count);
            }
            else
            {
                consumed += net.consume(where[u], u, 1 + rng() % 150'000);
            }
            const auto l = net.ledger();
            if (!(l.delivered <= l.inb_granted && l.inb_granted <= l.cp_granted && l.cp_granted <= l.ocs_granted &&
                  l.ocs_granted <= l.initial_balance))
                return false;
        }
        s.run();
        if (net.ledger().delivered != consumed)
            return false;
    }
    return true;
}

bool replay_and_chaining()
{
    security::SubscriberRecord rec{1, key_of(77), 0};
    security::UeSqnState ue;
    std::vector<security::AuthVector> accepted;
    for (std::uint64_t i = 0; i < 16; ++i)
    {
        security::Nonce rand{};
        std::mt19937_64 g(i + 100);
        for (auto& b : rand)
            b = static_cast<std::uint8_t>(g());
        auto v = security::generate_auth_vector(rec, rand);
        if (!std::holds_alternative<security::AuthResponse>(security::ue_process_challenge(rec.k, ue, v.rand, v.autn)))
            return false;
        accepted.push_back(v);
    }
    for (const auto& v : accepted)
    {
        auto r = security::ue_process_challenge(rec.k, ue, v.rand, v.autn);
        if (!std::holds_alternative<security::AuthFailure>(r) || std::get<security::AuthFailure>(r) != security::AuthFailure::Replay)
            return false;
    }

    auto keys = security::derive_k_enb(accepted.back().k_asme);
    std::set<security::Digest> seen{keys.k_enb};
    for (std::uint32_t i = 1; i <= 32; ++i)
    {
        auto next = security::chain_k_enb(keys);
        if (next.ncc != keys.ncc + 1 || !seen.insert(next.k_enb).second || security::chain_k_enb(keys) != next)
            return false;
        keys = next;
    }

    // In the network: each core-assisted handover advances NCC by exactly one.
    sim::Simulator s(2);
    control::EncorNetwork net(s, control::EncorConfig{});
    net.provision(security::SubscriberRecord{9, key_of(9), 0, 9, security::Unlimited{}});
    net.add_ue(9, key_of(9), net.inb_ids()[0]);
    if (!net.attach(9).ok)
        return false;
    const auto n0 = net.ue_keys(9)->ncc;
    for (std::size_t i = 1; i <= 4; ++i)
    {
        net.handover_core_assisted(9, net.inb_ids()[i]);
        if (net.ue_keys(9)->ncc != n0 + i)
            return false;
    }
    return true;
}

Outcome invariants()
{
    Outcome o;
    o.require(addressing_round_trip(), "addressing round trip");
    o.require(hop_stateless(), "HOP state changed");
    o.require(charging_conservation(), "charging ledger");
    o.require(replay_and_chaining(), "replay rejection or NCC chaining");
    if (o.pass)
        o.detail = "addressing 1e5, HOP snapshots, charging 20x1e3 events, replay + NCC";
    return o;
}

}  // namespace

int main()
{
    struct Criterion
    {
        int id;
        const char* name;
        double limit_s;
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria = {
        {1, "message-count table", 1.0, message_table},
        {2, "handover under load", 120.0, load},
        {3, "MEC scaling", 30.0, mec_scaling},
        {4, "cost arithmetic", 1.0, costs},
        {5, "placement properties", 60.0, placement_properties},
        {6, "transport behaviours", 60.0, transport_behaviours},
        {7, "loss ordering", 60.0, loss_ordering},
        {8, "core invariant suites", 60.0, invariants},
    };
    int failed = 0;
    for (const auto& c : criteria)
    {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try
        {
            o = c.run();
        }
        catch (const std::exception& e)
        {
            o.pass = false;
            o.detail = std::string("exception: ") + e.what();
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (o.pass && secs >= c.limit_s)
        {
            o.pass = false;
            o.detail = "over time limit";
        }
        failed += o.pass ? 0 : 1;
        std::printf("%s [%d] %s: %s (%.2f s, limit %.0f s)\n", o.pass ? "PASS" : "FAIL", c.id, c.name,
                    o.detail.c_str(), secs, c.limit_s);
        std::fflush(stdout);
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
