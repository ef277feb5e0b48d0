#include "encor/charging.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

namespace encor::charging
{

std::uint64_t ocs_grant(Account& account, std::uint64_t requested)
{
    const auto g = std::min(requested, account.balance);
    account.balance -= g;
    return g;
}

void Ocs::open(std::uint64_t subscriber, std::uint64_t balance)
{
    accounts_[subscriber] = Account{subscriber, balance};
}

std::uint64_t Ocs::grant(std::uint64_t subscriber, std::uint64_t requested)
{
    ++requests_;
    auto it = accounts_.find(subscriber);
    if (it == accounts_.end())
        return 0;
    const auto g = ocs_grant(it->second, requested);
    total_granted_ += g;
    return g;
}

std::uint64_t Ocs::balance(std::uint64_t subscriber) const
{
    auto it = accounts_.find(subscriber);
    return it == accounts_.end() ? 0 : it->second.balance;
}

bool ChargingProxy::needs_fetch(std::uint64_t subscriber, std::uint64_t amount) const
{
    auto it = cache_.find(subscriber);
    return it == cache_.end() || it->second.remaining < amount;
}

void ChargingProxy::deposit(std::uint64_t subscriber, std::uint64_t bytes)
{
    auto& e = cache_[subscriber];
    e.granted += bytes;
    e.remaining += bytes;
    ocs_received_ += bytes;
}

std::uint64_t ChargingProxy::serve(std::uint64_t subscriber, std::uint64_t amount)
{
    auto it = cache_.find(subscriber);
    if (it == cache_.end())
        return 0;
    const auto g = std::min(amount, it->second.remaining);
    it->second.remaining -= g;
    total_granted_ += g;
    return g;
}

std::uint64_t ChargingProxy::cp_subquota(std::uint64_t subscriber, std::uint64_t amount)
{
    if (needs_fetch(subscriber, amount))
    {
        count_request();
        deposit(subscriber, ocs_->grant(subscriber, batch_));
    }
    return serve(subscriber, amount);
}

const CpEntry* ChargingProxy::entry(std::uint64_t subscriber) const
{
    auto it = cache_.find(subscriber);
    return it == cache_.end() ? nullptr : &it->second;
}

ConsumeResult inb_consume(InbQuota& quota, std::uint64_t bytes)
{
    ConsumeResult r;
    r.allowed = quota.cut_off ? 0 : std::min(bytes, quota.remaining());
    r.rejected = r.allowed < bytes;
    quota.used += r.allowed;
    const bool near_end = quota.granted == 0 ||
                          static_cast<double>(quota.used) >= quota.threshold * static_cast<double>(quota.granted);
    if (near_end && !quota.refill_pending && !quota.cut_off)
    {
        quota.refill_pending = true;
        r.refill_requested = true;
    }
    return r;
}

void inb_refill(InbQuota& quota, std::uint64_t extra)
{
    quota.refill_pending = false;
    quota.granted += extra;
    if (extra == 0 && quota.remaining() == 0)
        quota.cut_off = true;
}

std::uint64_t throughput_allowance(const security::ThroughputCap& cap, sim::SimTime dt)
{
    return static_cast<std::uint64_t>(cap.bits_per_second / 8.0 * sim::to_seconds(dt));
}

// ---- simulated network ------------------------------------------------------

ChargingNetwork::ChargingNetwork(sim::Simulator& sim, ChargingConfig config)
    : sim_(sim), config_(std::move(config))
{
    if (config_.cp_count == 0 || config_.inbs_per_cp == 0 || config_.sub_quota == 0)
        throw std::invalid_argument("charging network needs CPs, iNBs and a nonzero sub-quota");
    if (config_.batch == 0)
        config_.batch = 10 * config_.sub_quota;

    ocs_node_ = sim_.add_node({"ocs"});
    sim_.set_handler(ocs_node_, [this](sim::Envelope&& env) {
        auto c = std::any_cast<Credit>(env.payload);
        const auto g = ocs_.grant(c.subscriber, c.bytes);
        log("ocs", "grant", c.subscriber, g);
        sim_.send(ocs_node_, env.src, "OcsGrant", Credit{Credit::Kind::OcsGrant, c.inb, c.subscriber, g});
    });
    cps_.reserve(config_.cp_count);
    cp_pending_.resize(config_.cp_count);
    for (std::size_t p = 0; p < config_.cp_count; ++p)
    {
        cps_.emplace_back(ocs_, config_.batch);
        const auto node = sim_.add_node({"cp-" + std::to_string(p)});
        cp_nodes_.push_back(node);
        sim_.add_link(node, ocs_node_, config_.cp_ocs_latency);
        sim_.set_handler(node, [this, p](sim::Envelope&& env) { on_cp(p, std::any_cast<Credit>(env.payload)); });
        for (std::size_t i = 0; i < config_.inbs_per_cp; ++i)
        {
            const std::size_t idx = inb_nodes_.size();
            const auto inb = sim_.add_node({"inb-" + std::to_string(idx)});
            inb_nodes_.push_back(inb);
            inbs_.emplace_back();
            sim_.add_link(inb, node, config_.inb_cp_latency);
            sim_.set_handler(inb, [this, idx](sim::Envelope&& env) { on_inb(idx, std::any_cast<Credit>(env.payload)); });
        }
    }
}

void ChargingNetwork::log(std::string actor, std::string event, std::uint64_t subscriber, std::uint64_t bytes)
{
    events_.push_back(ChargingEvent{sim_.now(), std::move(actor), std::move(event), subscriber, bytes});
}

void ChargingNetwork::open_account(std::uint64_t subscriber, std::uint64_t balance)
{
    ocs_.open(subscriber, balance);
    initial_[subscriber] = balance;
}

void ChargingNetwork::request_refill(std::size_t inb, std::uint64_t subscriber)
{
    log("inb-" + std::to_string(inb), "refill-request", subscriber, config_.sub_quota);
    sim_.send(inb_nodes_[inb], cp_nodes_[cp_of(inb)], "CreditRequest",
              Credit{Credit::Kind::CreditRequest, inb, subscriber, config_.sub_quota});
}

std::uint64_t ChargingNetwork::consume(std::size_t inb, std::uint64_t subscriber, std::uint64_t bytes)
{
    auto& q = inbs_.at(inb)[subscriber];
    q.threshold = config_.threshold;
    const auto r = inb_consume(q, bytes);
    delivered_ += r.allowed;
    if (r.allowed > 0)
        log("inb-" + std::to_string(inb), "consume", subscriber, r.allowed);
    if (r.refill_requested)
        request_refill(inb, subscriber);
    return r.allowed;
}

void ChargingNetwork::on_cp(std::size_t p, const Credit& c)
{
    auto& cp = cps_[p];
    const std::string actor = "cp-" + std::to_string(p);
    if (c.kind == Credit::Kind::CreditRequest)
    {
        auto& waiting = cp_pending_[p][c.subscriber];
        if (waiting.empty() && !cp.needs_fetch(c.subscriber, c.bytes))
        {
            const auto g = cp.serve(c.subscriber, c.bytes);
            log(actor, "subquota", c.subscriber, g);
            sim_.send(cp_nodes_[p], inb_nodes_[c.inb], "CreditGrant",
                      Credit{Credit::Kind::CreditGrant, c.inb, c.subscriber, g});
            return;
        }
        waiting.push_back(PendingCredit{c.inb, c.bytes});
        if (waiting.size() == 1)
        {
            cp.count_request();
            log(actor, "ocs-request", c.subscriber, cp.batch());
            sim_.send(cp_nodes_[p], ocs_node_, "OcsRequest",
                      Credit{Credit::Kind::OcsRequest, c.inb, c.subscriber, cp.batch()});
        }
        return;
    }
    if (c.kind == Credit::Kind::OcsGrant)
    {
        cp.deposit(c.subscriber, c.bytes);
        auto waiting = std::move(cp_pending_[p][c.subscriber]);
        cp_pending_[p][c.subscriber].clear();
        for (const auto& w : waiting)
        {
            const auto g = cp.serve(c.subscriber, w.amount);
            log(actor, "subquota", c.subscriber, g);
            sim_.send(cp_nodes_[p], inb_nodes_[w.inb], "CreditGrant",
                      Credit{Credit::Kind::CreditGrant, w.inb, c.subscriber, g});
        }
    }
}

void ChargingNetwork::on_inb(std::size_t inb, const Credit& c)
{
    if (c.kind != Credit::Kind::CreditGrant)
        return;
    auto& q = inbs_[inb][c.subscriber];
    inb_granted_ += c.bytes;
    inb_refill(q, c.bytes);
    const std::string actor = "inb-" + std::to_string(inb);
    log(actor, "refill", c.subscriber, c.bytes);
    if (q.cut_off)
        log(actor, "cutoff", c.subscriber, 0);
    else if (c.bytes > 0 && static_cast<double>(q.used) >= q.threshold * static_cast<double>(q.granted))
    {
        // Still near the end after a small grant: ask again.
        q.refill_pending = true;
        request_refill(inb, c.subscriber);
    }
}

void ChargingNetwork::move(std::uint64_t subscriber, std::size_t from, std::size_t to)
{
    auto& src = inbs_.at(from);
    auto it = src.find(subscriber);
    if (it == src.end())
        return;
    InbQuota moved = it->second;
    src.erase(it);
    auto& dst = inbs_.at(to)[subscriber];
    // Only the unused remainder travels; a refill still in flight lands at the old iNB and is dropped there.
    dst.granted += moved.remaining();
    dst.cut_off = moved.cut_off;
    dst.threshold = config_.threshold;
    log("inb-" + std::to_string(to), "quota-in", subscriber, moved.remaining());
}

void ChargingNetwork::restart_cp(std::size_t p)
{
    cps_.at(p).restart();
    log("cp-" + std::to_string(p), "cache-loss", 0, 0);
}

const InbQuota* ChargingNetwork::quota(std::size_t inb, std::uint64_t subscriber) const
{
    const auto& m = inbs_.at(inb);
    auto it = m.find(subscriber);
    return it == m.end() ? nullptr : &it->second;
}

bool ChargingNetwork::cut_off(std::uint64_t subscriber) const
{
    for (const auto& m : inbs_)
    {
        auto it = m.find(subscriber);
        if (it != m.end() && it->second.cut_off)
            return true;
    }
    return false;
}

Ledger ChargingNetwork::ledger() const
{
    Ledger l;
    for (const auto& [_, b] : initial_)
        l.initial_balance += b;
    l.ocs_granted = ocs_.total_granted();
    for (const auto& cp : cps_)
        l.cp_granted += cp.total_granted();
    l.inb_granted = inb_granted_;
    l.delivered = delivered_;
    return l;
}

std::string ChargingNetwork::events_csv() const
{
    std::ostringstream out;
    out << "time_us,actor,event,subscriber,bytes\n";
    for (const auto& e : events_)
        out << e.time.count() << ',' << e.actor << ',' << e.event << ',' << e.subscriber << ',' << e.bytes << '\n';
    return out.str();
}

}  // namespace encor::charging
