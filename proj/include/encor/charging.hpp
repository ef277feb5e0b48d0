#pragma once

// Online charging: the central OCS holds balances, Charging Proxies cache
// batches of quota, and iNBs enforce per-UE byte counters.

#include "encor/security.hpp"
#include "encor/sim_kernel.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace encor::charging
{

struct Account
{
    std::uint64_t subscriber = 0;
    std::uint64_t balance = 0;
};

/// grant = min(requested, balance); the balance drops by the grant.
std::uint64_t ocs_grant(Account& account, std::uint64_t requested);

class Ocs
{
  public:
    void open(std::uint64_t subscriber, std::uint64_t balance);
    std::uint64_t grant(std::uint64_t subscriber, std::uint64_t requested);
    std::uint64_t balance(std::uint64_t subscriber) const;
    std::uint64_t requests() const { return requests_; }
    std::uint64_t total_granted() const { return total_granted_; }

  private:
    std::map<std::uint64_t, Account> accounts_;
    std::uint64_t requests_ = 0;
    std::uint64_t total_granted_ = 0;
};

struct CpEntry
{
    std::uint64_t granted = 0;
    std::uint64_t remaining = 0;
};

class ChargingProxy
{
  public:
    ChargingProxy(Ocs& ocs, std::uint64_t batch_bytes) : ocs_(&ocs), batch_(batch_bytes) {}

    /// Serves from the cache, fetching one batch from the OCS first when the cache is short.
    std::uint64_t cp_subquota(std::uint64_t subscriber, std::uint64_t amount);
    /// Pieces of cp_subquota for callers that talk to the OCS asynchronously.
    bool needs_fetch(std::uint64_t subscriber, std::uint64_t amount) const;
    void deposit(std::uint64_t subscriber, std::uint64_t bytes);
    std::uint64_t serve(std::uint64_t subscriber, std::uint64_t amount);
    void count_request() { ++ocs_requests_; }

    /// Drops the cache. Unreported remainders are forfeited.
    void restart() { cache_.clear(); }

    std::uint64_t batch() const { return batch_; }
    const CpEntry* entry(std::uint64_t subscriber) const;
    std::uint64_t ocs_requests() const { return ocs_requests_; }
    std::uint64_t ocs_received() const { return ocs_received_; }
    std::uint64_t total_granted() const { return total_granted_; }

  private:
    Ocs* ocs_;
    std::uint64_t batch_;
    std::map<std::uint64_t, CpEntry> cache_;
    std::uint64_t ocs_requests_ = 0;
    std::uint64_t ocs_received_ = 0;
    std::uint64_t total_granted_ = 0;
};

struct InbQuota
{
    std::uint64_t granted = 0;
    std::uint64_t used = 0;
    double threshold = 0.8;
    bool refill_pending = false;
    bool cut_off = false;

    std::uint64_t remaining() const { return granted - used; }
};

struct ConsumeResult
{
    std::uint64_t allowed = 0;
    /// The caller must ask its CP for more quota.
    bool refill_requested = false;
    /// Traffic was refused because the quota is exhausted.
    bool rejected = false;
};

ConsumeResult inb_consume(InbQuota& quota, std::uint64_t bytes);
/// Applies a refill answer. A zero answer on an exhausted quota cuts service.
void inb_refill(InbQuota& quota, std::uint64_t extra);

/// Bytes a throughput-capped UE may send in `dt` (radio-scheduler cap, not a charging flow).
std::uint64_t throughput_allowance(const security::ThroughputCap& cap, sim::SimTime dt);

struct ChargingConfig
{
    std::size_t cp_count = 2;
    std::size_t inbs_per_cp = 4;
    std::uint64_t sub_quota = 1'000'000;
    /// 0 selects ten sub-quotas.
    std::uint64_t batch = 0;
    double threshold = 0.8;
    sim::SimTime inb_cp_latency = sim::from_ms(2);
    sim::SimTime cp_ocs_latency = sim::from_ms(15);
};

struct ChargingEvent
{
    sim::SimTime time{};
    std::string actor;
    std::string event;
    std::uint64_t subscriber = 0;
    std::uint64_t bytes = 0;
};

struct Ledger
{
    std::uint64_t initial_balance = 0;
    std::uint64_t ocs_granted = 0;
    std::uint64_t cp_granted = 0;
    std::uint64_t inb_granted = 0;
    std::uint64_t delivered = 0;
};

/// OCS, CPs and iNBs as simulation nodes exchanging credit messages.
class ChargingNetwork
{
  public:
    ChargingNetwork(sim::Simulator& sim, ChargingConfig config);

    const ChargingConfig& config() const { return config_; }
    std::size_t inb_count() const { return inbs_.size(); }

    void open_account(std::uint64_t subscriber, std::uint64_t balance);
    /// Counts bytes through the iNB's quota for the subscriber. Returns the bytes allowed now.
    std::uint64_t consume(std::size_t inb, std::uint64_t subscriber, std::uint64_t bytes);
    /// Moves the subscriber's unused quota from one iNB to another (context transfer on handover).
    void move(std::uint64_t subscriber, std::size_t from, std::size_t to);
    void restart_cp(std::size_t cp);

    const InbQuota* quota(std::size_t inb, std::uint64_t subscriber) const;
    bool cut_off(std::uint64_t subscriber) const;
    const Ocs& ocs() const { return ocs_; }
    const ChargingProxy& cp(std::size_t i) const { return cps_[i]; }
    std::size_t cp_of(std::size_t inb) const { return inb / config_.inbs_per_cp; }
    Ledger ledger() const;

    const std::vector<ChargingEvent>& events() const { return events_; }
    /// Rows of `time_us,actor,event,subscriber,bytes`.
    std::string events_csv() const;

  private:
    struct Credit
    {
        enum class Kind
        {
            CreditRequest,
            CreditGrant,
            OcsRequest,
            OcsGrant,
        } kind;
        std::size_t inb;
        std::uint64_t subscriber;
        std::uint64_t bytes;
    };

    void log(std::string actor, std::string event, std::uint64_t subscriber, std::uint64_t bytes);
    void request_refill(std::size_t inb, std::uint64_t subscriber);
    void on_cp(std::size_t cp, const Credit& c);
    void on_inb(std::size_t inb, const Credit& c);

    struct PendingCredit
    {
        std::size_t inb;
        std::uint64_t amount;
    };

    sim::Simulator& sim_;
    ChargingConfig config_;
    Ocs ocs_;
    std::vector<ChargingProxy> cps_;
    sim::NodeId ocs_node_;
    std::vector<sim::NodeId> cp_nodes_;
    std::vector<sim::NodeId> inb_nodes_;
    std::vector<std::map<std::uint64_t, InbQuota>> inbs_;
    std::vector<std::map<std::uint64_t, std::vector<PendingCredit>>> cp_pending_;
    std::map<std::uint64_t, std::uint64_t> initial_;
    std::uint64_t inb_granted_ = 0;
    std::uint64_t delivered_ = 0;
    std::vector<ChargingEvent> events_;
};

}  // namespace encor::charging
