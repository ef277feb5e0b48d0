#pragma once

// Identifier/locator stateless NAT and the short-lived "recently moved"
// forwarding table kept by a source iNB after handover.

#include "encor/sim_kernel.hpp"

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <variant>

namespace encor::addr
{

/// 128-bit address: upper 64 bits locate, lower 64 bits identify.
struct Addr128
{
    std::uint64_t locator = 0;
    std::uint64_t identifier = 0;

    friend auto operator<=>(const Addr128&, const Addr128&) = default;

    /// 32 lowercase hex digits, colon-grouped every 4.
    std::string to_string() const;
    static Addr128 parse(const std::string& text);
};

/// fc00::/7 in the top seven bits, every other locator bit zero.
inline constexpr std::uint64_t kPrivateLocator = 0xfc00'0000'0000'0000ULL;
inline constexpr std::uint64_t kPrivateMask = 0xfe00'0000'0000'0000ULL;

constexpr bool is_private(const Addr128& a)
{
    return (a.locator & kPrivateMask) == kPrivateLocator;
}

/// An Addr128 known to carry the private locator.
class UePrivateAddr
{
  public:
    explicit UePrivateAddr(std::uint64_t identifier) : addr_{kPrivateLocator, identifier} {}

    const Addr128& addr() const { return addr_; }
    std::uint64_t identifier() const { return addr_.identifier; }
    friend bool operator==(const UePrivateAddr&, const UePrivateAddr&) = default;

  private:
    Addr128 addr_;
};

/// Publicly routable /64 owned by one iNB.
struct InbPrefix
{
    std::uint64_t locator = 0;
    friend auto operator<=>(const InbPrefix&, const InbPrefix&) = default;
};

/// Identifier is the subscriber id itself, so no allocation state is needed.
UePrivateAddr assign_private_addr(std::uint64_t subscriber_id);

/// Counts uplink packets whose source was not private and were passed through unchanged.
struct NatCounters
{
    std::uint64_t passthrough_warnings = 0;
    std::uint64_t downlink_drops = 0;
    std::uint64_t forwarded = 0;
    std::uint64_t delivered = 0;
};

Addr128 nat_uplink(const Addr128& source, InbPrefix inb, NatCounters* counters = nullptr);

class RecentlyMovedTable
{
  public:
    static constexpr sim::SimTime kDefaultTtl = sim::SimTime{2'000'000};

    explicit RecentlyMovedTable(sim::SimTime ttl = kDefaultTtl, std::size_t capacity = 0)
        : ttl_(ttl), capacity_(capacity)
    {
    }

    sim::SimTime ttl() const { return ttl_; }

    /// Inserts or overwrites; expiry = now + ttl (or the table default).
    void record_move(std::uint64_t identifier, InbPrefix target, sim::SimTime now,
                     std::optional<sim::SimTime> ttl = std::nullopt);
    /// Live entry for `identifier`, if any. An entry expires at exactly now == expiry.
    std::optional<InbPrefix> lookup(std::uint64_t identifier, sim::SimTime now) const;
    /// Drops expired entries; returns how many were removed.
    std::size_t evict_expired(sim::SimTime now);
    std::size_t size() const { return entries_.size(); }

  private:
    struct Entry
    {
        InbPrefix target;
        sim::SimTime expiry;
    };
    sim::SimTime ttl_;
    std::size_t capacity_;  // 0 = unbounded
    std::unordered_map<std::uint64_t, Entry> entries_;
};

struct DeliverLocal
{
    Addr128 dest;
};
struct ForwardTo
{
    Addr128 dest;
};
struct Drop
{
};
using DownlinkDecision = std::variant<DeliverLocal, ForwardTo, Drop>;

DownlinkDecision nat_downlink(const Addr128& dest,
                              const std::unordered_set<std::uint64_t>& attached_ids,
                              const RecentlyMovedTable& moved, sim::SimTime now,
                              NatCounters* counters = nullptr);

}  // namespace encor::addr
