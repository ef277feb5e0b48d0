#include "encor/addressing.hpp"

#include <algorithm>
#include <cstdio>
#include <stdexcept>

namespace encor::addr
{

std::string Addr128::to_string() const
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%04x:%04x:%04x:%04x:%04x:%04x:%04x:%04x",
                  static_cast<unsigned>(locator >> 48) & 0xffff,
                  static_cast<unsigned>(locator >> 32) & 0xffff,
                  static_cast<unsigned>(locator >> 16) & 0xffff,
                  static_cast<unsigned>(locator) & 0xffff,
                  static_cast<unsigned>(identifier >> 48) & 0xffff,
                  static_cast<unsigned>(identifier >> 32) & 0xffff,
                  static_cast<unsigned>(identifier >> 16) & 0xffff,
                  static_cast<unsigned>(identifier) & 0xffff);
    return buf;
}

Addr128 Addr128::parse(const std::string& text)
{
    std::uint64_t halves[2] = {0, 0};
    int digits = 0;
    for (char c : text)
    {
        if (c == ':')
            continue;
        int v;
        if (c >= '0' && c <= '9')
            v = c - '0';
        else if (c >= 'a' && c <= 'f')
            v = c - 'a' + 10;
        else
            throw std::invalid_argument("bad hex digit in address: " + text);
        if (digits >= 32)
            throw std::invalid_argument("address too long: " + text);
        auto& half = halves[digits / 16];
        half = (half << 4) | static_cast<std::uint64_t>(v);
        ++digits;
    }
    if (digits != 32)
        throw std::invalid_argument("address must have 32 hex digits: " + text);
    return Addr128{halves[0], halves[1]};
}

UePrivateAddr assign_private_addr(std::uint64_t subscriber_id)
{
    if (subscriber_id == 0)
        throw std::invalid_argument("subscriber id must be nonzero");
    return UePrivateAddr{subscriber_id};
}

Addr128 nat_uplink(const Addr128& source, InbPrefix inb, NatCounters* counters)
{
    if (!is_private(source))
    {
        if (counters)
            ++counters->passthrough_warnings;
        return source;
    }
    return Addr128{inb.locator, source.identifier};
}

void RecentlyMovedTable::record_move(std::uint64_t identifier, InbPrefix target, sim::SimTime now,
                                     std::optional<sim::SimTime> ttl)
{
    if (capacity_ != 0 && !entries_.contains(identifier) && entries_.size() >= capacity_)
    {
        evict_expired(now);
        if (entries_.size() >= capacity_)
        {
            // Evict the entry closest to expiry.
            auto victim = std::min_element(entries_.begin(), entries_.end(),
                                           [](const auto& a, const auto& b) {
                                               if (a.second.expiry != b.second.expiry)
                                                   return a.second.expiry < b.second.expiry;
                                               return a.first < b.first;
                                           });
            entries_.erase(victim);
        }
    }
    entries_[identifier] = Entry{target, now + ttl.value_or(ttl_)};
}

std::optional<InbPrefix> RecentlyMovedTable::lookup(std::uint64_t identifier, sim::SimTime now) const
{
    auto it = entries_.find(identifier);
    if (it == entries_.end() || now >= it->second.expiry)
        return std::nullopt;
    return it->second.target;
}

std::size_t RecentlyMovedTable::evict_expired(sim::SimTime now)
{
    return std::erase_if(entries_, [now](const auto& kv) { return now >= kv.second.expiry; });
}

DownlinkDecision nat_downlink(const Addr128& dest,
                              const std::unordered_set<std::uint64_t>& attached_ids,
                              const RecentlyMovedTable& moved, sim::SimTime now,
                              NatCounters* counters)
{
    if (attached_ids.contains(dest.identifier))
    {
        if (counters)
            ++counters->delivered;
        return DeliverLocal{Addr128{kPrivateLocator, dest.identifier}};
    }
    if (auto target = moved.lookup(dest.identifier, now))
    {
        if (counters)
            ++counters->forwarded;
        return ForwardTo{Addr128{target->locator, dest.identifier}};
    }
    if (counters)
        ++counters->downlink_drops;
    return Drop{};
}

}  // namespace encor::addr
