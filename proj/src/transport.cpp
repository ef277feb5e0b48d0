#include "encor/transport.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <stdexcept>
#include <unordered_set>

namespace encor::transport
{

using addr::Addr128;
using sim::SimTime;

void client_migrate(MobiConn& conn, const Addr128& new_addr)
{
    conn.client_addr = new_addr;
}

bool server_on_packet(MobiConn& conn, std::uint64_t conn_id, const Addr128& from)
{
    if (conn_id != conn.id || from == conn.server_path)
        return false;
    conn.server_path = from;
    ++conn.path_updates;
    return true;
}

const char* to_string(PolicyMode mode)
{
    return mode == PolicyMode::PingOnIdle ? "ping_on_idle" : "passive_only";
}

std::vector<AbrLevel> default_ladder()
{
    return {{1, 1.0}, {2, 2.5}, {3, 5.0}, {4, 8.0}, {5, 12.0}};
}

int abr_select(const std::vector<double>& thresholds, double buffer_s)
{
    int level = 1;
    for (double t : thresholds)
    {
        if (buffer_s >= t)
            ++level;
    }
    return level;
}

const AbrLevel& AbrState::select() const
{
    if (ladder.empty())
        throw std::invalid_argument("empty bitrate ladder");
    auto idx = static_cast<std::size_t>(abr_select(thresholds, buffer_s) - 1);
    return ladder[std::min(idx, ladder.size() - 1)];
}

std::string AppMetrics::csv_header()
{
    return "app,policy,handovers,throughput_mbps,retx_rate,stall_s,buffer_s,quality,fps,deadlocked";
}

std::string AppMetrics::csv_row() const
{
    char buf[256];
    std::snprintf(buf, sizeof buf, "%s,%s,%u,%.3f,%.6f,%.3f,%.3f,%.3f,%.3f,%d", app.c_str(),
                  policy.c_str(), handovers, throughput_mbps, retx_rate, stall_s, buffer_s, quality,
                  fps, deadlocked ? 1 : 0);
    return buf;
}

namespace
{

constexpr std::uint64_t kConnId = 0x5eed'c0de;
constexpr std::uint64_t kUeId = 0x1001;
constexpr std::uint32_t kControlBytes = 60;

struct Packet
{
    enum class Kind : std::uint8_t
    {
        Data,
        Ack,
        Ping,
        Request,
        PathChallenge,
        PathResponse,
    };
    Kind kind = Kind::Data;
    std::uint64_t pn = 0;
    std::uint64_t conn = kConnId;
    Addr128 src;
    Addr128 dst;
    std::uint64_t offset = 0;
    std::uint32_t len = 0;
    bool challenge = false;
    bool response = false;
    std::uint64_t request = 0;
    std::vector<std::uint64_t> acked;
};

struct Cell
{
    addr::InbPrefix prefix;
    std::unordered_set<std::uint64_t> attached;
    addr::RecentlyMovedTable moved;
    SimTime busy_until{};
    addr::NatCounters nat;
};

/// Two cells, one UE, one server, one connection.
class Harness
{
  public:
    using DeliverFn = std::function<void(std::uint64_t contiguous)>;
    using RequestFn = std::function<void(std::uint64_t start, std::uint64_t bytes)>;
    using DataSentFn = std::function<void(std::uint64_t offset, bool retx)>;
    using SegmentFn = std::function<void(std::uint64_t offset, std::uint32_t len)>;

    Harness(const TransportConfig& cfg, std::uint64_t seed) : cfg_(cfg), sim_(seed)
    {
        for (std::uint64_t i = 0; i < 2; ++i)
        {
            Cell c;
            c.prefix = addr::InbPrefix{0x2001'0db8'0000'0001ULL + i};
            c.moved = addr::RecentlyMovedTable(cfg.path.moved_ttl);
            cells_.push_back(std::move(c));
        }
        cells_[0].attached.insert(kUeId);
        serving_ = 0;
        ue_cell_ = 0;
        conn_.id = kConnId;
        conn_.client_addr = public_addr(0);
        conn_.server_path = conn_.client_addr;
        mss_ = cfg.path.packet_bytes;
        cwnd_ = static_cast<double>(cfg.initial_cwnd_packets) * mss_;
        double base_rtt_s =
            2.0 * sim::to_seconds(cfg.path.internet_latency + cfg.path.radio_latency);
        cwnd_cap_ = std::max(cfg.cwnd_cap_bdp * cfg.path.bottleneck_mbps * 1e6 / 8.0 * base_rtt_s,
                             static_cast<double>(cfg.initial_cwnd_packets) * mss_);
        ssthresh_ = cwnd_cap_;
    }

    sim::Simulator& sim() { return sim_; }
    SimTime now() const { return sim_.now(); }

    DeliverFn on_deliver;
    RequestFn on_request;
    DataSentFn on_data_sent;
    /// Every data packet the client receives, duplicates included.
    SegmentFn on_segment;
    /// Any packet reaching the client.
    std::function<void()> on_rx;

    void client_request(std::uint64_t bytes)
    {
        auto idx = alloc(Packet::Kind::Request);
        pool_[idx].request = bytes;
        ue_uplink(idx);
    }

    void client_ping()
    {
        ++pings_;
        ue_uplink(alloc(Packet::Kind::Ping));
    }

    void server_push(std::uint64_t bytes)
    {
        stream_end_ += bytes;
        try_send();
    }

    std::uint64_t stream_end() const { return stream_end_; }

    /// Source stops serving now; the UE hears the command one radio hop later.
    void handover()
    {
        if (serving_ < 0)
        {
            sim_.schedule_in(sim::from_ms(50), [this] { handover(); });
            return;
        }
        int src = serving_;
        int tgt = 1 - src;
        cells_[src].attached.erase(kUeId);
        serving_ = -1;
        ++handovers_;
        const auto& p = cfg_.path;
        sim_.schedule_in(p.radio_latency, [this] { ue_cell_ = -1; });
        sim_.schedule_in(p.radio_latency + p.radio_sync, [this, src, tgt] {
            const auto& p = cfg_.path;
            // HoConfirm is queued ahead of any uplink the UE now releases.
            sim_.schedule_in(p.radio_latency, [this, src, tgt] {
                cells_[tgt].attached.insert(kUeId);
                serving_ = tgt;
                if (cfg_.path.forwarding_enabled)
                {
                    sim_.schedule_in(cfg_.path.notify_latency, [this, src, tgt] {
                        cells_[src].moved.record_move(kUeId, cells_[tgt].prefix, now());
                    });
                }
            });
            ue_cell_ = tgt;
            client_migrate(conn_, public_addr(tgt));
            if (pending_uplink_.empty() && !ack_timer_armed_)
                ++idle_migrations_;
            awaiting_resume_ = true;
            resume_from_ = last_rx_;
            std::deque<std::uint32_t> held;
            held.swap(pending_uplink_);
            for (auto idx : held)
                ue_uplink(idx);
        });
    }

    void fill(AppMetrics& m) const
    {
        m.handovers = handovers_;
        m.data_packets = data_packets_;
        m.retransmissions = retransmissions_;
        m.retx_rate = data_packets_ ? static_cast<double>(retransmissions_) / data_packets_ : 0.0;
        m.pings = pings_;
        m.path_validation_packets = validation_packets_;
        m.downlink_drops = drops_;
        m.forwarded = forwarded_;
        m.path_updates = conn_.path_updates;
        m.idle_migrations = idle_migrations_;
        m.max_resume_gap = max_resume_gap_;
    }

  private:
    struct Sent
    {
        SimTime at;
        std::uint64_t offset;
        std::uint32_t len;
        bool acked = false;
        bool lost = false;
    };

    Addr128 public_addr(int cell) const { return Addr128{cells_[cell].prefix.locator, kUeId}; }

    std::uint32_t alloc(Packet::Kind kind)
    {
        std::uint32_t idx;
        if (free_.empty())
        {
            idx = static_cast<std::uint32_t>(pool_.size());
            pool_.emplace_back();
        }
        else
        {
            idx = free_.back();
            free_.pop_back();
            pool_[idx] = Packet{};
        }
        pool_[idx].kind = kind;
        return idx;
    }

    void release(std::uint32_t idx)
    {
        pool_[idx].acked.clear();
        free_.push_back(idx);
    }

    // ---- uplink ----

    void ue_uplink(std::uint32_t idx)
    {
        if (ue_cell_ < 0)
        {
            pending_uplink_.push_back(idx);
            return;
        }
        pool_[idx].src = addr::assign_private_addr(kUeId).addr();
        int c = ue_cell_;
        sim_.schedule_in(cfg_.path.radio_latency, [this, c, idx] { cell_uplink(c, idx); });
    }

    void cell_uplink(int c, std::uint32_t idx)
    {
        auto& cell = cells_[c];
        if (!cell.attached.contains(kUeId))
        {
            // Not acknowledged at the link layer; the UE re-sends on whatever cell it has next.
            ue_uplink(idx);
            return;
        }
        pool_[idx].src = addr::nat_uplink(pool_[idx].src, cell.prefix, &cell.nat);
        sim_.schedule_in(cfg_.path.internet_latency, [this, idx] { server_receive(idx); });
    }

    // ---- downlink ----

    void server_transmit(std::uint32_t idx)
    {
        auto& p = pool_[idx];
        p.src = Addr128{0x2001'0db8'5e5e'0000ULL, 1};
        p.dst = conn_.server_path;
        int c = cell_of(p.dst.locator);
        if (c < 0)
        {
            ++drops_;
            release(idx);
            return;
        }
        sim_.schedule_in(cfg_.path.internet_latency, [this, c, idx] { cell_downlink(c, idx); });
    }

    int cell_of(std::uint64_t locator) const
    {
        for (std::size_t i = 0; i < cells_.size(); ++i)
        {
            if (cells_[i].prefix.locator == locator)
                return static_cast<int>(i);
        }
        return -1;
    }

    void cell_downlink(int c, std::uint32_t idx)
    {
        auto& cell = cells_[c];
        auto decision = addr::nat_downlink(pool_[idx].dst, cell.attached, cell.moved, now(), &cell.nat);
        if (auto* local = std::get_if<addr::DeliverLocal>(&decision))
        {
            pool_[idx].dst = local->dest;
            std::uint32_t bytes = pool_[idx].kind == Packet::Kind::Data ? mss_ : kControlBytes;
            auto ser = SimTime{std::max<std::uint64_t>(
                1, static_cast<std::uint64_t>(std::llround(bytes * 8.0 / cfg_.path.bottleneck_mbps)))};
            SimTime start = std::max(now(), cell.busy_until);
            cell.busy_until = start + ser;
            sim_.schedule(cell.busy_until + cfg_.path.radio_latency,
                          [this, c, idx] { ue_receive(c, idx); });
        }
        else if (auto* fwd = std::get_if<addr::ForwardTo>(&decision))
        {
            pool_[idx].dst = fwd->dest;
            int t = cell_of(fwd->dest.locator);
            ++forwarded_;
            sim_.schedule_in(cfg_.path.inter_inb_latency, [this, t, idx] { cell_downlink(t, idx); });
        }
        else
        {
            ++drops_;
            release(idx);
        }
    }

    // ---- client ----

    void ue_receive(int c, std::uint32_t idx)
    {
        if (ue_cell_ != c)
        {
            ++drops_;
            release(idx);
            return;
        }
        if (awaiting_resume_)
        {
            awaiting_resume_ = false;
            max_resume_gap_ = std::max(max_resume_gap_, now() - resume_from_);
        }
        last_rx_ = now();
        if (on_rx)
            on_rx();
        const Packet& p = pool_[idx];
        bool respond = false;
        if (p.kind == Packet::Kind::Data)
        {
            ack_pns_.push_back(p.pn);
            ++unacked_eliciting_;
            respond = p.challenge;
            if (on_segment)
                on_segment(p.offset, p.len);
            reassemble(p.offset, p.len);
        }
        else if (p.kind == Packet::Kind::PathChallenge)
        {
            respond = true;
        }
        release(idx);

        if (unacked_eliciting_ >= cfg_.ack_every)
        {
            send_ack(respond);
        }
        else
        {
            if (respond)
            {
                ++validation_packets_;
                ue_uplink(alloc(Packet::Kind::PathResponse));
            }
            if (unacked_eliciting_ > 0 && !ack_timer_armed_)
            {
                ack_timer_armed_ = true;
                auto gen = ++ack_gen_;
                sim_.schedule_in(cfg_.max_ack_delay, [this, gen] {
                    if (gen == ack_gen_ && !ack_pns_.empty())
                        send_ack(false);
                });
            }
        }
    }

    void send_ack(bool with_response)
    {
        auto idx = alloc(Packet::Kind::Ack);
        pool_[idx].acked.swap(ack_pns_);
        pool_[idx].response = with_response;
        unacked_eliciting_ = 0;
        ack_timer_armed_ = false;
        ++ack_gen_;
        ue_uplink(idx);
    }

    void reassemble(std::uint64_t offset, std::uint32_t len)
    {
        std::uint64_t end = offset + len;
        if (end <= contiguous_)
            return;
        auto& slot = ooo_[offset];
        slot = std::max(slot, end);
        std::uint64_t before = contiguous_;
        while (!ooo_.empty() && ooo_.begin()->first <= contiguous_)
        {
            contiguous_ = std::max(contiguous_, ooo_.begin()->second);
            ooo_.erase(ooo_.begin());
        }
        if (contiguous_ > before && on_deliver)
            on_deliver(contiguous_);
    }

    // ---- server ----

    void server_receive(std::uint32_t idx)
    {
        Packet& p = pool_[idx];
        if (server_on_packet(conn_, p.conn, p.src))
            pending_challenge_ = true;
        switch (p.kind)
        {
        case Packet::Kind::Ack:
            on_ack(p.acked);
            break;
        case Packet::Kind::Request: {
            std::uint64_t start = stream_end_;
            stream_end_ += p.request;
            if (on_request)
                on_request(start, p.request);
            break;
        }
        default:
            break;
        }
        release(idx);
        try_send();
    }

    SimTime rto() const
    {
        SimTime base = have_rtt_ ? std::max(SimTime{2 * srtt_.count()}, sim::from_ms(1)) : cfg_.initial_rto;
        return SimTime{base.count() << std::min(backoff_, 16)};
    }

    void on_ack(const std::vector<std::uint64_t>& pns)
    {
        bool newly = false;
        std::optional<SimTime> sample;
        for (auto pn : pns)
        {
            Sent& s = sent_[pn];
            if (s.acked)
                continue;
            s.acked = true;
            newly = true;
            if (!s.lost)
            {
                in_flight_ -= mss_;
                if (s.at > recovery_start_)
                {
                    if (cwnd_ < ssthresh_)
                        cwnd_ += mss_;
                    else
                        cwnd_ += static_cast<double>(mss_) * mss_ / cwnd_;
                    cwnd_ = std::min(cwnd_, cwnd_cap_);
                }
            }
            if (!have_largest_ || pn > largest_acked_)
            {
                have_largest_ = true;
                largest_acked_ = pn;
                sample = now() - s.at;
            }
        }
        if (sample)
        {
            latest_rtt_ = *sample;
            srtt_ = have_rtt_ ? SimTime{(7 * srtt_.count() + sample->count()) / 8} : *sample;
            have_rtt_ = true;
        }
        if (newly)
            backoff_ = 0;
        detect_losses();
    }

    void detect_losses()
    {
        if (!have_largest_)
            return;
        auto loss_delay = SimTime{std::max(srtt_, latest_rtt_).count() * 9 / 8};
        advance_first_unacked();
        for (std::uint64_t pn = first_unacked_; pn < largest_acked_; ++pn)
        {
            Sent& s = sent_[pn];
            if (s.acked || s.lost)
                continue;
            if (pn + cfg_.packet_threshold <= largest_acked_ || s.at + loss_delay <= now())
                declare_lost(pn);
        }
    }

    void declare_lost(std::uint64_t pn)
    {
        Sent& s = sent_[pn];
        s.lost = true;
        in_flight_ -= mss_;
        retx_.push_back(pn);
        if (s.at > recovery_start_)
        {
            recovery_start_ = now();
            ssthresh_ = std::max(cwnd_ / 2.0, static_cast<double>(cfg_.min_cwnd_packets) * mss_);
            cwnd_ = ssthresh_;
        }
    }

    void advance_first_unacked()
    {
        while (first_unacked_ < sent_.size() &&
               (sent_[first_unacked_].acked || sent_[first_unacked_].lost))
            ++first_unacked_;
    }

    void try_send()
    {
        if (in_flight_ == 0 && data_packets_ > 0 && now() - last_send_ > rto())
            cwnd_ = std::min(cwnd_, static_cast<double>(cfg_.initial_cwnd_packets) * mss_);
        while (in_flight_ + mss_ <= cwnd_)
        {
            std::uint64_t offset = 0;
            std::uint32_t len = 0;
            bool is_retx = false;
            while (!retx_.empty() && sent_[retx_.front()].acked)
                retx_.pop_front();
            if (!retx_.empty())
            {
                const Sent& orig = sent_[retx_.front()];
                offset = orig.offset;
                len = orig.len;
                is_retx = true;
                retx_.pop_front();
            }
            else if (send_offset_ < stream_end_)
            {
                offset = send_offset_;
                len = static_cast<std::uint32_t>(std::min<std::uint64_t>(mss_, stream_end_ - send_offset_));
                send_offset_ += len;
            }
            else
            {
                break;
            }
            auto idx = alloc(Packet::Kind::Data);
            Packet& p = pool_[idx];
            p.pn = sent_.size();
            p.offset = offset;
            p.len = len;
            if (pending_challenge_)
            {
                p.challenge = true;
                pending_challenge_ = false;
            }
            sent_.push_back(Sent{now(), offset, len});
            in_flight_ += mss_;
            ++data_packets_;
            if (is_retx)
                ++retransmissions_;
            last_send_ = now();
            if (on_data_sent)
                on_data_sent(offset, is_retx);
            server_transmit(idx);
            arm_rto();
        }
        if (pending_challenge_)
        {
            pending_challenge_ = false;
            ++validation_packets_;
            server_transmit(alloc(Packet::Kind::PathChallenge));
        }
    }

    void arm_rto()
    {
        if (rto_armed_)
            return;
        advance_first_unacked();
        if (first_unacked_ >= sent_.size())
            return;
        rto_armed_ = true;
        sim_.schedule(sent_[first_unacked_].at + rto(), [this] { on_rto(); });
    }

    void on_rto()
    {
        rto_armed_ = false;
        advance_first_unacked();
        if (first_unacked_ >= sent_.size())
            return;
        SimTime deadline = sent_[first_unacked_].at + rto();
        if (deadline > now())
        {
            rto_armed_ = true;
            sim_.schedule(deadline, [this] { on_rto(); });
            return;
        }
        for (std::uint64_t pn = first_unacked_; pn < sent_.size(); ++pn)
        {
            Sent& s = sent_[pn];
            if (s.acked || s.lost)
                continue;
            s.lost = true;
            in_flight_ -= mss_;
            retx_.push_back(pn);
        }
        ssthresh_ = std::max(cwnd_ / 2.0, static_cast<double>(cfg_.min_cwnd_packets) * mss_);
        cwnd_ = static_cast<double>(cfg_.min_cwnd_packets) * mss_;
        recovery_start_ = now();
        ++backoff_;
        try_send();
        arm_rto();
    }

    TransportConfig cfg_;
    sim::Simulator sim_;
    std::vector<Cell> cells_;
    std::vector<Packet> pool_;
    std::vector<std::uint32_t> free_;
    MobiConn conn_;
    int serving_ = 0;
    int ue_cell_ = 0;
    std::deque<std::uint32_t> pending_uplink_;
    std::uint32_t mss_ = 1200;

    // client
    std::vector<std::uint64_t> ack_pns_;
    std::uint32_t unacked_eliciting_ = 0;
    bool ack_timer_armed_ = false;
    std::uint64_t ack_gen_ = 0;
    std::uint64_t contiguous_ = 0;
    std::map<std::uint64_t, std::uint64_t> ooo_;

    // server
    std::vector<Sent> sent_;
    std::deque<std::uint64_t> retx_;
    std::uint64_t first_unacked_ = 0;
    std::uint64_t largest_acked_ = 0;
    bool have_largest_ = false;
    std::uint64_t send_offset_ = 0;
    std::uint64_t stream_end_ = 0;
    std::uint64_t in_flight_ = 0;
    double cwnd_ = 0.0;
    double cwnd_cap_ = 0.0;
    double ssthresh_ = 0.0;
    SimTime srtt_{};
    SimTime latest_rtt_{};
    bool have_rtt_ = false;
    int backoff_ = 0;
    SimTime recovery_start_{};
    SimTime last_send_{};
    bool rto_armed_ = false;
    bool pending_challenge_ = false;

    std::uint32_t handovers_ = 0;
    std::uint64_t data_packets_ = 0;
    std::uint64_t retransmissions_ = 0;
    std::uint64_t pings_ = 0;
    std::uint64_t validation_packets_ = 0;
    std::uint64_t drops_ = 0;
    std::uint64_t forwarded_ = 0;
    std::uint32_t idle_migrations_ = 0;
    bool awaiting_resume_ = false;
    SimTime last_rx_{};
    SimTime resume_from_{};
    SimTime max_resume_gap_{};
};

}  // namespace

AppMetrics run_bulk(const TransportConfig& cfg, const BulkOptions& opt)
{
    Harness h(cfg, opt.seed);
    std::optional<SimTime> done_at;
    h.on_deliver = [&](std::uint64_t contiguous) {
        if (contiguous >= opt.file_bytes && !done_at)
            done_at = h.now();
    };
    for (auto t : opt.handovers)
        h.sim().schedule(t, [&h] { h.handover(); });
    h.client_request(opt.file_bytes);
    while (!done_at && h.now() <= opt.time_limit && h.sim().step())
    {
    }

    AppMetrics m;
    m.app = "bulk";
    m.policy = "passive_only";
    h.fill(m);
    if (done_at)
        m.throughput_mbps = static_cast<double>(opt.file_bytes) * 8.0 / sim::to_seconds(*done_at) / 1e6;
    return m;
}

AppMetrics run_buffered(const TransportConfig& cfg, const BufferedOptions& opt)
{
    if (opt.ladder.empty())
        throw std::invalid_argument("empty bitrate ladder");
    Harness h(cfg, opt.seed);
    std::mt19937_64 rng(opt.seed);
    std::uniform_real_distribution<double> jitter(-0.05, 0.05);

    struct Chunk
    {
        std::uint64_t end;
    };
    std::deque<Chunk> chunks;
    std::uint64_t requested = 0;
    double buffer = 0.0;
    SimTime last_update{};
    bool started = false;
    double stall = 0.0;
    double quality_sum = 0.0;
    std::uint64_t quality_n = 0;
    double buffer_sum = 0.0;
    std::uint64_t buffer_n = 0;
    std::uint64_t delivered = 0;

    auto advance = [&] {
        double dt = sim::to_seconds(h.now() - last_update);
        last_update = h.now();
        if (!started)
            return;
        double use = std::min(dt, buffer);
        buffer -= use;
        stall += dt - use;
    };

    std::function<void()> request_next = [&] {
        advance();
        int level = abr_select(opt.thresholds, buffer);
        const auto& rung = opt.ladder[std::min<std::size_t>(level - 1, opt.ladder.size() - 1)];
        auto bytes = static_cast<std::uint64_t>(rung.mbps * 1e6 / 8.0 * opt.chunk_s * (1.0 + jitter(rng)));
        requested += bytes;
        chunks.push_back(Chunk{requested});
        if (h.now() >= opt.warmup)
        {
            quality_sum += rung.level;
            ++quality_n;
        }
        h.client_request(bytes);
    };

    h.on_deliver = [&](std::uint64_t contiguous) {
        delivered = contiguous;
        bool completed = false;
        while (!chunks.empty() && chunks.front().end <= contiguous)
        {
            chunks.pop_front();
            advance();
            buffer += opt.chunk_s;
            started = true;
            completed = true;
        }
        if (!completed || !chunks.empty())
            return;
        double room = opt.max_buffer_s - opt.chunk_s;
        if (buffer <= room)
            request_next();
        else
            h.sim().schedule_in(sim::from_seconds(buffer - room), [&] { request_next(); });
    };

    std::deque<SimTime> align(opt.handovers.begin(), opt.handovers.end());
    std::sort(align.begin(), align.end());
    std::optional<std::uint64_t> watch;
    if (opt.align_to_chunk)
    {
        h.on_request = [&](std::uint64_t start, std::uint64_t) {
            if (!watch && !align.empty() && h.now() >= align.front())
            {
                watch = start;
                align.pop_front();
            }
        };
        h.on_data_sent = [&](std::uint64_t offset, bool retx) {
            if (watch && !retx && offset == *watch)
            {
                watch.reset();
                h.sim().schedule_in(opt.align_offset, [&h] { h.handover(); });
            }
        };
    }
    else
    {
        for (auto t : opt.handovers)
            h.sim().schedule(t, [&h] { h.handover(); });
    }

    std::function<void()> sample = [&] {
        advance();
        if (h.now() >= opt.warmup)
        {
            buffer_sum += buffer;
            ++buffer_n;
        }
        h.sim().schedule_in(sim::from_ms(100), sample);
    };
    h.sim().schedule_in(sim::from_ms(100), sample);

    request_next();
    h.sim().run_until(opt.duration);
    advance();

    AppMetrics m;
    m.app = "buffered";
    m.policy = "passive_only";
    h.fill(m);
    m.throughput_mbps = static_cast<double>(delivered) * 8.0 / sim::to_seconds(opt.duration) / 1e6;
    m.stall_s = stall;
    m.buffer_s = buffer_n ? buffer_sum / buffer_n : 0.0;
    m.quality = quality_n ? quality_sum / quality_n : 0.0;
    return m;
}

AppMetrics run_live(const TransportConfig& cfg, const LiveOptions& opt)
{
    Harness h(cfg, opt.seed);
    std::mt19937_64 rng(opt.seed);
    std::uniform_real_distribution<double> jitter(-0.1, 0.1);
    SimTime deadline = opt.policy.idle_deadline.count() ? opt.policy.idle_deadline
                                                         : SimTime{opt.frame_interval.count() * 3 / 2};

    // Frames are independent objects: one completes when all of its bytes are in,
    // whatever happened to earlier frames.
    struct Frame
    {
        std::uint64_t start;
        std::uint64_t bytes;
        std::uint64_t got = 0;
    };
    std::map<std::uint64_t, Frame> frames_by_end;
    std::unordered_set<std::uint64_t> seen;
    std::uint64_t frames = 0;
    std::optional<SimTime> last_frame;
    SimTime max_gap{};
    bool ping_outstanding = false;
    std::uint64_t idle_gen = 0;
    std::uint64_t delivered = 0;
    std::optional<SimTime> first_frame_sent;

    h.on_segment = [&](std::uint64_t offset, std::uint32_t len) {
        if (!seen.insert(offset).second)
            return;
        delivered += len;
        auto it = frames_by_end.upper_bound(offset);
        if (it == frames_by_end.end())
            return;
        it->second.got += len;
        if (it->second.got < it->second.bytes)
            return;
        frames_by_end.erase(it);
        ++frames;
        if (last_frame)
            max_gap = std::max(max_gap, h.now() - *last_frame);
        last_frame = h.now();
    };

    // Idle means nothing at all has arrived for a whole deadline; one ping per silent spell.
    h.on_rx = [&] {
        ping_outstanding = false;
        if (opt.policy.mode != PolicyMode::PingOnIdle)
            return;
        auto gen = ++idle_gen;
        h.sim().schedule_in(deadline, [&, gen] {
            if (gen != idle_gen || ping_outstanding)
                return;
            ping_outstanding = true;
            h.client_ping();
        });
    };

    std::function<void()> next_frame = [&] {
        auto bytes = static_cast<std::uint64_t>(static_cast<double>(opt.frame_bytes) * (1.0 + jitter(rng)));
        frames_by_end[h.stream_end() + bytes] = Frame{h.stream_end(), bytes};
        h.server_push(bytes);
        h.sim().schedule_in(opt.frame_interval, next_frame);
    };

    h.on_request = [&](std::uint64_t, std::uint64_t) {
        if (first_frame_sent)
            return;
        SimTime s0 = h.now();
        first_frame_sent = s0;
        h.sim().schedule(s0, next_frame);
        for (auto t : opt.handovers)
        {
            SimTime at = t;
            if (opt.align_idle)
            {
                std::uint64_t k = t > s0 ? (t - s0 + opt.frame_interval - SimTime{1}) / opt.frame_interval : 0;
                SimTime sk = s0 + k * opt.frame_interval;
                // After frame k's last (possibly delayed) ACK has cleared the source, before frame k+1 reaches it.
                SimTime quiet = sk + cfg.path.internet_latency + 2 * cfg.path.radio_latency +
                                cfg.max_ack_delay + sim::from_ms(1);
                SimTime next = sk + opt.frame_interval + cfg.path.internet_latency - sim::from_ms(1);
                at = std::min(quiet, next);
            }
            if (at < h.now())
                at = h.now();
            h.sim().schedule(at, [&h] { h.handover(); });
        }
    };

    h.client_request(0);
    h.sim().run_until(opt.duration);

    AppMetrics m;
    m.app = "live";
    m.policy = to_string(opt.policy.mode);
    h.fill(m);
    m.frames = frames;
    m.fps = static_cast<double>(frames) / sim::to_seconds(opt.duration);
    m.throughput_mbps = static_cast<double>(delivered) * 8.0 / sim::to_seconds(opt.duration) / 1e6;
    m.max_frame_gap = max_gap;
    m.deadlocked = !last_frame || opt.duration - *last_frame > opt.give_up;
    return m;
}

}  // namespace encor::transport
