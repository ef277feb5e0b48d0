#pragma once

// Abstracted AKA: the 3GPP message semantics (RAND/AUTN/RES, SQN replay
// window, K_ASME -> K_eNB -> NCC chaining) over a keyed hash instead of
// MILENAGE.

#include <array>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string_view>
#include <variant>

namespace encor::security
{

using Key128 = std::array<std::uint8_t, 16>;
using Nonce = std::array<std::uint8_t, 16>;
using Digest = std::array<std::uint8_t, 32>;

/// One PRF input; labels and integers are length-prefixed so inputs never alias.
class PrfPart
{
  public:
    PrfPart(std::string_view label);
    PrfPart(const char* label) : PrfPart(std::string_view{label}) {}
    PrfPart(std::span<const std::uint8_t> bytes);
    PrfPart(const Nonce& n) : PrfPart(std::span<const std::uint8_t>(n)) {}
    PrfPart(const Digest& d) : PrfPart(std::span<const std::uint8_t>(d)) {}
    PrfPart(std::uint64_t value);

    std::span<const std::uint8_t> bytes() const { return {data_.data(), size_}; }
    char tag() const { return tag_; }

  private:
    char tag_;
    std::array<std::uint8_t, 64> data_{};
    std::size_t size_ = 0;
};

/// HMAC-SHA256(key, encode(parts...)).
Digest prf(std::span<const std::uint8_t> key, std::initializer_list<PrfPart> parts);

struct VolumeQuota
{
    std::uint64_t bytes;
};
struct ThroughputCap
{
    double bits_per_second;
};
struct Unlimited
{
};
using QuotaPolicy = std::variant<VolumeQuota, ThroughputCap, Unlimited>;

struct SubscriberRecord
{
    std::uint64_t imsi = 0;
    Key128 k{};
    /// Last sequence number issued by the network.
    std::uint64_t sqn = 0;
    int qci = 9;
    QuotaPolicy quota_policy = Unlimited{};
};

struct Autn
{
    std::uint64_t sqn = 0;
    Digest mac{};
    friend bool operator==(const Autn&, const Autn&) = default;
};

struct AuthVector
{
    Nonce rand{};
    Digest xres{};
    Autn autn;
    Digest k_asme{};
    friend bool operator==(const AuthVector&, const AuthVector&) = default;
};

/// Issues the next vector and advances rec.sqn by one.
AuthVector generate_auth_vector(SubscriberRecord& rec, const Nonce& rand);

/// UE-side replay state: the last SQN the UE accepted.
struct UeSqnState
{
    std::uint64_t last_accepted = 0;
};

enum class AuthFailure
{
    NetworkAuthFailure,  // MAC mismatch
    Replay,              // SQN at or below the last accepted value
    SqnOutOfWindow,      // SQN skipped ahead of last + 1
};

const char* to_string(AuthFailure f);

struct AuthResponse
{
    Digest res{};
    Digest k_asme{};
};

/// Verifies AUTN and, on success, advances `sqn` and returns RES plus the UE's copy of K_ASME.
std::variant<AuthResponse, AuthFailure> ue_process_challenge(const Key128& k, UeSqnState& sqn,
                                                             const Nonce& rand, const Autn& autn);

/// Per-iNB radio key and its chaining counter. Holds no earlier key.
struct SessionKeys
{
    Digest k_enb{};
    std::uint32_t ncc = 0;
    friend bool operator==(const SessionKeys&, const SessionKeys&) = default;
};

SessionKeys derive_k_enb(const Digest& k_asme, std::uint32_t initial_counter = 0);

/// One forward step: K_eNB' = PRF(K_eNB, NCC + 1).
SessionKeys chain_k_enb(const SessionKeys& keys);

}  // namespace encor::security
