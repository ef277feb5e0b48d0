#include "encor/security.hpp"

#include <sodium.h>

#include <algorithm>
#include <mutex>
#include <stdexcept>

namespace encor::security
{

namespace
{

void ensure_sodium()
{
    static std::once_flag once;
    std::call_once(once, [] {
        if (sodium_init() < 0)
            throw std::runtime_error("libsodium initialisation failed");
    });
}

}  // namespace

PrfPart::PrfPart(std::string_view label) : tag_('L')
{
    if (label.size() > data_.size())
        throw std::length_error("PRF label too long");
    std::copy(label.begin(), label.end(), data_.begin());
    size_ = label.size();
}

PrfPart::PrfPart(std::span<const std::uint8_t> bytes) : tag_('B')
{
    if (bytes.size() > data_.size())
        throw std::length_error("PRF byte input too long");
    std::copy(bytes.begin(), bytes.end(), data_.begin());
    size_ = bytes.size();
}

PrfPart::PrfPart(std::uint64_t value) : tag_('U')
{
    for (int i = 0; i < 8; ++i)
        data_[i] = static_cast<std::uint8_t>(value >> (56 - 8 * i));
    size_ = 8;
}

Digest prf(std::span<const std::uint8_t> key, std::initializer_list<PrfPart> parts)
{
    ensure_sodium();
    crypto_auth_hmacsha256_state st;
    crypto_auth_hmacsha256_init(&st, key.data(), key.size());
    for (const auto& part : parts)
    {
        const std::uint8_t header[3] = {static_cast<std::uint8_t>(part.tag()),
                                        static_cast<std::uint8_t>(part.bytes().size() >> 8),
                                        static_cast<std::uint8_t>(part.bytes().size())};
        crypto_auth_hmacsha256_update(&st, header, sizeof header);
        crypto_auth_hmacsha256_update(&st, part.bytes().data(), part.bytes().size());
    }
    Digest out{};
    crypto_auth_hmacsha256_final(&st, out.data());
    return out;
}

AuthVector generate_auth_vector(SubscriberRecord& rec, const Nonce& rand)
{
    rec.sqn += 1;
    AuthVector v;
    v.rand = rand;
    v.xres = prf(rec.k, {rand, "res"});
    v.autn.sqn = rec.sqn;
    v.autn.mac = prf(rec.k, {rand, rec.sqn, "mac"});
    v.k_asme = prf(rec.k, {rand, rec.sqn, "asme"});
    return v;
}

const char* to_string(AuthFailure f)
{
    switch (f)
    {
    case AuthFailure::NetworkAuthFailure:
        return "network-auth-failure";
    case AuthFailure::Replay:
        return "replay";
    case AuthFailure::SqnOutOfWindow:
        return "sqn-out-of-window";
    }
    return "unknown";
}

std::variant<AuthResponse, AuthFailure> ue_process_challenge(const Key128& k, UeSqnState& sqn,
                                                             const Nonce& rand, const Autn& autn)
{
    const auto expected = prf(k, {rand, autn.sqn, "mac"});
    if (sodium_memcmp(expected.data(), autn.mac.data(), expected.size()) != 0)
        return AuthFailure::NetworkAuthFailure;
    if (autn.sqn <= sqn.last_accepted)
        return AuthFailure::Replay;
    if (autn.sqn != sqn.last_accepted + 1)
        return AuthFailure::SqnOutOfWindow;
    sqn.last_accepted = autn.sqn;
    return AuthResponse{prf(k, {rand, "res"}), prf(k, {rand, autn.sqn, "asme"})};
}

SessionKeys derive_k_enb(const Digest& k_asme, std::uint32_t initial_counter)
{
    return SessionKeys{prf(k_asme, {"kenb", std::uint64_t{initial_counter}}), 0};
}

SessionKeys chain_k_enb(const SessionKeys& keys)
{
    const std::uint32_t next = keys.ncc + 1;
    return SessionKeys{prf(keys.k_enb, {"nh", std::uint64_t{next}}), next};
}

}  // namespace encor::security
