#pragma once

// Identity and hashing primitives. Ed25519 and SHA-256 come from libsodium;
// everything on top (addresses, signature envelopes, Merkle trees) is defined
// here and in docs/wire-format.md.
//
// An address is the last 20 bytes of SHA-256(public key). Because the address
// does not allow key recovery, a signature travels as a 96-byte envelope:
// pubkey (32) followed by the detached Ed25519 signature (64). verify() checks
// that the envelope's key hashes to the claimed address before checking the
// signature itself, and returns false on any malformed input.

#include <sodium.h>

#include <array>
#include <compare>
#include <cstring>
#include <string>
#include <vector>

#include "permchain/codec.hpp"
#include "permchain/common.hpp"

namespace permchain {

inline void ensure_sodium() {
    static const int rc = sodium_init();
    if (rc < 0) throw Error(Errc::ConfigInvalid, "libsodium failed to initialize");
}

template <std::size_t N>
struct FixedBytes {
    std::array<std::uint8_t, N> b{};

    auto operator<=>(const FixedBytes&) const = default;

    bool is_zero() const {
        for (auto x : b)
            if (x != 0) return false;
        return true;
    }

    std::string hex() const { return to_hex(b.data(), N); }

    static FixedBytes from_hex(const std::string& s) {
        Bytes raw = permchain::from_hex(s);
        if (raw.size() != N) throw Error(Errc::ParseError, "expected " + std::to_string(N) + " bytes");
        FixedBytes out;
        std::memcpy(out.b.data(), raw.data(), N);
        return out;
    }
};

struct Digest32 : FixedBytes<32> {};
struct Address : FixedBytes<20> {};
struct PublicKey : FixedBytes<32> {};
struct SecretKey : FixedBytes<64> {};  // libsodium layout: seed ‖ pubkey
struct Seed32 : FixedBytes<32> {};

// pubkey ‖ detached signature
struct Signature : FixedBytes<96> {};

inline Digest32 sha256(const std::uint8_t* p, std::size_t n) {
    ensure_sodium();
    Digest32 d;
    crypto_hash_sha256(d.b.data(), p, n);
    return d;
}

inline Digest32 sha256(const Bytes& b) { return sha256(b.data(), b.size()); }

inline Digest32 sha256(const std::string& s) {
    return sha256(reinterpret_cast<const std::uint8_t*>(s.data()), s.size());
}

inline Address address_of(const PublicKey& pk) {
    Digest32 h = sha256(pk.b.data(), pk.b.size());
    Address a;
    std::memcpy(a.b.data(), h.b.data() + 12, 20);
    return a;
}

struct KeyPair {
    SecretKey sk;
    PublicKey pk;
    Address addr;
};

inline KeyPair keypair_from_seed(const Seed32& seed) {
    ensure_sodium();
    KeyPair kp;
    crypto_sign_seed_keypair(kp.pk.b.data(), kp.sk.b.data(), seed.b.data());
    kp.addr = address_of(kp.pk);
    return kp;
}

inline KeyPair random_keypair() {
    ensure_sodium();
    Seed32 seed;
    randombytes_buf(seed.b.data(), seed.b.size());
    return keypair_from_seed(seed);
}

inline Signature sign(const SecretKey& sk, const Bytes& msg) {
    ensure_sodium();
    Signature env;
    crypto_sign_ed25519_sk_to_pk(env.b.data(), sk.b.data());
    unsigned long long siglen = 0;
    crypto_sign_detached(env.b.data() + 32, &siglen, msg.data(), msg.size(), sk.b.data());
    return env;
}

inline bool verify(const Address& addr, const Bytes& msg, const Signature& env) {
    ensure_sodium();
    PublicKey pk;
    std::memcpy(pk.b.data(), env.b.data(), 32);
    if (address_of(pk) != addr) return false;
    return crypto_sign_verify_detached(env.b.data() + 32, msg.data(), msg.size(), pk.b.data()) == 0;
}

// Raw-byte variant: anything that is not exactly a 96-byte envelope verifies
// false rather than aborting.
inline bool verify(const Address& addr, const Bytes& msg, const Bytes& sig_bytes) {
    if (sig_bytes.size() != 96) return false;
    Signature env;
    std::memcpy(env.b.data(), sig_bytes.data(), 96);
    return verify(addr, msg, env);
}

// Merkle root over an ordered leaf list. Leaves are hashed with a 0x00 domain
// prefix, interior nodes with 0x01; an odd node at any level is paired with
// itself. The empty tree's root is SHA-256 of the empty string.
inline Digest32 merkle_root(const std::vector<Digest32>& leaves) {
    if (leaves.empty()) return sha256(nullptr, 0);
    std::vector<Digest32> level;
    level.reserve(leaves.size());
    for (const auto& l : leaves) {
        std::array<std::uint8_t, 33> buf;
        buf[0] = 0x00;
        std::memcpy(buf.data() + 1, l.b.data(), 32);
        level.push_back(sha256(buf.data(), buf.size()));
    }
    while (level.size() > 1) {
        std::vector<Digest32> next;
        next.reserve((level.size() + 1) / 2);
        for (std::size_t i = 0; i < level.size(); i += 2) {
            const Digest32& left = level[i];
            const Digest32& right = (i + 1 < level.size()) ? level[i + 1] : level[i];
            std::array<std::uint8_t, 65> buf;
            buf[0] = 0x01;
            std::memcpy(buf.data() + 1, left.b.data(), 32);
            std::memcpy(buf.data() + 33, right.b.data(), 32);
            next.push_back(sha256(buf.data(), buf.size()));
        }
        level = std::move(next);
    }
    return level[0];
}

}  // namespace permchain
