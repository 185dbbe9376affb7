#pragma once

// The on-chain access-control contract. State keys are namespaced by a one
// byte prefix:
//   'P' ‖ address            -> PartyRecord
//   'N' ‖ address            -> last committed nonce (u64)
//   'A' ‖ do ‖ sp ‖ tp       -> AccessRecord
//   'T' ‖ token              -> TokenRecord
//   'V' ‖ tx digest          -> ValidationReceipt
//
// Permission bits: CREATE=1, READ=2, UPDATE=4, DELETE=8. Role bits: DATA_OWNER=1,
// SERVICE_PROVIDER=2, THIRD_PARTY=4. A requested op is allowed iff it is a
// subset of the granted bits.

#include <optional>

#include "permchain/state.hpp"
#include "permchain/tx.hpp"

namespace permchain {

constexpr std::uint8_t kPermCreate = 1;
constexpr std::uint8_t kPermRead = 2;
constexpr std::uint8_t kPermUpdate = 4;
constexpr std::uint8_t kPermDelete = 8;
constexpr std::uint8_t kPermMask = 0x0F;

constexpr std::uint8_t kRoleDataOwner = 1;
constexpr std::uint8_t kRoleServiceProvider = 2;
constexpr std::uint8_t kRoleThirdParty = 4;

inline bool op_subset(std::uint8_t op, std::uint8_t granted) { return (op & ~granted) == 0; }

struct ChainParams {
    std::uint64_t chain_id = 1;
    Digest32 pow_target;  // block hash must compare below this value
    std::uint64_t token_ttl_seconds = 3600;
    std::uint64_t refresh_threshold = 100;
    bool per_tx_root_check = true;  // compare state roots after every transaction, not just per block
    std::uint64_t max_pow_attempts = 1u << 24;

    ChainParams() { pow_target.b.fill(0xFF); }
};

// Values the executing transaction can observe from its surrounding block:
// the hash of the chain tip it builds on and the block timestamp.
struct ExecContext {
    Digest32 parent_hash;
    std::uint64_t timestamp = 0;
};

struct PartyRecord {
    std::uint8_t roles = 0;
    std::uint64_t registered_at = 0;

    Bytes encode() const {
        Encoder e;
        e.u8(roles);
        e.u64(registered_at);
        return e.take();
    }

    static PartyRecord decode(const Bytes& b) {
        Decoder d(b);
        PartyRecord r;
        r.roles = d.u8();
        r.registered_at = d.u64();
        d.expect_done();
        return r;
    }
};

struct AccessRecord {
    std::string data_pointer;
    Digest32 data_hash;
    Digest32 access_token;  // zero while no token has been issued
    std::uint8_t permission = 0;

    Bytes encode() const {
        Encoder e;
        e.str(data_pointer);
        e.raw(data_hash.b);
        e.raw(access_token.b);
        e.u8(permission);
        return e.take();
    }

    static AccessRecord decode(const Bytes& b) {
        Decoder d(b);
        AccessRecord r;
        r.data_pointer = d.str();
        r.data_hash.b = d.raw<32>();
        r.access_token.b = d.raw<32>();
        r.permission = d.u8();
        d.expect_done();
        return r;
    }
};

struct TokenRecord {
    Address data_owner;
    Address service_provider;
    Address third_party;
    std::uint64_t issued_at = 0;
    bool status = false;  // false once revoked
    std::uint8_t permissions = 0;
    std::uint64_t expires_in = 0;  // lifetime in seconds from issued_at
    std::uint64_t refresh_count = 0;

    Bytes encode() const {
        Encoder e;
        e.raw(data_owner.b);
        e.raw(service_provider.b);
        e.raw(third_party.b);
        e.u64(issued_at);
        e.u8(status ? 1 : 0);
        e.u8(permissions);
        e.u64(expires_in);
        e.u64(refresh_count);
        return e.take();
    }

    static TokenRecord decode(const Bytes& b) {
        Decoder d(b);
        TokenRecord r;
        r.data_owner.b = d.raw<20>();
        r.service_provider.b = d.raw<20>();
        r.third_party.b = d.raw<20>();
        r.issued_at = d.u64();
        r.status = d.u8() != 0;
        r.permissions = d.u8();
        r.expires_in = d.u64();
        r.refresh_count = d.u64();
        d.expect_done();
        return r;
    }
};

enum class RejectReason : std::uint8_t {
    None = 0,
    BadSignature,
    UnknownToken,
    WrongParty,
    OpNotGranted,
    Expired,
    Revoked,
    RefreshExhausted,
};

inline const char* reject_reason_name(RejectReason r) {
    switch (r) {
        case RejectReason::None: return "none";
        case RejectReason::BadSignature: return "bad_signature";
        case RejectReason::UnknownToken: return "unknown_token";
        case RejectReason::WrongParty: return "wrong_party";
        case RejectReason::OpNotGranted: return "op_not_granted";
        case RejectReason::Expired: return "expired";
        case RejectReason::Revoked: return "revoked";
        case RejectReason::RefreshExhausted: return "refresh_exhausted";
    }
    return "unknown";
}

struct ValidationReceipt {
    bool accepted = false;
    RejectReason reason = RejectReason::None;
    Digest32 token;
    Address pk;
    std::uint8_t op = 0;

    Bytes encode() const {
        Encoder e;
        e.u8(accepted ? 1 : 0);
        e.u8(static_cast<std::uint8_t>(reason));
        e.raw(token.b);
        e.raw(pk.b);
        e.u8(op);
        return e.take();
    }

    static ValidationReceipt decode(const Bytes& b) {
        Decoder d(b);
        ValidationReceipt r;
        r.accepted = d.u8() != 0;
        r.reason = static_cast<RejectReason>(d.u8());
        r.token.b = d.raw<32>();
        r.pk.b = d.raw<20>();
        r.op = d.u8();
        d.expect_done();
        return r;
    }
};

inline Bytes party_key(const Address& a) {
    Bytes k{'P'};
    k.insert(k.end(), a.b.begin(), a.b.end());
    return k;
}

inline Bytes nonce_key(const Address& a) {
    Bytes k{'N'};
    k.insert(k.end(), a.b.begin(), a.b.end());
    return k;
}

inline Bytes access_key(const Address& data_owner, const Address& sp, const Address& tp) {
    Bytes k{'A'};
    k.insert(k.end(), data_owner.b.begin(), data_owner.b.end());
    k.insert(k.end(), sp.b.begin(), sp.b.end());
    k.insert(k.end(), tp.b.begin(), tp.b.end());
    return k;
}

inline Bytes token_key(const Digest32& token) {
    Bytes k{'T'};
    k.insert(k.end(), token.b.begin(), token.b.end());
    return k;
}

inline Bytes receipt_key(const Digest32& tx_digest) {
    Bytes k{'V'};
    k.insert(k.end(), tx_digest.b.begin(), tx_digest.b.end());
    return k;
}

inline std::optional<PartyRecord> get_party(const LedgerState& s, const Address& a) {
    auto v = s.get(party_key(a));
    if (!v) return std::nullopt;
    return PartyRecord::decode(*v);
}

inline std::optional<AccessRecord> get_access(const LedgerState& s, const Address& data_owner,
                                              const Address& sp, const Address& tp) {
    auto v = s.get(access_key(data_owner, sp, tp));
    if (!v) return std::nullopt;
    return AccessRecord::decode(*v);
}

inline std::optional<TokenRecord> get_token(const LedgerState& s, const Digest32& token) {
    auto v = s.get(token_key(token));
    if (!v) return std::nullopt;
    return TokenRecord::decode(*v);
}

inline std::optional<ValidationReceipt> get_receipt(const LedgerState& s, const Digest32& tx_digest) {
    auto v = s.get(receipt_key(tx_digest));
    if (!v) return std::nullopt;
    return ValidationReceipt::decode(*v);
}

inline std::uint64_t committed_nonce(const LedgerState& s, const Address& a) {
    auto v = s.get(nonce_key(a));
    if (!v) return 0;
    Decoder d(*v);
    std::uint64_t n = d.u64();
    d.expect_done();
    return n;
}

// True iff an access record exists for the triple and op is a subset of the
// granted permission bits.
inline bool check_permission(const LedgerState& s, const Address& data_owner, const Address& sp,
                             const Address& tp, std::uint8_t op) {
    auto rec = get_access(s, data_owner, sp, tp);
    if (!rec) return false;
    return op_subset(op, rec->permission);
}

inline Digest32 derive_token(const Address& data_owner, const Address& sp, const Address& tp,
                             const Digest32& block_hash) {
    Encoder e;
    e.raw(data_owner.b);
    e.raw(sp.b);
    e.raw(tp.b);
    e.raw(block_hash.b);
    return sha256(e.data());
}

// Message a caller signs to prove it stands behind a validation request. The
// request nonce is issued by the resource server per request.
inline Bytes validation_challenge(const Digest32& token, std::uint8_t op, std::uint64_t chain_id,
                                  std::uint64_t request_nonce) {
    Encoder e;
    e.raw(token.b);
    e.u8(op);
    e.u64(chain_id);
    e.u64(request_nonce);
    return e.take();
}

// Contract-level precondition for a proposal against a given state. Signature
// and nonce freshness are the chain's concern, not checked here.
inline Errc precheck(const LedgerState& s, const TransactionProposal& tx) {
    if (const auto* r = std::get_if<RegisterPayload>(&tx.payload)) {
        if (get_party(s, tx.sender)) return Errc::AlreadyRegistered;
        if (r->roles & ~(kRoleDataOwner | kRoleServiceProvider | kRoleThirdParty))
            return Errc::InvalidTransaction;
        return Errc::Ok;
    }

    auto sender_rec = get_party(s, tx.sender);
    if (!sender_rec) return Errc::UnregisteredParty;

    if (const auto* g = std::get_if<GrantPayload>(&tx.payload)) {
        if (!(sender_rec->roles & kRoleDataOwner)) return Errc::NotOwner;
        if (!get_party(s, g->service_provider) || !get_party(s, g->third_party))
            return Errc::UnregisteredParty;
        if (g->permission == 0) return Errc::EmptyPermission;
        if (g->permission & ~kPermMask) return Errc::InvalidTransaction;
        return Errc::Ok;
    }
    if (const auto* v = std::get_if<RevokePayload>(&tx.payload)) {
        if (!get_access(s, tx.sender, v->service_provider, v->third_party))
            return Errc::NoSuchRecord;
        return Errc::Ok;
    }
    if (const auto* tr = std::get_if<TokenRequestPayload>(&tx.payload)) {
        if (tr->op == 0 || (tr->op & ~kPermMask)) return Errc::PermissionDenied;
        if (!check_permission(s, tr->data_owner, tr->service_provider, tx.sender, tr->op))
            return Errc::PermissionDenied;
        return Errc::Ok;
    }
    if (const auto* va = std::get_if<ValidationPayload>(&tx.payload)) {
        // Any registered party may submit a validation; the verdict, not the
        // transaction, carries the accept/reject outcome.
        if (va->op & ~kPermMask) return Errc::InvalidTransaction;
        return Errc::Ok;
    }
    return Errc::InvalidTransaction;
}

// Token validation. Outcome order: signature, token lookup, identity. The
// data owner and service provider bypass permission, expiry, status and
// refresh checks; a third party must pass all of them. Every acceptance
// increments refresh_count.
inline ValidationReceipt run_validation(LedgerState& s, const ValidationPayload& p,
                                        const ExecContext& ctx, const ChainParams& params) {
    ValidationReceipt out;
    out.token = p.token;
    out.pk = p.pk;
    out.op = p.op;
    out.accepted = false;

    Bytes challenge = validation_challenge(p.token, p.op, params.chain_id, p.request_nonce);
    if (!verify(p.pk, challenge, p.t)) {
        out.reason = RejectReason::BadSignature;
        return out;
    }

    auto rec = get_token(s, p.token);
    if (!rec) {
        out.reason = RejectReason::UnknownToken;
        return out;
    }

    if (p.pk == rec->data_owner || p.pk == rec->service_provider) {
        rec->refresh_count += 1;
        s.put(token_key(p.token), rec->encode());
        out.accepted = true;
        out.reason = RejectReason::None;
        return out;
    }

    if (p.pk != rec->third_party) {
        out.reason = RejectReason::WrongParty;
        return out;
    }
    if (!op_subset(p.op, rec->permissions)) {
        out.reason = RejectReason::OpNotGranted;
        return out;
    }
    if (!(ctx.timestamp < rec->issued_at + rec->expires_in)) {
        out.reason = RejectReason::Expired;
        return out;
    }
    if (!rec->status) {
        out.reason = RejectReason::Revoked;
        return out;
    }
    if (!(rec->refresh_count < params.refresh_threshold)) {
        out.reason = RejectReason::RefreshExhausted;
        return out;
    }

    rec->refresh_count += 1;
    s.put(token_key(p.token), rec->encode());
    out.accepted = true;
    out.reason = RejectReason::None;
    return out;
}

// Applies a proposal to the state in place. Preconditions are re-checked;
// a violation aborts the transaction.
inline void apply(LedgerState& s, const TransactionProposal& tx, const ExecContext& ctx,
                  const ChainParams& params) {
    Errc pre = precheck(s, tx);
    if (pre != Errc::Ok) throw Error(pre, "transaction precondition violated");

    if (const auto* r = std::get_if<RegisterPayload>(&tx.payload)) {
        PartyRecord rec;
        rec.roles = r->roles;
        rec.registered_at = ctx.timestamp;
        s.put(party_key(tx.sender), rec.encode());
    } else if (const auto* g = std::get_if<GrantPayload>(&tx.payload)) {
        Bytes key = access_key(tx.sender, g->service_provider, g->third_party);
        AccessRecord rec;
        if (auto existing = s.get(key)) rec = AccessRecord::decode(*existing);
        rec.data_pointer = g->data_pointer;
        rec.data_hash = g->data_hash;
        rec.permission = g->permission;
        s.put(key, rec.encode());
    } else if (const auto* v = std::get_if<RevokePayload>(&tx.payload)) {
        Bytes key = access_key(tx.sender, v->service_provider, v->third_party);
        AccessRecord rec = AccessRecord::decode(*s.get(key));
        rec.permission = 0;
        if (!rec.access_token.is_zero()) {
            if (auto tok = get_token(s, rec.access_token)) {
                tok->status = false;
                s.put(token_key(rec.access_token), tok->encode());
            }
        }
        s.put(key, rec.encode());
    } else if (const auto* tr = std::get_if<TokenRequestPayload>(&tx.payload)) {
        Bytes key = access_key(tr->data_owner, tr->service_provider, tx.sender);
        AccessRecord rec = AccessRecord::decode(*s.get(key));
        Digest32 token = derive_token(tr->data_owner, tr->service_provider, tx.sender, ctx.parent_hash);
        if (!rec.access_token.is_zero() && rec.access_token != token)
            s.erase(token_key(rec.access_token));  // one live token per triple
        TokenRecord tok;
        tok.data_owner = tr->data_owner;
        tok.service_provider = tr->service_provider;
        tok.third_party = tx.sender;
        tok.issued_at = ctx.timestamp;
        tok.status = true;
        tok.permissions = tr->op;
        tok.expires_in = params.token_ttl_seconds;
        tok.refresh_count = 0;
        s.put(token_key(token), tok.encode());
        rec.access_token = token;
        s.put(key, rec.encode());
    } else if (const auto* va = std::get_if<ValidationPayload>(&tx.payload)) {
        ValidationReceipt receipt = run_validation(s, *va, ctx, params);
        s.put(receipt_key(tx.digest()), receipt.encode());
    }
}

// Referential integrity scan: every access record holding a token must point
// at a token record issued to the same triple. Returns human-readable
// violation descriptions, empty when sound.
inline std::vector<std::string> ledger_integrity_violations(const LedgerState& s) {
    std::vector<std::string> out;
    for (const auto& [k, v] : s.entries()) {
        if (k.empty() || k[0] != 'A' || k.size() != 1 + 60) continue;
        AccessRecord rec = AccessRecord::decode(v);
        if (rec.access_token.is_zero()) continue;
        Address data_owner, sp, tp;
        std::copy(k.begin() + 1, k.begin() + 21, data_owner.b.begin());
        std::copy(k.begin() + 21, k.begin() + 41, sp.b.begin());
        std::copy(k.begin() + 41, k.begin() + 61, tp.b.begin());
        auto tok = get_token(s, rec.access_token);
        if (!tok) {
            out.push_back("access record " + to_hex(k) + " points at missing token " +
                          rec.access_token.hex());
            continue;
        }
        if (tok->data_owner != data_owner || tok->service_provider != sp || tok->third_party != tp)
            out.push_back("token " + rec.access_token.hex() + " issued to a different triple");
    }
    return out;
}

}  // namespace permchain
