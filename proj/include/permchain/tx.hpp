#pragma once

// Transaction proposals. Three kinds reach the chain: access-control
// transactions (register / grant / revoke), third-party token requests, and
// resource-server validation submissions. The signature covers the canonical
// encoding of (sender, nonce, kind, payload); the digest covers that plus the
// signature.

#include <variant>

#include "permchain/codec.hpp"
#include "permchain/crypto.hpp"

#include <json.hpp>

namespace permchain {

enum class TxKind : std::uint8_t {
    AcTran = 1,
    DqTokenRequest = 2,
    RsValidation = 3,
};

enum class AcAction : std::uint8_t {
    Register = 1,
    Grant = 2,
    Revoke = 3,
};

struct RegisterPayload {
    std::uint8_t roles = 0;
    bool operator==(const RegisterPayload&) const = default;
};

struct GrantPayload {
    Address service_provider;
    Address third_party;
    std::uint8_t permission = 0;
    std::string data_pointer;
    Digest32 data_hash;
    bool operator==(const GrantPayload&) const = default;
};

struct RevokePayload {
    Address service_provider;
    Address third_party;
    bool operator==(const RevokePayload&) const = default;
};

struct TokenRequestPayload {
    Address data_owner;
    Address service_provider;
    std::uint8_t op = 0;
    bool operator==(const TokenRequestPayload&) const = default;
};

struct ValidationPayload {
    Digest32 token;
    Address pk;       // party claiming access
    Signature t;      // that party's signature over the validation challenge
    std::uint8_t op = 0;
    std::uint64_t request_nonce = 0;
    bool operator==(const ValidationPayload&) const = default;
};

using TxPayload =
    std::variant<RegisterPayload, GrantPayload, RevokePayload, TokenRequestPayload, ValidationPayload>;

inline TxKind payload_kind(const TxPayload& p) {
    if (std::holds_alternative<TokenRequestPayload>(p)) return TxKind::DqTokenRequest;
    if (std::holds_alternative<ValidationPayload>(p)) return TxKind::RsValidation;
    return TxKind::AcTran;
}

struct TransactionProposal {
    Address sender;
    std::uint64_t nonce = 0;
    TxPayload payload;
    Signature signature;

    TxKind kind() const { return payload_kind(payload); }

    Bytes signing_bytes() const {
        Encoder e;
        e.raw(sender.b);
        e.u64(nonce);
        e.u8(static_cast<std::uint8_t>(kind()));
        if (const auto* r = std::get_if<RegisterPayload>(&payload)) {
            e.u8(static_cast<std::uint8_t>(AcAction::Register));
            e.u8(r->roles);
        } else if (const auto* g = std::get_if<GrantPayload>(&payload)) {
            e.u8(static_cast<std::uint8_t>(AcAction::Grant));
            e.raw(g->service_provider.b);
            e.raw(g->third_party.b);
            e.u8(g->permission);
            e.str(g->data_pointer);
            e.raw(g->data_hash.b);
        } else if (const auto* v = std::get_if<RevokePayload>(&payload)) {
            e.u8(static_cast<std::uint8_t>(AcAction::Revoke));
            e.raw(v->service_provider.b);
            e.raw(v->third_party.b);
        } else if (const auto* tr = std::get_if<TokenRequestPayload>(&payload)) {
            e.raw(tr->data_owner.b);
            e.raw(tr->service_provider.b);
            e.u8(tr->op);
        } else if (const auto* va = std::get_if<ValidationPayload>(&payload)) {
            e.raw(va->token.b);
            e.raw(va->pk.b);
            e.raw(va->t.b);
            e.u8(va->op);
            e.u64(va->request_nonce);
        }
        return e.take();
    }

    Bytes encode() const {
        Encoder e;
        Bytes sb = signing_bytes();
        e.raw(sb.data(), sb.size());
        e.raw(signature.b);
        return e.take();
    }

    Digest32 digest() const { return sha256(encode()); }

    static TransactionProposal decode(Decoder& d) {
        TransactionProposal tx;
        tx.sender.b = d.raw<20>();
        tx.nonce = d.u64();
        auto kind = d.u8();
        switch (static_cast<TxKind>(kind)) {
            case TxKind::AcTran: {
                auto action = d.u8();
                switch (static_cast<AcAction>(action)) {
                    case AcAction::Register: {
                        RegisterPayload p;
                        p.roles = d.u8();
                        tx.payload = p;
                        break;
                    }
                    case AcAction::Grant: {
                        GrantPayload p;
                        p.service_provider.b = d.raw<20>();
                        p.third_party.b = d.raw<20>();
                        p.permission = d.u8();
                        p.data_pointer = d.str();
                        p.data_hash.b = d.raw<32>();
                        tx.payload = p;
                        break;
                    }
                    case AcAction::Revoke: {
                        RevokePayload p;
                        p.service_provider.b = d.raw<20>();
                        p.third_party.b = d.raw<20>();
                        tx.payload = p;
                        break;
                    }
                    default:
                        throw Error(Errc::DecodeError, "unknown access-control action");
                }
                break;
            }
            case TxKind::DqTokenRequest: {
                TokenRequestPayload p;
                p.data_owner.b = d.raw<20>();
                p.service_provider.b = d.raw<20>();
                p.op = d.u8();
                tx.payload = p;
                break;
            }
            case TxKind::RsValidation: {
                ValidationPayload p;
                p.token.b = d.raw<32>();
                p.pk.b = d.raw<20>();
                p.t.b = d.raw<96>();
                p.op = d.u8();
                p.request_nonce = d.u64();
                tx.payload = p;
                break;
            }
            default:
                throw Error(Errc::DecodeError, "unknown transaction kind");
        }
        tx.signature.b = d.raw<96>();
        return tx;
    }

    static TransactionProposal decode(const Bytes& b) {
        Decoder d(b);
        TransactionProposal tx = decode(d);
        d.expect_done();
        return tx;
    }

    bool operator==(const TransactionProposal&) const = default;
};

inline TransactionProposal make_signed_tx(const KeyPair& kp, std::uint64_t nonce, TxPayload payload) {
    TransactionProposal tx;
    tx.sender = kp.addr;
    tx.nonce = nonce;
    tx.payload = std::move(payload);
    tx.signature = sign(kp.sk, tx.signing_bytes());
    return tx;
}

inline const char* tx_action_name(const TransactionProposal& tx) {
    if (std::holds_alternative<RegisterPayload>(tx.payload)) return "register";
    if (std::holds_alternative<GrantPayload>(tx.payload)) return "grant";
    if (std::holds_alternative<RevokePayload>(tx.payload)) return "revoke";
    if (std::holds_alternative<TokenRequestPayload>(tx.payload)) return "request_token";
    return "validation";
}

inline nlohmann::json tx_to_json(const TransactionProposal& tx) {
    nlohmann::json payload;
    if (const auto* r = std::get_if<RegisterPayload>(&tx.payload)) {
        payload = {{"roles", r->roles}};
    } else if (const auto* g = std::get_if<GrantPayload>(&tx.payload)) {
        payload = {{"service_provider", g->service_provider.hex()},
                   {"third_party", g->third_party.hex()},
                   {"permission", g->permission},
                   {"data_pointer", g->data_pointer},
                   {"data_hash", g->data_hash.hex()}};
    } else if (const auto* v = std::get_if<RevokePayload>(&tx.payload)) {
        payload = {{"service_provider", v->service_provider.hex()},
                   {"third_party", v->third_party.hex()}};
    } else if (const auto* tr = std::get_if<TokenRequestPayload>(&tx.payload)) {
        payload = {{"data_owner", tr->data_owner.hex()},
                   {"service_provider", tr->service_provider.hex()},
                   {"op", tr->op}};
    } else if (const auto* va = std::get_if<ValidationPayload>(&tx.payload)) {
        payload = {{"token", va->token.hex()},
                   {"pk", va->pk.hex()},
                   {"t", va->t.hex()},
                   {"op", va->op},
                   {"request_nonce", va->request_nonce}};
    }
    const char* kind = tx.kind() == TxKind::AcTran        ? "ac_tran"
                       : tx.kind() == TxKind::DqTokenRequest ? "dq_token_request"
                                                             : "rs_validation";
    return {{"digest", tx.digest().hex()},
            {"sender", tx.sender.hex()},
            {"nonce", tx.nonce},
            {"kind", kind},
            {"action", tx_action_name(tx)},
            {"payload", payload},
            {"signature", tx.signature.hex()}};
}

}  // namespace permchain
