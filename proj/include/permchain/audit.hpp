#pragma once

// Audit views over a committed chain. A party's trail lists the transactions
// that party performed: everything it sent, plus validations exercised in its
// name (the pk parameter). A token's trail lists its issuance and every
// validation naming it.

#include "permchain/chain.hpp"

namespace permchain {

struct AuditEntry {
    std::uint64_t height = 0;
    std::size_t tx_index = 0;
    Digest32 tx_digest;
    std::string action;
    Address actor;
    nlohmann::json detail;
};

inline nlohmann::json audit_entry_to_json(const AuditEntry& e) {
    return {{"height", e.height},
            {"tx_index", e.tx_index},
            {"tx_digest", e.tx_digest.hex()},
            {"action", e.action},
            {"actor", e.actor.hex()},
            {"detail", e.detail}};
}

namespace detail {

inline AuditEntry make_entry(const Chain& chain, const Block& b, std::size_t idx) {
    const TransactionProposal& tx = b.txs[idx];
    AuditEntry e;
    e.height = b.height;
    e.tx_index = idx;
    e.tx_digest = tx.digest();
    e.action = tx_action_name(tx);
    e.actor = tx.sender;
    if (const auto* va = std::get_if<ValidationPayload>(&tx.payload)) {
        e.actor = va->pk;
        if (auto receipt = get_receipt(chain.state(), e.tx_digest)) {
            e.detail["accepted"] = receipt->accepted;
            e.detail["reason"] = reject_reason_name(receipt->reason);
        }
        e.detail["token"] = va->token.hex();
        e.detail["submitter"] = tx.sender.hex();
        e.detail["op"] = va->op;
    } else if (const auto* g = std::get_if<GrantPayload>(&tx.payload)) {
        e.detail["service_provider"] = g->service_provider.hex();
        e.detail["third_party"] = g->third_party.hex();
        e.detail["permission"] = g->permission;
    } else if (const auto* rv = std::get_if<RevokePayload>(&tx.payload)) {
        e.detail["service_provider"] = rv->service_provider.hex();
        e.detail["third_party"] = rv->third_party.hex();
    } else if (const auto* tr = std::get_if<TokenRequestPayload>(&tx.payload)) {
        e.detail["data_owner"] = tr->data_owner.hex();
        e.detail["service_provider"] = tr->service_provider.hex();
        e.detail["op"] = tr->op;
        e.detail["token"] = derive_token(tr->data_owner, tr->service_provider, tx.sender,
                                         b.parent_hash)
                                .hex();
    }
    return e;
}

}  // namespace detail

inline std::vector<AuditEntry> audit_trail(const Chain& chain, const Address& party) {
    std::vector<AuditEntry> out;
    for (const auto& b : chain.blocks()) {
        for (std::size_t i = 0; i < b.txs.size(); ++i) {
            const TransactionProposal& tx = b.txs[i];
            bool match = tx.sender == party;
            if (const auto* va = std::get_if<ValidationPayload>(&tx.payload))
                match = match || va->pk == party;
            if (match) out.push_back(detail::make_entry(chain, b, i));
        }
    }
    return out;
}

inline std::vector<AuditEntry> audit_trail(const Chain& chain, const Digest32& token) {
    std::vector<AuditEntry> out;
    for (const auto& b : chain.blocks()) {
        for (std::size_t i = 0; i < b.txs.size(); ++i) {
            const TransactionProposal& tx = b.txs[i];
            bool match = false;
            if (const auto* va = std::get_if<ValidationPayload>(&tx.payload)) {
                match = va->token == token;
            } else if (const auto* tr = std::get_if<TokenRequestPayload>(&tx.payload)) {
                match = derive_token(tr->data_owner, tr->service_provider, tx.sender,
                                     b.parent_hash) == token;
            }
            if (match) out.push_back(detail::make_entry(chain, b, i));
        }
    }
    return out;
}

}  // namespace permchain
