#pragma once

// Blocks commit, per transaction, the state root reached after executing that
// transaction. tx_root is a Merkle root whose leaves are
// sha256(tx digest ‖ state root after the tx), so tampering with either a
// transaction or an intermediate root is visible from the header.

#include "permchain/tx.hpp"

namespace permchain {

inline Digest32 zero_digest() { return Digest32{}; }

inline bool hash_below_target(const Digest32& h, const Digest32& target) { return h < target; }

// Target whose leading `bits` bits are zero: expected 2^bits attempts.
// bits == 0 yields the all-FF target, which accepts effectively everything.
inline Digest32 target_from_zero_bits(unsigned bits) {
    Digest32 t;
    if (bits == 0) {
        t.b.fill(0xFF);
        return t;
    }
    if (bits > 255) bits = 255;
    unsigned byte = bits / 8;
    unsigned rem = bits % 8;
    t.b[byte] = static_cast<std::uint8_t>(0x80u >> rem);
    return t;
}

inline Digest32 lenient_target() { return target_from_zero_bits(0); }

struct Block {
    std::uint64_t height = 0;
    Digest32 parent_hash;
    Address miner;
    std::uint64_t timestamp = 0;
    std::vector<TransactionProposal> txs;
    std::vector<Digest32> tx_state_roots;  // state root after each tx, in order
    Digest32 tx_root;
    Digest32 state_root;
    std::uint64_t pow_nonce = 0;
    Digest32 block_hash;

    Bytes header_bytes() const {
        Encoder e;
        e.u64(height);
        e.raw(parent_hash.b);
        e.raw(miner.b);
        e.u64(timestamp);
        e.raw(tx_root.b);
        e.raw(state_root.b);
        e.u64(pow_nonce);
        return e.take();
    }

    Digest32 compute_hash() const { return sha256(header_bytes()); }

    Bytes encode() const {
        Encoder e;
        Bytes hdr = header_bytes();
        e.raw(hdr.data(), hdr.size());
        e.raw(block_hash.b);
        e.u32(static_cast<std::uint32_t>(txs.size()));
        for (const auto& tx : txs) e.bytes(tx.encode());
        for (const auto& r : tx_state_roots) e.raw(r.b);
        return e.take();
    }

    static Block decode(const Bytes& b) {
        Decoder d(b);
        Block blk;
        blk.height = d.u64();
        blk.parent_hash.b = d.raw<32>();
        blk.miner.b = d.raw<20>();
        blk.timestamp = d.u64();
        blk.tx_root.b = d.raw<32>();
        blk.state_root.b = d.raw<32>();
        blk.pow_nonce = d.u64();
        blk.block_hash.b = d.raw<32>();
        std::uint32_t n = d.u32();
        // each tx costs at least its length prefix plus a 32-byte root, so a
        // count beyond the input length is garbage; refuse before reserving
        if (n > b.size()) throw Error(Errc::DecodeError, "input truncated");
        blk.txs.reserve(n);
        for (std::uint32_t i = 0; i < n; ++i) {
            Bytes txb = d.bytes();
            blk.txs.push_back(TransactionProposal::decode(txb));
        }
        blk.tx_state_roots.reserve(n);
        for (std::uint32_t i = 0; i < n; ++i) {
            Digest32 r;
            r.b = d.raw<32>();
            blk.tx_state_roots.push_back(r);
        }
        d.expect_done();
        return blk;
    }

    bool operator==(const Block&) const = default;
};

inline Digest32 compute_tx_root(const std::vector<TransactionProposal>& txs,
                                const std::vector<Digest32>& roots) {
    std::vector<Digest32> leaves;
    leaves.reserve(txs.size());
    for (std::size_t i = 0; i < txs.size(); ++i) {
        Encoder e;
        e.raw(txs[i].digest().b);
        e.raw(roots[i].b);
        leaves.push_back(sha256(e.data()));
    }
    return merkle_root(leaves);
}

inline nlohmann::json block_to_json(const Block& b) {
    nlohmann::json txs = nlohmann::json::array();
    for (const auto& tx : b.txs) txs.push_back(tx_to_json(tx));
    nlohmann::json roots = nlohmann::json::array();
    for (const auto& r : b.tx_state_roots) roots.push_back(r.hex());
    return {{"height", b.height},
            {"block_hash", b.block_hash.hex()},
            {"parent_hash", b.parent_hash.hex()},
            {"miner", b.miner.hex()},
            {"timestamp", b.timestamp},
            {"pow_nonce", b.pow_nonce},
            {"tx_root", b.tx_root.hex()},
            {"state_root", b.state_root.hex()},
            {"tx_state_roots", roots},
            {"txs", txs}};
}

}  // namespace permchain
