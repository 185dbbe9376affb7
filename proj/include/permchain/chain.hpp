#pragma once

// A single full node: block list, current state, mempool. Adoption goes
// through validate_block for every block, the miner's own included, so a
// sealed block is accepted by exactly the same code path everywhere.

#include <deque>
#include <fstream>
#include <random>
#include <set>

#include "permchain/block.hpp"
#include "permchain/contract.hpp"

namespace permchain {

class Chain {
  public:
    explicit Chain(ChainParams params = {}) : params_(std::move(params)) {
        Block genesis;
        genesis.height = 0;
        genesis.parent_hash = zero_digest();
        genesis.miner = Address{};
        genesis.timestamp = 0;
        genesis.tx_root = compute_tx_root({}, {});
        genesis.state_root = state_.root();
        genesis.pow_nonce = 0;
        genesis.block_hash = genesis.compute_hash();
        blocks_.push_back(std::move(genesis));
    }

    const ChainParams& params() const { return params_; }
    const std::vector<Block>& blocks() const { return blocks_; }
    const Block& tip() const { return blocks_.back(); }
    std::uint64_t height() const { return tip().height; }
    const LedgerState& state() const { return state_; }
    const std::deque<TransactionProposal>& mempool() const { return mempool_; }

    // Signature, nonce freshness, contract precondition.
    static bool validate_transaction(const LedgerState& s, const TransactionProposal& tx) {
        if (!verify(tx.sender, tx.signing_bytes(), tx.signature)) return false;
        if (!(tx.nonce > committed_nonce(s, tx.sender))) return false;
        return precheck(s, tx) == Errc::Ok;
    }

    // Pure: returns the successor state, never touches the input.
    static LedgerState execute_transaction(const LedgerState& s, const TransactionProposal& tx,
                                           const ExecContext& ctx, const ChainParams& params) {
        LedgerState next = s;
        apply(next, tx, ctx, params);
        Encoder e;
        e.u64(tx.nonce);
        next.put(nonce_key(tx.sender), e.take());
        return next;
    }

    bool submit(const TransactionProposal& tx) {
        if (mempool_digests_.count(tx.digest())) return false;
        if (!validate_transaction(state_, tx)) return false;
        mempool_.push_back(tx);
        mempool_digests_.insert(tx.digest());
        return true;
    }

    // Seals a block on the current tip without adopting it; call
    // validate_block to advance. Proposals that turned invalid against the
    // evolving state are discarded from the mempool.
    Block mine_block(std::size_t max_txs, std::mt19937_64& rng, std::uint64_t timestamp,
                     bool allow_empty = true) {
        if (mempool_.empty() && !allow_empty)
            throw Error(Errc::ConfigInvalid, "mempool empty and empty blocks disabled");
        if (timestamp < tip().timestamp) timestamp = tip().timestamp;

        Block b;
        b.height = tip().height + 1;
        b.parent_hash = tip().block_hash;
        b.timestamp = timestamp;
        ExecContext ctx{b.parent_hash, b.timestamp};

        LedgerState s = state_;
        while (!mempool_.empty() && b.txs.size() < max_txs) {
            TransactionProposal tx = mempool_.front();
            mempool_.pop_front();
            mempool_digests_.erase(tx.digest());
            if (!validate_transaction(s, tx)) continue;
            s = execute_transaction(s, tx, ctx, params_);
            b.txs.push_back(std::move(tx));
            b.tx_state_roots.push_back(s.root());
        }

        b.tx_root = compute_tx_root(b.txs, b.tx_state_roots);
        b.state_root = b.txs.empty() ? state_.root() : b.tx_state_roots.back();

        b.pow_nonce = rng();
        for (std::uint64_t attempts = 0;; ++attempts) {
            if (attempts >= params_.max_pow_attempts)
                throw Error(Errc::MiningTimeout, "proof-of-work attempt budget exhausted");
            b.block_hash = b.compute_hash();
            if (hash_below_target(b.block_hash, params_.pow_target)) break;
            ++b.pow_nonce;
        }
        return b;
    }

    // Full adoption check. On success the block is appended, the state
    // replaced and committed proposals leave the mempool; on failure nothing
    // changes.
    bool validate_block(const Block& b) {
        if (b.parent_hash != tip().block_hash) return false;
        if (b.height != tip().height + 1) return false;
        if (b.timestamp < tip().timestamp) return false;
        if (b.compute_hash() != b.block_hash) return false;
        if (!hash_below_target(b.block_hash, params_.pow_target)) return false;
        if (b.tx_state_roots.size() != b.txs.size()) return false;
        if (compute_tx_root(b.txs, b.tx_state_roots) != b.tx_root) return false;

        LedgerState s = state_;
        ExecContext ctx{b.parent_hash, b.timestamp};
        for (std::size_t i = 0; i < b.txs.size(); ++i) {
            if (!validate_transaction(s, b.txs[i])) return false;
            LedgerState next;
            try {
                next = execute_transaction(s, b.txs[i], ctx, params_);
            } catch (const Error&) {
                return false;
            }
            if (params_.per_tx_root_check && next.root() != b.tx_state_roots[i]) return false;
            s = std::move(next);
        }
        Digest32 final_root = b.txs.empty() ? state_.root() : s.root();
        if (final_root != b.state_root) return false;
        if (!b.txs.empty() && b.tx_state_roots.back() != b.state_root) return false;

        for (const auto& tx : b.txs) {
            Digest32 d = tx.digest();
            if (mempool_digests_.erase(d)) {
                for (auto it = mempool_.begin(); it != mempool_.end(); ++it) {
                    if (it->digest() == d) {
                        mempool_.erase(it);
                        break;
                    }
                }
            }
        }
        blocks_.push_back(b);
        state_ = std::move(s);
        return true;
    }

    // Longest-chain rule. The candidate branch must root at a known block and
    // end strictly higher than the current tip; every block is revalidated by
    // replaying from genesis. Equal length keeps the current chain.
    bool resolve_fork(const std::vector<Block>& branch) {
        if (branch.empty()) return false;
        std::size_t fork_idx = blocks_.size();
        for (std::size_t i = 0; i < blocks_.size(); ++i) {
            if (blocks_[i].block_hash == branch.front().parent_hash) {
                fork_idx = i;
                break;
            }
        }
        if (fork_idx == blocks_.size()) return false;
        if (branch.back().height <= tip().height) return false;

        Chain replay(params_);
        for (std::size_t i = 1; i <= fork_idx; ++i)
            if (!replay.validate_block(blocks_[i])) return false;
        for (const auto& b : branch)
            if (!replay.validate_block(b)) return false;

        std::set<Digest32> committed;
        for (const auto& b : replay.blocks_)
            for (const auto& tx : b.txs) committed.insert(tx.digest());
        for (auto it = mempool_.begin(); it != mempool_.end();) {
            if (committed.count(it->digest())) {
                mempool_digests_.erase(it->digest());
                it = mempool_.erase(it);
            } else {
                ++it;
            }
        }
        blocks_ = std::move(replay.blocks_);
        state_ = std::move(replay.state_);
        return true;
    }

    void save(const std::string& path) const {
        Encoder e;
        e.raw(reinterpret_cast<const std::uint8_t*>("PCHN1"), 5);
        e.u32(static_cast<std::uint32_t>(blocks_.size()));
        for (const auto& b : blocks_) e.bytes(b.encode());
        std::ofstream f(path, std::ios::binary | std::ios::trunc);
        if (!f) throw Error(Errc::ParseError, "cannot open " + path + " for writing");
        f.write(reinterpret_cast<const char*>(e.data().data()),
                static_cast<std::streamsize>(e.data().size()));
    }

    // Loading replays every block through validate_block, so a tampered file
    // fails outright.
    static Chain load(const std::string& path, ChainParams params = {}) {
        std::ifstream f(path, std::ios::binary);
        if (!f) throw Error(Errc::ParseError, "cannot open " + path);
        Bytes raw((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
        Decoder d(raw);
        auto magic = d.raw<5>();
        if (std::memcmp(magic.data(), "PCHN1", 5) != 0)
            throw Error(Errc::DecodeError, "bad chain file magic");
        std::uint32_t count = d.u32();
        Chain chain(std::move(params));
        for (std::uint32_t i = 0; i < count; ++i) {
            Bytes bb = d.bytes();
            Block b = Block::decode(bb);
            if (i == 0) {
                if (b != chain.blocks_.front())
                    throw Error(Errc::DecodeError, "genesis mismatch against chain parameters");
                continue;
            }
            if (!chain.validate_block(b))
                throw Error(Errc::DecodeError, "block " + std::to_string(i) + " failed validation");
        }
        d.expect_done();
        return chain;
    }

    std::string export_jsonl() const {
        std::string out;
        for (const auto& b : blocks_) {
            out += block_to_json(b).dump();
            out += '\n';
        }
        return out;
    }

  private:
    ChainParams params_;
    std::vector<Block> blocks_;
    LedgerState state_;
    std::deque<TransactionProposal> mempool_;
    std::set<Digest32> mempool_digests_;
};

}  // namespace permchain
