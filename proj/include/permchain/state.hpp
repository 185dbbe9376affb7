#pragma once

// Ledger state: a sorted byte-key/value map with a Merkle commitment. Copying
// the whole map per transaction keeps execution trivially atomic; state sizes
// here are desk-scale.

#include <map>
#include <optional>

#include "permchain/codec.hpp"
#include "permchain/crypto.hpp"

namespace permchain {

class LedgerState {
  public:
    std::optional<Bytes> get(const Bytes& key) const {
        auto it = entries_.find(key);
        if (it == entries_.end()) return std::nullopt;
        return it->second;
    }

    bool contains(const Bytes& key) const { return entries_.count(key) != 0; }

    void put(const Bytes& key, Bytes value) { entries_[key] = std::move(value); }

    void erase(const Bytes& key) { entries_.erase(key); }

    std::size_t size() const { return entries_.size(); }

    const std::map<Bytes, Bytes>& entries() const { return entries_; }

    // Merkle root over the sorted entries; each leaf commits one key-value
    // pair as sha256(len(k) ‖ k ‖ len(v) ‖ v).
    Digest32 root() const {
        std::vector<Digest32> leaves;
        leaves.reserve(entries_.size());
        for (const auto& [k, v] : entries_) {
            Encoder e;
            e.bytes(k);
            e.bytes(v);
            leaves.push_back(sha256(e.data()));
        }
        return merkle_root(leaves);
    }

    bool operator==(const LedgerState& other) const { return entries_ == other.entries_; }

  private:
    std::map<Bytes, Bytes> entries_;
};

}  // namespace permchain
