#pragma once

// Canonical wire encoding: integers big-endian fixed width, variable-length
// fields u32-length-prefixed, fields in declared order. docs/wire-format.md
// holds the byte-level layout of every record.

#include <array>
#include <cstring>
#include <string>

#include "permchain/common.hpp"

namespace permchain {

class Encoder {
  public:
    void u8(std::uint8_t v) { buf_.push_back(v); }

    void u32(std::uint32_t v) {
        for (int i = 3; i >= 0; --i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }

    void u64(std::uint64_t v) {
        for (int i = 7; i >= 0; --i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }

    void raw(const std::uint8_t* p, std::size_t n) { buf_.insert(buf_.end(), p, p + n); }

    template <std::size_t N>
    void raw(const std::array<std::uint8_t, N>& a) { raw(a.data(), N); }

    void bytes(const Bytes& b) {
        u32(static_cast<std::uint32_t>(b.size()));
        raw(b.data(), b.size());
    }

    void str(const std::string& s) {
        u32(static_cast<std::uint32_t>(s.size()));
        raw(reinterpret_cast<const std::uint8_t*>(s.data()), s.size());
    }

    const Bytes& data() const { return buf_; }
    Bytes take() { return std::move(buf_); }

  private:
    Bytes buf_;
};

class Decoder {
  public:
    Decoder(const std::uint8_t* p, std::size_t n) : p_(p), n_(n) {}
    explicit Decoder(const Bytes& b) : Decoder(b.data(), b.size()) {}

    std::uint8_t u8() {
        need(1);
        return p_[pos_++];
    }

    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v = (v << 8) | p_[pos_++];
        return v;
    }

    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v = (v << 8) | p_[pos_++];
        return v;
    }

    template <std::size_t N>
    std::array<std::uint8_t, N> raw() {
        need(N);
        std::array<std::uint8_t, N> a;
        std::memcpy(a.data(), p_ + pos_, N);
        pos_ += N;
        return a;
    }

    Bytes bytes() {
        std::uint32_t n = u32();
        need(n);
        Bytes b(p_ + pos_, p_ + pos_ + n);
        pos_ += n;
        return b;
    }

    std::string str() {
        Bytes b = bytes();
        return std::string(b.begin(), b.end());
    }

    bool done() const { return pos_ == n_; }
    std::size_t remaining() const { return n_ - pos_; }

    void expect_done() const {
        if (!done()) throw Error(Errc::DecodeError, "trailing bytes");
    }

  private:
    void need(std::size_t k) const {
        if (n_ - pos_ < k) throw Error(Errc::DecodeError, "input truncated");
    }

    const std::uint8_t* p_;
    std::size_t n_;
    std::size_t pos_ = 0;
};

}  // namespace permchain
