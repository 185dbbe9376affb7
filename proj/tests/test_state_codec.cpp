#include <catch2/catch_amalgamated.hpp>

#include "permchain/state.hpp"

using namespace permchain;

TEST_CASE("integer encoding is big-endian fixed width") {
    Encoder e;
    e.u8(0xAB);
    e.u32(0x01020304);
    e.u64(0x1112131415161718ull);
    Bytes expect{0xAB, 0x01, 0x02, 0x03, 0x04, 0x11, 0x12, 0x13, 0x14, 0x15, 0x16, 0x17, 0x18};
    CHECK(e.data() == expect);
}

TEST_CASE("encoder/decoder round trip") {
    Encoder e;
    e.u8(7);
    e.u32(123456);
    e.u64(0xFFFFFFFFFFFFFFFFull);
    e.bytes(Bytes{1, 2, 3});
    e.str("hello");
    e.bytes({});

    Decoder d(e.data());
    CHECK(d.u8() == 7);
    CHECK(d.u32() == 123456);
    CHECK(d.u64() == 0xFFFFFFFFFFFFFFFFull);
    CHECK(d.bytes() == Bytes{1, 2, 3});
    CHECK(d.str() == "hello");
    CHECK(d.bytes().empty());
    CHECK(d.done());
    CHECK_NOTHROW(d.expect_done());
}

TEST_CASE("decoder rejects truncated and oversized input") {
    Encoder e;
    e.u64(42);
    Bytes full = e.data();

    for (std::size_t len = 0; len < full.size(); ++len) {
        Bytes cut(full.begin(), full.begin() + len);
        Decoder d(cut);
        CHECK_THROWS_AS(d.u64(), Error);
    }

    Decoder d(full);
    d.u64();
    CHECK_NOTHROW(d.expect_done());

    Bytes extra = full;
    extra.push_back(0);
    Decoder d2(extra);
    d2.u64();
    CHECK_THROWS_AS(d2.expect_done(), Error);

    // length prefix pointing past the end
    Encoder e3;
    e3.u32(100);
    e3.u8(1);
    Decoder d3(e3.data());
    CHECK_THROWS_AS(d3.bytes(), Error);
}

TEST_CASE("decode errors carry the DecodeError code") {
    Decoder d(nullptr, 0);
    try {
        d.u8();
        FAIL("expected a throw");
    } catch (const Error& err) {
        CHECK(err.code() == Errc::DecodeError);
    }
}

namespace {
Bytes bv(std::initializer_list<std::uint8_t> l) { return Bytes(l); }

Digest32 ref_state_root(const std::map<Bytes, Bytes>& entries) {
    std::vector<Digest32> leaves;
    for (const auto& [k, v] : entries) {
        Bytes buf;
        Encoder e;
        e.bytes(k);
        e.bytes(v);
        leaves.push_back(sha256(e.data()));
    }
    return merkle_root(leaves);
}
}  // namespace

TEST_CASE("state root commits keys, values and nothing else") {
    LedgerState s;
    CHECK(s.root() == merkle_root({}));

    s.put(bv({'a'}), bv({1}));
    s.put(bv({'b'}), bv({2}));
    Digest32 r1 = s.root();

    LedgerState t;
    t.put(bv({'b'}), bv({2}));
    t.put(bv({'a'}), bv({1}));
    CHECK(t.root() == r1);  // insertion order cannot matter
    CHECK(t == s);

    t.put(bv({'b'}), bv({3}));
    CHECK(t.root() != r1);

    t.put(bv({'b'}), bv({2}));
    CHECK(t.root() == r1);

    t.erase(bv({'a'}));
    CHECK(t.root() != r1);

    CHECK(s.root() == ref_state_root(s.entries()));
}

TEST_CASE("state get/contains/erase behave like a map") {
    LedgerState s;
    CHECK_FALSE(s.get(bv({'x'})).has_value());
    s.put(bv({'x'}), bv({9}));
    CHECK(s.contains(bv({'x'})));
    CHECK(s.get(bv({'x'})) == bv({9}));
    CHECK(s.size() == 1);
    s.erase(bv({'x'}));
    CHECK_FALSE(s.contains(bv({'x'})));
    CHECK(s.size() == 0);
}
