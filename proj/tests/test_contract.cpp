#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "permchain/contract.hpp"

using namespace permchain;

namespace {

KeyPair key(std::uint8_t tag) {
    Seed32 s;
    s.b[0] = 0xC0;
    s.b[31] = tag;
    return keypair_from_seed(s);
}

struct Parties {
    KeyPair owner = key(1);
    KeyPair sp = key(2);
    KeyPair tp = key(3);
    KeyPair stranger = key(4);
};

LedgerState registered_state(const Parties& p) {
    LedgerState s;
    ChainParams params;
    ExecContext ctx{Digest32{}, 1};
    apply(s, make_signed_tx(p.owner, 1, RegisterPayload{kRoleDataOwner}), ctx, params);
    apply(s, make_signed_tx(p.sp, 1, RegisterPayload{kRoleServiceProvider}), ctx, params);
    apply(s, make_signed_tx(p.tp, 1, RegisterPayload{kRoleThirdParty}), ctx, params);
    apply(s, make_signed_tx(p.stranger, 1, RegisterPayload{0}), ctx, params);
    return s;
}

GrantPayload grant_rcud(const Parties& p, std::uint8_t permission) {
    GrantPayload g;
    g.service_provider = p.sp.addr;
    g.third_party = p.tp.addr;
    g.permission = permission;
    g.data_pointer = "/ClinicalDataManagement/P001";
    g.data_hash = sha256(std::string("doc"));
    return g;
}

}  // namespace

TEST_CASE("registration, grant, token request and validation round trip") {
    Parties p;
    ChainParams params;
    LedgerState s = registered_state(p);

    CHECK(get_party(s, p.owner.addr)->roles == kRoleDataOwner);

    ExecContext ctx{sha256(std::string("block-1")), 10};
    apply(s, make_signed_tx(p.owner, 2, grant_rcud(p, kPermRead | kPermUpdate)), ctx, params);

    auto access = get_access(s, p.owner.addr, p.sp.addr, p.tp.addr);
    REQUIRE(access);
    CHECK(access->permission == (kPermRead | kPermUpdate));
    CHECK(access->access_token.is_zero());

    TokenRequestPayload tr{p.owner.addr, p.sp.addr, kPermRead};
    apply(s, make_signed_tx(p.tp, 2, tr), ctx, params);
    access = get_access(s, p.owner.addr, p.sp.addr, p.tp.addr);
    Digest32 token = access->access_token;
    CHECK(token == derive_token(p.owner.addr, p.sp.addr, p.tp.addr, ctx.parent_hash));

    auto rec = get_token(s, token);
    REQUIRE(rec);
    CHECK(rec->status);
    CHECK(rec->permissions == kPermRead);
    CHECK(rec->issued_at == 10);
    CHECK(rec->expires_in == params.token_ttl_seconds);
    CHECK(rec->refresh_count == 0);

    ValidationPayload v;
    v.token = token;
    v.pk = p.tp.addr;
    v.op = kPermRead;
    v.request_nonce = 99;
    v.t = sign(p.tp.sk, validation_challenge(token, v.op, params.chain_id, v.request_nonce));
    TransactionProposal vtx = make_signed_tx(p.stranger, 2, v);
    apply(s, vtx, ExecContext{ctx.parent_hash, 20}, params);

    auto receipt = get_receipt(s, vtx.digest());
    REQUIRE(receipt);
    CHECK(receipt->accepted);
    CHECK(receipt->reason == RejectReason::None);
    CHECK(get_token(s, token)->refresh_count == 1);
    CHECK(ledger_integrity_violations(s).empty());
}

TEST_CASE("precheck rejects each malformed proposal with its own code") {
    Parties p;
    ChainParams params;
    ExecContext ctx{Digest32{}, 1};
    LedgerState s = registered_state(p);

    CHECK(precheck(s, make_signed_tx(p.owner, 5, RegisterPayload{kRoleDataOwner})) ==
          Errc::AlreadyRegistered);
    CHECK(precheck(s, make_signed_tx(key(9), 1, RegisterPayload{0x80})) == Errc::InvalidTransaction);

    KeyPair ghost = key(10);
    CHECK(precheck(s, make_signed_tx(ghost, 1, grant_rcud(p, kPermRead))) ==
          Errc::UnregisteredParty);

    CHECK(precheck(s, make_signed_tx(p.sp, 2, grant_rcud(p, kPermRead))) == Errc::NotOwner);

    GrantPayload to_ghost = grant_rcud(p, kPermRead);
    to_ghost.third_party = ghost.addr;
    CHECK(precheck(s, make_signed_tx(p.owner, 2, to_ghost)) == Errc::UnregisteredParty);

    CHECK(precheck(s, make_signed_tx(p.owner, 2, grant_rcud(p, 0))) == Errc::EmptyPermission);
    CHECK(precheck(s, make_signed_tx(p.owner, 2, grant_rcud(p, 0x10))) == Errc::InvalidTransaction);

    RevokePayload rv{p.sp.addr, p.tp.addr};
    CHECK(precheck(s, make_signed_tx(p.owner, 2, rv)) == Errc::NoSuchRecord);

    TokenRequestPayload tr{p.owner.addr, p.sp.addr, kPermRead};
    CHECK(precheck(s, make_signed_tx(p.tp, 2, tr)) == Errc::PermissionDenied);

    apply(s, make_signed_tx(p.owner, 2, grant_rcud(p, kPermRead)), ctx, params);
    CHECK(precheck(s, make_signed_tx(p.tp, 2, tr)) == Errc::Ok);
    TokenRequestPayload wide{p.owner.addr, p.sp.addr, kPermRead | kPermDelete};
    CHECK(precheck(s, make_signed_tx(p.tp, 2, wide)) == Errc::PermissionDenied);
    TokenRequestPayload zero{p.owner.addr, p.sp.addr, 0};
    CHECK(precheck(s, make_signed_tx(p.tp, 2, zero)) == Errc::PermissionDenied);

    ValidationPayload v;
    v.op = 0x20;
    CHECK(precheck(s, make_signed_tx(p.tp, 2, v)) == Errc::InvalidTransaction);
}

TEST_CASE("check_permission equals the subset oracle on all 16x16 cases") {
    Parties p;
    for (unsigned granted = 0; granted <= 15; ++granted) {
        LedgerState s;
        AccessRecord rec;
        rec.permission = static_cast<std::uint8_t>(granted);
        s.put(access_key(p.owner.addr, p.sp.addr, p.tp.addr), rec.encode());
        for (unsigned op = 0; op <= 15; ++op) {
            bool expect = (op & ~granted) == 0;
            CAPTURE(granted, op);
            CHECK(check_permission(s, p.owner.addr, p.sp.addr, p.tp.addr,
                                   static_cast<std::uint8_t>(op)) == expect);
            // no record, no permission, regardless of bits
            CHECK_FALSE(check_permission(s, p.owner.addr, p.sp.addr, p.stranger.addr,
                                         static_cast<std::uint8_t>(op)));
        }
    }
}

namespace {

struct TableCase {
    bool identity, op_ok, fresh, status, refresh;
};

ValidationReceipt run_case(const Parties& p, const TableCase& c, const ChainParams& params) {
    LedgerState s;
    Digest32 token = sha256(std::string("truth-table-token"));
    TokenRecord rec;
    rec.data_owner = p.owner.addr;
    rec.service_provider = p.sp.addr;
    rec.third_party = p.tp.addr;
    rec.issued_at = 1000;
    rec.expires_in = 3600;
    rec.permissions = c.op_ok ? kPermRead : kPermCreate;
    rec.status = c.status;
    rec.refresh_count = c.refresh ? 0 : params.refresh_threshold;
    s.put(token_key(token), rec.encode());

    const KeyPair& claimant = c.identity ? p.tp : p.stranger;
    ValidationPayload v;
    v.token = token;
    v.pk = claimant.addr;
    v.op = kPermRead;
    v.request_nonce = 7;
    v.t = sign(claimant.sk, validation_challenge(token, v.op, params.chain_id, v.request_nonce));

    ExecContext ctx{Digest32{}, c.fresh ? 2000u : 5000u};
    return run_validation(s, v, ctx, params);
}

}  // namespace

TEST_CASE("validation verdict equals the five-conjunct oracle on all 32 cases") {
    Parties p;
    ChainParams params;
    for (unsigned bits = 0; bits < 32; ++bits) {
        TableCase c{(bits & 1) != 0, (bits & 2) != 0, (bits & 4) != 0, (bits & 8) != 0,
                    (bits & 16) != 0};
        ValidationReceipt r = run_case(p, c, params);
        bool expect = c.identity && c.op_ok && c.fresh && c.status && c.refresh;
        CAPTURE(bits);
        CHECK(r.accepted == expect);

        RejectReason want = RejectReason::None;
        if (!c.identity)
            want = RejectReason::WrongParty;
        else if (!c.op_ok)
            want = RejectReason::OpNotGranted;
        else if (!c.fresh)
            want = RejectReason::Expired;
        else if (!c.status)
            want = RejectReason::Revoked;
        else if (!c.refresh)
            want = RejectReason::RefreshExhausted;
        CHECK(r.reason == want);
    }
}

TEST_CASE("owner and service provider bypass every token conjunct") {
    Parties p;
    ChainParams params;
    for (unsigned bits = 0; bits < 32; ++bits) {
        TableCase c{(bits & 1) != 0, (bits & 2) != 0, (bits & 4) != 0, (bits & 8) != 0,
                    (bits & 16) != 0};
        for (const KeyPair* who : {&p.owner, &p.sp}) {
            LedgerState s;
            Digest32 token = sha256(std::string("bypass-token"));
            TokenRecord rec;
            rec.data_owner = p.owner.addr;
            rec.service_provider = p.sp.addr;
            rec.third_party = p.tp.addr;
            rec.issued_at = 1000;
            rec.expires_in = 3600;
            rec.permissions = c.op_ok ? kPermRead : kPermCreate;
            rec.status = c.status;
            rec.refresh_count = c.refresh ? 0 : params.refresh_threshold;
            s.put(token_key(token), rec.encode());

            ValidationPayload v;
            v.token = token;
            v.pk = who->addr;
            v.op = kPermRead;
            v.request_nonce = 7;
            v.t = sign(who->sk, validation_challenge(token, v.op, params.chain_id, v.request_nonce));
            ValidationReceipt r = run_validation(s, v, ExecContext{Digest32{}, c.fresh ? 2000u : 5000u},
                                                 params);
            CAPTURE(bits, who->addr.hex());
            CHECK(r.accepted);
            CHECK(get_token(s, token)->refresh_count ==
                  (c.refresh ? 1 : params.refresh_threshold + 1));
        }
    }
}

TEST_CASE("signature and token lookup precede every other check") {
    Parties p;
    ChainParams params;
    LedgerState s;

    Digest32 token = sha256(std::string("nope"));
    ValidationPayload v;
    v.token = token;
    v.pk = p.tp.addr;
    v.op = kPermRead;
    v.request_nonce = 1;
    v.t = sign(p.tp.sk, validation_challenge(token, v.op, params.chain_id, v.request_nonce));

    // valid signature, no token record
    ValidationReceipt r = run_validation(s, v, ExecContext{}, params);
    CHECK_FALSE(r.accepted);
    CHECK(r.reason == RejectReason::UnknownToken);

    // corrupt signature beats everything, even an unknown token
    ValidationPayload bad = v;
    bad.t.b[40] ^= 1;
    r = run_validation(s, bad, ExecContext{}, params);
    CHECK(r.reason == RejectReason::BadSignature);

    // signature over a different nonce is a bad signature (challenge binds it)
    ValidationPayload replay = v;
    replay.request_nonce = 2;
    r = run_validation(s, replay, ExecContext{}, params);
    CHECK(r.reason == RejectReason::BadSignature);
}

TEST_CASE("refresh threshold exhausts after the configured number of validations") {
    Parties p;
    ChainParams params;
    params.refresh_threshold = 3;
    LedgerState s = registered_state(p);
    ExecContext ctx{sha256(std::string("b")), 10};
    apply(s, make_signed_tx(p.owner, 2, grant_rcud(p, kPermRead)), ctx, params);
    apply(s, make_signed_tx(p.tp, 2, TokenRequestPayload{p.owner.addr, p.sp.addr, kPermRead}), ctx,
          params);
    Digest32 token = get_access(s, p.owner.addr, p.sp.addr, p.tp.addr)->access_token;

    auto validate = [&](std::uint64_t nonce) {
        ValidationPayload v;
        v.token = token;
        v.pk = p.tp.addr;
        v.op = kPermRead;
        v.request_nonce = nonce;
        v.t = sign(p.tp.sk, validation_challenge(token, v.op, params.chain_id, nonce));
        return run_validation(s, v, ExecContext{ctx.parent_hash, 20}, params);
    };

    for (std::uint64_t i = 0; i < 3; ++i) {
        CAPTURE(i);
        CHECK(validate(i).accepted);
    }
    ValidationReceipt last = validate(99);
    CHECK_FALSE(last.accepted);
    CHECK(last.reason == RejectReason::RefreshExhausted);
    CHECK(get_token(s, token)->refresh_count == 3);
}

TEST_CASE("revocation kills the live token and a new request resets it") {
    Parties p;
    ChainParams params;
    LedgerState s = registered_state(p);
    ExecContext ctx1{sha256(std::string("b1")), 10};
    apply(s, make_signed_tx(p.owner, 2, grant_rcud(p, kPermRead)), ctx1, params);
    apply(s, make_signed_tx(p.tp, 2, TokenRequestPayload{p.owner.addr, p.sp.addr, kPermRead}), ctx1,
          params);
    Digest32 tok1 = get_access(s, p.owner.addr, p.sp.addr, p.tp.addr)->access_token;

    apply(s, make_signed_tx(p.owner, 3, RevokePayload{p.sp.addr, p.tp.addr}), ctx1, params);
    auto access = get_access(s, p.owner.addr, p.sp.addr, p.tp.addr);
    CHECK(access->permission == 0);
    CHECK_FALSE(get_token(s, tok1)->status);

    ValidationPayload v;
    v.token = tok1;
    v.pk = p.tp.addr;
    v.op = kPermRead;
    v.request_nonce = 5;
    v.t = sign(p.tp.sk, validation_challenge(tok1, v.op, params.chain_id, 5));
    CHECK(run_validation(s, v, ExecContext{ctx1.parent_hash, 20}, params).reason ==
          RejectReason::Revoked);

    // token request now fails the permission precheck
    CHECK(precheck(s, make_signed_tx(p.tp, 3, TokenRequestPayload{p.owner.addr, p.sp.addr,
                                                                  kPermRead})) ==
          Errc::PermissionDenied);

    // a fresh grant and request rotate to a new, working token
    apply(s, make_signed_tx(p.owner, 4, grant_rcud(p, kPermRead)), ctx1, params);
    ExecContext ctx2{sha256(std::string("b2")), 30};
    apply(s, make_signed_tx(p.tp, 3, TokenRequestPayload{p.owner.addr, p.sp.addr, kPermRead}), ctx2,
          params);
    Digest32 tok2 = get_access(s, p.owner.addr, p.sp.addr, p.tp.addr)->access_token;
    CHECK(tok2 != tok1);
    CHECK_FALSE(get_token(s, tok1).has_value());  // rotated out
    CHECK(get_token(s, tok2)->status);
    CHECK(get_token(s, tok2)->refresh_count == 0);
    CHECK(ledger_integrity_violations(s).empty());
}

TEST_CASE("token re-issuance rotates the key and keeps one live token per triple") {
    Parties p;
    ChainParams params;
    LedgerState s = registered_state(p);
    ExecContext ctx{sha256(std::string("p0")), 1};
    apply(s, make_signed_tx(p.owner, 2, grant_rcud(p, kPermRead)), ctx, params);

    std::set<std::array<std::uint8_t, 32>> seen;
    Digest32 prev{};
    for (int i = 0; i < 50; ++i) {
        ExecContext c{sha256("parent-" + std::to_string(i)), 100u + static_cast<unsigned>(i)};
        apply(s, make_signed_tx(p.tp, 10 + i, TokenRequestPayload{p.owner.addr, p.sp.addr, kPermRead}),
              c, params);
        Digest32 tok = get_access(s, p.owner.addr, p.sp.addr, p.tp.addr)->access_token;
        CHECK(tok == derive_token(p.owner.addr, p.sp.addr, p.tp.addr, c.parent_hash));
        seen.insert(tok.b);
        if (i > 0) CHECK_FALSE(get_token(s, prev).has_value());
        prev = tok;
        CHECK(ledger_integrity_violations(s).empty());
    }
    CHECK(seen.size() == 50);
}

TEST_CASE("token derivation is the hash of the concatenated triple and parent hash") {
    Parties p;
    Digest32 parent = sha256(std::string("parent"));
    Bytes cat;
    cat.insert(cat.end(), p.owner.addr.b.begin(), p.owner.addr.b.end());
    cat.insert(cat.end(), p.sp.addr.b.begin(), p.sp.addr.b.end());
    cat.insert(cat.end(), p.tp.addr.b.begin(), p.tp.addr.b.end());
    cat.insert(cat.end(), parent.b.begin(), parent.b.end());
    CHECK(derive_token(p.owner.addr, p.sp.addr, p.tp.addr, parent) == sha256(cat));
}

TEST_CASE("integrity scan spots dangling and cross-wired tokens") {
    Parties p;
    ChainParams params;
    LedgerState s = registered_state(p);
    ExecContext ctx{sha256(std::string("x")), 1};
    apply(s, make_signed_tx(p.owner, 2, grant_rcud(p, kPermRead)), ctx, params);
    apply(s, make_signed_tx(p.tp, 2, TokenRequestPayload{p.owner.addr, p.sp.addr, kPermRead}), ctx,
          params);
    REQUIRE(ledger_integrity_violations(s).empty());
    Digest32 tok = get_access(s, p.owner.addr, p.sp.addr, p.tp.addr)->access_token;

    SECTION("deleting the token record dangles the access record") {
        s.erase(token_key(tok));
        auto v = ledger_integrity_violations(s);
        REQUIRE(v.size() == 1);
        CHECK(v[0].find("missing token") != std::string::npos);
    }
    SECTION("rewriting the token to another triple is flagged") {
        TokenRecord rec = *get_token(s, tok);
        rec.third_party = p.stranger.addr;
        s.put(token_key(tok), rec.encode());
        auto v = ledger_integrity_violations(s);
        REQUIRE(v.size() == 1);
        CHECK(v[0].find("different triple") != std::string::npos);
    }
}

TEST_CASE("apply rejects a proposal whose precondition fails, without side effects") {
    Parties p;
    ChainParams params;
    LedgerState s = registered_state(p);
    Digest32 before = s.root();
    try {
        apply(s, make_signed_tx(p.sp, 2, grant_rcud(p, kPermRead)), ExecContext{}, params);
        FAIL("expected a throw");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::NotOwner);
    }
    CHECK(s.root() == before);
}
