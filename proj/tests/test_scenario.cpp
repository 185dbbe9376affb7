#include <catch2/catch_amalgamated.hpp>

#include "permchain/scenario.hpp"

using namespace permchain;
using nlohmann::json;

#ifndef SCENARIOS_DIR
#define SCENARIOS_DIR "scenarios"
#endif

namespace {

json minimal(const char* steps) {
    json j = json::parse(R"({
        "name": "inline",
        "parties": [
            {"name": "ada", "roles": ["DO"], "seed": 1},
            {"name": "svc", "roles": ["SP"], "seed": 2},
            {"name": "lab", "roles": ["TP"], "seed": 3}
        ],
        "steps": []
    })");
    j["steps"] = json::parse(steps);
    return j;
}

}  // namespace

TEST_CASE("json_subset compares by containment") {
    CHECK(json_subset(json::parse(R"({"a":1})"), json::parse(R"({"a":1,"b":2})")));
    CHECK_FALSE(json_subset(json::parse(R"({"a":1,"b":2})"), json::parse(R"({"a":1})")));
    CHECK_FALSE(json_subset(json::parse(R"({"a":2})"), json::parse(R"({"a":1})")));
    CHECK(json_subset(json::parse(R"({"a":{"b":{"c":3}}})"),
                      json::parse(R"({"a":{"b":{"c":3,"d":4}},"e":5})")));
    CHECK(json_subset(json::parse(R"([1,2])"), json::parse(R"([1,2])")));
    CHECK_FALSE(json_subset(json::parse(R"([1])"), json::parse(R"([1,2])")));
    CHECK_FALSE(json_subset(json::parse(R"([2,1])"), json::parse(R"([1,2])")));
    CHECK(json_subset(json(3), json(3)));
    CHECK_FALSE(json_subset(json(3), json("3")));
    CHECK(json_subset(json::parse(R"([{"x":1}])"), json::parse(R"([{"x":1,"y":2}])")));
}

TEST_CASE("scenario field parsers") {
    CHECK(parse_permission(json("CRUD")) == kPermMask);
    CHECK(parse_permission(json("R")) == kPermRead);
    CHECK(parse_permission(json(9u)) == 9);
    CHECK_THROWS_AS(parse_permission(json(16u)), Error);
    CHECK_THROWS_AS(parse_permission(json("RX")), Error);
    CHECK_THROWS_AS(parse_permission(json(nullptr)), Error);

    CHECK(parse_op(json("U")) == kPermUpdate);
    CHECK_THROWS_AS(parse_op(json("RU")), Error);
    CHECK_THROWS_AS(parse_op(json(0u)), Error);
    CHECK_THROWS_AS(parse_op(json(3u)), Error);

    CHECK(parse_roles(json::parse(R"(["DO","TP"])")) == (kRoleDataOwner | kRoleThirdParty));
    CHECK(parse_roles(json::array()) == 0);
    CHECK_THROWS_AS(parse_roles(json::parse(R"(["ADMIN"])")), Error);
    CHECK_THROWS_AS(parse_roles(json("DO")), Error);

    Seed32 s = parse_seed(json(5u));
    CHECK(s.b[31] == 5);
    CHECK(s.b[30] == 0);
    s = parse_seed(json(0x0102u));
    CHECK(s.b[31] == 2);
    CHECK(s.b[30] == 1);
    s = parse_seed(json("ff00"));
    CHECK(s.b[31] == 0);
    CHECK(s.b[30] == 0xff);
    CHECK_THROWS_AS(parse_seed(json("abc")), Error);    // odd length
    CHECK_THROWS_AS(parse_seed(json(std::string(66, 'a'))), Error);
    CHECK_THROWS_AS(parse_seed(json(nullptr)), Error);

    // same seed value, either spelling, same key
    CHECK(keypair_from_seed(parse_seed(json(0xabcdu))).addr ==
          keypair_from_seed(parse_seed(json("abcd"))).addr);
}

TEST_CASE("the bundled happy path scenario holds") {
    ScenarioResult r = run_scenario_file(std::string(SCENARIOS_DIR) + "/clinical_happy_path.json");
    INFO(r.transcript.dump(2));
    CHECK(r.ok);
    CHECK(r.failures.empty());
    CHECK(r.transcript.at("final").at("ok") == true);
    CHECK(r.transcript.at("steps").size() == 10);
    CHECK(r.transcript.at("final").at("rs_counters").at("served_responses") == 1);
    CHECK_FALSE(r.transcript.contains("failures"));
}

TEST_CASE("the bundled revocation scenario holds") {
    ScenarioResult r = run_scenario_file(std::string(SCENARIOS_DIR) + "/revocation.json");
    INFO(r.transcript.dump(2));
    CHECK(r.ok);
    CHECK(r.failures.empty());
    CHECK(r.transcript.at("final").at("rs_counters").at("rejected_validations") == 1);
}

TEST_CASE("scenario replay is bit for bit deterministic") {
    std::string path = std::string(SCENARIOS_DIR) + "/clinical_happy_path.json";
    ScenarioResult a = run_scenario_file(path);
    ScenarioResult b = run_scenario_file(path);
    CHECK(a.transcript.dump() == b.transcript.dump());
    CHECK(a.transcript.at("final").at("state_root") == b.transcript.at("final").at("state_root"));
}

TEST_CASE("malformed scenarios are refused before anything runs") {
    SECTION("undeclared actor") {
        json j = minimal(R"([{"actor":"nobody","action":"register"}])");
        CHECK_THROWS_AS(ScenarioRunner(j), Error);
    }
    SECTION("undeclared referenced party") {
        json j = minimal(
            R"([{"actor":"ada","action":"grant","sp":"svc","tp":"ghost","permission":"R"}])");
        CHECK_THROWS_AS(ScenarioRunner(j), Error);
    }
    SECTION("unknown action") {
        json j = minimal(R"([{"actor":"ada","action":"frobnicate"}])");
        CHECK_THROWS_AS(ScenarioRunner(j), Error);
    }
    SECTION("token_from pointing nowhere useful") {
        json j = minimal(
            R"([{"actor":"ada","action":"register"},
                {"actor":"lab","action":"api_call","method":"GET","patient_id":"P1",
                 "op":"R","token_from":0}])");
        CHECK_THROWS_AS(ScenarioRunner(j), Error);
        json fwd = minimal(
            R"([{"actor":"lab","action":"api_call","method":"GET","patient_id":"P1",
                 "op":"R","token_from":5}])");
        CHECK_THROWS_AS(ScenarioRunner(fwd), Error);
        json none = minimal(
            R"([{"actor":"lab","action":"api_call","method":"GET","patient_id":"P1","op":"R"}])");
        CHECK_THROWS_AS(ScenarioRunner(none), Error);
    }
    SECTION("unknown assert check") {
        json j = minimal(R"([{"action":"assert","check":"vibes"}])");
        CHECK_THROWS_AS(ScenarioRunner(j), Error);
    }
    SECTION("duplicate party") {
        json j = minimal(R"([])");
        j["parties"].push_back({{"name", "ada"}, {"seed", 9}});
        CHECK_THROWS_AS(ScenarioRunner(j), Error);
    }
    SECTION("missing sections") {
        CHECK_THROWS_AS(ScenarioRunner(json::parse(R"({"steps":[]})")), Error);
        CHECK_THROWS_AS(ScenarioRunner(json::parse(R"({"parties":[]})")), Error);
        CHECK_THROWS_AS(ScenarioRunner(json(7)), Error);
    }
    SECTION("parse failures carry the right code") {
        try {
            ScenarioRunner r(minimal(R"([{"action":"assert","check":"vibes"}])"));
            FAIL("expected a throw");
        } catch (const Error& e) {
            CHECK(e.code() == Errc::ParseError);
        }
    }
}

TEST_CASE("expectation mismatches fail the run but keep the transcript") {
    json j = minimal(
        R"([{"actor":"ada","action":"register","expect":{"ok":true}},
            {"action":"assert","check":"rs_counters",
             "expect":{"counters":{"served_responses":99}}}])");
    ScenarioRunner runner(j);
    ScenarioResult r = runner.run();
    CHECK_FALSE(r.ok);
    REQUIRE(r.failures.size() == 1);
    CHECK(r.failures[0].find("step 1") != std::string::npos);
    CHECK(r.transcript.at("steps").size() == 2);
    CHECK(r.transcript.at("final").at("ok") == false);
    CHECK(r.transcript.contains("failures"));
}

TEST_CASE("runtime step errors are recorded, not thrown") {
    // grant referencing a dataset document that does not exist
    json j = minimal(
        R"([{"actor":"ada","action":"register"},
            {"actor":"svc","action":"register"},
            {"actor":"lab","action":"register"},
            {"actor":"ada","action":"grant","sp":"svc","tp":"lab","permission":"R",
             "patient_id":"P404","expect":{"ok":false}},
            {"actor":"lab","action":"request_token","do":"ada","sp":"svc","op":"R",
             "expect":{"ok":false,"error":"PermissionDenied"}}])");
    ScenarioRunner runner(j);
    ScenarioResult r = runner.run();
    INFO(r.transcript.dump(2));
    CHECK(r.ok);  // the failures were expected, so the scenario passes
    CHECK(runner.chain().height() == 4);  // rs registration + three registers

    CHECK(runner.party_address("ada") == keypair_from_seed(parse_seed(json(1u))).addr);
    CHECK_THROWS(runner.party_address("ghost"));
}
