#pragma once

// Scripted end-to-end runs: a scenario file declares parties and a step list
// (register, grant, revoke, request_token, api_call, assert), the runner
// executes them against a fresh chain, document store and resource server,
// and emits a transcript. Schema errors (unknown actor, action, or assert
// kind, bad references) fail at parse time; a step whose outcome does not
// match its "expect" clause fails the run.

#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "permchain/audit.hpp"
#include "permchain/chain.hpp"
#include "permchain/resource_server.hpp"

#include <json.hpp>

namespace permchain {

// expected is a subset of actual: every key/element it names must be present
// and match; extra fields in actual are fine.
inline bool json_subset(const nlohmann::json& expected, const nlohmann::json& actual) {
    if (expected.is_object()) {
        if (!actual.is_object()) return false;
        for (auto it = expected.begin(); it != expected.end(); ++it) {
            if (!actual.contains(it.key())) return false;
            if (!json_subset(it.value(), actual.at(it.key()))) return false;
        }
        return true;
    }
    if (expected.is_array()) {
        if (!actual.is_array() || expected.size() != actual.size()) return false;
        for (std::size_t i = 0; i < expected.size(); ++i)
            if (!json_subset(expected[i], actual[i])) return false;
        return true;
    }
    return expected == actual;
}

inline std::uint8_t parse_roles(const nlohmann::json& arr) {
    if (!arr.is_array()) throw Error(Errc::ParseError, "roles must be an array");
    std::uint8_t bits = 0;
    for (const auto& r : arr) {
        std::string s = r.get<std::string>();
        if (s == "DO")
            bits |= kRoleDataOwner;
        else if (s == "SP")
            bits |= kRoleServiceProvider;
        else if (s == "TP")
            bits |= kRoleThirdParty;
        else
            throw Error(Errc::ParseError, "unknown role \"" + s + "\"");
    }
    return bits;
}

inline std::uint8_t parse_permission(const nlohmann::json& v) {
    if (v.is_number_unsigned()) {
        auto n = v.get<std::uint64_t>();
        if (n > 0x0F) throw Error(Errc::ParseError, "permission out of range");
        return static_cast<std::uint8_t>(n);
    }
    if (!v.is_string()) throw Error(Errc::ParseError, "permission must be a string or integer");
    std::uint8_t bits = 0;
    for (char c : v.get<std::string>()) {
        switch (c) {
            case 'C': bits |= kPermCreate; break;
            case 'R': bits |= kPermRead; break;
            case 'U': bits |= kPermUpdate; break;
            case 'D': bits |= kPermDelete; break;
            default: throw Error(Errc::ParseError, std::string("unknown permission letter '") + c + "'");
        }
    }
    return bits;
}

inline std::uint8_t parse_op(const nlohmann::json& v) {
    std::uint8_t bits = parse_permission(v);
    if (bits == 0 || (bits & (bits - 1)) != 0)
        throw Error(Errc::ParseError, "op must name exactly one of C, R, U, D");
    return bits;
}

inline Seed32 parse_seed(const nlohmann::json& v) {
    Seed32 s{};
    if (v.is_number_unsigned()) {
        std::uint64_t n = v.get<std::uint64_t>();
        for (int i = 0; i < 8; ++i) s.b[31 - i] = static_cast<std::uint8_t>(n >> (8 * i));
        return s;
    }
    if (!v.is_string()) throw Error(Errc::ParseError, "seed must be an integer or a hex string");
    std::string hex = v.get<std::string>();
    if (hex.size() > 64 || hex.size() % 2 != 0)
        throw Error(Errc::ParseError, "seed hex must be at most 64 characters, even length");
    Bytes raw = from_hex(hex);
    std::copy(raw.begin(), raw.end(), s.b.begin() + (32 - raw.size()));
    return s;
}

struct ScenarioResult {
    bool ok = true;
    std::vector<std::string> failures;
    nlohmann::json transcript;
};

class ScenarioRunner {
  public:
    explicit ScenarioRunner(const nlohmann::json& scenario, const std::string& base_dir = ".")
        : doc_(scenario), base_dir_(base_dir) {
        params_.pow_target = lenient_target();
        chain_ = std::make_unique<Chain>(params_);
        client_ = std::make_unique<InProcessChainClient>(*chain_);
        rs_identity_ = keypair_from_seed(sha256_seed("resource-server-identity"));
        rs_ = std::make_unique<ResourceServer>(store_, *client_, rs_identity_,
                                               ValidationMode::Committed);
        parse();
    }

    ScenarioResult run() {
        ScenarioResult result;
        result.transcript = {{"name", name_}, {"steps", nlohmann::json::array()}};

        // the RS signs validation transactions, so it is a registered party
        submit_and_mine(make_signed_tx(rs_identity_, 1, RegisterPayload{0}));
        if (!dataset_.empty()) store_.ingest_file(dataset_);

        const auto& steps = doc_.at("steps");
        for (std::size_t i = 0; i < steps.size(); ++i) {
            const auto& step = steps[i];
            nlohmann::json outcome = execute_step(i, step);
            nlohmann::json rec = {{"index", i},
                                  {"action", step.at("action").get<std::string>()},
                                  {"outcome", outcome}};
            if (step.contains("actor")) rec["actor"] = step.at("actor").get<std::string>();
            result.transcript["steps"].push_back(rec);
            if (step.contains("expect") && !json_subset(step.at("expect"), outcome)) {
                result.ok = false;
                result.failures.push_back("step " + std::to_string(i) + " (" +
                                          step.at("action").get<std::string>() +
                                          "): expected " + step.at("expect").dump() + ", got " +
                                          outcome.dump());
            }
        }

        result.transcript["final"] = {{"height", chain_->height()},
                                      {"state_root", chain_->state().root().hex()},
                                      {"rs_counters", rs_->counters()},
                                      {"ok", result.ok}};
        if (!result.failures.empty()) result.transcript["failures"] = result.failures;
        return result;
    }

    Chain& chain() { return *chain_; }
    DocumentStore& store() { return store_; }
    ResourceServer& rs() { return *rs_; }
    const std::string& name() const { return name_; }

    Address party_address(const std::string& name) const {
        return address_of(parties_.at(name).kp.pk);
    }

  private:
    struct Party {
        KeyPair kp;
        std::uint8_t roles = 0;
        std::uint64_t nonce = 0;
    };

    static Seed32 sha256_seed(const std::string& label) {
        Digest32 d = sha256(Bytes(label.begin(), label.end()));
        Seed32 s;
        s.b = d.b;
        return s;
    }

    void parse() {
        if (!doc_.is_object()) throw Error(Errc::ParseError, "scenario must be a JSON object");
        name_ = doc_.value("name", "unnamed");
        if (doc_.contains("dataset")) {
            std::filesystem::path p = doc_.at("dataset").get<std::string>();
            if (p.is_relative()) p = std::filesystem::path(base_dir_) / p;
            dataset_ = p.string();
        }
        if (!doc_.contains("parties") || !doc_.at("parties").is_array())
            throw Error(Errc::ParseError, "scenario needs a \"parties\" array");
        for (const auto& pj : doc_.at("parties")) {
            std::string pname = pj.at("name").get<std::string>();
            if (parties_.count(pname))
                throw Error(Errc::ParseError, "duplicate party \"" + pname + "\"");
            Party p;
            p.kp = keypair_from_seed(parse_seed(pj.at("seed")));
            p.roles = pj.contains("roles") ? parse_roles(pj.at("roles")) : 0;
            parties_[pname] = p;
        }
        if (!doc_.contains("steps") || !doc_.at("steps").is_array())
            throw Error(Errc::ParseError, "scenario needs a \"steps\" array");

        const auto& steps = doc_.at("steps");
        for (std::size_t i = 0; i < steps.size(); ++i) {
            const auto& step = steps[i];
            std::string action = step.value("action", "");
            static const std::vector<std::string> known = {"register", "grant", "revoke",
                                                           "request_token", "api_call", "assert"};
            if (std::find(known.begin(), known.end(), action) == known.end())
                throw Error(Errc::ParseError,
                            "step " + std::to_string(i) + ": unknown action \"" + action + "\"");
            if (action != "assert") {
                std::string actor = step.value("actor", "");
                if (!parties_.count(actor))
                    throw Error(Errc::ParseError, "step " + std::to_string(i) +
                                                      ": undeclared actor \"" + actor + "\"");
            }
            for (const char* field : {"sp", "tp", "do", "party"}) {
                if (step.contains(field) && step.at(field).is_string()) {
                    std::string who = step.at(field).get<std::string>();
                    if (!parties_.count(who))
                        throw Error(Errc::ParseError, "step " + std::to_string(i) +
                                                          ": undeclared party \"" + who + "\"");
                }
            }
            if (action == "api_call") {
                if (!step.contains("token_from"))
                    throw Error(Errc::ParseError,
                                "step " + std::to_string(i) + ": api_call needs token_from");
                std::size_t ref = step.at("token_from").get<std::size_t>();
                if (ref >= i || steps[ref].value("action", "") != "request_token")
                    throw Error(Errc::ParseError,
                                "step " + std::to_string(i) +
                                    ": token_from must reference an earlier request_token step");
            }
            if (action == "assert") {
                std::string check = step.value("check", "");
                static const std::vector<std::string> checks = {"audit", "rs_counters",
                                                                "ledger_integrity",
                                                                "response_document"};
                if (std::find(checks.begin(), checks.end(), check) == checks.end())
                    throw Error(Errc::ParseError, "step " + std::to_string(i) +
                                                      ": unknown check \"" + check + "\"");
            }
        }
    }

    nlohmann::json submit_and_mine(const TransactionProposal& tx) {
        if (!chain_->submit(tx)) {
            Errc why = precheck(chain_->state(), tx);
            return {{"ok", false},
                    {"error", why == Errc::Ok ? "invalid_transaction" : errc_name(why)}};
        }
        Block b = chain_->mine_block(512, rng_, chain_->tip().timestamp + 1);
        if (!chain_->validate_block(b)) return {{"ok", false}, {"error", "block_rejected"}};
        return {{"ok", true}, {"height", chain_->height()}};
    }

    nlohmann::json execute_step(std::size_t index, const nlohmann::json& step) {
        try {
            std::string action = step.at("action").get<std::string>();
            if (action == "register") return do_register(step);
            if (action == "grant") return do_grant(step);
            if (action == "revoke") return do_revoke(step);
            if (action == "request_token") return do_request_token(index, step);
            if (action == "api_call") return do_api_call(index, step);
            return do_assert(step);
        } catch (const Error& e) {
            return {{"ok", false}, {"error", errc_name(e.code())}, {"detail", e.what()}};
        } catch (const nlohmann::json::exception& e) {
            return {{"ok", false}, {"error", "parse_error"}, {"detail", e.what()}};
        }
    }

    Party& actor(const nlohmann::json& step) { return parties_.at(step.at("actor").get<std::string>()); }

    nlohmann::json do_register(const nlohmann::json& step) {
        Party& p = actor(step);
        RegisterPayload payload{step.contains("roles") ? parse_roles(step.at("roles")) : p.roles};
        return submit_and_mine(make_signed_tx(p.kp, ++p.nonce, payload));
    }

    nlohmann::json do_grant(const nlohmann::json& step) {
        Party& p = actor(step);
        GrantPayload g;
        g.service_provider = party_address(step.at("sp").get<std::string>());
        g.third_party = party_address(step.at("tp").get<std::string>());
        g.permission = parse_permission(step.at("permission"));
        if (step.contains("patient_id")) {
            std::string pid = step.at("patient_id").get<std::string>();
            auto doc = store_.get(pid);
            if (!doc) return {{"ok", false}, {"error", "not_found"}, {"detail", "no document " + pid}};
            g.data_pointer = "/ClinicalDataManagement/" + pid;
            g.data_hash = document_hash(*doc);
        } else {
            g.data_pointer = step.value("data_pointer", "");
            if (step.contains("data_hash"))
                g.data_hash.b = Digest32::from_hex(step.at("data_hash").get<std::string>()).b;
        }
        return submit_and_mine(make_signed_tx(p.kp, ++p.nonce, g));
    }

    nlohmann::json do_revoke(const nlohmann::json& step) {
        Party& p = actor(step);
        RevokePayload r;
        r.service_provider = party_address(step.at("sp").get<std::string>());
        r.third_party = party_address(step.at("tp").get<std::string>());
        return submit_and_mine(make_signed_tx(p.kp, ++p.nonce, r));
    }

    nlohmann::json do_request_token(std::size_t index, const nlohmann::json& step) {
        Party& p = actor(step);
        TokenRequestPayload t;
        t.data_owner = party_address(step.at("do").get<std::string>());
        t.service_provider = party_address(step.at("sp").get<std::string>());
        t.op = parse_op(step.at("op"));
        nlohmann::json outcome = submit_and_mine(make_signed_tx(p.kp, ++p.nonce, t));
        if (!outcome.value("ok", false)) return outcome;
        auto access = get_access(chain_->state(), t.data_owner, t.service_provider,
                                 address_of(p.kp.pk));
        if (!access || access->access_token.is_zero())
            return {{"ok", false}, {"error", "no_such_record"}};
        tokens_[index] = access->access_token;
        outcome["token"] = access->access_token.hex();
        return outcome;
    }

    nlohmann::json do_api_call(std::size_t index, const nlohmann::json& step) {
        Party& p = actor(step);
        ApiRequest req;
        req.method = step.at("method").get<std::string>();
        std::string pid = step.value("patient_id", "");
        req.endpoint = "/ClinicalDataManagement" + (pid.empty() ? "" : "/" + pid);
        req.op = parse_op(step.at("op"));
        std::size_t ref = step.at("token_from").get<std::size_t>();
        auto tok = tokens_.find(ref);
        if (tok == tokens_.end())
            return {{"ok", false}, {"error", "no_such_record"},
                    {"detail", "step " + std::to_string(ref) + " issued no token"}};
        req.access_token = tok->second;
        req.party = address_of(p.kp.pk);
        req.request_nonce = rs_->issue_nonce();
        Bytes challenge =
            validation_challenge(req.access_token, req.op, params_.chain_id, req.request_nonce);
        req.t = sign(p.kp.sk, challenge);
        if (step.contains("body")) req.body = step.at("body");

        ApiResponse res = rs_->handle(req);
        responses_[index] = res;
        return {{"status", res.status}, {"body", res.body}};
    }

    nlohmann::json do_assert(const nlohmann::json& step) {
        std::string check = step.at("check").get<std::string>();
        if (check == "audit") {
            Address who = party_address(step.at("party").get<std::string>());
            auto trail = audit_trail(*chain_, who);
            nlohmann::json actions = nlohmann::json::array();
            for (const auto& e : trail) actions.push_back(e.action);
            return {{"check", "audit"}, {"actions", actions}};
        }
        if (check == "rs_counters") {
            return {{"check", "rs_counters"}, {"counters", rs_->counters()}};
        }
        if (check == "ledger_integrity") {
            auto violations = ledger_integrity_violations(chain_->state());
            return {{"check", "ledger_integrity"}, {"violations", violations},
                    {"clean", violations.empty()}};
        }
        // response_document
        std::size_t ref = step.at("step").get<std::size_t>();
        auto it = responses_.find(ref);
        if (it == responses_.end())
            return {{"ok", false}, {"error", "no_such_record"},
                    {"detail", "step " + std::to_string(ref) + " recorded no response"}};
        std::string pid = step.at("patient_id").get<std::string>();
        auto doc = store_.get(pid);
        bool match = doc && it->second.status == 200 && nlohmann::json(*doc) == it->second.body;
        return {{"check", "response_document"}, {"match", match}};
    }

    nlohmann::json doc_;
    std::string base_dir_;
    std::string name_;
    std::string dataset_;
    ChainParams params_;
    std::unique_ptr<Chain> chain_;
    std::unique_ptr<InProcessChainClient> client_;
    DocumentStore store_;
    KeyPair rs_identity_;
    std::unique_ptr<ResourceServer> rs_;
    std::map<std::string, Party> parties_;
    std::map<std::size_t, Digest32> tokens_;
    std::map<std::size_t, ApiResponse> responses_;
    std::mt19937_64 rng_{0x5ce7a510};
};

inline nlohmann::json load_scenario_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::NotFound, "scenario file not found: " + path);
    try {
        nlohmann::json j;
        in >> j;
        return j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::ParseError, std::string("scenario parse error: ") + e.what());
    }
}

inline ScenarioResult run_scenario_file(const std::string& path) {
    nlohmann::json j = load_scenario_file(path);
    std::string dir = std::filesystem::path(path).parent_path().string();
    if (dir.empty()) dir = ".";
    ScenarioRunner runner(j, dir);
    return runner.run();
}

}  // namespace permchain
