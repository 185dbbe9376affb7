#pragma once

// Honest-but-curious resource server for clinical trial documents. It serves
// a CRUD API, but will not release or modify a document until the chain (or a
// local dry run against chain state) has accepted a token validation for the
// request. One RS-issued nonce per request keeps validations unreplayable.

#include <mutex>
#include <random>
#include <string>
#include <unordered_set>
#include <utility>

#include "permchain/chain.hpp"
#include "permchain/contract.hpp"
#include "permchain/docstore.hpp"
#include "permchain/tx.hpp"

#include <json.hpp>

namespace permchain {

enum class ValidationMode {
    Committed,  // validation tx is mined; the on-chain receipt gates the response
    DryRun,     // validation runs against a state snapshot; the tx is still submitted
};

struct ApiRequest {
    std::string method;    // POST | GET | PUT | DELETE
    std::string endpoint;  // /ClinicalDataManagement[/<patient_id>]
    Address party;
    Signature t;  // signature over the validation challenge
    Digest32 access_token;
    std::uint8_t op = 0;
    std::uint64_t request_nonce = 0;
    nlohmann::json body;
};

struct ApiResponse {
    int status = 0;
    nlohmann::json body;
};

struct RsCounters {
    std::uint64_t requests_total = 0;
    std::uint64_t nonces_issued = 0;
    std::uint64_t accepted_validations = 0;
    std::uint64_t rejected_validations = 0;
    std::uint64_t served_responses = 0;
};

inline void to_json(nlohmann::json& j, const RsCounters& c) {
    j = {{"requests_total", c.requests_total},
         {"nonces_issued", c.nonces_issued},
         {"accepted_validations", c.accepted_validations},
         {"rejected_validations", c.rejected_validations},
         {"served_responses", c.served_responses}};
}

// How the RS reaches the chain. Implementations throw Error when the chain
// cannot be reached or the validation cannot be committed; that surfaces as
// a 503, never as a served document.
class ChainClient {
  public:
    virtual ~ChainClient() = default;
    virtual ChainParams params() = 0;
    virtual LedgerState state_snapshot() = 0;
    virtual std::pair<Digest32, std::uint64_t> tip_info() = 0;  // hash, timestamp
    virtual std::uint64_t account_nonce(const Address& a) = 0;
    virtual ValidationReceipt commit_validation(const TransactionProposal& tx) = 0;
    virtual void submit_only(const TransactionProposal& tx) = 0;
};

// Chain in the same process, mutex-serialized. commit_validation mines
// immediately so a receipt is available; anything else in the mempool rides
// along.
class InProcessChainClient : public ChainClient {
  public:
    explicit InProcessChainClient(Chain& chain) : chain_(chain), rng_(0x724f5321) {}

    ChainParams params() override {
        std::lock_guard lk(mu_);
        return chain_.params();
    }

    LedgerState state_snapshot() override {
        std::lock_guard lk(mu_);
        return chain_.state();
    }

    std::pair<Digest32, std::uint64_t> tip_info() override {
        std::lock_guard lk(mu_);
        return {chain_.tip().block_hash, chain_.tip().timestamp};
    }

    std::uint64_t account_nonce(const Address& a) override {
        std::lock_guard lk(mu_);
        return committed_nonce(chain_.state(), a);
    }

    ValidationReceipt commit_validation(const TransactionProposal& tx) override {
        std::lock_guard lk(mu_);
        if (!chain_.submit(tx))
            throw Error(Errc::InvalidTransaction, "chain rejected validation transaction");
        Block b = chain_.mine_block(512, rng_, chain_.tip().timestamp + 1);
        if (!chain_.validate_block(b))
            throw Error(Errc::InvalidTransaction, "mined block failed validation");
        auto receipt = get_receipt(chain_.state(), tx.digest());
        if (!receipt)
            throw Error(Errc::NoSuchRecord, "validation transaction was not committed");
        return *receipt;
    }

    void submit_only(const TransactionProposal& tx) override {
        std::lock_guard lk(mu_);
        chain_.submit(tx);
    }

  private:
    Chain& chain_;
    std::mutex mu_;
    std::mt19937_64 rng_;
};

class ResourceServer {
  public:
    ResourceServer(DocumentStore& store, ChainClient& chain, KeyPair identity,
                   ValidationMode mode = ValidationMode::Committed)
        : store_(store), chain_(chain), identity_(std::move(identity)), mode_(mode) {}

    Address address() const { return address_of(identity_.pk); }
    ValidationMode mode() const { return mode_; }

    std::uint64_t issue_nonce() {
        std::lock_guard lk(mu_);
        std::uint64_t n = ++last_nonce_;
        outstanding_.insert(n);
        ++counters_.nonces_issued;
        return n;
    }

    RsCounters counters() const {
        std::lock_guard lk(mu_);
        return counters_;
    }

    ApiResponse handle(const ApiRequest& req) {
        std::lock_guard lk(mu_);
        ++counters_.requests_total;

        std::string pid;
        if (auto bad = parse_endpoint(req, pid)) return *bad;

        if (!outstanding_.erase(req.request_nonce))
            return fail(400, "unknown or reused request nonce");

        ValidationReceipt receipt;
        try {
            receipt = validate(req);
        } catch (const Error& e) {
            return fail(503, std::string("chain unreachable: ") + e.what());
        }
        if (!receipt.accepted) {
            ++counters_.rejected_validations;
            return {403, {{"error", "validation rejected"},
                          {"reason", reject_reason_name(receipt.reason)}}};
        }
        ++counters_.accepted_validations;

        ApiResponse res = perform(req, pid);
        if (res.status == 200) ++counters_.served_responses;
        return res;
    }

  private:
    static ApiResponse fail(int status, const std::string& msg) {
        return {status, {{"error", msg}}};
    }

    std::optional<ApiResponse> parse_endpoint(const ApiRequest& req, std::string& pid) const {
        static const std::string prefix = "/ClinicalDataManagement";
        if (req.endpoint.compare(0, prefix.size(), prefix) != 0)
            return fail(400, "unknown endpoint \"" + req.endpoint + "\"");
        std::string rest = req.endpoint.substr(prefix.size());
        if (!rest.empty()) {
            if (rest[0] != '/' || rest.size() < 2 || rest.find('/', 1) != std::string::npos)
                return fail(400, "unknown endpoint \"" + req.endpoint + "\"");
            pid = rest.substr(1);
        }

        std::uint8_t required = 0;
        if (req.method == "POST")
            required = kPermCreate;
        else if (req.method == "GET")
            required = kPermRead;
        else if (req.method == "PUT")
            required = kPermUpdate;
        else if (req.method == "DELETE")
            required = kPermDelete;
        else
            return fail(400, "unsupported method \"" + req.method + "\"");

        if (req.op != required) return fail(400, "op does not match method");
        if (req.method == "POST" && !pid.empty())
            return fail(400, "create takes no patient id in the path");
        if (req.method != "POST" && pid.empty())
            return fail(400, "missing patient id in the path");
        return std::nullopt;
    }

    ValidationReceipt validate(const ApiRequest& req) {
        ValidationPayload p;
        p.token = req.access_token;
        p.pk = req.party;
        p.t = req.t;
        p.op = req.op;
        p.request_nonce = req.request_nonce;

        Address self = address_of(identity_.pk);
        std::uint64_t nonce = std::max(chain_.account_nonce(self), last_tx_nonce_) + 1;
        last_tx_nonce_ = nonce;
        TransactionProposal tx = make_signed_tx(identity_, nonce, p);

        if (mode_ == ValidationMode::Committed) return chain_.commit_validation(tx);

        LedgerState snapshot = chain_.state_snapshot();
        auto [tip_hash, tip_ts] = chain_.tip_info();
        ExecContext ctx{tip_hash, tip_ts + 1};
        ValidationReceipt receipt = run_validation(snapshot, p, ctx, chain_.params());
        chain_.submit_only(tx);  // the audit record still lands on chain
        return receipt;
    }

    ApiResponse perform(const ApiRequest& req, const std::string& pid) {
        if (req.method == "POST" || req.method == "PUT") {
            ClinicalTrialDocument doc;
            try {
                doc = document_from_json(req.body);
            } catch (const Error& e) {
                return fail(400, e.what());
            }
            if (req.method == "POST") {
                if (store_.create(doc) == Errc::DuplicateId)
                    return fail(409, "document already exists: " + doc.patient_id);
            } else {
                if (doc.patient_id != pid)
                    return fail(400, "patient_id in body does not match the path");
                if (store_.update(doc) == Errc::NotFound)
                    return fail(404, "no such document: " + pid);
            }
            return {200, {{"patient_id", doc.patient_id}, {"data_hash", document_hash(doc).hex()}}};
        }
        if (req.method == "GET") {
            auto doc = store_.get(pid);
            if (!doc) return fail(404, "no such document: " + pid);
            return {200, nlohmann::json(*doc)};
        }
        // DELETE
        if (store_.remove(pid) == Errc::NotFound) return fail(404, "no such document: " + pid);
        return {200, {{"deleted", pid}}};
    }

    DocumentStore& store_;
    ChainClient& chain_;
    KeyPair identity_;
    ValidationMode mode_;
    mutable std::mutex mu_;
    std::unordered_set<std::uint64_t> outstanding_;
    std::uint64_t last_nonce_ = 0;
    std::uint64_t last_tx_nonce_ = 0;
    RsCounters counters_;
};

}  // namespace permchain
