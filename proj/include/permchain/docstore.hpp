#pragma once

// Off-chain storage for clinical trial documents. The chain never holds the
// data itself, only a pointer and a content hash; the store keeps the bytes
// and an append-only journal so its state can be rebuilt and audited.

#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "permchain/common.hpp"
#include "permchain/crypto.hpp"

#include <json.hpp>

namespace permchain {

struct ClinicalTrialDocument {
    std::string patient_id;
    std::string name;
    std::string contact;
    nlohmann::json data = nlohmann::json::object();
};

inline void to_json(nlohmann::json& j, const ClinicalTrialDocument& d) {
    j = {{"patient_id", d.patient_id}, {"name", d.name}, {"contact", d.contact}, {"data", d.data}};
}

inline bool operator==(const ClinicalTrialDocument& a, const ClinicalTrialDocument& b) {
    return a.patient_id == b.patient_id && a.name == b.name && a.contact == b.contact &&
           a.data == b.data;
}

inline ClinicalTrialDocument document_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw Error(Errc::ParseError, "document must be a JSON object");
    for (const char* key : {"patient_id", "name", "contact"}) {
        if (!j.contains(key) || !j.at(key).is_string())
            throw Error(Errc::ParseError, std::string("document field \"") + key + "\" must be a string");
    }
    ClinicalTrialDocument d;
    d.patient_id = j.at("patient_id").get<std::string>();
    d.name = j.at("name").get<std::string>();
    d.contact = j.at("contact").get<std::string>();
    if (d.patient_id.empty()) throw Error(Errc::ParseError, "patient_id must not be empty");
    if (j.contains("data")) {
        if (!j.at("data").is_object()) throw Error(Errc::ParseError, "document field \"data\" must be an object");
        d.data = j.at("data");
    }
    return d;
}

// nlohmann keeps object keys sorted, so dump() is a canonical encoding.
inline Bytes canonical_bytes(const ClinicalTrialDocument& d) {
    nlohmann::json j = d;
    std::string s = j.dump();
    return Bytes(s.begin(), s.end());
}

inline Digest32 document_hash(const ClinicalTrialDocument& d) { return sha256(canonical_bytes(d)); }

class DocumentStore {
  public:
    DocumentStore() = default;

    // With a journal path, existing entries are replayed and every later
    // mutation is appended and flushed before it is visible.
    explicit DocumentStore(const std::string& journal_path) : journal_path_(journal_path) {
        std::ifstream in(journal_path_);
        if (in) {
            std::string line;
            std::size_t lineno = 0;
            while (std::getline(in, line)) {
                ++lineno;
                if (line.empty()) continue;
                apply_journal_line(line, lineno);
            }
        }
        journal_.open(journal_path_, std::ios::app);
        if (!journal_)
            throw Error(Errc::ParseError, "cannot open journal for append: " + journal_path_);
    }

    Errc create(const ClinicalTrialDocument& d) {
        if (docs_.count(d.patient_id)) return Errc::DuplicateId;
        docs_[d.patient_id] = d;
        journal_append({{"op", "create"}, {"doc", d}});
        return Errc::Ok;
    }

    Errc update(const ClinicalTrialDocument& d) {
        auto it = docs_.find(d.patient_id);
        if (it == docs_.end()) return Errc::NotFound;
        it->second = d;
        journal_append({{"op", "update"}, {"doc", d}});
        return Errc::Ok;
    }

    Errc remove(const std::string& patient_id) {
        auto it = docs_.find(patient_id);
        if (it == docs_.end()) return Errc::NotFound;
        docs_.erase(it);
        journal_append({{"op", "delete"}, {"patient_id", patient_id}});
        return Errc::Ok;
    }

    std::optional<ClinicalTrialDocument> get(const std::string& patient_id) const {
        auto it = docs_.find(patient_id);
        if (it == docs_.end()) return std::nullopt;
        return it->second;
    }

    bool contains(const std::string& patient_id) const { return docs_.count(patient_id) != 0; }
    std::size_t size() const { return docs_.size(); }

    std::vector<std::string> ids() const {
        std::vector<std::string> out;
        out.reserve(docs_.size());
        for (const auto& [id, _] : docs_) out.push_back(id);
        return out;
    }

    // Loads a dataset (JSON array of documents). All documents are validated
    // before any is stored: a bad or duplicate entry leaves the store as it
    // was.
    std::size_t ingest(const nlohmann::json& dataset) {
        if (!dataset.is_array()) throw Error(Errc::ParseError, "dataset must be a JSON array");
        std::vector<ClinicalTrialDocument> parsed;
        std::map<std::string, bool> seen;
        for (const auto& item : dataset) {
            ClinicalTrialDocument d = document_from_json(item);
            if (seen.count(d.patient_id) || docs_.count(d.patient_id))
                throw Error(Errc::DuplicateId, "duplicate patient_id in dataset: " + d.patient_id);
            seen[d.patient_id] = true;
            parsed.push_back(std::move(d));
        }
        for (const auto& d : parsed) {
            docs_[d.patient_id] = d;
            journal_append({{"op", "create"}, {"doc", d}});
        }
        return parsed.size();
    }

    std::size_t ingest_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw Error(Errc::NotFound, "dataset file not found: " + path);
        nlohmann::json dataset;
        try {
            in >> dataset;
        } catch (const nlohmann::json::exception& e) {
            throw Error(Errc::ParseError, std::string("dataset parse error: ") + e.what());
        }
        return ingest(dataset);
    }

    bool operator==(const DocumentStore& other) const { return docs_ == other.docs_; }

  private:
    void apply_journal_line(const std::string& line, std::size_t lineno) {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw Error(Errc::ParseError,
                        "journal line " + std::to_string(lineno) + ": " + e.what());
        }
        std::string op = j.value("op", "");
        if (op == "create" || op == "update") {
            ClinicalTrialDocument d = document_from_json(j.at("doc"));
            docs_[d.patient_id] = d;
        } else if (op == "delete") {
            docs_.erase(j.at("patient_id").get<std::string>());
        } else {
            throw Error(Errc::ParseError,
                        "journal line " + std::to_string(lineno) + ": unknown op \"" + op + "\"");
        }
    }

    void journal_append(const nlohmann::json& entry) {
        if (!journal_.is_open()) return;
        journal_ << entry.dump() << '\n';
        journal_.flush();
    }

    std::map<std::string, ClinicalTrialDocument> docs_;
    std::string journal_path_;
    std::ofstream journal_;
};

}  // namespace permchain
