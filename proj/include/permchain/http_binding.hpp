#pragma once

// HTTP front for the resource server. Credentials travel in headers:
//   X-Party          requesting party's address, 40 hex chars
//   X-Signature      96-byte signature envelope, 192 hex chars
//   X-Access-Token   token digest, 64 hex chars
//   X-Op             requested operation bit, 1-2 hex chars
//   X-Request-Nonce  RS-issued nonce, decimal
// GET /nonce hands out the nonce; the document API lives under
// /ClinicalDataManagement.

#include <memory>
#include <string>
#include <thread>

#include "permchain/resource_server.hpp"

#include <httplib.h>
#include <json.hpp>

namespace permchain::http {

template <std::size_t N>
inline bool parse_hex_fixed(const std::string& s, FixedBytes<N>& out) {
    if (s.size() != 2 * N) return false;
    try {
        out = FixedBytes<N>::from_hex(s);
    } catch (const Error&) {
        return false;
    }
    return true;
}

inline void send_json(httplib::Response& res, int status, const nlohmann::json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

inline void bind_routes(httplib::Server& svr, ResourceServer& rs) {
    svr.Get("/nonce", [&rs](const httplib::Request&, httplib::Response& res) {
        send_json(res, 200, {{"nonce", rs.issue_nonce()}});
    });

    auto handler = [&rs](const httplib::Request& hreq, httplib::Response& hres) {
        auto bad = [&](const std::string& msg) { send_json(hres, 400, {{"error", msg}}); };

        ApiRequest req;
        req.method = hreq.method;
        req.endpoint = hreq.path;

        if (!parse_hex_fixed(hreq.get_header_value("X-Party"), req.party))
            return bad("X-Party must be 40 hex characters");
        if (!parse_hex_fixed(hreq.get_header_value("X-Signature"), req.t))
            return bad("X-Signature must be 192 hex characters");
        if (!parse_hex_fixed(hreq.get_header_value("X-Access-Token"), req.access_token))
            return bad("X-Access-Token must be 64 hex characters");

        std::string op = hreq.get_header_value("X-Op");
        if (op.empty() || op.size() > 2) return bad("X-Op must be 1-2 hex characters");
        unsigned v = 0;
        for (char c : op) {
            int nib = hex_nibble(c);
            if (nib < 0) return bad("X-Op must be 1-2 hex characters");
            v = v * 16 + static_cast<unsigned>(nib);
        }
        req.op = static_cast<std::uint8_t>(v);

        std::string nonce = hreq.get_header_value("X-Request-Nonce");
        if (nonce.empty() || nonce.find_first_not_of("0123456789") != std::string::npos)
            return bad("X-Request-Nonce must be a decimal integer");
        try {
            req.request_nonce = std::stoull(nonce);
        } catch (const std::exception&) {
            return bad("X-Request-Nonce must be a decimal integer");
        }

        if (!hreq.body.empty()) {
            try {
                req.body = nlohmann::json::parse(hreq.body);
            } catch (const nlohmann::json::exception& e) {
                return bad(std::string("request body: ") + e.what());
            }
        }

        ApiResponse r = rs.handle(req);
        send_json(hres, r.status, r.body);
    };

    svr.Post("/ClinicalDataManagement", handler);
    svr.Get(R"(/ClinicalDataManagement/([^/]+))", handler);
    svr.Put(R"(/ClinicalDataManagement/([^/]+))", handler);
    svr.Delete(R"(/ClinicalDataManagement/([^/]+))", handler);
}

struct HttpServer {
    httplib::Server svr;
    std::thread th;
    int port = 0;

    void stop() {
        svr.stop();
        if (th.joinable()) th.join();
    }

    ~HttpServer() { stop(); }
};

// port 0 binds an ephemeral port; the chosen one is in handle->port.
inline std::unique_ptr<HttpServer> start_server(ResourceServer& rs, const std::string& host,
                                                int port) {
    auto h = std::make_unique<HttpServer>();
    bind_routes(h->svr, rs);
    if (port == 0) {
        h->port = h->svr.bind_to_any_port(host);
        if (h->port < 0) throw Error(Errc::ConfigInvalid, "cannot bind " + host);
    } else {
        if (!h->svr.bind_to_port(host, port))
            throw Error(Errc::ConfigInvalid, "cannot bind " + host + ":" + std::to_string(port));
        h->port = port;
    }
    h->th = std::thread([s = h.get()] { s->svr.listen_after_bind(); });
    h->svr.wait_until_ready();
    return h;
}

}  // namespace permchain::http
