#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace permchain {

using Bytes = std::vector<std::uint8_t>;

enum class Errc {
    Ok = 0,
    AlreadyRegistered,
    UnregisteredParty,
    EmptyPermission,
    NotOwner,
    NoSuchRecord,
    PermissionDenied,
    InvalidTransaction,
    MiningTimeout,
    DuplicateId,
    NotFound,
    ParseError,
    ConfigInvalid,
    UnknownAxis,
    DomainError,
    DecodeError,
};

inline const char* errc_name(Errc c) {
    switch (c) {
        case Errc::Ok: return "Ok";
        case Errc::AlreadyRegistered: return "AlreadyRegistered";
        case Errc::UnregisteredParty: return "UnregisteredParty";
        case Errc::EmptyPermission: return "EmptyPermission";
        case Errc::NotOwner: return "NotOwner";
        case Errc::NoSuchRecord: return "NoSuchRecord";
        case Errc::PermissionDenied: return "PermissionDenied";
        case Errc::InvalidTransaction: return "InvalidTransaction";
        case Errc::MiningTimeout: return "MiningTimeout";
        case Errc::DuplicateId: return "DuplicateId";
        case Errc::NotFound: return "NotFound";
        case Errc::ParseError: return "ParseError";
        case Errc::ConfigInvalid: return "ConfigInvalid";
        case Errc::UnknownAxis: return "UnknownAxis";
        case Errc::DomainError: return "DomainError";
        case Errc::DecodeError: return "DecodeError";
    }
    return "Unknown";
}

class Error : public std::runtime_error {
  public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

    Errc code() const { return code_; }

  private:
    Errc code_;
};

inline std::string to_hex(const std::uint8_t* p, std::size_t n) {
    static const char* digits = "0123456789abcdef";
    std::string out;
    out.reserve(n * 2);
    for (std::size_t i = 0; i < n; ++i) {
        out.push_back(digits[p[i] >> 4]);
        out.push_back(digits[p[i] & 0x0F]);
    }
    return out;
}

inline std::string to_hex(const Bytes& b) { return to_hex(b.data(), b.size()); }

inline int hex_nibble(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

inline Bytes from_hex(const std::string& s) {
    if (s.size() % 2 != 0) throw Error(Errc::ParseError, "odd-length hex string");
    Bytes out;
    out.reserve(s.size() / 2);
    for (std::size_t i = 0; i < s.size(); i += 2) {
        int hi = hex_nibble(s[i]);
        int lo = hex_nibble(s[i + 1]);
        if (hi < 0 || lo < 0) throw Error(Errc::ParseError, "invalid hex character");
        out.push_back(static_cast<std::uint8_t>((hi << 4) | lo));
    }
    return out;
}

}  // namespace permchain
