#include "pckad/protocol.hpp"

#include <stdexcept>

namespace pckad {

namespace {

// RFC 9110 token characters.
bool is_tchar(unsigned char c) {
    if ((c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z')) return true;
    switch (c) {
        case '!': case '#': case '$': case '%': case '&': case '\'': case '*':
        case '+': case '-': case '.': case '^': case '_': case '`': case '|': case '~':
            return true;
        default:
            return false;
    }
}

bool is_digit(char c) { return c >= '0' && c <= '9'; }

// <TOKEN> SP <target> SP HTTP/<d>.<d> CRLF at the start of the payload.
RelevanceResult http_request_line(BytesView payload) {
    const auto eol = payload.find("\r\n");
    if (eol == BytesView::npos) return MalformedSignal{"request line not terminated by CRLF"};
    const BytesView line = payload.substr(0, eol);

    std::size_t pos = 0;
    while (pos < line.size() && is_tchar(static_cast<unsigned char>(line[pos]))) ++pos;
    if (pos == 0) return MalformedSignal{"missing request method"};
    if (pos >= line.size() || line[pos] != ' ') return MalformedSignal{"method not followed by a single space"};
    ++pos;

    const std::size_t target_begin = pos;
    while (pos < line.size() && line[pos] != ' ') ++pos;
    if (pos == target_begin) return MalformedSignal{"empty request target"};
    if (pos >= line.size()) return MalformedSignal{"missing HTTP version"};
    ++pos;

    const BytesView version = line.substr(pos);
    if (version.size() != 8 || !version.starts_with("HTTP/") || !is_digit(version[5]) ||
        version[6] != '.' || !is_digit(version[7])) {
        return MalformedSignal{"bad HTTP version"};
    }

    RelevantPayload relevant;
    relevant.components.emplace_back(payload.substr(0, eol + 2));
    relevant.total_len = eol + 2;
    return relevant;
}

}  // namespace

double default_score_threshold(Protocol protocol) {
    return protocol == Protocol::ftp ? 40.0 : 30.0;
}

std::uint16_t default_port(Protocol protocol) {
    return protocol == Protocol::ftp ? 21 : 80;
}

std::string_view protocol_name(Protocol protocol) {
    return protocol == Protocol::ftp ? "ftp" : "http";
}

std::optional<Protocol> parse_protocol(std::string_view name) {
    if (name == "ftp") return Protocol::ftp;
    if (name == "http") return Protocol::http;
    return std::nullopt;
}

std::optional<Protocol> protocol_for_port(std::uint16_t port) {
    switch (port) {
        case 80: return Protocol::http;
        case 21: return Protocol::ftp;
        default: return std::nullopt;
    }
}

RelevanceResult extract_relevant(Protocol protocol, BytesView payload) {
    if (payload.empty()) throw std::invalid_argument("extract_relevant: empty payload");
    if (protocol == Protocol::http) return http_request_line(payload);

    RelevantPayload relevant;
    relevant.components.emplace_back(payload);
    relevant.total_len = payload.size();
    return relevant;
}

}  // namespace pckad
