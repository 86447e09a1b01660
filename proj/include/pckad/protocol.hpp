#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "pckad/bytes.hpp"

namespace pckad {

enum class Protocol { http, ftp };

// Alert threshold on the anomaly score, in percent.
double default_score_threshold(Protocol protocol);
std::uint16_t default_port(Protocol protocol);
std::string_view protocol_name(Protocol protocol);
std::optional<Protocol> parse_protocol(std::string_view name);

// 80 -> HTTP, 21 -> FTP, anything else is not analyzed.
std::optional<Protocol> protocol_for_port(std::uint16_t port);

// The protocol-selected parts of a payload that are analyzed. Components are
// non-empty, in payload order, and each is a contiguous slice of the payload.
struct RelevantPayload {
    std::vector<Bytes> components;
    std::size_t total_len = 0;
};

// The payload violates the protocol grammar. Raised as an alert by the detector.
struct MalformedSignal {
    std::string reason;
};

using RelevanceResult = std::variant<RelevantPayload, MalformedSignal>;

// HTTP keeps only the request line (CRLF included); FTP keeps the whole payload.
// Throws std::invalid_argument on an empty payload.
RelevanceResult extract_relevant(Protocol protocol, BytesView payload);

}  // namespace pckad
