#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace pckad {

// Raw octet sequences are carried in std::string; no text encoding is implied.
using Bytes = std::string;
using BytesView = std::string_view;

// Lowercase hex, two digits per byte.
std::string hex_encode(BytesView bytes);

// Accepts upper or lower case. Returns nullopt on odd length or a non-hex digit.
std::optional<Bytes> hex_decode(std::string_view hex);

// Printable rendering for diagnostics: non-printable bytes become \xNN.
std::string escape_bytes(BytesView bytes);

}  // namespace pckad
