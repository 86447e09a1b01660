#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "pckad/bytes.hpp"

namespace pckad {

struct Label {
    enum class Kind { legit, attack };

    Kind kind = Kind::legit;
    std::string instance_id;  // empty for legit

    static Label legit() { return {}; }
    static Label attack(std::string id) { return {Kind::attack, std::move(id)}; }

    bool is_attack() const { return kind == Kind::attack; }

    // "legit" or "attack:<id>"
    std::string to_string() const;
    static std::optional<Label> parse(std::string_view text);

    friend bool operator==(const Label&, const Label&) = default;
};

// One captured packet. The packet, not the stream, is the unit of analysis.
struct PacketRecord {
    std::uint64_t id = 0;
    std::uint16_t dst_port = 0;
    Bytes payload;
    std::optional<Label> label;
    std::optional<std::int64_t> ts;  // microseconds since epoch
};

struct Ipv4Prefix {
    std::uint32_t address = 0;  // host byte order
    int length = 0;

    bool contains(std::uint32_t addr) const;
    // "172.16.0.0/16"
    static Ipv4Prefix parse(std::string_view text);
};

struct TrafficFilter {
    std::set<std::uint16_t> ports;
    std::optional<Ipv4Prefix> dst_prefix;
    bool tcp_only = true;

    void validate() const;
    // "ports=21,80;prefix=172.16.0.0/16;tcp_only=true"; every key optional.
    // Callers fill in ports left unset before use.
    static TrafficFilter parse(std::string_view text);
};

struct IngestSummary {
    std::uint64_t frames = 0;
    std::uint64_t yielded = 0;
    std::uint64_t skipped_truncated = 0;
    std::uint64_t skipped_other = 0;  // non-IPv4, non-TCP, filtered out
};

struct Corpus {
    std::vector<PacketRecord> records;
    IngestSummary summary;
};

// Classic libpcap capture, either byte order, micro- or nanosecond stamps,
// Ethernet link type. No reassembly or defragmentation.
Corpus read_pcap(const std::filesystem::path& path, const TrafficFilter& filter);

// One JSON object per line: port, payload_hex, optional label and ts.
Corpus read_jsonl(const std::filesystem::path& path);

std::size_t write_jsonl(const std::vector<PacketRecord>& records,
                        const std::filesystem::path& path);

// Dispatches on extension: ".pcap" goes through read_pcap with `filter`,
// anything else through read_jsonl.
Corpus read_corpus(const std::filesystem::path& path, const TrafficFilter& filter);

}  // namespace pckad
