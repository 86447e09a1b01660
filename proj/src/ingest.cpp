#include "pckad/ingest.hpp"

#include <array>
#include <charconv>
#include <fstream>

#include <json.hpp>

#include "pckad/error.hpp"

namespace pckad {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr std::uint32_t kPcapMagicMicro = 0xa1b2c3d4;
constexpr std::uint32_t kPcapMagicNano = 0xa1b23c4d;
constexpr std::uint32_t kLinkTypeEthernet = 1;
constexpr std::size_t kPcapGlobalHeaderLen = 24;
constexpr std::size_t kPcapRecordHeaderLen = 16;
constexpr std::size_t kEthernetHeaderLen = 14;
constexpr std::uint16_t kEtherTypeIpv4 = 0x0800;
constexpr std::uint8_t kIpProtoTcp = 6;
constexpr std::uint8_t kIpProtoUdp = 17;

std::uint32_t byteswap32(std::uint32_t v) {
    return ((v & 0x000000ffu) << 24) | ((v & 0x0000ff00u) << 8) |
           ((v & 0x00ff0000u) >> 8) | ((v & 0xff000000u) >> 24);
}

std::uint16_t load_be16(const unsigned char* p) {
    return static_cast<std::uint16_t>((p[0] << 8) | p[1]);
}

std::uint32_t load_be32(const unsigned char* p) {
    return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) |
           (std::uint32_t{p[2]} << 8) | std::uint32_t{p[3]};
}

std::uint32_t load_le32(const unsigned char* p) {
    return (std::uint32_t{p[3]} << 24) | (std::uint32_t{p[2]} << 16) |
           (std::uint32_t{p[1]} << 8) | std::uint32_t{p[0]};
}

template <typename Int>
Int parse_int(std::string_view text, std::string_view what) {
    Int value{};
    const auto* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (ec != std::errc{} || ptr != end) {
        throw ConfigError("invalid " + std::string(what) + ": '" + std::string(text) + "'");
    }
    return value;
}

std::vector<std::string_view> split(std::string_view text, char sep) {
    std::vector<std::string_view> parts;
    std::size_t start = 0;
    while (true) {
        const auto pos = text.find(sep, start);
        parts.push_back(text.substr(start, pos == std::string_view::npos ? pos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return parts;
}

enum class FrameOutcome { yielded, truncated, other };

struct DecodedSegment {
    std::uint16_t dst_port = 0;
    Bytes payload;
};

// Ethernet / IPv4 / TCP|UDP decapsulation of one captured frame.
FrameOutcome decode_frame(const unsigned char* data, std::size_t len,
                          const TrafficFilter& filter, DecodedSegment& out) {
    if (len < kEthernetHeaderLen) return FrameOutcome::truncated;
    if (load_be16(data + 12) != kEtherTypeIpv4) return FrameOutcome::other;
    const unsigned char* ip = data + kEthernetHeaderLen;
    const std::size_t ip_avail = len - kEthernetHeaderLen;
    if (ip_avail < 20) return FrameOutcome::truncated;
    if ((ip[0] >> 4) != 4) return FrameOutcome::other;
    const std::size_t ihl = static_cast<std::size_t>(ip[0] & 0x0f) * 4;
    if (ihl < 20) return FrameOutcome::other;
    const std::size_t total_len = load_be16(ip + 2);
    if (total_len < ihl || ip_avail < total_len || ip_avail < ihl) {
        return FrameOutcome::truncated;
    }
    const std::uint16_t frag = load_be16(ip + 6);
    if ((frag & 0x1fff) != 0) return FrameOutcome::other;  // non-first fragment
    const std::uint8_t proto = ip[9];
    const std::uint32_t dst_addr = load_be32(ip + 16);

    if (proto != kIpProtoTcp && (filter.tcp_only || proto != kIpProtoUdp)) {
        return FrameOutcome::other;
    }
    if (filter.dst_prefix && !filter.dst_prefix->contains(dst_addr)) return FrameOutcome::other;

    const unsigned char* l4 = ip + ihl;
    const std::size_t l4_len = total_len - ihl;
    std::size_t header_len = 0;
    if (proto == kIpProtoTcp) {
        if (l4_len < 20) return FrameOutcome::truncated;
        header_len = static_cast<std::size_t>(l4[12] >> 4) * 4;
        if (header_len < 20) return FrameOutcome::other;
        if (l4_len < header_len) return FrameOutcome::truncated;
    } else {
        if (l4_len < 8) return FrameOutcome::truncated;
        header_len = 8;
    }
    const std::uint16_t dst_port = load_be16(l4 + 2);
    if (!filter.ports.contains(dst_port)) return FrameOutcome::other;

    out.dst_port = dst_port;
    out.payload.assign(reinterpret_cast<const char*>(l4 + header_len), l4_len - header_len);
    return FrameOutcome::yielded;
}

}  // namespace

std::string Label::to_string() const {
    return kind == Kind::legit ? std::string("legit") : "attack:" + instance_id;
}

std::optional<Label> Label::parse(std::string_view text) {
    if (text == "legit") return Label::legit();
    constexpr std::string_view prefix = "attack:";
    if (text.starts_with(prefix) && text.size() > prefix.size()) {
        return Label::attack(std::string(text.substr(prefix.size())));
    }
    return std::nullopt;
}

bool Ipv4Prefix::contains(std::uint32_t addr) const {
    if (length == 0) return true;
    const std::uint32_t mask = length >= 32 ? 0xffffffffu : ~(0xffffffffu >> length);
    return (addr & mask) == (address & mask);
}

Ipv4Prefix Ipv4Prefix::parse(std::string_view text) {
    const auto slash = text.find('/');
    if (slash == std::string_view::npos) {
        throw ConfigError("prefix must be <a.b.c.d>/<len>: '" + std::string(text) + "'");
    }
    const auto octets = split(text.substr(0, slash), '.');
    if (octets.size() != 4) throw ConfigError("bad IPv4 address in '" + std::string(text) + "'");
    Ipv4Prefix prefix;
    for (auto octet : octets) {
        prefix.address = (prefix.address << 8) | parse_int<std::uint8_t>(octet, "IPv4 octet");
    }
    prefix.length = parse_int<int>(text.substr(slash + 1), "prefix length");
    if (prefix.length < 0 || prefix.length > 32) {
        throw ConfigError("prefix length must be 0-32");
    }
    return prefix;
}

void TrafficFilter::validate() const {
    if (ports.empty()) throw ConfigError("traffic filter needs at least one port");
    if (dst_prefix && (dst_prefix->length < 0 || dst_prefix->length > 32)) {
        throw ConfigError("prefix length must be 0-32");
    }
}

TrafficFilter TrafficFilter::parse(std::string_view text) {
    TrafficFilter filter;
    for (auto item : split(text, ';')) {
        if (item.empty()) continue;
        const auto eq = item.find('=');
        if (eq == std::string_view::npos) {
            throw ConfigError("filter item must be key=value: '" + std::string(item) + "'");
        }
        const auto key = item.substr(0, eq);
        const auto value = item.substr(eq + 1);
        if (key == "ports") {
            for (auto port : split(value, ',')) {
                filter.ports.insert(parse_int<std::uint16_t>(port, "port"));
            }
        } else if (key == "prefix") {
            filter.dst_prefix = Ipv4Prefix::parse(value);
        } else if (key == "tcp_only") {
            if (value != "true" && value != "false") throw ConfigError("tcp_only must be true|false");
            filter.tcp_only = value == "true";
        } else {
            throw ConfigError("unknown filter key '" + std::string(key) + "'");
        }
    }
    if (filter.dst_prefix && (filter.dst_prefix->length < 0 || filter.dst_prefix->length > 32)) {
        throw ConfigError("prefix length must be 0-32");
    }
    return filter;
}

Corpus read_pcap(const std::filesystem::path& path, const TrafficFilter& filter) {
    filter.validate();
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IngestError("cannot open pcap '" + path.string() + "'");

    std::array<unsigned char, kPcapGlobalHeaderLen> global{};
    if (!in.read(reinterpret_cast<char*>(global.data()), global.size())) {
        throw IngestError("'" + path.string() + "' is too short to be a pcap file");
    }
    const std::uint32_t raw_magic = load_le32(global.data());
    bool swapped = false;
    bool nanos = false;
    if (raw_magic == kPcapMagicMicro || raw_magic == kPcapMagicNano) {
        nanos = raw_magic == kPcapMagicNano;
    } else if (byteswap32(raw_magic) == kPcapMagicMicro || byteswap32(raw_magic) == kPcapMagicNano) {
        swapped = true;
        nanos = byteswap32(raw_magic) == kPcapMagicNano;
    } else {
        throw IngestError("'" + path.string() + "' is not a classic pcap file");
    }
    auto field32 = [swapped](const unsigned char* p) {
        const std::uint32_t v = load_le32(p);
        return swapped ? byteswap32(v) : v;
    };
    const std::uint32_t link_type = field32(global.data() + 20);
    if (link_type != kLinkTypeEthernet) {
        throw IngestError("unsupported pcap link type " + std::to_string(link_type) +
                          " (Ethernet required)");
    }

    Corpus corpus;
    std::array<unsigned char, kPcapRecordHeaderLen> rec_header{};
    std::vector<unsigned char> frame;
    DecodedSegment segment;
    bool partial_frame = false;
    while (in.read(reinterpret_cast<char*>(rec_header.data()), rec_header.size())) {
        const std::uint32_t ts_sec = field32(rec_header.data());
        const std::uint32_t ts_frac = field32(rec_header.data() + 4);
        const std::uint32_t incl_len = field32(rec_header.data() + 8);
        ++corpus.summary.frames;
        frame.resize(incl_len);
        if (!in.read(reinterpret_cast<char*>(frame.data()), incl_len)) {
            ++corpus.summary.skipped_truncated;  // capture ends mid-frame
            partial_frame = true;
            break;
        }
        switch (decode_frame(frame.data(), frame.size(), filter, segment)) {
            case FrameOutcome::truncated:
                ++corpus.summary.skipped_truncated;
                break;
            case FrameOutcome::other:
                ++corpus.summary.skipped_other;
                break;
            case FrameOutcome::yielded: {
                PacketRecord record;
                record.id = corpus.records.size();
                record.dst_port = segment.dst_port;
                record.payload = std::move(segment.payload);
                record.ts = std::int64_t{ts_sec} * 1'000'000 + (nanos ? ts_frac / 1000 : ts_frac);
                corpus.records.push_back(std::move(record));
                ++corpus.summary.yielded;
                break;
            }
        }
    }
    if (!partial_frame && in.gcount() != 0 && !in.bad()) {
        ++corpus.summary.skipped_truncated;  // partial record header at EOF
    }
    return corpus;
}

Corpus read_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IngestError("cannot open corpus '" + path.string() + "'");
    Corpus corpus;
    std::string line;
    std::uint64_t line_no = 0;
    for (; std::getline(in, line); ++line_no) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        auto fail = [&](const std::string& why) {
            return IngestError(path.string() + ": line " + std::to_string(line_no) + ": " + why);
        };
        nlohmann::json obj;
        try {
            obj = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error&) {
            throw fail("malformed JSON");
        }
        if (!obj.is_object()) throw fail("record must be a JSON object");

        PacketRecord record;
        record.id = line_no;
        const auto port = obj.find("port");
        if (port == obj.end() || !port->is_number_integer()) throw fail("missing integer 'port'");
        const auto port_value = port->get<std::int64_t>();
        if (port_value < 0 || port_value > 65535) throw fail("port out of range");
        record.dst_port = static_cast<std::uint16_t>(port_value);

        const auto hex = obj.find("payload_hex");
        if (hex == obj.end() || !hex->is_string()) throw fail("missing string 'payload_hex'");
        auto payload = hex_decode(hex->get_ref<const std::string&>());
        if (!payload) throw fail("payload_hex must be an even-length hex string");
        record.payload = std::move(*payload);

        if (const auto label = obj.find("label"); label != obj.end() && !label->is_null()) {
            if (!label->is_string()) throw fail("'label' must be a string");
            auto parsed = Label::parse(label->get_ref<const std::string&>());
            if (!parsed) throw fail("label must be 'legit' or 'attack:<id>'");
            record.label = std::move(*parsed);
        }
        if (const auto ts = obj.find("ts"); ts != obj.end() && !ts->is_null()) {
            if (!ts->is_number_integer()) throw fail("'ts' must be an integer");
            record.ts = ts->get<std::int64_t>();
        }
        corpus.records.push_back(std::move(record));
    }
    if (in.bad()) throw IngestError("read error on '" + path.string() + "'");
    corpus.summary.frames = line_no;
    corpus.summary.yielded = corpus.records.size();
    return corpus;
}

std::size_t write_jsonl(const std::vector<PacketRecord>& records,
                        const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IngestError("cannot write corpus '" + path.string() + "'");
    for (const auto& record : records) {
        ordered_json obj;
        obj["port"] = record.dst_port;
        obj["payload_hex"] = hex_encode(record.payload);
        if (record.label) obj["label"] = record.label->to_string();
        if (record.ts) obj["ts"] = *record.ts;
        out << obj.dump() << '\n';
    }
    out.flush();
    if (!out) throw IngestError("write failed on '" + path.string() + "'");
    return records.size();
}

Corpus read_corpus(const std::filesystem::path& path, const TrafficFilter& filter) {
    if (path.extension() == ".pcap") return read_pcap(path, filter);
    return read_jsonl(path);
}

}  // namespace pckad
