#include "pckad/synth.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <variant>

#include "pckad/error.hpp"

namespace pckad {

namespace {

constexpr std::size_t kFreqShiftRepeats = 10;

std::string ftp_command(Rng& rng, const Vocabulary& v) {
    if (rng.chance(v.login_bundle_fraction)) {
        return "USER " + rng.pick(v.users) + "\r\nPASS " + rng.pick(v.passwords) + "\r\nACCT " +
               rng.pick(v.accounts) + "\r\n";
    }
    // Per-mille command mix of an interactive session.
    const std::uint64_t r = rng.below(1000);
    if (r < 130) return "USER " + rng.pick(v.users) + "\r\n";
    if (r < 260) return "PASS " + rng.pick(v.passwords) + "\r\n";
    if (r < 310) return "SYST\r\n";
    if (r < 360) return "PWD\r\n";
    if (r < 440) return rng.chance(0.7) ? "TYPE I\r\n" : "TYPE A\r\n";
    if (r < 500) return "PASV\r\n";
    if (r < 550) return "QUIT\r\n";
    if (r < 570) return "NOOP\r\n";
    if (r < 620) return "LIST\r\n";
    if (r < 700) return "CWD " + rng.pick(v.dirs) + "\r\n";
    if (r < 820) return "RETR " + rng.pick(v.files) + "\r\n";
    if (r < 870) return "STOR " + rng.pick(v.files) + "\r\n";
    if (r < 900) return "LIST " + rng.pick(v.dirs) + "\r\n";
    if (r < 970) {
        return "PORT 172,16,112," + rng.pick(v.hosts) + "," + std::to_string(4 + rng.below(4)) + "," +
               std::to_string(rng.below(256)) + "\r\n";
    }
    return "DELE " + rng.pick(v.files) + "\r\n";
}

std::string http_request(Rng& rng, const Vocabulary& v) {
    const std::uint64_t m = rng.below(20);
    const std::string method = m < 17 ? "GET" : (m < 19 ? "HEAD" : "POST");
    const std::string version = rng.chance(0.8) ? "HTTP/1.0" : "HTTP/1.1";
    std::string req = method + " " + rng.pick(v.http_paths) + " " + version + "\r\n";
    req += "Host: hume.eyrie.af.mil\r\n";
    req += "User-Agent: " + rng.pick(v.user_agents) + "\r\n";
    req += "Accept: image/gif, image/jpeg, */*\r\n";
    if (method == "POST") {
        const std::string body = "q=" + std::to_string(rng.below(1000));
        req += "Content-Length: " + std::to_string(body.size()) + "\r\n\r\n" + body;
    } else {
        req += "\r\n";
    }
    return req;
}

Protocol infer_protocol(const PacketRecord& record) {
    if (auto p = protocol_for_port(record.dst_port)) return *p;
    if (!record.payload.empty() &&
        std::holds_alternative<RelevantPayload>(extract_relevant(Protocol::http, record.payload))) {
        return Protocol::http;
    }
    return Protocol::ftp;
}

RelevantPayload relevant_or_throw(Protocol protocol, BytesView payload, std::string_view kind) {
    if (payload.empty()) throw InjectionError(std::string(kind) + ": empty payload");
    auto result = extract_relevant(protocol, payload);
    if (auto* bad = std::get_if<MalformedSignal>(&result)) {
        throw InjectionError(std::string(kind) + ": payload is malformed (" + bad->reason + ")");
    }
    return std::get<RelevantPayload>(std::move(result));
}

// Start of the HTTP request target and its length.
std::pair<std::size_t, std::size_t> http_target(BytesView payload) {
    const auto first_sp = payload.find(' ');
    const auto second_sp = payload.find(' ', first_sp + 1);
    return {first_sp + 1, second_sp - first_sp - 1};
}

Bytes insert_unseen(const PacketRecord& record, Protocol protocol, Rng& rng) {
    const RelevantPayload relevant = relevant_or_throw(protocol, record.payload, "unseen");
    std::size_t at = 0;
    if (protocol == Protocol::http) {
        at = http_target(record.payload).first + 1;  // after the leading '/' or first byte
    } else {
        const auto sp = record.payload.find(' ');
        const auto eol = record.payload.find("\r\n");
        at = sp != Bytes::npos && (eol == Bytes::npos || sp < eol) ? sp + 1 : 0;
    }
    const std::size_t run_len = std::max<std::size_t>(8, relevant.total_len + 4);
    Bytes run = "\xde\xad\xbe\xef";
    while (run.size() < run_len) run.push_back(static_cast<char>(0x80 + rng.below(0x80)));
    Bytes payload = record.payload;
    payload.insert(at, run);
    return payload;
}

Bytes repeat_field(const PacketRecord& record, Protocol protocol) {
    relevant_or_throw(protocol, record.payload, "freq");
    Bytes field;
    std::size_t at = 0;
    if (protocol == Protocol::http) {
        const auto [begin, len] = http_target(record.payload);
        const BytesView target = BytesView(record.payload).substr(begin, len);
        const auto next = target.find('/', 1);
        field = Bytes(target.substr(0, next == BytesView::npos ? target.size() : next));
        at = begin;
    } else {
        const auto eol = record.payload.find("\r\n");
        const BytesView line = BytesView(record.payload).substr(0, eol);
        const auto sp = line.find(' ');
        field = Bytes(sp == BytesView::npos ? line : line.substr(0, sp + 1));
    }
    if (field.size() < 3) throw InjectionError("freq: no repeatable field of at least 3 bytes");
    Bytes payload = record.payload;
    for (std::size_t i = 1; i < kFreqShiftRepeats; ++i) payload.insert(at, field);
    return payload;
}

struct Line {
    std::size_t offset = 0;
    std::size_t length = 0;  // including CRLF
};

std::vector<Line> crlf_lines(BytesView payload) {
    std::vector<Line> lines;
    std::size_t start = 0;
    while (start < payload.size()) {
        const auto eol = payload.find("\r\n", start);
        if (eol == BytesView::npos) break;
        lines.push_back({start, eol + 2 - start});
        start = eol + 2;
    }
    return lines;
}

Bytes swap_lines(const PacketRecord& record, Protocol protocol, const ChunkingConfig& chunking,
                 Rng& rng) {
    chunking.validate();
    const ChunkingConfig with_chunks{chunking.n, chunking.chunk_len, true};
    const RelevantPayload before = relevant_or_throw(protocol, record.payload, "location");
    const ChunkLayout before_layout = split_chunks(before, with_chunks);
    const NGramCounts before_counts = extract_ngrams(before, before_layout, with_chunks);

    const std::vector<Line> lines = crlf_lines(record.payload);
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t a = 1; a < lines.size(); ++a) {
        for (std::size_t b = a + 1; b < lines.size(); ++b) {
            if (lines[a].length != lines[b].length) continue;
            if (record.payload.compare(lines[a].offset, lines[a].length, record.payload,
                                       lines[b].offset, lines[b].length) == 0) {
                continue;
            }
            pairs.emplace_back(a, b);
        }
    }
    // Seeded Fisher-Yates so the chosen pair varies with the seed.
    for (std::size_t i = pairs.size(); i > 1; --i) std::swap(pairs[i - 1], pairs[rng.below(i)]);

    for (const auto& [a, b] : pairs) {
        Bytes payload = record.payload;
        const Bytes first = record.payload.substr(lines[a].offset, lines[a].length);
        const Bytes second = record.payload.substr(lines[b].offset, lines[b].length);
        payload.replace(lines[a].offset, lines[a].length, second);
        payload.replace(lines[b].offset, lines[b].length, first);

        auto after_result = extract_relevant(protocol, payload);
        const auto* after = std::get_if<RelevantPayload>(&after_result);
        if (after == nullptr) continue;
        const ChunkLayout after_layout = split_chunks(*after, with_chunks);
        const NGramCounts after_counts = extract_ngrams(*after, after_layout, with_chunks);
        if (after_counts.payload_counts == before_counts.payload_counts &&
            after_counts.chunk_counts != before_counts.chunk_counts) {
            return payload;
        }
    }
    throw InjectionError("location: no pair of equal-length fields whose swap moves n-grams across chunks");
}

}  // namespace

std::uint64_t Rng::below(std::uint64_t bound) {
    // Rejection sampling removes modulo bias.
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t x = next();
    while (x >= limit) x = next();
    return x % bound;
}

Vocabulary Vocabulary::defaults() {
    Vocabulary v;
    v.users = {"anonymou", "alice_ft", "bobsmith", "carolyn1", "guest001"};
    v.passwords = {"guest123", "xk42pass", "summer99", "p4ssw0rd", "ftpuser1"};
    v.accounts = {"sales001", "research", "finance2", "eng_dept"};
    v.dirs = {"/pub", "/incoming", "/pub/linux", "/home/ftp", "docs", ".."};
    v.files = {"readme.txt", "index.html", "data.tar.gz", "report.pdf", "notes.doc", "image.gif", "setup.exe", "ls-lR.Z"};
    v.hosts = {"50", "149", "207"};

    v.http_paths = {"/",
                    "/index.html",
                    "/people/svalente/gif/poker.dogs.jpg",
                    "/people/svalente/index.html",
                    "/people/mjones/",
                    "/people/mjones/gif/logo.gif",
                    "/images/banner.gif",
                    "/images/button1.gif",
                    "/cgi-bin/search.pl",
                    "/docs/manual/index.html",
                    "/news/today.html",
                    "/favicon.ico"};
    v.user_agents = {"Mozilla/4.08 [en] (WinNT; I)", "Mozilla/4.5 (X11; U; Linux 2.2 i686)",
                     "Lynx/2.8.1rel.2 libwww-FM/2.14"};
    return v;
}

std::string_view anomaly_kind_name(AnomalyKind kind) {
    switch (kind) {
        case AnomalyKind::unseen_gram: return "unseen";
        case AnomalyKind::freq_shift: return "freq";
        case AnomalyKind::location_shift: return "location";
    }
    return "unknown";
}

std::optional<AnomalyKind> parse_anomaly_kind(std::string_view name) {
    if (name == "unseen") return AnomalyKind::unseen_gram;
    if (name == "freq") return AnomalyKind::freq_shift;
    if (name == "location") return AnomalyKind::location_shift;
    return std::nullopt;
}

std::vector<PacketRecord> gen_legit(const GenSpec& spec) {
    Rng rng(spec.seed);
    const std::uint16_t port = spec.port.value_or(default_port(spec.protocol));
    std::vector<PacketRecord> records;
    records.reserve(spec.packet_count);
    for (std::size_t i = 0; i < spec.packet_count; ++i) {
        PacketRecord r;
        r.id = i;
        r.dst_port = port;
        r.payload = spec.protocol == Protocol::ftp ? ftp_command(rng, spec.vocabulary)
                                                   : http_request(rng, spec.vocabulary);
        r.label = Label::legit();
        records.push_back(std::move(r));
    }
    return records;
}

PacketRecord inject(const PacketRecord& record, AnomalyKind kind, std::uint64_t seed,
                    const ChunkingConfig& chunking) {
    if (record.label && record.label->is_attack()) {
        throw InjectionError("record " + std::to_string(record.id) + " is already an attack");
    }
    Rng rng(seed);
    const Protocol protocol = infer_protocol(record);
    PacketRecord out = record;
    switch (kind) {
        case AnomalyKind::unseen_gram: out.payload = insert_unseen(record, protocol, rng); break;
        case AnomalyKind::freq_shift: out.payload = repeat_field(record, protocol); break;
        case AnomalyKind::location_shift: out.payload = swap_lines(record, protocol, chunking, rng); break;
    }
    out.label = Label::attack(std::string(anomaly_kind_name(kind)));
    return out;
}

}  // namespace pckad
