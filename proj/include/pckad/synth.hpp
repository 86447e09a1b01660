#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "pckad/chunking.hpp"
#include "pckad/ingest.hpp"
#include "pckad/protocol.hpp"

namespace pckad {

// Portable bounded draws on top of mt19937_64, so corpora are byte-identical
// across standard library implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }
    // Uniform in [0, bound), bound > 0.
    std::uint64_t below(std::uint64_t bound);
    // Uniform in [0, 1).
    double unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
    bool chance(double p) { return unit() < p; }

    template <typename T>
    const T& pick(const std::vector<T>& items) {
        return items[below(items.size())];
    }

private:
    std::mt19937_64 engine_;
};

// Printable-ASCII template fillers. Every pool entry is plain ASCII so that
// high bytes never occur in legitimate traffic.
struct Vocabulary {
    // FTP. Login bundle fields are exactly 8 characters so each bundle line is
    // "XXXX " + 8 + CRLF = 15 bytes.
    std::vector<std::string> users;
    std::vector<std::string> passwords;
    std::vector<std::string> accounts;
    std::vector<std::string> dirs;
    std::vector<std::string> files;
    std::vector<std::string> hosts;  // last octet of the PORT address
    double login_bundle_fraction = 0.2;

    // HTTP.
    std::vector<std::string> http_paths;
    std::vector<std::string> user_agents;

    static Vocabulary defaults();
};

struct GenSpec {
    Protocol protocol = Protocol::ftp;
    std::size_t packet_count = 0;
    std::uint64_t seed = 0;
    std::optional<std::uint16_t> port;  // protocol default when unset
    Vocabulary vocabulary = Vocabulary::defaults();
};

enum class AnomalyKind { unseen_gram, freq_shift, location_shift };

std::string_view anomaly_kind_name(AnomalyKind kind);  // unseen | freq | location
std::optional<AnomalyKind> parse_anomaly_kind(std::string_view name);

// Legit-labeled packets drawn from the vocabulary templates; ids 0..count-1.
std::vector<PacketRecord> gen_legit(const GenSpec& spec);

// Transforms a legit record into an attack-labeled one ("attack:<kind>"):
//  - unseen_gram: inserts a run of high bytes (starting DE AD BE EF) at least
//    as long as the payload;
//  - freq_shift: repeats the leading command (FTP) or first path segment
//    (HTTP) so it occurs ten times;
//  - location_shift: swaps two equal-length, non-first CRLF lines. The
//    whole-payload n-gram multiset is unchanged while the per-chunk counts
//    under `chunking` differ.
// Throws InjectionError when the payload cannot carry the transformation.
PacketRecord inject(const PacketRecord& record, AnomalyKind kind, std::uint64_t seed,
                    const ChunkingConfig& chunking = {});

}  // namespace pckad
