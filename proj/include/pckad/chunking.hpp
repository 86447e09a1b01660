#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <vector>

#include "pckad/bytes.hpp"
#include "pckad/protocol.hpp"

namespace pckad {

struct ChunkingConfig {
    std::size_t n = 3;          // n-gram length in bytes
    std::size_t chunk_len = 15; // bytes per chunk
    bool chunks_enabled = true;

    // Throws ConfigError unless 1 <= n <= chunk_len.
    void validate() const;
};

struct ByteRange {
    std::size_t offset = 0;  // within the component
    std::size_t length = 0;
};

struct ChunkLayout {
    // Per component: ordered chunk ranges covering it exactly.
    std::vector<std::vector<ByteRange>> component_chunks;
    // Global index of each component's first chunk.
    std::vector<std::size_t> first_chunk;
    std::size_t nck_total = 0;

    std::size_t component_nck(std::size_t component) const {
        return component_chunks[component].size();
    }
};

using Gram = Bytes;
using ChunkCounts = std::map<std::uint32_t, std::uint32_t>;  // global chunk index -> count

struct NGramCounts {
    std::map<Gram, std::uint32_t> payload_counts;
    // Left empty when chunks are disabled.
    std::map<Gram, ChunkCounts> chunk_counts;
    std::uint64_t tot_seqs = 0;
};

// ceil(len / chunk_len)
constexpr std::size_t chunk_count(std::size_t len, std::size_t chunk_len) {
    return (len + chunk_len - 1) / chunk_len;
}

ChunkLayout split_chunks(const RelevantPayload& relevant, const ChunkingConfig& cfg);

// Sliding windows of length n within each component. An occurrence belongs to
// the chunk holding its first byte, so a window straddling a chunk border is
// counted once, in the earlier chunk.
NGramCounts extract_ngrams(const RelevantPayload& relevant, const ChunkLayout& layout,
                           const ChunkingConfig& cfg);

// Brute-force reference: every length-n substring at positions 0..len-n.
std::multiset<Gram> sliding_window_oracle(BytesView component, std::size_t n);

}  // namespace pckad
