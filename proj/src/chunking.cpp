#include "pckad/chunking.hpp"

#include <stdexcept>
#include <string>

#include "pckad/error.hpp"

namespace pckad {

void ChunkingConfig::validate() const {
    if (n < 1) throw ConfigError("n must be >= 1");
    if (chunk_len < 1) throw ConfigError("chunk length must be >= 1");
    if (n > chunk_len) {
        throw ConfigError("n must be <= chunk-len (got n=" + std::to_string(n) +
                          ", chunk-len=" + std::to_string(chunk_len) + ")");
    }
}

ChunkLayout split_chunks(const RelevantPayload& relevant, const ChunkingConfig& cfg) {
    cfg.validate();
    if (relevant.components.empty()) throw std::invalid_argument("split_chunks: no components");

    ChunkLayout layout;
    layout.component_chunks.reserve(relevant.components.size());
    for (const auto& component : relevant.components) {
        layout.first_chunk.push_back(layout.nck_total);
        std::vector<ByteRange> chunks;
        chunks.reserve(chunk_count(component.size(), cfg.chunk_len));
        for (std::size_t off = 0; off < component.size(); off += cfg.chunk_len) {
            chunks.push_back({off, std::min(cfg.chunk_len, component.size() - off)});
        }
        layout.nck_total += chunks.size();
        layout.component_chunks.push_back(std::move(chunks));
    }
    return layout;
}

NGramCounts extract_ngrams(const RelevantPayload& relevant, const ChunkLayout& layout,
                           const ChunkingConfig& cfg) {
    NGramCounts counts;
    const std::size_t n = cfg.n;
    for (std::size_t c = 0; c < relevant.components.size(); ++c) {
        const BytesView component = relevant.components[c];
        if (component.size() < n) continue;
        const auto base = static_cast<std::uint32_t>(layout.first_chunk[c]);
        for (std::size_t pos = 0; pos + n <= component.size(); ++pos) {
            Gram gram(component.substr(pos, n));
            if (cfg.chunks_enabled) {
                const auto j = base + static_cast<std::uint32_t>(pos / cfg.chunk_len);
                ++counts.chunk_counts[gram][j];
            }
            ++counts.payload_counts[std::move(gram)];
            ++counts.tot_seqs;
        }
    }
    return counts;
}

std::multiset<Gram> sliding_window_oracle(BytesView component, std::size_t n) {
    std::multiset<Gram> grams;
    if (n == 0) return grams;
    for (std::size_t pos = 0; pos + n <= component.size(); ++pos) {
        grams.emplace(component.substr(pos, n));
    }
    return grams;
}

}  // namespace pckad
