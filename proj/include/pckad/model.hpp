#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "pckad/chunking.hpp"
#include "pckad/ingest.hpp"
#include "pckad/protocol.hpp"

namespace pckad {

inline constexpr int kModelFormatVersion = 1;
inline constexpr double kDefaultAlpha = 0.1;
inline constexpr double kDefaultThS = 5.0;

struct ModelConfig {
    Protocol protocol = Protocol::ftp;
    std::uint16_t port = 21;
    std::size_t n = 3;
    std::size_t chunk_len = 15;
    double alpha = kDefaultAlpha;  // smoothing added to every standard deviation
    double th_s = kDefaultThS;     // per-n-gram unusualness threshold

    void validate() const;
    ChunkingConfig chunking(bool chunks_enabled = true) const {
        return {n, chunk_len, chunks_enabled};
    }

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Packets are modeled per (destination port, total chunk count).
struct ClassKey {
    std::uint16_t port = 0;
    std::uint32_t nck_total = 0;

    friend auto operator<=>(const ClassKey&, const ClassKey&) = default;
};

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;

    friend bool operator==(const MeanStd&, const MeanStd&) = default;
};

struct NGramStats {
    MeanStd payload;
    // One entry per chunk position of the class; (0, 0) where never observed.
    std::vector<MeanStd> chunks;

    friend bool operator==(const NGramStats&, const NGramStats&) = default;
};

struct ClassModel {
    std::uint64_t sample_count = 0;
    std::map<Gram, NGramStats> stats;

    friend bool operator==(const ClassModel&, const ClassModel&) = default;
};

struct TrainingSummary {
    std::uint64_t ingested = 0;
    std::uint64_t trained = 0;
    std::uint64_t skipped_other_port = 0;
    std::uint64_t skipped_empty = 0;
    std::uint64_t skipped_malformed = 0;
    std::uint64_t skipped_short = 0;  // relevant content shorter than n

    friend bool operator==(const TrainingSummary&, const TrainingSummary&) = default;
};

struct TrafficModel {
    ModelConfig config;
    std::map<ClassKey, ClassModel> classes;
    TrainingSummary summary;

    const ClassModel* find(ClassKey key) const {
        const auto it = classes.find(key);
        return it == classes.end() ? nullptr : &it->second;
    }

    friend bool operator==(const TrafficModel&, const TrafficModel&) = default;
};

struct TrainOptions {
    // Train on attack-labeled records instead of refusing them.
    bool ignore_labels = false;
};

// Learns per-class mean and population standard deviation of every observed
// n-gram, over the whole relevant payload and per chunk position. A sample
// that lacks an n-gram contributes a count of zero.
TrafficModel train(const std::vector<PacketRecord>& corpus, const ModelConfig& config,
                   const TrainOptions& options = {});

std::string model_to_json(const TrafficModel& model);
TrafficModel model_from_json(std::string_view text);

std::size_t save_model(const TrafficModel& model, const std::filesystem::path& path);
TrafficModel load_model(const std::filesystem::path& path);

}  // namespace pckad
