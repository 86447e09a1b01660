#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "pckad/chunking.hpp"
#include "pckad/ingest.hpp"
#include "pckad/model.hpp"

namespace pckad {

struct DetectorConfig {
    double score_threshold = 40.0;  // percent; alert when the score is strictly above
    double th_s = kDefaultThS;
    bool chunks_enabled = true;

    void validate() const;
    // Protocol-default threshold and the model's th_s.
    static DetectorConfig defaults_for(const TrafficModel& model);
};

namespace verdict {

struct Legit {
    double score = 0.0;
    std::uint64_t a_seqs = 0;
    std::uint64_t tot_seqs = 0;
};

struct Anomalous {
    double score = 0.0;
    std::uint64_t a_seqs = 0;
    std::uint64_t tot_seqs = 0;
    // Up to ten n-grams with the most anomalous occurrences.
    std::vector<std::pair<Gram, std::uint64_t>> top_contributors;
};

struct Malformed {
    std::string reason;
};

struct NoModel {
    ClassKey class_key;
};

struct Unclassifiable {
    std::string reason;
};

}  // namespace verdict

using Verdict = std::variant<verdict::Legit, verdict::Anomalous, verdict::Malformed,
                             verdict::NoModel, verdict::Unclassifiable>;

// Anomalous, Malformed and NoModel all raise an alert.
bool is_alert(const Verdict& v);
bool is_classifiable(const Verdict& v);
std::string_view verdict_name(const Verdict& v);

// |mu - x| / (sigma + alpha)
double mahalanobis_term(double mu, double sigma, double x, double alpha);

// Number of occurrences of one n-gram counted as anomalous:
//  - never observed in the class: all of them;
//  - unusual over the whole relevant payload: all of them;
//  - otherwise, with chunks enabled, those in chunks where it is unusual.
std::uint64_t anomalous_occurrences(const NGramStats* stats, std::uint64_t x,
                                    const ChunkCounts& x_chunks, const DetectorConfig& cfg,
                                    double alpha);

// Precondition: record.dst_port == model.config.port.
Verdict score_packet(const TrafficModel& model, const PacketRecord& record,
                     const DetectorConfig& cfg);

struct DetectionSummary {
    std::uint64_t scored = 0;
    std::uint64_t skipped_other_port = 0;
    std::uint64_t legit = 0;
    std::uint64_t anomalous = 0;
    std::uint64_t malformed = 0;
    std::uint64_t no_model = 0;
    std::uint64_t unclassifiable = 0;

    std::uint64_t alerts() const { return anomalous + malformed + no_model; }
};

struct Detection {
    std::uint64_t id = 0;
    Verdict verdict;
};

struct DetectionResult {
    std::vector<Detection> detections;  // input order
    DetectionSummary summary;
};

DetectionResult detect_stream(const TrafficModel& model, const std::vector<PacketRecord>& corpus,
                              const DetectorConfig& cfg);

// {"id":..,"verdict":..,"score":..,"a_seqs":..,"tot_seqs":..}, nulls where not applicable.
std::string alert_json_line(const Detection& detection);

}  // namespace pckad
