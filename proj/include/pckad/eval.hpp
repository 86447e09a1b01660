#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "pckad/detector.hpp"
#include "pckad/ingest.hpp"
#include "pckad/model.hpp"

namespace pckad {

struct LabelSet {
    std::map<std::uint64_t, Label> labels;

    std::set<std::string> attack_instances() const;

    // Inline labels of a JSONL corpus. Throws EvalError on an unlabeled record.
    static LabelSet from_records(const std::vector<PacketRecord>& records);
    // Sidecar CSV with header "id,label".
    static LabelSet read_csv(const std::filesystem::path& path);
};

struct EvalReport {
    std::optional<double> dr;   // percent of attack instances with an alert; none without instances
    std::optional<double> fpr;  // percent of classifiable legit packets alerted

    std::uint64_t instances = 0;
    std::uint64_t detected = 0;
    std::uint64_t legit_packets = 0;  // classifiable only
    std::uint64_t false_alerts = 0;
    std::uint64_t unclassifiable = 0;

    // Configuration echo.
    std::size_t n = 0;
    std::size_t chunk_len = 0;
    double th_s = 0.0;
    double score_threshold = 0.0;
    bool chunks_enabled = true;
};

// An attack instance is detected when any of its packets alerts. FPR is
// counted per packet. Unclassifiable packets leave both denominators.
EvalReport evaluate(const TrafficModel& model, const std::vector<PacketRecord>& corpus,
                    const LabelSet& labels, const DetectorConfig& cfg);

// Same, from verdicts already computed by detect_stream.
EvalReport evaluate_detections(const TrafficModel& model, const DetectionResult& detections,
                               const LabelSet& labels, const DetectorConfig& cfg);

struct SweepGrid {
    std::vector<std::size_t> n_values;
    std::vector<std::size_t> chunk_lens;
    std::vector<double> score_thresholds;  // protocol default when empty
    std::vector<bool> chunks = {true, false};

    // "n=2,3,5;chunk=7,15,20;score=15,25,30;chunks=on,off"
    static SweepGrid parse(std::string_view text);
};

struct SweepRow {
    EvalReport report;
    bool skipped = false;  // invalid cell, e.g. n > chunk length
    std::string note;
};

// Trains one model per (n, chunk length) and evaluates every (threshold,
// chunks) cell. Rows come out in grid order: n, chunk length, threshold,
// chunks on before off.
std::vector<SweepRow> sweep(const std::vector<PacketRecord>& train_corpus,
                            const std::vector<PacketRecord>& test_corpus, const LabelSet& labels,
                            const SweepGrid& grid, const ModelConfig& base,
                            const TrainOptions& train_options = {});

inline constexpr std::string_view kReportCsvHeader =
    "n,len_ck,th_s,score_threshold,chunks,dr,fpr,instances,detected,legit_packets,false_alerts,"
    "unclassifiable";

void write_report_csv_row(std::ostream& out, const SweepRow& row);
void write_report_csv(std::ostream& out, const std::vector<SweepRow>& rows);

}  // namespace pckad
