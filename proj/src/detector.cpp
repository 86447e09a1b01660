#include "pckad/detector.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <json.hpp>

#include "pckad/error.hpp"

namespace pckad {

namespace {

constexpr std::size_t kTopContributors = 10;

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

}  // namespace

void DetectorConfig::validate() const {
    if (!(score_threshold >= 0.0 && score_threshold <= 100.0)) {
        throw ConfigError("score threshold must be within [0, 100]");
    }
    if (!(std::isfinite(th_s) && th_s > 0.0)) throw ConfigError("th-s must be > 0");
}

DetectorConfig DetectorConfig::defaults_for(const TrafficModel& model) {
    DetectorConfig cfg;
    cfg.score_threshold = default_score_threshold(model.config.protocol);
    cfg.th_s = model.config.th_s;
    return cfg;
}

bool is_alert(const Verdict& v) {
    return std::holds_alternative<verdict::Anomalous>(v) ||
           std::holds_alternative<verdict::Malformed>(v) ||
           std::holds_alternative<verdict::NoModel>(v);
}

bool is_classifiable(const Verdict& v) {
    return !std::holds_alternative<verdict::Unclassifiable>(v);
}

std::string_view verdict_name(const Verdict& v) {
    return std::visit(overloaded{
                          [](const verdict::Legit&) { return std::string_view("legit"); },
                          [](const verdict::Anomalous&) { return std::string_view("anomalous"); },
                          [](const verdict::Malformed&) { return std::string_view("malformed"); },
                          [](const verdict::NoModel&) { return std::string_view("no_model"); },
                          [](const verdict::Unclassifiable&) { return std::string_view("unclassifiable"); },
                      },
                      v);
}

double mahalanobis_term(double mu, double sigma, double x, double alpha) {
    return std::abs(mu - x) / (sigma + alpha);
}

std::uint64_t anomalous_occurrences(const NGramStats* stats, std::uint64_t x,
                                    const ChunkCounts& x_chunks, const DetectorConfig& cfg,
                                    double alpha) {
    if (stats == nullptr) return x;
    const double payload_term =
        mahalanobis_term(stats->payload.mean, stats->payload.std, static_cast<double>(x), alpha);
    if (payload_term > cfg.th_s) return x;
    if (!cfg.chunks_enabled) return 0;

    std::uint64_t anomalous = 0;
    for (const auto& [j, xj] : x_chunks) {
        if (xj == 0) continue;
        const MeanStd expected = j < stats->chunks.size() ? stats->chunks[j] : MeanStd{};
        if (mahalanobis_term(expected.mean, expected.std, static_cast<double>(xj), alpha) > cfg.th_s) {
            anomalous += xj;
        }
    }
    return anomalous;
}

Verdict score_packet(const TrafficModel& model, const PacketRecord& record,
                     const DetectorConfig& cfg) {
    const ModelConfig& mc = model.config;
    if (record.dst_port != mc.port) {
        throw std::invalid_argument("score_packet: record port " + std::to_string(record.dst_port) +
                                    " does not match model port " + std::to_string(mc.port));
    }
    if (record.payload.empty()) return verdict::Unclassifiable{"empty payload"};

    auto relevance = extract_relevant(mc.protocol, record.payload);
    if (auto* bad = std::get_if<MalformedSignal>(&relevance)) {
        return verdict::Malformed{std::move(bad->reason)};
    }
    const auto& relevant = std::get<RelevantPayload>(relevance);
    if (relevant.total_len < mc.n) return verdict::Unclassifiable{"relevant length < n"};

    const ChunkingConfig chunking = mc.chunking(cfg.chunks_enabled);
    const ChunkLayout layout = split_chunks(relevant, chunking);
    const NGramCounts counts = extract_ngrams(relevant, layout, chunking);
    if (counts.tot_seqs == 0) return verdict::Unclassifiable{"no complete n-gram"};

    const ClassKey key{mc.port, static_cast<std::uint32_t>(layout.nck_total)};
    const ClassModel* cls = model.find(key);
    if (cls == nullptr) return verdict::NoModel{key};

    static const ChunkCounts kNoChunks;
    std::uint64_t a_seqs = 0;
    std::vector<std::pair<Gram, std::uint64_t>> contributors;
    for (const auto& [gram, x] : counts.payload_counts) {
        const auto stats_it = cls->stats.find(gram);
        const NGramStats* stats = stats_it == cls->stats.end() ? nullptr : &stats_it->second;
        const auto chunk_it = counts.chunk_counts.find(gram);
        const ChunkCounts& x_chunks = chunk_it == counts.chunk_counts.end() ? kNoChunks : chunk_it->second;
        const std::uint64_t anomalous = anomalous_occurrences(stats, x, x_chunks, cfg, mc.alpha);
        if (anomalous > 0) {
            a_seqs += anomalous;
            contributors.emplace_back(gram, anomalous);
        }
    }

    const double score = 100.0 * static_cast<double>(a_seqs) / static_cast<double>(counts.tot_seqs);
    if (score > cfg.score_threshold) {
        std::stable_sort(contributors.begin(), contributors.end(),
                         [](const auto& a, const auto& b) { return a.second > b.second; });
        if (contributors.size() > kTopContributors) contributors.resize(kTopContributors);
        return verdict::Anomalous{score, a_seqs, counts.tot_seqs, std::move(contributors)};
    }
    return verdict::Legit{score, a_seqs, counts.tot_seqs};
}

DetectionResult detect_stream(const TrafficModel& model, const std::vector<PacketRecord>& corpus,
                              const DetectorConfig& cfg) {
    cfg.validate();
    DetectionResult result;
    auto& s = result.summary;
    for (const auto& record : corpus) {
        if (record.dst_port != model.config.port) {
            ++s.skipped_other_port;
            continue;
        }
        Verdict v = score_packet(model, record, cfg);
        ++s.scored;
        std::visit(overloaded{
                       [&](const verdict::Legit&) { ++s.legit; },
                       [&](const verdict::Anomalous&) { ++s.anomalous; },
                       [&](const verdict::Malformed&) { ++s.malformed; },
                       [&](const verdict::NoModel&) { ++s.no_model; },
                       [&](const verdict::Unclassifiable&) { ++s.unclassifiable; },
                   },
                   v);
        result.detections.push_back({record.id, std::move(v)});
    }
    return result;
}

std::string alert_json_line(const Detection& detection) {
    nlohmann::ordered_json obj;
    obj["id"] = detection.id;
    obj["verdict"] = verdict_name(detection.verdict);
    obj["score"] = nullptr;
    obj["a_seqs"] = nullptr;
    obj["tot_seqs"] = nullptr;
    auto fill = [&obj](double score, std::uint64_t a_seqs, std::uint64_t tot_seqs) {
        obj["score"] = score;
        obj["a_seqs"] = a_seqs;
        obj["tot_seqs"] = tot_seqs;
    };
    if (const auto* v = std::get_if<verdict::Legit>(&detection.verdict)) fill(v->score, v->a_seqs, v->tot_seqs);
    if (const auto* v = std::get_if<verdict::Anomalous>(&detection.verdict)) {
        fill(v->score, v->a_seqs, v->tot_seqs);
    }
    return obj.dump();
}

}  // namespace pckad
