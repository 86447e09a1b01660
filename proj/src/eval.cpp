#include "pckad/eval.hpp"

#include <charconv>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "pckad/error.hpp"

namespace pckad {

namespace {

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

template <typename T>
T parse_number(std::string_view text, std::string_view what) {
    T value{};
    const auto* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (ec != std::errc{} || ptr != end) {
        throw ConfigError("invalid " + std::string(what) + " '" + std::string(text) + "'");
    }
    return value;
}

std::string format_rate(const std::optional<double>& rate) {
    if (!rate) return "NA";
    std::ostringstream os;
    os << std::setprecision(6) << *rate;
    return os.str();
}

std::string format_number(double v) {
    std::ostringstream os;
    os << std::setprecision(10) << v;
    return os.str();
}

}  // namespace

std::set<std::string> LabelSet::attack_instances() const {
    std::set<std::string> out;
    for (const auto& [id, label] : labels) {
        if (label.is_attack()) out.insert(label.instance_id);
    }
    return out;
}

LabelSet LabelSet::from_records(const std::vector<PacketRecord>& records) {
    LabelSet set;
    for (const auto& r : records) {
        if (!r.label) throw EvalError("record " + std::to_string(r.id) + " has no label");
        set.labels.emplace(r.id, *r.label);
    }
    return set;
}

LabelSet LabelSet::read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw EvalError("cannot open labels '" + path.string() + "'");
    std::string line;
    if (!std::getline(in, line)) throw EvalError(path.string() + ": empty label file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "id,label") throw EvalError(path.string() + ": header must be 'id,label'");
    LabelSet set;
    for (std::size_t line_no = 1; std::getline(in, line); ++line_no) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto comma = line.find(',');
        auto fail = [&](const std::string& why) {
            return EvalError(path.string() + ": line " + std::to_string(line_no) + ": " + why);
        };
        if (comma == std::string::npos) throw fail("expected id,label");
        std::uint64_t id = 0;
        try {
            id = parse_number<std::uint64_t>(std::string_view(line).substr(0, comma), "id");
        } catch (const ConfigError&) {
            throw fail("bad id");
        }
        auto label = Label::parse(std::string_view(line).substr(comma + 1));
        if (!label) throw fail("label must be 'legit' or 'attack:<id>'");
        if (!set.labels.emplace(id, std::move(*label)).second) throw fail("duplicate id");
    }
    return set;
}

EvalReport evaluate_detections(const TrafficModel& model, const DetectionResult& detections,
                               const LabelSet& labels, const DetectorConfig& cfg) {
    EvalReport report;
    report.n = model.config.n;
    report.chunk_len = model.config.chunk_len;
    report.th_s = cfg.th_s;
    report.score_threshold = cfg.score_threshold;
    report.chunks_enabled = cfg.chunks_enabled;

    std::map<std::string, bool> instance_detected;
    for (const auto& d : detections.detections) {
        const auto it = labels.labels.find(d.id);
        if (it == labels.labels.end()) {
            throw EvalError("no label for record " + std::to_string(d.id));
        }
        if (!is_classifiable(d.verdict)) {
            ++report.unclassifiable;
            continue;
        }
        const bool alert = is_alert(d.verdict);
        if (it->second.is_attack()) {
            auto& detected = instance_detected[it->second.instance_id];
            detected = detected || alert;
        } else {
            ++report.legit_packets;
            if (alert) ++report.false_alerts;
        }
    }
    report.instances = instance_detected.size();
    for (const auto& [id, detected] : instance_detected) report.detected += detected ? 1 : 0;
    if (report.instances > 0) {
        report.dr = 100.0 * static_cast<double>(report.detected) / static_cast<double>(report.instances);
    }
    if (report.legit_packets > 0) {
        report.fpr = 100.0 * static_cast<double>(report.false_alerts) /
                     static_cast<double>(report.legit_packets);
    }
    return report;
}

EvalReport evaluate(const TrafficModel& model, const std::vector<PacketRecord>& corpus,
                    const LabelSet& labels, const DetectorConfig& cfg) {
    std::set<std::uint64_t> ids;
    for (const auto& r : corpus) ids.insert(r.id);
    for (const auto& [id, label] : labels.labels) {
        if (!ids.contains(id)) throw EvalError("label for unknown record " + std::to_string(id));
    }
    return evaluate_detections(model, detect_stream(model, corpus, cfg), labels, cfg);
}

SweepGrid SweepGrid::parse(std::string_view text) {
    SweepGrid grid;
    grid.n_values.clear();
    bool chunks_given = false;
    for (auto item : split(text, ';')) {
        if (item.empty()) continue;
        const auto eq = item.find('=');
        if (eq == std::string_view::npos) {
            throw ConfigError("grid item must be key=values: '" + std::string(item) + "'");
        }
        const auto key = item.substr(0, eq);
        const auto values = split(item.substr(eq + 1), ',');
        if (key == "n") {
            for (auto v : values) grid.n_values.push_back(parse_number<std::size_t>(v, "n"));
        } else if (key == "chunk") {
            for (auto v : values) grid.chunk_lens.push_back(parse_number<std::size_t>(v, "chunk length"));
        } else if (key == "score") {
            for (auto v : values) {
                const double t = parse_number<double>(v, "score threshold");
                if (!(t >= 0.0 && t <= 100.0)) throw ConfigError("score threshold must be within [0, 100]");
                grid.score_thresholds.push_back(t);
            }
        } else if (key == "chunks") {
            if (!chunks_given) grid.chunks.clear();
            chunks_given = true;
            for (auto v : values) {
                if (v == "on") {
                    grid.chunks.push_back(true);
                } else if (v == "off") {
                    grid.chunks.push_back(false);
                } else {
                    throw ConfigError("chunks values must be on|off");
                }
            }
        } else {
            throw ConfigError("unknown grid key '" + std::string(key) + "'");
        }
    }
    return grid;
}

std::vector<SweepRow> sweep(const std::vector<PacketRecord>& train_corpus,
                            const std::vector<PacketRecord>& test_corpus, const LabelSet& labels,
                            const SweepGrid& grid, const ModelConfig& base,
                            const TrainOptions& train_options) {
    std::vector<double> thresholds = grid.score_thresholds;
    if (thresholds.empty()) thresholds.push_back(default_score_threshold(base.protocol));

    std::vector<SweepRow> rows;
    for (const std::size_t n : grid.n_values) {
        for (const std::size_t chunk_len : grid.chunk_lens) {
            ModelConfig config = base;
            config.n = n;
            config.chunk_len = chunk_len;

            std::optional<TrafficModel> model;
            std::string invalid;
            try {
                config.validate();
                model = train(train_corpus, config, train_options);
            } catch (const ConfigError& e) {
                invalid = e.what();
            }

            for (const double threshold : thresholds) {
                for (const bool chunks : grid.chunks) {
                    SweepRow row;
                    row.report.n = n;
                    row.report.chunk_len = chunk_len;
                    row.report.th_s = config.th_s;
                    row.report.score_threshold = threshold;
                    row.report.chunks_enabled = chunks;
                    if (!model) {
                        row.skipped = true;
                        row.note = invalid;
                        rows.push_back(std::move(row));
                        continue;
                    }
                    DetectorConfig cfg;
                    cfg.score_threshold = threshold;
                    cfg.th_s = config.th_s;
                    cfg.chunks_enabled = chunks;
                    row.report = evaluate(*model, test_corpus, labels, cfg);
                    rows.push_back(std::move(row));
                }
            }
        }
    }
    return rows;
}

void write_report_csv_row(std::ostream& out, const SweepRow& row) {
    const auto& r = row.report;
    out << r.n << ',' << r.chunk_len << ',' << format_number(r.th_s) << ','
        << format_number(r.score_threshold) << ',' << (r.chunks_enabled ? "on" : "off") << ',';
    if (row.skipped) {
        out << "skipped,skipped,,,,,\n";
        return;
    }
    out << format_rate(r.dr) << ',' << format_rate(r.fpr) << ',' << r.instances << ',' << r.detected
        << ',' << r.legit_packets << ',' << r.false_alerts << ',' << r.unclassifiable << '\n';
}

void write_report_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
    out << kReportCsvHeader << '\n';
    for (const auto& row : rows) write_report_csv_row(out, row);
}

}  // namespace pckad
