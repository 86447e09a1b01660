#include "pckad/cli.hpp"

#include <algorithm>
#include <fstream>
#include <optional>

#include <CLI11.hpp>

#include "pckad/detector.hpp"
#include "pckad/error.hpp"
#include "pckad/eval.hpp"
#include "pckad/ingest.hpp"
#include "pckad/model.hpp"
#include "pckad/synth.hpp"

namespace pckad::cli {

namespace {

// Thrown for flag combinations CLI11 cannot express; maps to exit 2.
class UsageError : public Error {
public:
    using Error::Error;
};

struct InjectSpec {
    AnomalyKind kind;
    double fraction = 0.0;
};

InjectSpec parse_inject(const std::string& text) {
    const auto colon = text.find(':');
    if (colon == std::string::npos) throw UsageError("--inject expects <unseen|freq|location>:<fraction>");
    const auto kind = parse_anomaly_kind(std::string_view(text).substr(0, colon));
    if (!kind) throw UsageError("unknown anomaly kind in --inject '" + text + "'");
    double fraction = 0.0;
    try {
        std::size_t used = 0;
        fraction = std::stod(text.substr(colon + 1), &used);
        if (used != text.size() - colon - 1) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
        throw UsageError("bad fraction in --inject '" + text + "'");
    }
    if (!(fraction >= 0.0 && fraction <= 1.0)) throw UsageError("--inject fraction must be within [0, 1]");
    return {*kind, fraction};
}

Protocol require_protocol(const std::string& name) {
    const auto protocol = parse_protocol(name);
    if (!protocol) throw UsageError("--protocol must be http or ftp");
    return *protocol;
}

// Wraps library config validation so it reports as a usage error.
template <typename F>
void validate_flags(F&& f) {
    try {
        f();
    } catch (const ConfigError& e) {
        throw UsageError(e.what());
    }
}

TrafficFilter make_filter(const std::string& spec, std::uint16_t port) {
    TrafficFilter filter;
    validate_flags([&] { filter = TrafficFilter::parse(spec); });
    if (filter.ports.empty()) filter.ports.insert(port);
    return filter;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t id, std::uint64_t salt) {
    // splitmix64 finalizer
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (id + 1) + salt;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

struct Options {
    std::string in, out, model, protocol, labels, alerts, grid, train, pcap_filter;
    std::optional<int> port;
    std::size_t n = 3;
    std::size_t chunk_len = 15;
    double alpha = kDefaultAlpha;
    std::optional<double> th_s;
    std::optional<double> score_threshold;
    bool no_chunks = false;
    bool ignore_labels = false;
    std::uint64_t seed = 0;
    std::size_t count = 0;
    std::vector<std::string> inject;
};

std::uint16_t resolve_port(const Options& o, Protocol protocol) {
    if (!o.port) return default_port(protocol);
    if (*o.port < 0 || *o.port > 65535) throw UsageError("--port must be within 0-65535");
    return static_cast<std::uint16_t>(*o.port);
}

int cmd_gen(const Options& o, std::ostream& out) {
    const Protocol protocol = require_protocol(o.protocol);
    std::vector<InjectSpec> injections;
    for (const auto& spec : o.inject) injections.push_back(parse_inject(spec));
    const ChunkingConfig chunking{o.n, o.chunk_len, true};
    validate_flags([&] { chunking.validate(); });

    GenSpec spec;
    spec.protocol = protocol;
    spec.packet_count = o.count;
    spec.seed = o.seed;
    spec.port = resolve_port(o, protocol);
    auto records = gen_legit(spec);

    Rng rng(mix_seed(o.seed, 0, 0x1a7e1ed));
    std::size_t injected = 0;
    std::size_t ineligible = 0;
    for (auto& record : records) {
        for (std::size_t k = 0; k < injections.size(); ++k) {
            if (!rng.chance(injections[k].fraction)) continue;
            try {
                PacketRecord attack = inject(record, injections[k].kind, mix_seed(o.seed, record.id, k), chunking);
                attack.label->instance_id += "-" + std::to_string(record.id);
                record = std::move(attack);
                ++injected;
            } catch (const InjectionError&) {
                ++ineligible;
            }
            break;
        }
    }
    write_jsonl(records, o.out);
    out << "generated " << records.size() << " packets (" << injected << " injected, " << ineligible
        << " not eligible for injection) -> " << o.out << "\n";
    return kExitOk;
}

int cmd_train(const Options& o, std::ostream& out) {
    ModelConfig config;
    config.protocol = require_protocol(o.protocol);
    config.port = resolve_port(o, config.protocol);
    config.n = o.n;
    config.chunk_len = o.chunk_len;
    config.alpha = o.alpha;
    config.th_s = o.th_s.value_or(kDefaultThS);
    validate_flags([&] { config.validate(); });
    const TrafficFilter filter = make_filter(o.pcap_filter, config.port);

    const Corpus corpus = read_corpus(o.in, filter);
    const TrafficModel model = train(corpus.records, config, {o.ignore_labels});
    const std::size_t bytes = save_model(model, o.out);
    const auto& s = model.summary;
    out << "trained " << s.trained << " of " << s.ingested << " packets into " << model.classes.size()
        << " classes (skipped: " << s.skipped_other_port << " other port, " << s.skipped_empty << " empty, "
        << s.skipped_malformed << " malformed, " << s.skipped_short << " shorter than n); wrote " << bytes
        << " bytes -> " << o.out << "\n";
    return kExitOk;
}

DetectorConfig detector_config(const Options& o, const TrafficModel& model) {
    DetectorConfig cfg = DetectorConfig::defaults_for(model);
    if (o.score_threshold) cfg.score_threshold = *o.score_threshold;
    if (o.th_s) cfg.th_s = *o.th_s;
    cfg.chunks_enabled = !o.no_chunks;
    validate_flags([&] { cfg.validate(); });
    return cfg;
}

void check_detector_flags(const Options& o) {
    DetectorConfig probe;
    if (o.score_threshold) probe.score_threshold = *o.score_threshold;
    if (o.th_s) probe.th_s = *o.th_s;
    validate_flags([&] { probe.validate(); });
}

int cmd_detect(const Options& o, std::ostream& out, std::ostream& err) {
    check_detector_flags(o);
    if (!o.pcap_filter.empty()) validate_flags([&] { (void)TrafficFilter::parse(o.pcap_filter); });
    const TrafficModel model = load_model(o.model);
    const DetectorConfig cfg = detector_config(o, model);
    const Corpus corpus = read_corpus(o.in, make_filter(o.pcap_filter, model.config.port));
    const DetectionResult result = detect_stream(model, corpus.records, cfg);

    std::ofstream file;
    if (!o.alerts.empty()) {
        file.open(o.alerts, std::ios::binary | std::ios::trunc);
        if (!file) throw IngestError("cannot write alerts '" + o.alerts + "'");
    }
    std::ostream& sink = o.alerts.empty() ? out : file;
    for (const auto& d : result.detections) sink << alert_json_line(d) << '\n';
    sink.flush();
    if (!sink) throw IngestError("write failed on alert output");

    const auto& s = result.summary;
    err << "scored " << s.scored << " packets: " << s.legit << " legit, " << s.anomalous << " anomalous, "
        << s.malformed << " malformed, " << s.no_model << " no-model, " << s.unclassifiable
        << " unclassifiable; " << s.skipped_other_port << " on other ports\n";
    return s.alerts() > 0 ? kExitAlerts : kExitOk;
}

LabelSet load_labels(const Options& o, const std::vector<PacketRecord>& records) {
    return o.labels.empty() ? LabelSet::from_records(records) : LabelSet::read_csv(o.labels);
}

void emit_csv(const Options& o, std::ostream& out, const std::vector<SweepRow>& rows) {
    if (o.out.empty()) {
        write_report_csv(out, rows);
        return;
    }
    std::ofstream file(o.out, std::ios::binary | std::ios::trunc);
    if (!file) throw IngestError("cannot write report '" + o.out + "'");
    write_report_csv(file, rows);
    if (!file.flush()) throw IngestError("write failed on '" + o.out + "'");
}

int cmd_eval(const Options& o, std::ostream& out) {
    check_detector_flags(o);
    const TrafficModel model = load_model(o.model);
    const DetectorConfig cfg = detector_config(o, model);
    const Corpus corpus = read_corpus(o.in, make_filter(o.pcap_filter, model.config.port));
    const LabelSet labels = load_labels(o, corpus.records);
    SweepRow row;
    row.report = evaluate(model, corpus.records, labels, cfg);
    emit_csv(o, out, {row});
    return kExitOk;
}

int cmd_sweep(const Options& o, std::ostream& out, std::ostream& err) {
    ModelConfig base;
    base.protocol = require_protocol(o.protocol);
    base.port = resolve_port(o, base.protocol);
    base.alpha = o.alpha;
    base.th_s = o.th_s.value_or(kDefaultThS);
    // n and chunk length come from the grid; validate the rest here.
    validate_flags([&] {
        ModelConfig probe = base;
        probe.n = 1;
        probe.chunk_len = 1;
        probe.validate();
    });
    SweepGrid grid;
    validate_flags([&] { grid = SweepGrid::parse(o.grid); });
    if (o.no_chunks) grid.chunks = {false};
    const TrafficFilter filter = make_filter(o.pcap_filter, base.port);

    const Corpus train_corpus = read_corpus(o.train, filter);
    const Corpus test_corpus = read_corpus(o.in, filter);
    const LabelSet labels = load_labels(o, test_corpus.records);
    const auto rows = sweep(train_corpus.records, test_corpus.records, labels, grid, base, {o.ignore_labels});
    for (const auto& row : rows) {
        if (row.skipped) {
            err << "warning: skipped cell n=" << row.report.n << " chunk=" << row.report.chunk_len << ": "
                << row.note << "\n";
        }
    }
    emit_csv(o, out, rows);
    return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Payload n-gram anomaly detector with per-chunk location models", "pckad"};
    app.require_subcommand(1);
    Options o;

    auto add_model_flags = [&o](CLI::App* cmd) {
        cmd->add_option("--n", o.n, "n-gram length in bytes")->check(CLI::PositiveNumber);
        cmd->add_option("--chunk-len", o.chunk_len, "chunk length in bytes")->check(CLI::PositiveNumber);
    };
    auto add_detect_flags = [&o](CLI::App* cmd) {
        cmd->add_option("--score-threshold", o.score_threshold, "alert threshold in percent (ftp 40, http 30)");
        cmd->add_option("--th-s", o.th_s, "per-n-gram unusualness threshold (default: the model's)");
        cmd->add_flag("--no-chunks", o.no_chunks, "disable the per-chunk rule (baseline)");
        cmd->add_option("--pcap-filter", o.pcap_filter, "ports=..;prefix=a.b.c.d/len;tcp_only=true|false");
    };

    auto* gen = app.add_subcommand("gen", "generate a synthetic labeled corpus");
    gen->add_option("--protocol", o.protocol, "http or ftp")->required();
    gen->add_option("--count", o.count, "number of packets")->required();
    gen->add_option("--seed", o.seed, "generator seed");
    gen->add_option("--out", o.out, "output JSONL corpus")->required();
    gen->add_option("--port", o.port, "destination port (protocol default)");
    gen->add_option("--inject", o.inject, "<unseen|freq|location>:<fraction>, repeatable");
    add_model_flags(gen);

    auto* train_cmd = app.add_subcommand("train", "learn a model from attack-free traffic");
    train_cmd->add_option("--in", o.in, "training corpus (.pcap or .jsonl)")->required();
    train_cmd->add_option("--protocol", o.protocol, "http or ftp")->required();
    train_cmd->add_option("--port", o.port, "destination port (protocol default)");
    train_cmd->add_option("--alpha", o.alpha, "smoothing factor");
    train_cmd->add_option("--th-s", o.th_s, "per-n-gram unusualness threshold");
    train_cmd->add_option("--out", o.out, "model file")->required();
    train_cmd->add_option("--pcap-filter", o.pcap_filter, "ports=..;prefix=a.b.c.d/len;tcp_only=true|false");
    train_cmd->add_flag("--ignore-labels", o.ignore_labels, "train even on attack-labeled records");
    add_model_flags(train_cmd);

    auto* detect = app.add_subcommand("detect", "score packets; exits 3 when any alert is raised");
    detect->add_option("--model", o.model, "model file")->required();
    detect->add_option("--in", o.in, "corpus to score (.pcap or .jsonl)")->required();
    detect->add_option("--alerts", o.alerts, "verdict JSONL output (default stdout)");
    add_detect_flags(detect);

    auto* eval_cmd = app.add_subcommand("eval", "detection and false-positive rates against labels");
    eval_cmd->add_option("--model", o.model, "model file")->required();
    eval_cmd->add_option("--in", o.in, "labeled test corpus")->required();
    eval_cmd->add_option("--labels", o.labels, "sidecar id,label CSV (default: inline JSONL labels)");
    eval_cmd->add_option("--out", o.out, "report CSV (default stdout)");
    add_detect_flags(eval_cmd);

    auto* sweep_cmd = app.add_subcommand("sweep", "train and evaluate over a parameter grid");
    sweep_cmd->add_option("--train", o.train, "attack-free training corpus")->required();
    sweep_cmd->add_option("--in", o.in, "labeled test corpus")->required();
    sweep_cmd->add_option("--labels", o.labels, "sidecar id,label CSV for the test corpus");
    sweep_cmd->add_option("--protocol", o.protocol, "http or ftp")->required();
    sweep_cmd->add_option("--port", o.port, "destination port (protocol default)");
    sweep_cmd->add_option("--alpha", o.alpha, "smoothing factor");
    sweep_cmd->add_option("--th-s", o.th_s, "per-n-gram unusualness threshold");
    sweep_cmd->add_option("--grid", o.grid, "n=2,3;chunk=7,15;score=30,40;chunks=on,off")->required();
    sweep_cmd->add_option("--out", o.out, "report CSV (default stdout)");
    sweep_cmd->add_option("--pcap-filter", o.pcap_filter, "ports=..;prefix=a.b.c.d/len;tcp_only=true|false");
    sweep_cmd->add_flag("--no-chunks", o.no_chunks, "evaluate only the baseline without chunks");
    sweep_cmd->add_flag("--ignore-labels", o.ignore_labels, "train even on attack-labeled records");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "pckad: " << e.what() << "\n" << "run 'pckad --help' for usage\n";
        return kExitUsage;
    }

    try {
        if (gen->parsed()) return cmd_gen(o, out);
        if (train_cmd->parsed()) return cmd_train(o, out);
        if (detect->parsed()) return cmd_detect(o, out, err);
        if (eval_cmd->parsed()) return cmd_eval(o, out);
        if (sweep_cmd->parsed()) return cmd_sweep(o, out, err);
    } catch (const UsageError& e) {
        err << "pckad: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "pckad: " << e.what() << "\n";
        return kExitRuntimeError;
    }
    return kExitUsage;
}

}  // namespace pckad::cli
