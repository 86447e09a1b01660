// Acceptance suite: one PASS/FAIL/SKIP line per criterion, nonzero exit on any FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "pckad/chunking.hpp"
#include "pckad/cli.hpp"
#include "pckad/detector.hpp"
#include "pckad/error.hpp"
#include "pckad/eval.hpp"
#include "pckad/model.hpp"
#include "pckad/synth.hpp"
#include "support/oracle_table.hpp"
#include "support/pcap_builder.hpp"

using namespace pckad;
namespace fs = std::filesystem;

namespace {

enum class Outcome { pass, fail, skip };

struct Result {
    Outcome outcome;
    std::string detail;
};

Result pass(std::string d) { return {Outcome::pass, std::move(d)}; }
Result fail(std::string d) { return {Outcome::fail, std::move(d)}; }
Result skip(std::string d) { return {Outcome::skip, std::move(d)}; }

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v, int precision = 4) {
    std::ostringstream os;
    os.precision(precision);
    os << v;
    return os.str();
}

std::vector<PacketRecord> ftp_corpus(std::size_t count, std::uint64_t seed) {
    GenSpec spec;
    spec.protocol = Protocol::ftp;
    spec.packet_count = count;
    spec.seed = seed;
    return gen_legit(spec);
}

RelevantPayload single(const Bytes& c) { return RelevantPayload{{c}, c.size()}; }

Result oracle_equivalence() {
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng(1001);
    constexpr int kTrials = 2000;
    for (int trial = 0; trial < kTrials; ++trial) {
        const std::size_t chunk_len = 1 + rng.below(48);
        const std::size_t n = 1 + rng.below(chunk_len);
        Bytes component(1 + rng.below(300), '\0');
        const std::uint64_t alphabet = 1 + rng.below(rng.chance(0.5) ? 4 : 256);
        for (auto& c : component) c = static_cast<char>(rng.below(alphabet));

        const auto rel = single(component);
        const ChunkingConfig cfg{n, chunk_len, true};
        const auto counts = extract_ngrams(rel, split_chunks(rel, cfg), cfg);
        std::multiset<Gram> got;
        for (const auto& [g, x] : counts.payload_counts) {
            for (std::uint32_t k = 0; k < x; ++k) got.insert(g);
            std::uint64_t sum = 0;
            for (const auto& [j, xj] : counts.chunk_counts.at(g)) sum += xj;
            if (sum != x) return fail("chunk counts do not sum to the payload count at trial " + std::to_string(trial));
        }
        if (got != sliding_window_oracle(component, n)) {
            return fail("multiset mismatch at trial " + std::to_string(trial));
        }
    }
    const double secs = seconds_since(t0);
    if (secs >= 10.0) return fail("took " + fmt(secs) + " s");
    return pass(std::to_string(kTrials) + " triples in " + fmt(secs, 3) + " s");
}

Result layout_properties() {
    const Bytes line = "GET /people/svalente/gif/poker.dogs.jpg HTTP/1.0\r\n";
    const auto rel = std::get<RelevantPayload>(extract_relevant(Protocol::http, line + "Host: x\r\n\r\n"));
    const ChunkingConfig cfg{3, 15, true};
    const auto layout = split_chunks(rel, cfg);
    std::vector<Bytes> chunks;
    for (const auto& r : layout.component_chunks.at(0)) chunks.push_back(rel.components[0].substr(r.offset, r.length));
    const std::vector<Bytes> expected{"GET /people/sva", "lente/gif/poker", ".dogs.jpg HTTP/", "1.0\r\n"};
    if (rel.total_len != 50 || chunks != expected) return fail("request line split differs");

    Rng rng(2002);
    for (int trial = 0; trial < 2000; ++trial) {
        const std::size_t chunk_len = 1 + rng.below(64);
        RelevantPayload r;
        const auto parts = 1 + rng.below(3);
        for (std::uint64_t k = 0; k < parts; ++k) {
            Bytes c(1 + rng.below(400), 'x');
            for (auto& ch : c) ch = static_cast<char>(rng.below(256));
            r.total_len += c.size();
            r.components.push_back(std::move(c));
        }
        const auto lay = split_chunks(r, {1, chunk_len, true});
        std::size_t total = 0;
        for (std::size_t c = 0; c < r.components.size(); ++c) {
            const auto& comp = r.components[c];
            if (lay.component_nck(c) != chunk_count(comp.size(), chunk_len)) return fail("chunk count");
            if (lay.first_chunk[c] != total) return fail("global chunk index");
            total += lay.component_nck(c);
            Bytes rebuilt;
            for (const auto& range : lay.component_chunks[c]) rebuilt += comp.substr(range.offset, range.length);
            if (rebuilt != comp) return fail("concatenation identity");
        }
        if (lay.nck_total != total) return fail("nck_total");
    }
    return pass("request line split byte-exact; 2000 random layouts");
}

Result term_arithmetic() {
    std::size_t smoothing_cases = 0;
    for (const auto& c : pckad::testing::kTermCases) {
        const double got = mahalanobis_term(c.mu, c.sigma, c.x, c.alpha);
        if (std::abs(got - c.expected) > 1e-12 * std::max(1.0, c.expected)) {
            return fail("mu=" + fmt(c.mu) + " sigma=" + fmt(c.sigma) + " x=" + fmt(c.x) + ": got " + fmt(got, 17));
        }
        smoothing_cases += c.sigma == 0.0 ? 1 : 0;
    }
    return pass(std::to_string(pckad::testing::kTermCases.size()) + " cases (" + std::to_string(smoothing_cases) +
                " with sigma = 0)");
}

// Every third record becomes an attack instance of a rotating kind.
std::vector<PacketRecord> mixed_corpus(std::size_t count, std::uint64_t seed) {
    auto out = ftp_corpus(count, seed);
    const AnomalyKind kinds[] = {AnomalyKind::unseen_gram, AnomalyKind::freq_shift, AnomalyKind::location_shift};
    for (std::size_t i = 0; i < out.size(); i += 3) {
        try {
            auto attacked = inject(out[i], kinds[(i / 3) % 3], seed ^ i);
            attacked.label = Label::attack(attacked.label->instance_id + "-" + std::to_string(i));
            out[i] = std::move(attacked);
        } catch (const InjectionError&) {
        }
    }
    return out;
}

Result chunk_monotonicity() {
    const auto training = ftp_corpus(3000, 4001);
    const auto model = train(training, ModelConfig{});
    const auto test = mixed_corpus(1200, 4002);

    DetectorConfig on = DetectorConfig::defaults_for(model);
    DetectorConfig off = on;
    off.chunks_enabled = false;
    std::size_t compared = 0;
    for (const auto& r : test) {
        const auto a = score_packet(model, r, on);
        const auto b = score_packet(model, r, off);
        auto seqs = [](const Verdict& v) -> std::optional<std::uint64_t> {
            if (const auto* l = std::get_if<verdict::Legit>(&v)) return l->a_seqs;
            if (const auto* x = std::get_if<verdict::Anomalous>(&v)) return x->a_seqs;
            return std::nullopt;
        };
        const auto sa = seqs(a);
        const auto sb = seqs(b);
        if (sa.has_value() != sb.has_value()) return fail("verdict kind depends on chunks for record " + std::to_string(r.id));
        if (!sa) continue;
        ++compared;
        if (*sa < *sb) return fail("a_seqs on < off for record " + std::to_string(r.id));
    }
    if (compared < 500) return fail("only " + std::to_string(compared) + " packets scored");

    const auto rows = sweep(training, test, LabelSet::from_records(test),
                            SweepGrid::parse("n=2,3,5;chunk=7,15,20,25,39;score=15,25,30,40,50,60"), ModelConfig{});
    std::size_t pairs = 0;
    for (std::size_t i = 0; i + 1 < rows.size(); i += 2) {
        const auto& a = rows[i].report;
        const auto& b = rows[i + 1].report;
        if (!a.chunks_enabled || b.chunks_enabled || rows[i].skipped) return fail("unexpected sweep row order");
        if (*a.dr < *b.dr || *a.fpr < *b.fpr) {
            return fail("n=" + std::to_string(a.n) + " len_ck=" + std::to_string(a.chunk_len) + " threshold " +
                        fmt(a.score_threshold) + ": on below off");
        }
        ++pairs;
    }
    return pass(std::to_string(compared) + " packets; " + std::to_string(pairs) + " sweep row pairs");
}

struct KindRates {
    double dr_on = 0;
    double dr_off = 0;
    std::size_t injected = 0;
};

Result rule_targeting() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto model = train(ftp_corpus(5000, 5001), ModelConfig{});
    const auto pool = ftp_corpus(20000, 5002);

    DetectorConfig on;
    on.score_threshold = 40.0;
    on.th_s = 5.0;
    DetectorConfig off = on;
    off.chunks_enabled = false;

    std::string detail;
    std::map<AnomalyKind, KindRates> rates;
    for (const auto kind : {AnomalyKind::unseen_gram, AnomalyKind::freq_shift, AnomalyKind::location_shift}) {
        std::vector<PacketRecord> attacks;
        for (std::size_t i = 0; i < pool.size() && attacks.size() < 100; ++i) {
            try {
                auto a = inject(pool[i], kind, 7000 + i, model.config.chunking());
                a.label = Label::attack(std::string(anomaly_kind_name(kind)) + "-" + std::to_string(i));
                attacks.push_back(std::move(a));
            } catch (const InjectionError&) {
            }
        }
        if (attacks.size() < 100) return fail(std::string(anomaly_kind_name(kind)) + ": too few eligible records");
        const auto labels = LabelSet::from_records(attacks);
        KindRates& k = rates[kind];
        k.injected = attacks.size();
        k.dr_on = evaluate(model, attacks, labels, on).dr.value_or(0.0);
        k.dr_off = evaluate(model, attacks, labels, off).dr.value_or(0.0);
        detail += std::string(anomaly_kind_name(kind)) + " on " + fmt(k.dr_on) + "% off " + fmt(k.dr_off) + "%; ";
    }
    const double secs = seconds_since(t0);
    detail += fmt(secs, 3) + " s";

    const auto& unseen = rates[AnomalyKind::unseen_gram];
    const auto& loc = rates[AnomalyKind::location_shift];
    const bool ok = unseen.dr_on == 100.0 && unseen.dr_off == 100.0 && loc.dr_off == 0.0 && loc.dr_on >= 90.0 &&
                    secs < 60.0;
    return ok ? pass(detail) : fail(detail);
}

Result false_positive_control() {
    const auto model = train(ftp_corpus(5000, 5001), ModelConfig{});
    const auto held_out = ftp_corpus(5000, 6002);
    const auto report = evaluate(model, held_out, LabelSet::from_records(held_out), DetectorConfig::defaults_for(model));
    const std::string detail = "FPR " + fmt(report.fpr.value_or(0.0)) + "% (" + std::to_string(report.false_alerts) +
                               "/" + std::to_string(report.legit_packets) + ")";
    if (!report.fpr || report.legit_packets < 4900) return fail(detail);
    return *report.fpr <= 1.0 ? pass(detail) : fail(detail);
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

Result determinism() {
    std::array<std::string, 2> models;
    std::array<std::string, 2> alerts;
    for (int run = 0; run < 2; ++run) {
        const fs::path dir = pckad::testing::temp_path("determinism_" + std::to_string(run));
        fs::create_directories(dir);
        auto path = [&](const char* name) { return (dir / name).string(); };
        std::ostringstream out;
        std::ostringstream err;
        auto call = [&](std::vector<std::string> args) { return cli::run(args, out, err); };
        if (call({"gen", "--protocol", "ftp", "--count", "3000", "--seed", "7", "--out", path("train.jsonl")}) != 0 ||
            call({"gen", "--protocol", "ftp", "--count", "1000", "--seed", "8", "--out", path("test.jsonl"),
                  "--inject", "unseen:0.05", "--inject", "location:0.05"}) != 0 ||
            call({"train", "--in", path("train.jsonl"), "--protocol", "ftp", "--out", path("model.json")}) != 0) {
            return fail("pipeline failed: " + err.str());
        }
        // Persisted model must reproduce the in-memory one.
        const auto loaded = load_model(path("model.json"));
        if (model_to_json(loaded) != slurp(path("model.json"))) return fail("save/load changed the model bytes");
        if (call({"detect", "--model", path("model.json"), "--in", path("test.jsonl"), "--alerts", path("alerts.jsonl")}) !=
            cli::kExitAlerts) {
            return fail("detect did not report alerts: " + err.str());
        }
        models[run] = slurp(path("model.json"));
        alerts[run] = slurp(path("alerts.jsonl"));
    }
    if (models[0].empty() || alerts[0].empty()) return fail("empty outputs");
    if (models[0] != models[1]) return fail("model files differ");
    if (alerts[0] != alerts[1]) return fail("alert streams differ");
    return pass("model " + std::to_string(models[0].size()) + " bytes, alerts " + std::to_string(alerts[0].size()) +
                " bytes identical");
}

std::vector<PacketRecord> read_pcaps(const fs::path& dir, const TrafficFilter& filter) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.path().extension() == ".pcap") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    std::vector<PacketRecord> out;
    for (const auto& f : files) {
        for (auto& r : read_pcap(f, filter).records) {
            r.id = out.size();
            out.push_back(std::move(r));
        }
    }
    return out;
}

Result darpa() {
    const char* env = std::getenv("PCKAD_DARPA_DIR");
    if (env == nullptr || *env == '\0') return skip("PCKAD_DARPA_DIR not set");
    const fs::path root(env);
    if (!fs::is_directory(root / "train") || !fs::is_directory(root / "test") || !fs::exists(root / "labels.csv")) {
        return skip(root.string() + " lacks train/, test/ or labels.csv");
    }
    TrafficFilter filter;
    filter.ports = {21};
    filter.dst_prefix = Ipv4Prefix::parse("172.16.0.0/16");
    ModelConfig config;
    const auto model = train(read_pcaps(root / "train", filter), config, {.ignore_labels = true});
    const auto test = read_pcaps(root / "test", filter);
    const auto report = evaluate(model, test, LabelSet::read_csv(root / "labels.csv"), DetectorConfig::defaults_for(model));
    const std::string detail = "DR " + fmt(report.dr.value_or(0.0)) + "% FPR " + fmt(report.fpr.value_or(0.0)) + "%";
    const bool ok = report.dr == 100.0 && report.fpr && *report.fpr < 1.0;
    return ok ? pass(detail) : fail(detail);
}

}  // namespace

int main() {
    struct Criterion {
        int number;
        const char* name;
        Result (*run)();
    };
    const Criterion criteria[] = {
        {1, "n-gram extraction equals the sliding-window oracle", oracle_equivalence},
        {2, "chunk layout and request-line split", layout_properties},
        {3, "deviation term arithmetic", term_arithmetic},
        {4, "chunks never lower a_seqs, DR or FPR", chunk_monotonicity},
        {5, "rule-targeting injections", rule_targeting},
        {6, "false-positive rate on held-out legit traffic", false_positive_control},
        {7, "deterministic train/save/load/detect", determinism},
        {8, "DARPA 1999 FTP detection and false-positive rates", darpa},
    };
    int failures = 0;
    for (const auto& c : criteria) {
        Result r;
        try {
            r = c.run();
        } catch (const std::exception& e) {
            r = fail(std::string("exception: ") + e.what());
        }
        const char* tag = r.outcome == Outcome::pass ? "PASS" : (r.outcome == Outcome::fail ? "FAIL" : "SKIP");
        std::cout << tag << " criterion " << c.number << ": " << c.name << " - " << r.detail << std::endl;
        failures += r.outcome == Outcome::fail ? 1 : 0;
    }
    return failures == 0 ? 0 : 1;
}
