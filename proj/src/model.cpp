#include "pckad/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <fstream>
#include <sstream>
#include <variant>

#include <json.hpp>

#include "pckad/error.hpp"

namespace pckad {

namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

// Integer moments of one n-gram's counts across the samples of a class.
struct Moments {
    std::uint64_t sum = 0;
    std::uint64_t sum_sq = 0;

    void add(std::uint64_t x) {
        sum += x;
        sum_sq += x * x;
    }

    // Absent samples count as zero, so only the sample count is needed here.
    MeanStd finish(std::uint64_t samples) const {
        const double k = static_cast<double>(samples);
        // k * sum_sq - sum^2 >= 0 by Cauchy-Schwarz and is exactly 0 iff every
        // sample had the same count.
        const std::uint64_t spread = samples * sum_sq - sum * sum;
        return {static_cast<double>(sum) / k, std::sqrt(static_cast<double>(spread)) / k};
    }
};

struct GramAccumulator {
    Moments payload;
    std::vector<Moments> chunks;
};

struct ClassAccumulator {
    std::uint64_t samples = 0;
    std::map<Gram, GramAccumulator> grams;
};

void check(bool ok, const std::string& what) {
    if (!ok) throw ModelError("invalid model: " + what);
}

bool valid_stat(double v) { return std::isfinite(v) && v >= 0.0; }

template <typename T>
T get_field(const json& obj, const char* key) {
    const auto it = obj.find(key);
    if (it == obj.end()) throw ModelError(std::string("invalid model: missing field '") + key + "'");
    try {
        return it->get<T>();
    } catch (const json::exception&) {
        throw ModelError(std::string("invalid model: field '") + key + "' has the wrong type");
    }
}

template <typename Int>
Int get_int(const json& obj, const char* key, std::int64_t lo, std::int64_t hi) {
    const auto it = obj.find(key);
    if (it == obj.end()) throw ModelError(std::string("invalid model: missing field '") + key + "'");
    if (!it->is_number_integer()) {
        throw ModelError(std::string("invalid model: field '") + key + "' must be an integer");
    }
    const auto v = it->get<std::int64_t>();
    if (v < lo || v > hi) throw ModelError(std::string("invalid model: field '") + key + "' out of range");
    return static_cast<Int>(v);
}

double get_double(const json& obj, const char* key) {
    const auto it = obj.find(key);
    if (it == obj.end()) throw ModelError(std::string("invalid model: missing field '") + key + "'");
    if (!it->is_number()) throw ModelError(std::string("invalid model: field '") + key + "' must be a number");
    return it->get<double>();
}

const json& get_array(const json& obj, const char* key) {
    const auto it = obj.find(key);
    if (it == obj.end() || !it->is_array()) {
        throw ModelError(std::string("invalid model: '") + key + "' must be an array");
    }
    return *it;
}

}  // namespace

void ModelConfig::validate() const {
    chunking().validate();
    if (!(std::isfinite(alpha) && alpha > 0.0)) throw ConfigError("alpha must be > 0");
    if (!(std::isfinite(th_s) && th_s > 0.0)) throw ConfigError("th-s must be > 0");
}

TrafficModel train(const std::vector<PacketRecord>& corpus, const ModelConfig& config,
                   const TrainOptions& options) {
    config.validate();
    const ChunkingConfig chunking = config.chunking(true);

    TrafficModel model;
    model.config = config;
    std::map<ClassKey, ClassAccumulator> accumulators;

    for (const auto& record : corpus) {
        ++model.summary.ingested;
        if (record.label && record.label->is_attack() && !options.ignore_labels) {
            throw TrainingError("training corpus contains attack-labeled record " +
                                std::to_string(record.id) +
                                "; training data must be attack-free (use --ignore-labels to override)");
        }
        if (record.dst_port != config.port) {
            ++model.summary.skipped_other_port;
            continue;
        }
        if (record.payload.empty()) {
            ++model.summary.skipped_empty;
            continue;
        }
        auto relevance = extract_relevant(config.protocol, record.payload);
        const auto* relevant = std::get_if<RelevantPayload>(&relevance);
        if (relevant == nullptr) {
            ++model.summary.skipped_malformed;
            continue;
        }
        if (relevant->total_len < config.n) {
            ++model.summary.skipped_short;
            continue;
        }
        const ChunkLayout layout = split_chunks(*relevant, chunking);
        const NGramCounts counts = extract_ngrams(*relevant, layout, chunking);
        if (counts.tot_seqs == 0) {
            ++model.summary.skipped_short;
            continue;
        }

        const ClassKey key{config.port, static_cast<std::uint32_t>(layout.nck_total)};
        auto& acc = accumulators[key];
        ++acc.samples;
        for (const auto& [gram, x] : counts.payload_counts) {
            auto& gram_acc = acc.grams[gram];
            if (gram_acc.chunks.empty()) gram_acc.chunks.resize(layout.nck_total);
            gram_acc.payload.add(x);
            for (const auto& [j, xj] : counts.chunk_counts.at(gram)) gram_acc.chunks[j].add(xj);
        }
        ++model.summary.trained;
    }

    if (model.summary.trained == 0) throw TrainingError("no trainable packets");

    for (const auto& [key, acc] : accumulators) {
        ClassModel& cls = model.classes[key];
        cls.sample_count = acc.samples;
        for (const auto& [gram, gram_acc] : acc.grams) {
            NGramStats stats;
            stats.payload = gram_acc.payload.finish(acc.samples);
            stats.chunks.reserve(gram_acc.chunks.size());
            for (const auto& m : gram_acc.chunks) stats.chunks.push_back(m.finish(acc.samples));
            cls.stats.emplace(gram, std::move(stats));
        }
    }
    return model;
}

std::string model_to_json(const TrafficModel& model) {
    ordered_json doc;
    doc["format_version"] = kModelFormatVersion;
    doc["protocol"] = protocol_name(model.config.protocol);
    doc["port"] = model.config.port;
    doc["n"] = model.config.n;
    doc["chunk_len"] = model.config.chunk_len;
    doc["alpha"] = model.config.alpha;
    doc["th_s"] = model.config.th_s;

    const auto& s = model.summary;
    doc["training_summary"] = {
        {"ingested", s.ingested},
        {"trained", s.trained},
        {"skipped_other_port", s.skipped_other_port},
        {"skipped_empty", s.skipped_empty},
        {"skipped_malformed", s.skipped_malformed},
        {"skipped_short", s.skipped_short},
    };

    ordered_json classes = ordered_json::array();
    for (const auto& [key, cls] : model.classes) {
        ordered_json c;
        c["port"] = key.port;
        c["nck_total"] = key.nck_total;
        c["sample_count"] = cls.sample_count;
        ordered_json grams = ordered_json::array();
        // std::map<std::string> orders bytes as unsigned, which matches hex order.
        for (const auto& [gram, stats] : cls.stats) {
            ordered_json g;
            g["gram_hex"] = hex_encode(gram);
            g["mean"] = stats.payload.mean;
            g["std"] = stats.payload.std;
            ordered_json chunks = ordered_json::array();
            for (std::size_t j = 0; j < stats.chunks.size(); ++j) {
                const auto& cs = stats.chunks[j];
                if (cs.mean == 0.0 && cs.std == 0.0) continue;
                chunks.push_back(ordered_json{{"j", j}, {"mean", cs.mean}, {"std", cs.std}});
            }
            g["chunks"] = std::move(chunks);
            grams.push_back(std::move(g));
        }
        c["ngrams"] = std::move(grams);
        classes.push_back(std::move(c));
    }
    doc["classes"] = std::move(classes);
    return doc.dump() + "\n";
}

TrafficModel model_from_json(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ModelError(std::string("malformed model file: ") + e.what());
    }
    check(doc.is_object(), "top level must be an object");

    const int version = get_int<int>(doc, "format_version", 0, 1 << 30);
    if (version != kModelFormatVersion) {
        throw ModelError("unsupported model format_version " + std::to_string(version) +
                         " (expected " + std::to_string(kModelFormatVersion) + ")");
    }

    TrafficModel model;
    auto& cfg = model.config;
    const auto protocol = parse_protocol(get_field<std::string>(doc, "protocol"));
    check(protocol.has_value(), "protocol must be 'ftp' or 'http'");
    cfg.protocol = *protocol;
    cfg.port = get_int<std::uint16_t>(doc, "port", 0, 65535);
    cfg.n = get_int<std::size_t>(doc, "n", 1, 1 << 20);
    cfg.chunk_len = get_int<std::size_t>(doc, "chunk_len", 1, 1 << 20);
    cfg.alpha = get_double(doc, "alpha");
    cfg.th_s = get_double(doc, "th_s");
    try {
        cfg.validate();
    } catch (const ConfigError& e) {
        throw ModelError(std::string("invalid model: ") + e.what());
    }

    if (const auto it = doc.find("training_summary"); it != doc.end()) {
        check(it->is_object(), "training_summary must be an object");
        constexpr std::int64_t kMax = std::numeric_limits<std::int64_t>::max();
        auto& s = model.summary;
        s.ingested = get_int<std::uint64_t>(*it, "ingested", 0, kMax);
        s.trained = get_int<std::uint64_t>(*it, "trained", 0, kMax);
        s.skipped_other_port = get_int<std::uint64_t>(*it, "skipped_other_port", 0, kMax);
        s.skipped_empty = get_int<std::uint64_t>(*it, "skipped_empty", 0, kMax);
        s.skipped_malformed = get_int<std::uint64_t>(*it, "skipped_malformed", 0, kMax);
        s.skipped_short = get_int<std::uint64_t>(*it, "skipped_short", 0, kMax);
    }

    for (const auto& c : get_array(doc, "classes")) {
        check(c.is_object(), "class entry must be an object");
        ClassKey key;
        key.port = get_int<std::uint16_t>(c, "port", 0, 65535);
        key.nck_total = get_int<std::uint32_t>(c, "nck_total", 1, 1 << 24);
        check(key.port == cfg.port, "class port differs from model port");
        check(!model.classes.contains(key), "duplicate class (" + std::to_string(key.port) + ", " +
                                                std::to_string(key.nck_total) + ")");
        ClassModel cls;
        cls.sample_count =
            get_int<std::uint64_t>(c, "sample_count", 1, std::numeric_limits<std::int64_t>::max());

        for (const auto& g : get_array(c, "ngrams")) {
            check(g.is_object(), "n-gram entry must be an object");
            const auto gram = hex_decode(get_field<std::string>(g, "gram_hex"));
            check(gram.has_value() && gram->size() == cfg.n, "gram_hex must encode exactly n bytes");
            NGramStats stats;
            stats.payload = {get_double(g, "mean"), get_double(g, "std")};
            check(valid_stat(stats.payload.mean), "n-gram mean must be finite and >= 0");
            check(valid_stat(stats.payload.std), "n-gram std must be finite and >= 0");
            stats.chunks.assign(key.nck_total, MeanStd{});
            std::vector<bool> seen(key.nck_total, false);
            double chunk_mean_sum = 0.0;
            for (const auto& ch : get_array(g, "chunks")) {
                check(ch.is_object(), "chunk entry must be an object");
                const auto j = get_int<std::size_t>(ch, "j", 0, key.nck_total - 1);
                check(!seen[j], "duplicate chunk index");
                seen[j] = true;
                stats.chunks[j] = {get_double(ch, "mean"), get_double(ch, "std")};
                check(valid_stat(stats.chunks[j].mean), "chunk mean must be finite and >= 0");
                check(valid_stat(stats.chunks[j].std), "chunk std must be finite and >= 0");
                chunk_mean_sum += stats.chunks[j].mean;
            }
            const double tol = 1e-9 * key.nck_total * std::max(1.0, stats.payload.mean);
            check(std::abs(chunk_mean_sum - stats.payload.mean) <= tol,
                  "chunk means of " + hex_encode(*gram) + " do not sum to its payload mean");
            check(cls.stats.emplace(*gram, std::move(stats)).second, "duplicate n-gram");
        }
        model.classes.emplace(key, std::move(cls));
    }
    return model;
}

std::size_t save_model(const TrafficModel& model, const std::filesystem::path& path) {
    const std::string text = model_to_json(model);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ModelError("cannot write model '" + path.string() + "'");
    out << text;
    out.flush();
    if (!out) throw ModelError("write failed on '" + path.string() + "'");
    return text.size();
}

TrafficModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ModelError("cannot open model '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return model_from_json(buf.str());
}

}  // namespace pckad
