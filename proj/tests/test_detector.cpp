#include <doctest.h>

#include <cmath>

#include "pckad/detector.hpp"
#include "pckad/error.hpp"
#include "pckad/synth.hpp"
#include "support/oracle_table.hpp"
#include "support/records.hpp"

using namespace pckad;
using pckad::testing::kTermCases;
using pckad::testing::record;
using pckad::testing::records;

namespace {

// n = 1, one chunk of 20 bytes, every listed byte seen exactly once per sample.
TrafficModel unigram_model(std::string_view known) {
    TrafficModel m;
    m.config.protocol = Protocol::ftp;
    m.config.port = 21;
    m.config.n = 1;
    m.config.chunk_len = 20;
    ClassModel cls;
    cls.sample_count = 1;
    for (char c : known) cls.stats[Gram(1, c)] = NGramStats{{1.0, 0.0}, {{1.0, 0.0}}};
    m.classes[{21, 1}] = cls;
    return m;
}

DetectorConfig with_threshold(double t, bool chunks = true) {
    DetectorConfig cfg;
    cfg.score_threshold = t;
    cfg.chunks_enabled = chunks;
    return cfg;
}

std::vector<PacketRecord> ftp_corpus(std::size_t count, std::uint64_t seed) {
    GenSpec spec;
    spec.protocol = Protocol::ftp;
    spec.packet_count = count;
    spec.seed = seed;
    return gen_legit(spec);
}

double score_of(const Verdict& v) {
    if (const auto* l = std::get_if<verdict::Legit>(&v)) return l->score;
    if (const auto* a = std::get_if<verdict::Anomalous>(&v)) return a->score;
    FAIL("verdict carries no score");
    return 0.0;
}

}  // namespace

TEST_CASE("deviation term matches the reference table") {
    for (const auto& c : kTermCases) {
        CAPTURE(c.mu);
        CAPTURE(c.sigma);
        CAPTURE(c.x);
        CAPTURE(c.alpha);
        const double got = mahalanobis_term(c.mu, c.sigma, c.x, c.alpha);
        CHECK(std::abs(got - c.expected) <= 1e-12 * std::max(1.0, c.expected));
    }
}

TEST_CASE("deviation term properties") {
    Rng rng(99);
    for (int i = 0; i < 2000; ++i) {
        const double mu = static_cast<double>(rng.below(200)) / 4.0;  // exact, so 2 * mu - x is too
        const double sigma = rng.unit() * 10;
        const double x = static_cast<double>(rng.below(60));
        const double alpha = 0.01 + rng.unit();
        const double t = mahalanobis_term(mu, sigma, x, alpha);
        CHECK(t >= 0.0);
        CHECK(std::isfinite(t));
        CHECK(t == mahalanobis_term(mu, sigma, 2 * mu - x, alpha));
        CHECK(mahalanobis_term(mu, sigma + 1.0, x, alpha) <= t);
        CHECK(mahalanobis_term(x, sigma, x, alpha) == 0.0);
    }
}

TEST_CASE("anomalous occurrences per n-gram") {
    const DetectorConfig cfg;
    CHECK(anomalous_occurrences(nullptr, 7, {{0, 7}}, cfg, 0.1) == 7);

    const NGramStats usual{{1.0, 0.0}, {{1.0, 0.0}}};
    CHECK(anomalous_occurrences(&usual, 1, {{0, 1}}, cfg, 0.1) == 0);

    const NGramStats far{{1.0, 0.0}, {{1.0, 0.0}}};
    CHECK(anomalous_occurrences(&far, 3, {{0, 3}}, cfg, 0.1) == 3);

    // Expected twice, once in each of the first two chunks; seen twice in the third.
    const NGramStats located{{2.0, 0.0}, {{1.0, 0.0}, {1.0, 0.0}, {0.0, 0.0}}};
    CHECK(anomalous_occurrences(&located, 2, {{2, 2}}, cfg, 0.1) == 2);
    CHECK(anomalous_occurrences(&located, 2, {{0, 1}, {2, 1}}, cfg, 0.1) == 1);
    CHECK(anomalous_occurrences(&located, 2, {{2, 2}}, with_threshold(40, false), 0.1) == 0);
}

TEST_CASE("score is the percentage of anomalous occurrences") {
    // 20 distinct bytes, 11 known: 9 of 20 anomalous.
    const auto model = unigram_model("abcdefghijk");
    const auto v = score_packet(model, record(21, "abcdefghijklmnopqrst"), with_threshold(40));
    REQUIRE(std::holds_alternative<verdict::Anomalous>(v));
    const auto& a = std::get<verdict::Anomalous>(v);
    CHECK(a.score == 45.0);
    CHECK(a.a_seqs == 9);
    CHECK(a.tot_seqs == 20);
    CHECK(a.top_contributors.size() == 9);
    CHECK(is_alert(v));
}

TEST_CASE("threshold comparison is strict") {
    const auto model = unigram_model("abcdefghijkl");  // 8 of 20 unknown
    const auto at = score_packet(model, record(21, "abcdefghijklmnopqrst"), with_threshold(40));
    REQUIRE(std::holds_alternative<verdict::Legit>(at));
    CHECK(std::get<verdict::Legit>(at).score == 40.0);
    CHECK_FALSE(is_alert(at));
    CHECK(is_alert(score_packet(model, record(21, "abcdefghijklmnopqrst"), with_threshold(39.999))));

    // Scores equal to common thresholds land exactly on them.
    for (std::uint64_t tot = 1; tot <= 400; ++tot) {
        for (std::uint64_t a = 0; a <= tot; ++a) {
            if ((100 * a) % tot != 0) continue;
            CHECK(100.0 * static_cast<double>(a) / static_cast<double>(tot) ==
                  static_cast<double>(100 * a / tot));
        }
    }
}

TEST_CASE("top contributors are capped and ordered") {
    const auto model = unigram_model("");
    const auto v = score_packet(model, record(21, "zzzyyabcdefghijklmno"), with_threshold(40));
    REQUIRE(std::holds_alternative<verdict::Anomalous>(v));
    const auto& top = std::get<verdict::Anomalous>(v).top_contributors;
    REQUIRE(top.size() == 10);
    CHECK(top[0] == std::pair<Gram, std::uint64_t>{"z", 3});
    CHECK(top[1] == std::pair<Gram, std::uint64_t>{"y", 2});
    CHECK(std::get<verdict::Anomalous>(v).score == 100.0);
}

TEST_CASE("verdicts outside the score path") {
    const auto model = unigram_model("abc");
    CHECK(std::holds_alternative<verdict::NoModel>(score_packet(model, record(21, Bytes(21, 'a')), {})));
    CHECK(is_alert(score_packet(model, record(21, Bytes(21, 'a')), {})));
    const auto empty = score_packet(model, record(21, ""), {});
    CHECK(std::holds_alternative<verdict::Unclassifiable>(empty));
    CHECK_FALSE(is_classifiable(empty));
    CHECK_FALSE(is_alert(empty));
    CHECK_THROWS_AS(score_packet(model, record(80, "abc"), {}), std::invalid_argument);

    ModelConfig cfg;  // n = 3
    const auto trigram = train(records(21, {"RETR a\r\n"}), cfg);
    CHECK(std::holds_alternative<verdict::Unclassifiable>(score_packet(trigram, record(21, "Q"), {})));

    ModelConfig http;
    http.protocol = Protocol::http;
    http.port = 80;
    const auto web = train(records(80, {"GET / HTTP/1.0\r\n"}), http);
    const auto bad = score_packet(web, record(80, "GET ../.."), {});
    CHECK(std::holds_alternative<verdict::Malformed>(bad));
    CHECK(is_alert(bad));
    CHECK(verdict_name(bad) == "malformed");
}

TEST_CASE("a packet of never-seen n-grams scores 100") {
    const auto model = train(ftp_corpus(500, 1), ModelConfig{});
    const auto v = score_packet(model, record(21, "\x90\x91\x92\x93\x94\x95\x96\r\n"), {});
    CHECK(score_of(v) == 100.0);
}

TEST_CASE("monotonicity in th_s and chunk gating") {
    const auto model = train(ftp_corpus(1500, 21), ModelConfig{});
    auto test = ftp_corpus(300, 22);
    for (std::size_t i = 0; i < test.size(); i += 3) {
        try {
            test[i] = inject(test[i], AnomalyKind::location_shift, i);
        } catch (const InjectionError&) {
            test[i] = inject(test[i], AnomalyKind::freq_shift, i);
        }
    }
    for (const auto& r : test) {
        double last = 101.0;
        for (double th : {1.0, 2.0, 5.0, 10.0, 50.0}) {
            DetectorConfig on;
            on.th_s = th;
            DetectorConfig off = on;
            off.chunks_enabled = false;
            const auto v_on = score_packet(model, r, on);
            const auto v_off = score_packet(model, r, off);
            if (!std::holds_alternative<verdict::Legit>(v_on) &&
                !std::holds_alternative<verdict::Anomalous>(v_on)) {
                break;
            }
            const double s = score_of(v_on);
            CHECK(s <= last);
            CHECK(s >= score_of(v_off));
            last = s;
        }
    }
}

TEST_CASE("detect_stream counters") {
    const auto model = unigram_model("abc");
    CHECK(detect_stream(model, {}, {}).summary.scored == 0);

    std::vector<PacketRecord> corpus{record(21, "cab", 0), record(80, "GET / HTTP/1.0\r\n", 1),
                                     record(25, "HELO x", 2)};
    const auto result = detect_stream(model, corpus, {});
    CHECK(result.summary.scored == 1);
    CHECK(result.summary.skipped_other_port == 2);
    CHECK(result.summary.legit == 1);
    CHECK(result.summary.alerts() == 0);
    REQUIRE(result.detections.size() == 1);
    CHECK(alert_json_line(result.detections[0]) ==
          R"({"id":0,"verdict":"legit","score":0.0,"a_seqs":0,"tot_seqs":3})");
    CHECK(alert_json_line({7, verdict::NoModel{{21, 4}}}) ==
          R"({"id":7,"verdict":"no_model","score":null,"a_seqs":null,"tot_seqs":null})");
}

TEST_CASE("training packets are not flagged by their own model") {
    const auto corpus = ftp_corpus(2000, 8);
    const auto model = train(corpus, ModelConfig{});
    const auto result = detect_stream(model, corpus, DetectorConfig::defaults_for(model));
    CHECK(result.summary.no_model == 0);
    CHECK(result.summary.malformed == 0);
    CHECK(result.summary.alerts() * 100 <= result.summary.scored);
}
