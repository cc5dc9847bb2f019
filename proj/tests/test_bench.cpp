#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <set>

#include "flowsift/autoencoder.hpp"
#include "flowsift/bench.hpp"

using namespace flowsift;
using namespace flowsift::bench;

namespace {

CorpusConfig small_corpus_cfg() {
    CorpusConfig cfg;
    cfg.normal_templates = 2;
    cfg.malicious_templates = 4;
    cfg.drifted_templates = 2;
    cfg.normal_jitter = 10;
    cfg.malicious_jitter = 120;
    cfg.train_normal = 60;
    cfg.train_malicious = 60;
    cfg.test_normal = 80;
    cfg.test_malicious = 40;
    cfg.n = 12;
    cfg.max_len = 300;
    cfg.seed = 5;
    return cfg;
}

long count_label(const std::vector<BenchSample>& v, int label, bool noisy = false) {
    long c = 0;
    for (const auto& s : v)
        if ((noisy ? s.noisy_label : s.true_label) == label) ++c;
    return c;
}

}  // namespace

TEST_CASE("corpus has the requested counts") {
    CorpusConfig cfg;
    cfg.train_normal = 500;
    cfg.train_malicious = 500;
    cfg.test_normal = 1000;
    cfg.test_malicious = 100;
    cfg.seed = 1;
    auto corpus = synth_corpus(cfg);
    CHECK(corpus.train.size() == 1000);
    CHECK(corpus.test.size() == 1100);
    CHECK(count_label(corpus.train, 0) == 500);
    CHECK(count_label(corpus.train, 1) == 500);
    CHECK(count_label(corpus.test, 0) == 1000);
    CHECK(count_label(corpus.test, 1) == 100);
}

TEST_CASE("corpus is deterministic per seed") {
    auto cfg = small_corpus_cfg();
    auto a = synth_corpus(cfg);
    auto b = synth_corpus(cfg);
    REQUIRE(a.train.size() == b.train.size());
    for (std::size_t i = 0; i < a.train.size(); ++i) {
        CHECK(a.train[i].id == b.train[i].id);
        CHECK(a.train[i].flow.lengths == b.train[i].flow.lengths);
        CHECK(a.train[i].template_id == b.train[i].template_id);
    }
    cfg.seed = 6;
    auto c = synth_corpus(cfg);
    bool differs = false;
    for (std::size_t i = 0; i < a.train.size(); ++i)
        if (a.train[i].flow.lengths != c.train[i].flow.lengths) differs = true;
    CHECK(differs);
}

TEST_CASE("drifted templates appear only in the test split") {
    auto corpus = synth_corpus(small_corpus_cfg());
    std::set<int> drifted(corpus.drifted_template_ids.begin(),
                          corpus.drifted_template_ids.end());
    CHECK(drifted.size() == 2);
    for (const auto& s : corpus.train) CHECK(drifted.count(s.template_id) == 0);
    bool seen = false;
    for (const auto& s : corpus.test)
        if (drifted.count(s.template_id)) {
            seen = true;
            CHECK(s.true_label == 1);
        }
    CHECK(seen);
}

TEST_CASE("unique five-tuples and timestamp ordering") {
    auto corpus = synth_corpus(small_corpus_cfg());
    std::set<std::string> keys;
    double prev_ts = -1;
    for (const auto& s : corpus.train) {
        keys.insert(s.flow.key.src_ip + ":" + std::to_string(s.flow.key.src_port));
        CHECK(s.flow.first_ts > prev_ts);
        prev_ts = s.flow.first_ts;
        for (long l : s.flow.lengths) {
            CHECK(l >= 1);
            CHECK(l <= 300);
        }
    }
    CHECK(keys.size() == corpus.train.size());
}

TEST_CASE("normal features huddle closer than malicious features") {
    auto cfg = small_corpus_cfg();
    auto corpus = synth_corpus(cfg);
    std::vector<flows::LengthSequence> seqs;
    for (const auto& s : corpus.train)
        seqs.push_back(flows::tokenize(s.flow, cfg.n, cfg.max_len));
    autoencoder::AeSpec spec;
    spec.L = static_cast<int>(cfg.max_len) + 1;
    spec.V = 8;
    spec.B = 1;
    spec.H = 4;
    spec.n = cfg.n;
    auto ae = autoencoder::train_ae(seqs, spec, {10, 32, 1e-3}, 3);
    auto feats = ae.encode_batch(seqs);

    auto mean_pairwise = [&](int label) {
        std::vector<Vec> fs;
        for (std::size_t i = 0; i < feats.size(); ++i)
            if (corpus.train[i].true_label == label) fs.push_back(feats[i]);
        double sum = 0;
        long pairs = 0;
        for (std::size_t i = 0; i < fs.size(); ++i)
            for (std::size_t j = i + 1; j < fs.size(); ++j) {
                sum += (fs[i] - fs[j]).norm();
                ++pairs;
            }
        return sum / pairs;
    };
    CHECK(mean_pairwise(0) < mean_pairwise(1));
}

TEST_CASE("symmetric noise flips exact per-class counts") {
    CorpusConfig cfg;
    cfg.train_normal = 500;
    cfg.train_malicious = 500;
    cfg.test_normal = 10;
    cfg.test_malicious = 10;
    cfg.seed = 2;
    auto corpus = synth_corpus(cfg);
    auto data = corpus.train;
    NoiseSpec spec;
    spec.ratio = 0.2;
    inject_noise(data, spec, 9);
    long n_to_m = 0, m_to_n = 0;
    for (const auto& s : data) {
        if (s.true_label == 0 && s.noisy_label == 1) ++n_to_m;
        if (s.true_label == 1 && s.noisy_label == 0) ++m_to_n;
    }
    CHECK(n_to_m == 100);
    CHECK(m_to_n == 100);

    // Same seed targets the same members, so re-injection toggles them
    // back: flips are involutive.
    inject_noise(data, spec, 9);
    for (const auto& s : data) CHECK(s.noisy_label == s.true_label);

    auto zero = corpus.train;
    NoiseSpec none;
    none.ratio = 0.0;
    inject_noise(zero, none, 9);
    for (const auto& s : zero) CHECK(s.noisy_label == s.true_label);
}

TEST_CASE("noise ratio at or above one half is rejected") {
    auto corpus = synth_corpus(small_corpus_cfg());
    NoiseSpec spec;
    spec.ratio = 0.5;
    CHECK_THROWS_AS(inject_noise(corpus.train, spec, 1), Error);
}

TEST_CASE("template noise flips withheld templates up to the budget") {
    auto corpus = synth_corpus(small_corpus_cfg());
    int target = corpus.malicious_template_ids.front();
    long members = 0;
    for (const auto& s : corpus.train)
        if (s.template_id == target) ++members;
    REQUIRE(members > 2);

    NoiseSpec spec;
    spec.mode = NoiseMode::Template;
    spec.withheld = {target};

    SUBCASE("budget above membership flips exactly the members") {
        spec.ratio = 0.45;
        auto data = corpus.train;
        REQUIRE(static_cast<long>(0.45 * data.size()) >= members);
        inject_noise(data, spec, 1);
        long flipped = 0;
        for (std::size_t i = 0; i < data.size(); ++i)
            if (data[i].noisy_label != data[i].true_label) {
                ++flipped;
                CHECK(data[i].template_id == target);
            }
        CHECK(flipped == members);
    }

    SUBCASE("budget below membership caps the flips") {
        spec.ratio = 2.0 / corpus.train.size();
        auto data = corpus.train;
        inject_noise(data, spec, 1);
        long flipped = 0;
        for (std::size_t i = 0; i < data.size(); ++i)
            if (data[i].noisy_label != data[i].true_label) ++flipped;
        CHECK(flipped == 2);
    }
}

TEST_CASE("metrics formulas") {
    std::vector<int> truth, pred;
    // TP=80, FP=20, FN=20, TN=30
    for (int i = 0; i < 80; ++i) { truth.push_back(1); pred.push_back(1); }
    for (int i = 0; i < 20; ++i) { truth.push_back(0); pred.push_back(1); }
    for (int i = 0; i < 20; ++i) { truth.push_back(1); pred.push_back(0); }
    for (int i = 0; i < 30; ++i) { truth.push_back(0); pred.push_back(0); }
    auto r = compute_metrics(pred, truth);
    CHECK(r.tp == 80);
    CHECK(r.fp == 20);
    CHECK(r.fn == 20);
    CHECK(r.tn == 30);
    CHECK(r.precision == doctest::Approx(0.8));
    CHECK(r.recall == doctest::Approx(0.8));
    CHECK(r.f1 == doctest::Approx(0.8));
}

TEST_CASE("metric conventions at zero denominators") {
    auto none = compute_metrics({0, 0, 0}, {1, 1, 0});
    CHECK(none.precision == 0.0);
    CHECK(none.recall == 0.0);
    CHECK(none.f1 == 0.0);
    auto perfect = compute_metrics({1, 0, 1}, {1, 0, 1});
    CHECK(perfect.precision == 1.0);
    CHECK(perfect.recall == 1.0);
    CHECK(perfect.f1 == 1.0);
}

TEST_CASE("id-joined metrics align permuted orders") {
    std::vector<std::string> pids{"a", "b", "c"};
    std::vector<int> pred{1, 0, 1};
    std::vector<std::string> tids{"c", "a", "b"};
    std::vector<int> truth{1, 1, 0};
    auto r = compute_metrics(pids, pred, tids, truth);
    CHECK(r.tp == 2);
    CHECK(r.fn == 0);
    CHECK(r.fp == 0);
    CHECK(r.tn == 1);
    CHECK_THROWS_WITH_AS(compute_metrics({"a", "x"}, {1, 0}, tids, truth),
                         doctest::Contains("x"), Error);
}

TEST_CASE("result table aggregates mean and spread") {
    std::vector<CellResult> cells(2);
    for (int i = 0; i < 2; ++i) {
        cells[i].train_size = 100;
        cells[i].noise_ratio = 0.3;
        cells[i].seed = i + 1;
        cells[i].pipeline.f1 = i == 0 ? 0.5 : 0.7;
    }
    auto table = result_table(cells);
    CHECK(table.find("0.600000+-0.100000") != std::string::npos);
    // header + 2 seed rows + 1 aggregate row
    CHECK(std::count(table.begin(), table.end(), '\n') == 4);
}

TEST_CASE("micro experiment grid is reproducible") {
    auto cfg = config::parse_config_text(
        "[flows]\nn = 8\nmax_len = 120\n"
        "[autoencoder]\nV = 4\nB = 1\nH = 4\nepochs = 2\n"
        "[density]\nK = 3\nhidden_mult = 2\nepochs = 3\n"
        "[detector]\nepochs = 3\n"
        "[bench]\nnormal_templates = 2\nmalicious_templates = 3\n"
        "drifted_templates = 1\nnormal_jitter = 5\nmalicious_jitter = 80\n"
        "test_normal = 60\ntest_malicious = 20\n");
    ExperimentGrid grid;
    grid.train_sizes = {25};
    grid.noise_ratios = {0.2};
    grid.seeds = {1, 2};
    grid.augment = false;
    grid.plain_control = true;

    auto r1 = run_experiment(grid, cfg);
    auto r2 = run_experiment(grid, cfg);
    REQUIRE(r1.size() == 2);
    auto t1 = result_table(r1);
    auto t2 = result_table(r2);
    CHECK(t1 == t2);
    CHECK(std::count(t1.begin(), t1.end(), '\n') == 4);
    for (const auto& cell : r1) {
        CHECK(cell.pipeline.precision >= 0.0);
        CHECK(cell.pipeline.precision <= 1.0);
    }
}
