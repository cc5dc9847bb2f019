#include "flowsift/bench.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include "flowsift/augment.hpp"
#include "flowsift/autoencoder.hpp"
#include "flowsift/detector.hpp"

namespace flowsift::bench {

std::string to_string(NoiseMode m) {
    return m == NoiseMode::Symmetric ? "symmetric" : "template";
}

NoiseMode noise_mode_from_string(const std::string& s) {
    if (s == "symmetric") return NoiseMode::Symmetric;
    if (s == "template") return NoiseMode::Template;
    throw Error("unknown noise mode '" + s + "'");
}

namespace {

struct Template {
    std::vector<long> base;  // per-position packet lengths
    long jitter = 0;
    int label = 0;
    int id = 0;
};

Template make_template(int id, int label, int n, long max_len, long jitter, Rng& rng) {
    Template t;
    t.id = id;
    t.label = label;
    t.jitter = jitter;
    // Head packets mimic a handshake (small), the rest payload-like.
    int pkts = n + static_cast<int>(rng.integer(-n / 4, n / 2));
    pkts = std::max(4, pkts);
    t.base.resize(pkts);
    for (int i = 0; i < pkts; ++i) {
        long v = (i < 4) ? rng.integer(60, 400) : rng.integer(60, max_len);
        t.base[i] = v;
    }
    return t;
}

BenchSample draw_sample(const Template& t, const std::string& id, int flow_idx,
                        const CorpusConfig& cfg, Rng& rng) {
    BenchSample s;
    s.id = id;
    s.true_label = t.label;
    s.noisy_label = t.label;
    s.template_id = t.id;
    flows::Flow& f = s.flow;
    f.key.src_ip = "10." + std::to_string((flow_idx >> 16) & 255) + "." +
                   std::to_string((flow_idx >> 8) & 255) + "." +
                   std::to_string(flow_idx & 255);
    f.key.dst_ip = "192.168.1.1";
    f.key.src_port = 1024 + (flow_idx % 60000);
    f.key.dst_port = 443;
    f.key.protocol = flows::Proto::TCP;
    f.first_ts = static_cast<double>(flow_idx);
    f.lengths.resize(t.base.size());
    for (std::size_t i = 0; i < t.base.size(); ++i) {
        long v = t.base[i];
        if (t.jitter > 0) v += rng.integer(-t.jitter, t.jitter);
        f.lengths[i] = std::clamp<long>(v, 1, cfg.max_len);
    }
    return s;
}

}  // namespace

Corpus synth_corpus(const CorpusConfig& cfg) {
    if (cfg.normal_templates < 1 || cfg.malicious_templates < 1)
        throw Error("synth_corpus: template counts must be >= 1");
    if (cfg.normal_jitter < 0 || cfg.malicious_jitter < 0)
        throw Error("synth_corpus: jitter must be >= 0");

    Rng rng(cfg.seed);
    Corpus corpus;
    std::vector<Template> templates;
    int tid = 0;
    for (int i = 0; i < cfg.normal_templates; ++i) {
        templates.push_back(
            make_template(tid, 0, cfg.n, cfg.max_len, cfg.normal_jitter, rng));
        corpus.normal_template_ids.push_back(tid++);
    }
    for (int i = 0; i < cfg.malicious_templates; ++i) {
        templates.push_back(
            make_template(tid, 1, cfg.n, cfg.max_len, cfg.malicious_jitter, rng));
        corpus.malicious_template_ids.push_back(tid++);
    }
    std::vector<Template> drifted;
    for (int i = 0; i < cfg.drifted_templates; ++i) {
        drifted.push_back(
            make_template(tid, 1, cfg.n, cfg.max_len, cfg.malicious_jitter, rng));
        corpus.drifted_template_ids.push_back(tid++);
    }

    int flow_idx = 0;
    auto emit = [&](std::vector<BenchSample>& dst, const std::vector<Template>& pool,
                    int count, const std::string& prefix) {
        for (int i = 0; i < count; ++i) {
            const Template& t = pool[rng.integer(0, static_cast<long>(pool.size()) - 1)];
            dst.push_back(draw_sample(t, prefix + std::to_string(i), flow_idx++, cfg, rng));
        }
    };

    std::vector<Template> train_normal, train_malicious;
    for (const auto& t : templates)
        (t.label == 0 ? train_normal : train_malicious).push_back(t);

    emit(corpus.train, train_normal, cfg.train_normal, "tr_n");
    emit(corpus.train, train_malicious, cfg.train_malicious, "tr_m");
    emit(corpus.test, train_normal, cfg.test_normal, "te_n");
    // Test malicious mixes original and drifted templates.
    std::vector<Template> test_malicious = train_malicious;
    test_malicious.insert(test_malicious.end(), drifted.begin(), drifted.end());
    emit(corpus.test, test_malicious, cfg.test_malicious, "te_m");
    return corpus;
}

void inject_noise(std::vector<BenchSample>& dataset, const NoiseSpec& spec,
                  std::uint64_t seed) {
    if (spec.ratio < 0.0 || spec.ratio >= 0.5)
        throw Error("inject_noise: ratio must be in [0, 0.5)");
    if (spec.mode == NoiseMode::Symmetric) {
        Rng rng(seed);
        for (int cls : {0, 1}) {
            std::vector<std::size_t> members;
            for (std::size_t i = 0; i < dataset.size(); ++i)
                if (dataset[i].true_label == cls) members.push_back(i);
            auto flips = static_cast<std::size_t>(
                std::floor(spec.ratio * static_cast<double>(members.size())));
            rng.shuffle(members);
            for (std::size_t k = 0; k < flips; ++k)
                dataset[members[k]].noisy_label = 1 - dataset[members[k]].noisy_label;
        }
    } else {
        auto budget = static_cast<std::size_t>(
            std::floor(spec.ratio * static_cast<double>(dataset.size())));
        std::size_t flipped = 0;
        for (auto& s : dataset) {
            if (flipped >= budget) break;
            if (std::find(spec.withheld.begin(), spec.withheld.end(), s.template_id) !=
                spec.withheld.end()) {
                s.noisy_label = 1 - s.noisy_label;
                ++flipped;
            }
        }
    }
}

MetricsReport compute_metrics(const std::vector<int>& predicted,
                              const std::vector<int>& truth) {
    if (predicted.size() != truth.size())
        throw Error("compute_metrics: prediction/truth size mismatch");
    MetricsReport r;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        if (truth[i] == 1)
            (predicted[i] == 1 ? r.tp : r.fn)++;
        else
            (predicted[i] == 1 ? r.fp : r.tn)++;
    }
    r.precision = (r.tp + r.fp) ? static_cast<double>(r.tp) / (r.tp + r.fp) : 0.0;
    r.recall = (r.tp + r.fn) ? static_cast<double>(r.tp) / (r.tp + r.fn) : 0.0;
    r.f1 = (r.precision + r.recall > 0.0)
               ? 2.0 * r.precision * r.recall / (r.precision + r.recall)
               : 0.0;
    return r;
}

MetricsReport compute_metrics(const std::vector<std::string>& pred_ids,
                              const std::vector<int>& predicted,
                              const std::vector<std::string>& truth_ids,
                              const std::vector<int>& truth) {
    if (pred_ids.size() != predicted.size() || truth_ids.size() != truth.size())
        throw Error("compute_metrics: malformed inputs");
    std::map<std::string, int> truth_by_id;
    for (std::size_t i = 0; i < truth_ids.size(); ++i) truth_by_id[truth_ids[i]] = truth[i];
    std::vector<int> aligned;
    aligned.reserve(predicted.size());
    for (const auto& id : pred_ids) {
        auto it = truth_by_id.find(id);
        if (it == truth_by_id.end()) throw Error("compute_metrics: id '" + id + "' missing in truth");
        aligned.push_back(it->second);
    }
    if (pred_ids.size() != truth_ids.size())
        throw Error("compute_metrics: id sets differ in size");
    return compute_metrics(predicted, aligned);
}

PipelineOutcome run_pipeline(const std::vector<relabel::LabeledSample>& train,
                             const std::vector<Vec>& test_features,
                             const std::vector<int>& test_truth,
                             const config::PipelineConfig& cfg, std::uint64_t seed,
                             bool with_augment, bool with_control) {
    PipelineOutcome out;
    const int d = static_cast<int>(train.at(0).features.size());

    relabel::CorrectionConfig ccfg;
    ccfg.alpha = cfg.relabel.alpha;
    ccfg.density = cfg.density.made(d);
    auto correction = relabel::correct_labels(train, ccfg, derive_seed(seed, 20));
    out.correction = relabel::correction_report(correction, train);

    std::vector<Vec> corr_normal, corr_malicious;
    for (std::size_t i = 0; i < train.size(); ++i)
        (correction.corrected[i] == 0 ? corr_normal : corr_malicious)
            .push_back(train[i].features);

    std::vector<Vec> train_x;
    std::vector<int> train_y;
    for (std::size_t i = 0; i < train.size(); ++i) {
        train_x.push_back(train[i].features);
        train_y.push_back(correction.corrected[i]);
    }

    if (with_augment && !corr_normal.empty() && !corr_malicious.empty()) {
        auto p_normal =
            density::fit_density(corr_normal, cfg.density.made(d), derive_seed(seed, 21));
        auto p_malicious = density::fit_density(corr_malicious, cfg.density.made(d),
                                                derive_seed(seed, 22));
        auto thresholds = augment::resolve_thresholds(
            p_normal, p_malicious, corr_normal, corr_malicious, cfg.augment.gamma_pct,
            {cfg.augment.omega1_pct, cfg.augment.omega2_pct, cfg.augment.omega3_pct});
        int per_region = cfg.augment.per_region;
        if (per_region == 0)
            per_region = std::max<int>(
                1, static_cast<int>(std::min(corr_normal.size(), corr_malicious.size()) / 3));
        auto synth = augment::synthesize(corr_normal, corr_malicious, p_normal,
                                         p_malicious, thresholds, cfg.augment.eta,
                                         per_region, cfg.augment.gan,
                                         derive_seed(seed, 23));
        for (std::size_t i = 0; i < synth.vectors.size(); ++i) {
            train_x.push_back(synth.vectors[i]);
            train_y.push_back(synth.labels[i]);
        }
    }

    detector::DetectorConfig dcfg = cfg.detector;
    auto model = detector::train_detector(train_x, train_y, dcfg, derive_seed(seed, 24));
    std::vector<int> preds;
    for (const auto& p : model.predict(test_features)) preds.push_back(p.label);
    out.pipeline = compute_metrics(preds, test_truth);

    if (with_control) {
        std::vector<Vec> noisy_x;
        std::vector<int> noisy_y;
        for (const auto& s : train) {
            noisy_x.push_back(s.features);
            noisy_y.push_back(s.noisy_label);
        }
        auto control = detector::train_plain(noisy_x, noisy_y, dcfg, derive_seed(seed, 25));
        std::vector<int> cpreds;
        for (const auto& p : control.predict(test_features)) cpreds.push_back(p.label);
        out.control = compute_metrics(cpreds, test_truth);
    }
    return out;
}

namespace {

/// Features are a function of (train_size, seed) only, so they are shared
/// across noise ratios and modes within a grid run.
struct FeatureCache {
    Corpus corpus;
    std::vector<Vec> train_features;
    std::vector<Vec> test_features;
    std::vector<int> test_truth;
};

FeatureCache build_features(int train_size, std::uint64_t seed,
                            const config::PipelineConfig& cfg) {
    FeatureCache fc;
    CorpusConfig cc;
    cc.normal_templates = cfg.bench.normal_templates;
    cc.malicious_templates = cfg.bench.malicious_templates;
    cc.drifted_templates = cfg.bench.drifted_templates;
    cc.normal_jitter = cfg.bench.normal_jitter;
    cc.malicious_jitter = cfg.bench.malicious_jitter;
    cc.train_normal = train_size;
    cc.train_malicious = train_size;
    cc.test_normal = cfg.bench.test_normal;
    cc.test_malicious = cfg.bench.test_malicious;
    cc.n = cfg.flows.n;
    cc.max_len = cfg.flows.max_len;
    cc.seed = derive_seed(seed, 30);
    fc.corpus = synth_corpus(cc);

    std::vector<flows::LengthSequence> train_seqs, test_seqs;
    for (const auto& s : fc.corpus.train)
        train_seqs.push_back(flows::tokenize(s.flow, cfg.flows.n, cfg.flows.max_len));
    for (const auto& s : fc.corpus.test)
        test_seqs.push_back(flows::tokenize(s.flow, cfg.flows.n, cfg.flows.max_len));

    autoencoder::AeSpec spec = cfg.ae_spec;
    spec.L = static_cast<int>(cfg.flows.max_len) + 1;
    spec.n = cfg.flows.n;
    auto ae = autoencoder::train_ae(train_seqs, spec, cfg.ae_train, derive_seed(seed, 31));
    fc.train_features = ae.encode_batch(train_seqs);
    fc.test_features = ae.encode_batch(test_seqs);
    for (const auto& s : fc.corpus.test) fc.test_truth.push_back(s.true_label);
    return fc;
}

}  // namespace

std::vector<CellResult> run_experiment(const ExperimentGrid& grid,
                                       const config::PipelineConfig& cfg) {
    std::vector<CellResult> results;
    for (int size : grid.train_sizes) {
        for (std::uint64_t seed : grid.seeds) {
            log_line("experiment", "info",
                     "features: size=" + std::to_string(size) +
                         " seed=" + std::to_string(seed));
            FeatureCache fc = build_features(size, seed, cfg);
            for (NoiseMode mode : grid.modes) {
                for (double ratio : grid.noise_ratios) {
                    std::vector<BenchSample> noisy = fc.corpus.train;
                    NoiseSpec spec;
                    spec.mode = mode;
                    spec.ratio = ratio;
                    if (mode == NoiseMode::Template) {
                        // Desk analog of the realistic scenarios: withhold
                        // one malicious and one normal template.
                        spec.withheld = {fc.corpus.malicious_template_ids.front(),
                                         fc.corpus.normal_template_ids.front()};
                    }
                    inject_noise(noisy, spec, derive_seed(seed, 40));

                    std::vector<relabel::LabeledSample> train(noisy.size());
                    for (std::size_t i = 0; i < noisy.size(); ++i) {
                        train[i].id = noisy[i].id;
                        train[i].features = fc.train_features[i];
                        train[i].noisy_label = noisy[i].noisy_label;
                        train[i].true_label = noisy[i].true_label;
                    }
                    log_line("experiment", "info",
                             "cell: size=" + std::to_string(size) + " ratio=" +
                                 std::to_string(ratio) + " mode=" + to_string(mode) +
                                 " seed=" + std::to_string(seed));
                    PipelineOutcome oc =
                        run_pipeline(train, fc.test_features, fc.test_truth, cfg, seed,
                                     grid.augment, grid.plain_control);
                    CellResult cell;
                    cell.train_size = size;
                    cell.noise_ratio = ratio;
                    cell.mode = mode;
                    cell.seed = seed;
                    cell.pipeline = oc.pipeline;
                    cell.control = oc.control;
                    cell.correction = oc.correction;
                    results.push_back(cell);
                }
            }
        }
    }
    return results;
}

namespace {

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

struct Agg {
    std::vector<double> vals;
    void add(double v) { vals.push_back(v); }
    double mean() const {
        return vals.empty()
                   ? 0.0
                   : std::accumulate(vals.begin(), vals.end(), 0.0) / vals.size();
    }
    double stddev() const {
        if (vals.size() < 2) return 0.0;
        double m = mean(), s = 0;
        for (double v : vals) s += (v - m) * (v - m);
        return std::sqrt(s / vals.size());
    }
    std::string render() const { return fmt(mean()) + "+-" + fmt(stddev()); }
};

}  // namespace

std::string result_table(const std::vector<CellResult>& results) {
    std::ostringstream out;
    out << "train_size\tnoise_ratio\tmode\tseed\tprecision\trecall\tf1\t"
           "ctrl_precision\tctrl_recall\tctrl_f1\tremaining_noise\tcorrected_prop\n";
    // Aggregate per (size, ratio, mode) in first-seen order.
    std::vector<std::tuple<int, double, NoiseMode>> cells;
    for (const auto& r : results) {
        std::tuple<int, double, NoiseMode> key{r.train_size, r.noise_ratio, r.mode};
        if (std::find(cells.begin(), cells.end(), key) == cells.end())
            cells.push_back(key);
    }
    for (const auto& [size, ratio, mode] : cells) {
        Agg p, rc, f1, cp, cr, cf, rn, cprop;
        for (const auto& r : results) {
            if (r.train_size != size || r.noise_ratio != ratio || r.mode != mode)
                continue;
            out << r.train_size << '\t' << fmt(r.noise_ratio) << '\t'
                << to_string(r.mode) << '\t' << r.seed << '\t'
                << fmt(r.pipeline.precision) << '\t' << fmt(r.pipeline.recall) << '\t'
                << fmt(r.pipeline.f1) << '\t' << fmt(r.control.precision) << '\t'
                << fmt(r.control.recall) << '\t' << fmt(r.control.f1) << '\t'
                << fmt(r.correction.remaining_noise_ratio) << '\t'
                << fmt(r.correction.corrected_noise_proportion) << '\n';
            p.add(r.pipeline.precision);
            rc.add(r.pipeline.recall);
            f1.add(r.pipeline.f1);
            cp.add(r.control.precision);
            cr.add(r.control.recall);
            cf.add(r.control.f1);
            rn.add(r.correction.remaining_noise_ratio);
            cprop.add(r.correction.corrected_noise_proportion);
        }
        out << size << '\t' << fmt(ratio) << '\t' << to_string(mode) << "\tagg\t"
            << p.render() << '\t' << rc.render() << '\t' << f1.render() << '\t'
            << cp.render() << '\t' << cr.render() << '\t' << cf.render() << '\t'
            << rn.render() << '\t' << cprop.render() << '\n';
    }
    return out.str();
}

}  // namespace flowsift::bench
