// Acceptance gate: one pass/fail line per criterion, nonzero exit on any
// failure. Criteria run on scaled-down synthetic corpora so the whole binary
// stays within desk-CPU budgets; tolerances are pinned in the checks below.
#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "flowsift/augment.hpp"
#include "flowsift/autoencoder.hpp"
#include "flowsift/bench.hpp"
#include "flowsift/config.hpp"
#include "flowsift/density.hpp"
#include "flowsift/detector.hpp"
#include "flowsift/relabel.hpp"

using namespace flowsift;

namespace {

constexpr double kLogTwoPi = 1.8378770664093453;

double now_seconds() {
    using clock = std::chrono::steady_clock;
    return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
}

/// Dense normal cluster at the origin vs. malicious points scattered over
/// a wide box, with symmetric label flips at `noise`.
std::vector<relabel::LabeledSample> cluster_scatter(int per_class, int d,
                                                    double noise,
                                                    std::uint64_t seed) {
    Rng rng(seed);
    std::vector<relabel::LabeledSample> D;
    for (int i = 0; i < 2 * per_class; ++i) {
        relabel::LabeledSample s;
        s.id = "s" + std::to_string(i);
        int cls = i < per_class ? 0 : 1;
        s.true_label = cls;
        s.noisy_label = cls;
        s.features = Vec(d);
        for (int j = 0; j < d; ++j)
            s.features[j] = cls == 0 ? 0.25 * rng.normal() : rng.uniform(-5, 5);
        D.push_back(s);
    }
    const int flips = static_cast<int>(noise * per_class);
    std::vector<int> norm_idx, mal_idx;
    for (int i = 0; i < 2 * per_class; ++i)
        (i < per_class ? norm_idx : mal_idx).push_back(i);
    rng.shuffle(norm_idx);
    rng.shuffle(mal_idx);
    for (int k = 0; k < flips; ++k) {
        D[norm_idx[k]].noisy_label = 1;
        D[mal_idx[k]].noisy_label = 0;
    }
    return D;
}

/// Test points from the same two distributions, truth only.
void cluster_scatter_test(int n_normal, int n_malicious, int d, std::uint64_t seed,
                          std::vector<Vec>& X, std::vector<int>& y) {
    Rng rng(seed);
    X.clear();
    y.clear();
    for (int i = 0; i < n_normal + n_malicious; ++i) {
        int cls = i < n_normal ? 0 : 1;
        Vec v(d);
        for (int j = 0; j < d; ++j)
            v[j] = cls == 0 ? 0.25 * rng.normal() : rng.uniform(-5, 5);
        X.push_back(v);
        y.push_back(cls);
    }
}

density::MadeConfig small_made(int epochs) {
    density::MadeConfig cfg;
    cfg.K = 5;
    cfg.hidden = {16, 16};
    cfg.epochs = epochs;
    cfg.batch = 64;
    cfg.lr = 1e-3;
    return cfg;
}

/// d=2 density model pinned to one unit-scale component at (mean, mean):
/// all weights zero, output bias carries the component parameters.
density::MadeModel pinned_gaussian(double mean, const std::string& tag) {
    auto path = (std::filesystem::temp_directory_path() /
                 ("flowsift_acc_pin_" + tag + ".txt"))
                    .string();
    std::ofstream out(path);
    out.precision(17);
    const double s = std::log(1.0 - 1e-3);
    out << "made 1\n2 1 2\n4 4\n";
    out << "2 4\n0 0 0 0\n0 0 0 0\n0 0 0 0\n";
    out << "4 4\n";
    for (int r = 0; r < 4; ++r) out << "0 0 0 0\n";
    out << "0 0 0 0\n4 6\n";
    for (int r = 0; r < 4; ++r) out << "0 0 0 0 0 0\n";
    out << 0.0 << ' ' << mean << ' ' << s << ' ' << 0.0 << ' ' << mean << ' '
        << s << '\n';
    out.close();
    auto m = density::MadeModel::load(path);
    std::remove(path.c_str());
    return m;
}

double pinned_logp(const Vec& x, double mean) {
    return -kLogTwoPi - 0.5 * (x.array() - mean).matrix().squaredNorm();
}

double oracle_pull_away(const std::vector<Vec>& batch) {
    const std::size_t n = batch.size();
    if (n < 2) return 0.0;
    double s = 0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            double den = batch[i].norm() * batch[j].norm();
            if (den == 0) continue;
            double c = batch[i].dot(batch[j]) / den;
            s += c * c;
        }
    return s / static_cast<double>(n * (n - 1));
}

/// Independent recomputation of the autoregressive mixture log density
/// from the published conditional parameters.
double oracle_log_density(const density::MadeModel& m, const Vec& x) {
    auto conds = m.conditionals(x);
    double total = 0;
    for (int i = 0; i < m.dim(); ++i) {
        const auto& c = conds[i];
        double mx = c.logits.maxCoeff();
        double z = 0;
        for (int k = 0; k < c.logits.size(); ++k) z += std::exp(c.logits[k] - mx);
        double log_z = mx + std::log(z);
        double best = -1e300;
        std::vector<double> terms;
        for (int k = 0; k < c.logits.size(); ++k) {
            double scale = 1e-3 + std::exp(c.log_scales[k]);
            double zk = (x[i] - c.means[k]) / scale;
            double t = (c.logits[k] - log_z) - 0.5 * kLogTwoPi - std::log(scale) -
                       0.5 * zk * zk;
            terms.push_back(t);
            best = std::max(best, t);
        }
        double acc = 0;
        for (double t : terms) acc += std::exp(t - best);
        total += best + std::log(acc);
    }
    return total;
}

std::vector<Vec> random_vecs(int n, int d, Rng& rng, double scale = 1.0) {
    std::vector<Vec> out(n);
    for (int i = 0; i < n; ++i) {
        out[i] = Vec(d);
        for (int j = 0; j < d; ++j) out[i][j] = scale * rng.normal();
    }
    return out;
}

struct Criterion {
    Criterion(int id_, std::string name_) : id(id_), name(std::move(name_)) {}
    int id;
    std::string name;
    bool pass = false;
    std::string detail;
};

// ---------------------------------------------------------------------------

/// Criterion 1: label correction quality. 500+500 cluster/scatter samples,
/// symmetric noise in {20, 30, 40, 45}%: median remaining noise <= 15% and
/// median corrected proportion >= 60% over 5 seeds, <= 5 min per ratio.
Criterion criterion_correction() {
    Criterion c{1, "label correction: remaining <= 0.15, corrected >= 0.60"};
    relabel::CorrectionConfig ccfg;
    ccfg.alpha = 0.5;
    ccfg.density = small_made(40);
    std::ostringstream detail;
    bool ok = true;
    for (double ratio : {0.20, 0.30, 0.40, 0.45}) {
        double t0 = now_seconds();
        std::vector<double> remaining, corrected;
        for (std::uint64_t seed : {1, 2, 3, 4, 5}) {
            auto D = cluster_scatter(500, 4, ratio, seed);
            auto res = relabel::correct_labels(D, ccfg, seed);
            auto rep = relabel::correction_report(res, D);
            remaining.push_back(rep.remaining_noise_ratio);
            corrected.push_back(rep.corrected_noise_proportion);
        }
        double elapsed = now_seconds() - t0;
        double rem = median(remaining), cor = median(corrected);
        detail << " ratio=" << ratio << " remaining=" << rem << " corrected=" << cor
               << " time=" << static_cast<int>(elapsed) << "s;";
        if (!(rem <= 0.15 && cor >= 0.60 && elapsed <= 300.0)) ok = false;
    }
    c.pass = ok;
    c.detail = detail.str();
    return c;
}

struct EndToEnd {
    // per noise ratio: per-seed pipeline and control F1
    std::vector<double> ratios{0.20, 0.30, 0.40, 0.45};
    std::vector<std::vector<double>> pipe_f1, ctrl_f1;
};

EndToEnd run_end_to_end() {
    config::PipelineConfig cfg;
    cfg.density.K = 5;
    cfg.density.hidden_mult = 4;  // 16 hidden units at d=4
    cfg.density.epochs = 40;
    cfg.augment.eta = 2;
    cfg.augment.per_region = 50;
    cfg.augment.gan.latent = 8;
    cfg.augment.gan.steps = 200;
    cfg.augment.gan.batch = 32;
    cfg.augment.gan.lr = 1e-3;
    cfg.detector.epochs = 300;
    cfg.detector.batch = 64;
    cfg.detector.schedule = {0.2, 10};

    EndToEnd e;
    e.pipe_f1.resize(e.ratios.size());
    e.ctrl_f1.resize(e.ratios.size());
    for (std::size_t r = 0; r < e.ratios.size(); ++r) {
        for (std::uint64_t seed : {1, 2, 3, 4, 5}) {
            auto train = cluster_scatter(500, 4, e.ratios[r], seed);
            std::vector<Vec> test_x;
            std::vector<int> test_y;
            cluster_scatter_test(1000, 100, 4, seed + 900, test_x, test_y);
            auto oc = bench::run_pipeline(train, test_x, test_y, cfg, seed, true, true);
            e.pipe_f1[r].push_back(oc.pipeline.f1);
            e.ctrl_f1[r].push_back(oc.control.f1);
        }
    }
    return e;
}

/// Criterion 2: F1 flatness across 20..45% noise: pipeline fluctuation of
/// per-ratio medians <= 0.10, control fluctuation > 0.10.
Criterion criterion_flatness(const EndToEnd& e) {
    Criterion c{2, "noise robustness: pipeline F1 fluctuation <= 0.10, control > 0.10"};
    std::vector<double> pm, cm;
    for (std::size_t r = 0; r < e.ratios.size(); ++r) {
        pm.push_back(median(e.pipe_f1[r]));
        cm.push_back(median(e.ctrl_f1[r]));
    }
    double pf = *std::max_element(pm.begin(), pm.end()) -
                *std::min_element(pm.begin(), pm.end());
    double cf = *std::max_element(cm.begin(), cm.end()) -
                *std::min_element(cm.begin(), cm.end());
    std::ostringstream detail;
    detail << " pipeline medians";
    for (double v : pm) detail << ' ' << v;
    detail << " (fluct " << pf << "); control medians";
    for (double v : cm) detail << ' ' << v;
    detail << " (fluct " << cf << ")";
    c.pass = pf <= 0.10 && cf > 0.10;
    c.detail = detail.str();
    return c;
}

/// Criterion 3: at 30% noise the pipeline beats the uncorrected control by
/// >= 0.15 F1 absolute (median of 5 seeds, 1:10 test ratio).
Criterion criterion_uplift(const EndToEnd& e) {
    Criterion c{3, "end-to-end uplift at 30% noise >= 0.15 F1"};
    std::size_t idx = 1;  // ratio 0.30
    double pipe = median(e.pipe_f1[idx]);
    double ctrl = median(e.ctrl_f1[idx]);
    std::ostringstream detail;
    detail << " pipeline " << pipe << " control " << ctrl << " uplift "
           << pipe - ctrl;
    c.pass = pipe - ctrl >= 0.15;
    c.detail = detail.str();
    return c;
}

/// Criterion 4: on a drifted-template test set with clean training labels,
/// augmentation raises recall by >= 0.05 with precision drop <= 0.05
/// (median of 5 seeds).
Criterion criterion_augmentation() {
    Criterion c{4, "augmentation on drifted templates: recall +0.05, precision -<=0.05"};
    std::vector<double> d_recall, d_precision;
    std::ostringstream detail;
    for (std::uint64_t seed : {1, 2, 3, 4, 5}) {
        Rng rng(seed);
        const int d = 2;
        std::vector<Vec> normal, malicious;
        std::vector<Vec> train_x;
        std::vector<int> train_y;
        for (int i = 0; i < 500; ++i) {
            Vec v(d);
            v << 0.3 * rng.normal(), 0.3 * rng.normal();
            normal.push_back(v);
            train_x.push_back(v);
            train_y.push_back(0);
        }
        // Three training behavior templates on a ring.
        const double kPi = 3.14159265358979323846;
        for (double deg : {10.0, 130.0, 250.0}) {
            double a = deg * kPi / 180.0;
            for (int i = 0; i < 150; ++i) {
                Vec v(d);
                v << 4.0 * std::cos(a) + 0.25 * rng.normal(),
                    4.0 * std::sin(a) + 0.25 * rng.normal();
                malicious.push_back(v);
                train_x.push_back(v);
                train_y.push_back(1);
            }
        }
        // Drifted templates: new angles in the sparse band between the
        // normal cluster and the training ring, test only. The plain
        // detector's boundary tends to sit beyond them; augmentation fills
        // the band with boundary samples and pulls it inward.
        std::vector<Vec> test_x;
        std::vector<int> test_y;
        for (int i = 0; i < 400; ++i) {
            Vec v(d);
            v << 0.3 * rng.normal(), 0.3 * rng.normal();
            test_x.push_back(v);
            test_y.push_back(0);
        }
        for (double deg : {70.0, 190.0, 310.0}) {
            double a = deg * kPi / 180.0;
            for (int i = 0; i < 50; ++i) {
                Vec v(d);
                v << 2.0 * std::cos(a) + 0.25 * rng.normal(),
                    2.0 * std::sin(a) + 0.25 * rng.normal();
                test_x.push_back(v);
                test_y.push_back(1);
            }
        }

        auto p_normal = density::fit_density(normal, small_made(60), derive_seed(seed, 1));
        auto p_malicious =
            density::fit_density(malicious, small_made(60), derive_seed(seed, 2));
        auto thresholds = augment::resolve_thresholds(p_normal, p_malicious, normal,
                                                      malicious, 0.05, {0.1, 0.2, 0.3});
        augment::GanConfig gcfg;
        gcfg.latent = 8;
        gcfg.steps = 400;
        gcfg.batch = 32;
        gcfg.lr = 1e-3;
        auto synth = augment::synthesize(normal, malicious, p_normal, p_malicious,
                                         thresholds, 2, 120, gcfg, derive_seed(seed, 3));

        detector::DetectorConfig dcfg;
        dcfg.epochs = 30;
        dcfg.batch = 64;
        dcfg.schedule = {0.0, 0};

        auto eval = [&](const detector::DetectorModel& m) {
            std::vector<int> preds;
            for (const auto& p : m.predict(test_x)) preds.push_back(p.label);
            return bench::compute_metrics(preds, test_y);
        };
        auto base = eval(detector::train_detector(train_x, train_y, dcfg,
                                                  derive_seed(seed, 4)));
        auto aug_x = train_x;
        auto aug_y = train_y;
        for (std::size_t i = 0; i < synth.vectors.size(); ++i) {
            aug_x.push_back(synth.vectors[i]);
            aug_y.push_back(synth.labels[i]);
        }
        auto with = eval(detector::train_detector(aug_x, aug_y, dcfg,
                                                  derive_seed(seed, 4)));
        d_recall.push_back(with.recall - base.recall);
        d_precision.push_back(base.precision - with.precision);
        detail << " seed" << seed << ": recall " << base.recall << "->" << with.recall
               << " precision " << base.precision << "->" << with.precision << ";";
    }
    double mr = median(d_recall), mp = median(d_precision);
    c.pass = mr >= 0.05 && mp <= 0.05;
    c.detail = " median recall gain " + std::to_string(mr) +
               ", median precision drop " + std::to_string(mp) + ";" + detail.str();
    return c;
}

/// Criterion 5: density exactness. log_density vs independent recomputation
/// within 1e-6 relative on 100 random inputs; 2-D normalization quadrature
/// within 2%; mask_check clean; all within 60s.
Criterion criterion_density() {
    Criterion c{5, "density exactness: oracle 1e-6, quadrature 2%, masks clean"};
    double t0 = now_seconds();
    Rng rng(7);
    auto cloud3 = random_vecs(300, 3, rng);
    auto m3 = density::fit_density(cloud3, small_made(30), 11);
    double worst = 0;
    for (int t = 0; t < 100; ++t) {
        Vec x(3);
        for (int j = 0; j < 3; ++j) x[j] = rng.uniform(-3, 3);
        double got = m3.log_density(x);
        double want = oracle_log_density(m3, x);
        worst = std::max(worst, std::abs(got - want) / std::max(1.0, std::abs(want)));
    }

    auto cloud2 = random_vecs(400, 2, rng);
    auto m2 = density::fit_density(cloud2, small_made(40), 13);
    const double step = 0.04;
    double integral = 0;
    for (double a = -8.0; a < 8.0; a += step)
        for (double b = -8.0; b < 8.0; b += step) {
            Vec x(2);
            x << a + step / 2, b + step / 2;
            integral += std::exp(m2.log_density(x)) * step * step;
        }

    bool masks_ok = m3.mask_check().ok() && m2.mask_check().ok();
    double elapsed = now_seconds() - t0;
    std::ostringstream detail;
    detail << " worst rel err " << worst << ", integral " << integral << ", masks "
           << (masks_ok ? "clean" : "VIOLATED") << ", time "
           << static_cast<int>(elapsed) << "s";
    c.pass = worst <= 1e-6 && std::abs(integral - 1.0) <= 0.02 && masks_ok &&
             elapsed <= 60.0;
    c.detail = detail.str();
    return c;
}

/// Criterion 6: structural arithmetic, bit-exact.
Criterion criterion_structural() {
    Criterion c{6, "structural arithmetic: 2BH dims, seed size laws, flip counts, metrics"};
    bool ok = true;
    std::ostringstream detail;

    // Feature dimension = 2BH for 5 random (B, H) pairs.
    Rng rng(3);
    flows::LengthSequence seq;
    seq.tokens = {1, 2, 3, 0, 0, 0};
    seq.true_len = 3;
    for (int t = 0; t < 5; ++t) {
        autoencoder::AeSpec spec;
        spec.L = 8;
        spec.V = 4;
        spec.B = static_cast<int>(rng.integer(1, 3));
        spec.H = static_cast<int>(rng.integer(2, 9));
        spec.n = 6;
        autoencoder::AeModel m(spec, 100 + t);
        if (m.encode(seq).size() != 2 * spec.B * spec.H) ok = false;
    }
    detail << " dims ok;";

    // Seed set size laws on |D| in {100, 1000} and alpha in {0.4, 0.5, 0.6}.
    relabel::CorrectionConfig ccfg;
    ccfg.density = small_made(0);
    for (int per_class : {50, 500}) {
        for (double alpha : {0.4, 0.5, 0.6}) {
            ccfg.alpha = alpha;
            auto D = cluster_scatter(per_class, 4, 0.2, 5);
            auto res = relabel::correct_labels(D, ccfg, 2);
            std::size_t h = static_cast<std::size_t>(
                std::ceil(alpha * static_cast<double>(D.size())));
            std::size_t ns = 0, ms = 0;
            for (auto p : res.provenance) {
                if (p == relabel::Provenance::SeedNormal) ++ns;
                if (p == relabel::Provenance::SeedMalicious) ++ms;
            }
            if (res.high_density_size != h || res.seed_size != h / 2 ||
                ns != h / 2 || ms != h / 2)
                ok = false;
        }
    }
    detail << " size laws ok;";

    // Exact symmetric flip counts.
    bench::CorpusConfig cc;
    cc.train_normal = 200;
    cc.train_malicious = 200;
    cc.test_normal = 1;
    cc.test_malicious = 1;
    cc.n = 8;
    cc.max_len = 200;
    auto corpus = bench::synth_corpus(cc);
    bench::NoiseSpec spec;
    spec.ratio = 0.25;
    bench::inject_noise(corpus.train, spec, 4);
    long f0 = 0, f1 = 0;
    for (const auto& s : corpus.train)
        if (s.noisy_label != s.true_label) (s.true_label == 0 ? f0 : f1)++;
    if (f0 != 50 || f1 != 50) ok = false;
    detail << " flips " << f0 << "/" << f1 << ";";

    // Metrics vs. a hand confusion table: tp=3 fp=1 fn=2 tn=4.
    std::vector<int> pred{1, 1, 1, 1, 0, 0, 0, 0, 0, 0};
    std::vector<int> truth{1, 1, 1, 0, 1, 1, 0, 0, 0, 0};
    auto m = bench::compute_metrics(pred, truth);
    double pr = 3.0 / 4.0, rc = 3.0 / 5.0;
    if (m.tp != 3 || m.fp != 1 || m.fn != 2 || m.tn != 4 || m.precision != pr ||
        m.recall != rc || m.f1 != 2.0 * pr * rc / (pr + rc))
        ok = false;
    detail << " metrics ok";

    c.pass = ok;
    c.detail = detail.str();
    return c;
}

/// Criterion 7: generator/discriminator losses vs. scalar oracles on 10
/// fixed batches each within 1e-6; pull-away exactly 0 and 1.
Criterion criterion_losses() {
    Criterion c{7, "loss oracles within 1e-6; pull-away endpoints exact"};
    bool ok = true;
    std::ostringstream detail;

    Vec e1(2), e2(2);
    e1 << 1, 0;
    e2 << 0, 1;
    if (augment::pull_away({e1, e2}) != 0.0) ok = false;
    if (augment::pull_away({e1, e1}) != 1.0) ok = false;

    auto pn = pinned_gaussian(0.0, "c7n");
    auto pm = pinned_gaussian(4.0, "c7m");
    augment::RegionThresholds t{-5.0, -4.0, -3.0, -1.0};
    Rng rng(21);
    augment::Discriminator disc;
    disc.init(2, rng);

    double worst_g = 0;
    for (int trial = 0; trial < 10; ++trial) {
        auto batch = random_vecs(6, 2, rng, 2.0);
        auto region = static_cast<augment::Region>(trial % 3);
        auto [th1, th2] = augment::region_bounds(region, t);
        double expect = -oracle_pull_away(batch);
        double spm = 0, slo = 0, shi = 0;
        int npm = 0, nlo = 0, nhi = 0;
        for (const auto& x : batch) {
            double lpm = pinned_logp(x, 4.0);
            if (lpm >= t.gamma) {
                spm += lpm;
                ++npm;
                continue;
            }
            double lpn = pinned_logp(x, 0.0);
            if (lpn < th1) {
                slo += lpn;
                ++nlo;
            } else if (lpn >= th2) {
                shi += lpn;
                ++nhi;
            }
        }
        if (npm) expect += spm / npm;
        if (nlo) expect -= slo / nlo;
        if (nhi) expect += shi / nhi;
        double got = augment::generator_loss(batch, pn, pm, t, region, disc, {});
        worst_g = std::max(worst_g,
                           std::abs(got - expect) / std::max(1.0, std::abs(expect)));
    }
    if (worst_g > 1e-6) ok = false;

    double worst_d = 0;
    for (int trial = 0; trial < 10; ++trial) {
        augment::Discriminator d2;
        d2.init(2, rng);
        auto xn = random_vecs(5, 2, rng);
        auto xm = random_vecs(4, 2, rng);
        auto a = random_vecs(3, 2, rng);
        auto b = random_vecs(2, 2, rng);
        auto g = random_vecs(6, 2, rng);
        auto mean_log = [&](const std::vector<Vec>& xs, bool om) {
            double s = 0;
            for (const auto& x : xs) {
                double p = std::clamp(d2.prob(x), 1e-7, 1.0 - 1e-7);
                s += std::log(om ? 1.0 - p : p);
            }
            return s / static_cast<double>(xs.size());
        };
        double expect = mean_log(xn, false) + mean_log(xm, true) + mean_log(a, true) +
                        mean_log(b, true) + mean_log(g, false);
        double got = augment::discriminator_loss(xn, xm, a, b, g, d2);
        worst_d = std::max(worst_d,
                           std::abs(got - expect) / std::max(1.0, std::abs(expect)));
    }
    if (worst_d > 1e-6) ok = false;

    detail << " worst generator rel err " << worst_g << ", worst discriminator rel err "
           << worst_d;
    c.pass = ok;
    c.detail = detail.str();
    return c;
}

/// Criterion 8: region disjointness on a 10^4-point density grid; trained
/// generators hit their regions >= 60% on the 2-D toy and beat untrained.
Criterion criterion_regions() {
    Criterion c{8, "region disjointness + trained hit-rate >= 0.60 > untrained"};
    bool ok = true;
    augment::RegionThresholds t{-5.0, -4.0, -3.0, -1.0};
    for (int a = 0; a < 100 && ok; ++a)
        for (int b = 0; b < 100; ++b) {
            double pn = -8.0 + 0.08 * a;
            double pm = -8.0 + 0.08 * b;
            int matches = 0;
            if (pm < t.gamma && pn < t.omega1) ++matches;
            if (pm < t.gamma && t.omega1 <= pn && pn < t.omega2) ++matches;
            if (pm < t.gamma && t.omega2 <= pn && pn < t.omega3) ++matches;
            auto r = augment::region_from_densities(pn, pm, t);
            if (matches > 1 || (r == augment::Region::None) != (matches == 0)) {
                ok = false;
                break;
            }
        }

    auto pn = pinned_gaussian(0.0, "c8n");
    auto pm = pinned_gaussian(4.0, "c8m");
    Rng rng(17);
    auto d_normal = random_vecs(40, 2, rng, 0.5);
    auto d_mal = random_vecs(40, 2, rng, 0.5);
    for (auto& v : d_mal) v.array() += 4.0;

    auto hit_rate = [&](const augment::GanInstance& g) {
        Rng sampler(5);
        int hits = 0, total = 0;
        for (auto region : {augment::Region::MB, augment::Region::MO,
                            augment::Region::NB}) {
            for (const auto& x : g.generator(region).sample_batch(200, sampler)) {
                if (augment::region_of(x, pn, pm, t) == region) ++hits;
                ++total;
            }
        }
        return static_cast<double>(hits) / total;
    };

    augment::GanConfig gcfg;
    gcfg.latent = 8;
    gcfg.steps = 600;
    gcfg.batch = 32;
    gcfg.lr = 2e-3;
    auto trained = augment::train_gan(d_normal, d_mal, pn, pm, t, gcfg, 23);
    augment::GanConfig zero = gcfg;
    zero.steps = 0;
    auto untrained = augment::train_gan(d_normal, d_mal, pn, pm, t, zero, 23);
    double ht = hit_rate(trained), hu = hit_rate(untrained);

    std::ostringstream detail;
    detail << " grid " << (ok ? "disjoint" : "OVERLAP") << ", trained hit-rate " << ht
           << ", untrained " << hu;
    c.pass = ok && ht >= 0.60 && ht > hu;
    c.detail = detail.str();
    return c;
}

/// Criterion 9: byte-identical experiment tables on two runs of a 1-cell
/// grid with a fixed seed; the full desk pipeline finishes within 20 min.
Criterion criterion_determinism() {
    Criterion c{9, "experiment determinism + <= 20 min desk pipeline"};
    auto cfg = config::parse_config_text(
        "[flows]\nn = 20\nmax_len = 300\n"
        "[autoencoder]\nV = 8\nB = 1\nH = 4\nepochs = 5\n"
        "[density]\nK = 5\nhidden_mult = 4\nepochs = 25\n"
        "[augment]\neta = 2\nper_region = 40\nlatent = 8\nsteps = 150\nlr = 1e-3\n"
        "[detector]\nepochs = 20\nforget_rate = 0.2\n"
        "[bench]\nnormal_templates = 2\nmalicious_templates = 4\n"
        "drifted_templates = 1\nnormal_jitter = 10\nmalicious_jitter = 120\n"
        "test_normal = 300\ntest_malicious = 60\n");
    bench::ExperimentGrid grid;
    grid.train_sizes = {150};
    grid.noise_ratios = {0.3};
    grid.seeds = {7};
    grid.augment = true;
    grid.plain_control = true;

    double t0 = now_seconds();
    auto table1 = bench::result_table(bench::run_experiment(grid, cfg));
    double elapsed = now_seconds() - t0;
    auto table2 = bench::result_table(bench::run_experiment(grid, cfg));

    std::ostringstream detail;
    detail << " tables " << (table1 == table2 ? "identical" : "DIFFER") << ", run time "
           << static_cast<int>(elapsed) << "s";
    c.pass = table1 == table2 && elapsed <= 1200.0;
    c.detail = detail.str();
    return c;
}

Criterion guarded(Criterion (*fn)(), int id, const std::string& name) {
    try {
        return fn();
    } catch (const std::exception& e) {
        Criterion c{id, name};
        c.pass = false;
        c.detail = std::string(" exception: ") + e.what();
        return c;
    }
}

}  // namespace

int main() {
    std::vector<Criterion> results;
    results.push_back(guarded(criterion_correction, 1, "label correction"));

    try {
        auto e = run_end_to_end();
        results.push_back(criterion_flatness(e));
        results.push_back(criterion_uplift(e));
    } catch (const std::exception& ex) {
        for (int id : {2, 3}) {
            Criterion c{id, "end-to-end"};
            c.detail = std::string(" exception: ") + ex.what();
            results.push_back(c);
        }
    }

    results.push_back(guarded(criterion_augmentation, 4, "augmentation"));
    results.push_back(guarded(criterion_density, 5, "density exactness"));
    results.push_back(guarded(criterion_structural, 6, "structural arithmetic"));
    results.push_back(guarded(criterion_losses, 7, "loss oracles"));
    results.push_back(guarded(criterion_regions, 8, "region behavior"));
    results.push_back(guarded(criterion_determinism, 9, "determinism"));

    std::sort(results.begin(), results.end(),
              [](const Criterion& a, const Criterion& b) { return a.id < b.id; });
    int failures = 0;
    for (const auto& r : results) {
        std::printf("[%s] criterion %d: %s —%s\n", r.pass ? "PASS" : "FAIL", r.id,
                    r.name.c_str(), r.detail.c_str());
        if (!r.pass) ++failures;
    }
    std::printf("%d/%zu criteria passed\n",
                static_cast<int>(results.size()) - failures, results.size());
    return failures == 0 ? 0 : 1;
}
