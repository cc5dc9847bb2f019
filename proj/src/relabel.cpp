#include "flowsift/relabel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "flowsift/classifiers.hpp"

namespace flowsift::relabel {

std::string to_string(Provenance p) {
    switch (p) {
        case Provenance::SeedNormal: return "N_s";
        case Provenance::SeedMalicious: return "M_s";
        case Provenance::Inferred: return "inferred";
    }
    return "?";
}

CorrectionResult correct_labels(const std::vector<LabeledSample>& D,
                                const CorrectionConfig& cfg, std::uint64_t seed) {
    const std::size_t n = D.size();
    if (n < 8) throw Error("correct_labels: need at least 8 samples");
    if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0))
        throw Error("correct_labels: alpha must be in (0,1)");

    std::vector<Vec> normals;
    for (const auto& s : D)
        if (s.noisy_label == 0) normals.push_back(s.features);
    if (normals.empty()) throw Error("no normal-labeled samples");

    CorrectionResult res;
    auto model = density::fit_density(normals, cfg.density, seed);
    for (const auto& w : model.warnings()) res.warnings.push_back(w);

    res.log_densities.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        res.log_densities[i] = model.log_density(D[i].features);

    // H~: the ceil(alpha*|D|) highest-density samples, ties by index order.
    const std::size_t h_size =
        static_cast<std::size_t>(std::ceil(cfg.alpha * static_cast<double>(n)));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return res.log_densities[a] > res.log_densities[b];
    });
    std::vector<std::size_t> high(order.begin(), order.begin() + h_size);
    res.high_density_size = h_size;

    const std::size_t ns_size = h_size / 2;
    if (ns_size == 0) throw Error("alpha too small for dataset size");
    res.seed_size = ns_size;

    // N_s: members of H~ closest on average to the other members
    // (self-distance excluded).
    std::vector<double> mean_dist(high.size(), 0.0);
    for (std::size_t a = 0; a < high.size(); ++a) {
        double sum = 0;
        for (std::size_t b = 0; b < high.size(); ++b) {
            if (a == b) continue;
            sum += (D[high[a]].features - D[high[b]].features).norm();
        }
        mean_dist[a] = high.size() > 1 ? sum / static_cast<double>(high.size() - 1) : 0.0;
    }
    std::vector<std::size_t> hidx(high.size());
    std::iota(hidx.begin(), hidx.end(), 0);
    std::stable_sort(hidx.begin(), hidx.end(), [&](std::size_t a, std::size_t b) {
        if (mean_dist[a] != mean_dist[b]) return mean_dist[a] < mean_dist[b];
        return high[a] < high[b];
    });
    std::vector<char> in_ns(n, 0);
    std::vector<std::size_t> ns;
    for (std::size_t k = 0; k < ns_size; ++k) {
        ns.push_back(high[hidx[k]]);
        in_ns[high[hidx[k]]] = 1;
    }

    // M_s: from D \ N_s, the |N_s| samples with largest mean distance to N_s.
    std::vector<std::size_t> rest;
    for (std::size_t i = 0; i < n; ++i)
        if (!in_ns[i]) rest.push_back(i);
    std::vector<double> dist_to_ns(rest.size(), 0.0);
    for (std::size_t a = 0; a < rest.size(); ++a) {
        double sum = 0;
        for (std::size_t j : ns) sum += (D[rest[a]].features - D[j].features).norm();
        dist_to_ns[a] = sum / static_cast<double>(ns.size());
    }
    std::vector<std::size_t> ridx(rest.size());
    std::iota(ridx.begin(), ridx.end(), 0);
    std::stable_sort(ridx.begin(), ridx.end(), [&](std::size_t a, std::size_t b) {
        if (dist_to_ns[a] != dist_to_ns[b]) return dist_to_ns[a] > dist_to_ns[b];
        return rest[a] < rest[b];
    });
    std::vector<char> in_ms(n, 0);
    std::vector<std::size_t> ms;
    for (std::size_t k = 0; k < ns_size && k < ridx.size(); ++k) {
        ms.push_back(rest[ridx[k]]);
        in_ms[rest[ridx[k]]] = 1;
    }

    // Ensemble trained on the seeds infers everything else.
    const int d = static_cast<int>(D[0].features.size());
    Mat trainX(ns.size() + ms.size(), d);
    std::vector<int> trainY;
    Eigen::Index row = 0;
    for (std::size_t i : ns) {
        trainX.row(row++) = D[i].features.transpose();
        trainY.push_back(0);
    }
    for (std::size_t i : ms) {
        trainX.row(row++) = D[i].features.transpose();
        trainY.push_back(1);
    }
    auto ensemble = classifiers::make_ensemble();
    for (std::size_t c = 0; c < ensemble.size(); ++c)
        ensemble[c]->fit(trainX, trainY, derive_seed(seed, 100 + c));

    res.corrected.resize(n);
    res.provenance.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (in_ns[i]) {
            res.corrected[i] = 0;
            res.provenance[i] = Provenance::SeedNormal;
        } else if (in_ms[i]) {
            res.corrected[i] = 1;
            res.provenance[i] = Provenance::SeedMalicious;
        } else {
            res.corrected[i] = classifiers::majority_vote(ensemble, D[i].features);
            res.provenance[i] = Provenance::Inferred;
        }
    }
    return res;
}

CorrectionReport correction_report(const CorrectionResult& result,
                                   const std::vector<LabeledSample>& D) {
    if (result.corrected.size() != D.size())
        throw Error("correction_report: result/dataset size mismatch");
    CorrectionReport rep;
    std::size_t fixed = 0;
    for (std::size_t i = 0; i < D.size(); ++i) {
        if (!D[i].true_label)
            throw Error("correction_report: missing true label for sample " + D[i].id);
        bool was_wrong = D[i].noisy_label != *D[i].true_label;
        bool is_wrong = result.corrected[i] != *D[i].true_label;
        if (was_wrong) ++rep.originally_wrong;
        if (is_wrong) ++rep.still_wrong;
        if (was_wrong && !is_wrong) ++fixed;
    }
    rep.remaining_noise_ratio =
        static_cast<double>(rep.still_wrong) / static_cast<double>(D.size());
    rep.corrected_noise_proportion =
        rep.originally_wrong
            ? static_cast<double>(fixed) / static_cast<double>(rep.originally_wrong)
            : (rep.still_wrong == 0 ? 1.0 : 0.0);
    return rep;
}

void save_correction_report(const CorrectionResult& result,
                            const std::vector<LabeledSample>& D,
                            const std::string& path, const std::string& provenance) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write correction report '" + path + "'");
    if (!provenance.empty()) out << "# " << provenance << "\n";
    for (std::size_t i = 0; i < D.size(); ++i)
        out << D[i].id << ',' << D[i].noisy_label << ',' << result.corrected[i] << ','
            << to_string(result.provenance[i]) << '\n';
    out << "# summary\n";
    out << "# |D| = " << D.size() << ", |H~| = " << result.high_density_size
        << ", |N_s| = |M_s| = " << result.seed_size << '\n';
    bool have_truth = std::all_of(D.begin(), D.end(),
                                  [](const LabeledSample& s) { return s.true_label.has_value(); });
    if (have_truth) {
        auto rep = correction_report(result, D);
        out << "# remaining_noise_ratio = " << rep.remaining_noise_ratio
            << ", corrected_noise_proportion = " << rep.corrected_noise_proportion
            << '\n';
    }
    for (const auto& w : result.warnings) out << "# warning: " << w << '\n';
}

}  // namespace flowsift::relabel
