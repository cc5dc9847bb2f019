#pragma once

#include <string>
#include <vector>

#include "flowsift/config.hpp"
#include "flowsift/flows.hpp"
#include "flowsift/relabel.hpp"

namespace flowsift::bench {

/// Synthetic corpus shape: normal traffic from a few prototypes with small
/// jitter (dense), malicious traffic from many prototypes with wide jitter
/// (scattered), plus drifted malicious prototypes that appear only in the
/// test split.
struct CorpusConfig {
    int normal_templates = 3;
    int malicious_templates = 12;
    int drifted_templates = 3;
    long normal_jitter = 10;
    long malicious_jitter = 300;
    int train_normal = 500;
    int train_malicious = 500;
    int test_normal = 1000;
    int test_malicious = 100;
    int n = 50;
    long max_len = 1500;
    std::uint64_t seed = 1;
};

struct BenchSample {
    std::string id;
    flows::Flow flow;
    int true_label = 0;
    int noisy_label = 0;   // starts equal to true_label
    int template_id = 0;   // global template index
};

struct Corpus {
    std::vector<BenchSample> train;
    std::vector<BenchSample> test;
    std::vector<int> drifted_template_ids;
    std::vector<int> normal_template_ids;
    std::vector<int> malicious_template_ids;
};

Corpus synth_corpus(const CorpusConfig& cfg);

enum class NoiseMode { Symmetric, Template };

struct NoiseSpec {
    NoiseMode mode = NoiseMode::Symmetric;
    double ratio = 0.0;             // in [0, 0.5)
    std::vector<int> withheld;      // template mode: template ids to flip
};

/// Symmetric mode toggles exactly floor(ratio * class count) labels in each
/// class. Template mode toggles every sample of the withheld templates, in
/// id order, up to a budget of floor(ratio * |dataset|). Flips are
/// involutive: re-injecting with the same spec and seed restores the
/// original labels.
void inject_noise(std::vector<BenchSample>& dataset, const NoiseSpec& spec,
                  std::uint64_t seed);

struct MetricsReport {
    long tp = 0, fp = 0, fn = 0, tn = 0;
    double precision = 0.0, recall = 0.0, f1 = 0.0;
};

MetricsReport compute_metrics(const std::vector<int>& predicted,
                              const std::vector<int>& truth);
MetricsReport compute_metrics(const std::vector<std::string>& pred_ids,
                              const std::vector<int>& predicted,
                              const std::vector<std::string>& truth_ids,
                              const std::vector<int>& truth);

struct ExperimentGrid {
    std::vector<int> train_sizes{500};      // per-class training counts
    std::vector<double> noise_ratios{0.3};
    std::vector<NoiseMode> modes{NoiseMode::Symmetric};
    std::vector<std::uint64_t> seeds{1, 2, 3};
    bool plain_control = true;
    bool augment = true;
};

struct CellResult {
    int train_size = 0;
    double noise_ratio = 0.0;
    NoiseMode mode = NoiseMode::Symmetric;
    std::uint64_t seed = 0;
    MetricsReport pipeline;
    MetricsReport control;
    relabel::CorrectionReport correction;
};

struct PipelineOutcome {
    MetricsReport pipeline;
    MetricsReport control;
    relabel::CorrectionReport correction;
};

/// One full pipeline run over a prepared (already noisy) feature set.
PipelineOutcome run_pipeline(const std::vector<relabel::LabeledSample>& train,
                             const std::vector<Vec>& test_features,
                             const std::vector<int>& test_truth,
                             const config::PipelineConfig& cfg, std::uint64_t seed,
                             bool with_augment, bool with_control);

std::vector<CellResult> run_experiment(const ExperimentGrid& grid,
                                       const config::PipelineConfig& cfg);

/// Tab-separated result table with per-seed rows and one mean+-std
/// aggregate row per cell.
std::string result_table(const std::vector<CellResult>& results);

std::string to_string(NoiseMode m);
NoiseMode noise_mode_from_string(const std::string& s);

}  // namespace flowsift::bench
