#pragma once

#include <string>

#include "flowsift/augment.hpp"
#include "flowsift/autoencoder.hpp"
#include "flowsift/density.hpp"
#include "flowsift/detector.hpp"

namespace flowsift::config {

/// Whole-pipeline configuration, one section per stage. Defaults match
/// the reference parameterization (n=50, V=32, H=8, B=2, alpha=0.5,
/// percentile thresholds 0.05/0.1/0.2/0.3, eta=5). The feature dimension
/// d is always recomputed as 2*B*H and cannot be set.
struct PipelineConfig {
    struct Flows {
        int n = 50;
        long max_len = 1500;
    } flows;

    autoencoder::AeSpec ae_spec;        // L derived from flows.max_len
    autoencoder::AeTrainConfig ae_train;

    struct Density {
        int K = 10;
        int hidden_mult = 8;  // hidden width = hidden_mult * d, two layers
        int epochs = 100;
        int batch = 64;
        double lr = 1e-3;

        density::MadeConfig made(int d) const {
            density::MadeConfig m;
            m.K = K;
            m.hidden = {hidden_mult * d, hidden_mult * d};
            m.epochs = epochs;
            m.batch = batch;
            m.lr = lr;
            return m;
        }
    } density;

    struct Relabel {
        double alpha = 0.5;
    } relabel;

    struct Augment {
        double gamma_pct = 0.05;
        double omega1_pct = 0.1;
        double omega2_pct = 0.2;
        double omega3_pct = 0.3;
        int eta = 5;
        int per_region = 0;  // 0 = class size / 3
        augment::GanConfig gan;
    } augment;

    detector::DetectorConfig detector;

    struct Bench {
        int normal_templates = 3;
        int malicious_templates = 12;
        int drifted_templates = 3;
        long normal_jitter = 10;
        long malicious_jitter = 300;
        int test_normal = 1000;
        int test_malicious = 100;
    } bench;

    void validate() const;
};

/// key = value sections; unknown keys and malformed values are rejected
/// with the section and key named. Absent keys keep their defaults.
PipelineConfig parse_config(const std::string& path);
PipelineConfig parse_config_text(const std::string& text);
std::string serialize(const PipelineConfig& cfg);

std::uint64_t config_hash(const PipelineConfig& cfg);

}  // namespace flowsift::config
