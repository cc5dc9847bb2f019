#pragma once

#include <optional>
#include <string>
#include <vector>

#include "flowsift/density.hpp"

namespace flowsift::relabel {

struct LabeledSample {
    std::string id;
    Vec features;
    int noisy_label = 0;                // 0 normal, 1 malicious
    std::optional<int> true_label;      // harness-only ground truth
};

struct CorrectionConfig {
    double alpha = 0.5;  // fraction of D kept as the high-density set
    density::MadeConfig density;
};

enum class Provenance { SeedNormal, SeedMalicious, Inferred };

std::string to_string(Provenance p);

struct CorrectionResult {
    std::vector<int> corrected;          // per input index
    std::vector<Provenance> provenance;  // per input index
    std::size_t high_density_size = 0;   // |H~|
    std::size_t seed_size = 0;           // |N_s| = |M_s|
    std::vector<double> log_densities;   // per input index
    std::vector<std::string> warnings;
};

/// Density-guided relabeling: fit the density model on normal-labeled
/// samples, pick dense/close seeds as normal and far seeds as malicious,
/// then infer the remaining labels with the seven-classifier majority vote.
CorrectionResult correct_labels(const std::vector<LabeledSample>& D,
                                const CorrectionConfig& cfg, std::uint64_t seed);

struct CorrectionReport {
    double remaining_noise_ratio = 0.0;
    double corrected_noise_proportion = 0.0;
    std::size_t originally_wrong = 0;
    std::size_t still_wrong = 0;
};

CorrectionReport correction_report(const CorrectionResult& result,
                                   const std::vector<LabeledSample>& D);

void save_correction_report(const CorrectionResult& result,
                            const std::vector<LabeledSample>& D,
                            const std::string& path,
                            const std::string& provenance = "");

}  // namespace flowsift::relabel
