#pragma once

#include <string>
#include <vector>

#include "flowsift/nn.hpp"

namespace flowsift::density {

struct MadeConfig {
    int K = 10;                 // mixture components per conditional
    std::vector<int> hidden;    // empty -> two layers of width 8*d
    int epochs = 100;
    int batch = 64;
    double lr = 1e-3;
};

/// Gaussian-mixture parameters of one conditional p(x_i | x_<i).
struct Conditional {
    Vec logits;      // K, softmax-normalized weights
    Vec means;       // K
    Vec log_scales;  // K, scale = 1e-3 + exp(log_scale)
};

struct MaskViolation {
    int conditional;  // i: parameters of p(x_i | ...)
    int input;        // j: input whose perturbation leaked into zeta_i
};

struct MaskReport {
    std::vector<MaskViolation> violations;
    bool ok() const { return violations.empty(); }
};

/// Masked autoregressive density estimator with Gaussian-mixture
/// conditionals over the natural variable ordering. Masked weights are
/// identically zero, so the autoregressive property holds bit-exactly.
class MadeModel {
public:
    MadeModel() = default;
    MadeModel(int d, const MadeConfig& cfg, std::uint64_t seed);

    int dim() const { return d_; }
    int components() const { return K_; }
    const std::vector<int>& hidden_widths() const { return widths_; }
    const std::vector<double>& loss_history() const { return loss_history_; }
    const std::vector<std::string>& warnings() const { return warnings_; }

    /// Parameters of all d conditionals at input x.
    std::vector<Conditional> conditionals(const Vec& x) const;

    double log_density(const Vec& x) const;
    /// Gradient of log density with respect to x (used by the GAN losses).
    Vec log_density_grad(const Vec& x, double* log_density_out = nullptr) const;

    /// Perturbs each input and checks that later-or-equal conditionals are
    /// bit-exactly unchanged.
    MaskReport mask_check() const;

    void save(const std::string& path, const std::string& provenance = "") const;
    static MadeModel load(const std::string& path);

    friend MadeModel fit_density(const std::vector<Vec>& X, const MadeConfig& cfg,
                                 std::uint64_t seed);

    // Test hook: corrupt one mask edge to verify the violation detector.
    void corrupt_mask_for_test(int layer, int row, int col, double w);

private:
    Mat theta(const Mat& X) const;  // batch x (3K*d) conditional parameters
    double batch_step(const Mat& X, nn::Adam& opt);

    int d_ = 0;
    int K_ = 0;
    std::vector<int> widths_;
    std::vector<nn::Linear> layers_;  // hidden layers + output layer at back
    std::vector<Mat> masks_;          // one per layer, same shape as W
    std::vector<double> loss_history_;
    std::vector<std::string> warnings_;
};

MadeModel fit_density(const std::vector<Vec>& X, const MadeConfig& cfg,
                      std::uint64_t seed);

inline double log_density(const MadeModel& m, const Vec& x) {
    return m.log_density(x);
}

}  // namespace flowsift::density
