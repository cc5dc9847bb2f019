#pragma once

#include <string>
#include <vector>

#include "flowsift/nn.hpp"

namespace flowsift::detector {

struct ForgetSchedule {
    double rate = 0.1;  // target forget rate in [0, 1)
    int ramp = 10;      // epochs to reach the target

    double at(int epoch) const {
        if (ramp <= 0) return rate;
        return rate * std::min(1.0, static_cast<double>(epoch) / ramp);
    }
};

struct DetectorConfig {
    int epochs = 50;
    int batch = 32;
    double lr = 1e-3;
    ForgetSchedule schedule;
};

/// Feed-forward peer: d -> 64 -> 32 -> 2 softmax.
struct Mlp {
    nn::Linear l1, l2, l3;
    void init(int in_dim, Rng& rng);
};

struct Prediction {
    double score = 0.0;  // malicious-class probability
    int label = 0;       // 1 iff score >= 0.5
};

/// Per-sample cross-entropy losses of one peer over the rows of X.
Vec peer_losses(const Mlp& m, const Mat& X, const std::vector<int>& y);

/// Positions of the `keep` smallest losses, stable order.
std::vector<int> small_loss_subset(const Vec& losses, std::size_t keep);

/// Twin networks trained with co-teaching: per batch each peer keeps its
/// own small-loss subset, which is then used to update the other peer.
/// Inference uses peer A.
class DetectorModel {
public:
    DetectorModel() = default;
    DetectorModel(int dim, std::uint64_t seed);

    int dim() const { return dim_; }
    const std::vector<double>& loss_history_a() const { return loss_a_; }
    const std::vector<double>& loss_history_b() const { return loss_b_; }

    Prediction predict_one(const Vec& x) const;
    std::vector<Prediction> predict(const std::vector<Vec>& X) const;

    void save(const std::string& path, const std::string& provenance = "") const;
    static DetectorModel load(const std::string& path);

    friend DetectorModel train_detector(const std::vector<Vec>& X,
                                        const std::vector<int>& y,
                                        const DetectorConfig& cfg,
                                        std::uint64_t seed);
    friend DetectorModel train_plain(const std::vector<Vec>& X,
                                     const std::vector<int>& y,
                                     const DetectorConfig& cfg, std::uint64_t seed);

    /// Exact per-batch keep count: ceil((1 - rate) * batch_size).
    static std::size_t keep_count(double rate, std::size_t batch_size);

    const Mlp& peer_a() const { return peer_a_; }
    const Mlp& peer_b() const { return peer_b_; }

    struct BatchTrace {
        std::vector<int> sel_a, sel_b;  // batch positions kept by each peer
    };
    /// One co-teaching batch over the rows of X (selection + cross update),
    /// reporting each peer's small-loss selection.
    BatchTrace coteach_batch(const Mat& X, const std::vector<int>& y, double rate,
                             double lr);
    /// Cross update with explicit selections: sel_a trains peer B, sel_b
    /// trains peer A.
    void coteach_apply(const Mat& X, const std::vector<int>& y,
                       const std::vector<int>& sel_a, const std::vector<int>& sel_b,
                       double lr);

private:
    int dim_ = 0;
    Mlp peer_a_, peer_b_;
    std::vector<double> loss_a_, loss_b_;
};

DetectorModel train_detector(const std::vector<Vec>& X, const std::vector<int>& y,
                             const DetectorConfig& cfg, std::uint64_t seed);

/// Single-network control (no co-teaching): trains peer A on every sample
/// and mirrors it into peer B.
DetectorModel train_plain(const std::vector<Vec>& X, const std::vector<int>& y,
                          const DetectorConfig& cfg, std::uint64_t seed);

void save_predictions(const std::vector<std::string>& ids,
                      const std::vector<Prediction>& preds, const std::string& path,
                      const std::string& provenance = "");

}  // namespace flowsift::detector
