#pragma once

#include <string>
#include <vector>

#include "flowsift/flows.hpp"
#include "flowsift/gru.hpp"

namespace flowsift::autoencoder {

using flows::LengthSequence;

struct AeSpec {
    int L = 1501;  // vocabulary size (max_len + 1, token 0 = pad)
    int V = 32;    // embedding dimension
    int B = 2;     // stacked bidirectional layers
    int H = 8;     // hidden size per direction
    int n = 50;    // sequence length

    int feature_dim() const { return 2 * B * H; }
};

struct AeTrainConfig {
    int epochs = 50;
    int batch = 32;
    double lr = 1e-3;
};

/// Bi-GRU sequence autoencoder. Feature vector is the concatenation of the
/// final-step hidden states (both directions) of every encoder layer; the
/// first decoder layer receives that vector as its input at every step.
class AeModel {
public:
    AeModel() = default;
    AeModel(const AeSpec& spec, std::uint64_t seed);

    const AeSpec& spec() const { return spec_; }
    const std::vector<double>& loss_history() const { return loss_history_; }

    Vec encode(const LengthSequence& seq) const;
    std::vector<Vec> encode_batch(const std::vector<LengthSequence>& seqs) const;

    /// Per-position distributions over the L tokens (each sums to 1).
    std::vector<Vec> reconstruct(const LengthSequence& seq) const;

    void save(const std::string& path, const std::string& provenance = "") const;
    static AeModel load(const std::string& path);

    friend AeModel train_ae(const std::vector<LengthSequence>& sequences,
                            const AeSpec& spec, const AeTrainConfig& cfg,
                            std::uint64_t seed);

private:
    struct Forward;
    void check_sequence(const LengthSequence& seq) const;
    Forward forward(const std::vector<const LengthSequence*>& batch) const;
    double train_batch(const std::vector<const LengthSequence*>& batch,
                       nn::Adam& opt);

    AeSpec spec_;
    Mat embedding_;  // L x V
    Mat g_embedding_;
    std::vector<nn::BiGru> encoder_;
    std::vector<nn::BiGru> decoder_;
    nn::Linear recon_;  // 2H -> L
    std::vector<double> loss_history_;
};

AeModel train_ae(const std::vector<LengthSequence>& sequences, const AeSpec& spec,
                 const AeTrainConfig& cfg, std::uint64_t seed);

// Feature store: sample_id,label,v1 v2 ... v_d per line.
struct FeatureRecord {
    std::string id;
    int label = 0;
    Vec features;
    std::optional<int> true_label;  // harness-only fourth column
};

void save_feature_file(const std::vector<FeatureRecord>& recs,
                       const std::string& path,
                       const std::string& provenance = "");
std::vector<FeatureRecord> load_feature_file(const std::string& path);

}  // namespace flowsift::autoencoder
