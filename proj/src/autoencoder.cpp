#include "flowsift/autoencoder.hpp"

#include <fstream>
#include <numeric>
#include <sstream>

namespace flowsift::autoencoder {

AeModel::AeModel(const AeSpec& spec, std::uint64_t seed) : spec_(spec) {
    if (spec.L < 2 || spec.V < 1 || spec.B < 1 || spec.H < 1 || spec.n < 1)
        throw Error("invalid autoencoder spec");
    Rng rng(seed);
    embedding_ = Mat::NullaryExpr(spec.L, spec.V, [&]() { return rng.normal(0, 0.1); });
    g_embedding_ = Mat::Zero(spec.L, spec.V);
    encoder_.resize(spec.B);
    decoder_.resize(spec.B);
    for (int l = 0; l < spec.B; ++l)
        encoder_[l].init(l == 0 ? spec.V : 2 * spec.H, spec.H, rng);
    for (int l = 0; l < spec.B; ++l)
        decoder_[l].init(l == 0 ? spec.feature_dim() : 2 * spec.H, spec.H, rng);
    recon_.init(2 * spec.H, spec.L, rng);
}

void AeModel::check_sequence(const LengthSequence& seq) const {
    if (static_cast<int>(seq.tokens.size()) != spec_.n)
        throw Error("sequence length " + std::to_string(seq.tokens.size()) +
                    " does not match model n=" + std::to_string(spec_.n));
    for (int t : seq.tokens)
        if (t < 0 || t >= spec_.L)
            throw Error("token id " + std::to_string(t) + " outside vocabulary of " +
                        std::to_string(spec_.L));
}

struct AeModel::Forward {
    std::vector<Mat> emb;                      // per step, batch x V
    std::vector<nn::BiGru::Cache> enc;         // per encoder layer
    std::vector<std::vector<Mat>> enc_out;     // per layer, per step
    Mat feature;                               // batch x d
    std::vector<nn::BiGru::Cache> dec;
    std::vector<std::vector<Mat>> dec_in;      // input sequence per decoder layer
    std::vector<Mat> dec_out;                  // per step, batch x 2H
    std::vector<Mat> logits;                   // per step, batch x L
};

AeModel::Forward AeModel::forward(const std::vector<const LengthSequence*>& batch) const {
    const int n = spec_.n;
    const auto bs = static_cast<Eigen::Index>(batch.size());
    Forward f;
    f.emb.resize(n);
    for (int t = 0; t < n; ++t) {
        Mat x(bs, spec_.V);
        for (Eigen::Index b = 0; b < bs; ++b)
            x.row(b) = embedding_.row(batch[b]->tokens[t]);
        f.emb[t] = std::move(x);
    }

    const std::vector<Mat>* input = &f.emb;
    f.enc.resize(spec_.B);
    f.enc_out.resize(spec_.B);
    f.feature.resize(bs, spec_.feature_dim());
    for (int l = 0; l < spec_.B; ++l) {
        f.enc[l] = encoder_[l].forward(*input);
        f.enc_out[l].resize(n);
        for (int t = 0; t < n; ++t) f.enc_out[l][t] = encoder_[l].output_at(f.enc[l], t);
        f.feature.middleCols(l * 2 * spec_.H, 2 * spec_.H) =
            encoder_[l].final_states(f.enc[l]);
        input = &f.enc_out[l];
    }

    f.dec.resize(spec_.B);
    f.dec_in.resize(spec_.B);
    f.dec_in[0].assign(n, f.feature);  // feature replicated at every step
    for (int l = 0; l < spec_.B; ++l) {
        f.dec[l] = decoder_[l].forward(f.dec_in[l]);
        if (l + 1 < spec_.B) {
            f.dec_in[l + 1].resize(n);
            for (int t = 0; t < n; ++t)
                f.dec_in[l + 1][t] = decoder_[l].output_at(f.dec[l], t);
        }
    }
    f.dec_out.resize(n);
    f.logits.resize(n);
    for (int t = 0; t < n; ++t) {
        f.dec_out[t] = decoder_[spec_.B - 1].output_at(f.dec[spec_.B - 1], t);
        f.logits[t] = recon_.forward(f.dec_out[t]);
    }
    return f;
}

double AeModel::train_batch(const std::vector<const LengthSequence*>& batch,
                            nn::Adam& opt) {
    const int n = spec_.n;
    const auto bs = static_cast<Eigen::Index>(batch.size());
    Forward f = forward(batch);

    // Cross-entropy over positions before true_len; padding masked out.
    long active = 0;
    for (auto* s : batch) active += s->true_len;
    if (active == 0) return 0.0;

    double loss = 0.0;
    std::vector<Mat> dlogits(n, Mat::Zero(bs, spec_.L));
    for (int t = 0; t < n; ++t) {
        Mat probs = nn::softmax_rows(f.logits[t]);
        for (Eigen::Index b = 0; b < bs; ++b) {
            if (t >= batch[b]->true_len) continue;
            int target = batch[b]->tokens[t];
            loss -= std::log(std::max(probs(b, target), 1e-300));
            dlogits[t].row(b) = probs.row(b) / static_cast<double>(active);
            dlogits[t](b, target) -= 1.0 / static_cast<double>(active);
        }
    }
    loss /= static_cast<double>(active);

    g_embedding_.setZero();
    for (auto& l : encoder_) l.zero_grad();
    for (auto& l : decoder_) l.zero_grad();
    recon_.zero_grad();

    std::vector<Mat> d_dec_out(n);
    for (int t = 0; t < n; ++t)
        d_dec_out[t] = recon_.backward(f.dec_out[t], dlogits[t]);

    Mat no_final;
    for (int l = spec_.B - 1; l >= 0; --l) {
        d_dec_out = decoder_[l].backward(f.dec_in[l], f.dec[l], d_dec_out, no_final);
    }
    // d_dec_out now holds per-step gradients into the replicated feature.
    Mat dfeature = Mat::Zero(bs, spec_.feature_dim());
    for (int t = 0; t < n; ++t) dfeature += d_dec_out[t];

    std::vector<Mat> d_seq;  // gradient into the current encoder layer's outputs
    for (int l = spec_.B - 1; l >= 0; --l) {
        Mat dfinal = dfeature.middleCols(l * 2 * spec_.H, 2 * spec_.H);
        const std::vector<Mat>& input = (l == 0) ? f.emb : f.enc_out[l - 1];
        d_seq = encoder_[l].backward(input, f.enc[l], d_seq, dfinal);
    }
    for (int t = 0; t < n; ++t)
        for (Eigen::Index b = 0; b < bs; ++b)
            g_embedding_.row(batch[b]->tokens[t]) += d_seq[t].row(b);

    opt.step();
    return loss;
}

AeModel train_ae(const std::vector<LengthSequence>& sequences, const AeSpec& spec,
                 const AeTrainConfig& cfg, std::uint64_t seed) {
    if (sequences.empty()) throw Error("train_ae: no input sequences");
    AeModel model(spec, seed);
    for (const auto& s : sequences) model.check_sequence(s);

    nn::Adam opt(cfg.lr);
    opt.attach(&model.embedding_, &model.g_embedding_);
    for (auto& l : model.encoder_) l.attach(opt);
    for (auto& l : model.decoder_) l.attach(opt);
    opt.attach(model.recon_);

    Rng rng(derive_seed(seed, 2));
    std::vector<int> idx(sequences.size());
    std::iota(idx.begin(), idx.end(), 0);
    const int batch = std::max(1, cfg.batch);
    for (int e = 0; e < cfg.epochs; ++e) {
        rng.shuffle(idx);
        double epoch_loss = 0.0;
        int batches = 0;
        for (std::size_t s = 0; s < idx.size(); s += batch) {
            const std::size_t b = std::min<std::size_t>(batch, idx.size() - s);
            std::vector<const LengthSequence*> mb(b);
            for (std::size_t r = 0; r < b; ++r) mb[r] = &sequences[idx[s + r]];
            epoch_loss += model.train_batch(mb, opt);
            ++batches;
        }
        model.loss_history_.push_back(epoch_loss / std::max(1, batches));
    }
    return model;
}

Vec AeModel::encode(const LengthSequence& seq) const {
    check_sequence(seq);
    std::vector<const LengthSequence*> batch{&seq};
    Forward f = forward(batch);
    return f.feature.row(0).transpose();
}

std::vector<Vec> AeModel::encode_batch(const std::vector<LengthSequence>& seqs) const {
    std::vector<Vec> out;
    out.reserve(seqs.size());
    constexpr std::size_t kChunk = 64;
    for (std::size_t s = 0; s < seqs.size(); s += kChunk) {
        const std::size_t b = std::min(kChunk, seqs.size() - s);
        std::vector<const LengthSequence*> batch(b);
        for (std::size_t r = 0; r < b; ++r) {
            check_sequence(seqs[s + r]);
            batch[r] = &seqs[s + r];
        }
        Forward f = forward(batch);
        for (std::size_t r = 0; r < b; ++r)
            out.push_back(f.feature.row(static_cast<Eigen::Index>(r)).transpose());
    }
    return out;
}

std::vector<Vec> AeModel::reconstruct(const LengthSequence& seq) const {
    check_sequence(seq);
    std::vector<const LengthSequence*> batch{&seq};
    Forward f = forward(batch);
    std::vector<Vec> out(spec_.n);
    for (int t = 0; t < spec_.n; ++t)
        out[t] = nn::softmax_rows(f.logits[t]).row(0).transpose();
    return out;
}

namespace {

void write_mat(std::ostream& out, const Mat& m) {
    out << m.rows() << ' ' << m.cols() << '\n';
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) out << m(r, c) << ' ';
        out << '\n';
    }
}
void read_mat(std::istream& in, Mat& m) {
    Eigen::Index r = 0, c = 0;
    in >> r >> c;
    if (r != m.rows() || c != m.cols()) throw Error("checkpoint shape mismatch");
    for (Eigen::Index i = 0; i < r; ++i)
        for (Eigen::Index j = 0; j < c; ++j) in >> m(i, j);
}
void write_row(std::ostream& out, const RowVec& v) {
    out << v.cols() << '\n';
    for (Eigen::Index c = 0; c < v.cols(); ++c) out << v[c] << ' ';
    out << '\n';
}
void read_row(std::istream& in, RowVec& v) {
    Eigen::Index c = 0;
    in >> c;
    if (c != v.cols()) throw Error("checkpoint shape mismatch");
    for (Eigen::Index j = 0; j < c; ++j) in >> v[j];
}
void write_cell(std::ostream& out, const nn::GruCell& c) {
    write_mat(out, c.Wz); write_mat(out, c.Wr); write_mat(out, c.Wh);
    write_mat(out, c.Uz); write_mat(out, c.Ur); write_mat(out, c.Uh);
    write_row(out, c.bz); write_row(out, c.br); write_row(out, c.bh);
}
void read_cell(std::istream& in, nn::GruCell& c) {
    read_mat(in, c.Wz); read_mat(in, c.Wr); read_mat(in, c.Wh);
    read_mat(in, c.Uz); read_mat(in, c.Ur); read_mat(in, c.Uh);
    read_row(in, c.bz); read_row(in, c.br); read_row(in, c.bh);
}

}  // namespace

void AeModel::save(const std::string& path, const std::string& provenance) const {
    std::ofstream out(path);
    if (!out) throw Error("cannot write checkpoint '" + path + "'");
    if (!provenance.empty()) out << "# " << provenance << "\n";
    out.precision(17);
    out << "grae 1\n"
        << spec_.L << ' ' << spec_.V << ' ' << spec_.B << ' ' << spec_.H << ' '
        << spec_.n << '\n';
    write_mat(out, embedding_);
    for (const auto& l : encoder_) { write_cell(out, l.fwd); write_cell(out, l.bwd); }
    for (const auto& l : decoder_) { write_cell(out, l.fwd); write_cell(out, l.bwd); }
    write_mat(out, recon_.W);
    write_row(out, recon_.b);
}

AeModel AeModel::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open checkpoint '" + path + "'");
    std::string line;
    while (in.peek() == '#') std::getline(in, line);
    std::string magic;
    int ver = 0;
    in >> magic >> ver;
    if (magic != "grae" || ver != 1) throw Error("bad autoencoder checkpoint header");
    AeSpec spec;
    in >> spec.L >> spec.V >> spec.B >> spec.H >> spec.n;
    AeModel m(spec, 0);
    read_mat(in, m.embedding_);
    for (auto& l : m.encoder_) { read_cell(in, l.fwd); read_cell(in, l.bwd); }
    for (auto& l : m.decoder_) { read_cell(in, l.fwd); read_cell(in, l.bwd); }
    read_mat(in, m.recon_.W);
    read_row(in, m.recon_.b);
    if (!in) throw Error("truncated autoencoder checkpoint");
    return m;
}

void save_feature_file(const std::vector<FeatureRecord>& recs, const std::string& path,
                       const std::string& provenance) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write feature file '" + path + "'");
    if (!provenance.empty()) out << "# " << provenance << "\n";
    out.precision(17);
    for (const auto& r : recs) {
        out << r.id << ',' << r.label << ',';
        for (Eigen::Index i = 0; i < r.features.size(); ++i) {
            if (i) out << ' ';
            out << r.features[i];
        }
        if (r.true_label) out << ',' << *r.true_label;
        out << '\n';
    }
}

std::vector<FeatureRecord> load_feature_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open feature file '" + path + "'");
    std::vector<FeatureRecord> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> fields;
        std::string cur;
        for (char c : line) {
            if (c == ',') { fields.push_back(cur); cur.clear(); }
            else cur.push_back(c);
        }
        fields.push_back(cur);
        if (fields.size() != 3 && fields.size() != 4)
            throw Error("feature file line " + std::to_string(lineno) +
                        ": expected 3 or 4 fields");
        FeatureRecord r;
        r.id = fields[0];
        try {
            r.label = std::stoi(fields[1]);
            std::istringstream vs(fields[2]);
            double v = 0;
            std::vector<double> vals;
            while (vs >> v) vals.push_back(v);
            if (vals.empty()) throw std::invalid_argument("no values");
            r.features = Eigen::Map<Vec>(vals.data(), static_cast<Eigen::Index>(vals.size()));
            if (fields.size() == 4) r.true_label = std::stoi(fields[3]);
        } catch (const std::exception&) {
            throw Error("feature file line " + std::to_string(lineno) + ": parse error");
        }
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace flowsift::autoencoder
