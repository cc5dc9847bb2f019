#include "flowsift/detector.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

namespace flowsift::detector {

void Mlp::init(int in_dim, Rng& rng) {
    l1.init(in_dim, 64, rng);
    l2.init(64, 32, rng);
    l3.init(32, 2, rng);
}

namespace {

struct MlpForward {
    Mat x, a1, a2, probs;
};

MlpForward mlp_forward(const Mlp& m, const Mat& X) {
    MlpForward f;
    f.x = X;
    f.a1 = nn::relu(m.l1.forward(X));
    f.a2 = nn::relu(m.l2.forward(f.a1));
    f.probs = nn::softmax_rows(m.l3.forward(f.a2));
    return f;
}

void mlp_backward(Mlp& m, const MlpForward& f, const Mat& dlogits) {
    Mat da2 = m.l3.backward(f.a2, dlogits);
    da2 = da2.cwiseProduct((f.a2.array() > 0.0).cast<double>().matrix());
    Mat da1 = m.l2.backward(f.a1, da2);
    da1 = da1.cwiseProduct((f.a1.array() > 0.0).cast<double>().matrix());
    m.l1.backward(f.x, da1);
}

void zero_grads(Mlp& m) {
    m.l1.zero_grad();
    m.l2.zero_grad();
    m.l3.zero_grad();
}

Vec sample_losses(const MlpForward& f, const std::vector<int>& y,
                  const std::vector<int>& idx) {
    Vec losses(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i)
        losses[i] = -std::log(std::max(f.probs(i, y[idx[i]]), 1e-300));
    return losses;
}

/// Update `target` on the subset of batch rows in `keep` (positions within
/// the batch). Returns the mean loss over the kept rows.
double update_on_subset(Mlp& target, const Mat& batchX, const std::vector<int>& y,
                        const std::vector<int>& idx, const std::vector<int>& keep,
                        nn::Adam& opt) {
    Mat X(keep.size(), batchX.cols());
    for (std::size_t i = 0; i < keep.size(); ++i) X.row(i) = batchX.row(keep[i]);
    MlpForward f = mlp_forward(target, X);
    Mat dlogits = f.probs;
    double loss = 0;
    for (std::size_t i = 0; i < keep.size(); ++i) {
        int t = y[idx[keep[i]]];
        loss -= std::log(std::max(f.probs(i, t), 1e-300));
        dlogits(i, t) -= 1.0;
    }
    dlogits /= static_cast<double>(keep.size());
    zero_grads(target);
    mlp_backward(target, f, dlogits);
    opt.step();
    return loss / static_cast<double>(keep.size());
}

void attach(nn::Adam& opt, Mlp& m) {
    opt.attach(m.l1);
    opt.attach(m.l2);
    opt.attach(m.l3);
}

void check_two_classes(const std::vector<int>& y) {
    bool has0 = false, has1 = false;
    for (int v : y) (v == 0 ? has0 : has1) = true;
    if (!has0 || !has1) throw Error("detector training requires both classes");
}

}  // namespace

Vec peer_losses(const Mlp& m, const Mat& X, const std::vector<int>& y) {
    if (static_cast<std::size_t>(X.rows()) != y.size())
        throw Error("peer_losses: size mismatch");
    MlpForward f = mlp_forward(m, X);
    Vec losses(X.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i)
        losses[i] = -std::log(std::max(f.probs(i, y[i]), 1e-300));
    return losses;
}

std::vector<int> small_loss_subset(const Vec& losses, std::size_t keep) {
    std::vector<int> pos(losses.size());
    std::iota(pos.begin(), pos.end(), 0);
    std::stable_sort(pos.begin(), pos.end(),
                     [&](int a, int b) { return losses[a] < losses[b]; });
    pos.resize(std::min(keep, pos.size()));
    return pos;
}

DetectorModel::DetectorModel(int dim, std::uint64_t seed) : dim_(dim) {
    Rng rng(seed);
    peer_a_.init(dim, rng);
    peer_b_.init(dim, rng);
}

std::size_t DetectorModel::keep_count(double rate, std::size_t batch_size) {
    return static_cast<std::size_t>(
        std::ceil((1.0 - rate) * static_cast<double>(batch_size)));
}

DetectorModel::BatchTrace DetectorModel::coteach_batch(const Mat& X,
                                                       const std::vector<int>& y,
                                                       double rate, double lr) {
    const std::size_t keep = keep_count(rate, X.rows());
    BatchTrace tr;
    tr.sel_a = small_loss_subset(peer_losses(peer_a_, X, y), keep);
    tr.sel_b = small_loss_subset(peer_losses(peer_b_, X, y), keep);
    coteach_apply(X, y, tr.sel_a, tr.sel_b, lr);
    return tr;
}

void DetectorModel::coteach_apply(const Mat& X, const std::vector<int>& y,
                                  const std::vector<int>& sel_a,
                                  const std::vector<int>& sel_b, double lr) {
    nn::Adam opt_a(lr), opt_b(lr);
    attach(opt_a, peer_a_);
    attach(opt_b, peer_b_);
    std::vector<int> idx(X.rows());
    std::iota(idx.begin(), idx.end(), 0);
    update_on_subset(peer_b_, X, y, idx, sel_a, opt_b);
    update_on_subset(peer_a_, X, y, idx, sel_b, opt_a);
}

DetectorModel train_detector(const std::vector<Vec>& X, const std::vector<int>& y,
                             const DetectorConfig& cfg, std::uint64_t seed) {
    if (X.empty() || X.size() != y.size()) throw Error("train_detector: bad input");
    check_two_classes(y);
    const int d = static_cast<int>(X[0].size());
    DetectorModel model(d, seed);

    nn::Adam opt_a(cfg.lr), opt_b(cfg.lr);
    attach(opt_a, model.peer_a_);
    attach(opt_b, model.peer_b_);

    Rng rng(derive_seed(seed, 4));
    std::vector<int> order(X.size());
    std::iota(order.begin(), order.end(), 0);
    const int bs = std::max(1, cfg.batch);
    for (int e = 0; e < cfg.epochs; ++e) {
        const double rate = cfg.schedule.at(e);
        rng.shuffle(order);
        double ea = 0, eb = 0;
        int batches = 0;
        for (std::size_t s = 0; s < order.size(); s += bs) {
            const std::size_t b = std::min<std::size_t>(bs, order.size() - s);
            std::vector<int> idx(order.begin() + s, order.begin() + s + b);
            Mat batchX(b, d);
            for (std::size_t i = 0; i < b; ++i) batchX.row(i) = X[idx[i]].transpose();

            MlpForward fa = mlp_forward(model.peer_a_, batchX);
            MlpForward fb = mlp_forward(model.peer_b_, batchX);
            const std::size_t keep = DetectorModel::keep_count(rate, b);
            std::vector<int> sel_a = small_loss_subset(sample_losses(fa, y, idx), keep);
            std::vector<int> sel_b = small_loss_subset(sample_losses(fb, y, idx), keep);

            // Cross-feeding: A's selection trains B and vice versa.
            eb += update_on_subset(model.peer_b_, batchX, y, idx, sel_a, opt_b);
            ea += update_on_subset(model.peer_a_, batchX, y, idx, sel_b, opt_a);
            ++batches;
        }
        model.loss_a_.push_back(ea / std::max(1, batches));
        model.loss_b_.push_back(eb / std::max(1, batches));
    }
    return model;
}

DetectorModel train_plain(const std::vector<Vec>& X, const std::vector<int>& y,
                          const DetectorConfig& cfg, std::uint64_t seed) {
    if (X.empty() || X.size() != y.size()) throw Error("train_plain: bad input");
    check_two_classes(y);
    const int d = static_cast<int>(X[0].size());
    DetectorModel model(d, seed);
    nn::Adam opt(cfg.lr);
    attach(opt, model.peer_a_);

    Rng rng(derive_seed(seed, 4));
    std::vector<int> order(X.size());
    std::iota(order.begin(), order.end(), 0);
    const int bs = std::max(1, cfg.batch);
    for (int e = 0; e < cfg.epochs; ++e) {
        rng.shuffle(order);
        double el = 0;
        int batches = 0;
        for (std::size_t s = 0; s < order.size(); s += bs) {
            const std::size_t b = std::min<std::size_t>(bs, order.size() - s);
            std::vector<int> idx(order.begin() + s, order.begin() + s + b);
            Mat batchX(b, d);
            for (std::size_t i = 0; i < b; ++i) batchX.row(i) = X[idx[i]].transpose();
            std::vector<int> all(b);
            std::iota(all.begin(), all.end(), 0);
            el += update_on_subset(model.peer_a_, batchX, y, idx, all, opt);
            ++batches;
        }
        model.loss_a_.push_back(el / std::max(1, batches));
    }
    model.peer_b_ = model.peer_a_;
    return model;
}

Prediction DetectorModel::predict_one(const Vec& x) const {
    if (x.size() != dim_) throw Error("predict: dimension mismatch");
    MlpForward f = mlp_forward(peer_a_, x.transpose());
    Prediction p;
    p.score = f.probs(0, 1);
    p.label = p.score >= 0.5 ? 1 : 0;
    return p;
}

std::vector<Prediction> DetectorModel::predict(const std::vector<Vec>& X) const {
    std::vector<Prediction> out(X.size());
    for (std::size_t i = 0; i < X.size(); ++i) out[i] = predict_one(X[i]);
    return out;
}

namespace {

void write_linear(std::ostream& out, const nn::Linear& l) {
    out << l.W.rows() << ' ' << l.W.cols() << '\n';
    for (Eigen::Index r = 0; r < l.W.rows(); ++r) {
        for (Eigen::Index c = 0; c < l.W.cols(); ++c) out << l.W(r, c) << ' ';
        out << '\n';
    }
    for (Eigen::Index c = 0; c < l.b.cols(); ++c) out << l.b[c] << ' ';
    out << '\n';
}
void read_linear(std::istream& in, nn::Linear& l) {
    Eigen::Index r = 0, c = 0;
    in >> r >> c;
    if (r != l.W.rows() || c != l.W.cols()) throw Error("checkpoint shape mismatch");
    for (Eigen::Index i = 0; i < r; ++i)
        for (Eigen::Index j = 0; j < c; ++j) in >> l.W(i, j);
    for (Eigen::Index j = 0; j < l.b.cols(); ++j) in >> l.b[j];
}

}  // namespace

void DetectorModel::save(const std::string& path, const std::string& provenance) const {
    std::ofstream out(path);
    if (!out) throw Error("cannot write checkpoint '" + path + "'");
    if (!provenance.empty()) out << "# " << provenance << "\n";
    out.precision(17);
    out << "coteach 1\n" << dim_ << '\n';
    for (const Mlp* m : {&peer_a_, &peer_b_}) {
        write_linear(out, m->l1);
        write_linear(out, m->l2);
        write_linear(out, m->l3);
    }
}

DetectorModel DetectorModel::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open checkpoint '" + path + "'");
    std::string line;
    while (in.peek() == '#') std::getline(in, line);
    std::string magic;
    int ver = 0;
    in >> magic >> ver;
    if (magic != "coteach" || ver != 1) throw Error("bad detector checkpoint header");
    int d = 0;
    in >> d;
    DetectorModel m(d, 0);
    for (Mlp* p : {&m.peer_a_, &m.peer_b_}) {
        read_linear(in, p->l1);
        read_linear(in, p->l2);
        read_linear(in, p->l3);
    }
    if (!in) throw Error("truncated detector checkpoint");
    return m;
}

void save_predictions(const std::vector<std::string>& ids,
                      const std::vector<Prediction>& preds, const std::string& path,
                      const std::string& provenance) {
    if (ids.size() != preds.size()) throw Error("save_predictions: size mismatch");
    std::ofstream out(path);
    if (!out) throw Error("cannot write predictions '" + path + "'");
    if (!provenance.empty()) out << "# " << provenance << "\n";
    out.precision(17);
    for (std::size_t i = 0; i < ids.size(); ++i)
        out << ids[i] << ',' << preds[i].score << ',' << preds[i].label << '\n';
}

}  // namespace flowsift::detector
