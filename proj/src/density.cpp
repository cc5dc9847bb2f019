#include "flowsift/density.hpp"

#include <cmath>
#include <fstream>
#include <numeric>

namespace flowsift::density {

namespace {

constexpr double kScaleFloor = 1e-3;
constexpr double kLogTwoPi = 1.8378770664093453;

// Degree of hidden unit j: cycles through 1..d-1.
int hidden_degree(int j, int d) { return 1 + (d > 1 ? j % (d - 1) : 0); }

}  // namespace

MadeModel::MadeModel(int d, const MadeConfig& cfg, std::uint64_t seed)
    : d_(d), K_(cfg.K) {
    if (d_ < 1) throw Error("fit_density: dimension must be >= 1");
    if (K_ < 1) throw Error("fit_density: K must be >= 1");
    widths_ = cfg.hidden;
    if (widths_.empty()) widths_ = {8 * d_, 8 * d_};

    Rng rng(seed);
    std::vector<int> prev_deg(d_);
    for (int i = 0; i < d_; ++i) prev_deg[i] = i + 1;
    int prev_w = d_;

    for (int w : widths_) {
        nn::Linear l(prev_w, w, rng);
        Mat mask = Mat::Zero(prev_w, w);
        for (int j = 0; j < w; ++j) {
            int dj = hidden_degree(j, d_);
            for (int i = 0; i < prev_w; ++i)
                if (dj >= prev_deg[i]) mask(i, j) = 1.0;
        }
        l.W = l.W.cwiseProduct(mask);
        layers_.push_back(std::move(l));
        masks_.push_back(std::move(mask));
        prev_deg.resize(w);
        for (int j = 0; j < w; ++j) prev_deg[j] = hidden_degree(j, d_);
        prev_w = w;
    }

    // Output layer: 3K parameters per conditional; conditional i may use
    // hidden units with degree strictly below i+1.
    nn::Linear out(prev_w, 3 * K_ * d_, rng);
    Mat mask = Mat::Zero(prev_w, 3 * K_ * d_);
    for (int i = 0; i < d_; ++i)
        for (int j = 0; j < prev_w; ++j)
            if (i + 1 > prev_deg[j])
                for (int c = 0; c < 3 * K_; ++c) mask(j, i * 3 * K_ + c) = 1.0;
    out.W = out.W.cwiseProduct(mask);
    layers_.push_back(std::move(out));
    masks_.push_back(std::move(mask));
}

Mat MadeModel::theta(const Mat& X) const {
    Mat a = X;
    for (std::size_t l = 0; l + 1 < layers_.size(); ++l)
        a = nn::relu(layers_[l].forward(a));
    return layers_.back().forward(a);
}

namespace {

/// Log-likelihood of one sample plus (optionally) gradients w.r.t. the
/// conditional parameters and the direct gradient w.r.t. the input.
double mixture_loglik(const RowVec& x, const RowVec& th, int d, int K,
                      RowVec* dtheta, RowVec* dx_direct) {
    double total = 0.0;
    if (dtheta) dtheta->setZero(th.cols());
    if (dx_direct) dx_direct->setZero(d);
    for (int i = 0; i < d; ++i) {
        const int base = i * 3 * K;
        Vec w(K), logn(K), z(K), sigma(K), es(K);
        double wmax = -1e300;
        for (int k = 0; k < K; ++k) {
            w[k] = th[base + k];
            wmax = std::max(wmax, w[k]);
        }
        double wsum = 0.0;
        for (int k = 0; k < K; ++k) wsum += std::exp(w[k] - wmax);
        double logwden = wmax + std::log(wsum);
        Vec term(K);
        for (int k = 0; k < K; ++k) {
            double mu = th[base + K + k];
            double s = th[base + 2 * K + k];
            es[k] = std::exp(s);
            sigma[k] = kScaleFloor + es[k];
            z[k] = (x[i] - mu) / sigma[k];
            logn[k] = -0.5 * kLogTwoPi - std::log(sigma[k]) - 0.5 * z[k] * z[k];
            term[k] = (w[k] - logwden) + logn[k];
        }
        double logp = nn::log_sum_exp(term);
        total += logp;
        if (dtheta || dx_direct) {
            double dx = 0.0;
            for (int k = 0; k < K; ++k) {
                double r = std::exp(term[k] - logp);     // mixture posterior
                double pi = std::exp(w[k] - logwden);    // prior weight
                if (dtheta) {
                    (*dtheta)[base + k] = r - pi;
                    (*dtheta)[base + K + k] = r * z[k] / sigma[k];
                    (*dtheta)[base + 2 * K + k] =
                        r * (z[k] * z[k] - 1.0) / sigma[k] * es[k];
                }
                dx += r * (-z[k] / sigma[k]);
            }
            if (dx_direct) (*dx_direct)[i] = dx;
        }
    }
    return total;
}

}  // namespace

std::vector<Conditional> MadeModel::conditionals(const Vec& x) const {
    if (x.size() != d_) throw Error("conditionals: dimension mismatch");
    Mat th = theta(x.transpose());
    std::vector<Conditional> out(d_);
    for (int i = 0; i < d_; ++i) {
        const int base = i * 3 * K_;
        out[i].logits = th.row(0).segment(base, K_).transpose();
        out[i].means = th.row(0).segment(base + K_, K_).transpose();
        out[i].log_scales = th.row(0).segment(base + 2 * K_, K_).transpose();
    }
    return out;
}

double MadeModel::log_density(const Vec& x) const {
    if (x.size() != d_) throw Error("log_density: dimension mismatch");
    if (!x.allFinite()) throw Error("log_density: non-finite input");
    Mat th = theta(x.transpose());
    return mixture_loglik(x.transpose(), th.row(0), d_, K_, nullptr, nullptr);
}

Vec MadeModel::log_density_grad(const Vec& x, double* log_density_out) const {
    if (x.size() != d_) throw Error("log_density_grad: dimension mismatch");
    if (!x.allFinite()) throw Error("log_density_grad: non-finite input");

    // Forward with cached activations.
    std::vector<Mat> acts;  // input to each layer
    Mat a = x.transpose();
    for (std::size_t l = 0; l + 1 < layers_.size(); ++l) {
        acts.push_back(a);
        a = nn::relu(layers_[l].forward(a));
    }
    acts.push_back(a);
    Mat th = layers_.back().forward(a);

    RowVec dtheta, dx_direct;
    double logp = mixture_loglik(x.transpose(), th.row(0), d_, K_, &dtheta, &dx_direct);
    if (log_density_out) *log_density_out = logp;

    // Backprop through the masked MLP to the input.
    Mat d_a = dtheta * layers_.back().W.transpose();
    for (int l = static_cast<int>(layers_.size()) - 2; l >= 0; --l) {
        Mat pre = layers_[l].forward(acts[l]);
        d_a = d_a.cwiseProduct((pre.array() > 0.0).cast<double>().matrix());
        d_a = d_a * layers_[l].W.transpose();
    }
    return d_a.row(0).transpose() + dx_direct.transpose();
}

double MadeModel::batch_step(const Mat& X, nn::Adam& opt) {
    const Eigen::Index n = X.rows();
    std::vector<Mat> acts;
    std::vector<Mat> pres;
    Mat a = X;
    for (std::size_t l = 0; l + 1 < layers_.size(); ++l) {
        acts.push_back(a);
        Mat pre = layers_[l].forward(a);
        pres.push_back(pre);
        a = nn::relu(pre);
    }
    acts.push_back(a);
    Mat th = layers_.back().forward(a);

    Mat dtheta(n, th.cols());
    double total = 0.0;
    RowVec dt;
    for (Eigen::Index r = 0; r < n; ++r) {
        total += mixture_loglik(X.row(r), th.row(r), d_, K_, &dt, nullptr);
        dtheta.row(r) = dt;
    }
    // Minimize mean NLL.
    dtheta *= -1.0 / static_cast<double>(n);

    for (auto& l : layers_) l.zero_grad();
    Mat d_a = layers_.back().backward(acts.back(), dtheta);
    layers_.back().gW = layers_.back().gW.cwiseProduct(masks_.back());
    for (int l = static_cast<int>(layers_.size()) - 2; l >= 0; --l) {
        d_a = d_a.cwiseProduct((pres[l].array() > 0.0).cast<double>().matrix());
        d_a = layers_[l].backward(acts[l], d_a);
        layers_[l].gW = layers_[l].gW.cwiseProduct(masks_[l]);
    }
    opt.step();
    return -total / static_cast<double>(n);
}

MadeModel fit_density(const std::vector<Vec>& X, const MadeConfig& cfg,
                      std::uint64_t seed) {
    if (X.size() < 2) throw Error("fit_density: need at least 2 samples");
    const int d = static_cast<int>(X[0].size());
    for (const auto& v : X)
        if (v.size() != d) throw Error("fit_density: dimension mismatch in input");

    MadeModel model(d, cfg, seed);

    bool degenerate = true;
    for (std::size_t i = 1; i < X.size() && degenerate; ++i)
        if (X[i] != X[0]) degenerate = false;
    if (degenerate) {
        model.warnings_.push_back("degenerate input: all samples identical");
        log_line("density", "warn", "fit_density: all input samples identical");
    }

    Mat data(X.size(), d);
    for (std::size_t i = 0; i < X.size(); ++i) data.row(i) = X[i].transpose();

    nn::Adam opt(cfg.lr);
    for (auto& l : model.layers_) opt.attach(l);

    Rng rng(derive_seed(seed, 1));
    std::vector<int> idx(X.size());
    std::iota(idx.begin(), idx.end(), 0);
    const int batch = std::max(1, cfg.batch);
    for (int e = 0; e < cfg.epochs; ++e) {
        rng.shuffle(idx);
        double epoch_loss = 0.0;
        int batches = 0;
        for (std::size_t s = 0; s < idx.size(); s += batch) {
            const std::size_t b = std::min<std::size_t>(batch, idx.size() - s);
            Mat mb(b, d);
            for (std::size_t r = 0; r < b; ++r) mb.row(r) = data.row(idx[s + r]);
            epoch_loss += model.batch_step(mb, opt);
            ++batches;
        }
        model.loss_history_.push_back(epoch_loss / std::max(1, batches));
    }
    return model;
}

MaskReport MadeModel::mask_check() const {
    MaskReport rep;
    Rng rng(7);
    Vec x0(d_);
    for (int i = 0; i < d_; ++i) x0[i] = rng.normal();
    auto base = conditionals(x0);
    for (int j = 0; j < d_; ++j) {
        Vec xp = x0;
        xp[j] += 1.0;
        auto pert = conditionals(xp);
        for (int i = 0; i <= j; ++i) {
            bool same = base[i].logits == pert[i].logits &&
                        base[i].means == pert[i].means &&
                        base[i].log_scales == pert[i].log_scales;
            if (!same) rep.violations.push_back({i, j});
        }
    }
    return rep;
}

void MadeModel::corrupt_mask_for_test(int layer, int row, int col, double w) {
    layers_.at(layer).W(row, col) = w;
}

void MadeModel::save(const std::string& path, const std::string& provenance) const {
    std::ofstream out(path);
    if (!out) throw Error("cannot write checkpoint '" + path + "'");
    if (!provenance.empty()) out << "# " << provenance << "\n";
    out << "made 1\n" << d_ << ' ' << K_ << ' ' << widths_.size() << '\n';
    for (int w : widths_) out << w << ' ';
    out << '\n';
    out.precision(17);  // round-trip exact for doubles
    for (const auto& l : layers_) {
        out << l.W.rows() << ' ' << l.W.cols() << '\n';
        for (Eigen::Index r = 0; r < l.W.rows(); ++r) {
            for (Eigen::Index c = 0; c < l.W.cols(); ++c) out << l.W(r, c) << ' ';
            out << '\n';
        }
        for (Eigen::Index c = 0; c < l.b.cols(); ++c) out << l.b[c] << ' ';
        out << '\n';
    }
}

MadeModel MadeModel::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open checkpoint '" + path + "'");
    std::string line;
    while (in.peek() == '#') std::getline(in, line);
    std::string magic;
    int ver = 0;
    in >> magic >> ver;
    if (magic != "made" || ver != 1) throw Error("bad MADE checkpoint header");
    int d = 0, K = 0;
    std::size_t nh = 0;
    in >> d >> K >> nh;
    MadeConfig cfg;
    cfg.K = K;
    cfg.hidden.resize(nh);
    for (auto& w : cfg.hidden) in >> w;
    MadeModel m(d, cfg, 0);
    for (auto& l : m.layers_) {
        Eigen::Index r = 0, c = 0;
        in >> r >> c;
        if (r != l.W.rows() || c != l.W.cols()) throw Error("checkpoint shape mismatch");
        for (Eigen::Index i = 0; i < r; ++i)
            for (Eigen::Index j = 0; j < c; ++j) in >> l.W(i, j);
        for (Eigen::Index j = 0; j < l.b.cols(); ++j) in >> l.b[j];
    }
    if (!in) throw Error("truncated MADE checkpoint");
    return m;
}

}  // namespace flowsift::density
