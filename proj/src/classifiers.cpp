#include "flowsift/classifiers.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "flowsift/nn.hpp"

namespace flowsift::classifiers {

namespace {

// ---------------------------------------------------------------- trees

struct TreeNode {
    int feature = -1;
    double threshold = 0.0;
    double value = 0.0;  // leaf payload (class fraction or regression value)
    int left = -1, right = -1;
    bool leaf() const { return feature < 0; }
};

struct Tree {
    std::vector<TreeNode> nodes;
    double eval(const Vec& x) const {
        int i = 0;
        while (!nodes[i].leaf())
            i = (x[nodes[i].feature] < nodes[i].threshold) ? nodes[i].left
                                                           : nodes[i].right;
        return nodes[i].value;
    }
};

struct SplitResult {
    int feature = -1;
    double threshold = 0.0;
    double score = 0.0;  // improvement; <= 0 means no usable split
};

/// Best split by weighted impurity/variance reduction over candidate
/// features. `targets` is the per-sample quantity whose within-node
/// variance we reduce (class indicator for gini-like behavior, residual
/// for regression).
SplitResult best_split(const Mat& X, const std::vector<double>& targets,
                       const std::vector<int>& rows,
                       const std::vector<int>& features) {
    SplitResult best;
    double total = 0, total2 = 0;
    for (int r : rows) {
        total += targets[r];
        total2 += targets[r] * targets[r];
    }
    const double n = static_cast<double>(rows.size());
    const double parent_sse = total2 - total * total / n;

    std::vector<std::pair<double, double>> vals(rows.size());  // (x, target)
    for (int f : features) {
        for (std::size_t i = 0; i < rows.size(); ++i)
            vals[i] = {X(rows[i], f), targets[rows[i]]};
        std::sort(vals.begin(), vals.end());
        double lsum = 0, lsum2 = 0;
        for (std::size_t i = 0; i + 1 < vals.size(); ++i) {
            lsum += vals[i].second;
            lsum2 += vals[i].second * vals[i].second;
            if (vals[i].first == vals[i + 1].first) continue;
            const double ln = static_cast<double>(i + 1);
            const double rn = n - ln;
            double lsse = lsum2 - lsum * lsum / ln;
            double rsum = total - lsum, rsum2 = total2 - lsum2;
            double rsse = rsum2 - rsum * rsum / rn;
            double gain = parent_sse - lsse - rsse;
            if (gain > best.score) {
                best.score = gain;
                best.feature = f;
                best.threshold = 0.5 * (vals[i].first + vals[i + 1].first);
            }
        }
    }
    return best;
}

struct TreeParams {
    int max_depth = 8;
    int min_leaf = 2;
    int feature_subsample = 0;  // 0 = all features
};

/// leaf_value(rows) computes the payload. Residual-driven splits.
Tree grow_tree(const Mat& X, const std::vector<double>& targets,
               std::vector<int> rows, const TreeParams& p, Rng& rng,
               const std::function<double(const std::vector<int>&)>& leaf_value) {
    Tree tree;
    struct Item {
        std::vector<int> rows;
        int depth;
        int node;
    };
    tree.nodes.push_back({});
    std::vector<Item> stack{{std::move(rows), 0, 0}};
    const int d = static_cast<int>(X.cols());
    while (!stack.empty()) {
        Item it = std::move(stack.back());
        stack.pop_back();
        TreeNode& node = tree.nodes[it.node];
        bool make_leaf = it.depth >= p.max_depth ||
                         static_cast<int>(it.rows.size()) < 2 * p.min_leaf;
        SplitResult split;
        if (!make_leaf) {
            std::vector<int> feats(d);
            std::iota(feats.begin(), feats.end(), 0);
            if (p.feature_subsample > 0 && p.feature_subsample < d) {
                rng.shuffle(feats);
                feats.resize(p.feature_subsample);
                std::sort(feats.begin(), feats.end());
            }
            split = best_split(X, targets, it.rows, feats);
            if (split.feature < 0 || split.score <= 1e-12) make_leaf = true;
        }
        if (make_leaf) {
            node.feature = -1;
            node.value = leaf_value(it.rows);
            continue;
        }
        std::vector<int> lrows, rrows;
        for (int r : it.rows)
            (X(r, split.feature) < split.threshold ? lrows : rrows).push_back(r);
        if (lrows.empty() || rrows.empty()) {
            node.feature = -1;
            node.value = leaf_value(it.rows);
            continue;
        }
        // Allocate both children before touching the parent again: push_back
        // may reallocate and invalidate references into tree.nodes.
        const int li = static_cast<int>(tree.nodes.size());
        tree.nodes.push_back({});
        const int ri = static_cast<int>(tree.nodes.size());
        tree.nodes.push_back({});
        TreeNode& parent = tree.nodes[it.node];
        parent.feature = split.feature;
        parent.threshold = split.threshold;
        parent.left = li;
        parent.right = ri;
        stack.push_back({std::move(rrows), it.depth + 1, ri});
        stack.push_back({std::move(lrows), it.depth + 1, li});
    }
    return tree;
}

// ------------------------------------------------- linear discriminant

class LinearDiscriminant final : public Classifier {
public:
    void fit(const Mat& X, const std::vector<int>& y, std::uint64_t) override {
        const int d = static_cast<int>(X.cols());
        Vec mu0 = Vec::Zero(d), mu1 = Vec::Zero(d);
        long n0 = 0, n1 = 0;
        for (std::size_t i = 0; i < y.size(); ++i) {
            if (y[i] == 0) { mu0 += X.row(i).transpose(); ++n0; }
            else { mu1 += X.row(i).transpose(); ++n1; }
        }
        if (n0 == 0 || n1 == 0) throw Error("LDA: both classes required");
        mu0 /= n0;
        mu1 /= n1;
        Mat cov = Mat::Zero(d, d);
        for (std::size_t i = 0; i < y.size(); ++i) {
            Vec c = X.row(i).transpose() - (y[i] == 0 ? mu0 : mu1);
            cov += c * c.transpose();
        }
        cov /= static_cast<double>(y.size());
        cov += Mat::Identity(d, d) * (1e-6 * cov.trace() / d + 1e-12);
        w_ = cov.ldlt().solve(mu1 - mu0);
        bias_ = -w_.dot(0.5 * (mu0 + mu1)) +
                std::log(static_cast<double>(n1) / static_cast<double>(n0));
    }
    int predict(const Vec& x) const override { return w_.dot(x) + bias_ >= 0 ? 1 : 0; }
    std::string name() const override { return "linear_discriminant"; }

private:
    Vec w_;
    double bias_ = 0.0;
};

// ------------------------------------------------------------ adaboost

class AdaBoost final : public Classifier {
public:
    explicit AdaBoost(int rounds) : rounds_(rounds) {}

    void fit(const Mat& X, const std::vector<int>& y, std::uint64_t) override {
        const auto n = static_cast<std::size_t>(X.rows());
        const int d = static_cast<int>(X.cols());
        Vec w = Vec::Constant(n, 1.0 / static_cast<double>(n));
        stumps_.clear();
        for (int t = 0; t < rounds_; ++t) {
            Stump best;
            double best_err = 1e300;
            double tot_pos = 0;
            for (std::size_t i = 0; i < n; ++i)
                if (y[i] == 1) tot_pos += w[i];
            double tot_neg = 1.0 - tot_pos;
            for (int f = 0; f < d; ++f) {
                std::vector<std::pair<double, std::size_t>> order(n);
                for (std::size_t i = 0; i < n; ++i) order[i] = {X(i, f), i};
                std::sort(order.begin(), order.end());
                // below_* track the weight of samples with x < threshold.
                double below_pos = 0, below_neg = 0;
                for (std::size_t i = 0; i <= n; ++i) {
                    bool valid_cut =
                        i == 0 || i == n || order[i - 1].first != order[i].first;
                    if (valid_cut) {
                        double thr = (i == 0)   ? order[0].first - 1.0
                                     : (i == n) ? order[n - 1].first + 1.0
                                                : 0.5 * (order[i - 1].first +
                                                         order[i].first);
                        // polarity +1: predict 1 when x >= thr
                        double err_pos = below_pos + (tot_neg - below_neg);
                        double err_neg = below_neg + (tot_pos - below_pos);
                        consider(best, best_err, f, thr, err_pos, +1);
                        consider(best, best_err, f, thr, err_neg, -1);
                    }
                    if (i < n) acc(order, y, w, i, below_pos, below_neg);
                }
            }
            best_err = std::clamp(best_err, 1e-12, 1.0 - 1e-12);
            double alpha = 0.5 * std::log((1.0 - best_err) / best_err);
            best.alpha = alpha;
            stumps_.push_back(best);
            double z = 0;
            for (std::size_t i = 0; i < n; ++i) {
                int pred = stump_predict(best, X.row(i).transpose());
                int yi = y[i] == 1 ? 1 : -1;
                w[i] *= std::exp(-alpha * yi * (pred == 1 ? 1 : -1));
                z += w[i];
            }
            w /= z;
            if (best_err < 1e-10) break;
        }
    }
    int predict(const Vec& x) const override {
        double s = 0;
        for (const auto& st : stumps_)
            s += st.alpha * (stump_predict(st, x) == 1 ? 1.0 : -1.0);
        return s >= 0 ? 1 : 0;
    }
    std::string name() const override { return "adaboost"; }

private:
    struct Stump {
        int feature = 0;
        double threshold = 0.0;
        int polarity = +1;  // +1: predict 1 when x >= thr
        double alpha = 0.0;
    };
    static void acc(const std::vector<std::pair<double, std::size_t>>& order,
                    const std::vector<int>& y, const Vec& w, std::size_t i,
                    double& below_pos, double& below_neg) {
        std::size_t idx = order[i].second;
        if (y[idx] == 1) below_pos += w[idx];
        else below_neg += w[idx];
    }
    static void consider(Stump& best, double& best_err, int f, double thr,
                         double err, int polarity) {
        if (err < best_err) {
            best_err = err;
            best = {f, thr, polarity, 0.0};
        }
    }
    static int stump_predict(const Stump& s, const Vec& x) {
        bool ge = x[s.feature] >= s.threshold;
        return (s.polarity == +1) == ge ? 1 : 0;
    }
    int rounds_;
    std::vector<Stump> stumps_;
};

// ------------------------------------------------------- random forest

class RandomForest final : public Classifier {
public:
    RandomForest(int trees, int max_depth) : trees_(trees), depth_(max_depth) {}

    void fit(const Mat& X, const std::vector<int>& y, std::uint64_t seed) override {
        const auto n = static_cast<int>(X.rows());
        const int d = static_cast<int>(X.cols());
        std::vector<double> targets(y.begin(), y.end());
        TreeParams p;
        p.max_depth = depth_;
        p.min_leaf = 1;
        p.feature_subsample = std::max(1, static_cast<int>(std::sqrt(double(d))));
        forest_.clear();
        Rng rng(seed);
        auto leaf = [&](const std::vector<int>& rows) {
            double s = 0;
            for (int r : rows) s += targets[r];
            return s / static_cast<double>(rows.size());
        };
        for (int t = 0; t < trees_; ++t) {
            std::vector<int> rows(n);
            for (int i = 0; i < n; ++i)
                rows[i] = static_cast<int>(rng.integer(0, n - 1));  // bootstrap
            forest_.push_back(grow_tree(X, targets, std::move(rows), p, rng, leaf));
        }
    }
    int predict(const Vec& x) const override {
        double s = 0;
        for (const auto& t : forest_) s += t.eval(x);
        return s / static_cast<double>(forest_.size()) >= 0.5 ? 1 : 0;
    }
    std::string name() const override { return "random_forest"; }

private:
    int trees_, depth_;
    std::vector<Tree> forest_;
};

// ------------------------------------------------- logistic regression

class LogisticRegression final : public Classifier {
public:
    explicit LogisticRegression(int iters) : iters_(iters) {}

    void fit(const Mat& X, const std::vector<int>& y, std::uint64_t) override {
        const auto n = static_cast<double>(X.rows());
        const int d = static_cast<int>(X.cols());
        // Standardize for conditioning; parameters stay in raw space via
        // stored mean/scale.
        mean_ = X.colwise().mean().transpose();
        scale_.resize(d);
        for (int j = 0; j < d; ++j) {
            double var = (X.col(j).array() - mean_[j]).square().sum() / n;
            scale_[j] = std::sqrt(var) > 1e-12 ? std::sqrt(var) : 1.0;
        }
        Mat Z = (X.rowwise() - mean_.transpose()).array().rowwise() /
                scale_.transpose().array();
        w_ = Vec::Zero(d);
        b_ = 0.0;
        const double lambda = 1.0 / n;  // C = 1 style regularization
        Mat gw(d, 1);
        double lr = 0.5;
        for (int it = 0; it < iters_; ++it) {
            Vec p = (Z * w_).array() + b_;
            p = p.unaryExpr([](double v) { return nn::sigmoid(v); });
            Vec err(p.size());
            for (Eigen::Index i = 0; i < err.size(); ++i) err[i] = p[i] - (y[i] == 1);
            Vec g = Z.transpose() * err / n + lambda * w_;
            double gb = err.sum() / n;
            w_ -= lr * g;
            b_ -= lr * gb;
        }
    }
    int predict(const Vec& x) const override {
        double z = ((x - mean_).array() / scale_.array()).matrix().dot(w_) + b_;
        return z >= 0 ? 1 : 0;
    }
    std::string name() const override { return "logistic_regression"; }

private:
    int iters_;
    Vec w_, mean_, scale_;
    double b_ = 0.0;
};

// ---------------------------------------------------------- naive bayes

class GaussianNb final : public Classifier {
public:
    void fit(const Mat& X, const std::vector<int>& y, std::uint64_t) override {
        const int d = static_cast<int>(X.cols());
        mu_[0] = Vec::Zero(d); mu_[1] = Vec::Zero(d);
        var_[0] = Vec::Zero(d); var_[1] = Vec::Zero(d);
        long n[2] = {0, 0};
        for (std::size_t i = 0; i < y.size(); ++i) {
            mu_[y[i]] += X.row(i).transpose();
            ++n[y[i]];
        }
        if (n[0] == 0 || n[1] == 0) throw Error("GaussianNB: both classes required");
        mu_[0] /= n[0]; mu_[1] /= n[1];
        for (std::size_t i = 0; i < y.size(); ++i) {
            Vec c = X.row(i).transpose() - mu_[y[i]];
            var_[y[i]] += c.cwiseProduct(c);
        }
        var_[0] /= n[0]; var_[1] /= n[1];
        double vmax = std::max(var_[0].maxCoeff(), var_[1].maxCoeff());
        double floor = std::max(1e-9 * vmax, 1e-12);
        var_[0] = var_[0].cwiseMax(floor);
        var_[1] = var_[1].cwiseMax(floor);
        prior_[0] = std::log(double(n[0]) / double(y.size()));
        prior_[1] = std::log(double(n[1]) / double(y.size()));
    }
    int predict(const Vec& x) const override {
        double s[2];
        for (int c = 0; c < 2; ++c) {
            Vec z = (x - mu_[c]).cwiseQuotient(var_[c].cwiseSqrt());
            s[c] = prior_[c] - 0.5 * z.squaredNorm() -
                   0.5 * var_[c].array().log().sum();
        }
        return s[1] >= s[0] ? 1 : 0;
    }
    std::string name() const override { return "gaussian_nb"; }

private:
    Vec mu_[2], var_[2];
    double prior_[2] = {0, 0};
};

// ------------------------------------------------------------------ svc

/// RBF-kernel max-margin classifier trained with kernelized Pegasos.
class Svc final : public Classifier {
public:
    void fit(const Mat& X, const std::vector<int>& y, std::uint64_t seed) override {
        X_ = X;
        const auto n = static_cast<int>(X.rows());
        y_.resize(n);
        for (int i = 0; i < n; ++i) y_[i] = y[i] == 1 ? 1.0 : -1.0;
        double var = 0;
        Vec mean = X.colwise().mean().transpose();
        for (int i = 0; i < n; ++i) var += (X.row(i).transpose() - mean).squaredNorm();
        var /= std::max(1, n);
        gamma_ = 1.0 / std::max(1e-12, var);  // sklearn 'scale' analog

        Mat K(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j <= i; ++j) {
                double k = std::exp(-gamma_ * (X.row(i) - X.row(j)).squaredNorm());
                K(i, j) = k;
                K(j, i) = k;
            }
        alpha_.assign(n, 0.0);
        const double lambda = 1.0 / n;  // C = 1
        const long T = 20L * n;
        Rng rng(seed);
        for (long t = 1; t <= T; ++t) {
            int i = static_cast<int>(rng.integer(0, n - 1));
            double dec = 0;
            for (int j = 0; j < n; ++j)
                if (alpha_[j] != 0.0) dec += alpha_[j] * y_[j] * K(j, i);
            dec /= lambda * static_cast<double>(t);
            if (y_[i] * dec < 1.0) alpha_[i] += 1.0;
        }
        scale_ = 1.0 / (lambda * static_cast<double>(T));
    }
    int predict(const Vec& x) const override {
        double dec = 0;
        for (std::size_t j = 0; j < alpha_.size(); ++j)
            if (alpha_[j] != 0.0)
                dec += alpha_[j] * y_[j] *
                       std::exp(-gamma_ * (X_.row(j).transpose() - x).squaredNorm());
        return dec * scale_ >= 0 ? 1 : 0;
    }
    std::string name() const override { return "svc"; }

private:
    Mat X_;
    std::vector<double> y_, alpha_;
    double gamma_ = 1.0, scale_ = 1.0;
};

// -------------------------------------------------- gradient boosting

class GradientBoostedTrees final : public Classifier {
public:
    GradientBoostedTrees(int rounds, int max_depth)
        : rounds_(rounds), depth_(max_depth) {}

    void fit(const Mat& X, const std::vector<int>& y, std::uint64_t seed) override {
        const auto n = static_cast<int>(X.rows());
        double pos = 0;
        for (int v : y) pos += v;
        double p0 = std::clamp(pos / n, 1e-6, 1.0 - 1e-6);
        base_ = std::log(p0 / (1 - p0));
        Vec f = Vec::Constant(n, base_);
        trees_.clear();
        TreeParams tp;
        tp.max_depth = depth_;
        tp.min_leaf = 2;
        Rng rng(seed);
        std::vector<int> all(n);
        std::iota(all.begin(), all.end(), 0);
        for (int t = 0; t < rounds_; ++t) {
            std::vector<double> resid(n), hess(n);
            for (int i = 0; i < n; ++i) {
                double p = nn::sigmoid(f[i]);
                resid[i] = (y[i] == 1 ? 1.0 : 0.0) - p;
                hess[i] = std::max(p * (1 - p), 1e-6);
            }
            auto leaf = [&](const std::vector<int>& rows) {
                double g = 0, h = 0;
                for (int r : rows) { g += resid[r]; h += hess[r]; }
                return g / h;  // Newton leaf
            };
            Tree tree = grow_tree(X, resid, all, tp, rng, leaf);
            for (int i = 0; i < n; ++i)
                f[i] += lr_ * tree.eval(X.row(i).transpose());
            trees_.push_back(std::move(tree));
        }
    }
    int predict(const Vec& x) const override {
        double f = base_;
        for (const auto& t : trees_) f += lr_ * t.eval(x);
        return f >= 0 ? 1 : 0;
    }
    std::string name() const override { return "gradient_boosted_trees"; }

private:
    int rounds_, depth_;
    double lr_ = 0.1;
    double base_ = 0.0;
    std::vector<Tree> trees_;
};

}  // namespace

std::unique_ptr<Classifier> make_linear_discriminant() {
    return std::make_unique<LinearDiscriminant>();
}
std::unique_ptr<Classifier> make_adaboost(int rounds) {
    return std::make_unique<AdaBoost>(rounds);
}
std::unique_ptr<Classifier> make_random_forest(int trees, int max_depth) {
    return std::make_unique<RandomForest>(trees, max_depth);
}
std::unique_ptr<Classifier> make_logistic_regression(int iters) {
    return std::make_unique<LogisticRegression>(iters);
}
std::unique_ptr<Classifier> make_gaussian_nb() {
    return std::make_unique<GaussianNb>();
}
std::unique_ptr<Classifier> make_svc() { return std::make_unique<Svc>(); }
std::unique_ptr<Classifier> make_gradient_boosted_trees(int rounds, int max_depth) {
    return std::make_unique<GradientBoostedTrees>(rounds, max_depth);
}

std::vector<std::unique_ptr<Classifier>> make_ensemble() {
    std::vector<std::unique_ptr<Classifier>> v;
    v.push_back(make_linear_discriminant());
    v.push_back(make_adaboost());
    v.push_back(make_random_forest());
    v.push_back(make_logistic_regression());
    v.push_back(make_gaussian_nb());
    v.push_back(make_svc());
    v.push_back(make_gradient_boosted_trees());
    return v;
}

int majority_vote(const std::vector<std::unique_ptr<Classifier>>& ensemble,
                  const Vec& x) {
    int ones = 0;
    for (const auto& c : ensemble) ones += c->predict(x);
    return 2 * ones > static_cast<int>(ensemble.size()) ? 1 : 0;
}

}  // namespace flowsift::classifiers
