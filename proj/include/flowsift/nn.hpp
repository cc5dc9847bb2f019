#pragma once

#include <cmath>
#include <vector>

#include "flowsift/common.hpp"

namespace flowsift::nn {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline Mat sigmoid(const Mat& x) {
    return x.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
}
inline Mat tanh_m(const Mat& x) {
    return x.unaryExpr([](double v) { return std::tanh(v); });
}
inline Mat relu(const Mat& x) { return x.cwiseMax(0.0); }

/// Row-wise softmax.
inline Mat softmax_rows(const Mat& x) {
    Mat out(x.rows(), x.cols());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        double m = x.row(r).maxCoeff();
        RowVec e = (x.row(r).array() - m).exp();
        out.row(r) = e / e.sum();
    }
    return out;
}

inline double log_sum_exp(const Vec& v) {
    double m = v.maxCoeff();
    return m + std::log((v.array() - m).exp().sum());
}

/// One dense layer with accumulated gradients. Forward is X*W + b per row.
struct Linear {
    Mat W;
    RowVec b;
    Mat gW;
    RowVec gb;

    Linear() = default;
    Linear(int in, int out, Rng& rng) { init(in, out, rng); }

    void init(int in, int out, Rng& rng) {
        double s = std::sqrt(2.0 / (in + out));
        W = Mat::NullaryExpr(in, out, [&]() { return rng.normal(0, s); });
        b = RowVec::Zero(out);
        zero_grad();
    }
    void zero_grad() {
        gW = Mat::Zero(W.rows(), W.cols());
        gb = RowVec::Zero(b.cols());
    }
    Mat forward(const Mat& x) const { return (x * W).rowwise() + b; }
    /// Accumulates gradients and returns dL/dx.
    Mat backward(const Mat& x, const Mat& dout) {
        gW += x.transpose() * dout;
        gb += dout.colwise().sum();
        return dout * W.transpose();
    }
};

/// Adam over a flat list of (param, grad) matrix pairs.
class Adam {
public:
    explicit Adam(double lr = 1e-3, double b1 = 0.9, double b2 = 0.999,
                  double eps = 1e-8)
        : lr_(lr), b1_(b1), b2_(b2), eps_(eps) {}

    void attach(Mat* p, Mat* g) {
        params_.push_back(p);
        grads_.push_back(g);
        m_.emplace_back(Mat::Zero(p->rows(), p->cols()));
        v_.emplace_back(Mat::Zero(p->rows(), p->cols()));
    }
    void attach(RowVec* p, RowVec* g) {
        rparams_.push_back(p);
        rgrads_.push_back(g);
        rm_.emplace_back(RowVec::Zero(p->cols()));
        rv_.emplace_back(RowVec::Zero(p->cols()));
    }
    void attach(Linear& l) {
        attach(&l.W, &l.gW);
        attach(&l.b, &l.gb);
    }

    void step() {
        ++t_;
        double c1 = 1.0 - std::pow(b1_, t_);
        double c2 = 1.0 - std::pow(b2_, t_);
        for (std::size_t i = 0; i < params_.size(); ++i) {
            m_[i] = b1_ * m_[i] + (1 - b1_) * (*grads_[i]);
            v_[i] = b2_ * v_[i] + (1 - b2_) * grads_[i]->cwiseProduct(*grads_[i]);
            *params_[i] -= (lr_ * (m_[i] / c1).array() /
                            ((v_[i] / c2).array().sqrt() + eps_))
                               .matrix();
        }
        for (std::size_t i = 0; i < rparams_.size(); ++i) {
            rm_[i] = b1_ * rm_[i] + (1 - b1_) * (*rgrads_[i]);
            rv_[i] =
                b2_ * rv_[i] + (1 - b2_) * rgrads_[i]->cwiseProduct(*rgrads_[i]);
            *rparams_[i] -= (lr_ * (rm_[i] / c1).array() /
                             ((rv_[i] / c2).array().sqrt() + eps_))
                                .matrix();
        }
    }

    double lr() const { return lr_; }

private:
    double lr_, b1_, b2_, eps_;
    long t_ = 0;
    std::vector<Mat*> params_;
    std::vector<Mat*> grads_;
    std::vector<Mat> m_, v_;
    std::vector<RowVec*> rparams_;
    std::vector<RowVec*> rgrads_;
    std::vector<RowVec> rm_, rv_;
};

}  // namespace flowsift::nn
