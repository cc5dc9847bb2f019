#pragma once

#include <vector>

#include "flowsift/nn.hpp"

namespace flowsift::nn {

/// Single-direction GRU with manual BPTT over a cached forward pass.
/// Update rule: h_t = (1 - z_t) * h_{t-1} + z_t * hcand_t.
struct GruCell {
    int in = 0, hid = 0;
    Mat Wz, Wr, Wh;  // in x hid
    Mat Uz, Ur, Uh;  // hid x hid
    RowVec bz, br, bh;
    Mat gWz, gWr, gWh, gUz, gUr, gUh;
    RowVec gbz, gbr, gbh;

    void init(int in_dim, int hid_dim, Rng& rng) {
        in = in_dim;
        hid = hid_dim;
        auto mk = [&](int r, int c) -> Mat {
            // Materialize here: the nullary expression is lazy and must not
            // outlive the locals it captures.
            double s = std::sqrt(1.0 / r);
            return Mat::NullaryExpr(r, c, [&]() { return rng.normal(0, s); });
        };
        Wz = mk(in, hid); Wr = mk(in, hid); Wh = mk(in, hid);
        Uz = mk(hid, hid); Ur = mk(hid, hid); Uh = mk(hid, hid);
        bz = RowVec::Zero(hid); br = RowVec::Zero(hid); bh = RowVec::Zero(hid);
        zero_grad();
    }
    void zero_grad() {
        gWz = Mat::Zero(in, hid); gWr = Mat::Zero(in, hid); gWh = Mat::Zero(in, hid);
        gUz = Mat::Zero(hid, hid); gUr = Mat::Zero(hid, hid); gUh = Mat::Zero(hid, hid);
        gbz = RowVec::Zero(hid); gbr = RowVec::Zero(hid); gbh = RowVec::Zero(hid);
    }
    void attach(Adam& opt) {
        opt.attach(&Wz, &gWz); opt.attach(&Wr, &gWr); opt.attach(&Wh, &gWh);
        opt.attach(&Uz, &gUz); opt.attach(&Ur, &gUr); opt.attach(&Uh, &gUh);
        opt.attach(&bz, &gbz); opt.attach(&br, &gbr); opt.attach(&bh, &gbh);
    }

    struct Cache {
        std::vector<Mat> z, r, hc, h;  // per step, batch x hid
    };

    /// Zero initial state; X[t] is batch x in.
    Cache forward(const std::vector<Mat>& X) const {
        Cache c;
        const auto T = X.size();
        c.z.resize(T); c.r.resize(T); c.hc.resize(T); c.h.resize(T);
        Mat hprev = Mat::Zero(X.empty() ? 0 : X[0].rows(), hid);
        for (std::size_t t = 0; t < T; ++t) {
            c.z[t] = sigmoid(((X[t] * Wz + hprev * Uz).rowwise() + bz));
            c.r[t] = sigmoid(((X[t] * Wr + hprev * Ur).rowwise() + br));
            c.hc[t] = tanh_m(((X[t] * Wh + c.r[t].cwiseProduct(hprev) * Uh).rowwise() + bh));
            c.h[t] = (1.0 - c.z[t].array()).matrix().cwiseProduct(hprev) +
                     c.z[t].cwiseProduct(c.hc[t]);
            hprev = c.h[t];
        }
        return c;
    }

    /// dH[t]: external gradient into h_t. Accumulates parameter grads,
    /// returns dX.
    std::vector<Mat> backward(const std::vector<Mat>& X, const Cache& c,
                              const std::vector<Mat>& dH) {
        const auto T = X.size();
        std::vector<Mat> dX(T);
        const Eigen::Index batch = T ? X[0].rows() : 0;
        Mat dh_next = Mat::Zero(batch, hid);  // grad flowing back from t+1
        for (int t = static_cast<int>(T) - 1; t >= 0; --t) {
            Mat hprev = (t == 0) ? Mat::Zero(batch, hid) : c.h[t - 1];
            Mat dh = dH[t] + dh_next;
            Mat dhc = dh.cwiseProduct(c.z[t]);
            Mat dz = dh.cwiseProduct(c.hc[t] - hprev);
            Mat dhprev = dh.cwiseProduct((1.0 - c.z[t].array()).matrix());

            Mat da_h = dhc.cwiseProduct(
                (1.0 - c.hc[t].array().square()).matrix());
            Mat rh = c.r[t].cwiseProduct(hprev);
            gWh += X[t].transpose() * da_h;
            gUh += rh.transpose() * da_h;
            gbh += da_h.colwise().sum();
            Mat drh = da_h * Uh.transpose();
            Mat dr = drh.cwiseProduct(hprev);
            dhprev += drh.cwiseProduct(c.r[t]);
            dX[t] = da_h * Wh.transpose();

            Mat da_z = dz.cwiseProduct(
                c.z[t].cwiseProduct((1.0 - c.z[t].array()).matrix()));
            Mat da_r = dr.cwiseProduct(
                c.r[t].cwiseProduct((1.0 - c.r[t].array()).matrix()));
            gWz += X[t].transpose() * da_z;
            gUz += hprev.transpose() * da_z;
            gbz += da_z.colwise().sum();
            gWr += X[t].transpose() * da_r;
            gUr += hprev.transpose() * da_r;
            gbr += da_r.colwise().sum();
            dX[t] += da_z * Wz.transpose() + da_r * Wr.transpose();
            dhprev += da_z * Uz.transpose() + da_r * Ur.transpose();
            dh_next = dhprev;
        }
        return dX;
    }
};

/// Forward + backward GRU pair over the same input sequence.
struct BiGru {
    GruCell fwd, bwd;

    void init(int in_dim, int hid_dim, Rng& rng) {
        fwd.init(in_dim, hid_dim, rng);
        bwd.init(in_dim, hid_dim, rng);
    }
    void zero_grad() { fwd.zero_grad(); bwd.zero_grad(); }
    void attach(Adam& opt) { fwd.attach(opt); bwd.attach(opt); }

    struct Cache {
        GruCell::Cache f, b;
        std::vector<Mat> x_rev;
    };

    Cache forward(const std::vector<Mat>& X) const {
        Cache c;
        c.f = fwd.forward(X);
        c.x_rev.assign(X.rbegin(), X.rend());
        c.b = bwd.forward(c.x_rev);
        return c;
    }
    /// Output at original position t: [fwd.h[t], bwd state for position t].
    Mat output_at(const Cache& c, std::size_t t) const {
        const std::size_t T = c.f.h.size();
        Mat o(c.f.h[t].rows(), 2 * fwd.hid);
        o.leftCols(fwd.hid) = c.f.h[t];
        o.rightCols(fwd.hid) = c.b.h[T - 1 - t];
        return o;
    }
    /// Final states: forward at the last step, backward at the first
    /// original position (its own last processed step).
    Mat final_states(const Cache& c) const {
        const std::size_t T = c.f.h.size();
        Mat o(c.f.h[T - 1].rows(), 2 * fwd.hid);
        o.leftCols(fwd.hid) = c.f.h[T - 1];
        o.rightCols(fwd.hid) = c.b.h[T - 1];
        return o;
    }
    /// dOut[t] is batch x 2H at original positions; dFinal (may be empty)
    /// is batch x 2H into final_states. Returns dX at original positions.
    std::vector<Mat> backward(const std::vector<Mat>& X, const Cache& c,
                              const std::vector<Mat>& dOut, const Mat& dFinal) {
        const std::size_t T = X.size();
        const Eigen::Index batch = T ? X[0].rows() : 0;
        const int H = fwd.hid;
        std::vector<Mat> dHf(T, Mat::Zero(batch, H));
        std::vector<Mat> dHb(T, Mat::Zero(batch, H));  // in reversed order
        for (std::size_t t = 0; t < T; ++t) {
            if (!dOut.empty()) {
                dHf[t] += dOut[t].leftCols(H);
                dHb[T - 1 - t] += dOut[t].rightCols(H);
            }
        }
        if (dFinal.size() > 0) {
            dHf[T - 1] += dFinal.leftCols(H);
            dHb[T - 1] += dFinal.rightCols(H);
        }
        std::vector<Mat> dXf = fwd.backward(X, c.f, dHf);
        std::vector<Mat> dXb_rev = bwd.backward(c.x_rev, c.b, dHb);
        std::vector<Mat> dX(T);
        for (std::size_t t = 0; t < T; ++t) dX[t] = dXf[t] + dXb_rev[T - 1 - t];
        return dX;
    }
};

}  // namespace flowsift::nn
