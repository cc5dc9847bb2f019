#include "flowsift/augment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

namespace flowsift::augment {

namespace {
constexpr double kClamp = 1e-7;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}  // namespace

std::string to_string(Region r) {
    switch (r) {
        case Region::MB: return "M_B";
        case Region::MO: return "M_O";
        case Region::NB: return "N_B";
        case Region::None: return "none";
    }
    return "?";
}

std::pair<double, double> region_bounds(Region r, const RegionThresholds& t) {
    switch (r) {
        case Region::MB: return {t.omega1, t.omega2};
        case Region::MO: return {kNegInf, t.omega1};
        case Region::NB: return {t.omega2, t.omega3};
        default: throw Error("region_bounds: no bounds for 'none'");
    }
}

double nearest_rank(std::vector<double> vals, double pct) {
    std::sort(vals.begin(), vals.end());
    const auto n = vals.size();
    std::size_t rank = static_cast<std::size_t>(
        std::ceil(pct * static_cast<double>(n)));
    rank = std::clamp<std::size_t>(rank, 1, n);
    return vals[rank - 1];
}

RegionThresholds resolve_thresholds(const density::MadeModel& p_normal,
                                    const density::MadeModel& p_malicious,
                                    const std::vector<Vec>& d_normal,
                                    const std::vector<Vec>& d_malicious,
                                    double gamma_pct,
                                    std::array<double, 3> omega_pcts) {
    if (d_normal.empty()) throw Error("resolve_thresholds: empty normal class");
    if (d_malicious.empty()) throw Error("resolve_thresholds: empty malicious class");
    std::vector<double> mal(d_malicious.size());
    for (std::size_t i = 0; i < d_malicious.size(); ++i)
        mal[i] = p_malicious.log_density(d_malicious[i]);
    std::vector<double> nrm(d_normal.size());
    for (std::size_t i = 0; i < d_normal.size(); ++i)
        nrm[i] = p_normal.log_density(d_normal[i]);
    RegionThresholds t;
    t.gamma = nearest_rank(mal, gamma_pct);
    t.omega1 = nearest_rank(nrm, omega_pcts[0]);
    t.omega2 = nearest_rank(nrm, omega_pcts[1]);
    t.omega3 = nearest_rank(nrm, omega_pcts[2]);
    if (!(t.omega1 < t.omega2 && t.omega2 < t.omega3))
        log_line("augment", "warn", "omega thresholds are not strictly increasing");
    return t;
}

Region region_from_densities(double pn, double pm, const RegionThresholds& t) {
    if (pm >= t.gamma) return Region::None;
    if (pn < t.omega1) return Region::MO;
    if (pn < t.omega2) return Region::MB;
    if (pn < t.omega3) return Region::NB;
    return Region::None;
}

Region region_of(const Vec& x, const density::MadeModel& p_normal,
                 const density::MadeModel& p_malicious, const RegionThresholds& t) {
    double pm = p_malicious.log_density(x);
    if (pm >= t.gamma) return Region::None;
    return region_from_densities(p_normal.log_density(x), pm, t);
}

double pull_away(const std::vector<Vec>& batch) {
    const std::size_t n = batch.size();
    if (n < 2) return 0.0;
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            double denom = batch[i].norm() * batch[j].norm();
            if (denom == 0.0) continue;
            double c = batch[i].dot(batch[j]) / denom;
            sum += c * c;
        }
    return sum / static_cast<double>(n * (n - 1));
}

void Generator::init(int latent_dim, int out_dim, Rng& rng) {
    latent = latent_dim;
    l1.init(latent, 64, rng);
    l2.init(64, 64, rng);
    l3.init(64, out_dim, rng);
}

Vec Generator::sample(Rng& rng) const {
    RowVec z(latent);
    for (int i = 0; i < latent; ++i) z[i] = rng.normal();
    Mat a = nn::relu(l1.forward(z));
    a = nn::relu(l2.forward(a));
    return l3.forward(a).row(0).transpose();
}

std::vector<Vec> Generator::sample_batch(int count, Rng& rng) const {
    std::vector<Vec> out(count);
    for (int i = 0; i < count; ++i) out[i] = sample(rng);
    return out;
}

void Discriminator::init(int in_dim, Rng& rng) {
    l1.init(in_dim, 64, rng);
    l2.init(64, 32, rng);
    l3.init(32, 1, rng);
}

double Discriminator::prob(const Vec& x) const {
    Mat a = nn::relu(l1.forward(x.transpose()));
    a = nn::relu(l2.forward(a));
    return nn::sigmoid(l3.forward(a)(0, 0));
}

Vec Discriminator::features(const Vec& x) const {
    return nn::relu(l1.forward(x.transpose())).row(0).transpose();
}

const Generator& GanInstance::generator(Region r) const {
    switch (r) {
        case Region::MB: return g_mb;
        case Region::MO: return g_mo;
        case Region::NB: return g_nb;
        default: throw Error("no generator for region 'none'");
    }
}

double generator_loss(const std::vector<Vec>& batch,
                      const density::MadeModel& p_normal,
                      const density::MadeModel& p_malicious,
                      const RegionThresholds& t, Region region,
                      const Discriminator& disc, const std::vector<Vec>& x_in) {
    if (batch.empty()) throw Error("generator_loss: empty batch");
    auto [theta1, theta2] = region_bounds(region, t);

    double kl = -pull_away(batch);
    double sum_pm = 0, sum_lo = 0, sum_hi = 0;
    std::size_t n_pm = 0, n_lo = 0, n_hi = 0;
    for (const auto& x : batch) {
        double pm = p_malicious.log_density(x);
        if (pm >= t.gamma) {
            sum_pm += pm;
            ++n_pm;
            continue;
        }
        double pn = p_normal.log_density(x);
        if (pn < theta1) {
            sum_lo += pn;
            ++n_lo;
        } else if (pn >= theta2) {
            sum_hi += pn;
            ++n_hi;
        }
    }
    if (n_pm) kl += sum_pm / static_cast<double>(n_pm);
    if (n_lo) kl -= sum_lo / static_cast<double>(n_lo);
    if (n_hi) kl += sum_hi / static_cast<double>(n_hi);

    double lf = 0.0;
    if (!x_in.empty()) {
        Vec mg = Vec::Zero(disc.l1.W.cols());
        for (const auto& x : batch) mg += disc.features(x);
        mg /= static_cast<double>(batch.size());
        Vec mi = Vec::Zero(disc.l1.W.cols());
        for (const auto& x : x_in) mi += disc.features(x);
        mi /= static_cast<double>(x_in.size());
        lf = (mg - mi).norm();
    }
    return kl + lf;
}

double discriminator_loss(const std::vector<Vec>& d_normal,
                          const std::vector<Vec>& d_malicious,
                          const std::vector<Vec>& g_mb,
                          const std::vector<Vec>& g_mo,
                          const std::vector<Vec>& g_nb,
                          const Discriminator& disc) {
    auto mean_log = [&](const std::vector<Vec>& xs, bool one_minus) {
        if (xs.empty()) return 0.0;
        double s = 0;
        for (const auto& x : xs) {
            double p = std::clamp(disc.prob(x), kClamp, 1.0 - kClamp);
            s += std::log(one_minus ? 1.0 - p : p);
        }
        return s / static_cast<double>(xs.size());
    };
    return mean_log(d_normal, false) + mean_log(d_malicious, true) +
           mean_log(g_mb, true) + mean_log(g_mo, true) + mean_log(g_nb, false);
}

namespace {

/// Batched discriminator forward with caches for backprop.
struct DiscForward {
    Mat x, a1, a2, p;  // post-activation layers and sigmoid output
};

DiscForward disc_forward(const Discriminator& d, const Mat& X) {
    DiscForward f;
    f.x = X;
    f.a1 = nn::relu(d.l1.forward(X));
    f.a2 = nn::relu(d.l2.forward(f.a1));
    f.p = nn::sigmoid(d.l3.forward(f.a2));
    return f;
}

/// dlogit: gradient w.r.t. the pre-sigmoid output. Accumulates parameter
/// grads; returns gradient w.r.t. the input rows.
Mat disc_backward(Discriminator& d, const DiscForward& f, const Mat& dlogit) {
    Mat da2 = d.l3.backward(f.a2, dlogit);
    da2 = da2.cwiseProduct((f.a2.array() > 0.0).cast<double>().matrix());
    Mat da1 = d.l2.backward(f.a1, da2);
    da1 = da1.cwiseProduct((f.a1.array() > 0.0).cast<double>().matrix());
    return d.l1.backward(f.x, da1);
}

struct GenForward {
    Mat z, a1, a2, out;
};

GenForward gen_forward(const Generator& g, const Mat& Z) {
    GenForward f;
    f.z = Z;
    f.a1 = nn::relu(g.l1.forward(Z));
    f.a2 = nn::relu(g.l2.forward(f.a1));
    f.out = g.l3.forward(f.a2);
    return f;
}

void gen_backward(Generator& g, const GenForward& f, const Mat& dout) {
    Mat da2 = g.l3.backward(f.a2, dout);
    da2 = da2.cwiseProduct((f.a2.array() > 0.0).cast<double>().matrix());
    Mat da1 = g.l2.backward(f.a1, da2);
    da1 = da1.cwiseProduct((f.a1.array() > 0.0).cast<double>().matrix());
    g.l1.backward(f.z, da1);
}

/// Gradient of the pull-away term w.r.t. each row of F.
Mat pull_away_grad(const Mat& F) {
    const Eigen::Index n = F.rows();
    Mat grad = Mat::Zero(n, F.cols());
    if (n < 2) return grad;
    const double c = 1.0 / static_cast<double>(n * (n - 1));
    for (Eigen::Index i = 0; i < n; ++i) {
        double a = F.row(i).squaredNorm();
        if (a == 0.0) continue;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (i == j) continue;
            double b = F.row(j).squaredNorm();
            if (b == 0.0) continue;
            double s = F.row(i).dot(F.row(j));
            // d/df_i of s^2/(a*b), counted twice across ordered pairs
            grad.row(i) += 2.0 * c *
                           (2.0 * s / (a * b) * F.row(j) -
                            2.0 * s * s / (a * a * b) * F.row(i));
        }
    }
    return grad;
}

Mat random_latents(int n, int latent, Rng& rng) {
    Mat Z(n, latent);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < latent; ++j) Z(i, j) = rng.normal();
    return Z;
}

Mat stack_rows(const std::vector<Vec>& xs, const std::vector<int>& idx) {
    Mat m(idx.size(), xs.empty() ? 0 : xs[0].size());
    for (std::size_t i = 0; i < idx.size(); ++i) m.row(i) = xs[idx[i]].transpose();
    return m;
}

}  // namespace

GanInstance train_gan(const std::vector<Vec>& d_normal,
                      const std::vector<Vec>& d_malicious,
                      const density::MadeModel& p_normal,
                      const density::MadeModel& p_malicious,
                      const RegionThresholds& t, const GanConfig& config,
                      std::uint64_t seed) {
    if (d_normal.empty() || d_malicious.empty())
        throw Error("train_gan: both classes required");
    const int d = static_cast<int>(d_normal[0].size());

    GanInstance gan;
    gan.config = config;
    gan.seed = seed;
    Rng init_rng(seed);
    gan.g_mb.init(config.latent, d, init_rng);
    gan.g_mo.init(config.latent, d, init_rng);
    gan.g_nb.init(config.latent, d, init_rng);
    gan.disc.init(d, init_rng);

    // X_in per region: corrected training samples already inside the region.
    std::vector<Vec> all_train = d_normal;
    all_train.insert(all_train.end(), d_malicious.begin(), d_malicious.end());
    std::array<std::vector<Vec>, 3> x_in;
    double min_pm = std::numeric_limits<double>::infinity();
    for (const auto& x : all_train) {
        min_pm = std::min(min_pm, p_malicious.log_density(x));
        Region r = region_of(x, p_normal, p_malicious, t);
        if (r == Region::MB) x_in[0].push_back(x);
        else if (r == Region::MO) x_in[1].push_back(x);
        else if (r == Region::NB) x_in[2].push_back(x);
    }
    if (t.gamma <= min_pm) {
        gan.warnings.push_back("gamma below all training densities; density penalty vacuous");
        log_line("augment", "warn", gan.warnings.back());
    }
    for (int r = 0; r < 3; ++r)
        if (x_in[r].empty()) {
            gan.warnings.push_back("no in-region training samples for " +
                                   to_string(static_cast<Region>(r)) +
                                   "; feature-matching term disabled");
            log_line("augment", "warn", gan.warnings.back());
        }

    nn::Adam d_opt(config.lr);
    d_opt.attach(gan.disc.l1);
    d_opt.attach(gan.disc.l2);
    d_opt.attach(gan.disc.l3);
    std::array<Generator*, 3> gens{&gan.g_mb, &gan.g_mo, &gan.g_nb};
    std::array<nn::Adam, 3> g_opts{nn::Adam(config.lr), nn::Adam(config.lr),
                                   nn::Adam(config.lr)};
    for (int g = 0; g < 3; ++g) {
        g_opts[g].attach(gens[g]->l1);
        g_opts[g].attach(gens[g]->l2);
        g_opts[g].attach(gens[g]->l3);
    }

    Rng rng(derive_seed(seed, 3));
    const int bs = std::max(1, config.batch);
    auto pick = [&](std::size_t n) {
        std::vector<int> idx(bs);
        for (int i = 0; i < bs; ++i)
            idx[i] = static_cast<int>(rng.integer(0, static_cast<std::int64_t>(n) - 1));
        return idx;
    };
    auto rows_to_vecs = [](const Mat& m) {
        std::vector<Vec> v(m.rows());
        for (Eigen::Index i = 0; i < m.rows(); ++i) v[i] = m.row(i).transpose();
        return v;
    };

    const int steps = std::max(0, config.steps);
    if (steps == 0) {
        // No-op schedule: record the initial losses only.
        Mat z = random_latents(bs, config.latent, rng);
        std::array<std::vector<Vec>, 3> g0;
        for (int g = 0; g < 3; ++g)
            g0[g] = rows_to_vecs(gen_forward(*gens[g], z).out);
        std::vector<Vec> bn, bm;
        for (int i : pick(d_normal.size())) bn.push_back(d_normal[i]);
        for (int i : pick(d_malicious.size())) bm.push_back(d_malicious[i]);
        gan.d_loss_history.push_back(
            discriminator_loss(bn, bm, g0[0], g0[1], g0[2], gan.disc));
        for (int g = 0; g < 3; ++g)
            gan.g_loss_history[g].push_back(
                generator_loss(g0[g], p_normal, p_malicious, t,
                               static_cast<Region>(g), gan.disc, x_in[g]));
        return gan;
    }

    for (int step = 0; step < steps; ++step) {
        // ---- discriminator step: ascend L_D.
        Mat bn = stack_rows(d_normal, pick(d_normal.size()));
        Mat bm = stack_rows(d_malicious, pick(d_malicious.size()));
        std::array<Mat, 3> gx;
        for (int g = 0; g < 3; ++g)
            gx[g] = gen_forward(*gens[g], random_latents(bs, config.latent, rng)).out;

        gan.disc.l1.zero_grad();
        gan.disc.l2.zero_grad();
        gan.disc.l3.zero_grad();
        double d_loss = 0.0;
        auto d_term = [&](const Mat& X, bool one_minus) {
            DiscForward f = disc_forward(gan.disc, X);
            const double inv = 1.0 / static_cast<double>(X.rows());
            Mat dlogit(X.rows(), 1);
            for (Eigen::Index i = 0; i < X.rows(); ++i) {
                double p = f.p(i, 0);
                double pc = std::clamp(p, kClamp, 1.0 - kClamp);
                d_loss += std::log(one_minus ? 1.0 - pc : pc) * inv;
                // minimizing -L_D
                dlogit(i, 0) = (one_minus ? p : p - 1.0) * inv;
            }
            disc_backward(gan.disc, f, dlogit);
        };
        d_term(bn, false);
        d_term(bm, true);
        d_term(gx[0], true);
        d_term(gx[1], true);
        d_term(gx[2], false);
        d_opt.step();
        gan.d_loss_history.push_back(d_loss);

        // ---- generator steps: descend L_G.
        for (int g = 0; g < 3; ++g) {
            Region region = static_cast<Region>(g);
            auto [theta1, theta2] = region_bounds(region, t);
            Mat z = random_latents(bs, config.latent, rng);
            GenForward gf = gen_forward(*gens[g], z);
            const Mat& X = gf.out;
            const Eigen::Index n = X.rows();

            Mat dX = -pull_away_grad(X);  // from -PT(batch)
            double loss = -pull_away(rows_to_vecs(X));

            std::vector<int> mem_pm, mem_lo, mem_hi;
            std::vector<double> pm(n), pn(n);
            std::vector<Vec> gm(n), gn(n);
            for (Eigen::Index i = 0; i < n; ++i) {
                Vec x = X.row(i).transpose();
                gm[i] = p_malicious.log_density_grad(x, &pm[i]);
                gn[i] = p_normal.log_density_grad(x, &pn[i]);
                if (pm[i] >= t.gamma) mem_pm.push_back(static_cast<int>(i));
                else if (pn[i] < theta1) mem_lo.push_back(static_cast<int>(i));
                else if (pn[i] >= theta2) mem_hi.push_back(static_cast<int>(i));
            }
            for (int i : mem_pm) {
                loss += pm[i] / static_cast<double>(mem_pm.size());
                dX.row(i) += gm[i].transpose() / static_cast<double>(mem_pm.size());
            }
            for (int i : mem_lo) {
                loss -= pn[i] / static_cast<double>(mem_lo.size());
                dX.row(i) -= gn[i].transpose() / static_cast<double>(mem_lo.size());
            }
            for (int i : mem_hi) {
                loss += pn[i] / static_cast<double>(mem_hi.size());
                dX.row(i) += gn[i].transpose() / static_cast<double>(mem_hi.size());
            }

            if (!x_in[g].empty()) {
                // L_f through the discriminator's first layer only.
                Mat a1 = nn::relu(gan.disc.l1.forward(X));
                Vec mg = a1.colwise().mean().transpose();
                Vec mi = Vec::Zero(mg.size());
                for (const auto& x : x_in[g]) mi += gan.disc.features(x);
                mi /= static_cast<double>(x_in[g].size());
                Vec delta = mg - mi;
                double norm = delta.norm();
                loss += norm;
                if (norm > 1e-12) {
                    RowVec dmean = (delta / norm).transpose() /
                                   static_cast<double>(n);
                    Mat da1 = dmean.replicate(n, 1);
                    da1 = da1.cwiseProduct((a1.array() > 0.0).cast<double>().matrix());
                    dX += da1 * gan.disc.l1.W.transpose();
                }
            }

            gens[g]->l1.zero_grad();
            gens[g]->l2.zero_grad();
            gens[g]->l3.zero_grad();
            gen_backward(*gens[g], gf, dX);
            g_opts[g].step();
            gan.g_loss_history[g].push_back(loss);
        }
    }
    return gan;
}

SyntheticBatch synthesize(const std::vector<Vec>& d_normal,
                          const std::vector<Vec>& d_malicious,
                          const density::MadeModel& p_normal,
                          const density::MadeModel& p_malicious,
                          const RegionThresholds& t, int eta, int per_region,
                          const GanConfig& config, std::uint64_t seed) {
    if (eta < 1) throw Error("synthesize: eta must be >= 1");
    if (per_region < 0) throw Error("synthesize: per-region count must be >= 0");
    SyntheticBatch out;
    for (int k = 0; k < eta; ++k) {
        GanInstance gan = train_gan(d_normal, d_malicious, p_normal, p_malicious, t,
                                    config, derive_seed(seed, 10 + k));
        Rng rng(derive_seed(seed, 1000 + k));
        for (Region r : {Region::MB, Region::MO, Region::NB}) {
            for (const auto& v : gan.generator(r).sample_batch(per_region, rng)) {
                out.vectors.push_back(v);
                out.regions.push_back(r);
                out.labels.push_back(r == Region::NB ? 0 : 1);
            }
        }
    }
    return out;
}

void save_synthetic_file(const SyntheticBatch& batch, const std::string& path,
                         const std::string& provenance) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write synthetic batch '" + path + "'");
    if (!provenance.empty()) out << "# " << provenance << "\n";
    out.precision(17);
    for (std::size_t i = 0; i < batch.vectors.size(); ++i) {
        out << "syn" << i << ',' << batch.labels[i] << ',';
        const Vec& v = batch.vectors[i];
        for (Eigen::Index j = 0; j < v.size(); ++j) {
            if (j) out << ' ';
            out << v[j];
        }
        out << ',' << to_string(batch.regions[i]) << '\n';
    }
}

}  // namespace flowsift::augment
