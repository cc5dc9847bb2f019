#pragma once

#include <array>
#include <string>
#include <vector>

#include "flowsift/density.hpp"
#include "flowsift/nn.hpp"

namespace flowsift::augment {

/// Log-density cutoffs. gamma comes from the malicious-side model,
/// omega1 < omega2 < omega3 from the normal-side model.
struct RegionThresholds {
    double gamma = 0.0;
    double omega1 = 0.0;
    double omega2 = 0.0;
    double omega3 = 0.0;
};

enum class Region { MB, MO, NB, None };

std::string to_string(Region r);

/// (theta1, theta2) substitution for a region's distribution spec.
/// MO's lower bound is open (-inf): every point below omega1 qualifies.
std::pair<double, double> region_bounds(Region r, const RegionThresholds& t);

/// Nearest-rank percentile: the value at rank ceil(pct * n) (1-based,
/// clamped to [1, n]) of the sorted values.
double nearest_rank(std::vector<double> vals, double pct);

/// Nearest-rank percentile thresholds: gamma at gamma_pct of the malicious
/// model's log-densities over the malicious class, omegas at omega_pcts of
/// the normal model's log-densities over the normal class.
RegionThresholds resolve_thresholds(const density::MadeModel& p_normal,
                                    const density::MadeModel& p_malicious,
                                    const std::vector<Vec>& d_normal,
                                    const std::vector<Vec>& d_malicious,
                                    double gamma_pct = 0.05,
                                    std::array<double, 3> omega_pcts = {0.1, 0.2, 0.3});

/// Region predicate on the two log-density values alone.
Region region_from_densities(double pn, double pm, const RegionThresholds& t);

Region region_of(const Vec& x, const density::MadeModel& p_normal,
                 const density::MadeModel& p_malicious, const RegionThresholds& t);

/// Pull-away term: mean squared pairwise cosine similarity, in [0, 1].
double pull_away(const std::vector<Vec>& batch);

/// Feed-forward generator: latent -> 64 -> 64 -> d.
struct Generator {
    nn::Linear l1, l2, l3;
    int latent = 16;

    void init(int latent_dim, int out_dim, Rng& rng);
    Vec sample(Rng& rng) const;                 // one latent draw -> vector
    std::vector<Vec> sample_batch(int count, Rng& rng) const;
};

/// Discriminator: d -> 64 -> 32 -> 1 (sigmoid). D_f is the post-activation
/// output of the first layer.
struct Discriminator {
    nn::Linear l1, l2, l3;

    void init(int in_dim, Rng& rng);
    double prob(const Vec& x) const;
    Vec features(const Vec& x) const;  // D_f
};

struct GanConfig {
    int latent = 16;
    int steps = 2000;   // alternating discriminator/generator updates
    int batch = 64;
    double lr = 1e-4;
};

struct GanInstance {
    Generator g_mb, g_mo, g_nb;
    Discriminator disc;
    GanConfig config;
    std::uint64_t seed = 0;
    std::vector<double> d_loss_history;
    std::array<std::vector<double>, 3> g_loss_history;  // MB, MO, NB
    std::vector<std::string> warnings;

    const Generator& generator(Region r) const;
};

/// Eq-style generator objective, value only (the training path recomputes
/// it with gradients). Empty penalty memberships contribute 0; empty X_in
/// zeroes the feature-matching term.
double generator_loss(const std::vector<Vec>& batch,
                      const density::MadeModel& p_normal,
                      const density::MadeModel& p_malicious,
                      const RegionThresholds& t, Region region,
                      const Discriminator& disc, const std::vector<Vec>& x_in);

double discriminator_loss(const std::vector<Vec>& d_normal,
                          const std::vector<Vec>& d_malicious,
                          const std::vector<Vec>& g_mb,
                          const std::vector<Vec>& g_mo,
                          const std::vector<Vec>& g_nb,
                          const Discriminator& disc);

GanInstance train_gan(const std::vector<Vec>& d_normal,
                      const std::vector<Vec>& d_malicious,
                      const density::MadeModel& p_normal,
                      const density::MadeModel& p_malicious,
                      const RegionThresholds& t, const GanConfig& config,
                      std::uint64_t seed);

struct SyntheticBatch {
    std::vector<Vec> vectors;
    std::vector<int> labels;        // MB, MO -> 1; NB -> 0
    std::vector<Region> regions;
};

/// Trains eta independent GAN instances on derived seeds; each contributes
/// per_region samples per region.
SyntheticBatch synthesize(const std::vector<Vec>& d_normal,
                          const std::vector<Vec>& d_malicious,
                          const density::MadeModel& p_normal,
                          const density::MadeModel& p_malicious,
                          const RegionThresholds& t, int eta, int per_region,
                          const GanConfig& config, std::uint64_t seed);

void save_synthetic_file(const SyntheticBatch& batch, const std::string& path,
                         const std::string& provenance = "");

}  // namespace flowsift::augment
