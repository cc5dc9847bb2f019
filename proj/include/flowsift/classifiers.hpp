#pragma once

#include <memory>
#include <string>
#include <vector>

#include "flowsift/common.hpp"

namespace flowsift::classifiers {

/// Binary classifier over feature vectors. fit() must be deterministic
/// given the seed; predict() must emit a hard 0/1 (no abstention, so a
/// seven-member majority vote cannot tie).
class Classifier {
public:
    virtual ~Classifier() = default;
    virtual void fit(const Mat& X, const std::vector<int>& y, std::uint64_t seed) = 0;
    virtual int predict(const Vec& x) const = 0;
    virtual std::string name() const = 0;
};

std::unique_ptr<Classifier> make_linear_discriminant();
std::unique_ptr<Classifier> make_adaboost(int rounds = 50);
std::unique_ptr<Classifier> make_random_forest(int trees = 50, int max_depth = 8);
std::unique_ptr<Classifier> make_logistic_regression(int iters = 500);
std::unique_ptr<Classifier> make_gaussian_nb();
std::unique_ptr<Classifier> make_svc();
std::unique_ptr<Classifier> make_gradient_boosted_trees(int rounds = 50,
                                                        int max_depth = 3);

/// The seven-member ensemble used for label inference.
std::vector<std::unique_ptr<Classifier>> make_ensemble();

int majority_vote(const std::vector<std::unique_ptr<Classifier>>& ensemble,
                  const Vec& x);

}  // namespace flowsift::classifiers
