#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace qdp {

/// Probability vector over an indexed finite set.
///
/// Construction clamps entries in [-1e-15, 0) to zero and renormalizes when the
/// total is within 1e-9 of one. Anything worse throws ModelContractError.
class Pmf {
public:
    static constexpr double negative_clamp = 1e-15;
    static constexpr double sum_tolerance = 1e-9;

    Pmf() = default;
    explicit Pmf(std::vector<double> weights);
    Pmf(std::initializer_list<double> weights) : Pmf(std::vector<double>(weights)) {}

    static Pmf point_mass(std::size_t size, std::size_t index);
    static Pmf uniform(std::size_t size);

    std::size_t size() const { return w_.size(); }
    bool empty() const { return w_.empty(); }
    double operator[](std::size_t i) const { return w_[i]; }
    const std::vector<double>& weights() const { return w_; }
    std::span<const double> span() const { return w_; }

    auto begin() const { return w_.begin(); }
    auto end() const { return w_.end(); }

    /// Expectation of f(i) where f is given as a vector over the same index set.
    double expect(std::span<const double> f) const;
    /// Index of the largest entry, lowest index on ties.
    std::size_t mode() const;

    bool operator==(const Pmf& other) const = default;

private:
    std::vector<double> w_;
};

/// Binomial(n, p) probabilities over {0..n}.
std::vector<double> binomial_pmf(int n, double p);

} // namespace qdp
