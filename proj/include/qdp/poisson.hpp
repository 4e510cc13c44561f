#pragma once

#include <vector>

namespace qdp {

/// P[Y = y] for Y ~ Poisson(lambda), evaluated in log space.
double poisson_pmf(double lambda, int y);
/// P[Y >= m]. Summed from whichever side of the mode is shorter.
double poisson_sf(double lambda, int m);

/// Point masses, survival values and truncated means of one Poisson law on {0..max_index}.
class PoissonTable {
public:
    PoissonTable() = default;
    PoissonTable(double lambda, int max_index);

    double lambda() const { return lambda_; }
    int max_index() const { return int(pmf_.size()) - 1; }
    double pmf(int y) const { return y < 0 ? 0.0 : pmf_[y]; }
    /// P[Y >= m], valid for m <= max_index + 1
    double sf(int m) const { return m <= 0 ? 1.0 : sf_[m]; }
    /// E[min(Y, m)] = sum_{j=1..m} P[Y >= j]
    double truncated_mean(int m) const { return m <= 0 ? 0.0 : tmean_[m]; }

private:
    double lambda_ = 0.0;
    std::vector<double> pmf_;
    std::vector<double> sf_;
    std::vector<double> tmean_;
};

} // namespace qdp
