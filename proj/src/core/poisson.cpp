#include "qdp/poisson.hpp"

#include "qdp/errors.hpp"

#include <cmath>

namespace qdp {

namespace {
constexpr double tiny = 1e-300;
}

double poisson_pmf(double lambda, int y) {
    if (y < 0) return 0.0;
    if (lambda == 0.0) return y == 0 ? 1.0 : 0.0;
    const double lp = -lambda + y * std::log(lambda) - std::lgamma(y + 1.0);
    return lp < std::log(tiny) ? 0.0 : std::exp(lp);
}

double poisson_sf(double lambda, int m) {
    if (m <= 0) return 1.0;
    if (lambda == 0.0) return 0.0;
    const double mode = std::floor(lambda);
    if (m <= mode) {
        double cdf = 0.0;
        for (int y = 0; y < m; ++y) cdf += poisson_pmf(lambda, y);
        return std::max(0.0, 1.0 - cdf);
    }
    // right of the mode the terms decrease; stop once they no longer register
    double tail = 0.0;
    double term = poisson_pmf(lambda, m);
    for (int y = m; term > tiny; ++y) {
        tail += term;
        if (term < tail * 1e-17) break;
        term *= lambda / double(y + 1);
    }
    return tail;
}

PoissonTable::PoissonTable(double lambda, int max_index) : lambda_(lambda) {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw DomainError("Poisson rate must be finite and >= 0");
    pmf_.resize(max_index + 1);
    sf_.resize(max_index + 2);
    tmean_.resize(max_index + 2);
    for (int y = 0; y <= max_index; ++y) pmf_[y] = poisson_pmf(lambda, y);
    for (int m = 0; m <= max_index + 1; ++m) sf_[m] = poisson_sf(lambda, m);
    tmean_[0] = 0.0;
    for (int m = 1; m <= max_index + 1; ++m) tmean_[m] = tmean_[m - 1] + sf_[m];
}

} // namespace qdp
