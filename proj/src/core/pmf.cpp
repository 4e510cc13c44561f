#include "qdp/pmf.hpp"

#include "qdp/errors.hpp"

#include <cmath>
#include <string>

namespace qdp {

Pmf::Pmf(std::vector<double> weights) : w_(std::move(weights)) {
    double total = 0.0;
    for (std::size_t i = 0; i < w_.size(); ++i) {
        double& v = w_[i];
        if (!std::isfinite(v))
            throw ModelContractError("pmf entry " + std::to_string(i) + " is not finite");
        if (v < 0.0) {
            if (v < -negative_clamp)
                throw ModelContractError("pmf entry " + std::to_string(i) + " is negative: " +
                                         std::to_string(v));
            v = 0.0;
        }
        total += v;
    }
    if (std::abs(total - 1.0) > sum_tolerance)
        throw ModelContractError("pmf sums to " + std::to_string(total));
    if (total != 1.0)
        for (double& v : w_) v /= total;
}

Pmf Pmf::point_mass(std::size_t size, std::size_t index) {
    std::vector<double> w(size, 0.0);
    w.at(index) = 1.0;
    return Pmf(std::move(w));
}

Pmf Pmf::uniform(std::size_t size) {
    if (size == 0) throw DomainError("uniform pmf over an empty set");
    return Pmf(std::vector<double>(size, 1.0 / double(size)));
}

double Pmf::expect(std::span<const double> f) const {
    double s = 0.0;
    for (std::size_t i = 0; i < w_.size(); ++i) s += w_[i] * f[i];
    return s;
}

std::size_t Pmf::mode() const {
    std::size_t best = 0;
    for (std::size_t i = 1; i < w_.size(); ++i)
        if (w_[i] > w_[best]) best = i;
    return best;
}

std::vector<double> binomial_pmf(int n, double p) {
    std::vector<double> out(n + 1, 0.0);
    if (p <= 0.0) {
        out[0] = 1.0;
        return out;
    }
    if (p >= 1.0) {
        out[n] = 1.0;
        return out;
    }
    // multiplicative recurrence from d=0; n is small (server count)
    const double q = 1.0 - p;
    const double ratio = p / q;
    double v = std::pow(q, n);
    out[0] = v;
    for (int d = 1; d <= n; ++d) {
        v *= ratio * double(n - d + 1) / double(d);
        out[d] = v;
    }
    if (out[0] == 0.0) {
        // underflow of q^n for large n; fall back to log space
        for (int d = 0; d <= n; ++d)
            out[d] = std::exp(std::lgamma(n + 1.0) - std::lgamma(d + 1.0) - std::lgamma(n - d + 1.0) +
                              d * std::log(p) + (n - d) * std::log(q));
    }
    return out;
}

} // namespace qdp
