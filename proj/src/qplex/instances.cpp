#include "qdp/errors.hpp"
#include "qdp/qplex/pricing.hpp"

#include <cmath>

namespace qdp::qplex {

std::vector<double> default_prices() {
    std::vector<double> p;
    for (int k = 1; k <= 11; ++k) p.push_back(k / 10.0);
    return p;
}

Pmf named_service_pmf(const std::string& name) {
    std::vector<double> g(20, 0.0);
    auto fill = [&](int lo, int hi) {
        for (int l = lo; l <= hi; ++l) g[l - 1] = 1.0;
    };
    if (name == "Uni") fill(1, 20);
    else if (name == "UniM") fill(11, 20);
    else if (name == "UniH") fill(16, 20);
    else if (name == "BB") {
        fill(1, 5);
        fill(16, 20);
    } else
        throw ConfigError("unknown service pmf '" + name + "'", {"service_pmf"});
    double tot = 0.0;
    for (double v : g) tot += v;
    for (double& v : g) v /= tot;
    return Pmf(std::move(g));
}

namespace {

// levels on a 50-epoch reference grid, as (first epoch, level) breakpoints
struct Piece {
    int from;
    double level;
};

const std::vector<Piece>& dec_pieces() {
    static const std::vector<Piece> p{{0, 1.0}, {6, 0.9}, {12, 0.7}, {15, 0.45}, {20, 0.65}, {30, 0.5}, {40, 0.35}};
    return p;
}

double piecewise(const std::vector<Piece>& pieces, int u) {
    double v = pieces.front().level;
    for (const Piece& p : pieces)
        if (u >= p.from) v = p.level;
    return v;
}

} // namespace

std::vector<double> named_shape(const std::string& name, int T) {
    std::vector<double> s(T);
    for (int t = 0; t < T; ++t) {
        const int u = T > 0 ? int(std::floor(t * 50.0 / T)) : 0;
        if (name == "DEC") s[t] = piecewise(dec_pieces(), u);
        else if (name == "INC") s[t] = piecewise(dec_pieces(), 49 - u);
        else if (name == "ALT") s[t] = (u / 5) % 2 == 0 ? 1.0 : 0.45;
        else if (name == "CON") s[t] = 1.0;
        else throw ConfigError("unknown arrival shape '" + name + "'", {"shape"});
    }
    return T > 0 ? normalize_shape(std::move(s)) : s;
}

std::vector<double> normalize_shape(std::vector<double> shape) {
    double tot = 0.0;
    for (double v : shape) {
        if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError("arrival shape entries must be finite and >= 0", {"shape"});
        tot += v;
    }
    if (shape.empty()) return shape;
    if (!(tot > 0.0)) throw ConfigError("arrival shape is identically zero", {"shape"});
    const double scale = double(shape.size()) / tot;
    for (double& v : shape) v *= scale;
    return shape;
}

std::vector<std::vector<double>> build_arrival_table(const std::vector<double>& shape, double u_avg_max, int n,
                                                     double mean_service, const std::vector<double>& prices) {
    if (!(mean_service > 0.0)) throw ConfigError("mean service time must be positive", {"service_pmf"});
    if (!(u_avg_max >= 0.0)) throw ConfigError("u_avg_max must be >= 0", {"u_avg_max"});
    for (double a : prices)
        if (!(a >= 0.0) || a > 1.1 + 1e-12) throw ConfigError("prices must lie in [0, 1.1]", {"prices"});
    for (double v : shape)
        if (!(v >= 0.0)) throw ConfigError("arrival shape entries must be >= 0", {"shape"});
    const double scale = n * u_avg_max / mean_service;
    std::vector<std::vector<double>> lam(shape.size(), std::vector<double>(prices.size()));
    for (std::size_t t = 0; t < shape.size(); ++t)
        for (std::size_t a = 0; a < prices.size(); ++a) lam[t][a] = scale * shape[t] * std::max(0.0, 1.1 - prices[a]);
    return lam;
}

} // namespace qdp::qplex

namespace qdp::qplex {

PricingSpec build_spec(const InstanceParams& p) {
    PricingSpec s;
    s.n = p.n;
    s.b = p.b;
    s.T = p.T;
    s.prices = p.prices;
    s.service = p.service;
    s.c_W = p.c_W;
    s.c_T = p.c_T;
    s.penalty = p.penalty;
    const std::vector<double> shape = p.shape.empty() ? std::vector<double>(p.T, 1.0) : normalize_shape(p.shape);
    if (int(shape.size()) != p.T) throw ConfigError("arrival shape length must equal T", {"shape"});
    s.lambda = build_arrival_table(shape, p.u_avg_max, p.n, s.mean_service(), s.prices);
    s.validate();
    return s;
}

} // namespace qdp::qplex
