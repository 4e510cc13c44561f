#include "qdp/core/model.hpp"

#include "qdp/errors.hpp"

namespace qdp::core {

SparsePartials NonlinearModel::kernel_mu_partials(int, const Pmf&, int, int) const {
    throw UnsupportedModelError("model does not provide kernel mu-partials");
}

Vector NonlinearModel::reward_mu_partials(int, const Pmf&, int, int) const {
    throw UnsupportedModelError("model does not provide reward mu-partials");
}

Vector NonlinearModel::terminal_mu_partials(const Pmf&, int) const {
    throw UnsupportedModelError("model does not provide terminal mu-partials");
}

double NonlinearModel::reward_constant(int, const Pmf&) const { return 0.0; }
double NonlinearModel::terminal_constant(const Pmf&) const { return 0.0; }

double NonlinearModel::kernel_mu_partial(int t, const Pmf& mu, int s, int a, int s_next, int s_partial) const {
    const SparsePartials p = kernel_mu_partials(t, mu, s, a);
    for (std::size_t j = 0; j < p.columns.size(); ++j)
        if (p.columns[j] == s_partial) return p.values(s_next, Eigen::Index(j));
    return 0.0;
}

} // namespace qdp::core
