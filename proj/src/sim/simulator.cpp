#include "qdp/sim/simulator.hpp"

#include "qdp/csv.hpp"
#include "qdp/errors.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <numeric>
#include <thread>

namespace qdp::sim {

std::uint64_t mix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

SplitMix64::SplitMix64(std::uint64_t seed, std::uint64_t stream) : state_(mix64(mix64(seed) ^ mix64(~stream))) {}

std::uint64_t SplitMix64::next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

QueueSimulator::QueueSimulator(const qplex::PricingSpec& spec) : spec_(spec) {
    spec_.validate();
    if (!spec_.size.empty()) throw UnsupportedModelError("simulator needs the default size function");
    cap_max_ = spec_.max_count() + spec_.n;
    ring_ = spec_.labels() + 2;
    const int A = spec_.actions();
    arrival_cdf_.resize(std::size_t(spec_.T) * A);
    for (int t = 0; t < spec_.T; ++t)
        for (int a = 0; a < A; ++a) {
            auto& c = arrival_cdf_[std::size_t(t) * A + a];
            c.resize(cap_max_);
            double acc = 0.0;
            for (int y = 0; y < cap_max_; ++y) c[y] = acc += poisson_pmf(spec_.lambda[t][a], y);
        }
    duration_cdf_.resize(spec_.labels());
    double acc = 0.0;
    for (int l = 0; l < spec_.labels(); ++l) duration_cdf_[l] = acc += spec_.service[l];
    duration_cdf_.back() = 1.0;
}

QueueSimulator::State QueueSimulator::initial_state() const {
    State s;
    s.completions.assign(ring_, 0);
    return s;
}

int QueueSimulator::sample_admitted(int t, int a, int cap, SplitMix64& rng) const {
    const auto& c = arrival_cdf_[std::size_t(t) * spec_.actions() + a];
    const double u = rng.uniform();
    for (int y = 0; y < cap; ++y)
        if (u < c[y]) return y;
    return cap;
}

int QueueSimulator::sample_duration(SplitMix64& rng) const {
    const double u = rng.uniform();
    return int(std::upper_bound(duration_cdf_.begin(), duration_cdf_.end(), u) - duration_cdf_.begin()) + 1;
}

QueueSimulator::Step QueueSimulator::step(State& s, int a, SplitMix64& rng) const {
    Step out;
    const int n = spec_.n;
    out.waiting = -spec_.c_W * std::max(0, s.z - n);
    int& slot = s.completions[s.t % ring_];
    const int d = slot;
    slot = 0;
    s.busy -= d;
    const int cap = spec_.max_count() + d - s.z;
    const int m = sample_admitted(s.t, a, cap, rng);
    const int z2 = s.z - d + m;
    const int busy2 = std::min(z2, n);
    // label ℓ at time t+1 means the customer leaves during period t+ℓ
    for (int e = s.busy; e < busy2; ++e) ++s.completions[(s.t + sample_duration(rng)) % ring_];
    s.busy = busy2;
    s.z = z2;
    ++s.t;
    out.admitted = m;
    out.departed = d;
    out.revenue = spec_.prices[a] * m;
    return out;
}

ReplicationOutcome simulate_replication(const QueueSimulator& sim, const CountPolicy& policy, std::uint64_t seed,
                                        std::uint64_t rep) {
    const auto& spec = sim.spec();
    ReplicationOutcome out;
    out.violation.assign(spec.T, 0);
    SplitMix64 rng(seed, rep);
    QueueSimulator::State s = sim.initial_state();
    const int zhat = spec.zhat();
    for (int t = 0; t < spec.T; ++t) {
        const auto st = sim.step(s, policy.at(t, s.z), rng);
        out.revenue += st.revenue;
        out.waiting += st.waiting;
        out.admitted += st.admitted;
        out.departed += st.departed;
        out.violation[t] = s.z > zhat ? 1 : 0;
    }
    out.final_count = s.z;
    out.terminal = -spec.c_T * s.z;
    return out;
}

namespace {

constexpr long block_size = 1024;

struct Partial {
    double sum = 0.0, sumsq = 0.0, revenue = 0.0, waiting = 0.0, terminal = 0.0;
    std::vector<long> violations;
    long count = 0;

    void merge(const Partial& o) {
        sum += o.sum;
        sumsq += o.sumsq;
        revenue += o.revenue;
        waiting += o.waiting;
        terminal += o.terminal;
        count += o.count;
        if (violations.empty()) violations = o.violations;
        else
            for (std::size_t i = 0; i < violations.size(); ++i) violations[i] += o.violations[i];
    }
};

Partial pairwise(std::vector<Partial>& parts, std::size_t lo, std::size_t hi) {
    if (hi - lo == 1) return parts[lo];
    const std::size_t mid = lo + (hi - lo) / 2;
    Partial left = pairwise(parts, lo, mid);
    left.merge(pairwise(parts, mid, hi));
    return left;
}

int resolve_threads(int threads) {
    if (threads > 0) return threads;
    return std::max(1u, std::thread::hardware_concurrency());
}

void check_policy(const qplex::PricingSpec& spec, const CountPolicy& p) {
    if (p.horizon != spec.T || p.counters != spec.counters()) throw DomainError("count policy does not match the instance");
    for (int a : p.action)
        if (a < 0 || a >= spec.actions()) throw DomainError("count policy action out of range");
}

} // namespace

SimResult simulate_policy(const QueueSimulator& sim, const CountPolicy& policy, long reps, std::uint64_t seed,
                          int threads) {
    if (reps < 1) throw DomainError("need at least one replication");
    const auto& spec = sim.spec();
    check_policy(spec, policy);
    const long blocks = (reps + block_size - 1) / block_size;
    std::vector<Partial> parts(blocks);
    std::atomic<long> next{0};
    auto worker = [&] {
        for (long b; (b = next.fetch_add(1)) < blocks;) {
            Partial& p = parts[b];
            p.violations.assign(spec.T, 0);
            const long end = std::min(reps, (b + 1) * block_size);
            for (long r = b * block_size; r < end; ++r) {
                const ReplicationOutcome o = simulate_replication(sim, policy, seed, std::uint64_t(r));
                const double v = o.total();
                p.sum += v;
                p.sumsq += v * v;
                p.revenue += o.revenue;
                p.waiting += o.waiting;
                p.terminal += o.terminal;
                ++p.count;
                for (int t = 0; t < spec.T; ++t) p.violations[t] += o.violation[t];
            }
        }
    };
    const int nt = int(std::min<long>(resolve_threads(threads), blocks));
    if (nt <= 1) worker();
    else {
        std::vector<std::thread> pool;
        for (int i = 0; i < nt; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    const Partial tot = pairwise(parts, 0, parts.size());
    SimResult out;
    const double n = double(reps);
    out.reps = reps;
    out.mean = tot.sum / n;
    out.revenue = tot.revenue / n;
    out.waiting = tot.waiting / n;
    out.terminal = tot.terminal / n;
    const double var = reps > 1 ? std::max(0.0, (tot.sumsq - n * out.mean * out.mean) / (n - 1.0)) : 0.0;
    out.std_error = std::sqrt(var / n);
    out.ci_halfwidth = 3.0 * out.std_error;
    out.p_hat.resize(spec.T);
    out.p_se.resize(spec.T);
    for (int t = 0; t < spec.T; ++t) {
        const double p = double(tot.violations[t]) / n;
        out.p_hat[t] = p;
        out.p_se[t] = std::sqrt(p * (1.0 - p) / n);
    }
    return out;
}

SimResult simulate_policy(const qplex::PricingSpec& spec, const CountPolicy& policy, long reps, std::uint64_t seed,
                          int threads) {
    return simulate_policy(QueueSimulator(spec), policy, reps, seed, threads);
}

ViolationSeries estimate_violations(const qplex::PricingSpec& spec, const CountPolicy& policy, long reps,
                                    std::uint64_t seed, int threads) {
    const SimResult r = simulate_policy(spec, policy, reps, seed, threads);
    return {r.p_hat, r.p_se};
}

CountPolicy block_policy(const qplex::PricingSpec& spec, const std::vector<std::pair<int, int>>& blocks,
                         const std::vector<int>& actions) {
    if (blocks.size() != actions.size()) throw DomainError("one action per block is required");
    std::vector<int> owner(spec.counters(), -1);
    for (std::size_t k = 0; k < blocks.size(); ++k)
        for (int z = blocks[k].first; z <= blocks[k].second; ++z) {
            if (z < 0 || z >= spec.counters() || owner[z] >= 0)
                throw ConfigError("counter blocks must partition 0..n+b", {"blocks"});
            owner[z] = int(k);
        }
    if (std::count(owner.begin(), owner.end(), -1) > 0) throw ConfigError("counter blocks must partition 0..n+b", {"blocks"});
    CountPolicy p(spec.T, spec.counters());
    for (int t = 0; t < spec.T; ++t)
        for (int z = 0; z < spec.counters(); ++z) p.at(t, z) = actions[owner[z]];
    return p;
}

ExhaustiveResult exhaustive_restricted(const qplex::PricingSpec& spec, const std::vector<std::pair<int, int>>& blocks,
                                       const std::vector<int>& price_subset, const ExhaustiveOptions& opt) {
    if (blocks.empty() || price_subset.empty()) throw DomainError("need at least one block and one price");
    for (int a : price_subset)
        if (a < 0 || a >= spec.actions()) throw DomainError("price index out of range");
    const double count = std::pow(double(price_subset.size()), double(blocks.size()));
    if (count > opt.guard) throw ResourceGuardError("restricted policy class", count, opt.guard);
    const QueueSimulator sim(spec);
    ExhaustiveResult out;
    std::vector<std::size_t> digit(blocks.size(), 0);
    auto candidate_seed = [&](const std::vector<int>& acts) {
        std::uint64_t h = mix64(opt.seed);
        for (int a : acts) h = mix64(h ^ std::bit_cast<std::uint64_t>(spec.prices[a]));
        return h;
    };
    for (long c = 0; c < long(count); ++c) {
        Candidate cand;
        for (std::size_t k = 0; k < blocks.size(); ++k) cand.actions.push_back(price_subset[digit[k]]);
        cand.result = simulate_policy(sim, block_policy(spec, blocks, cand.actions), opt.reps,
                                      candidate_seed(cand.actions), opt.threads);
        cand.feasible = std::all_of(cand.result.p_hat.begin(), cand.result.p_hat.end(),
                                    [&](double p) { return p <= spec.penalty.alpha; });
        out.candidates.push_back(std::move(cand));
        for (std::size_t k = blocks.size(); k-- > 0;) {
            if (++digit[k] < price_subset.size()) break;
            digit[k] = 0;
        }
    }
    for (std::size_t i = 0; i < out.candidates.size(); ++i)
        if (out.candidates[i].feasible) out.ranking.push_back(int(i));
    // ties broken by enumeration order
    std::stable_sort(out.ranking.begin(), out.ranking.end(), [&](int a, int b) {
        return out.candidates[a].result.mean > out.candidates[b].result.mean;
    });
    if (opt.rerun_reps > 0) {
        const int k = std::min<int>(opt.top_k, int(out.ranking.size()));
        for (int r = 0; r < k; ++r) {
            Candidate& c = out.candidates[out.ranking[r]];
            c.rerun = simulate_policy(sim, block_policy(spec, blocks, c.actions), opt.rerun_reps,
                                      mix64(candidate_seed(c.actions) + 1), opt.threads);
            out.rerun_ranking.push_back(out.ranking[r]);
        }
        std::stable_sort(out.rerun_ranking.begin(), out.rerun_ranking.end(), [&](int a, int b) {
            return out.candidates[a].rerun.mean > out.candidates[b].rerun.mean;
        });
    }
    return out;
}

std::string sim_summary_csv(const std::vector<std::pair<std::string, SimResult>>& rows) {
    CsvTable tab;
    tab.header = {"policy", "reps", "mean", "revenue", "waiting", "terminal", "std_error", "ci_halfwidth", "max_p_hat"};
    for (const auto& [name, r] : rows) {
        const double mx = r.p_hat.empty() ? 0.0 : *std::max_element(r.p_hat.begin(), r.p_hat.end());
        tab.add_row({name, std::to_string(r.reps), fmt_double(r.mean), fmt_double(r.revenue), fmt_double(r.waiting),
                     fmt_double(r.terminal), fmt_double(r.std_error), fmt_double(r.ci_halfwidth), fmt_double(mx)});
    }
    return to_csv(tab);
}

std::string violation_csv(const SimResult& r) {
    CsvTable tab;
    tab.header = {"t", "p_hat", "se"};
    for (std::size_t i = 0; i < r.p_hat.size(); ++i)
        tab.add_row({std::to_string(i + 1), fmt_double(r.p_hat[i]), fmt_double(r.p_se[i])});
    return to_csv(tab);
}

std::string exhaustive_csv(const qplex::PricingSpec& spec, const ExhaustiveResult& r) {
    CsvTable tab;
    tab.header = {"rank", "prices", "mean", "ci_halfwidth", "max_p_hat", "feasible", "rerun_mean", "rerun_ci_halfwidth"};
    std::vector<int> rank_of(r.candidates.size(), 0);
    for (std::size_t k = 0; k < r.ranking.size(); ++k) rank_of[r.ranking[k]] = int(k) + 1;
    for (std::size_t i = 0; i < r.candidates.size(); ++i) {
        const Candidate& c = r.candidates[i];
        std::string prices;
        for (std::size_t k = 0; k < c.actions.size(); ++k) prices += (k ? " " : "") + fmt_double(spec.prices[c.actions[k]]);
        const double mx = *std::max_element(c.result.p_hat.begin(), c.result.p_hat.end());
        const bool rerun = c.rerun.reps > 0;
        tab.add_row({rank_of[i] ? std::to_string(rank_of[i]) : "", prices, fmt_double(c.result.mean),
                     fmt_double(c.result.ci_halfwidth), fmt_double(mx), c.feasible ? "1" : "0",
                     rerun ? fmt_double(c.rerun.mean) : "", rerun ? fmt_double(c.rerun.ci_halfwidth) : ""});
    }
    return to_csv(tab);
}

} // namespace qdp::sim
