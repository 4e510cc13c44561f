#include "qdp/count_policy.hpp"

#include "qdp/csv.hpp"
#include "qdp/errors.hpp"

namespace qdp {

CountPolicy CountPolicy::from_policy(const PartitionedPolicy& policy) {
    CountPolicy out(policy.horizon(), policy.expert_count());
    for (int t = 0; t < policy.horizon(); ++t)
        for (int z = 0; z < policy.expert_count(); ++z) {
            const auto lr = policy.log_row(t, z);
            int best = 0;
            for (int a = 1; a < policy.action_count(); ++a)
                if (lr[a] > lr[best]) best = a;
            out.at(t, z) = best;
        }
    return out;
}

PartitionedPolicy CountPolicy::to_policy(std::vector<int> assignment, int action_count) const {
    PartitionedPolicy p(horizon, std::move(assignment), counters, action_count);
    for (int t = 0; t < horizon; ++t)
        for (int z = 0; z < counters; ++z) {
            if (at(t, z) < 0 || at(t, z) >= action_count) throw DomainError("count policy action out of range");
            p.set_point_mass(t, z, at(t, z));
        }
    return p;
}

std::string count_policy_csv(const CountPolicy& p) {
    CsvTable tab;
    tab.header.push_back("t");
    for (int z = 0; z < p.counters; ++z) tab.header.push_back("z" + std::to_string(z));
    for (int t = 0; t < p.horizon; ++t) {
        std::vector<std::string> row{std::to_string(t)};
        for (int z = 0; z < p.counters; ++z) row.push_back(std::to_string(p.at(t, z)));
        tab.add_row(std::move(row));
    }
    return to_csv(tab);
}

CountPolicy count_policy_from_csv(const std::string& text) {
    const CsvTable tab = parse_csv(text);
    if (tab.header.empty() || tab.header[0] != "t") throw ConfigError("count policy CSV must start with column t");
    CountPolicy p(int(tab.rows.size()), int(tab.header.size()) - 1);
    for (std::size_t t = 0; t < tab.rows.size(); ++t)
        for (int z = 0; z < p.counters; ++z) {
            try {
                p.at(int(t), z) = std::stoi(tab.rows[t][z + 1]);
            } catch (const std::exception&) {
                throw ConfigError("count policy CSV entry is not an integer", {tab.header[z + 1]});
            }
        }
    return p;
}

} // namespace qdp
