#pragma once

#include "qdp/csv.hpp"
#include "qdp/harness/config.hpp"

#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace qdp::harness {

enum class Method { Qdp, BellmanFull, BellmanGeom, Extract, QLearn, Simulate };

std::string method_name(Method m);
Method method_from_name(const std::string& name);

/// Grid over top-level config keys. Cells enumerate the explicit variants (outermost)
/// times the product of factor levels, the last factor in key order varying fastest.
struct ExperimentDesign {
    nlohmann::json base;
    std::vector<nlohmann::json> variants; ///< override objects; empty means one empty override
    std::vector<std::pair<std::string, std::vector<nlohmann::json>>> factors;
    std::vector<Method> methods;
    double full_info_guard = 5e6;

    std::size_t cardinality() const;
    /// Resolved document of cell `i` (base with the factor levels substituted).
    nlohmann::json cell_json(std::size_t i) const;
    /// Factor levels of cell `i` as display strings.
    std::vector<std::string> cell_levels(std::size_t i) const;
};

/// {"schema_version", "base", "variants": [{...}], "factors": {key: [levels...]}, "methods": [...],
///  "full_info_guard"}.
ExperimentDesign parse_design(const nlohmann::json& j);
ExperimentDesign load_design(const std::string& path);

struct RunRecord {
    std::size_t cell = 0;
    std::string hash;
    Method method = Method::Qdp;
    std::string quantity; ///< what `value` measures, e.g. "optimum" or "qdp_policy"
    std::string status = "ok"; ///< ok, guard, unsupported, error
    std::string message;
    double value = 0.0;
    std::optional<double> revenue, waiting, penalty, terminal;
    std::optional<double> std_error;
    long episodes = 0;
    double wall_seconds = 0.0;
    std::uint64_t seed = 0;
};

/// Values of one cell in the columns used for gap histograms. Missing entries are NaN.
inline constexpr double nan = std::numeric_limits<double>::quiet_NaN();

struct CellSummary {
    std::size_t cell = 0;
    std::string hash;
    std::vector<std::string> levels;
    // "qdp" columns refer to the deployed pure policy (row modes of the trained one)
    double v_train_qplex = nan; ///< final objective of the randomized training iterate
    double v_qdp_qplex = nan;
    double v_qdp_exact = nan;   ///< under the full-information model
    double v_mdp_exact = nan;   ///< full-information optimum
    double v_extract_exact = nan;
    double v_geom_opt = nan;    ///< count-model optimum
    double v_qdp_geom = nan;    ///< under the count model
    double v_qdp_sim = nan;
    double v_qdp_sim_se = nan;
    double v_qlearn = nan;

    double gap_qplex() const;   ///< (qplex − exact)/|exact|
    double gap_mdp() const;     ///< (mdp − qdp exact)/|mdp|
    double gap_extract() const; ///< (extract − qdp exact)/|qdp exact|
    double gap_geom() const;    ///< (geom opt − qdp geom)/|geom opt|
    /// Full-information optimum dominates every count policy evaluated in the cell.
    bool dominance(double tol = 1e-9) const;
};

struct CellResult {
    std::vector<RunRecord> records;
    CellSummary summary;
};

struct DesignResult {
    std::vector<CellResult> cells;
};

CellResult run_cell(const RunConfig& config, const std::vector<Method>& methods, std::size_t cell_id,
                    double full_info_guard = 5e6, int threads = 1);

/// Runs the grid with up to `parallel` concurrent cells. When `out_dir` is non-empty,
/// each cell's records go to out_dir/cells/<id>.csv as it finishes, then the merged
/// records.csv and summary.csv are written in cell order.
DesignResult run_design(const ExperimentDesign& d, int parallel, const std::string& out_dir = "",
                        const std::function<void(const CellResult&)>& on_cell = {});

CsvTable records_table(const std::vector<RunRecord>& records);
CsvTable summary_table(const ExperimentDesign& d, const DesignResult& r);

/// Static SVG histogram of one numeric column; NaN entries are skipped.
std::string histogram_svg(const std::vector<double>& values, const std::string& title, int bins = 20);

} // namespace qdp::harness
