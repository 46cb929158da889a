#pragma once

#include "epi/interaction.hpp"
#include "epi/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace epi {

enum class GroupKind { Main, Interaction };

const char* group_kind_name(GroupKind k);

// ---------------------------------------------------------------------------
// GroupedDesign — standardized [X | Z] with group descriptors
// ---------------------------------------------------------------------------
struct Group {
    std::string id;
    GroupKind kind = GroupKind::Main;
    int offset = 0;  // first column
    int size = 0;    // number of columns
    double weight = 1.0;
};

struct GroupedDesign {
    Matrix design;  // n x k, every column mean 0 / sd 1
    std::vector<Group> groups;
    std::vector<std::string> column_ids;

    int n() const { return static_cast<int>(design.rows()); }
    int k() const { return static_cast<int>(design.cols()); }
    const Group* find_group(const std::string& id) const;

    // Group column sets must partition [0, k).
    void validate() const;
};

// Assembles main-effect gene groups (weight sqrt(p_g)) followed by
// interaction groups in block order. Interaction group weight is
// sqrt(column count) by default; `literal_interaction_weight` switches to
// sqrt(p_r * p_s) regardless of the constructed column count.
// Degenerate blocks and constant columns are skipped and noted.
GroupedDesign assemble_grouped_design(const GenotypeMatrix& g, const GeneIndex& idx,
                                      const InteractionDesign& inter,
                                      bool literal_interaction_weight = false,
                                      std::vector<std::string>* notes = nullptr);

// ---------------------------------------------------------------------------
// FitResult
// ---------------------------------------------------------------------------
struct CvPoint {
    double lambda = 0.0;
    double mean_error = 0.0;
    double se = 0.0;
};

struct FitResult {
    Vector coefficients;  // standardized scale, beta and gamma concatenated
    double intercept = 0.0;
    double lambda = 0.0;
    std::vector<std::string> selected_groups;  // groups with ||coef_g|| > 1e-8
    std::vector<CvPoint> cv_path;              // empty for plain fit()
    int sweeps = 0;
};

// Smallest penalty at which every group is zero:
//   max_g ||D_g' y_centered||_2 / (n * w_g)
double lambda_max(const GroupedDesign& d, const Vector& y);

// Minimizes
//   (1/2n) ||y_c - D theta||^2 + lambda * sum_g w_g ||theta_g||_2
// by block coordinate descent with the group soft-thresholding update.
// Convergence is certified by the KKT conditions (stationarity within 5e-7,
// inside the 1e-6 contract checked by check_kkt below). Designs with a group
// collinear to another's span (a PLS component next to its gene's main
// block) can stall plain block descent; those fits finish on an accelerated
// proximal-gradient fallback under the same certificate. Throws
// ConvergenceError (with duality-gap diagnostic) if both budgets run out.
// The intercept is mean(y); y is centered internally.
FitResult fit(const GroupedDesign& d, const Vector& y, double lambda);

// Same solver with an optional warm start and per-sweep objective trace.
FitResult fit_ext(const GroupedDesign& d, const Vector& y, double lambda,
                  const Vector* warm_start, std::vector<double>* objective_trace);

struct CvOptions {
    int folds = 10;
    int grid_size = 100;
    std::uint64_t seed = 0;
};

// Log-spaced grid of grid_size lambdas from lambda_max down to
// 0.01*lambda_max; selects the minimizer of mean held-out squared error
// (ties go to the larger lambda) and refits on all rows. Fold assignment is
// a deterministic function of the seed.
FitResult cv_select_lambda(const GroupedDesign& d, const Vector& y, const CvOptions& opts);

// KKT check for a returned fit: for every unselected group
// ||D_g' r||/n <= lambda*w_g + tol, and equality within tol for selected
// groups. Returns false with a reason when violated.
bool check_kkt(const GroupedDesign& d, const Vector& y, const FitResult& f,
               double tol = 1e-6, std::string* why = nullptr);

// Objective value at given coefficients (used by diagnostics and tests).
double group_lasso_objective(const GroupedDesign& d, const Vector& y_centered,
                             const Vector& theta, double lambda);

// JSON export: coefficients keyed by group and column id, lambda, cv_path.
std::string fit_result_to_json(const FitResult& f, const GroupedDesign& d);

}  // namespace epi
