#pragma once

#include "epi/group_lasso.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace epi {

// ---------------------------------------------------------------------------
// SplitPlan — balanced screen/clean row split
// ---------------------------------------------------------------------------
struct SplitPlan {
    std::vector<int> screen_rows;  // sorted ascending
    std::vector<int> clean_rows;   // sorted ascending
    std::uint64_t seed = 0;
};

// Uniformly random balanced split, deterministic given seed. Sizes differ by
// at most one (screen side gets the extra row for odd n). Requires n >= 4.
SplitPlan split(int n, std::uint64_t seed);

// ---------------------------------------------------------------------------
// InferenceReport
// ---------------------------------------------------------------------------
struct ReportEntry {
    std::string group_id;
    GroupKind kind = GroupKind::Main;
    double statistic = 0.0;       // RSS reduction on the clean half
    double p_value = 1.0;
    double fdr_adjusted_p = 1.0;
    bool significant = false;
    bool screened = false;        // survived the screening stage
};

struct InferenceReport {
    std::vector<ReportEntry> entries;  // one per group, design order
    double alpha = 0.05;
    int permutations = 0;
    SplitPlan plan;
    // Provenance
    std::string method;
    int q = 0;
    double lambda = 0.0;           // CV-selected at screening; 0 if unscreened
    std::uint64_t seed = 0;
    std::vector<std::string> warnings;

    const ReportEntry* find(const std::string& group_id) const;
};

// Screening stage: group lasso with CV-chosen lambda on the screen half.
// Returns the selected group ids (and the chosen lambda via out-param).
std::vector<std::string> screen(const GroupedDesign& d, const Vector& y,
                                const SplitPlan& plan, const CvOptions& cv,
                                double* lambda_out = nullptr);

// Cleaning stage on the clean half: group-structured ridge restricted to the
// selected groups (per-group penalty proportional to w_g^2, strength chosen
// by GCV). For each selected group g the statistic is the drop in residual
// sum of squares when g's columns join the model holding all other selected
// groups; its null distribution comes from jointly permuting the rows of g's
// columns. p = (1 + #{T_perm >= T}) / (permutations + 1), then
// Benjamini-Hochberg across the selected groups at level alpha.
// Groups not selected appear with p = 1.
InferenceReport clean(const GroupedDesign& d, const Vector& y, const SplitPlan& plan,
                      const std::vector<std::string>& selected, int permutations,
                      double alpha, std::uint64_t seed);

// ---------------------------------------------------------------------------
// detect — end-to-end: build design, split, screen, clean
// ---------------------------------------------------------------------------
struct DetectConfig {
    std::uint64_t seed = 0;
    int q = 1;
    int cv_folds = 10;
    int cv_grid_size = 100;
    int permutations = 999;
    double alpha = 0.05;
    bool raw_products = false;
    bool literal_interaction_weight = false;
};

InferenceReport detect(const GenotypeMatrix& g, const GeneIndex& idx, const Phenotype& y,
                       InteractionMethod method, const DetectConfig& cfg);

// Serialization: JSON (full provenance) and flat TSV (one row per group).
std::string report_to_json(const InferenceReport& r);
std::string report_to_tsv(const InferenceReport& r);

}  // namespace epi
