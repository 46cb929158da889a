#pragma once

#include "epi/interaction.hpp"
#include "epi/screen_clean.hpp"
#include "epi/simulation.hpp"
#include "epi/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace epi {

// ---------------------------------------------------------------------------
// Study settings
// ---------------------------------------------------------------------------
// 1: genes 1 and 2 carry both main and interaction effects.
// 2: genes 1 and 2 carry main effects; genes 3 and 4 carry one interaction.
// 3: one interaction between genes 1 and 2, nothing else.
// 4: main effects only, genes 1 and 2 (OME).
// 5: no effects (NE).
enum class StudySetting { S1 = 1, S2 = 2, S3 = 3, OME = 4, NE = 5 };

StudySetting parse_setting(int number);
int setting_number(StudySetting s);

// Letter code: (1, Wang)=A, (1, PCA)=B, (2, Wang)=C, (2, PCA)=D,
// (3, Wang)=E, (3, PCA)=F, 4=OME, 5=NE.
std::string setting_name(StudySetting s, PhenotypeModel m);

// Effects for one setting at the simplified-study scale. Causal SNPs are the
// first two columns of each causal gene; genes are addressed by position.
EffectConfig setting_effects(StudySetting s, PhenotypeModel m, double r2,
                             double beta = 2.0, double gamma = 2.0);

// The causal interaction pair's group id ("gene1:gene2" style), empty when
// the setting has no interaction.
std::string causal_pair_id(StudySetting s);

// ---------------------------------------------------------------------------
// Study configuration
// ---------------------------------------------------------------------------
struct StudyConfig {
    bool realistic = false;  // resample corpus genes instead of simulating

    // Dataset shape (simplified study defaults).
    int n = 600;
    int genes = 6;
    int snps_per_gene = 6;
    double rho = 0.8;
    double maf_low = 0.05;
    double maf_high = 0.5;
    double causal_maf = 0.2;
    double beta = 2.0;
    double gamma = 2.0;

    std::vector<StudySetting> settings = {StudySetting::S1, StudySetting::S2,
                                          StudySetting::S3, StudySetting::OME,
                                          StudySetting::NE};
    std::vector<PhenotypeModel> models = {PhenotypeModel::WangPathway,
                                          PhenotypeModel::PcaModel};
    std::vector<InteractionMethod> methods = {InteractionMethod::GGEE,
                                              InteractionMethod::PCA,
                                              InteractionMethod::PLS};
    std::vector<double> r2_grid = {0.1, 0.2, 0.4, 0.7};

    int iterations = 100;
    std::uint64_t seed = 0;
    int workers = 1;

    // Analysis knobs forwarded to detect().
    int q = 1;
    int cv_folds = 10;
    int cv_grid_size = 100;
    int permutations = 999;
    double alpha = 0.05;

    void validate() const;
};

// ---------------------------------------------------------------------------
// Replicate-level and aggregated results
// ---------------------------------------------------------------------------
struct ReplicateResult {
    std::string setting;       // letter code (A..F, OME, NE)
    std::string model;         // phenotype model name
    std::string method;
    double r2 = 0.0;
    int replicate = 0;
    bool failed = false;
    std::string error;
    bool causal_pair_found = false;  // causal pair significant after BH
    double realized_r2 = 0.0;
    double p_I = 0.0, p_M = 0.0;
    bool r2_defined = false;         // false for NE
    std::vector<std::string> significant_groups;
};

std::string replicate_to_json(const ReplicateResult& r);
ReplicateResult replicate_from_json(const std::string& text);

// One row per (setting, model, method, r2). power = detected / iterations
// over non-failed replicates of the causal interaction pair; for settings
// without an interaction it is the false-detection frequency of the
// main-effect gene pair (OME) or of any pair (NE).
struct PowerCell {
    std::string setting;
    std::string model;
    std::string method;
    double r2 = 0.0;
    int iterations = 0;  // non-failed replicate count
    int detected = 0;
    int failures = 0;
    double power = 0.0;  // detected / iterations, exactly
    double mean_p_I = 0.0;
    double mean_p_M = 0.0;
    double mean_realized_r2 = 0.0;

    std::string tracked_pair;  // the pair whose frequency `power` reports
};

struct PowerTable {
    std::vector<PowerCell> cells;
    const PowerCell* find(const std::string& setting, const std::string& method,
                          double r2) const;
};

// Per-variable significance frequencies at one (setting, model, r2):
// rows = variables (main genes then gene pairs, design order), columns =
// methods. Every cell is count/iterations in [0,1].
struct DiscoveryHeatmap {
    std::string setting;
    std::string model;
    double r2 = 0.0;
    std::vector<std::string> variables;
    std::vector<std::string> methods;
    Matrix freq;  // variables x methods
    int iterations = 0;
};

struct StudyResult {
    PowerTable table;
    std::vector<DiscoveryHeatmap> heatmaps;  // one per (setting, model, r2)
    std::vector<ReplicateResult> replicates;
    StudyConfig config;
    std::vector<std::string> warnings;
};

// Runs the grid: settings x models x r2 x iterations, analyzing each dataset
// once per method. Dataset seeds depend only on (setting, model, r2,
// replicate, cfg.seed) and never on the method, so methods compare on
// identical data. Replicates are distributed over cfg.workers threads;
// results are identical for any worker count. Per-replicate failures are
// recorded, not fatal; a warning flags any cell with > 10% failures.
StudyResult run_power_study(const StudyConfig& cfg);

// Aggregation from persisted replicate results (used by the report command;
// run_power_study uses it internally).
StudyResult aggregate_replicates(const StudyConfig& cfg,
                                 std::vector<ReplicateResult> replicates);

// Serializers. CSVs are the authoritative numeric record.
std::string power_table_csv(const PowerTable& t);
std::string heatmap_csv(const DiscoveryHeatmap& h);
// Mean p_I / p_M per (setting, r2) pooled over methods (the decomposition
// depends only on the data); the Table 2/3 analogue.
std::string variance_share_csv(const PowerTable& t);

}  // namespace epi
