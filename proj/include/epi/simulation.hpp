#pragma once

#include "epi/types.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace epi {

// ---------------------------------------------------------------------------
// Genotype simulation under Hardy-Weinberg equilibrium
// ---------------------------------------------------------------------------
struct GenotypeSimConfig {
    int n = 600;
    int genes = 6;
    int snps_per_gene = 6;
    double rho = 0.8;            // within-gene latent correlation
    double maf_low = 0.05;
    double maf_high = 0.5;
    double causal_maf = 0.2;     // assigned to every column in causal_columns
    std::uint64_t seed = 0;
    std::vector<int> causal_columns;

    int p() const { return genes * snps_per_gene; }
    void validate() const;
};

// Latent Gaussian rows with block-diagonal equicorrelation (one block per
// gene), sampled by mixing a shared per-gene factor into independent noise.
// Exposed so tests can check the latent correlation level directly.
Matrix simulate_latent(const GenotypeSimConfig& cfg);

// MAF per column: uniform on [maf_low, maf_high], causal columns pinned to
// causal_maf. Deterministic given cfg.seed (independent of the latent draw).
std::vector<double> assign_mafs(const GenotypeSimConfig& cfg);

// Standard-normal thresholds (t1, t2) giving Hardy-Weinberg category
// probabilities (p^2, 2p(1-p), (1-p)^2) for codes (1, 2, 3):
// t1 = Phi^-1(p^2), t2 = Phi^-1(p^2 + 2p(1-p)).
std::pair<double, double> hw_thresholds(double maf);

// Codes: 1 if latent < t1, 3 if latent >= t2, else 2.
GenotypeMatrix discretize_latent(const Matrix& latent, const std::vector<double>& mafs);

std::pair<GenotypeMatrix, GeneIndex> simulate_genotypes(const GenotypeSimConfig& cfg);

// ---------------------------------------------------------------------------
// Phenotype models
// ---------------------------------------------------------------------------
enum class PhenotypeModel { WangPathway, PcaModel };

const char* phenotype_model_name(PhenotypeModel m);

struct MainEffect {
    int gene = 0;                  // gene position in the index
    std::vector<int> causal_snps;  // within-gene column offsets
    double beta = 2.0;
};

struct InteractionEffect {
    int gene_r = 0, gene_s = 0;
    std::vector<int> snps_r, snps_s;  // causal SNPs on each side
    double gamma = 2.0;
};

struct EffectConfig {
    std::vector<MainEffect> mains;
    std::vector<InteractionEffect> interactions;
    PhenotypeModel model = PhenotypeModel::WangPathway;
    double r2_target = 0.5;

    bool empty() const { return mains.empty() && interactions.empty(); }
    void validate(const GeneIndex& idx) const;
};

// Noiseless signal Q*phi.
//   WangPathway: each main term is beta_g * standardized(sum of the gene's
//   causal SNP columns); each interaction term is gamma_rs *
//   standardized(sum over causal (j,k) of X_j^r .* X_k^s).
//   PcaModel: same main terms; the interaction term is gamma_rs *
//   standardized(first-PC score of gene r .* first-PC score of gene s).
// The intercept is 0. Raw {1,2,3} codes feed the sums; each composite column
// is standardized after summation, then scaled by its coefficient.
Vector build_signal(const GenotypeMatrix& g, const GeneIndex& idx, const EffectConfig& effects);

// Noise variance hitting a target R^2:
//   sigma^2 = (R^2 - 1) * sum_i (q_i - mean(q))^2 / (R^2 * (2 - n))
double sigma2_from_r2(const Vector& q_phi, double r2);

// Realized R^2 of one draw: signal SS over total SS (paper definition).
double realized_r2(const Vector& q_phi, const Vector& y);

// ---------------------------------------------------------------------------
// SimulatedDataset
// ---------------------------------------------------------------------------
struct SimulatedDataset {
    GenotypeMatrix genotypes;
    GeneIndex index;
    Phenotype y;
    EffectConfig truth;
    double sigma2 = 0.0;
    Vector q_phi;
};

// Full draw: genotypes, signal, noise calibrated to truth.r2_target.
// A configuration with no effects (the NE setting) has no signal to scale,
// so sigma^2 = 1 and y is pure noise.
SimulatedDataset simulate_dataset(const GenotypeSimConfig& cfg, const EffectConfig& effects);

// Builds y on top of existing genotypes (used by the realistic study, where
// genotypes are resampled rather than simulated). Noise seed is taken from
// `seed`.
SimulatedDataset attach_phenotype(const GenotypeMatrix& g, const GeneIndex& idx,
                                  const EffectConfig& effects, std::uint64_t seed);

// ---------------------------------------------------------------------------
// R^2 decomposition
// ---------------------------------------------------------------------------
struct PartialR2 {
    double p_I = 0.0;  // R2(interaction-only) / R2(both)
    double p_M = 0.0;  // R2(main-only) / R2(both)
    bool defined = false;  // false for the no-effects setting
};

PartialR2 partial_r2(const Phenotype& y, const GenotypeMatrix& g, const GeneIndex& idx,
                     const EffectConfig& truth);

// ---------------------------------------------------------------------------
// Gene resampling and the bundled stand-in corpus
// ---------------------------------------------------------------------------
// Uniformly samples `genes` distinct genes (all subjects, all their SNP
// columns, relabeled in sampled order). Throws when fewer genes exist.
std::pair<GenotypeMatrix, GeneIndex> resample_real_genotypes(const GenotypeMatrix& g,
                                                             const GeneIndex& idx,
                                                             int genes, std::uint64_t seed);

// Deterministic synthetic stand-in for a real genotype panel: 763 subjects,
// 30 genes with sizes from 1 to 60 (median 2), within-gene correlation 0.8,
// MAFs uniform on [0.05, 0.5].
std::pair<GenotypeMatrix, GeneIndex> make_standin_corpus(std::uint64_t seed = 20170213);

// Truth manifest JSON (causal genes/pairs, coefficients, sigma^2, target R^2).
std::string truth_manifest_json(const SimulatedDataset& ds, std::uint64_t seed);

}  // namespace epi
