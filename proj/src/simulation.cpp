#include "epi/simulation.hpp"

#include "epi/interaction.hpp"
#include "epi/rng.hpp"
#include "epi/standardize.hpp"
#include "epi/stats.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

namespace epi {

void GenotypeSimConfig::validate() const {
    if (n < 2) throw DataError("simulation needs at least 2 subjects");
    if (genes < 1 || snps_per_gene < 1) throw DataError("simulation needs genes and SNPs");
    if (!(rho >= 0.0 && rho < 1.0)) throw DataError("rho must be in [0, 1)");
    if (!(maf_low > 0.0 && maf_low <= maf_high && maf_high <= 0.5))
        throw DataError("maf range must satisfy 0 < low <= high <= 0.5");
    if (!(causal_maf > 0.0 && causal_maf <= 0.5))
        throw DataError("causal maf must be in (0, 0.5]");
    for (int c : causal_columns)
        if (c < 0 || c >= p()) throw DataError("causal column out of range");
}

Matrix simulate_latent(const GenotypeSimConfig& cfg) {
    cfg.validate();
    rng::Rng r(rng::derive_seed(cfg.seed, {rng::tag("latent")}));
    Matrix x(cfg.n, cfg.p());
    // Equicorrelated block: sqrt(rho) * shared + sqrt(1-rho) * own, which has
    // unit variance and pairwise correlation exactly rho within the gene.
    const double a = std::sqrt(cfg.rho), b = std::sqrt(1.0 - cfg.rho);
    for (int i = 0; i < cfg.n; ++i) {
        for (int g = 0; g < cfg.genes; ++g) {
            double shared = r.normal();
            for (int j = 0; j < cfg.snps_per_gene; ++j)
                x(i, g * cfg.snps_per_gene + j) = a * shared + b * r.normal();
        }
    }
    return x;
}

std::vector<double> assign_mafs(const GenotypeSimConfig& cfg) {
    cfg.validate();
    rng::Rng r(rng::derive_seed(cfg.seed, {rng::tag("maf")}));
    std::vector<double> mafs(static_cast<size_t>(cfg.p()));
    for (int j = 0; j < cfg.p(); ++j) mafs[static_cast<size_t>(j)] = r.uniform(cfg.maf_low, cfg.maf_high);
    for (int c : cfg.causal_columns) mafs[static_cast<size_t>(c)] = cfg.causal_maf;
    return mafs;
}

std::pair<double, double> hw_thresholds(double maf) {
    if (!(maf > 0.0 && maf < 1.0)) throw DataError("maf must be in (0, 1)");
    double p_minor = maf * maf;
    double p_het = 2.0 * maf * (1.0 - maf);
    return {normal_quantile(p_minor), normal_quantile(p_minor + p_het)};
}

GenotypeMatrix discretize_latent(const Matrix& latent, const std::vector<double>& mafs) {
    if (static_cast<int>(mafs.size()) != latent.cols())
        throw DataError("one MAF per latent column required");
    GenotypeMatrix g;
    g.values.resize(latent.rows(), latent.cols());
    for (int j = 0; j < latent.cols(); ++j) {
        auto [t1, t2] = hw_thresholds(mafs[static_cast<size_t>(j)]);
        for (int i = 0; i < latent.rows(); ++i) {
            double x = latent(i, j);
            g.values(i, j) = x < t1 ? 1.0 : (x < t2 ? 2.0 : 3.0);
        }
    }
    return g;
}

std::pair<GenotypeMatrix, GeneIndex> simulate_genotypes(const GenotypeSimConfig& cfg) {
    Matrix latent = simulate_latent(cfg);
    std::vector<double> mafs = assign_mafs(cfg);
    GenotypeMatrix g = discretize_latent(latent, mafs);
    GeneIndex idx;
    for (int a = 0; a < cfg.genes; ++a)
        idx.genes.push_back({"gene" + std::to_string(a + 1), a * cfg.snps_per_gene,
                             cfg.snps_per_gene});
    return {std::move(g), std::move(idx)};
}

const char* phenotype_model_name(PhenotypeModel m) {
    return m == PhenotypeModel::WangPathway ? "wang" : "pca";
}

void EffectConfig::validate(const GeneIndex& idx) const {
    if (!(r2_target > 0.0 && r2_target < 1.0) && !empty())
        throw DataError("r2 target must be in (0, 1)");
    for (const auto& m : mains) {
        if (m.gene < 0 || m.gene >= idx.gene_count())
            throw DataError("main effect references a missing gene");
        if (m.causal_snps.empty())
            throw DataError("main effect on gene " + idx.at(m.gene).id + " has no causal SNPs");
        for (int s : m.causal_snps)
            if (s < 0 || s >= idx.at(m.gene).size)
                throw DataError("causal SNP index out of range in gene " + idx.at(m.gene).id);
    }
    for (const auto& e : interactions) {
        if (e.gene_r < 0 || e.gene_r >= idx.gene_count() || e.gene_s < 0 ||
            e.gene_s >= idx.gene_count() || e.gene_r == e.gene_s)
            throw DataError("interaction references invalid genes");
        if (e.snps_r.empty() || e.snps_s.empty())
            throw DataError("interaction between " + idx.at(e.gene_r).id + " and " +
                            idx.at(e.gene_s).id + " has an empty causal set");
        for (int s : e.snps_r)
            if (s < 0 || s >= idx.at(e.gene_r).size)
                throw DataError("causal SNP index out of range in gene " + idx.at(e.gene_r).id);
        for (int s : e.snps_s)
            if (s < 0 || s >= idx.at(e.gene_s).size)
                throw DataError("causal SNP index out of range in gene " + idx.at(e.gene_s).id);
    }
}

namespace {

// Standardized composite column, or zero when the composite is constant.
Vector standardized_or_zero(const Vector& raw) { return standardize_vector(raw); }

Vector main_term_column(const GenotypeMatrix& g, const GeneIndex& idx, const MainEffect& m) {
    const GeneRange& r = idx.at(m.gene);
    Vector sum = Vector::Zero(g.n());
    for (int s : m.causal_snps) sum += g.values.col(r.offset + s);
    return standardized_or_zero(sum);
}

Vector wang_interaction_column(const GenotypeMatrix& g, const GeneIndex& idx,
                               const InteractionEffect& e) {
    const GeneRange& rr = idx.at(e.gene_r);
    const GeneRange& rs = idx.at(e.gene_s);
    Vector sum = Vector::Zero(g.n());
    for (int j : e.snps_r)
        for (int k : e.snps_s)
            sum += g.values.col(rr.offset + j).cwiseProduct(g.values.col(rs.offset + k));
    return standardized_or_zero(sum);
}

Vector pca_interaction_column(const GenotypeMatrix& g, const GeneIndex& idx,
                              const InteractionEffect& e) {
    const GeneRange& rr = idx.at(e.gene_r);
    const GeneRange& rs = idx.at(e.gene_s);
    PcaBasis br = pca_basis(g.values.middleCols(rr.offset, rr.size), 1);
    PcaBasis bs = pca_basis(g.values.middleCols(rs.offset, rs.size), 1);
    if (br.q() == 0 || bs.q() == 0)
        throw DataError("first principal component unavailable for an interaction gene");
    return standardized_or_zero(br.scores.col(0).cwiseProduct(bs.scores.col(0)));
}

// True-model regressors, used both for signal construction and the R^2
// decomposition.
void true_regressors(const GenotypeMatrix& g, const GeneIndex& idx, const EffectConfig& truth,
                     Matrix* mains, Matrix* inters, Vector* main_coefs, Vector* inter_coefs) {
    Matrix m(g.n(), static_cast<int>(truth.mains.size()));
    Vector mc(static_cast<int>(truth.mains.size()));
    for (size_t i = 0; i < truth.mains.size(); ++i) {
        m.col(static_cast<int>(i)) = main_term_column(g, idx, truth.mains[i]);
        mc[static_cast<int>(i)] = truth.mains[i].beta;
    }
    Matrix z(g.n(), static_cast<int>(truth.interactions.size()));
    Vector zc(static_cast<int>(truth.interactions.size()));
    for (size_t i = 0; i < truth.interactions.size(); ++i) {
        const InteractionEffect& e = truth.interactions[i];
        z.col(static_cast<int>(i)) = truth.model == PhenotypeModel::WangPathway
                                         ? wang_interaction_column(g, idx, e)
                                         : pca_interaction_column(g, idx, e);
        zc[static_cast<int>(i)] = e.gamma;
    }
    if (mains) *mains = std::move(m);
    if (inters) *inters = std::move(z);
    if (main_coefs) *main_coefs = std::move(mc);
    if (inter_coefs) *inter_coefs = std::move(zc);
}

}  // namespace

Vector build_signal(const GenotypeMatrix& g, const GeneIndex& idx, const EffectConfig& effects) {
    effects.validate(idx);
    Matrix mains, inters;
    Vector mc, zc;
    true_regressors(g, idx, effects, &mains, &inters, &mc, &zc);
    Vector q = Vector::Zero(g.n());
    if (mains.cols() > 0) q += mains * mc;
    if (inters.cols() > 0) q += inters * zc;
    return q;
}

double sigma2_from_r2(const Vector& q_phi, double r2) {
    if (!(r2 > 0.0 && r2 < 1.0)) throw DataError("r2 must be in (0, 1)");
    const int n = static_cast<int>(q_phi.size());
    if (n <= 2) throw DataError("sigma2 formula needs n > 2");
    double s = (q_phi.array() - q_phi.mean()).square().sum();
    if (s <= 0.0) throw DataError("constant signal; R2 is undefined");
    return (r2 - 1.0) * s / (r2 * (2.0 - static_cast<double>(n)));
}

double realized_r2(const Vector& q_phi, const Vector& y) {
    double signal = (q_phi.array() - q_phi.mean()).square().sum();
    double total = (y.array() - y.mean()).square().sum();
    return total > 0.0 ? signal / total : 0.0;
}

SimulatedDataset simulate_dataset(const GenotypeSimConfig& cfg, const EffectConfig& effects) {
    auto [g, idx] = simulate_genotypes(cfg);
    SimulatedDataset ds;
    ds.genotypes = std::move(g);
    ds.index = std::move(idx);
    ds.truth = effects;
    ds.q_phi = build_signal(ds.genotypes, ds.index, effects);

    // No declared effects (the NE setting): nothing to calibrate against, so
    // the noise is standard normal.
    ds.sigma2 = effects.empty() ? 1.0 : sigma2_from_r2(ds.q_phi, effects.r2_target);
    rng::Rng noise(rng::derive_seed(cfg.seed, {rng::tag("noise")}));
    double sd = std::sqrt(ds.sigma2);
    Vector y = ds.q_phi;
    for (int i = 0; i < ds.genotypes.n(); ++i) y[i] += sd * noise.normal();
    ds.y.y = std::move(y);
    return ds;
}

SimulatedDataset attach_phenotype(const GenotypeMatrix& g, const GeneIndex& idx,
                                  const EffectConfig& effects, std::uint64_t seed) {
    SimulatedDataset ds;
    ds.genotypes = g;
    ds.index = idx;
    ds.truth = effects;
    ds.q_phi = build_signal(ds.genotypes, ds.index, effects);
    ds.sigma2 = effects.empty() ? 1.0 : sigma2_from_r2(ds.q_phi, effects.r2_target);
    rng::Rng noise(rng::derive_seed(seed, {rng::tag("noise")}));
    double sd = std::sqrt(ds.sigma2);
    Vector y = ds.q_phi;
    for (int i = 0; i < ds.genotypes.n(); ++i) y[i] += sd * noise.normal();
    ds.y.y = std::move(y);
    return ds;
}

PartialR2 partial_r2(const Phenotype& y, const GenotypeMatrix& g, const GeneIndex& idx,
                     const EffectConfig& truth) {
    PartialR2 out;
    if (truth.empty()) return out;  // flagged undefined for the NE setting
    truth.validate(idx);
    Matrix mains, inters;
    true_regressors(g, idx, truth, &mains, &inters, nullptr, nullptr);
    Matrix both(g.n(), mains.cols() + inters.cols());
    if (mains.cols() > 0) both.leftCols(mains.cols()) = mains;
    if (inters.cols() > 0) both.rightCols(inters.cols()) = inters;
    double r2_total = ols_r2(y.y, both);
    if (r2_total <= 0.0) return out;
    out.p_I = ols_r2(y.y, inters) / r2_total;
    out.p_M = ols_r2(y.y, mains) / r2_total;
    out.defined = true;
    return out;
}

std::pair<GenotypeMatrix, GeneIndex> resample_real_genotypes(const GenotypeMatrix& g,
                                                             const GeneIndex& idx,
                                                             int genes, std::uint64_t seed) {
    idx.validate(g.p());
    if (genes < 1) throw DataError("resampling needs at least one gene");
    if (genes > idx.gene_count())
        throw DataError("cannot sample " + std::to_string(genes) + " genes from " +
                        std::to_string(idx.gene_count()));
    std::vector<int> order(static_cast<size_t>(idx.gene_count()));
    std::iota(order.begin(), order.end(), 0);
    rng::Rng r(rng::derive_seed(seed, {rng::tag("resample")}));
    // Partial Fisher-Yates: the first `genes` entries are a uniform sample
    // without replacement.
    for (int i = 0; i < genes; ++i) {
        int j = i + static_cast<int>(r.bounded(static_cast<std::uint64_t>(idx.gene_count() - i)));
        std::swap(order[static_cast<size_t>(i)], order[static_cast<size_t>(j)]);
    }
    GenotypeMatrix out;
    GeneIndex oidx;
    int cols = 0;
    for (int i = 0; i < genes; ++i) cols += idx.at(order[static_cast<size_t>(i)]).size;
    out.values.resize(g.n(), cols);
    int at = 0;
    for (int i = 0; i < genes; ++i) {
        const GeneRange& src = idx.at(order[static_cast<size_t>(i)]);
        out.values.middleCols(at, src.size) = g.values.middleCols(src.offset, src.size);
        oidx.genes.push_back({src.id, at, src.size});
        at += src.size;
    }
    return {std::move(out), std::move(oidx)};
}

std::pair<GenotypeMatrix, GeneIndex> make_standin_corpus(std::uint64_t seed) {
    // 30 genes, sizes 1..60 with median 2, echoing a real panel's long-tailed
    // size distribution at reduced scale. 763 subjects, 185 SNPs.
    static const std::vector<int> sizes = {1, 1, 1, 1, 1, 1, 1, 2, 2, 2,
                                           2, 2, 2, 2, 2, 2, 3, 3, 3, 4,
                                           4, 5, 6, 7, 8, 10, 12, 15, 20, 60};
    const int n = 763;
    int total = std::accumulate(sizes.begin(), sizes.end(), 0);
    Matrix values(n, total);
    GeneIndex idx;
    int at = 0;
    for (size_t gi = 0; gi < sizes.size(); ++gi) {
        GenotypeSimConfig gene_cfg;
        gene_cfg.n = n;
        gene_cfg.genes = 1;
        gene_cfg.snps_per_gene = sizes[gi];
        gene_cfg.rho = 0.8;
        gene_cfg.maf_low = 0.05;
        gene_cfg.maf_high = 0.5;
        gene_cfg.seed = rng::derive_seed(seed, {rng::tag("corpus"), static_cast<std::uint64_t>(gi)});
        values.middleCols(at, sizes[gi]) = simulate_genotypes(gene_cfg).first.values;
        idx.genes.push_back({"g" + std::to_string(gi + 1), at, sizes[gi]});
        at += sizes[gi];
    }
    GenotypeMatrix out;
    out.values = std::move(values);
    return {std::move(out), std::move(idx)};
}

std::string truth_manifest_json(const SimulatedDataset& ds, std::uint64_t seed) {
    nlohmann::json j;
    j["seed"] = seed;
    j["n"] = ds.genotypes.n();
    j["p"] = ds.genotypes.p();
    j["model"] = phenotype_model_name(ds.truth.model);
    j["r2_target"] = ds.truth.r2_target;
    j["sigma2"] = ds.sigma2;
    j["realized_r2"] = realized_r2(ds.q_phi, ds.y.y);
    nlohmann::json mains = nlohmann::json::array();
    for (const auto& m : ds.truth.mains)
        mains.push_back({{"gene", ds.index.at(m.gene).id},
                         {"causal_snps", m.causal_snps},
                         {"beta", m.beta}});
    j["main_effects"] = mains;
    nlohmann::json inters = nlohmann::json::array();
    for (const auto& e : ds.truth.interactions)
        inters.push_back({{"gene_r", ds.index.at(e.gene_r).id},
                          {"gene_s", ds.index.at(e.gene_s).id},
                          {"snps_r", e.snps_r},
                          {"snps_s", e.snps_s},
                          {"gamma", e.gamma}});
    j["interactions"] = inters;
    return j.dump(2);
}

}  // namespace epi
