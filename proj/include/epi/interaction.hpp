#pragma once

#include "epi/standardize.hpp"
#include "epi/types.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace epi {

enum class InteractionMethod { GGEE, PCA, PLS };

const char* method_name(InteractionMethod m);
std::optional<InteractionMethod> parse_method(const std::string& s);

// ---------------------------------------------------------------------------
// PairProductMatrix — all pairwise SNP products for one gene pair
//
// Column (j,k) holds the elementwise product of gene-r column j and gene-s
// column k, j in [0,p_r), k in [0,p_s), laid out row-major: col = j*p_s + k.
// ---------------------------------------------------------------------------
struct PairProductMatrix {
    Matrix w;  // n x (p_r * p_s)
    std::string gene_r, gene_s;
    int p_r = 0, p_s = 0;

    int col(int j, int k) const { return j * p_s + k; }
};

// Core product loop shared by the double implementation and test doubles.
// Calls put(i, col, product) exactly once per (i, j, k) triple.
template <typename GetR, typename GetS, typename Put>
void pair_product_loop(int n, int p_r, int p_s, GetR xr, GetS xs, Put put) {
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < p_r; ++j)
            for (int k = 0; k < p_s; ++k)
                put(i, j * p_s + k, xr(i, j) * xs(i, k));
}

PairProductMatrix pair_product(const Matrix& xr, const Matrix& xs);

// ---------------------------------------------------------------------------
// InteractionBlock — constructed interaction variables for one gene pair
// ---------------------------------------------------------------------------
struct InteractionBlock {
    Matrix z;  // n x m: m = 1 (GGEE), q_r*q_s (PCA), q (PLS)
    InteractionMethod method = InteractionMethod::GGEE;
    std::string gene_r, gene_s;
    Vector u;            // GGEE weight vector, unit norm; empty otherwise
    int q = 0;           // component count per gene (PCA/PLS), 0 for GGEE
    bool degenerate = false;
    std::string note;    // degeneracy reason or clamp warning

    int m() const { return static_cast<int>(z.cols()); }
    std::string pair_id() const { return gene_r + ":" + gene_s; }
};

// ---------------------------------------------------------------------------
// PcaBasis — principal axes and scores of one standardized gene matrix
// ---------------------------------------------------------------------------
struct PcaBasis {
    Matrix components;          // p_g x q, orthonormal axes
    Matrix scores;              // n x q
    Vector explained_variance;  // length q, nonincreasing
    int requested_q = 0;
    std::vector<std::string> warnings;  // q clamp notices

    int q() const { return static_cast<int>(components.cols()); }
};

// Eigen-Epistasis component: u = W'y / ||W'y||, sign oriented so that
// cov(Wu, y) >= 0; z = W u. Requires centered y; throws DegeneratePairError
// when ||W'y|| = 0.
InteractionBlock ggee_component(const PairProductMatrix& w, const Vector& y_centered);

// Top min(q, rank) principal components of the centered, unit-variance gene
// matrix. Sign convention: largest-magnitude loading positive. q is clamped
// (never an error) with a recorded warning.
PcaBasis pca_basis(const Matrix& xg, int q);

// All q_r * q_s pairwise products of PCA scores, ordered (1,1),(1,2),...
InteractionBlock pca_interaction(const PcaBasis& cr, const PcaBasis& cs);

// Diagnostics for the first PLS component (tests use the achieved criterion).
struct PlsInfo {
    Vector u1;         // weight on X^r columns
    Vector v1;         // weight on T = [y | X^s] columns
    double cov1 = 0.0; // cov(X^r u1, T v1), n-1 denominator
};

// Wang-style PLS interaction: components t_j = X^r u_j maximizing
// cov^2(X^r u, T v) with T = [y | X^s]; after each component X^r is deflated
// by its regression on t_j while T stays fixed. Inputs must be
// column-standardized. Returns min(q, p_r) components.
InteractionBlock pls_interaction(const Matrix& xr, const Matrix& xs, const Vector& y,
                                 int q, PlsInfo* info = nullptr);

// ---------------------------------------------------------------------------
// build_interaction_design — one block per gene pair
// ---------------------------------------------------------------------------
struct InteractionOptions {
    InteractionMethod method = InteractionMethod::GGEE;
    int q = 1;
    // Products on standardized SNP columns by default; raw {1,2,3} mode
    // reproduces the plain pairwise-product parameterization.
    bool raw_products = false;
};

struct InteractionDesign {
    // Exactly G(G-1)/2 blocks in lexicographic pair order (by gene position).
    // Degenerate pairs stay in the list, flagged, with empty z.
    std::vector<InteractionBlock> blocks;
    std::vector<std::string> warnings;

    int degenerate_count() const;
};

// Builds every pair block. Within a pair the component-carrying gene (the
// "r" side, which matters for PLS) is the one with the lexicographically
// smaller gene id, so results do not depend on gene order in the index.
// Block z columns are standardized. Throws only if every pair is degenerate.
InteractionDesign build_interaction_design(const GenotypeMatrix& g, const GeneIndex& idx,
                                           const Phenotype& y, const InteractionOptions& opts);

// Debug dump: z as TSV plus a JSON sidecar (method, pair, u, q).
void dump_interaction_block(const InteractionBlock& b, const std::string& tsv_path,
                            const std::string& json_path);

}  // namespace epi
