#include "epi/interaction.hpp"

#include "epi/stats.hpp"

#include <nlohmann/json.hpp>

#include <Eigen/SVD>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace epi {

const char* method_name(InteractionMethod m) {
    switch (m) {
        case InteractionMethod::GGEE: return "ggee";
        case InteractionMethod::PCA: return "pca";
        case InteractionMethod::PLS: return "pls";
    }
    return "?";
}

std::optional<InteractionMethod> parse_method(const std::string& s) {
    std::string t;
    for (char c : s) t.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    if (t == "ggee" || t == "g-gee") return InteractionMethod::GGEE;
    if (t == "pca") return InteractionMethod::PCA;
    if (t == "pls") return InteractionMethod::PLS;
    return std::nullopt;
}

PairProductMatrix pair_product(const Matrix& xr, const Matrix& xs) {
    PairProductMatrix out;
    const int n = static_cast<int>(xr.rows());
    out.p_r = static_cast<int>(xr.cols());
    out.p_s = static_cast<int>(xs.cols());
    out.w.resize(n, out.p_r * out.p_s);
    pair_product_loop(
        n, out.p_r, out.p_s, [&](int i, int j) { return xr(i, j); },
        [&](int i, int k) { return xs(i, k); },
        [&](int i, int col, double v) { out.w(i, col) = v; });
    return out;
}

InteractionBlock ggee_component(const PairProductMatrix& w, const Vector& y_centered) {
    InteractionBlock b;
    b.method = InteractionMethod::GGEE;
    b.gene_r = w.gene_r;
    b.gene_s = w.gene_s;
    Vector v = w.w.transpose() * y_centered;
    double norm = v.norm();
    if (norm <= 1e-12 * std::max(1.0, y_centered.norm()))
        throw DegeneratePairError("pair " + w.gene_r + ":" + w.gene_s +
                                  ": product matrix is uncorrelated with the phenotype");
    b.u = v / norm;
    b.z = w.w * b.u;
    // u is proportional to W'y, so z'y = ||W'y|| > 0 already; the explicit
    // orientation guards the numerically-zero edge.
    if (b.z.col(0).dot(y_centered) < 0.0) {
        b.u = -b.u;
        b.z = -b.z;
    }
    return b;
}

namespace {

// Flips each column pair so the largest-magnitude loading is positive.
void canonicalize_signs(Matrix& components, Matrix& scores) {
    for (int c = 0; c < components.cols(); ++c) {
        int imax = 0;
        components.col(c).cwiseAbs().maxCoeff(&imax);
        if (components(imax, c) < 0.0) {
            components.col(c) = -components.col(c);
            scores.col(c) = -scores.col(c);
        }
    }
}

}  // namespace

PcaBasis pca_basis(const Matrix& xg, int q) {
    PcaBasis basis;
    basis.requested_q = q;
    const int n = static_cast<int>(xg.rows());
    const int p = static_cast<int>(xg.cols());
    if (q < 1) {
        basis.warnings.push_back("q < 1 requested; nothing to extract");
        basis.components.resize(p, 0);
        basis.scores.resize(n, 0);
        basis.explained_variance.resize(0);
        return basis;
    }
    Matrix s(n, p);
    for (int j = 0; j < p; ++j) s.col(j) = standardize_vector(xg.col(j));

    Eigen::JacobiSVD<Matrix> svd(s, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector& sv = svd.singularValues();
    double tol = std::max(n, p) * std::numeric_limits<double>::epsilon() *
                 (sv.size() ? sv[0] : 0.0);
    int rank = 0;
    for (int i = 0; i < sv.size(); ++i)
        if (sv[i] > tol) ++rank;
    int keep = std::min(q, rank);
    if (keep < q)
        basis.warnings.push_back("requested " + std::to_string(q) + " components but rank is " +
                                 std::to_string(rank) + "; clamped to " + std::to_string(keep));
    basis.components = svd.matrixV().leftCols(keep);
    basis.scores = svd.matrixU().leftCols(keep) * sv.head(keep).asDiagonal();
    basis.explained_variance =
        sv.head(keep).array().square() / std::max(1.0, static_cast<double>(n - 1));
    canonicalize_signs(basis.components, basis.scores);
    return basis;
}

InteractionBlock pca_interaction(const PcaBasis& cr, const PcaBasis& cs) {
    InteractionBlock b;
    b.method = InteractionMethod::PCA;
    const int n = static_cast<int>(cr.scores.rows());
    if (cr.q() == 0 || cs.q() == 0) {
        b.degenerate = true;
        b.note = "no principal components on at least one side";
        b.z.resize(n, 0);
        return b;
    }
    b.q = std::min(cr.q(), cs.q());
    b.z.resize(n, cr.q() * cs.q());
    for (int a = 0; a < cr.q(); ++a)
        for (int c = 0; c < cs.q(); ++c)
            b.z.col(a * cs.q() + c) =
                cr.scores.col(a).cwiseProduct(cs.scores.col(c));
    return b;
}

InteractionBlock pls_interaction(const Matrix& xr, const Matrix& xs, const Vector& y,
                                 int q, PlsInfo* info) {
    InteractionBlock b;
    b.method = InteractionMethod::PLS;
    const int n = static_cast<int>(xr.rows());
    const int p_r = static_cast<int>(xr.cols());
    const int p_s = static_cast<int>(xs.cols());
    Matrix t_block(n, 1 + p_s);
    t_block.col(0) = y;
    t_block.rightCols(p_s) = xs;

    int q_eff = std::min(q, p_r);
    if (q_eff < q)
        b.note = "requested " + std::to_string(q) + " components but the gene has " +
                 std::to_string(p_r) + " SNPs; clamped to " + std::to_string(q_eff);

    Matrix e = xr;
    std::vector<Vector> comps;
    double denom = std::max(1.0, static_cast<double>(n - 1));
    for (int j = 0; j < q_eff; ++j) {
        Matrix m = e.transpose() * t_block / denom;
        Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
        if (svd.singularValues().size() == 0 || svd.singularValues()[0] <= 1e-12) {
            b.note = (b.note.empty() ? "" : b.note + "; ") +
                     std::string("covariance exhausted after ") + std::to_string(j) +
                     " components";
            break;
        }
        Vector u = svd.matrixU().col(0);
        Vector v = svd.matrixV().col(0);
        int imax = 0;
        u.cwiseAbs().maxCoeff(&imax);
        if (u[imax] < 0.0) {
            u = -u;
            v = -v;
        }
        Vector t = e * u;
        if (j == 0 && info) {
            info->u1 = u;
            info->v1 = v;
            info->cov1 = svd.singularValues()[0];
        }
        comps.push_back(t);
        double tt = t.squaredNorm();
        if (tt <= 0.0) break;
        e -= t * (t.transpose() * e) / tt;
    }
    b.q = static_cast<int>(comps.size());
    b.z.resize(n, b.q);
    for (int j = 0; j < b.q; ++j) b.z.col(j) = comps[static_cast<size_t>(j)];
    if (b.q == 0) {
        b.degenerate = true;
        if (b.note.empty()) b.note = "no PLS component with nonzero covariance";
    }
    return b;
}

int InteractionDesign::degenerate_count() const {
    int c = 0;
    for (const auto& b : blocks)
        if (b.degenerate) ++c;
    return c;
}

InteractionDesign build_interaction_design(const GenotypeMatrix& g, const GeneIndex& idx,
                                           const Phenotype& y, const InteractionOptions& opts) {
    idx.validate(g.p());
    y.validate(g.n());
    y.validate_nonconstant();
    if (idx.gene_count() < 2)
        throw DataError("interaction design needs at least two genes");

    const int G = idx.gene_count();
    Vector yc = y.y.array() - y.mean();
    Vector ystd = standardize_vector(y.y);

    // Per-gene matrices: standardized (constant columns become zero columns)
    // and, for the raw-product mode, the original codes.
    std::vector<Matrix> std_gene(static_cast<size_t>(G));
    for (int a = 0; a < G; ++a) {
        const GeneRange& r = idx.at(a);
        Matrix s(g.n(), r.size);
        for (int j = 0; j < r.size; ++j)
            s.col(j) = standardize_vector(g.values.col(r.offset + j));
        std_gene[static_cast<size_t>(a)] = std::move(s);
    }
    auto gene_matrix = [&](int a) -> Matrix {
        if (!opts.raw_products) return std_gene[static_cast<size_t>(a)];
        const GeneRange& r = idx.at(a);
        return g.values.middleCols(r.offset, r.size);
    };

    InteractionDesign design;
    std::vector<PcaBasis> bases;
    if (opts.method == InteractionMethod::PCA) {
        bases.resize(static_cast<size_t>(G));
        for (int a = 0; a < G; ++a) {
            const GeneRange& r = idx.at(a);
            bases[static_cast<size_t>(a)] = pca_basis(g.values.middleCols(r.offset, r.size), opts.q);
            for (const auto& wmsg : bases[static_cast<size_t>(a)].warnings)
                design.warnings.push_back("gene " + r.id + ": " + wmsg);
        }
    }

    for (int a = 0; a < G; ++a) {
        for (int c = a + 1; c < G; ++c) {
            // The component-carrying side is the lexicographically smaller id.
            int pr = a, ps = c;
            if (idx.at(c).id < idx.at(a).id) std::swap(pr, ps);
            InteractionBlock block;
            try {
                switch (opts.method) {
                    case InteractionMethod::GGEE: {
                        PairProductMatrix w = pair_product(gene_matrix(pr), gene_matrix(ps));
                        w.gene_r = idx.at(pr).id;
                        w.gene_s = idx.at(ps).id;
                        block = ggee_component(w, yc);
                        break;
                    }
                    case InteractionMethod::PCA: {
                        block = pca_interaction(bases[static_cast<size_t>(pr)],
                                                bases[static_cast<size_t>(ps)]);
                        break;
                    }
                    case InteractionMethod::PLS: {
                        block = pls_interaction(std_gene[static_cast<size_t>(pr)],
                                                std_gene[static_cast<size_t>(ps)], ystd, opts.q);
                        break;
                    }
                }
            } catch (const DegeneratePairError& e) {
                block.degenerate = true;
                block.note = e.what();
                block.method = opts.method;
                block.z.resize(g.n(), 0);
            }
            block.gene_r = idx.at(pr).id;
            block.gene_s = idx.at(ps).id;

            if (!block.degenerate) {
                // Standardize the constructed columns; constant ones carry no
                // signal and are dropped.
                StandardizedDesign sd = standardize_columns(block.z);
                if (!sd.dropped.empty())
                    block.note = (block.note.empty() ? "" : block.note + "; ") +
                                 std::to_string(sd.dropped.size()) + " constant column(s) dropped";
                if (sd.retained() == 0) {
                    block.degenerate = true;
                    block.note = (block.note.empty() ? "" : block.note + "; ") +
                                 std::string("all constructed columns constant");
                    block.z.resize(g.n(), 0);
                } else {
                    block.z = sd.columns;
                }
            }
            if (block.degenerate)
                design.warnings.push_back("pair " + block.pair_id() + " skipped: " + block.note);
            else if (!block.note.empty())
                design.warnings.push_back("pair " + block.pair_id() + ": " + block.note);
            design.blocks.push_back(std::move(block));
        }
    }
    if (design.degenerate_count() == static_cast<int>(design.blocks.size()))
        throw DataError("every gene pair is degenerate; no interaction design");
    return design;
}

void dump_interaction_block(const InteractionBlock& b, const std::string& tsv_path,
                            const std::string& json_path) {
    {
        std::ofstream out(tsv_path);
        if (!out) throw DataError(tsv_path + ": cannot write");
        for (int c = 0; c < b.m(); ++c) out << (c ? "\t" : "") << "z" << (c + 1);
        out << "\n";
        out.precision(12);
        for (int i = 0; i < b.z.rows(); ++i) {
            for (int c = 0; c < b.m(); ++c) out << (c ? "\t" : "") << b.z(i, c);
            out << "\n";
        }
    }
    nlohmann::json j;
    j["method"] = method_name(b.method);
    j["pair"] = b.pair_id();
    j["gene_r"] = b.gene_r;
    j["gene_s"] = b.gene_s;
    j["m"] = b.m();
    j["q"] = b.q;
    j["degenerate"] = b.degenerate;
    if (!b.note.empty()) j["note"] = b.note;
    if (b.u.size() > 0) j["u"] = std::vector<double>(b.u.data(), b.u.data() + b.u.size());
    std::ofstream out(json_path);
    if (!out) throw DataError(json_path + ": cannot write");
    out << j.dump(2) << "\n";
}

}  // namespace epi
