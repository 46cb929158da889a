#include "epi/screen_clean.hpp"

#include "epi/rng.hpp"
#include "epi/stats.hpp"

#include <nlohmann/json.hpp>

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace epi {

SplitPlan split(int n, std::uint64_t seed) {
    if (n < 4) throw DataError("screen/clean split needs at least 4 subjects");
    std::vector<int> perm(static_cast<size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    rng::Rng r(rng::derive_seed(seed, {rng::tag("split")}));
    r.shuffle(perm);
    SplitPlan plan;
    plan.seed = seed;
    int screen_size = (n + 1) / 2;
    plan.screen_rows.assign(perm.begin(), perm.begin() + screen_size);
    plan.clean_rows.assign(perm.begin() + screen_size, perm.end());
    std::sort(plan.screen_rows.begin(), plan.screen_rows.end());
    std::sort(plan.clean_rows.begin(), plan.clean_rows.end());
    return plan;
}

namespace {

GroupedDesign subset_rows(const GroupedDesign& d, const std::vector<int>& rows) {
    GroupedDesign s;
    s.groups = d.groups;
    s.column_ids = d.column_ids;
    s.design.resize(static_cast<int>(rows.size()), d.k());
    for (size_t i = 0; i < rows.size(); ++i)
        s.design.row(static_cast<int>(i)) = d.design.row(rows[i]);
    return s;
}

Vector subset(const Vector& y, const std::vector<int>& rows) {
    Vector s(static_cast<int>(rows.size()));
    for (size_t i = 0; i < rows.size(); ++i) s[static_cast<int>(i)] = y[rows[i]];
    return s;
}

Matrix center_columns(const Matrix& m) {
    Matrix c = m;
    for (int j = 0; j < c.cols(); ++j) c.col(j).array() -= c.col(j).mean();
    return c;
}

}  // namespace

std::vector<std::string> screen(const GroupedDesign& d, const Vector& y,
                                const SplitPlan& plan, const CvOptions& cv,
                                double* lambda_out) {
    GroupedDesign ds = subset_rows(d, plan.screen_rows);
    Vector ys = subset(y, plan.screen_rows);
    FitResult f = cv_select_lambda(ds, ys, cv);
    if (lambda_out) *lambda_out = f.lambda;
    return f.selected_groups;
}

namespace {

// Ridge machinery on the clean half. Columns are grouped; the penalty on
// group g's coefficients is kappa * w_g^2, handled by rescaling columns so a
// single kappa applies everywhere.
struct RidgeProblem {
    Matrix m;        // centered clean-half columns of the selected groups
    Vector y;        // centered clean-half phenotype
    Vector penalty;  // per-column w_g^2
    std::vector<std::string> ids;        // selected group ids, design order
    std::vector<int> offset, size;       // per selected group, within m
};

// GCV choice of kappa for min ||y - m b||^2 + kappa * b' diag(penalty) b,
// via the SVD of m * diag(penalty)^{-1/2}. Ties go to the larger kappa.
double gcv_kappa(const RidgeProblem& pr) {
    Matrix scaled = pr.m;
    for (int j = 0; j < scaled.cols(); ++j) scaled.col(j) /= std::sqrt(pr.penalty[j]);
    Eigen::JacobiSVD<Matrix> svd(scaled, Eigen::ComputeThinU);
    Vector sv2 = svd.singularValues().array().square();
    Vector uty = svd.matrixU().transpose() * pr.y;
    const double n = static_cast<double>(pr.y.size());
    double yty = pr.y.squaredNorm();
    double scale = std::max(sv2.mean(), 1e-300);

    double best_kappa = scale, best_gcv = std::numeric_limits<double>::infinity();
    const int grid = 100;
    for (int i = 0; i < grid; ++i) {
        // log grid from 1e6*scale down to 1e-6*scale
        double kappa = scale * std::pow(10.0, 6.0 - 12.0 * i / static_cast<double>(grid - 1));
        double df = 0.0, fit_ss = 0.0;
        for (int j = 0; j < sv2.size(); ++j) {
            double h = sv2[j] / (sv2[j] + kappa);
            df += h;
            // ||y - fitted||^2 = y'y - sum (2h - h^2) uty_j^2
            fit_ss += (2.0 * h - h * h) * uty[j] * uty[j];
        }
        double rss = std::max(yty - fit_ss, 0.0);
        double denom = n - df;
        if (denom <= 0.0) continue;
        double gcv = n * rss / (denom * denom);
        if (gcv < best_gcv) {
            best_gcv = gcv;
            best_kappa = kappa;
        }
    }
    return best_kappa;
}

// RSS of the penalized fit using precomputed Gram blocks.
double ridge_rss(const Matrix& gram, const Vector& xty, const Vector& penalty,
                 double kappa, double yty) {
    Matrix a = gram;
    a.diagonal() += kappa * penalty;
    Vector beta = a.ldlt().solve(xty);
    return yty - 2.0 * beta.dot(xty) + beta.dot(gram * beta);
}

}  // namespace

InferenceReport clean(const GroupedDesign& d, const Vector& y, const SplitPlan& plan,
                      const std::vector<std::string>& selected, int permutations,
                      double alpha, std::uint64_t seed) {
    if (permutations < 99) throw DataError("cleaning needs at least 99 permutations");
    if (!(alpha > 0.0 && alpha < 1.0)) throw DataError("alpha must be in (0,1)");
    for (const auto& id : selected)
        if (!d.find_group(id)) throw DataError("selected group '" + id + "' is not in the design");

    InferenceReport rep;
    rep.alpha = alpha;
    rep.permutations = permutations;
    rep.plan = plan;
    rep.seed = seed;
    for (const auto& g : d.groups) {
        ReportEntry e;
        e.group_id = g.id;
        e.kind = g.kind;
        rep.entries.push_back(e);
    }
    if (selected.empty()) {
        rep.warnings.push_back("screening selected no groups; nothing to test");
        return rep;
    }

    // Assemble the cleaned design in group order.
    RidgeProblem pr;
    {
        GroupedDesign dc = subset_rows(d, plan.clean_rows);
        Vector ycl = subset(y, plan.clean_rows);
        pr.y = ycl.array() - ycl.mean();
        int cols = 0;
        for (const auto& g : dc.groups)
            if (std::find(selected.begin(), selected.end(), g.id) != selected.end())
                cols += g.size;
        pr.m.resize(dc.n(), cols);
        pr.penalty.resize(cols);
        int at = 0;
        for (const auto& g : dc.groups) {
            if (std::find(selected.begin(), selected.end(), g.id) == selected.end()) continue;
            pr.ids.push_back(g.id);
            pr.offset.push_back(at);
            pr.size.push_back(g.size);
            pr.m.middleCols(at, g.size) = dc.design.middleCols(g.offset, g.size);
            pr.penalty.segment(at, g.size).setConstant(g.weight * g.weight);
            at += g.size;
        }
        pr.m = center_columns(pr.m);
    }
    const int nc = static_cast<int>(pr.y.size());
    if (nc <= static_cast<int>(pr.ids.size()))
        rep.warnings.push_back("clean half has few rows relative to the selected groups");

    double kappa = gcv_kappa(pr);
    double yty = pr.y.squaredNorm();
    Matrix gram = pr.m.transpose() * pr.m;
    Vector xty = pr.m.transpose() * pr.y;
    double rss_full = ridge_rss(gram, xty, pr.penalty, kappa, yty);

    std::vector<double> stats(pr.ids.size(), 0.0), pvals(pr.ids.size(), 1.0);
    for (size_t gi = 0; gi < pr.ids.size(); ++gi) {
        int off = pr.offset[gi], sz = pr.size[gi];
        int rest = static_cast<int>(pr.m.cols()) - sz;

        double col_scale = pr.m.middleCols(off, sz).cwiseAbs().maxCoeff();
        if (col_scale <= 1e-12) {
            rep.warnings.push_back("group '" + pr.ids[gi] +
                                   "' is constant on the clean half; p = 1");
            continue;
        }

        // Reduced model without this group's columns.
        std::vector<int> keep;
        for (int j = 0; j < pr.m.cols(); ++j)
            if (j < off || j >= off + sz) keep.push_back(j);
        Matrix gram_r(rest, rest);
        Vector xty_r(rest), pen_r(rest);
        for (int a = 0; a < rest; ++a) {
            xty_r[a] = xty[keep[static_cast<size_t>(a)]];
            pen_r[a] = pr.penalty[keep[static_cast<size_t>(a)]];
            for (int b = 0; b < rest; ++b)
                gram_r(a, b) = gram(keep[static_cast<size_t>(a)], keep[static_cast<size_t>(b)]);
        }
        double rss_reduced =
            rest == 0 ? yty : ridge_rss(gram_r, xty_r, pen_r, kappa, yty);
        double t_obs = rss_reduced - rss_full;
        stats[gi] = t_obs;

        // Null: permute this group's rows jointly, leaving the rest fixed.
        // Only the cross blocks A'B and B'y change (B'B is permutation
        // invariant), so the Gram matrix is patched instead of rebuilt.
        Matrix b_cols = pr.m.middleCols(off, sz);
        Matrix a_cols(nc, rest);
        for (int a = 0; a < rest; ++a) a_cols.col(a) = pr.m.col(keep[static_cast<size_t>(a)]);
        int exceed = 0;
        std::vector<int> rows(static_cast<size_t>(nc));
        for (int b = 0; b < permutations; ++b) {
            rng::Rng prng(rng::derive_seed(seed, {rng::tag("perm"), static_cast<std::uint64_t>(gi),
                                                  static_cast<std::uint64_t>(b)}));
            std::iota(rows.begin(), rows.end(), 0);
            prng.shuffle(rows);
            Matrix bp(nc, sz);
            for (int i = 0; i < nc; ++i) bp.row(i) = b_cols.row(rows[static_cast<size_t>(i)]);

            Matrix gram_p = gram;
            Vector xty_p = xty;
            Matrix cross = a_cols.transpose() * bp;  // rest x sz
            for (int a = 0; a < rest; ++a)
                for (int c = 0; c < sz; ++c) {
                    gram_p(keep[static_cast<size_t>(a)], off + c) = cross(a, c);
                    gram_p(off + c, keep[static_cast<size_t>(a)]) = cross(a, c);
                }
            xty_p.segment(off, sz) = bp.transpose() * pr.y;
            double rss_perm = ridge_rss(gram_p, xty_p, pr.penalty, kappa, yty);
            if (rss_reduced - rss_perm >= t_obs) ++exceed;
        }
        pvals[gi] = (1.0 + exceed) / static_cast<double>(permutations + 1);
    }

    std::vector<double> adjusted = bh_adjust(pvals);
    for (size_t gi = 0; gi < pr.ids.size(); ++gi) {
        for (auto& e : rep.entries) {
            if (e.group_id != pr.ids[gi]) continue;
            e.screened = true;
            e.statistic = stats[gi];
            e.p_value = pvals[gi];
            e.fdr_adjusted_p = adjusted[gi];
            e.significant = adjusted[gi] <= alpha;
            break;
        }
    }
    return rep;
}

const ReportEntry* InferenceReport::find(const std::string& group_id) const {
    for (const auto& e : entries)
        if (e.group_id == group_id) return &e;
    return nullptr;
}

InferenceReport detect(const GenotypeMatrix& g, const GeneIndex& idx, const Phenotype& y,
                       InteractionMethod method, const DetectConfig& cfg) {
    InteractionOptions iopts;
    iopts.method = method;
    iopts.q = cfg.q;
    iopts.raw_products = cfg.raw_products;
    InteractionDesign inter = build_interaction_design(g, idx, y, iopts);

    std::vector<std::string> notes;
    GroupedDesign d = assemble_grouped_design(g, idx, inter, cfg.literal_interaction_weight, &notes);

    SplitPlan plan = split(g.n(), cfg.seed);
    CvOptions cv;
    cv.folds = cfg.cv_folds;
    cv.grid_size = cfg.cv_grid_size;
    cv.seed = rng::derive_seed(cfg.seed, {rng::tag("screen")});
    double lambda = 0.0;
    std::vector<std::string> selected = screen(d, y.y, plan, cv, &lambda);

    InferenceReport rep = clean(d, y.y, plan, selected, cfg.permutations, cfg.alpha,
                                rng::derive_seed(cfg.seed, {rng::tag("clean")}));
    rep.method = method_name(method);
    rep.q = cfg.q;
    rep.lambda = lambda;
    rep.seed = cfg.seed;
    for (const auto& w : inter.warnings) rep.warnings.push_back(w);
    for (const auto& w : notes) rep.warnings.push_back(w);
    return rep;
}

std::string report_to_json(const InferenceReport& r) {
    nlohmann::json j;
    j["method"] = r.method;
    j["q"] = r.q;
    j["lambda"] = r.lambda;
    j["alpha"] = r.alpha;
    j["permutations"] = r.permutations;
    j["seed"] = r.seed;
    j["screen_rows"] = r.plan.screen_rows;
    j["clean_rows"] = r.plan.clean_rows;
    if (!r.warnings.empty()) j["warnings"] = r.warnings;
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& e : r.entries) {
        entries.push_back({{"group", e.group_id},
                           {"kind", group_kind_name(e.kind)},
                           {"screened", e.screened},
                           {"statistic", e.statistic},
                           {"p_value", e.p_value},
                           {"fdr_adjusted_p", e.fdr_adjusted_p},
                           {"significant", e.significant}});
    }
    j["results"] = entries;
    return j.dump(2);
}

std::string report_to_tsv(const InferenceReport& r) {
    std::ostringstream os;
    os.precision(12);
    os << "group\tkind\tscreened\tstatistic\tp_value\tfdr_adjusted_p\tsignificant\n";
    for (const auto& e : r.entries) {
        os << e.group_id << "\t" << group_kind_name(e.kind) << "\t" << (e.screened ? 1 : 0)
           << "\t" << e.statistic << "\t" << e.p_value << "\t" << e.fdr_adjusted_p << "\t"
           << (e.significant ? 1 : 0) << "\n";
    }
    return os.str();
}

}  // namespace epi
