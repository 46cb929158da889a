#pragma once

// Independent reference implementations used only by tests. Everything here
// is deliberately written against the library's public contracts through a
// different algorithm than the production code, so agreement is evidence and
// not tautology.

#include "epi/group_lasso.hpp"
#include "epi/rng.hpp"
#include "epi/standardize.hpp"
#include "epi/types.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace oracle {

// Unit eigenvector of the largest eigenvalue of a symmetric matrix, via the
// dense symmetric eigensolver (eigenvalues come back ascending).
inline epi::Vector top_eigenvector(const epi::Matrix& m) {
    Eigen::SelfAdjointEigenSolver<epi::Matrix> es(m);
    epi::Vector v = es.eigenvectors().col(m.cols() - 1);
    return v / v.norm();
}

inline double cosine(const epi::Vector& a, const epi::Vector& b) {
    double na = a.norm(), nb = b.norm();
    if (na == 0.0 || nb == 0.0) return 0.0;
    return a.dot(b) / (na * nb);
}

// ---------------------------------------------------------------------------
// Accelerated proximal-gradient (FISTA) reference solver for
//   (1/2n) ||y_c - D theta||^2 + lambda * sum_g w_g ||theta_g||_2
// with monotone restarts. Independent of the production block coordinate
// descent; driven to a much tighter objective tolerance than the 1e-6
// comparisons that use it.
// ---------------------------------------------------------------------------
struct FistaResult {
    epi::Vector theta;
    double objective = 0.0;
    int iterations = 0;
};

inline epi::Vector group_prox(const epi::GroupedDesign& d, const epi::Vector& v,
                              double scale_lambda) {
    epi::Vector out = v;
    for (const auto& g : d.groups) {
        double norm = v.segment(g.offset, g.size).norm();
        double t = scale_lambda * g.weight;
        if (norm <= t)
            out.segment(g.offset, g.size).setZero();
        else
            out.segment(g.offset, g.size) *= (1.0 - t / norm);
    }
    return out;
}

inline FistaResult fista_group_lasso(const epi::GroupedDesign& d, const epi::Vector& y_centered,
                                     double lambda, int max_iter = 500000,
                                     double rel_tol = 1e-13) {
    const double n = static_cast<double>(d.n());
    Eigen::SelfAdjointEigenSolver<epi::Matrix> es(d.design.transpose() * d.design,
                                                  Eigen::EigenvaluesOnly);
    double lip = std::max(es.eigenvalues().maxCoeff() / n, 1e-12);

    epi::Vector theta = epi::Vector::Zero(d.k());
    epi::Vector z = theta;
    double t = 1.0;
    double prev_obj = epi::group_lasso_objective(d, y_centered, theta, lambda);
    FistaResult best{theta, prev_obj, 0};

    for (int it = 0; it < max_iter; ++it) {
        epi::Vector grad = d.design.transpose() * (d.design * z - y_centered) / n;
        epi::Vector next = group_prox(d, z - grad / lip, lambda / lip);
        double obj = epi::group_lasso_objective(d, y_centered, next, lambda);
        if (obj < best.objective) {
            best.theta = next;
            best.objective = obj;
        }
        double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        if (obj > prev_obj) {
            // Monotone restart: drop momentum when the objective backslides.
            z = next;
            t_next = 1.0;
        } else {
            z = next + ((t - 1.0) / t_next) * (next - theta);
        }
        bool settled = std::abs(prev_obj - obj) <= rel_tol * std::max(1.0, std::abs(obj));
        theta = next;
        prev_obj = obj;
        t = t_next;
        best.iterations = it + 1;
        if (settled && it > 50) break;
    }
    return best;
}

// ---------------------------------------------------------------------------
// Random test-problem builders
// ---------------------------------------------------------------------------

// Standardized Gaussian design with the given group sizes, weight sqrt(size).
inline epi::GroupedDesign random_design(epi::rng::Rng& r, int n, const std::vector<int>& sizes) {
    int k = 0;
    for (int s : sizes) k += s;
    epi::Matrix raw(n, k);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < k; ++j) raw(i, j) = r.normal();
    epi::StandardizedDesign sd = epi::standardize_columns(raw);

    epi::GroupedDesign d;
    d.design = sd.columns;
    int at = 0;
    for (size_t gi = 0; gi < sizes.size(); ++gi) {
        epi::Group g;
        g.id = "g" + std::to_string(gi + 1);
        g.kind = gi % 2 == 0 ? epi::GroupKind::Main : epi::GroupKind::Interaction;
        g.offset = at;
        g.size = sizes[gi];
        g.weight = std::sqrt(static_cast<double>(sizes[gi]));
        d.groups.push_back(g);
        at += sizes[gi];
    }
    for (int j = 0; j < k; ++j) d.column_ids.push_back("c" + std::to_string(j + 1));
    d.validate();
    return d;
}

inline epi::Vector random_unit_vector(epi::rng::Rng& r, int dim) {
    epi::Vector v(dim);
    for (int i = 0; i < dim; ++i) v[i] = r.normal();
    return v / v.norm();
}

// Random genotype matrix with roughly balanced codes; every column gets all
// three codes when n >= 6 so nothing is constant.
inline epi::Matrix random_genotype_columns(epi::rng::Rng& r, int n, int p) {
    epi::Matrix m(n, p);
    for (int j = 0; j < p; ++j) {
        for (int i = 0; i < n; ++i)
            m(i, j) = static_cast<double>(1 + r.bounded(3));
        if (n >= 6) {
            m(0, j) = 1;
            m(1, j) = 2;
            m(2, j) = 3;
        }
    }
    return m;
}

}  // namespace oracle
