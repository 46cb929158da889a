#include "epi/stats.hpp"

#include "epi/types.hpp"

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace epi {

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0))
        throw DataError("normal_quantile needs p in (0,1)");
    static const boost::math::normal_distribution<double> dist(0.0, 1.0);
    return boost::math::quantile(dist, p);
}

std::pair<double, Vector> ols_fit(const Vector& y, const Matrix& x) {
    const int n = static_cast<int>(y.size());
    const int k = static_cast<int>(x.cols());
    if (k == 0) return {y.mean(), Vector::Zero(0)};
    if (x.rows() != n) throw std::invalid_argument("ols_fit: row mismatch");
    Matrix d(n, k + 1);
    d.col(0).setOnes();
    d.rightCols(k) = x;
    Vector coef = d.colPivHouseholderQr().solve(y);
    return {coef[0], coef.tail(k)};
}

double ols_r2(const Vector& y, const Matrix& x) {
    const int n = static_cast<int>(y.size());
    double tss = (y.array() - y.mean()).square().sum();
    if (tss <= 0.0) return 0.0;
    if (x.cols() == 0) return 0.0;
    auto [b0, b] = ols_fit(y, x);
    Vector fitted = Vector::Constant(n, b0) + x * b;
    double rss = (y - fitted).squaredNorm();
    double r2 = 1.0 - rss / tss;
    return std::clamp(r2, 0.0, 1.0);
}

std::vector<double> bh_adjust(const std::vector<double>& p) {
    const int m = static_cast<int>(p.size());
    std::vector<double> adj(p.size());
    if (m == 0) return adj;
    std::vector<int> order(p.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return p[a] < p[b]; });
    double running = 1.0;
    for (int r = m - 1; r >= 0; --r) {
        double value = p[order[r]] * m / static_cast<double>(r + 1);
        running = std::min(running, std::min(value, 1.0));
        adj[order[r]] = running;
    }
    return adj;
}

double column_mean(const Vector& v) { return v.mean(); }

double column_sd(const Vector& v) {
    if (v.size() < 2) return 0.0;
    double m = v.mean();
    return std::sqrt((v.array() - m).square().sum() / static_cast<double>(v.size() - 1));
}

double pearson(const Vector& a, const Vector& b) {
    if (a.size() != b.size() || a.size() < 2) return 0.0;
    double sa = column_sd(a), sb = column_sd(b);
    if (sa <= 0.0 || sb <= 0.0) return 0.0;
    double cov = ((a.array() - a.mean()) * (b.array() - b.mean())).sum() /
                 static_cast<double>(a.size() - 1);
    return cov / (sa * sb);
}

}  // namespace epi
