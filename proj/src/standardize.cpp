#include "epi/standardize.hpp"

#include "epi/stats.hpp"

namespace epi {

StandardizedDesign standardize_columns(const Matrix& m) {
    const int n = static_cast<int>(m.rows());
    const int p = static_cast<int>(m.cols());
    StandardizedDesign out;
    std::vector<double> means, sds;
    for (int j = 0; j < p; ++j) {
        double mu = m.col(j).mean();
        double sd = column_sd(m.col(j));
        if (sd <= 0.0) {
            out.dropped.push_back(j);
            continue;
        }
        out.kept.push_back(j);
        means.push_back(mu);
        sds.push_back(sd);
    }
    out.columns.resize(n, static_cast<int>(out.kept.size()));
    out.means.resize(static_cast<int>(out.kept.size()));
    out.sds.resize(static_cast<int>(out.kept.size()));
    for (size_t c = 0; c < out.kept.size(); ++c) {
        int j = out.kept[c];
        out.means[static_cast<int>(c)] = means[c];
        out.sds[static_cast<int>(c)] = sds[c];
        out.columns.col(static_cast<int>(c)) = (m.col(j).array() - means[c]) / sds[c];
    }
    return out;
}

Vector standardize_vector(const Vector& x, double* sd_out) {
    double sd = column_sd(x);
    if (sd_out) *sd_out = sd;
    if (sd <= 0.0) return Vector::Zero(x.size());
    return (x.array() - x.mean()) / sd;
}

}  // namespace epi
