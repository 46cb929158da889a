#pragma once

#include "epi/types.hpp"

#include <vector>

namespace epi {

// Standard normal quantile function.
double normal_quantile(double p);

// Coefficient of determination of OLS with intercept of y on the given
// columns. An empty regressor set is the intercept-only model (R^2 = 0).
double ols_r2(const Vector& y, const Matrix& x);

// OLS coefficients with intercept; returns (intercept, betas).
std::pair<double, Vector> ols_fit(const Vector& y, const Matrix& x);

// Benjamini-Hochberg adjusted p-values (monotone step-up, clipped at 1).
std::vector<double> bh_adjust(const std::vector<double>& p);

// Sample mean / sd (n-1 denominator) of one column.
double column_mean(const Vector& v);
double column_sd(const Vector& v);

// Pearson correlation; 0 when either side is constant.
double pearson(const Vector& a, const Vector& b);

}  // namespace epi
