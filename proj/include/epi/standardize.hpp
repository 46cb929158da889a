#pragma once

#include "epi/types.hpp"

namespace epi {

// ---------------------------------------------------------------------------
// StandardizedDesign — centered/scaled columns with provenance
//
// Retained columns have mean 0 and sample sd 1 (n-1 denominator); constant
// columns are dropped and their original indices recorded, never divided by
// zero. means/sds are on the original scale and align with `kept`.
// ---------------------------------------------------------------------------
struct StandardizedDesign {
    Matrix columns;            // n x (number of retained columns)
    Vector means;              // per retained column
    Vector sds;                // per retained column, strictly positive
    std::vector<int> kept;     // original indices of retained columns
    std::vector<int> dropped;  // original indices of constant columns

    int retained() const { return static_cast<int>(kept.size()); }
};

StandardizedDesign standardize_columns(const Matrix& m);

// Single-column helper: returns (x - mean)/sd, or a zero vector when the
// column is constant (flag via sd_out == 0).
Vector standardize_vector(const Vector& x, double* sd_out = nullptr);

}  // namespace epi
