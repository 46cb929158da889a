#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <vector>

namespace epi {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Error raised by file ingestion and input validation. The message carries
// file, line and column where that is known.
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// A gene pair whose interaction variable cannot be constructed (zero
// cross-covariance with the phenotype, or all columns constant).
class DegeneratePairError : public std::runtime_error {
public:
    explicit DegeneratePairError(const std::string& msg) : std::runtime_error(msg) {}
};

// Solver failed to reach the stated tolerance within the sweep budget.
class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(const std::string& msg, double gap)
        : std::runtime_error(msg), duality_gap(gap) {}
    double duality_gap;
};

// ---------------------------------------------------------------------------
// GenotypeMatrix — n x p additive-coded SNP matrix, entries in {1,2,3}
// ---------------------------------------------------------------------------
struct GenotypeMatrix {
    Matrix values;  // every entry is one of 1, 2, 3

    int n() const { return static_cast<int>(values.rows()); }
    int p() const { return static_cast<int>(values.cols()); }

    void validate() const;
};

// ---------------------------------------------------------------------------
// GeneIndex — ordered gene -> contiguous column range mapping
// ---------------------------------------------------------------------------
struct GeneRange {
    std::string id;
    int offset = 0;  // first column of the gene
    int size = 0;    // number of SNPs (p_g)
};

struct GeneIndex {
    std::vector<GeneRange> genes;

    int gene_count() const { return static_cast<int>(genes.size()); }
    int total_snps() const;
    const GeneRange& at(int g) const { return genes.at(static_cast<size_t>(g)); }

    // Checks ranges are contiguous, disjoint, in order, and cover [0, p).
    void validate(int p) const;
};

// ---------------------------------------------------------------------------
// Phenotype — length-n quantitative trait vector
// ---------------------------------------------------------------------------
struct Phenotype {
    Vector y;

    int n() const { return static_cast<int>(y.size()); }
    double mean() const { return y.mean(); }
    double variance() const;  // n-1 denominator

    void validate(int expected_n) const;
    // Downstream model fitting additionally needs variance > 0.
    void validate_nonconstant() const;
};

}  // namespace epi
