#include "epi/types.hpp"

#include <cmath>
#include <sstream>

namespace epi {

void GenotypeMatrix::validate() const {
    if (values.rows() < 1 || values.cols() < 1)
        throw DataError("genotype matrix is empty");
    for (int j = 0; j < p(); ++j) {
        for (int i = 0; i < n(); ++i) {
            double v = values(i, j);
            if (v != 1.0 && v != 2.0 && v != 3.0) {
                std::ostringstream os;
                os << "genotype value " << v << " at subject " << (i + 1)
                   << ", column " << (j + 1) << " is not one of 1, 2, 3";
                throw DataError(os.str());
            }
        }
    }
}

int GeneIndex::total_snps() const {
    int t = 0;
    for (const auto& g : genes) t += g.size;
    return t;
}

void GeneIndex::validate(int p) const {
    if (genes.empty()) throw DataError("gene index is empty");
    int cursor = 0;
    for (size_t g = 0; g < genes.size(); ++g) {
        const GeneRange& r = genes[g];
        if (r.id.empty()) throw DataError("gene at position " + std::to_string(g) + " has an empty id");
        if (r.size < 1)
            throw DataError("gene '" + r.id + "' has no SNPs");
        if (r.offset != cursor) {
            std::ostringstream os;
            os << "gene '" << r.id << "' starts at column " << r.offset
               << " but columns up to " << cursor << " are already assigned";
            throw DataError(os.str());
        }
        for (size_t h = 0; h < g; ++h)
            if (genes[h].id == r.id)
                throw DataError("gene id '" + r.id + "' appears twice");
        cursor += r.size;
    }
    if (cursor != p) {
        std::ostringstream os;
        os << "gene index covers " << cursor << " columns but the genotype matrix has " << p;
        throw DataError(os.str());
    }
}

double Phenotype::variance() const {
    if (y.size() < 2) return 0.0;
    double m = y.mean();
    return (y.array() - m).square().sum() / static_cast<double>(y.size() - 1);
}

void Phenotype::validate(int expected_n) const {
    if (static_cast<int>(y.size()) != expected_n) {
        std::ostringstream os;
        os << "phenotype has " << y.size() << " values but " << expected_n
           << " subjects were expected";
        throw DataError(os.str());
    }
    for (int i = 0; i < n(); ++i)
        if (!std::isfinite(y[i]))
            throw DataError("phenotype value at subject " + std::to_string(i + 1) +
                            " is not finite");
}

void Phenotype::validate_nonconstant() const {
    if (variance() <= 0.0)
        throw DataError("phenotype is constant; nothing to model");
}

}  // namespace epi
