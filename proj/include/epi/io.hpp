#pragma once

#include "epi/types.hpp"

#include <string>
#include <vector>

namespace epi {

struct LoadOptions {
    // When true, a SNP listed under several genes keeps its first mapping and
    // later ones are dropped with a warning; the default is a load error.
    bool drop_duplicate_snps = false;
};

struct LoadedDataset {
    GenotypeMatrix genotypes;
    GeneIndex index;
    Phenotype phenotype;
    std::vector<std::string> snp_ids;  // column order matches genotypes
    std::vector<std::string> warnings;
};

// Reads the three dataset files and returns validated, mutually consistent
// structures. Genotype columns are reordered so each gene's SNPs are
// contiguous, in gene-map order.
//
// Formats:
//   genotypes: UTF-8 TSV, header row of SNP ids, one row per subject,
//              cells in {1,2,3}
//   gene map:  TSV with header `snp_id<TAB>gene_id`; row order defines
//              within-gene column order and gene order
//   phenotype: one real value per line, subject order matching genotype rows
LoadedDataset load_dataset(const std::string& genotype_path,
                           const std::string& gene_map_path,
                           const std::string& phenotype_path,
                           const LoadOptions& opts = {});

void write_genotypes(const std::string& path, const GenotypeMatrix& g,
                     const std::vector<std::string>& snp_ids);
void write_gene_map(const std::string& path, const GeneIndex& index,
                    const std::vector<std::string>& snp_ids);
void write_phenotype(const std::string& path, const Phenotype& y);

// Default SNP ids snp1..snpP when a simulated dataset is exported.
std::vector<std::string> default_snp_ids(int p);

}  // namespace epi
