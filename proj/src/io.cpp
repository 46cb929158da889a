#include "epi/io.hpp"

#include <cerrno>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace epi {

namespace {

std::ifstream open_or_throw(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw DataError(path + ": " + std::strerror(errno));
    return in;
}

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream is(line);
    while (std::getline(is, field, '\t')) fields.push_back(field);
    return fields;
}

std::string trim_cr(std::string s) {
    if (!s.empty() && s.back() == '\r') s.pop_back();
    return s;
}

double parse_number(const std::string& text, const std::string& where) {
    size_t pos = 0;
    double v;
    try {
        v = std::stod(text, &pos);
    } catch (const std::exception&) {
        throw DataError(where + ": '" + text + "' is not a number");
    }
    if (pos != text.size())
        throw DataError(where + ": '" + text + "' is not a number");
    return v;
}

struct RawGenotypes {
    std::vector<std::string> snp_ids;
    Matrix values;  // n x p in file column order
};

RawGenotypes read_genotype_file(const std::string& path) {
    std::ifstream in = open_or_throw(path);
    std::string line;
    if (!std::getline(in, line))
        throw DataError(path + ": empty file");
    RawGenotypes raw;
    raw.snp_ids = split_tabs(trim_cr(line));
    if (raw.snp_ids.empty())
        throw DataError(path + ": header has no SNP ids");
    for (size_t j = 0; j < raw.snp_ids.size(); ++j) {
        if (raw.snp_ids[j].empty())
            throw DataError(path + ": header column " + std::to_string(j + 1) + " is empty");
        for (size_t h = 0; h < j; ++h)
            if (raw.snp_ids[h] == raw.snp_ids[j])
                throw DataError(path + ": SNP id '" + raw.snp_ids[j] + "' appears twice in the header");
    }
    const size_t p = raw.snp_ids.size();
    std::vector<std::vector<double>> rows;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        line = trim_cr(line);
        if (line.empty()) continue;
        std::vector<std::string> fields = split_tabs(line);
        std::string where = path + ":" + std::to_string(lineno);
        if (fields.size() != p)
            throw DataError(where + ": expected " + std::to_string(p) + " fields, found " +
                            std::to_string(fields.size()));
        std::vector<double> row(p);
        for (size_t j = 0; j < p; ++j) {
            double v = parse_number(fields[j], where + " column " + std::to_string(j + 1));
            if (v != 1.0 && v != 2.0 && v != 3.0)
                throw DataError(where + " column " + std::to_string(j + 1) + ": genotype '" +
                                fields[j] + "' is not one of 1, 2, 3");
            row[j] = v;
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty())
        throw DataError(path + ": no subject rows");
    raw.values.resize(static_cast<int>(rows.size()), static_cast<int>(p));
    for (size_t i = 0; i < rows.size(); ++i)
        for (size_t j = 0; j < p; ++j)
            raw.values(static_cast<int>(i), static_cast<int>(j)) = rows[i][j];
    return raw;
}

struct GeneMapRow {
    std::string snp, gene;
};

std::vector<GeneMapRow> read_gene_map_file(const std::string& path, bool drop_duplicates,
                                           std::vector<std::string>* warnings) {
    std::ifstream in = open_or_throw(path);
    std::string line;
    if (!std::getline(in, line))
        throw DataError(path + ": empty file");
    std::vector<std::string> header = split_tabs(trim_cr(line));
    if (header.size() != 2 || header[0] != "snp_id" || header[1] != "gene_id")
        throw DataError(path + ": expected header 'snp_id<TAB>gene_id'");
    std::vector<GeneMapRow> rows;
    std::map<std::string, std::string> seen;  // snp -> first gene
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        line = trim_cr(line);
        if (line.empty()) continue;
        std::vector<std::string> fields = split_tabs(line);
        std::string where = path + ":" + std::to_string(lineno);
        if (fields.size() != 2)
            throw DataError(where + ": expected 2 fields, found " + std::to_string(fields.size()));
        if (fields[0].empty() || fields[1].empty())
            throw DataError(where + ": empty snp_id or gene_id");
        auto it = seen.find(fields[0]);
        if (it != seen.end()) {
            if (!drop_duplicates)
                throw DataError(where + ": SNP '" + fields[0] + "' already mapped to gene '" +
                                it->second + "'");
            if (warnings)
                warnings->push_back("SNP '" + fields[0] + "' mapped to both '" + it->second +
                                    "' and '" + fields[1] + "'; kept the first mapping");
            continue;
        }
        seen.emplace(fields[0], fields[1]);
        rows.push_back({fields[0], fields[1]});
    }
    if (rows.empty())
        throw DataError(path + ": no SNP mappings");
    return rows;
}

Vector read_phenotype_file(const std::string& path) {
    std::ifstream in = open_or_throw(path);
    std::vector<double> values;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        line = trim_cr(line);
        if (line.empty()) continue;
        values.push_back(parse_number(line, path + ":" + std::to_string(lineno)));
    }
    if (values.empty())
        throw DataError(path + ": no phenotype values");
    Vector y(static_cast<int>(values.size()));
    for (size_t i = 0; i < values.size(); ++i) y[static_cast<int>(i)] = values[i];
    return y;
}

}  // namespace

LoadedDataset load_dataset(const std::string& genotype_path, const std::string& gene_map_path,
                           const std::string& phenotype_path, const LoadOptions& opts) {
    LoadedDataset ds;
    RawGenotypes raw = read_genotype_file(genotype_path);
    std::vector<GeneMapRow> map_rows =
        read_gene_map_file(gene_map_path, opts.drop_duplicate_snps, &ds.warnings);

    std::map<std::string, int> snp_column;
    for (size_t j = 0; j < raw.snp_ids.size(); ++j)
        snp_column.emplace(raw.snp_ids[j], static_cast<int>(j));

    // Gene-map row order drives column order; gene order is first appearance.
    std::vector<int> source_columns;
    for (const auto& row : map_rows) {
        auto it = snp_column.find(row.snp);
        if (it == snp_column.end())
            throw DataError(gene_map_path + ": SNP '" + row.snp + "' is not in " + genotype_path);
        source_columns.push_back(it->second);
        if (ds.index.genes.empty() || ds.index.genes.back().id != row.gene) {
            for (const auto& g : ds.index.genes)
                if (g.id == row.gene)
                    throw DataError(gene_map_path + ": gene '" + row.gene +
                                    "' appears in two separate runs; group its SNPs together");
            ds.index.genes.push_back({row.gene, static_cast<int>(source_columns.size()) - 1, 1});
        } else {
            ds.index.genes.back().size += 1;
        }
        ds.snp_ids.push_back(row.snp);
    }

    std::vector<bool> used(raw.snp_ids.size(), false);
    for (int j : source_columns) used[static_cast<size_t>(j)] = true;
    for (size_t j = 0; j < raw.snp_ids.size(); ++j)
        if (!used[j])
            ds.warnings.push_back("SNP '" + raw.snp_ids[j] +
                                  "' has no gene mapping and was dropped");

    ds.genotypes.values.resize(raw.values.rows(), static_cast<int>(source_columns.size()));
    for (size_t c = 0; c < source_columns.size(); ++c)
        ds.genotypes.values.col(static_cast<int>(c)) = raw.values.col(source_columns[c]);

    ds.phenotype.y = read_phenotype_file(phenotype_path);

    ds.genotypes.validate();
    ds.index.validate(ds.genotypes.p());
    ds.phenotype.validate(ds.genotypes.n());
    return ds;
}

void write_genotypes(const std::string& path, const GenotypeMatrix& g,
                     const std::vector<std::string>& snp_ids) {
    if (static_cast<int>(snp_ids.size()) != g.p())
        throw DataError("write_genotypes: " + std::to_string(snp_ids.size()) + " ids for " +
                        std::to_string(g.p()) + " columns");
    std::ofstream out(path);
    if (!out) throw DataError(path + ": " + std::strerror(errno));
    for (size_t j = 0; j < snp_ids.size(); ++j)
        out << (j ? "\t" : "") << snp_ids[j];
    out << "\n";
    for (int i = 0; i < g.n(); ++i) {
        for (int j = 0; j < g.p(); ++j)
            out << (j ? "\t" : "") << static_cast<int>(g.values(i, j));
        out << "\n";
    }
    if (!out) throw DataError(path + ": write failed");
}

void write_gene_map(const std::string& path, const GeneIndex& index,
                    const std::vector<std::string>& snp_ids) {
    std::ofstream out(path);
    if (!out) throw DataError(path + ": " + std::strerror(errno));
    out << "snp_id\tgene_id\n";
    for (const auto& gene : index.genes)
        for (int j = gene.offset; j < gene.offset + gene.size; ++j)
            out << snp_ids.at(static_cast<size_t>(j)) << "\t" << gene.id << "\n";
    if (!out) throw DataError(path + ": write failed");
}

void write_phenotype(const std::string& path, const Phenotype& y) {
    std::ofstream out(path);
    if (!out) throw DataError(path + ": " + std::strerror(errno));
    out.precision(17);
    for (int i = 0; i < y.n(); ++i) out << y.y[i] << "\n";
    if (!out) throw DataError(path + ": write failed");
}

std::vector<std::string> default_snp_ids(int p) {
    std::vector<std::string> ids;
    ids.reserve(static_cast<size_t>(p));
    for (int j = 1; j <= p; ++j) ids.push_back("snp" + std::to_string(j));
    return ids;
}

}  // namespace epi
