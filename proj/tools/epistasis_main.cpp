// Command-line front end: dataset simulation, single-dataset analysis, full
// power studies, and re-aggregation of persisted study results.

#include "epi/config.hpp"
#include "epi/io.hpp"
#include "epi/power_study.hpp"
#include "epi/screen_clean.hpp"
#include "epi/simulation.hpp"
#include "epi/svg.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CommonArgs {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string output;
    bool force = false;
};

epi::Config load_config(const CommonArgs& args) {
    if (args.config_path.empty()) return epi::Config{};
    return epi::Config::parse_file(args.config_path);
}

// Refuses to write into an existing non-empty directory unless --force.
void prepare_output_dir(const std::string& dir, bool force) {
    fs::path p(dir);
    if (fs::exists(p)) {
        if (!fs::is_directory(p)) throw epi::DataError(dir + " exists and is not a directory");
        if (!fs::is_empty(p) && !force)
            throw epi::DataError(dir + " is not empty; pass --force to write into it");
    } else {
        fs::create_directories(p);
    }
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw epi::DataError(path.string() + ": cannot write");
    out << content;
    if (!out) throw epi::DataError(path.string() + ": write failed");
}

void warn_unused(const epi::Config& cfg) {
    for (const auto& key : cfg.unused_keys())
        std::cerr << "warning: config key '" << key << "' was not used\n";
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------
int cmd_simulate(const CommonArgs& args) {
    epi::Config cfg = load_config(args);
    std::uint64_t seed = args.seed.value_or(
        static_cast<std::uint64_t>(cfg.get_int("seed", 0)));

    epi::StudySetting setting = epi::parse_setting(cfg.get_int("setting", 1));
    std::string model_s = cfg.get("model", "wang");
    epi::PhenotypeModel model = model_s == "pca" ? epi::PhenotypeModel::PcaModel
                                                 : epi::PhenotypeModel::WangPathway;
    if (model_s != "wang" && model_s != "pca")
        throw epi::DataError("config key 'model' must be wang or pca");
    double r2 = cfg.get_double("r2", 0.4);
    double beta = cfg.get_double("beta", 2.0);
    double gamma = cfg.get_double("gamma", 2.0);

    epi::GenotypeSimConfig gc;
    gc.n = cfg.get_int("n", 600);
    gc.genes = cfg.get_int("genes", 6);
    gc.snps_per_gene = cfg.get_int("snps_per_gene", 6);
    gc.rho = cfg.get_double("rho", 0.8);
    gc.maf_low = cfg.get_double("maf_low", 0.05);
    gc.maf_high = cfg.get_double("maf_high", 0.5);
    gc.causal_maf = cfg.get_double("causal_maf", 0.2);
    gc.seed = seed;

    epi::EffectConfig effects = epi::setting_effects(setting, model, r2, beta, gamma);
    for (const auto& m : effects.mains)
        for (int snp : m.causal_snps)
            gc.causal_columns.push_back(m.gene * gc.snps_per_gene + snp);
    for (const auto& e : effects.interactions) {
        for (int snp : e.snps_r) gc.causal_columns.push_back(e.gene_r * gc.snps_per_gene + snp);
        for (int snp : e.snps_s) gc.causal_columns.push_back(e.gene_s * gc.snps_per_gene + snp);
    }
    warn_unused(cfg);

    epi::SimulatedDataset ds = epi::simulate_dataset(gc, effects);
    prepare_output_dir(args.output, args.force);
    fs::path out(args.output);
    std::vector<std::string> snp_ids = epi::default_snp_ids(ds.genotypes.p());
    epi::write_genotypes((out / "genotypes.tsv").string(), ds.genotypes, snp_ids);
    epi::write_gene_map((out / "gene_map.tsv").string(), ds.index, snp_ids);
    epi::write_phenotype((out / "phenotype.tsv").string(), ds.y);
    write_file(out / "truth.json", epi::truth_manifest_json(ds, seed) + "\n");

    std::cout << "wrote " << args.output << ": n=" << ds.genotypes.n()
              << " snps=" << ds.genotypes.p() << " genes=" << ds.index.gene_count()
              << " setting=" << epi::setting_name(setting, model)
              << " realized_r2=" << epi::realized_r2(ds.q_phi, ds.y.y) << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// analyze
// ---------------------------------------------------------------------------
int cmd_analyze(const CommonArgs& args, const std::string& genotypes,
                const std::string& gene_map, const std::string& phenotype,
                const std::string& method_flag, bool dump_blocks) {
    epi::Config cfg = load_config(args);
    std::string method_s = !method_flag.empty() ? method_flag : cfg.get("method", "ggee");
    auto method = epi::parse_method(method_s);
    if (!method) throw epi::DataError("unknown method '" + method_s + "'");

    epi::DetectConfig dc;
    dc.seed = args.seed.value_or(static_cast<std::uint64_t>(cfg.get_int("seed", 0)));
    dc.q = cfg.get_int("q", 1);
    dc.cv_folds = cfg.get_int("cv_folds", 10);
    dc.cv_grid_size = cfg.get_int("cv_grid_size", 100);
    dc.permutations = cfg.get_int("permutations", 999);
    dc.alpha = cfg.get_double("alpha", 0.05);
    dc.raw_products = cfg.get_bool("raw_products", false);
    dc.literal_interaction_weight = cfg.get_bool("literal_interaction_weight", false);
    warn_unused(cfg);

    epi::LoadedDataset ds = epi::load_dataset(genotypes, gene_map, phenotype);
    for (const auto& w : ds.warnings) std::cerr << "warning: " << w << "\n";

    prepare_output_dir(args.output, args.force);
    fs::path out(args.output);

    if (dump_blocks) {
        epi::InteractionOptions iopts;
        iopts.method = *method;
        iopts.q = dc.q;
        iopts.raw_products = dc.raw_products;
        epi::InteractionDesign inter =
            epi::build_interaction_design(ds.genotypes, ds.index, ds.phenotype, iopts);
        fs::create_directories(out / "blocks");
        for (const auto& b : inter.blocks) {
            if (b.degenerate) continue;
            std::string stem = b.gene_r + "_" + b.gene_s;
            epi::dump_interaction_block(b, (out / "blocks" / (stem + ".tsv")).string(),
                                        (out / "blocks" / (stem + ".json")).string());
        }
    }

    epi::InferenceReport rep = epi::detect(ds.genotypes, ds.index, ds.phenotype, *method, dc);
    for (const auto& w : rep.warnings) std::cerr << "warning: " << w << "\n";
    write_file(out / "report.json", epi::report_to_json(rep) + "\n");
    write_file(out / "report.tsv", epi::report_to_tsv(rep));

    int significant = 0;
    for (const auto& e : rep.entries)
        if (e.significant) ++significant;
    std::cout << "analyzed " << ds.genotypes.n() << " subjects, " << ds.index.gene_count()
              << " genes with method " << epi::method_name(*method) << ": " << significant
              << " significant group(s); report in " << args.output << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// power-study
// ---------------------------------------------------------------------------
epi::StudyConfig study_config_from(const epi::Config& cfg) {
    epi::StudyConfig sc;
    std::string study = cfg.get("study", "simplified");
    if (study == "realistic")
        sc.realistic = true;
    else if (study != "simplified")
        throw epi::DataError("config key 'study' must be simplified or realistic");

    sc.n = cfg.get_int("n", sc.n);
    sc.genes = cfg.get_int("genes", sc.genes);
    sc.snps_per_gene = cfg.get_int("snps_per_gene", sc.snps_per_gene);
    sc.rho = cfg.get_double("rho", sc.rho);
    sc.maf_low = cfg.get_double("maf_low", sc.maf_low);
    sc.maf_high = cfg.get_double("maf_high", sc.maf_high);
    sc.causal_maf = cfg.get_double("causal_maf", sc.causal_maf);
    sc.beta = cfg.get_double("beta", sc.beta);
    sc.gamma = cfg.get_double("gamma", sc.gamma);

    if (cfg.has("settings")) {
        sc.settings.clear();
        for (int s : cfg.get_ints("settings", {})) sc.settings.push_back(epi::parse_setting(s));
    }
    if (cfg.has("methods")) {
        sc.methods.clear();
        std::istringstream is(cfg.get("methods", ""));
        std::string piece;
        while (std::getline(is, piece, ',')) {
            auto m = epi::parse_method(piece);
            if (!m) throw epi::DataError("unknown method '" + piece + "' in config");
            sc.methods.push_back(*m);
        }
        if (sc.methods.empty()) throw epi::DataError("config key 'methods': empty list");
    }
    if (cfg.has("models")) {
        sc.models.clear();
        std::istringstream is(cfg.get("models", ""));
        std::string piece;
        while (std::getline(is, piece, ',')) {
            if (piece == "wang")
                sc.models.push_back(epi::PhenotypeModel::WangPathway);
            else if (piece == "pca")
                sc.models.push_back(epi::PhenotypeModel::PcaModel);
            else
                throw epi::DataError("unknown model '" + piece + "' in config");
        }
        if (sc.models.empty()) throw epi::DataError("config key 'models': empty list");
    }
    sc.r2_grid = cfg.get_doubles("r2_grid", sc.r2_grid);
    sc.iterations = cfg.get_int("iterations", sc.iterations);
    sc.q = cfg.get_int("q", sc.q);
    sc.cv_folds = cfg.get_int("cv_folds", sc.cv_folds);
    sc.cv_grid_size = cfg.get_int("cv_grid_size", sc.cv_grid_size);
    sc.permutations = cfg.get_int("permutations", sc.permutations);
    sc.alpha = cfg.get_double("alpha", sc.alpha);
    return sc;
}

json study_config_to_json(const epi::StudyConfig& sc) {
    json j;
    j["realistic"] = sc.realistic;
    j["n"] = sc.n;
    j["genes"] = sc.genes;
    j["snps_per_gene"] = sc.snps_per_gene;
    j["rho"] = sc.rho;
    j["maf_low"] = sc.maf_low;
    j["maf_high"] = sc.maf_high;
    j["causal_maf"] = sc.causal_maf;
    j["beta"] = sc.beta;
    j["gamma"] = sc.gamma;
    std::vector<int> settings;
    for (auto s : sc.settings) settings.push_back(epi::setting_number(s));
    j["settings"] = settings;
    std::vector<std::string> methods;
    for (auto m : sc.methods) methods.push_back(epi::method_name(m));
    j["methods"] = methods;
    std::vector<std::string> models;
    for (auto m : sc.models) models.push_back(epi::phenotype_model_name(m));
    j["models"] = models;
    j["r2_grid"] = sc.r2_grid;
    j["iterations"] = sc.iterations;
    j["seed"] = sc.seed;
    j["workers"] = sc.workers;
    j["q"] = sc.q;
    j["cv_folds"] = sc.cv_folds;
    j["cv_grid_size"] = sc.cv_grid_size;
    j["permutations"] = sc.permutations;
    j["alpha"] = sc.alpha;
    return j;
}

epi::StudyConfig study_config_from_json(const json& j) {
    epi::StudyConfig sc;
    sc.realistic = j.at("realistic").get<bool>();
    sc.n = j.at("n").get<int>();
    sc.genes = j.at("genes").get<int>();
    sc.snps_per_gene = j.at("snps_per_gene").get<int>();
    sc.rho = j.at("rho").get<double>();
    sc.maf_low = j.at("maf_low").get<double>();
    sc.maf_high = j.at("maf_high").get<double>();
    sc.causal_maf = j.at("causal_maf").get<double>();
    sc.beta = j.at("beta").get<double>();
    sc.gamma = j.at("gamma").get<double>();
    sc.settings.clear();
    for (int s : j.at("settings").get<std::vector<int>>())
        sc.settings.push_back(epi::parse_setting(s));
    sc.methods.clear();
    for (const auto& m : j.at("methods").get<std::vector<std::string>>())
        sc.methods.push_back(*epi::parse_method(m));
    sc.models.clear();
    for (const auto& m : j.at("models").get<std::vector<std::string>>())
        sc.models.push_back(m == "pca" ? epi::PhenotypeModel::PcaModel
                                       : epi::PhenotypeModel::WangPathway);
    sc.r2_grid = j.at("r2_grid").get<std::vector<double>>();
    sc.iterations = j.at("iterations").get<int>();
    sc.seed = j.at("seed").get<std::uint64_t>();
    sc.workers = j.at("workers").get<int>();
    sc.q = j.at("q").get<int>();
    sc.cv_folds = j.at("cv_folds").get<int>();
    sc.cv_grid_size = j.at("cv_grid_size").get<int>();
    sc.permutations = j.at("permutations").get<int>();
    sc.alpha = j.at("alpha").get<double>();
    return sc;
}

std::string r2_tag(double r2) {
    std::ostringstream os;
    os << r2;
    std::string s = os.str();
    for (auto& c : s)
        if (c == '.') c = 'p';
    return s;
}

void write_study_outputs(const epi::StudyResult& result, const fs::path& out) {
    write_file(out / "power_table.csv", epi::power_table_csv(result.table));
    write_file(out / "variance_shares.csv", epi::variance_share_csv(result.table));
    write_file(out / "power_curves.svg", epi::power_curves_svg(result.table));
    for (const auto& h : result.heatmaps) {
        std::string stem = "heatmap_" + h.setting + "_" + h.model + "_r2" + r2_tag(h.r2);
        write_file(out / (stem + ".csv"), epi::heatmap_csv(h));
        write_file(out / (stem + ".svg"), epi::heatmap_svg(h));
    }
    for (const auto& w : result.warnings) std::cerr << "warning: " << w << "\n";
}

int cmd_power_study(const CommonArgs& args, std::optional<int> workers_flag) {
    epi::Config cfg = load_config(args);
    epi::StudyConfig sc = study_config_from(cfg);
    sc.seed = args.seed.value_or(static_cast<std::uint64_t>(cfg.get_int("seed", 0)));
    sc.workers = workers_flag.value_or(cfg.get_int("workers", 1));
    warn_unused(cfg);
    sc.validate();

    prepare_output_dir(args.output, args.force);
    fs::path out(args.output);

    epi::StudyResult result = epi::run_power_study(sc);

    fs::create_directories(out / "replicates");
    for (const auto& r : result.replicates) {
        std::string stem = r.setting + "_" + r.model + "_" + r.method + "_r2" + r2_tag(r.r2) +
                           "_rep" + std::to_string(r.replicate);
        write_file(out / "replicates" / (stem + ".json"), epi::replicate_to_json(r) + "\n");
    }
    write_file(out / "study_config.json", study_config_to_json(sc).dump(2) + "\n");
    write_study_outputs(result, out);

    std::cout << "power study complete: " << result.table.cells.size() << " cells, "
              << result.replicates.size() << " replicate analyses; results in " << args.output
              << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// report — re-aggregate persisted replicate results
// ---------------------------------------------------------------------------
int cmd_report(const std::string& input, const std::string& output, bool force) {
    fs::path in(input);
    fs::path cfg_path = in / "study_config.json";
    if (!fs::exists(cfg_path))
        throw epi::DataError(cfg_path.string() + " not found; not a power-study output directory");
    std::ifstream cf(cfg_path);
    json jc = json::parse(cf);
    epi::StudyConfig sc = study_config_from_json(jc);

    fs::path reps = in / "replicates";
    if (!fs::exists(reps)) throw epi::DataError(reps.string() + " not found");
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(reps))
        if (entry.path().extension() == ".json") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw epi::DataError(reps.string() + " holds no replicate files");

    std::vector<epi::ReplicateResult> replicates;
    for (const auto& f : files) {
        std::ifstream rf(f);
        std::ostringstream buf;
        buf << rf.rdbuf();
        replicates.push_back(epi::replicate_from_json(buf.str()));
    }

    epi::StudyResult result = epi::aggregate_replicates(sc, std::move(replicates));

    fs::path out(output.empty() ? input : output);
    if (out != in) prepare_output_dir(out.string(), force);
    write_study_outputs(result, out);
    std::cout << "aggregated " << result.replicates.size() << " replicate analyses into "
              << out.string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Gene-gene interaction detection: grouped penalized regression with "
                 "eigen/PCA/PLS interaction variables, plus a simulation power harness"};
    app.require_subcommand(1);

    CommonArgs common;

    auto add_common = [&](CLI::App* sub, bool needs_output) {
        sub->add_option("--config", common.config_path, "key = value config file");
        sub->add_option("--seed", common.seed, "RNG seed (overrides config)");
        auto* out = sub->add_option("--output", common.output, "output directory");
        if (needs_output) out->required();
        sub->add_flag("--force", common.force, "write into a non-empty output directory");
    };

    CLI::App* sim = app.add_subcommand("simulate", "simulate a dataset and write it to disk");
    add_common(sim, true);

    CLI::App* ana = app.add_subcommand("analyze", "analyze a dataset for gene-gene interactions");
    std::string genotypes, gene_map, phenotype, method;
    bool dump_blocks = false;
    ana->add_option("--genotypes", genotypes, "genotype TSV")->required();
    ana->add_option("--gene-map", gene_map, "snp_id<TAB>gene_id TSV")->required();
    ana->add_option("--phenotype", phenotype, "one phenotype value per line")->required();
    ana->add_option("--method", method, "ggee, pca, or pls");
    ana->add_flag("--dump-blocks", dump_blocks, "write per-pair interaction variables");
    add_common(ana, true);

    CLI::App* pow = app.add_subcommand("power-study", "run a full simulation power study");
    std::optional<int> workers;
    pow->add_option("--workers", workers, "worker threads (results are worker-count invariant)");
    add_common(pow, true);

    CLI::App* rep = app.add_subcommand("report", "re-aggregate a power study's replicate files");
    std::string report_input, report_output;
    bool report_force = false;
    rep->add_option("--input", report_input, "power-study output directory")->required();
    rep->add_option("--output", report_output, "where to write tables/figures (default: input)");
    rep->add_flag("--force", report_force, "write into a non-empty output directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (sim->parsed()) return cmd_simulate(common);
        if (ana->parsed()) return cmd_analyze(common, genotypes, gene_map, phenotype, method,
                                              dump_blocks);
        if (pow->parsed()) return cmd_power_study(common, workers);
        if (rep->parsed()) return cmd_report(report_input, report_output, report_force);
    } catch (const epi::DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const epi::ConvergenceError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
