#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "epi/io.hpp"

#include <nlohmann/json.hpp>

#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// The binary path is injected by the build (EPISTASIS_BIN).
const char* binary() { return EPISTASIS_BIN; }

struct RunResult {
    int status = -1;
    std::string out;
    std::string err;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

fs::path fresh_dir(const std::string& name) {
    fs::path dir = fs::temp_directory_path() / ("epi_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

RunResult run(const std::string& args, const fs::path& scratch) {
    fs::path out_file = scratch / "stdout.txt";
    fs::path err_file = scratch / "stderr.txt";
    std::string cmd = std::string(binary()) + " " + args + " > " + out_file.string() + " 2> " +
                      err_file.string();
    int raw = std::system(cmd.c_str());
    RunResult r;
    r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    r.out = slurp(out_file);
    r.err = slurp(err_file);
    return r;
}

void write_config(const fs::path& p, const std::string& body) {
    std::ofstream out(p);
    out << body;
}

// Small dataset + lean analysis settings shared by the test cases.
const char* kSimulateConfig =
    "# desk-scale draw\n"
    "n = 120\n"
    "genes = 4\n"
    "snps_per_gene = 3\n"
    "setting = 3\n"
    "model = wang\n"
    "r2 = 0.6\n";

const char* kAnalyzeConfig =
    "cv_folds = 5\n"
    "cv_grid_size = 20\n"
    "permutations = 99\n";

}  // namespace

TEST_CASE("simulate writes a loadable dataset and is seed-reproducible") {
    fs::path scratch = fresh_dir("simulate");
    write_config(scratch / "sim.conf", kSimulateConfig);
    fs::path data_a = scratch / "a";
    RunResult r = run("simulate --config " + (scratch / "sim.conf").string() + " --seed 5 --output " +
                          data_a.string(),
                      scratch);
    INFO(r.err);
    REQUIRE(r.status == 0);
    CHECK(r.out.find("n=120") != std::string::npos);
    CHECK(fs::exists(data_a / "genotypes.tsv"));
    CHECK(fs::exists(data_a / "gene_map.tsv"));
    CHECK(fs::exists(data_a / "phenotype.tsv"));
    CHECK(fs::exists(data_a / "truth.json"));

    epi::LoadedDataset ds = epi::load_dataset((data_a / "genotypes.tsv").string(),
                                              (data_a / "gene_map.tsv").string(),
                                              (data_a / "phenotype.tsv").string());
    CHECK(ds.genotypes.n() == 120);
    CHECK(ds.genotypes.p() == 12);
    CHECK(ds.index.gene_count() == 4);

    json truth = json::parse(slurp(data_a / "truth.json"));
    CHECK(truth.at("interactions").size() == 1);
    CHECK(truth.at("main_effects").empty());

    // Same seed, same bytes; different seed, different draw.
    fs::path data_b = scratch / "b";
    RunResult r2 = run("simulate --config " + (scratch / "sim.conf").string() +
                           " --seed 5 --output " + data_b.string(),
                       scratch);
    REQUIRE(r2.status == 0);
    CHECK(slurp(data_a / "genotypes.tsv") == slurp(data_b / "genotypes.tsv"));
    CHECK(slurp(data_a / "phenotype.tsv") == slurp(data_b / "phenotype.tsv"));

    fs::path data_c = scratch / "c";
    RunResult r3 = run("simulate --config " + (scratch / "sim.conf").string() +
                           " --seed 6 --output " + data_c.string(),
                       scratch);
    REQUIRE(r3.status == 0);
    CHECK(slurp(data_a / "genotypes.tsv") != slurp(data_c / "genotypes.tsv"));
}

TEST_CASE("a non-empty output directory is refused without --force") {
    fs::path scratch = fresh_dir("force");
    write_config(scratch / "sim.conf", kSimulateConfig);
    fs::path data = scratch / "data";
    std::string base = "simulate --config " + (scratch / "sim.conf").string() +
                       " --seed 1 --output " + data.string();
    REQUIRE(run(base, scratch).status == 0);

    RunResult refused = run(base, scratch);
    CHECK(refused.status == 2);
    CHECK(refused.err.find("not empty") != std::string::npos);

    RunResult forced = run(base + " --force", scratch);
    CHECK(forced.status == 0);
}

TEST_CASE("analyze produces a well-formed report") {
    fs::path scratch = fresh_dir("analyze");
    write_config(scratch / "sim.conf", kSimulateConfig);
    write_config(scratch / "ana.conf", kAnalyzeConfig);
    fs::path data = scratch / "data";
    REQUIRE(run("simulate --config " + (scratch / "sim.conf").string() + " --seed 9 --output " +
                    data.string(),
                scratch)
                .status == 0);

    fs::path out = scratch / "report";
    RunResult r = run("analyze --genotypes " + (data / "genotypes.tsv").string() + " --gene-map " +
                          (data / "gene_map.tsv").string() + " --phenotype " +
                          (data / "phenotype.tsv").string() + " --method ggee --config " +
                          (scratch / "ana.conf").string() + " --seed 3 --output " + out.string(),
                      scratch);
    INFO(r.err);
    REQUIRE(r.status == 0);
    CHECK(r.out.find("method ggee") != std::string::npos);

    json rep = json::parse(slurp(out / "report.json"));
    CHECK(rep.at("method") == "ggee");
    CHECK(rep.at("results").size() == 10);  // 4 genes + 6 pairs
    CHECK(rep.at("permutations") == 99);

    std::string tsv = slurp(out / "report.tsv");
    CHECK(std::count(tsv.begin(), tsv.end(), '\n') == 11);
    CHECK(tsv.rfind("group\tkind\t", 0) == 0);
}

TEST_CASE("analyze can dump the per-pair interaction variables") {
    fs::path scratch = fresh_dir("blocks");
    write_config(scratch / "sim.conf", kSimulateConfig);
    write_config(scratch / "ana.conf", kAnalyzeConfig);
    fs::path data = scratch / "data";
    REQUIRE(run("simulate --config " + (scratch / "sim.conf").string() + " --seed 9 --output " +
                    data.string(),
                scratch)
                .status == 0);

    fs::path out = scratch / "report";
    RunResult r = run("analyze --genotypes " + (data / "genotypes.tsv").string() + " --gene-map " +
                          (data / "gene_map.tsv").string() + " --phenotype " +
                          (data / "phenotype.tsv").string() + " --method pca --dump-blocks" +
                          " --config " + (scratch / "ana.conf").string() + " --output " +
                          out.string(),
                      scratch);
    INFO(r.err);
    REQUIRE(r.status == 0);
    int tsv_count = 0, json_count = 0;
    for (const auto& e : fs::directory_iterator(out / "blocks")) {
        if (e.path().extension() == ".tsv") ++tsv_count;
        if (e.path().extension() == ".json") ++json_count;
    }
    CHECK(tsv_count == 6);
    CHECK(json_count == 6);
}

TEST_CASE("missing inputs and bad configs exit with code 2") {
    fs::path scratch = fresh_dir("errors");
    write_config(scratch / "sim.conf", kSimulateConfig);
    fs::path data = scratch / "data";
    REQUIRE(run("simulate --config " + (scratch / "sim.conf").string() + " --seed 2 --output " +
                    data.string(),
                scratch)
                .status == 0);

    fs::path missing = scratch / "nope.tsv";
    RunResult r = run("analyze --genotypes " + (data / "genotypes.tsv").string() + " --gene-map " +
                          missing.string() + " --phenotype " + (data / "phenotype.tsv").string() +
                          " --output " + (scratch / "r1").string(),
                      scratch);
    CHECK(r.status == 2);
    CHECK(r.err.find("nope.tsv") != std::string::npos);

    write_config(scratch / "bad.conf", "this line has no equals sign\n");
    RunResult rb = run("simulate --config " + (scratch / "bad.conf").string() + " --output " +
                           (scratch / "r2").string(),
                       scratch);
    CHECK(rb.status == 2);
    CHECK_FALSE(rb.err.empty());
}

TEST_CASE("power-study emits the full artifact set and report re-aggregates it") {
    fs::path scratch = fresh_dir("study");
    write_config(scratch / "study.conf",
                 "n = 120\n"
                 "genes = 4\n"
                 "snps_per_gene = 3\n"
                 "settings = 3\n"
                 "models = wang\n"
                 "methods = ggee\n"
                 "r2_grid = 0.7\n"
                 "iterations = 2\n"
                 "cv_folds = 5\n"
                 "cv_grid_size = 20\n"
                 "permutations = 99\n");
    fs::path out = scratch / "study";
    RunResult r = run("power-study --config " + (scratch / "study.conf").string() +
                          " --seed 4 --output " + out.string(),
                      scratch);
    INFO(r.err);
    REQUIRE(r.status == 0);

    CHECK(fs::exists(out / "power_table.csv"));
    CHECK(fs::exists(out / "variance_shares.csv"));
    CHECK(fs::exists(out / "power_curves.svg"));
    CHECK(fs::exists(out / "heatmap_E_wang_r20p7.csv"));
    CHECK(fs::exists(out / "heatmap_E_wang_r20p7.svg"));
    CHECK(fs::exists(out / "study_config.json"));
    int reps = 0;
    for (const auto& e : fs::directory_iterator(out / "replicates"))
        if (e.path().extension() == ".json") ++reps;
    CHECK(reps == 2);

    std::string table = slurp(out / "power_table.csv");
    CHECK(table.rfind("setting,model,method,", 0) == 0);
    CHECK(table.find("E,wang,ggee,0.7,") != std::string::npos);

    // Re-aggregating the persisted replicates reproduces the table bytes.
    fs::path again = scratch / "again";
    RunResult rr = run("report --input " + out.string() + " --output " + again.string(), scratch);
    INFO(rr.err);
    REQUIRE(rr.status == 0);
    CHECK(slurp(again / "power_table.csv") == table);
    CHECK(slurp(again / "heatmap_E_wang_r20p7.csv") == slurp(out / "heatmap_E_wang_r20p7.csv"));

    RunResult rmiss = run("report --input " + (scratch / "void").string(), scratch);
    CHECK(rmiss.status == 2);
    CHECK(rmiss.err.find("study_config.json") != std::string::npos);
}
