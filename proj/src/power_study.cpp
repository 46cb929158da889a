#include "epi/power_study.hpp"

#include "epi/rng.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <thread>

namespace epi {

StudySetting parse_setting(int number) {
    if (number < 1 || number > 5)
        throw DataError("setting must be 1..5, got " + std::to_string(number));
    return static_cast<StudySetting>(number);
}

int setting_number(StudySetting s) { return static_cast<int>(s); }

std::string setting_name(StudySetting s, PhenotypeModel m) {
    switch (s) {
        case StudySetting::S1: return m == PhenotypeModel::WangPathway ? "A" : "B";
        case StudySetting::S2: return m == PhenotypeModel::WangPathway ? "C" : "D";
        case StudySetting::S3: return m == PhenotypeModel::WangPathway ? "E" : "F";
        case StudySetting::OME: return "OME";
        case StudySetting::NE: return "NE";
    }
    return "?";
}

EffectConfig setting_effects(StudySetting s, PhenotypeModel m, double r2,
                             double beta, double gamma) {
    EffectConfig e;
    e.model = m;
    e.r2_target = r2;
    const std::vector<int> first_two = {0, 1};
    switch (s) {
        case StudySetting::S1:
            e.mains.push_back({0, first_two, beta});
            e.mains.push_back({1, first_two, beta});
            e.interactions.push_back({0, 1, first_two, first_two, gamma});
            break;
        case StudySetting::S2:
            e.mains.push_back({0, first_two, beta});
            e.mains.push_back({1, first_two, beta});
            e.interactions.push_back({2, 3, first_two, first_two, gamma});
            break;
        case StudySetting::S3:
            e.interactions.push_back({0, 1, first_two, first_two, gamma});
            break;
        case StudySetting::OME:
            e.mains.push_back({0, first_two, beta});
            e.mains.push_back({1, first_two, beta});
            break;
        case StudySetting::NE:
            break;
    }
    return e;
}

std::string causal_pair_id(StudySetting s) {
    // For OME and NE there is no causal pair; the reported frequency tracks
    // the pair of the (would-be) effect genes, i.e. a false-positive rate.
    return s == StudySetting::S2 ? "gene3:gene4" : "gene1:gene2";
}

void StudyConfig::validate() const {
    if (iterations < 1) throw DataError("study needs at least one iteration");
    if (settings.empty()) throw DataError("study needs at least one setting");
    if (methods.empty()) throw DataError("study needs at least one method");
    if (models.empty()) throw DataError("study needs at least one phenotype model");
    if (r2_grid.empty()) throw DataError("study needs a nonempty r2 grid");
    for (double r2 : r2_grid)
        if (!(r2 > 0.0 && r2 < 1.0)) throw DataError("r2 values must be in (0, 1)");
    if (workers < 1) throw DataError("workers must be >= 1");
    if (!realistic && genes < 4)
        throw DataError("the simplified study addresses genes 1..4; need genes >= 4");
}

std::string replicate_to_json(const ReplicateResult& r) {
    nlohmann::json j;
    j["setting"] = r.setting;
    j["model"] = r.model;
    j["method"] = r.method;
    j["r2"] = r.r2;
    j["replicate"] = r.replicate;
    j["failed"] = r.failed;
    if (r.failed) j["error"] = r.error;
    j["causal_pair_found"] = r.causal_pair_found;
    j["realized_r2"] = r.realized_r2;
    j["p_I"] = r.p_I;
    j["p_M"] = r.p_M;
    j["r2_defined"] = r.r2_defined;
    j["significant_groups"] = r.significant_groups;
    return j.dump();
}

ReplicateResult replicate_from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    ReplicateResult r;
    r.setting = j.at("setting").get<std::string>();
    r.model = j.at("model").get<std::string>();
    r.method = j.at("method").get<std::string>();
    r.r2 = j.at("r2").get<double>();
    r.replicate = j.at("replicate").get<int>();
    r.failed = j.at("failed").get<bool>();
    if (j.contains("error")) r.error = j.at("error").get<std::string>();
    r.causal_pair_found = j.at("causal_pair_found").get<bool>();
    r.realized_r2 = j.at("realized_r2").get<double>();
    r.p_I = j.at("p_I").get<double>();
    r.p_M = j.at("p_M").get<double>();
    r.r2_defined = j.at("r2_defined").get<bool>();
    r.significant_groups = j.at("significant_groups").get<std::vector<std::string>>();
    return r;
}

const PowerCell* PowerTable::find(const std::string& setting, const std::string& method,
                                  double r2) const {
    for (const auto& c : cells)
        if (c.setting == setting && c.method == method && std::abs(c.r2 - r2) < 1e-12)
            return &c;
    return nullptr;
}

namespace {

struct CellKey {
    std::string setting, model, method;
    double r2;
    bool operator<(const CellKey& o) const {
        if (setting != o.setting) return setting < o.setting;
        if (model != o.model) return model < o.model;
        if (method != o.method) return method < o.method;
        return r2 < o.r2;
    }
};

// One (setting, model, r2, replicate) simulation job; every method analyzes
// the same dataset.
struct StudyJob {
    StudySetting setting;
    PhenotypeModel model;
    double r2;        // 0 for NE
    int r2_index;     // stable seed component
    int replicate;
    std::string name; // letter code
};

ReplicateResult analyze_one(const StudyConfig& cfg, const StudyJob& job,
                            const SimulatedDataset& ds, const std::string& tracked_pair,
                            const PartialR2& shares, InteractionMethod method) {
    ReplicateResult r;
    r.setting = job.name;
    r.model = phenotype_model_name(job.model);
    r.method = method_name(method);
    r.r2 = job.r2;
    r.replicate = job.replicate;
    r.realized_r2 = realized_r2(ds.q_phi, ds.y.y);
    r.p_I = shares.p_I;
    r.p_M = shares.p_M;
    r.r2_defined = shares.defined;

    DetectConfig dc;
    dc.seed = rng::derive_seed(cfg.seed,
                               {rng::tag("detect"), static_cast<std::uint64_t>(setting_number(job.setting)),
                                static_cast<std::uint64_t>(job.model == PhenotypeModel::WangPathway ? 0 : 1),
                                static_cast<std::uint64_t>(job.r2_index),
                                static_cast<std::uint64_t>(job.replicate)});
    dc.q = cfg.q;
    dc.cv_folds = cfg.cv_folds;
    dc.cv_grid_size = cfg.cv_grid_size;
    dc.permutations = cfg.permutations;
    dc.alpha = cfg.alpha;

    InferenceReport rep = detect(ds.genotypes, ds.index, ds.y, method, dc);
    for (const auto& e : rep.entries)
        if (e.significant) r.significant_groups.push_back(e.group_id);
    const ReportEntry* entry = rep.find(tracked_pair);
    r.causal_pair_found = entry != nullptr && entry->significant;
    return r;
}

}  // namespace

StudyResult run_power_study(const StudyConfig& cfg) {
    cfg.validate();

    // Job list: one entry per dataset, in deterministic order.
    std::vector<StudyJob> jobs;
    for (StudySetting s : cfg.settings) {
        bool model_free = s == StudySetting::OME || s == StudySetting::NE;
        std::vector<PhenotypeModel> models =
            model_free ? std::vector<PhenotypeModel>{cfg.models.front()} : cfg.models;
        std::vector<std::pair<double, int>> r2s;
        if (s == StudySetting::NE) {
            r2s.push_back({0.0, 0});
        } else {
            for (size_t i = 0; i < cfg.r2_grid.size(); ++i)
                r2s.push_back({cfg.r2_grid[i], static_cast<int>(i)});
        }
        for (PhenotypeModel m : models)
            for (auto [r2, r2i] : r2s)
                for (int rep = 0; rep < cfg.iterations; ++rep)
                    jobs.push_back({s, m, r2, r2i, rep, setting_name(s, m)});
    }

    const int n_methods = static_cast<int>(cfg.methods.size());
    std::vector<ReplicateResult> results(jobs.size() * static_cast<size_t>(n_methods));

    // Corpus for the realistic study is built once and shared read-only.
    GenotypeMatrix corpus_g;
    GeneIndex corpus_idx;
    if (cfg.realistic) {
        auto corpus = make_standin_corpus();
        corpus_g = std::move(corpus.first);
        corpus_idx = std::move(corpus.second);
    }

    auto run_job = [&](size_t ji) {
        const StudyJob& job = jobs[ji];
        std::uint64_t data_seed = rng::derive_seed(
            cfg.seed, {rng::tag("dataset"), static_cast<std::uint64_t>(setting_number(job.setting)),
                       static_cast<std::uint64_t>(job.model == PhenotypeModel::WangPathway ? 0 : 1),
                       static_cast<std::uint64_t>(job.r2_index),
                       static_cast<std::uint64_t>(job.replicate)});
        SimulatedDataset ds;
        std::string tracked_pair;
        PartialR2 shares;
        bool sim_ok = true;
        std::string sim_error;
        try {
            EffectConfig effects =
                setting_effects(job.setting, job.model, job.r2 > 0.0 ? job.r2 : 0.5,
                                cfg.beta, cfg.gamma);
            if (cfg.realistic) {
                auto [g, idx] = resample_real_genotypes(corpus_g, corpus_idx, cfg.genes,
                                                        rng::derive_seed(data_seed, {rng::tag("genes")}));
                // Resampled genes can be smaller than the simplified-study
                // genes, so keep only the causal SNP offsets the drawn gene
                // actually has (a 1-SNP causal gene keeps its single SNP).
                auto clamp_snps = [&](std::vector<int>& snps, int gene) {
                    std::vector<int> kept;
                    for (int s : snps)
                        if (s < idx.at(gene).size) kept.push_back(s);
                    snps = std::move(kept);
                };
                for (auto& m : effects.mains) clamp_snps(m.causal_snps, m.gene);
                for (auto& e : effects.interactions) {
                    clamp_snps(e.snps_r, e.gene_r);
                    clamp_snps(e.snps_s, e.gene_s);
                }
                ds = attach_phenotype(g, idx, effects, data_seed);
            } else {
                GenotypeSimConfig gc;
                gc.n = cfg.n;
                gc.genes = cfg.genes;
                gc.snps_per_gene = cfg.snps_per_gene;
                gc.rho = cfg.rho;
                gc.maf_low = cfg.maf_low;
                gc.maf_high = cfg.maf_high;
                gc.causal_maf = cfg.causal_maf;
                gc.seed = data_seed;
                for (const auto& m : effects.mains)
                    for (int snp : m.causal_snps)
                        gc.causal_columns.push_back(m.gene * cfg.snps_per_gene + snp);
                for (const auto& e : effects.interactions) {
                    for (int snp : e.snps_r)
                        gc.causal_columns.push_back(e.gene_r * cfg.snps_per_gene + snp);
                    for (int snp : e.snps_s)
                        gc.causal_columns.push_back(e.gene_s * cfg.snps_per_gene + snp);
                }
                ds = simulate_dataset(gc, effects);
            }
            // Tracked pair: the causal interaction pair, or the main-effect
            // pair for OME/NE (a false-positive frequency).
            int pos_r = 0, pos_s = 1;
            if (job.setting == StudySetting::S2) { pos_r = 2; pos_s = 3; }
            std::string id_a = ds.index.at(pos_r).id, id_b = ds.index.at(pos_s).id;
            tracked_pair = std::min(id_a, id_b) + ":" + std::max(id_a, id_b);
            shares = partial_r2(ds.y, ds.genotypes, ds.index, ds.truth);
        } catch (const std::exception& e) {
            sim_ok = false;
            sim_error = e.what();
        }

        for (int k = 0; k < n_methods; ++k) {
            size_t slot = ji * static_cast<size_t>(n_methods) + static_cast<size_t>(k);
            if (!sim_ok) {
                ReplicateResult r;
                r.setting = job.name;
                r.model = phenotype_model_name(job.model);
                r.method = method_name(cfg.methods[static_cast<size_t>(k)]);
                r.r2 = job.r2;
                r.replicate = job.replicate;
                r.failed = true;
                r.error = sim_error;
                results[slot] = std::move(r);
                continue;
            }
            try {
                results[slot] = analyze_one(cfg, job, ds, tracked_pair, shares,
                                            cfg.methods[static_cast<size_t>(k)]);
            } catch (const std::exception& e) {
                ReplicateResult r;
                r.setting = job.name;
                r.model = phenotype_model_name(job.model);
                r.method = method_name(cfg.methods[static_cast<size_t>(k)]);
                r.r2 = job.r2;
                r.replicate = job.replicate;
                r.failed = true;
                r.error = e.what();
                results[slot] = std::move(r);
            }
        }
    };

    if (cfg.workers <= 1 || jobs.size() <= 1) {
        for (size_t ji = 0; ji < jobs.size(); ++ji) run_job(ji);
    } else {
        std::atomic<size_t> next{0};
        int nthreads = std::min<int>(cfg.workers, static_cast<int>(jobs.size()));
        std::vector<std::thread> pool;
        pool.reserve(static_cast<size_t>(nthreads));
        for (int t = 0; t < nthreads; ++t)
            pool.emplace_back([&] {
                for (;;) {
                    size_t ji = next.fetch_add(1);
                    if (ji >= jobs.size()) return;
                    run_job(ji);
                }
            });
        for (auto& t : pool) t.join();
    }

    return aggregate_replicates(cfg, std::move(results));
}

StudyResult aggregate_replicates(const StudyConfig& cfg,
                                 std::vector<ReplicateResult> replicates) {
    StudyResult out;
    out.config = cfg;

    std::map<CellKey, std::vector<const ReplicateResult*>> cells;
    for (const auto& r : replicates)
        cells[{r.setting, r.model, r.method, r.r2}].push_back(&r);

    // Preserve first-appearance order of cells.
    std::vector<CellKey> order;
    std::set<std::string> seen;
    for (const auto& r : replicates) {
        std::ostringstream key;
        key << r.setting << '\t' << r.model << '\t' << r.method << '\t' << r.r2;
        if (seen.insert(key.str()).second) order.push_back({r.setting, r.model, r.method, r.r2});
    }

    for (const auto& key : order) {
        const auto& members = cells[key];
        PowerCell cell;
        cell.setting = key.setting;
        cell.model = key.model;
        cell.method = key.method;
        cell.r2 = key.r2;
        int ok = 0, detected = 0, fails = 0, defined = 0;
        double sum_pi = 0.0, sum_pm = 0.0, sum_r2 = 0.0;
        for (const ReplicateResult* r : members) {
            if (r->failed) {
                ++fails;
                continue;
            }
            ++ok;
            if (r->causal_pair_found) ++detected;
            sum_r2 += r->realized_r2;
            if (r->r2_defined) {
                ++defined;
                sum_pi += r->p_I;
                sum_pm += r->p_M;
            }
        }
        cell.iterations = ok;
        cell.detected = detected;
        cell.failures = fails;
        // In the realistic study gene identities differ per replicate, so no
        // single id describes the tracked pair.
        if (!cfg.realistic)
            cell.tracked_pair =
                (key.setting == "C" || key.setting == "D") ? "gene3:gene4" : "gene1:gene2";
        cell.power = ok > 0 ? static_cast<double>(detected) / ok : 0.0;
        cell.mean_p_I = defined > 0 ? sum_pi / defined : 0.0;
        cell.mean_p_M = defined > 0 ? sum_pm / defined : 0.0;
        cell.mean_realized_r2 = ok > 0 ? sum_r2 / ok : 0.0;
        if (fails > 0) {
            std::ostringstream os;
            os << "cell " << key.setting << "/" << key.model << "/" << key.method << "/r2="
               << key.r2 << ": " << fails << " of " << members.size() << " replicates failed";
            if (fails * 10 > static_cast<int>(members.size()))
                os << " (over 10%; cell unreliable)";
            out.warnings.push_back(os.str());
        }
        out.table.cells.push_back(std::move(cell));
    }

    // Heatmaps: per (setting, model, r2), variables x methods frequency.
    std::map<std::string, DiscoveryHeatmap> maps;
    std::vector<std::string> map_order;
    std::vector<std::string> method_names;
    for (InteractionMethod m : cfg.methods) method_names.push_back(method_name(m));
    for (const auto& r : replicates) {
        if (r.failed) continue;
        std::ostringstream key;
        key << r.setting << '\t' << r.model << '\t' << r.r2;
        if (!maps.count(key.str())) {
            DiscoveryHeatmap h;
            h.setting = r.setting;
            h.model = r.model;
            h.r2 = r.r2;
            h.methods = method_names;
            maps.emplace(key.str(), std::move(h));
            map_order.push_back(key.str());
        }
    }
    // Variable list: enumerate from config for the simplified study; in
    // realistic mode gene identities vary per replicate, so variables are the
    // union of everything that ever reached significance.
    std::vector<std::string> fixed_vars;
    if (!cfg.realistic) {
        for (int a = 1; a <= cfg.genes; ++a) fixed_vars.push_back("gene" + std::to_string(a));
        for (int a = 1; a <= cfg.genes; ++a)
            for (int b = a + 1; b <= cfg.genes; ++b)
                fixed_vars.push_back("gene" + std::to_string(a) + ":gene" + std::to_string(b));
    }
    for (const auto& mk : map_order) {
        DiscoveryHeatmap& h = maps[mk];
        std::vector<std::string> vars = fixed_vars;
        if (cfg.realistic) {
            std::set<std::string> u;
            for (const auto& r : replicates) {
                if (r.failed || r.setting != h.setting || r.model != h.model ||
                    std::abs(r.r2 - h.r2) > 1e-12)
                    continue;
                for (const auto& g : r.significant_groups) u.insert(g);
            }
            vars.assign(u.begin(), u.end());
        }
        h.variables = vars;
        std::map<std::string, int> var_row;
        for (size_t i = 0; i < vars.size(); ++i) var_row[vars[i]] = static_cast<int>(i);
        std::map<std::string, int> method_col;
        for (size_t i = 0; i < h.methods.size(); ++i) method_col[h.methods[i]] = static_cast<int>(i);
        Matrix counts = Matrix::Zero(static_cast<int>(vars.size()),
                                     static_cast<int>(h.methods.size()));
        int iterations = 0;
        std::set<int> reps_seen;
        for (const auto& r : replicates) {
            if (r.failed || r.setting != h.setting || r.model != h.model ||
                std::abs(r.r2 - h.r2) > 1e-12)
                continue;
            if (!method_col.count(r.method)) continue;
            reps_seen.insert(r.replicate);
            for (const auto& g : r.significant_groups) {
                auto it = var_row.find(g);
                if (it != var_row.end()) counts(it->second, method_col[r.method]) += 1.0;
            }
        }
        iterations = static_cast<int>(reps_seen.size());
        h.iterations = iterations;
        h.freq = iterations > 0 ? Matrix(counts / iterations)
                                : Matrix(Matrix::Zero(counts.rows(), counts.cols()));
        out.heatmaps.push_back(h);
    }

    out.replicates = std::move(replicates);
    return out;
}

std::string power_table_csv(const PowerTable& t) {
    std::ostringstream os;
    os.precision(12);
    os << "setting,model,method,r2,iterations,detected,failures,power,mean_p_I,mean_p_M,"
          "mean_realized_r2\n";
    for (const auto& c : t.cells) {
        os << c.setting << ',' << c.model << ',' << c.method << ',' << c.r2 << ','
           << c.iterations << ',' << c.detected << ',' << c.failures << ',' << c.power << ','
           << c.mean_p_I << ',' << c.mean_p_M << ',' << c.mean_realized_r2 << "\n";
    }
    return os.str();
}

std::string heatmap_csv(const DiscoveryHeatmap& h) {
    std::ostringstream os;
    os.precision(12);
    os << "variable";
    for (const auto& m : h.methods) os << ',' << m;
    os << "\n";
    for (size_t v = 0; v < h.variables.size(); ++v) {
        os << h.variables[v];
        for (size_t m = 0; m < h.methods.size(); ++m)
            os << ',' << h.freq(static_cast<int>(v), static_cast<int>(m));
        os << "\n";
    }
    return os.str();
}

std::string variance_share_csv(const PowerTable& t) {
    // p_I / p_M are properties of the data, identical across methods; pool
    // one row per (setting, model, r2).
    std::ostringstream os;
    os.precision(6);
    os << "setting,model,r2,mean_p_I_percent,mean_p_M_percent\n";
    std::set<std::string> done;
    for (const auto& c : t.cells) {
        std::ostringstream key;
        key << c.setting << '\t' << c.model << '\t' << c.r2;
        if (!done.insert(key.str()).second) continue;
        os << c.setting << ',' << c.model << ',' << c.r2 << ',' << 100.0 * c.mean_p_I << ','
           << 100.0 * c.mean_p_M << "\n";
    }
    return os.str();
}

}  // namespace epi
