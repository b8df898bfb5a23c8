#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "npiv/error.hpp"
#include "npiv/io.hpp"

#ifndef NPIV_VERSION
#define NPIV_VERSION "unknown"
#endif

using namespace npiv;
using io::json;

namespace {

struct CommonFlags {
    std::string config;
    std::optional<double> alpha;
    std::optional<std::string> null_name;
    std::optional<std::string> basis;
    std::optional<std::string> grid;
    std::optional<int> kfactor;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> test_kind;
    std::optional<std::string> knots;
    bool cap_grid = false;
    std::string format = "text";
    std::string out;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--config", f.config, "JSON run configuration (flags override its values)");
    cmd->add_option("--alpha", f.alpha, "Nominal level");
    cmd->add_option("--null", f.null_name, "decreasing|increasing|convex|concave|linear|quadratic");
    cmd->add_option("--basis", f.basis, "bspline2|bspline3|cosine|power");
    cmd->add_option("--grid", f.grid, "dyadic or a comma-separated list such as 3,4,5");
    cmd->add_option("--kfactor", f.kfactor, "c in K = cJ");
    cmd->add_option("--seed", f.seed, "Seed recorded in the report (falls back to NPIV_SEED)");
    cmd->add_option("--test-kind", f.test_kind, "structural|image_space");
    cmd->add_option("--knots", f.knots, "equispaced|quantile");
    cmd->add_flag("--cap-grid", f.cap_grid, "Drop explicit grid values above the empirical upper bound");
    cmd->add_option("--format", f.format, "json|csv|text")->check(CLI::IsMember({"json", "csv", "text"}));
    cmd->add_option("--out", f.out, "Write the report to this path instead of stdout");
}

std::optional<std::uint64_t> env_seed() {
    const char* s = std::getenv("NPIV_SEED");
    if (!s || !*s) return std::nullopt;
    try {
        std::size_t pos = 0;
        const unsigned long long v = std::stoull(s, &pos);
        if (pos != std::string(s).size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw InputError(std::string("NPIV_SEED is not a non-negative integer: '") + s + "'");
    }
}

io::RunConfig resolve(const CommonFlags& f) {
    io::RunConfig c;
    bool seed_from_file = false;
    if (!f.config.empty()) {
        c = io::read_run_config_file(f.config);
        std::ifstream in(f.config);
        seed_from_file = json::parse(in).contains("seed");
    }
    if (f.alpha) c.alpha = *f.alpha;
    if (f.null_name) c.null_name = *f.null_name;
    if (f.basis) c.basis = *f.basis;
    if (f.grid) c.grid = *f.grid;
    if (f.kfactor) c.kfactor = *f.kfactor;
    if (f.test_kind) c.test_kind = *f.test_kind;
    if (f.knots) c.knots = *f.knots;
    if (f.cap_grid) c.cap_grid = true;
    if (f.seed) {
        c.seed = *f.seed;
    } else if (!seed_from_file) {
        if (auto e = env_seed()) c.seed = *e;
    }
    c.validate();
    return c;
}

void emit(const std::string& out, const std::string& text) {
    if (out.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream os(out, std::ios::binary);
    if (!os) throw InputError("cannot write '" + out + "'");
    os << text;
}

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag, std::uint64_t dflt) {
    if (flag) return *flag;
    if (auto e = env_seed()) return *e;
    return dflt;
}

std::vector<int> parse_int_list(const std::string& s) {
    return s.empty() ? std::vector<int>{} : io::parse_grid_list(s);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Adaptive tests of shape and parametric restrictions in nonparametric IV models"};
    app.set_version_flag("--version", NPIV_VERSION);
    app.require_subcommand(1);

    CommonFlags tf;
    std::string test_data;
    auto* test = app.add_subcommand("test", "Run the adaptive test on a CSV data set");
    test->add_option("data", test_data, "CSV file with columns y, x (or x1..), w (or w1..), optional mu")->required();
    add_common(test, tf);

    CommonFlags cf;
    std::string cs_data, cs_candidates;
    auto* cs = app.add_subcommand("cs", "Check candidate functions against the confidence set");
    cs->add_option("data", cs_data, "CSV data file")->required();
    cs->add_option("candidates", cs_candidates, "JSON candidate file")->required();
    add_common(cs, cf);

    std::string spec_file, sim_out, sim_format = "text";
    std::optional<int> sim_reps, sim_jobs;
    std::optional<std::uint64_t> sim_seed;
    auto* simulate = app.add_subcommand("simulate", "Run a Monte Carlo experiment from a JSON spec");
    simulate->add_option("spec", spec_file, "Experiment spec (JSON)")->required();
    simulate->add_option("--reps", sim_reps, "Replications per cell");
    simulate->add_option("--seed", sim_seed, "Master seed (falls back to NPIV_SEED)");
    simulate->add_option("--jobs", sim_jobs, "Worker threads");
    simulate->add_option("--out", sim_out, "Output prefix: writes PREFIX.json and PREFIX.csv");
    simulate->add_option("--format", sim_format, "json|csv|text for stdout")->check(CLI::IsMember({"json", "csv", "text"}));

    std::string table_id, rep_out, rep_format = "text", rep_n;
    int rep_reps = 1000, rep_jobs = 1;
    std::optional<std::uint64_t> rep_seed;
    auto* reproduce = app.add_subcommand("reproduce", "Re-run a reference simulation table or figure");
    reproduce->add_option("table", table_id, "T1|T2|F1|F2|supp-C|supp-D")->required();
    reproduce->add_option("--reps", rep_reps, "Replications per cell");
    reproduce->add_option("--seed", rep_seed, "Master seed (falls back to NPIV_SEED)");
    reproduce->add_option("--jobs", rep_jobs, "Worker threads");
    reproduce->add_option("--n", rep_n, "Restrict to these sample sizes, e.g. 500,1000");
    reproduce->add_option("--out", rep_out, "Write the result to this path instead of stdout");
    reproduce->add_option("--format", rep_format, "json|csv|text")->check(CLI::IsMember({"json", "csv", "text"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (*test) {
            const io::RunConfig cfg = resolve(tf);
            const Dataset data = io::read_csv_file(test_data);
            const TestConfig tc = cfg.to_test_config();
            const NullSpec null = NullSpec::from_string(cfg.null_name);
            const TestReport rep = cfg.test_kind == "image_space" ? image_space_test(data, null, cfg.alpha, tc)
                                                                  : adaptive_test(data, null, cfg.alpha, tc);
            std::ostringstream os;
            if (tf.format == "json") os << io::to_json(rep, cfg, data.n()).dump(2) << "\n";
            else if (tf.format == "csv") io::write_csv(os, rep);
            else io::write_text(os, rep);
            emit(tf.out, os.str());
        } else if (*cs) {
            const io::RunConfig cfg = resolve(cf);
            if (cfg.test_kind != "structural") throw InputError("confidence sets use the structural test only");
            const Dataset data = io::read_csv_file(cs_data);
            const auto cands = io::read_candidates_file(cs_candidates, cfg);
            const TestConfig tc = cfg.to_test_config();
            const NullSpec null = NullSpec::from_string(cfg.null_name);
            std::vector<std::pair<Candidate, CsResult>> results;
            for (const auto& h : cands) results.emplace_back(h, cs_contains(h, data, null, cfg.alpha, tc));
            std::ostringstream os;
            if (cf.format == "json") os << io::to_json(results, cfg, data.n()).dump(2) << "\n";
            else if (cf.format == "csv") io::write_csv(os, results);
            else io::write_text(os, results);
            emit(cf.out, os.str());
        } else if (*simulate) {
            std::ifstream in(spec_file);
            if (!in) throw InputError("cannot open spec file '" + spec_file + "'");
            json j;
            try {
                j = json::parse(in);
            } catch (const json::exception& e) {
                throw InputError("spec file '" + spec_file + "': " + e.what());
            }
            sim::ExperimentSpec spec = io::experiment_spec_from_json(j);
            if (sim_reps) spec.replications = *sim_reps;
            if (sim_jobs) spec.jobs = *sim_jobs;
            if (sim_seed) spec.master_seed = *sim_seed;
            else if (!j.contains("seed")) spec.master_seed = resolve_seed(std::nullopt, spec.master_seed);
            spec.validate();
            const auto t0 = std::chrono::steady_clock::now();
            const sim::McSummary sum = sim::run(spec);
            const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            json out = io::to_json(sum);
            out["metadata"] = {{"version", NPIV_VERSION}, {"seed", spec.master_seed}, {"elapsed_seconds", secs}};
            if (!sim_out.empty()) {
                emit(sim_out + ".json", out.dump(2) + "\n");
                std::ostringstream os;
                io::write_csv(os, sum);
                emit(sim_out + ".csv", os.str());
            }
            std::ostringstream os;
            if (sim_format == "json") os << out.dump(2) << "\n";
            else if (sim_format == "csv") io::write_csv(os, sum);
            else io::write_text(os, sum);
            std::cout << os.str();
        } else if (*reproduce) {
            sim::ReproduceOptions o;
            o.replications = rep_reps;
            o.jobs = rep_jobs;
            o.seed = resolve_seed(rep_seed, o.seed);
            o.n_values = parse_int_list(rep_n);
            if (rep_jobs < 1) throw InputError("jobs must be >= 1");
            const sim::ReproResult res = sim::reproduce(table_id, o);
            std::ostringstream os;
            if (rep_format == "json") os << io::to_json(res).dump(2) << "\n";
            else if (rep_format == "csv") io::write_csv(os, res);
            else io::write_text(os, res);
            emit(rep_out, os.str());
        }
    } catch (const InputError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return 2;
    } catch (const json::exception& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return 2;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
