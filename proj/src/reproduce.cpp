#include <cstdio>
#include <string>

#include "npiv/error.hpp"
#include "npiv/sim.hpp"

namespace npiv::sim {

namespace {

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

std::vector<int> pick_n(const ReproduceOptions& o, std::vector<int> dflt) {
    return o.n_values.empty() ? dflt : o.n_values;
}

ExperimentSpec base_spec(const ReproduceOptions& o) {
    ExperimentSpec s;
    s.replications = o.replications;
    s.master_seed = o.seed;
    s.jobs = o.jobs;
    s.xi_values = {0.3, 0.5, 0.7};
    return s;
}

void append(ReproResult& res, const McSummary& sum, const std::string& prefix, const std::string& kind,
            const std::string& variant, bool with_reference) {
    for (const CellRecord& c : sum.cells) {
        ReproRow row;
        row.test_kind = kind;
        row.label = prefix + "n=" + std::to_string(c.n) + " c=" + fmt(c.c) + " xi=" + fmt(c.xi);
        if (kind == "structural") row.label += " K=" + std::to_string(c.kfactor) + "J";
        row.label += " alpha=" + fmt(c.alpha);
        row.ours = c;
        if (with_reference) row.reference = reference_value(res.table_id, kind, c.n, c.c, c.xi, c.kfactor, c.alpha, variant);
        res.rows.push_back(std::move(row));
    }
}

}  // namespace

std::vector<std::string> table_ids() { return {"T1", "T2", "F1", "F2", "supp-C", "supp-D"}; }

ReproResult reproduce(const std::string& id, const ReproduceOptions& o) {
    if (o.replications < 1) throw InputError("replications must be >= 1");
    ReproResult res;
    res.table_id = id;
    if (id == "T1") {
        res.title = "Monotonicity (decreasing null), design I: empirical size";
        ExperimentSpec s = base_spec(o);
        s.h_family = dgp::HSpec::Family::Mono;
        s.c_values = {0.01, 0.1, 1.0};
        s.kfactors = {2, 4};
        s.alphas = {0.10, 0.05, 0.01};
        s.n_values = pick_n(o, {500, 1000, 5000});
        append(res, run_size(s), "", "structural", "", true);
    } else if (id == "T2") {
        res.title = "Linear null, design I: empirical size at 5%";
        ExperimentSpec s = base_spec(o);
        s.h_family = dgp::HSpec::Family::Sin;
        s.c_values = {0.0};
        s.null_name = "linear";
        s.kfactors = {2, 4};
        s.n_values = pick_n(o, {500, 1000, 5000});
        append(res, run_size(s), "", "structural", "", true);
    } else if (id == "F1") {
        res.title = "Monotonicity, design I: size-adjusted power at 5%, K=4J";
        for (double cB : {0.0, 0.5, 1.0}) {
            ExperimentSpec s = base_spec(o);
            s.h_family = dgp::HSpec::Family::Sin;
            s.cB = cB;
            s.xi_values = {0.5, 0.7};
            s.c_values = {0.0, 0.1, 0.3, 0.6, 1.0, 1.5, 2.0};
            s.kfactors = {4};
            s.mode = Mode::SizeAdjustedPower;
            s.n_values = pick_n(o, {500, 1000});
            append(res, run_power(s), "cB=" + fmt(cB) + " ", "structural", "", false);
        }
    } else if (id == "F2") {
        res.title = "Linear null, design I: size-adjusted power at 5%, K=4J";
        for (double cB : {0.0, 0.5, 1.0}) {
            ExperimentSpec s = base_spec(o);
            s.h_family = dgp::HSpec::Family::Sin;
            s.null_name = "linear";
            s.cB = cB;
            s.xi_values = {0.5, 0.7};
            s.c_values = {0.0, 0.1, 0.2, 0.4, 0.6, 0.8, 1.0};
            s.kfactors = {4};
            s.mode = Mode::SizeAdjustedPower;
            s.n_values = pick_n(o, {500});
            append(res, run_power(s), "cB=" + fmt(cB) + " ", "structural", "", false);
        }
    } else if (id == "supp-C") {
        res.title = "Increasing null, design II: empirical size at 5%";
        ExperimentSpec s = base_spec(o);
        s.design = dgp::Design::II;
        s.h_family = dgp::HSpec::Family::Design2;
        s.null_name = "increasing";
        s.c_values = {0.0, 0.1};
        s.kfactors = {2, 4};
        s.n_values = pick_n(o, {500, 1000, 5000});
        append(res, run_size(s), "", "structural", "", true);
    } else if (id == "supp-D") {
        res.title = "Linear null: structural (K=4J) and image-space tests, empirical size at 5%";
        for (auto design : {dgp::Design::I, dgp::Design::Multivariate}) {
            const std::string variant = dgp::to_string(design);
            for (auto kind : {TestKind::Structural, TestKind::ImageSpace}) {
                ExperimentSpec s = base_spec(o);
                s.design = design;
                s.h_family = design == dgp::Design::I ? dgp::HSpec::Family::Sin : dgp::HSpec::Family::Quad;
                s.null_name = "linear";
                s.c_values = {0.0};
                s.kfactors = {4};
                s.test_kind = kind;
                s.n_values = pick_n(o, {500, 1000, 5000});
                append(res, run_size(s), "design=" + variant + " test=" + to_string(kind) + " ", to_string(kind),
                       variant, true);
            }
        }
    } else {
        throw InputError("unknown table id '" + id + "' (expected T1|T2|F1|F2|supp-C|supp-D)");
    }
    return res;
}

}  // namespace npiv::sim
