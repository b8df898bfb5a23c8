#include "npiv/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "npiv/error.hpp"

namespace npiv::io {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    out.push_back(trim(cur));
    return out;
}

std::string where(const std::string& source, std::size_t line) { return source + ":" + std::to_string(line) + ": "; }

double parse_double(const std::string& cell, const std::string& source, std::size_t line, const std::string& col) {
    if (cell.empty()) throw InputError(where(source, line) + "missing value in column '" + col + "'");
    const char* b = cell.data();
    const char* e = b + cell.size();
    if (*b == '+') ++b;
    double v = 0.0;
    const auto res = std::from_chars(b, e, v);
    if (res.ec != std::errc() || res.ptr != e)
        throw InputError(where(source, line) + "cannot parse '" + cell + "' in column '" + col + "' as a number");
    if (!std::isfinite(v)) throw InputError(where(source, line) + "non-finite value in column '" + col + "'");
    return v;
}

/// Indices of columns prefix, or prefix1..prefixd.
std::vector<int> indexed_columns(const std::map<std::string, int>& cols, const std::string& prefix,
                                 const std::string& source) {
    std::vector<int> out;
    const bool plain = cols.count(prefix) > 0;
    for (int k = 1;; ++k) {
        auto it = cols.find(prefix + std::to_string(k));
        if (it == cols.end()) break;
        out.push_back(it->second);
    }
    if (plain && !out.empty())
        throw InputError(where(source, 1) + "header mixes '" + prefix + "' with '" + prefix + "1', ...");
    if (plain) out.push_back(cols.at(prefix));
    if (out.empty()) throw InputError(where(source, 1) + "header needs a '" + prefix + "' column");
    return out;
}

const char* kind_name(sim::TestKind k) { return k == sim::TestKind::Structural ? "structural" : "image_space"; }

template <class T>
T get_or(const json& j, const char* key, T dflt) {
    auto it = j.find(key);
    if (it == j.end()) return dflt;
    return it->get<T>();
}

void reject_unknown_keys(const json& j, const std::vector<std::string>& allowed, const std::string& what) {
    if (!j.is_object()) throw InputError(what + " must be a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end())
            throw InputError(what + ": unknown key '" + it.key() + "'");
}

json vec_json(const Vector& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(number(v(i)));
    return a;
}

std::string fmt(double v, int prec = 6) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (std::isnan(v)) return "nan";
    std::ostringstream os;
    os << std::setprecision(prec) << v;
    return os.str();
}

std::string fmt17(double v) { return fmt(v, 17); }

std::string join(const std::vector<int>& v, const char* sep = " ") {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? sep : "") + std::to_string(v[i]);
    return s;
}

}  // namespace

json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

Dataset read_csv(std::istream& in, const std::string& source) {
    std::string line;
    std::size_t lineno = 0;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        ++lineno;
        if (lineno == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
        if (!trim(line).empty()) {
            header = split(line);
            break;
        }
    }
    if (header.empty()) throw InputError(source + ": empty file (a header row is required)");
    std::map<std::string, int> cols;
    for (std::size_t c = 0; c < header.size(); ++c) {
        const std::string& h = header[c];
        if (h.empty()) throw InputError(where(source, lineno) + "empty column name");
        if (!cols.emplace(h, static_cast<int>(c)).second)
            throw InputError(where(source, lineno) + "duplicate column '" + h + "'");
    }
    if (!cols.count("y")) throw InputError(where(source, lineno) + "header needs a 'y' column");
    const std::vector<int> xc = indexed_columns(cols, "x", source);
    const std::vector<int> wc = indexed_columns(cols, "w", source);
    const bool has_mu = cols.count("mu") > 0;
    std::vector<char> used(header.size(), 0);
    used[static_cast<std::size_t>(cols.at("y"))] = 1;
    if (has_mu) used[static_cast<std::size_t>(cols.at("mu"))] = 1;
    for (int i : xc) used[static_cast<std::size_t>(i)] = 1;
    for (int i : wc) used[static_cast<std::size_t>(i)] = 1;
    for (std::size_t c = 0; c < header.size(); ++c)
        if (!used[c]) throw InputError(where(source, lineno) + "unexpected column '" + header[c] + "'");
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        const auto cells = split(line);
        if (cells.size() != header.size())
            throw InputError(where(source, lineno) + "expected " + std::to_string(header.size()) + " fields, found " +
                             std::to_string(cells.size()));
        std::vector<double> row(cells.size());
        for (std::size_t c = 0; c < cells.size(); ++c) row[c] = parse_double(cells[c], source, lineno, header[c]);
        rows.push_back(std::move(row));
    }
    const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
    if (n < 20) throw InputError(source + ": need at least 20 data rows, found " + std::to_string(n));
    Dataset d;
    d.y.resize(n);
    d.x.resize(n, static_cast<Eigen::Index>(xc.size()));
    d.w.resize(n, static_cast<Eigen::Index>(wc.size()));
    if (has_mu) d.mu.resize(n);
    const int yi = cols.at("y");
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& r = rows[static_cast<std::size_t>(i)];
        d.y(i) = r[static_cast<std::size_t>(yi)];
        for (std::size_t k = 0; k < xc.size(); ++k) d.x(i, static_cast<Eigen::Index>(k)) = r[static_cast<std::size_t>(xc[k])];
        for (std::size_t k = 0; k < wc.size(); ++k) d.w(i, static_cast<Eigen::Index>(k)) = r[static_cast<std::size_t>(wc[k])];
        if (has_mu) {
            d.mu(i) = r[static_cast<std::size_t>(cols.at("mu"))];
            if (d.mu(i) < 0) throw InputError(where(source, static_cast<std::size_t>(i) + 2) + "negative weight mu");
        }
    }
    d.validate();
    return d;
}

Dataset read_csv_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open data file '" + path + "'");
    return read_csv(in, path);
}

basis::BasisSpec basis_from_name(const std::string& name, double lo, double hi) {
    if (name == "bspline2") return basis::BasisSpec::bspline(3, 3, lo, hi);
    if (name == "bspline3") return basis::BasisSpec::bspline(4, 4, lo, hi);
    if (name == "cosine") return basis::BasisSpec::cosine(1, lo, hi);
    if (name == "power") return basis::BasisSpec::power(1, lo, hi);
    throw InputError("unknown basis '" + name + "' (expected bspline2|bspline3|cosine|power)");
}

std::vector<int> parse_grid_list(const std::string& s) {
    std::vector<int> out;
    for (const std::string& tok : split(s)) {
        int v = 0;
        const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (tok.empty() || res.ec != std::errc() || res.ptr != tok.data() + tok.size() || v < 1)
            throw InputError("grid must be 'dyadic' or a comma-separated list of positive integers, got '" + s + "'");
        out.push_back(v);
    }
    std::vector<int> sorted = out;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) throw InputError("grid values must be distinct");
    return sorted;
}

void RunConfig::validate() const {
    NullSpec::from_string(null_name);
    if (!(alpha > 0.0 && alpha < 1.0)) throw InputError("alpha must lie in (0, 1)");
    basis_from_name(basis);
    if (grid != "dyadic") parse_grid_list(grid);
    if (kfactor < 1) throw InputError("kfactor must be >= 1");
    sim::test_kind_from_string(test_kind);
    if (!(support_lo < support_hi)) throw InputError("support must satisfy lo < hi");
    if (knots != "equispaced" && knots != "quantile") throw InputError("knots must be equispaced or quantile");
}

TestConfig RunConfig::to_test_config() const {
    validate();
    TestConfig c;
    c.psi = basis_from_name(basis, support_lo, support_hi);
    c.b = c.psi;
    if (knots == "quantile") {
        c.psi.knot_rule = basis::KnotRule::Quantile;
        c.b.knot_rule = basis::KnotRule::Quantile;
    }
    c.kfactor = kfactor;
    if (grid != "dyadic") {
        c.grid_mode = GridMode::Explicit;
        c.explicit_grid = parse_grid_list(grid);
        c.cap_explicit = cap_grid;
    }
    return c;
}

json to_json(const RunConfig& c) {
    return json{{"schema_version", kSchemaVersion},
                {"null", c.null_name},
                {"alpha", c.alpha},
                {"basis", c.basis},
                {"grid", c.grid},
                {"cap_grid", c.cap_grid},
                {"kfactor", c.kfactor},
                {"seed", c.seed},
                {"test_kind", c.test_kind},
                {"support", json::array({c.support_lo, c.support_hi})},
                {"knots", c.knots}};
}

RunConfig run_config_from_json(const json& j) {
    reject_unknown_keys(j, {"schema_version", "null", "alpha", "basis", "grid", "cap_grid", "kfactor", "seed",
                            "test_kind", "support", "knots"},
                        "run config");
    RunConfig c;
    try {
        const int v = get_or<int>(j, "schema_version", kSchemaVersion);
        if (v != kSchemaVersion) throw InputError("unsupported run config schema_version " + std::to_string(v));
        c.null_name = get_or<std::string>(j, "null", c.null_name);
        c.alpha = get_or<double>(j, "alpha", c.alpha);
        c.basis = get_or<std::string>(j, "basis", c.basis);
        if (j.contains("grid")) {
            const json& g = j.at("grid");
            if (g.is_array()) {
                std::string s;
                for (const auto& e : g) s += (s.empty() ? "" : ",") + std::to_string(e.get<int>());
                c.grid = s;
            } else {
                c.grid = g.get<std::string>();
            }
        }
        c.cap_grid = get_or<bool>(j, "cap_grid", c.cap_grid);
        c.kfactor = get_or<int>(j, "kfactor", c.kfactor);
        c.seed = get_or<std::uint64_t>(j, "seed", c.seed);
        c.test_kind = get_or<std::string>(j, "test_kind", c.test_kind);
        if (j.contains("support")) {
            const auto s = j.at("support").get<std::vector<double>>();
            if (s.size() != 2) throw InputError("support must be [lo, hi]");
            c.support_lo = s[0];
            c.support_hi = s[1];
        }
        c.knots = get_or<std::string>(j, "knots", c.knots);
    } catch (const json::exception& e) {
        throw InputError(std::string("run config: ") + e.what());
    }
    c.validate();
    return c;
}

RunConfig read_run_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open config file '" + path + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw InputError("config file '" + path + "': " + e.what());
    }
    return run_config_from_json(j);
}

json to_json(const TestReport& r, const RunConfig& cfg, Eigen::Index n) {
    json grid{{"mode", r.grid.mode == GridMode::Dyadic ? "dyadic" : "explicit"},
              {"j_lower", r.grid.j_lower},
              {"j_min", r.grid.j_min},
              {"j_max_exponent", r.grid.j_max_exponent},
              {"hard_cap", r.grid.hard_cap},
              {"raw", r.grid.raw},
              {"J_max_hat", r.grid.J_max_hat},
              {"candidates", r.grid.J_list},
              {"fallback", r.grid.fallback}};
    json per = json::array();
    for (const auto& p : r.per_J)
        per.push_back({{"J", p.J},
                       {"K", p.K},
                       {"D", number(p.D)},
                       {"v", number(p.v)},
                       {"shat", number(p.shat)},
                       {"gamma", p.gamma},
                       {"eta", number(p.eta)},
                       {"W", number(p.W)},
                       {"W_is_infinite", std::isinf(p.W)},
                       {"p_value", number(p.p_value)},
                       {"active_set", p.active_set}});
    return json{{"schema_version", kSchemaVersion},
                {"kind", "test_report"},
                {"config", to_json(cfg)},
                {"n", n},
                {"test_kind", r.test_kind},
                {"null", r.null_name},
                {"alpha", r.alpha},
                {"grid", grid},
                {"per_J", per},
                {"decision",
                 {{"reject", r.reject},
                  {"J_reported", r.J_reported},
                  {"J_selected", r.J_selected_set},
                  {"max_W", number(r.max_W())},
                  {"p_value", number(r.p_value)},
                  {"p_threshold", r.p_threshold}}},
                {"restricted_parametric_beta", vec_json(r.restricted_parametric_beta)},
                {"warnings", r.warnings}};
}

void write_text(std::ostream& os, const TestReport& r) {
    os << (r.test_kind == "image_space" ? "image-space test" : "adaptive test") << " of H0: " << r.null_name
       << " at alpha = " << fmt(r.alpha) << "\n";
    os << "candidate grid: {" << join(r.grid.J_list, ", ") << "}, empirical upper bound " << r.grid.J_max_hat
       << (r.grid.fallback ? " (fallback)" : "") << "\n";
    os << std::setw(6) << "J" << std::setw(6) << "K" << std::setw(14) << "W" << std::setw(7) << "gamma"
       << std::setw(12) << "eta" << std::setw(14) << "p-value" << "\n";
    for (const auto& p : r.per_J)
        os << std::setw(6) << p.J << std::setw(6) << p.K << std::setw(14) << fmt(p.W) << std::setw(7) << p.gamma
           << std::setw(12) << fmt(p.eta) << std::setw(14) << fmt(p.p_value) << "\n";
    os << "reject: " << (r.reject ? "yes" : "no") << "\n";
    os << "selected J: {" << join(r.J_selected_set, ", ") << "}\n";
    os << "p-value: " << fmt(r.p_value) << " (compare with alpha/#grid = " << fmt(r.p_threshold) << ")\n";
    for (const auto& w : r.warnings) os << "warning: " << w << "\n";
}

void write_csv(std::ostream& os, const TestReport& r) {
    os << "J,K,W,gamma,eta,D,v,shat,p_value,reject\n";
    for (const auto& p : r.per_J)
        os << p.J << "," << p.K << "," << fmt17(p.W) << "," << p.gamma << "," << fmt17(p.eta) << "," << fmt17(p.D)
           << "," << fmt17(p.v) << "," << fmt17(p.shat) << "," << fmt17(p.p_value) << "," << (p.W > 1.0 ? 1 : 0)
           << "\n";
}

std::vector<Candidate> read_candidates(const json& j, const RunConfig& cfg) {
    std::vector<Candidate> out;
    try {
        reject_unknown_keys(j, {"schema_version", "candidates"}, "candidate file");
        if (!j.contains("candidates") || !j.at("candidates").is_array() || j.at("candidates").empty())
            throw InputError("candidate file needs a non-empty 'candidates' array");
        int idx = 0;
        for (const auto& c : j.at("candidates")) {
            reject_unknown_keys(c, {"name", "type", "basis", "dim", "model", "coefficients"}, "candidate");
            Candidate h;
            h.name = get_or<std::string>(c, "name", "candidate" + std::to_string(idx));
            const std::string type = c.at("type").get<std::string>();
            const auto coef = c.at("coefficients").get<std::vector<double>>();
            h.coefficients = Eigen::Map<const Vector>(coef.data(), static_cast<Eigen::Index>(coef.size()));
            if (!h.coefficients.allFinite()) throw InputError("candidate coefficients must be finite");
            if (type == "coefficients") {
                h.kind = Candidate::Kind::Coefficients;
                const std::string bname = get_or<std::string>(c, "basis", cfg.basis);
                h.spec = basis_from_name(bname, cfg.support_lo, cfg.support_hi).with_dim(c.at("dim").get<int>());
                basis::validate(h.spec);
                if (h.spec.dim != h.coefficients.size())
                    throw InputError("candidate '" + h.name + "': dim does not match the number of coefficients");
            } else if (type == "parametric") {
                h.kind = Candidate::Kind::Parametric;
                h.model = parametric_model_from_string(c.at("model").get<std::string>());
            } else {
                throw InputError("candidate type must be 'coefficients' or 'parametric'");
            }
            out.push_back(std::move(h));
            ++idx;
        }
    } catch (const json::exception& e) {
        throw InputError(std::string("candidate file: ") + e.what());
    }
    return out;
}

std::vector<Candidate> read_candidates_file(const std::string& path, const RunConfig& cfg) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open candidate file '" + path + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw InputError("candidate file '" + path + "': " + e.what());
    }
    return read_candidates(j, cfg);
}

json to_json(const std::vector<std::pair<Candidate, CsResult>>& results, const RunConfig& cfg, Eigen::Index n) {
    json arr = json::array();
    for (const auto& [h, r] : results) {
        json per = json::array();
        for (const auto& p : r.per_J)
            per.push_back({{"J", p.J}, {"ratio", number(p.W)}, {"gamma", p.gamma}, {"eta", number(p.eta)}});
        arr.push_back({{"name", h.name},
                       {"contained", r.contained},
                       {"binding_J", r.binding_J},
                       {"max_ratio", number(r.max_ratio)},
                       {"per_J", per}});
    }
    return json{{"schema_version", kSchemaVersion},
                {"kind", "cs_report"},
                {"config", to_json(cfg)},
                {"n", n},
                {"candidates", arr}};
}

void write_text(std::ostream& os, const std::vector<std::pair<Candidate, CsResult>>& results) {
    os << std::left << std::setw(24) << "candidate" << std::right << std::setw(11) << "contained" << std::setw(11)
       << "binding J" << std::setw(14) << "max ratio" << "\n";
    for (const auto& [h, r] : results)
        os << std::left << std::setw(24) << h.name << std::right << std::setw(11) << (r.contained ? "yes" : "no")
           << std::setw(11) << r.binding_J << std::setw(14) << fmt(r.max_ratio) << "\n";
}

void write_csv(std::ostream& os, const std::vector<std::pair<Candidate, CsResult>>& results) {
    os << "name,contained,binding_J,max_ratio\n";
    for (const auto& [h, r] : results)
        os << h.name << "," << (r.contained ? 1 : 0) << "," << r.binding_J << "," << fmt17(r.max_ratio) << "\n";
}

json to_json(const sim::ExperimentSpec& s) {
    const char* fam = "mono";
    switch (s.h_family) {
        case dgp::HSpec::Family::Mono: fam = "mono"; break;
        case dgp::HSpec::Family::Sin: fam = "sin"; break;
        case dgp::HSpec::Family::Design2: fam = "design2"; break;
        case dgp::HSpec::Family::Quad: fam = "quad"; break;
    }
    json j{{"schema_version", kSchemaVersion},
           {"design", dgp::to_string(s.design)},
           {"h", fam},
           {"n", s.n_values},
           {"xi", s.xi_values},
           {"c", s.c_values},
           {"cB", s.cB},
           {"null", s.null_name},
           {"test_kind", kind_name(s.test_kind)},
           {"alpha", s.alphas},
           {"replications", s.replications},
           {"kfactor", s.kfactors},
           {"seed", s.master_seed},
           {"mode", sim::to_string(s.mode)},
           {"grid", s.base.grid_mode == GridMode::Dyadic ? json("dyadic") : json(s.base.explicit_grid)},
           {"cap_grid", s.base.cap_explicit},
           {"jobs", s.jobs},
           {"keep_replications", s.keep_replications}};
    j["null_c"] = s.null_c ? json(*s.null_c) : json(nullptr);
    return j;
}

sim::ExperimentSpec experiment_spec_from_json(const json& j) {
    reject_unknown_keys(j, {"schema_version", "design", "h", "n", "xi", "c", "cB", "null", "test_kind", "alpha",
                            "replications", "kfactor", "seed", "mode", "grid", "cap_grid", "jobs", "keep_replications",
                            "null_c"},
                        "experiment spec");
    sim::ExperimentSpec s;
    try {
        const int v = get_or<int>(j, "schema_version", kSchemaVersion);
        if (v != kSchemaVersion) throw InputError("unsupported experiment spec schema_version " + std::to_string(v));
        s.design = dgp::design_from_string(get_or<std::string>(j, "design", "I"));
        const std::string fam = get_or<std::string>(j, "h", "mono");
        if (fam == "mono") s.h_family = dgp::HSpec::Family::Mono;
        else if (fam == "sin") s.h_family = dgp::HSpec::Family::Sin;
        else if (fam == "design2") s.h_family = dgp::HSpec::Family::Design2;
        else if (fam == "quad") s.h_family = dgp::HSpec::Family::Quad;
        else throw InputError("unknown h family '" + fam + "' (expected mono|sin|design2|quad)");
        s.n_values = get_or<std::vector<int>>(j, "n", s.n_values);
        s.xi_values = get_or<std::vector<double>>(j, "xi", s.xi_values);
        s.c_values = get_or<std::vector<double>>(j, "c", s.c_values);
        s.cB = get_or<double>(j, "cB", s.cB);
        s.null_name = get_or<std::string>(j, "null", s.null_name);
        s.test_kind = sim::test_kind_from_string(get_or<std::string>(j, "test_kind", "structural"));
        s.alphas = get_or<std::vector<double>>(j, "alpha", s.alphas);
        s.replications = get_or<int>(j, "replications", s.replications);
        s.kfactors = get_or<std::vector<int>>(j, "kfactor", s.kfactors);
        s.master_seed = get_or<std::uint64_t>(j, "seed", s.master_seed);
        s.mode = sim::mode_from_string(get_or<std::string>(j, "mode", "size"));
        if (j.contains("grid")) {
            const json& g = j.at("grid");
            if (g.is_string()) {
                if (g.get<std::string>() != "dyadic") {
                    s.base.grid_mode = GridMode::Explicit;
                    s.base.explicit_grid = parse_grid_list(g.get<std::string>());
                }
            } else {
                s.base.grid_mode = GridMode::Explicit;
                s.base.explicit_grid = g.get<std::vector<int>>();
            }
        }
        s.base.cap_explicit = get_or<bool>(j, "cap_grid", false);
        s.jobs = get_or<int>(j, "jobs", s.jobs);
        s.keep_replications = get_or<bool>(j, "keep_replications", s.keep_replications);
        if (j.contains("null_c") && !j.at("null_c").is_null()) s.null_c = j.at("null_c").get<double>();
    } catch (const json::exception& e) {
        throw InputError(std::string("experiment spec: ") + e.what());
    }
    s.validate();
    return s;
}

namespace {

json cell_json(const sim::CellRecord& c) {
    json j{{"n", c.n},
           {"xi", c.xi},
           {"c", c.c},
           {"cB", c.cB},
           {"kfactor", c.kfactor},
           {"alpha", c.alpha},
           {"rejection_rate", c.rejection_rate},
           {"se", c.se},
           {"avg_J_hat", c.avg_J_hat},
           {"replications", c.replications},
           {"failures", c.failures}};
    j["adjusted_critical_value"] = c.adjusted_critical_value ? number(*c.adjusted_critical_value) : json(nullptr);
    j["null_c"] = c.null_c ? json(*c.null_c) : json(nullptr);
    return j;
}

}  // namespace

json to_json(const sim::McSummary& s) {
    json cells = json::array();
    for (const auto& c : s.cells) cells.push_back(cell_json(c));
    json reps = json::array();
    for (const auto& r : s.replications)
        reps.push_back({{"cell", r.cell},
                        {"seed", r.seed},
                        {"stream", r.stream},
                        {"failed", r.failed},
                        {"reject", r.reject},
                        {"J_hat", r.J_hat},
                        {"max_W", number(r.max_W)}});
    return json{{"schema_version", kSchemaVersion},
                {"kind", "mc_summary"},
                {"spec", to_json(s.spec)},
                {"size_adjustment_rule", s.size_adjustment_rule},
                {"cells", cells},
                {"replication_records", reps}};
}

void write_csv(std::ostream& os, const sim::McSummary& s) {
    os << "n,xi,c,cB,kfactor,alpha,rejection_rate,se,avg_J_hat,replications,failures,adjusted_critical_value\n";
    for (const auto& c : s.cells)
        os << c.n << "," << fmt17(c.xi) << "," << fmt17(c.c) << "," << fmt17(c.cB) << "," << c.kfactor << ","
           << fmt17(c.alpha) << "," << fmt17(c.rejection_rate) << "," << fmt17(c.se) << "," << fmt17(c.avg_J_hat)
           << "," << c.replications << "," << c.failures << ","
           << (c.adjusted_critical_value ? fmt17(*c.adjusted_critical_value) : "") << "\n";
}

void write_text(std::ostream& os, const sim::McSummary& s) {
    os << std::setw(6) << "n" << std::setw(7) << "xi" << std::setw(8) << "c" << std::setw(4) << "K" << std::setw(7)
       << "alpha" << std::setw(10) << "rate" << std::setw(9) << "se" << std::setw(9) << "avg J" << "\n";
    for (const auto& c : s.cells)
        os << std::setw(6) << c.n << std::setw(7) << fmt(c.xi) << std::setw(8) << fmt(c.c) << std::setw(3)
           << c.kfactor << "J" << std::setw(7) << fmt(c.alpha) << std::setw(10) << fmt(c.rejection_rate, 4)
           << std::setw(9) << fmt(c.se, 3) << std::setw(9) << fmt(c.avg_J_hat, 3) << "\n";
    if (!s.size_adjustment_rule.empty()) os << "size adjustment: " << s.size_adjustment_rule << "\n";
}

json to_json(const sim::ReproResult& r) {
    json rows = json::array();
    for (const auto& row : r.rows) {
        json j{{"label", row.label}, {"test_kind", row.test_kind}, {"ours", cell_json(row.ours)}};
        if (row.reference) {
            j["reference"] = {{"size", row.reference->size},
                              {"avg_J", row.reference->avg_J ? json(*row.reference->avg_J) : json(nullptr)}};
        } else {
            j["reference"] = nullptr;
        }
        rows.push_back(j);
    }
    return json{{"schema_version", kSchemaVersion}, {"kind", "reproduction"}, {"table", r.table_id},
                {"title", r.title}, {"rows", rows}};
}

void write_csv(std::ostream& os, const sim::ReproResult& r) {
    os << "table,test_kind,n,xi,c,cB,kfactor,alpha,rate,se,avg_J_hat,reference_rate,reference_avg_J\n";
    for (const auto& row : r.rows) {
        const auto& c = row.ours;
        os << r.table_id << "," << row.test_kind << "," << c.n << "," << fmt17(c.xi) << "," << fmt17(c.c) << ","
           << fmt17(c.cB) << "," << c.kfactor << "," << fmt17(c.alpha) << "," << fmt17(c.rejection_rate) << ","
           << fmt17(c.se) << "," << fmt17(c.avg_J_hat) << ","
           << (row.reference ? fmt17(row.reference->size) : "") << ","
           << (row.reference && row.reference->avg_J ? fmt17(*row.reference->avg_J) : "") << "\n";
    }
}

void write_text(std::ostream& os, const sim::ReproResult& r) {
    os << r.table_id << ": " << r.title << "\n";
    os << std::left << std::setw(64) << "cell" << std::right << std::setw(9) << "rate" << std::setw(8) << "se"
       << std::setw(8) << "avg J" << std::setw(11) << "reference" << std::setw(8) << "ref J" << "\n";
    for (const auto& row : r.rows) {
        os << std::left << std::setw(64) << row.label << std::right << std::setw(9)
           << fmt(row.ours.rejection_rate, 3) << std::setw(8) << fmt(row.ours.se, 2) << std::setw(8)
           << fmt(row.ours.avg_J_hat, 3);
        if (row.reference) {
            os << std::setw(11) << fmt(row.reference->size, 3) << std::setw(8)
               << (row.reference->avg_J ? fmt(*row.reference->avg_J, 3) : "-");
        }
        os << "\n";
    }
}

}  // namespace npiv::io
