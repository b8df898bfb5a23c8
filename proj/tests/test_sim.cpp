#include <cmath>

#include "doctest.h"
#include "npiv/error.hpp"
#include "npiv/sim.hpp"

using namespace npiv;
using namespace npiv::sim;

namespace {

ExperimentSpec small_spec() {
    ExperimentSpec s;
    s.n_values = {200};
    s.xi_values = {0.5};
    s.c_values = {0.1};
    s.replications = 40;
    s.master_seed = 5;
    return s;
}

}  // namespace

TEST_CASE("single replication gives a 0/1 rate") {
    ExperimentSpec s = small_spec();
    s.replications = 1;
    const auto m = run_size(s);
    REQUIRE(m.cells.size() == 1);
    const double r = m.cells[0].rejection_rate;
    CHECK((r == 0.0 || r == 1.0));
    CHECK(m.cells[0].se == 0.0);
}

TEST_CASE("cell layout, standard errors and determinism") {
    ExperimentSpec s = small_spec();
    s.c_values = {0.01, 1.0};
    s.alphas = {0.1, 0.05};
    s.kfactors = {2, 4};
    s.keep_replications = true;
    const auto a = run_size(s);
    CHECK(a.cells.size() == 8);
    CHECK(a.replications.size() == 8 * 40);
    for (const auto& c : a.cells) {
        CHECK(c.rejection_rate >= 0.0);
        CHECK(c.rejection_rate <= 1.0);
        CHECK(c.se == doctest::Approx(std::sqrt(c.rejection_rate * (1 - c.rejection_rate) / c.replications)));
        CHECK(c.avg_J_hat >= 3.0);
        CHECK(c.failures == 0);
    }
    const auto b = run_size(s);
    for (std::size_t k = 0; k < a.cells.size(); ++k) {
        CHECK(a.cells[k].rejection_rate == b.cells[k].rejection_rate);
        CHECK(a.cells[k].avg_J_hat == b.cells[k].avg_J_hat);
    }
    for (std::size_t k = 0; k < a.replications.size(); ++k) CHECK(a.replications[k].max_W == b.replications[k].max_W);

    s.jobs = 3;
    const auto p = run_size(s);
    for (std::size_t k = 0; k < a.replications.size(); ++k) {
        CHECK(a.replications[k].max_W == p.replications[k].max_W);
        CHECK(a.replications[k].J_hat == p.replications[k].J_hat);
    }
}

TEST_CASE("common random numbers across parameter values") {
    ExperimentSpec s = small_spec();
    s.h_family = dgp::HSpec::Family::Sin;
    s.c_values = {0.5, 1.0};
    s.keep_replications = true;
    const auto m = run_size(s);
    for (const auto& r : m.replications) CHECK(r.seed == 5);
    for (std::size_t k = 0; k < 40; ++k) CHECK(m.replications[k].stream == m.replications[40 + k].stream);
}

TEST_CASE("size adjustment calibrates at the null boundary and power grows") {
    ExperimentSpec s = small_spec();
    s.h_family = dgp::HSpec::Family::Sin;
    s.null_name = "decreasing";
    s.mode = Mode::SizeAdjustedPower;
    s.n_values = {300};
    s.xi_values = {0.7};
    s.replications = 200;
    s.kfactors = {4};
    s.c_values = {0.1, 1.0, 2.0};
    const auto m = run_power(s);
    REQUIRE(m.cells.size() == 3);
    CHECK(!m.size_adjustment_rule.empty());
    for (const auto& c : m.cells) {
        REQUIRE(c.adjusted_critical_value.has_value());
        CHECK(*c.null_c == doctest::Approx(0.1));
    }
    // boundary cell: an independent null run sets the cutoff, so the rate is alpha up to noise
    CHECK(std::abs(m.cells[0].rejection_rate - 0.05) < 3 * std::sqrt(0.05 * 0.95 / 200) + 0.01);
    CHECK(m.cells[1].rejection_rate >= m.cells[0].rejection_rate);
    CHECK(m.cells[2].rejection_rate >= m.cells[1].rejection_rate - 2 * m.cells[1].se);
    CHECK(m.cells[2].rejection_rate > 0.8);
}

TEST_CASE("null boundaries") {
    ExperimentSpec s;
    s.h_family = dgp::HSpec::Family::Sin;
    s.cB = 1.0;
    CHECK(s.null_boundary() == doctest::Approx(0.1 / (1 + M_PI)));
    s.h_family = dgp::HSpec::Family::Design2;
    CHECK(s.null_boundary() == doctest::Approx(0.184));
    s.h_family = dgp::HSpec::Family::Quad;
    CHECK(s.null_boundary() == 0.0);
    s.h_family = dgp::HSpec::Family::Mono;
    CHECK_THROWS_AS(s.null_boundary(), InputError);
    s.null_c = 0.5;
    CHECK(s.null_boundary() == 0.5);
    CHECK(null_run_seed(1) != 1);
}

TEST_CASE("spec validation") {
    ExperimentSpec s = small_spec();
    s.replications = 0;
    CHECK_THROWS_AS(s.validate(), InputError);
    s = small_spec();
    s.n_values.clear();
    CHECK_THROWS_AS(s.validate(), InputError);
    s = small_spec();
    s.alphas = {1.5};
    CHECK_THROWS_AS(s.validate(), InputError);
    s = small_spec();
    s.jobs = 0;
    CHECK_THROWS_AS(s.validate(), InputError);
}

TEST_CASE("reproduce entry points") {
    ReproduceOptions o;
    o.replications = 0;
    CHECK_THROWS_AS(reproduce("T1", o), InputError);
    o.replications = 2;
    CHECK_THROWS_AS(reproduce("T9", o), InputError);
    CHECK(table_ids().size() == 6);
}

TEST_CASE("tabulated reference values") {
    auto r = reference_value("T1", "structural", 500, 0.01, 0.5, 2, 0.05);
    REQUIRE(r.has_value());
    CHECK(r->size == doctest::Approx(0.014));
    REQUIRE(r->avg_J.has_value());
    CHECK(*r->avg_J == doctest::Approx(3.31));
    r = reference_value("T1", "structural", 500, 1.0, 0.5, 2, 0.05);
    REQUIRE(r.has_value());
    CHECK(r->size == doctest::Approx(0.004));
    r = reference_value("T2", "structural", 500, 0.0, 0.5, 2, 0.05);
    REQUIRE(r.has_value());
    CHECK(r->size == doctest::Approx(0.023));
    r = reference_value("supp-D", "image_space", 500, 0.0, 0.5, 0, 0.05, "I");
    REQUIRE(r.has_value());
    CHECK(r->size == doctest::Approx(0.050));
    CHECK(!reference_value("T1", "structural", 123, 0.01, 0.5, 2, 0.05).has_value());
}
