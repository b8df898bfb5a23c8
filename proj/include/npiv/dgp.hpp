#pragma once

#include <cstdint>
#include <string>

#include "npiv/npiv.hpp"
#include "npiv/randdist.hpp"

namespace npiv::dgp {

enum class Design { I, II, Multivariate };

/// Structural function family and its parameters.
struct HSpec {
    enum class Family { Mono, Sin, Design2, Quad };
    Family family = Family::Mono;
    double c0 = 1.0;  // Mono
    double cA = 0.0;  // Sin, Design2, Quad
    double cB = 0.0;  // Sin

    static HSpec mono(double c0);
    static HSpec sin(double cA, double cB);
    static HSpec design2(double cA);
    static HSpec quad(double cA);
    double operator()(double x) const;
    std::string describe() const;
};

struct DesignConfig {
    Design design = Design::I;
    int n = 500;
    double xi = 0.5;
    HSpec h;
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;
};

/// Decreasing in x; c0 <= 0 is an input error.
double h_mono(double c0, double x);
double h_sin(double cA, double cB, double x);
/// x/5 + x^2 + cA sin(2 pi x)
double h_design2(double cA, double x);
/// -x/5 + cA x^2
double h_quad(double cA, double x);

/// Largest cA at which h_sin(cA, cB, .) is still weakly decreasing on [0, 1].
double sin_null_boundary(double cB);

/// A generated sample together with the configuration that produced it.
struct GeneratedData {
    Dataset data;
    DesignConfig config;
};

GeneratedData gen_design1(const DesignConfig& cfg);
GeneratedData gen_design2(const DesignConfig& cfg);
GeneratedData gen_multivariate(const DesignConfig& cfg);
/// Dispatch on cfg.design.
GeneratedData generate(const DesignConfig& cfg);

std::string to_string(Design d);
Design design_from_string(const std::string& s);

}  // namespace npiv::dgp
