#pragma once

// CLI invocations whose output is pinned under tests/golden. Shared by the unit
// tests and the acceptance binary. Regenerate with KPARAB_UPDATE_GOLDEN=1 test_cli.

#include <string>
#include <vector>

struct GoldenCase {
    std::string name;  // file stem in tests/golden
    std::string ext;   // "json" or "csv"
    std::vector<std::string> args;
    int exit_code;
};

inline std::vector<GoldenCase> golden_cases(const std::string& source_dir) {
    const std::string samples = source_dir + "/samples/";
    std::vector<GoldenCase> c{
        {"classify_sol3_Q", "json", {"classify", "--builtin", "sol3:Q", "--t", "0"}, 1},
        {"classify_sol3_Q_t2", "json", {"classify", "--builtin", "sol3:Q", "--t", "2"}, 1},
        {"classify_sol3_R", "json", {"classify", "--builtin", "sol3:R", "--t", "0"}, 0},
        {"classify_sol3_R_conformal", "json", {"classify", "--builtin", "sol3:R", "--t", "-1", "--route", "conformal"}, 0},
        {"classify_sol3_cmc", "json", {"classify", "--builtin", "sol3:cmc"}, 0},
        {"classify_umbrella_tau1", "json", {"classify", "--builtin", "ekt:umbrella", "--kappa", "0", "--tau", "1"}, 1},
        {"classify_umbrella_tau3", "json", {"classify", "--builtin", "ekt:umbrella", "--kappa", "0", "--tau", "3"}, 1},
        {"classify_umbrella_tau1_conformal", "json",
         {"classify", "--builtin", "ekt:umbrella", "--tau", "1", "--route", "conformal"}, 1},
        {"classify_umbrella_as_printed", "json",
         {"classify", "--builtin", "ekt:umbrella", "--tau", "1", "--mu-constant", "as-printed"}, 1},
        {"classify_umbrella_euclidean", "json", {"classify", "--builtin", "ekt:umbrella", "--tau", "0"}, 0},
        {"classify_umbrella_hyperbolic_base", "json", {"classify", "--builtin", "ekt:umbrella", "--kappa", "-1", "--tau", "1"}, 1},
        {"classify_berger", "json", {"classify", "--builtin", "ekt:umbrella", "--kappa", "1", "--tau", "1"}, 0},
        {"classify_penafiel_H0", "json", {"classify", "--builtin", "penafiel", "--H", "0", "--tau", "1"}, 1},
        {"classify_penafiel_H05", "json", {"classify", "--builtin", "penafiel", "--H", "0.5", "--tau", "1"}, 0},
        {"models", "json", {"models"}, 0},
        {"tabulate_sol3_S", "csv", {"tabulate", "--builtin", "sol3:S", "--range", "-5", "5", "--samples", "21"}, 0},
        {"tabulate_mu_exp", "csv", {"tabulate", "--spec", samples + "mu_exp.json", "--range", "-1", "1", "--samples", "11"}, 0},
        {"tabulate_mu_const", "csv", {"tabulate", "--spec", samples + "mu_const.json", "--range", "0", "2", "--samples", "3"}, 0},
        {"verify_laplacian", "json", {"verify", "laplacian", "--mu", "exp(x)", "--f", "exp(-x)", "--x", "0", "--h", "1e-3"}, 0},
        {"verify_witness", "json", {"verify", "witness", "--mu", "1+x^2"}, 0},
        {"verify_curvature", "json", {"verify", "curvature", "--mu", "1+x^2", "--range", "-5", "5"}, 0},
        {"verify_walk_small", "json",
         {"verify", "walk", "--mu", "x", "--a", "1", "--b", "7.389056", "--x0", "2.718282", "--n", "2000", "--seed", "42"}, 0},
    };
    const char* thetas[][2] = {{"pi6", "0.5235987755982988"}, {"pi4", "0.7853981633974483"}, {"pi3", "1.0471975511965976"}};
    for (const auto& th : thetas)
        for (const char* a : {"0", "1"})
            c.push_back({std::string("classify_sol3_S_") + th[0] + "_a" + a, "json",
                         {"classify", "--builtin", "sol3:S", "--theta0", th[1], "--a", a}, 1});
    const std::pair<const char*, int> sample_verdicts[] = {
        {"mu_const", 0},      {"mu_exp", 1},          {"catenoid", 0},           {"flat_torus", 0},
        {"sol3_minimal_pi4", 1}, {"heisenberg_umbrella", 1}, {"custom_exponential", 1}, {"tabulated_lorentzian", 1}};
    for (const auto& [stem, code] : sample_verdicts)
        c.push_back({std::string("classify_sample_") + stem, "json", {"classify", "--spec", samples + stem + ".json"}, code});
    return c;
}
