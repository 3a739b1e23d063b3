#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "smi/dataset.hpp"
#include "smi/devices.hpp"
#include "smi/eomi.hpp"
#include "smi/omi.hpp"
#include "smi/reference.hpp"
#include "smi/rng.hpp"
#include "smi/stacking.hpp"

namespace smi {

// Generator for the limiting joint law of the scaled stacked statistics: one
// shared draw of (W_j, Z_{j,1..m}) evaluated at every requested index
// multiset. delta is the local-alternative drift (zero under the null).
struct SimConfig {
    int k = 2;
    int m = 10;
    std::vector<double> r;      // k odds of missing information, >= 0
    std::vector<double> delta;  // k drifts; empty means zero
    std::size_t reps = 1;
    std::uint64_t seed = 1;
    int threads = 1;
};

void check_sim_config(const SimConfig& cfg);

std::map<IndexMultiset, double> asymptotic_dS_draw(const SimConfig& cfg, Rng& rng,
                                                   const std::vector<IndexMultiset>& needed);

// distinct multisets a rule needs (pair members, their unions, the full set)
std::vector<IndexMultiset> sets_for_rule(const SelectionRule& rule, int m);

// one replicate of the full moment pipeline on simulated draws
SmiStatistics draw_moment_stats(const SimConfig& cfg, Rng& rng, const SelectionRule& rule, int k);

// ----- experiment output -----

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::string to_csv() const;
    void write(const std::string& path) const;
};

std::string format_cell(double v);

// ----- closed-form oracles -----

// exact mixed moments of the jackknife-limit statistics (first four pair
// indices) as linear forms in R4, R3*R1, R2^2, R1^2*R2, R1^4
struct MomentOracleReport {
    std::array<std::string, 5> names;
    std::array<double, 5> closed_form;
    std::array<double, 5> estimate;
    std::array<double, 5> std_error;
};
std::array<double, 5> lemma_mixed_moment_targets(const std::vector<double>& r, int m);
MomentOracleReport moment_oracle_check(const std::vector<double>& r, int m, std::size_t reps,
                                       std::uint64_t seed, int threads = 1);

// limiting variance of the corrected spread estimator sigma2_hat
double var_sigma_limit(double R1, double R2, double R3, double R4, int k, int m);

// ----- experiments (CSV emitters) -----

struct OmiMseConfig {
    std::vector<double> r_max_grid = {0.1, 0.3, 0.5, 0.7, 0.9};
    std::vector<int> k_grid = {2, 4, 6};
    std::vector<int> m_grid = {10, 20, 30};
    bool with_alternative = true;  // also run delta = 1
    std::size_t reps = 2000;
    std::uint64_t seed = 1;
    int threads = 1;
};
CsvTable experiment_omi_mse(const OmiMseConfig& cfg);

struct SigmaBiasConfig {
    std::vector<int> m_grid = {5, 10};
    std::vector<double> r_max_grid = {0.1, 0.3, 0.5, 0.7, 0.9};
    int k = 4;
    std::size_t reps = 200000;
    std::uint64_t seed = 1;
    int threads = 1;
};
CsvTable experiment_sigma_bias(const SigmaBiasConfig& cfg);

struct SizeAccuracyConfig {
    int k = 4;
    int m = 20;
    std::vector<double> r = {0.0, 0.0, 0.6, 0.6};
    std::vector<double> alphas = {0.01, 0.05};
    std::vector<RefMethod> methods = {RefMethod::T1, RefMethod::T2, RefMethod::T3, RefMethod::T4};
    std::size_t reps = 10000;
    std::size_t N = 10000;  // Monte Carlo size per simulated test
    std::uint64_t seed = 1;
    int threads = 1;
};
CsvTable experiment_size_accuracy(const SizeAccuracyConfig& cfg);

struct EomiPowerConfig {
    std::vector<double> C_grid = {0.0, 0.25, 0.5};
    std::vector<int> k_grid = {5, 10};
    std::vector<int> m_grid = {10, 20, 30};
    std::size_t reps = 10000;
    std::size_t null_N = 200000;  // draws for the 95% critical value
    std::uint64_t seed = 1;
    int threads = 1;
};
CsvTable experiment_eomi_power(const EomiPowerConfig& cfg);

// ----- finite-n regression with posterior-draw imputation -----

// Sequential-normal imputation for a monotone missingness pattern: column 1
// fully observed, each later column regressed on all earlier ones, flat prior
// on coefficients and 1/v on each residual variance. Missing cells are NaN.
ImputationSet gibbs_imputer(const Dataset& incomplete, int m, int n_burn, int n_thin,
                            std::uint64_t seed);

struct RegressionSimConfig {
    int n = 300;
    int p = 5;
    int m = 10;
    double beta0 = 1.0;
    std::vector<double> beta;  // p slopes; empty means all zero (null)
    double sigma2 = 1.0;
    double gamma0 = 0.0, gamma1 = 1.0;  // missingness logit; (1,0) is MCAR
    int n_burn = 200, n_thin = 10;
    std::vector<RefMethod> methods = {RefMethod::T1, RefMethod::T2, RefMethod::T3, RefMethod::T4};
    std::vector<LinRegKind> devices = {LinRegKind::Wald, LinRegKind::Lrt, LinRegKind::RaoScore};
    double alpha = 0.05;
    std::size_t reps = 500;
    std::size_t N = 10000;
    std::uint64_t seed = 1;
    int threads = 1;
};
CsvTable experiment_regression_finite_n(const RegressionSimConfig& cfg);

// ----- clinic / parental-care contingency demo -----

// the fixed observed 2x2x2(+missing) count table driving the demo
struct ClinicTable {
    // counts[b][s] for factor levels a in {A=1, B=0}; missing[b][s] unlabeled
    double a_count[2][2];
    double b_count[2][2];
    double missing[2][2];
};
ClinicTable clinic_demo_table();

struct MengRubinConfig {
    std::vector<int> m_grid = {10, 40, 160, 640};
    std::size_t reps = 64;
    std::size_t eomi_N = 100000;
    std::uint64_t seed = 1;
    int threads = 1;
};
CsvTable meng_rubin_demo(const MengRubinConfig& cfg);

}  // namespace smi
