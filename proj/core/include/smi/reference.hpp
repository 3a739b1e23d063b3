#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "smi/omi.hpp"
#include "smi/stacking.hpp"

namespace smi {

enum class RefMethod { T1, T2, T3, T4, T4Gamma, FTwoMoment };

RefMethod ref_method_from_string(const std::string& s);
std::string to_string(RefMethod m);

struct ReferenceSpec {
    RefMethod method = RefMethod::T4;
    std::size_t N = 10000;
    std::uint64_t seed = 20230816;
    int threads = 1;
    RuleKind rule = RuleKind::Jack;
    bool add_one_correction = false;  // report (count+1)/(N+1) instead of count/N
};

struct MiTestResult {
    double D_hat = 0.0;
    double p_value = 1.0;
    double d_full = 0.0;
    ReferenceSpec spec;
    OmiEstimate omi;
    std::vector<double> T_values;
    std::vector<std::string> warnings;
    int k = 0;
    int m = 0;
};

// test statistic: the full-stack device value calibrated by the mean odds of
// missing information (clamped at zero in the denominator)
double d_hat_statistic(double d_full, double mu_hat, int k, int m);

// Monte Carlo replicates of the reference null for the estimated-odds mixture
// law: ratio of a weighted chi2_1 mixture over a weighted chi2_{m-1} mixture.
std::vector<double> sample_T4(const std::vector<double>& r_hat, int m, std::size_t N,
                              std::uint64_t seed, int threads = 1);

// Same ratio law, but the weights themselves are redrawn per replicate from a
// Gamma law matched to (mu, sigma2); degenerates to fixed weights mu when
// sigma2 underflows.
std::vector<double> sample_T4_gamma(double mu_hat, double sigma2_hat, int k, int m, std::size_t N,
                                    std::uint64_t seed, int threads = 1);

double pvalue_T1(double D_hat, int k);
double pvalue_T2(double D_hat, double mu_hat, int k, int m);
double pvalue_T3(double D_hat, double mu_hat, double sigma2_hat, int k);

// degrees of freedom of the two-moment F approximation (known-poor, exposed
// for comparison studies); second df capped at 1e6
std::pair<double, double> f_two_moment_params(double mu, double sigma2, int k, int m);
double pvalue_f_two_moment(double D_hat, double mu, double sigma2, int k, int m);

double pvalue_from_samples(double D_hat, const std::vector<double>& replicates,
                           bool add_one_correction = false);

// Full pipeline on an abstract statistic provider (used both for real devices
// and for simulated draws).
MiTestResult mi_test_from_provider(const StatProvider& provider, int m, int k,
                                   const ReferenceSpec& spec);
MiTestResult mi_test(const TestDevice& dev, const ImputationSet& imps, const ReferenceSpec& spec);

// flat JSON document, deterministic byte output for fixed inputs
std::string to_json_string(const MiTestResult& res, int indent = 2);
std::string to_json_string(const OmiEstimate& est, int indent = 2);

struct PvaluePoint {
    std::vector<double> theta;
    double p_value = 0.0;
    bool ok = false;
    std::string error;
};

using DeviceFactory = std::function<std::unique_ptr<TestDevice>(const std::vector<double>&)>;

// independent test per grid point; one seed shared across points so the
// confidence-region boundary is not jittered by Monte Carlo noise
std::vector<PvaluePoint> pvalue_function(const DeviceFactory& factory, const ImputationSet& imps,
                                         const ReferenceSpec& spec,
                                         const std::vector<std::vector<double>>& grid);

}  // namespace smi
