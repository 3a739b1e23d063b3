#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "smi/omi.hpp"

namespace smi {

// Test of equal odds of missing information (H0': the k odds are all equal),
// calibrated against a simulated pivotal null that depends only on (k, m).
struct EomiResult {
    double Q_hat = 0.0;
    double p_value = 1.0;
    double critical_value_95 = 0.0;
    int k = 0;
    int m = 0;
    std::size_t N = 0;
    std::uint64_t seed = 0;
};

// sqrt(m) * sigma2_raw / mu^2, zero when mu == 0. Raw (possibly negative)
// variance estimate on purpose: the pivotal null also takes negative values.
double q_statistic(double mu_hat, double sigma2_hat_raw, int m);

// N draws of the pivotal null statistic
std::vector<double> sample_Q0(int k, int m, std::size_t N, std::uint64_t seed, int threads = 1);

// interpolated order-statistic quantile (in-place partial sort)
double empirical_quantile(std::vector<double>& v, double q);

EomiResult eomi_test(double mu_hat, double sigma2_hat_raw, int k, int m, std::size_t N,
                     std::uint64_t seed, int threads = 1);
EomiResult eomi_test(const OmiEstimate& est, std::size_t N, std::uint64_t seed, int threads = 1);

std::string to_json_string(const EomiResult& res, int indent = 2);

}  // namespace smi
