#pragma once

#include <string>
#include <vector>

#include "smi/stacking.hpp"

namespace smi {

// Estimate of the individual odds of missing information r_1..r_k, recovered
// from the SMI moment estimates by inverting the moment map (power sums, then
// the chi-square-mixture moment recursion).
struct OmiEstimate {
    std::vector<double> r_hat;  // sorted descending, eigenvalue moduli
    std::vector<double> R_hat;  // power sums
    double mu_hat = 0.0;
    double sigma2_hat_raw = 0.0;    // may be negative; NaN when m < 3
    double sigma2_hat = 0.0;        // max(0, raw)
    double sigma2_check_raw = 0.0;  // biased estimator, kept for diagnostics
    int m = 0;
    int k = 0;
    std::vector<std::string> warnings;
};

// power sums R_tau = sum_j r_j^tau
std::vector<double> m1_forward(const std::vector<double>& r);

// moments t_tau of the weighted chi-square-1 mixture with weights R
std::vector<double> m2_forward(const std::vector<double>& R);

// algebraic inverse of m2_forward
std::vector<double> m2_inverse(const std::vector<double>& t);

// recovers the k weights from their power sums via the eigenvalues of a
// companion-form matrix; returns moduli sorted descending. k <= 64.
// complex_flag (optional) is set when any eigenvalue is materially non-real.
std::vector<double> m1_inverse(const std::vector<double>& R, bool* complex_flag = nullptr);

// mean and variance summaries of the weights from the first two moments:
// mu = t1/k, the (m-2)-corrected variance estimator, and the biased one.
// The corrected estimator requires m >= 3.
struct MuSigma {
    double mu_hat;
    double sigma2_hat_raw;
    double sigma2_check_raw;
};
MuSigma mu_sigma(double t1, double t2, int m, int k);
double mu_only(double t1, int k);

OmiEstimate estimate_omi(const SmiStatistics& stats, int m, int k);

}  // namespace smi
