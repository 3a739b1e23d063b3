#include "smi/omi.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace smi {

std::vector<double> m1_forward(const std::vector<double>& r) {
    if (r.empty()) throw std::invalid_argument("m1_forward: k must be >= 1");
    const std::size_t k = r.size();
    // extended precision internally: downstream root recovery is sensitive to
    // last-digit noise in the higher-order sums
    std::vector<long double> R(k, 0.0L);
    for (double rj : r) {
        long double pw = 1.0L;
        for (std::size_t tau = 0; tau < k; ++tau) {
            pw *= rj;
            R[tau] += pw;
        }
    }
    return {R.begin(), R.end()};
}

std::vector<double> m2_forward(const std::vector<double>& R) {
    if (R.empty()) throw std::invalid_argument("m2_forward: k must be >= 1");
    const std::size_t k = R.size();
    // t_tau = sum_{j=1}^{tau} (tau-1)!/(tau-j)! * 2^{j-1} * R_j * t_{tau-j}, t_0 = 1
    std::vector<long double> t(k + 1, 0.0L);
    t[0] = 1.0L;
    for (std::size_t tau = 1; tau <= k; ++tau) {
        long double fall = 1.0L;  // (tau-1)!/(tau-j)! for the current j
        long double pow2 = 1.0L;  // 2^{j-1}
        long double acc = 0.0L;
        for (std::size_t j = 1; j <= tau; ++j) {
            acc += fall * pow2 * static_cast<long double>(R[j - 1]) * t[tau - j];
            fall *= static_cast<long double>(tau - j);
            pow2 *= 2.0L;
        }
        t[tau] = acc;
    }
    return {t.begin() + 1, t.end()};
}

std::vector<double> m2_inverse(const std::vector<double>& t_in) {
    if (t_in.empty()) throw std::invalid_argument("m2_inverse: k must be >= 1");
    const std::size_t k = t_in.size();
    std::vector<long double> t(k + 1, 0.0L);
    t[0] = 1.0L;
    std::copy(t_in.begin(), t_in.end(), t.begin() + 1);
    std::vector<long double> R(k, 0.0L);
    std::vector<long double> fact(k + 1, 1.0L);
    for (std::size_t i = 1; i <= k; ++i) fact[i] = fact[i - 1] * static_cast<long double>(i);
    std::vector<long double> pow2(k + 1, 1.0L);
    for (std::size_t i = 1; i <= k; ++i) pow2[i] = pow2[i - 1] * 2.0L;
    for (std::size_t tau = 1; tau <= k; ++tau) {
        long double acc = t[tau] / (fact[tau - 1] * pow2[tau - 1]);
        for (std::size_t j = 1; j < tau; ++j)
            acc -= t[tau - j] * R[j - 1] / (fact[tau - j] * pow2[tau - j]);
        R[tau - 1] = acc;
    }
    return {R.begin(), R.end()};
}

std::vector<double> m1_inverse(const std::vector<double>& R, bool* complex_flag) {
    if (R.empty()) throw std::invalid_argument("m1_inverse: k must be >= 1");
    const std::size_t k = R.size();
    if (k > 64) throw std::invalid_argument("m1_inverse: k > 64 not supported");
    if (complex_flag) *complex_flag = false;
    if (k == 1) return {std::abs(R[0])};

    // companion-form matrix: identity block above, coefficients a_1..a_k in the
    // last row, recovered from the power sums by Newton-style recursion
    std::vector<double> a(k, 0.0);
    a[k - 1] = R[0];
    for (std::size_t j = 2; j <= k; ++j) {
        double acc = R[j - 1];
        for (std::size_t i = 1; i <= j - 1; ++i) acc -= R[i - 1] * a[k - j + i];
        a[k - j] = acc / static_cast<double>(j);
    }
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(k),
                                              static_cast<Eigen::Index>(k));
    for (std::size_t i = 0; i + 1 < k; ++i)
        A(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i + 1)) = 1.0;
    for (std::size_t j = 0; j < k; ++j)
        A(static_cast<Eigen::Index>(k - 1), static_cast<Eigen::Index>(j)) = a[j];

    Eigen::EigenSolver<Eigen::MatrixXd> solver(A, /*computeEigenvectors=*/false);
    if (solver.info() != Eigen::Success)
        throw std::runtime_error("m1_inverse: eigenvalue solver did not converge");
    std::vector<double> r(k);
    bool any_complex = false;
    for (std::size_t j = 0; j < k; ++j) {
        const auto ev = solver.eigenvalues()(static_cast<Eigen::Index>(j));
        r[j] = std::abs(ev);
        if (std::abs(ev.imag()) > 1e-6 * (1.0 + std::abs(ev.real()))) any_complex = true;
    }
    if (complex_flag) *complex_flag = any_complex;

    // polish the moduli with Newton steps on the power-sum system; the eigen
    // solve alone can lose digits when roots nearly coincide (which also shows
    // up as a spurious complex-conjugate pair). Steps that fail to shrink the
    // residual are rejected, so truly complex spectra are left untouched.
    {
        const Eigen::Index ki = static_cast<Eigen::Index>(k);
        Eigen::VectorXd x(ki), target(ki);
        for (std::size_t j = 0; j < k; ++j) {
            x(static_cast<Eigen::Index>(j)) = r[j];
            target(static_cast<Eigen::Index>(j)) = R[j];
        }
        auto residual = [&](const Eigen::VectorXd& v) {
            Eigen::VectorXd res = -target;
            for (Eigen::Index j = 0; j < ki; ++j) {
                double pw = 1.0;
                for (Eigen::Index tau = 0; tau < ki; ++tau) {
                    pw *= v(j);
                    res(tau) += pw;
                }
            }
            return res;
        };
        Eigen::VectorXd f = residual(x);
        for (int it = 0; it < 8 && f.lpNorm<Eigen::Infinity>() > 0.0; ++it) {
            Eigen::MatrixXd J(ki, ki);
            for (Eigen::Index j = 0; j < ki; ++j) {
                double pw = 1.0;
                for (Eigen::Index tau = 0; tau < ki; ++tau) {
                    J(tau, j) = static_cast<double>(tau + 1) * pw;
                    pw *= x(j);
                }
            }
            const Eigen::VectorXd step = J.colPivHouseholderQr().solve(f);
            if (!step.allFinite()) break;
            const Eigen::VectorXd cand = x - step;
            const Eigen::VectorXd fc = residual(cand);
            if (!(fc.lpNorm<Eigen::Infinity>() < f.lpNorm<Eigen::Infinity>())) break;
            x = cand;
            f = fc;
        }
        // keep the modulus convention if a step crossed zero
        for (std::size_t j = 0; j < k; ++j) r[j] = std::abs(x(static_cast<Eigen::Index>(j)));
    }
    std::sort(r.begin(), r.end(), std::greater<>());
    return r;
}

double mu_only(double t1, int k) {
    if (k < 1) throw std::invalid_argument("k must be >= 1");
    return t1 / static_cast<double>(k);
}

MuSigma mu_sigma(double t1, double t2, int m, int k) {
    if (k < 1) throw std::invalid_argument("k must be >= 1");
    if (m < 3) throw std::invalid_argument("variance summary requires m >= 3");
    const double kd = k, md = m;
    MuSigma out{};
    out.mu_hat = t1 / kd;
    out.sigma2_hat_raw =
        ((kd * (md - 1.0) + 2.0) * t2 - (md - 1.0) * (kd + 2.0) * t1 * t1) /
        (2.0 * kd * kd * (md - 2.0));
    out.sigma2_check_raw = t2 / (2.0 * kd) - (2.0 + kd) * t1 * t1 / (2.0 * kd * kd);
    return out;
}

OmiEstimate estimate_omi(const SmiStatistics& stats, int m, int k) {
    if (static_cast<int>(stats.t_hat.size()) < k)
        throw std::invalid_argument("estimate_omi: need t_hat up to order k");
    OmiEstimate out;
    out.m = m;
    out.k = k;
    std::vector<double> t(stats.t_hat.begin(), stats.t_hat.begin() + k);
    out.R_hat = m2_inverse(t);
    bool complex_flag = false;
    out.r_hat = m1_inverse(out.R_hat, &complex_flag);
    if (complex_flag)
        out.warnings.push_back("companion matrix has materially complex eigenvalues; "
                               "moment estimates are noisy");
    for (double rj : out.r_hat)
        if (rj > 10.0) {
            out.warnings.push_back("an estimated odds of missing information exceeds 10");
            break;
        }
    out.mu_hat = mu_only(t[0], k);
    if (k == 1) {
        // a single weight has zero spread by definition
        out.sigma2_hat_raw = 0.0;
        out.sigma2_check_raw = 0.0;
        out.sigma2_hat = 0.0;
    } else if (m >= 3) {
        const MuSigma ms = mu_sigma(t[0], t[1], m, k);
        out.sigma2_hat_raw = ms.sigma2_hat_raw;
        out.sigma2_check_raw = ms.sigma2_check_raw;
        out.sigma2_hat = std::max(0.0, ms.sigma2_hat_raw);
    } else {
        out.sigma2_hat_raw = std::numeric_limits<double>::quiet_NaN();
        out.sigma2_check_raw = std::numeric_limits<double>::quiet_NaN();
        out.sigma2_hat = 0.0;
        out.warnings.push_back("m < 3: variance of the odds is not estimable");
    }
    return out;
}

}  // namespace smi
