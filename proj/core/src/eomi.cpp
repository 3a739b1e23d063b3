#include "smi/eomi.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <stdexcept>

#include "smi/parallel.hpp"
#include "smi/rng.hpp"

namespace smi {

double q_statistic(double mu_hat, double sigma2_hat_raw, int m) {
    if (m < 3) throw std::invalid_argument("q_statistic: m >= 3 required");
    if (mu_hat == 0.0) return 0.0;
    return std::sqrt(static_cast<double>(m)) * sigma2_hat_raw / (mu_hat * mu_hat);
}

std::vector<double> sample_Q0(int k, int m, std::size_t N, std::uint64_t seed, int threads) {
    if (m < 3) throw std::invalid_argument("sample_Q0: m >= 3 required");
    if (k < 2) throw std::invalid_argument("sample_Q0: k >= 2 required (vacuous for k = 1)");
    if (N < 1) throw std::invalid_argument("sample_Q0: N >= 1 required");
    const double md = m, kd = k;
    const double c1 = (kd * (md - 1.0) + 2.0) * md / (2.0 * (md - 2.0));
    const double c2 = (md - 1.0) * (kd + 2.0) / (2.0 * (md - 2.0));
    const double sqm = std::sqrt(md);
    std::vector<double> out(N);
    parallel_for(N, threads, [&](std::size_t i) {
        Rng rng = Rng::substream(seed, i);
        double M[1024];  // per-column sums of squared deviations; m <= 1024
        double z[1024];
        if (m > 1024) throw std::invalid_argument("sample_Q0: m > 1024 not supported");
        for (int ell = 0; ell < m; ++ell) M[ell] = 0.0;
        for (int j = 0; j < k; ++j) {
            double mean = 0.0;
            for (int ell = 0; ell < m; ++ell) {
                z[ell] = rng.normal();
                mean += z[ell];
            }
            mean /= md;
            for (int ell = 0; ell < m; ++ell) {
                const double d = z[ell] - mean;
                M[ell] += d * d;
            }
        }
        double s1 = 0.0, s2 = 0.0;
        for (int ell = 0; ell < m; ++ell) {
            s1 += M[ell];
            s2 += M[ell] * M[ell];
        }
        out[i] = sqm * (c1 * s2 / (s1 * s1) - c2);
    });
    return out;
}

double empirical_quantile(std::vector<double>& v, double q) {
    const std::size_t n = v.size();
    const double pos = q * static_cast<double>(n - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(lo), v.end());
    const double vlo = v[lo];
    if (lo + 1 >= n) return vlo;
    const double frac = pos - static_cast<double>(lo);
    if (frac == 0.0) return vlo;
    std::nth_element(v.begin() + static_cast<std::ptrdiff_t>(lo) + 1,
                     v.begin() + static_cast<std::ptrdiff_t>(lo) + 1, v.end());
    return vlo + frac * (v[lo + 1] - vlo);
}

EomiResult eomi_test(double mu_hat, double sigma2_hat_raw, int k, int m, std::size_t N,
                     std::uint64_t seed, int threads) {
    EomiResult res;
    res.k = k;
    res.m = m;
    res.N = N;
    res.seed = seed;
    res.Q_hat = q_statistic(mu_hat, sigma2_hat_raw, m);
    std::vector<double> null = sample_Q0(k, m, N, seed, threads);
    std::size_t count = 0;
    for (double q0 : null)
        if (q0 >= res.Q_hat) ++count;
    res.p_value = static_cast<double>(count) / static_cast<double>(N);
    res.critical_value_95 = empirical_quantile(null, 0.95);
    return res;
}

EomiResult eomi_test(const OmiEstimate& est, std::size_t N, std::uint64_t seed, int threads) {
    return eomi_test(est.mu_hat, est.sigma2_hat_raw, est.k, est.m, N, seed, threads);
}

std::string to_json_string(const EomiResult& res, int indent) {
    nlohmann::json j;
    j["Q_hat"] = res.Q_hat;
    j["p_value"] = res.p_value;
    j["critical_value_95"] = res.critical_value_95;
    j["k"] = res.k;
    j["m"] = res.m;
    j["N"] = res.N;
    j["seed"] = res.seed;
    return j.dump(indent);
}

}  // namespace smi
