#include "smi/reference.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/fisher_f.hpp>
#include <cmath>
#include <json.hpp>
#include <limits>
#include <stdexcept>

#include "smi/parallel.hpp"
#include "smi/rng.hpp"

namespace smi {

RefMethod ref_method_from_string(const std::string& s) {
    if (s == "t1") return RefMethod::T1;
    if (s == "t2") return RefMethod::T2;
    if (s == "t3") return RefMethod::T3;
    if (s == "t4") return RefMethod::T4;
    if (s == "t4-gamma") return RefMethod::T4Gamma;
    if (s == "f2m") return RefMethod::FTwoMoment;
    throw std::invalid_argument("unknown reference method: " + s);
}

std::string to_string(RefMethod m) {
    switch (m) {
        case RefMethod::T1: return "t1";
        case RefMethod::T2: return "t2";
        case RefMethod::T3: return "t3";
        case RefMethod::T4: return "t4";
        case RefMethod::T4Gamma: return "t4-gamma";
        case RefMethod::FTwoMoment: return "f2m";
    }
    return "?";
}

double d_hat_statistic(double d_full, double mu_hat, int k, int m) {
    if (k < 1 || m < 2) throw std::invalid_argument("d_hat_statistic: need k >= 1, m >= 2");
    const double mu = std::max(0.0, mu_hat);
    return d_full / (static_cast<double>(k) * (1.0 + (1.0 + 1.0 / m) * mu));
}

std::vector<double> sample_T4(const std::vector<double>& r_hat, int m, std::size_t N,
                              std::uint64_t seed, int threads) {
    if (m < 2) throw std::invalid_argument("sample_T4: m >= 2 required");
    if (N < 1) throw std::invalid_argument("sample_T4: N >= 1 required");
    const std::size_t k = r_hat.size();
    if (k == 0) throw std::invalid_argument("sample_T4: k >= 1 required");
    for (double r : r_hat)
        if (!(r >= 0.0)) throw std::invalid_argument("sample_T4: weights must be >= 0");
    const double inf = 1.0 + 1.0 / m;
    const double mdf = static_cast<double>(m - 1);
    std::vector<double> out(N);
    parallel_for(N, threads, [&](std::size_t i) {
        Rng rng = Rng::substream(seed, i);
        double num = 0.0, den = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            const double z = rng.normal();
            num += (1.0 + inf * r_hat[j]) * z * z;
        }
        for (std::size_t j = 0; j < k; ++j)
            den += inf * r_hat[j] * rng.chi2(mdf) / mdf;
        out[i] = (num / static_cast<double>(k)) / (1.0 + den / static_cast<double>(k));
    });
    return out;
}

std::vector<double> sample_T4_gamma(double mu_hat, double sigma2_hat, int k, int m, std::size_t N,
                                    std::uint64_t seed, int threads) {
    if (m < 3) throw std::invalid_argument("sample_T4_gamma: m >= 3 required");
    if (k < 1 || N < 1) throw std::invalid_argument("sample_T4_gamma: bad k or N");
    const double mu = std::max(0.0, mu_hat);
    const double s2 = std::max(0.0, sigma2_hat);
    const bool degenerate = s2 < 1e-12 || mu == 0.0;
    const double shape = degenerate ? 0.0 : mu * mu / s2;
    const double rate = degenerate ? 0.0 : mu / s2;
    const double inf = 1.0 + 1.0 / m;
    const double mdf = static_cast<double>(m - 1);
    std::vector<double> out(N);
    parallel_for(N, threads, [&](std::size_t i) {
        Rng rng = Rng::substream(seed, i);
        std::vector<double> xi(static_cast<std::size_t>(k), mu);
        if (!degenerate)
            for (auto& x : xi) x = rng.gamma(shape, rate);
        double num = 0.0, den = 0.0;
        for (int j = 0; j < k; ++j) {
            const double z = rng.normal();
            num += (1.0 + inf * xi[static_cast<std::size_t>(j)]) * z * z;
        }
        for (int j = 0; j < k; ++j)
            den += inf * xi[static_cast<std::size_t>(j)] * rng.chi2(mdf) / mdf;
        out[i] = (num / k) / (1.0 + den / k);
    });
    return out;
}

double pvalue_T1(double D_hat, int k) {
    if (k < 1) throw std::invalid_argument("pvalue_T1: k >= 1 required");
    if (D_hat <= 0.0) return 1.0;
    boost::math::chi_squared chi(static_cast<double>(k));
    return boost::math::cdf(boost::math::complement(chi, static_cast<double>(k) * D_hat));
}

namespace {

double t2_denominator_df(double mu, int k, int m) {
    const double Km = static_cast<double>(k) * (m - 1);
    const double a = (1.0 + 1.0 / m) * mu;
    if (a <= 0.0) return std::numeric_limits<double>::infinity();
    if (Km > 4.0) {
        const double b = 1.0 + (1.0 - 2.0 / Km) / a;
        return 4.0 + (Km - 4.0) * b * b;
    }
    const double b = 1.0 + 1.0 / a;
    return (m - 1) * b * b * (k + 1.0) / 2.0;
}

}  // namespace

double pvalue_T2(double D_hat, double mu_hat, int k, int m) {
    if (k < 1 || m < 2) throw std::invalid_argument("pvalue_T2: need k >= 1, m >= 2");
    if (D_hat <= 0.0) return 1.0;
    const double mu = std::max(0.0, mu_hat);
    const double q = t2_denominator_df(mu, k, m);
    if (!std::isfinite(q)) return pvalue_T1(D_hat, k);  // F(k, inf) limit
    boost::math::fisher_f f(static_cast<double>(k), q);
    return boost::math::cdf(boost::math::complement(f, D_hat));
}

double pvalue_T3(double D_hat, double mu_hat, double sigma2_hat, int k) {
    if (k < 1) throw std::invalid_argument("pvalue_T3: k >= 1 required");
    const double mu = std::max(0.0, mu_hat);
    const double s2 = std::max(0.0, sigma2_hat);
    const double c1 = std::sqrt(1.0 + std::sqrt(s2 / (1.0 + mu * mu)));
    const double c0 = 1.0 - c1;
    if (D_hat <= c0) return 1.0;
    boost::math::chi_squared chi(static_cast<double>(k));
    return boost::math::cdf(boost::math::complement(chi, static_cast<double>(k) * (D_hat - c0) / c1));
}

std::pair<double, double> f_two_moment_params(double mu, double sigma2, int k, int m) {
    if (k < 1 || m < 2) throw std::invalid_argument("f_two_moment_params: need k >= 1, m >= 2");
    const double muc = std::max(0.0, mu);
    const double sd = std::sqrt(std::max(0.0, sigma2));
    const double inf = 1.0 + 1.0 / m;
    const double scale = 1.0 + inf * muc;
    const double zeta1 = inf * sd / scale;
    const double zeta2 = inf * muc / scale;
    const double beta1 = k / (1.0 + zeta1 * zeta1);
    double beta2;
    const double den = zeta2 * zeta2 + zeta1 * zeta1;
    if (den <= 0.0)
        beta2 = 1e6;
    else
        beta2 = std::min(1e6, static_cast<double>(k) * (m - 1) / den);
    return {beta1, beta2};
}

double pvalue_f_two_moment(double D_hat, double mu, double sigma2, int k, int m) {
    if (D_hat <= 0.0) return 1.0;
    const auto [b1, b2] = f_two_moment_params(mu, sigma2, k, m);
    boost::math::fisher_f f(b1, b2);
    return boost::math::cdf(boost::math::complement(f, D_hat));
}

double pvalue_from_samples(double D_hat, const std::vector<double>& replicates,
                           bool add_one_correction) {
    if (replicates.empty()) throw std::invalid_argument("pvalue_from_samples: empty replicate set");
    std::size_t count = 0;
    for (double r : replicates)
        if (r >= D_hat) ++count;
    if (add_one_correction)
        return static_cast<double>(count + 1) / static_cast<double>(replicates.size() + 1);
    return static_cast<double>(count) / static_cast<double>(replicates.size());
}

MiTestResult mi_test_from_provider(const StatProvider& provider, int m, int k,
                                   const ReferenceSpec& spec) {
    const SelectionRule rule = selection_rule(spec.rule, m);
    const SmiStatistics stats = moment_estimates(provider, m, rule, k, spec.threads);
    MiTestResult res;
    res.spec = spec;
    res.k = k;
    res.m = m;
    res.omi = estimate_omi(stats, m, k);
    res.T_values = stats.T_by_pair;
    res.d_full = stats.d_full;
    res.D_hat = d_hat_statistic(stats.d_full, res.omi.mu_hat, k, m);
    const bool needs_sigma = spec.method == RefMethod::T3 || spec.method == RefMethod::T4Gamma ||
                             spec.method == RefMethod::FTwoMoment;
    if (needs_sigma && m < 3)
        throw std::invalid_argument("m >= 3 required for sigma^2-dependent reference method " +
                                    to_string(spec.method));
    switch (spec.method) {
        case RefMethod::T1:
            res.p_value = pvalue_T1(res.D_hat, k);
            break;
        case RefMethod::T2:
            res.p_value = pvalue_T2(res.D_hat, res.omi.mu_hat, k, m);
            break;
        case RefMethod::T3:
            res.p_value = pvalue_T3(res.D_hat, res.omi.mu_hat, res.omi.sigma2_hat, k);
            break;
        case RefMethod::T4: {
            const auto reps = sample_T4(res.omi.r_hat, m, spec.N, spec.seed, spec.threads);
            res.p_value = pvalue_from_samples(res.D_hat, reps, spec.add_one_correction);
            break;
        }
        case RefMethod::T4Gamma: {
            const auto reps = sample_T4_gamma(res.omi.mu_hat, res.omi.sigma2_hat, k, m, spec.N,
                                              spec.seed, spec.threads);
            res.p_value = pvalue_from_samples(res.D_hat, reps, spec.add_one_correction);
            break;
        }
        case RefMethod::FTwoMoment:
            res.p_value = pvalue_f_two_moment(res.D_hat, res.omi.mu_hat, res.omi.sigma2_hat, k, m);
            break;
    }
    res.warnings = res.omi.warnings;
    return res;
}

MiTestResult mi_test(const TestDevice& dev, const ImputationSet& imps, const ReferenceSpec& spec) {
    imps.validate();
    return mi_test_from_provider(make_device_provider(dev, imps), imps.m(), dev.k(), spec);
}

std::string to_json_string(const MiTestResult& res, int indent) {
    nlohmann::json j;
    j["method"] = to_string(res.spec.method);
    j["rule"] = to_string(res.spec.rule);
    j["k"] = res.k;
    j["m"] = res.m;
    j["N"] = res.spec.N;
    j["seed"] = res.spec.seed;
    j["D_hat"] = res.D_hat;
    j["p_value"] = res.p_value;
    j["d_full"] = res.d_full;
    j["r_hat"] = res.omi.r_hat;
    j["mu_hat"] = res.omi.mu_hat;
    j["sigma2_hat"] = res.omi.sigma2_hat;
    j["warnings"] = res.warnings;
    return j.dump(indent);
}

std::string to_json_string(const OmiEstimate& est, int indent) {
    nlohmann::json j;
    j["k"] = est.k;
    j["m"] = est.m;
    j["r_hat"] = est.r_hat;
    j["R_hat"] = est.R_hat;
    j["mu_hat"] = est.mu_hat;
    j["sigma2_hat"] = est.sigma2_hat;
    j["sigma2_hat_raw"] = est.sigma2_hat_raw;
    j["sigma2_check_raw"] = est.sigma2_check_raw;
    j["warnings"] = est.warnings;
    return j.dump(indent);
}

std::vector<PvaluePoint> pvalue_function(const DeviceFactory& factory, const ImputationSet& imps,
                                         const ReferenceSpec& spec,
                                         const std::vector<std::vector<double>>& grid) {
    imps.validate();
    std::vector<PvaluePoint> out;
    out.reserve(grid.size());
    for (const auto& theta : grid) {
        PvaluePoint pt;
        pt.theta = theta;
        try {
            auto dev = factory(theta);
            const MiTestResult res = mi_test(*dev, imps, spec);
            pt.p_value = res.p_value;
            pt.ok = true;
        } catch (const std::exception& e) {
            pt.error = e.what();
        }
        out.push_back(std::move(pt));
    }
    return out;
}

}  // namespace smi
