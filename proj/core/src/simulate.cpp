#include "smi/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "smi/devices.hpp"
#include "smi/parallel.hpp"

namespace smi {

void check_sim_config(const SimConfig& cfg) {
    if (cfg.k < 1) throw std::invalid_argument("sim config: k >= 1 required");
    if (cfg.m < 2) throw std::invalid_argument("sim config: m >= 2 required");
    if (static_cast<int>(cfg.r.size()) != cfg.k)
        throw std::invalid_argument("sim config: r must have k entries");
    for (double rj : cfg.r)
        if (!(rj >= 0.0)) throw std::invalid_argument("sim config: r entries must be >= 0");
    if (!cfg.delta.empty() && static_cast<int>(cfg.delta.size()) != cfg.k)
        throw std::invalid_argument("sim config: delta must be empty or have k entries");
    if (cfg.reps < 1) throw std::invalid_argument("sim config: reps >= 1 required");
}

std::map<IndexMultiset, double> asymptotic_dS_draw(const SimConfig& cfg, Rng& rng,
                                                   const std::vector<IndexMultiset>& needed) {
    check_sim_config(cfg);
    const int k = cfg.k, m = cfg.m;
    std::vector<double> W(static_cast<std::size_t>(k));
    std::vector<double> Z(static_cast<std::size_t>(k * m));
    for (auto& w : W) w = rng.normal();
    for (auto& z : Z) z = rng.normal();
    std::map<IndexMultiset, double> out;
    for (const auto& S_in : needed) {
        const IndexMultiset S = canonical(S_in);
        check_multiset(S, m);
        if (out.count(S)) continue;
        double val = 0.0;
        for (int j = 0; j < k; ++j) {
            double zbar = 0.0;
            for (int ell : S) zbar += Z[static_cast<std::size_t>(j * m + ell - 1)];
            zbar /= static_cast<double>(S.size());
            const double delta = cfg.delta.empty() ? 0.0 : cfg.delta[static_cast<std::size_t>(j)];
            const double rj = cfg.r[static_cast<std::size_t>(j)];
            const double term = delta + std::sqrt(1.0 + rj) * W[static_cast<std::size_t>(j)] +
                                std::sqrt(rj) * zbar;
            val += term * term;
        }
        out.emplace(S, val);
    }
    return out;
}

std::vector<IndexMultiset> sets_for_rule(const SelectionRule& rule, int m) {
    std::vector<IndexMultiset> out;
    out.push_back(full_set(m));
    for (const auto& [S1, S2] : rule.pairs) {
        out.push_back(canonical(S1));
        out.push_back(canonical(S2));
        out.push_back(canonical(multiset_add(S1, S2)));
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

SmiStatistics draw_moment_stats(const SimConfig& cfg, Rng& rng, const SelectionRule& rule, int k) {
    const auto needed = sets_for_rule(rule, cfg.m);
    const auto draws = asymptotic_dS_draw(cfg, rng, needed);
    StatProvider provider = [&draws](const IndexMultiset& S) { return draws.at(canonical(S)); };
    return moment_estimates(provider, cfg.m, rule, k, 1);
}

// ----- CSV plumbing -----

std::string format_cell(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

std::string CsvTable::to_csv() const {
    std::string out;
    for (std::size_t j = 0; j < header.size(); ++j) {
        if (j) out.push_back(',');
        out += header[j];
    }
    out.push_back('\n');
    for (const auto& row : rows) {
        for (std::size_t j = 0; j < row.size(); ++j) {
            if (j) out.push_back(',');
            out += row[j];
        }
        out.push_back('\n');
    }
    return out;
}

void CsvTable::write(const std::string& path) const {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write '" + path + "'");
    f << to_csv();
}

// ----- closed-form oracles -----

std::array<double, 5> lemma_mixed_moment_targets(const std::vector<double>& r, int m) {
    if (m < 5) throw std::invalid_argument("mixed-moment targets need m >= 5");
    // power sums up to order 4 regardless of k
    std::vector<double> R(4, 0.0);
    for (double rj : r) {
        double pw = 1.0;
        for (int tau = 0; tau < 4; ++tau) {
            pw *= rj;
            R[static_cast<std::size_t>(tau)] += pw;
        }
    }
    const double R1 = R[0], R2 = R[1], R3 = R[2], R4 = R[3];
    const double m0 = static_cast<double>(m - 1);
    const double m02 = m0 * m0, m04 = m02 * m02, m05 = m04 * m0, m06 = m04 * m02,
                 m07 = m06 * m0, m08 = m04 * m04, m09 = m08 * m0;
    const double A = R4, B = R3 * R1, C = R2 * R2, D = R1 * R1 * R2, E = R1 * R1 * R1 * R1;
    std::array<double, 5> t{};
    t[0] = 48 * A + 32 * B + 12 * C + 12 * D + E;
    t[1] = (48 * A + (8 * m02 + 24) * B + 12 * C + (6 * m02 + 6) * D + m02 * E) / m02;
    t[2] = ((32 * m02 + 16) * A + 32 * m02 * B + (4 * m04 + 8) * C + (4 * m04 + 8 * m02) * D +
            m04 * E) /
           m04;
    t[3] = ((-32 * m0 + 16) * A + (16 * m02 - 16 * m0) * B + (4 * m02 + 8) * C +
            (2 * m04 + 10 * m02) * D + m04 * E) /
           m04;
    t[4] = ((48 * m05 - 48 * m04 + 72 * m02 + 144 * m0 + 72) * A + (-32 * m06 + 32 * m05) * B +
            (12 * m05 - 12 * m04) * C + (12 * m07 - 12 * m06) * D + (m09 - m08) * E) /
           (m08 * (m0 - 1.0));
    return t;
}

MomentOracleReport moment_oracle_check(const std::vector<double>& r, int m, std::size_t reps,
                                       std::uint64_t seed, int threads) {
    const int k = static_cast<int>(r.size());
    if (k < 1) throw std::invalid_argument("moment_oracle_check: k >= 1 required");
    if (m < 5) throw std::invalid_argument("moment_oracle_check: m >= 5 required");
    MomentOracleReport rep;
    rep.names = {"E(T1^4)", "E(T1^3 T2)", "E(T1^2 T2^2)", "E(T1^2 T2 T3)", "E(T1 T2 T3 T4)"};
    rep.closed_form = lemma_mixed_moment_targets(r, m);

    const double scale = static_cast<double>(m) / (m - 1.0);
    constexpr std::size_t kChunk = 4096;
    const std::size_t nchunks = (reps + kChunk - 1) / kChunk;
    std::vector<std::array<double, 10>> partial(nchunks);  // 5 sums + 5 sums of squares
    parallel_for(nchunks, threads, [&](std::size_t c) {
        std::array<double, 10> acc{};
        const std::size_t lo = c * kChunk, hi = std::min(reps, lo + kChunk);
        std::vector<double> z(static_cast<std::size_t>(m));
        double T[4];
        for (std::size_t i = lo; i < hi; ++i) {
            Rng rng = Rng::substream(seed, i);
            T[0] = T[1] = T[2] = T[3] = 0.0;
            for (int j = 0; j < k; ++j) {
                double mean = 0.0;
                for (int ell = 0; ell < m; ++ell) {
                    z[static_cast<std::size_t>(ell)] = rng.normal();
                    mean += z[static_cast<std::size_t>(ell)];
                }
                mean /= static_cast<double>(m);
                for (int ell = 0; ell < 4; ++ell) {
                    const double d = z[static_cast<std::size_t>(ell)] - mean;
                    T[ell] += r[static_cast<std::size_t>(j)] * d * d;
                }
            }
            for (double& t : T) t *= scale;
            const double prods[5] = {T[0] * T[0] * T[0] * T[0], T[0] * T[0] * T[0] * T[1],
                                     T[0] * T[0] * T[1] * T[1], T[0] * T[0] * T[1] * T[2],
                                     T[0] * T[1] * T[2] * T[3]};
            for (int q = 0; q < 5; ++q) {
                acc[static_cast<std::size_t>(q)] += prods[q];
                acc[static_cast<std::size_t>(q + 5)] += prods[q] * prods[q];
            }
        }
        partial[c] = acc;
    });
    std::array<double, 10> tot{};
    for (const auto& a : partial)
        for (int q = 0; q < 10; ++q) tot[static_cast<std::size_t>(q)] += a[static_cast<std::size_t>(q)];
    const double n = static_cast<double>(reps);
    for (int q = 0; q < 5; ++q) {
        const double mean = tot[static_cast<std::size_t>(q)] / n;
        const double var = std::max(0.0, tot[static_cast<std::size_t>(q + 5)] / n - mean * mean);
        rep.estimate[static_cast<std::size_t>(q)] = mean;
        rep.std_error[static_cast<std::size_t>(q)] = std::sqrt(var / n);
    }
    return rep;
}

double var_sigma_limit(double R1, double R2, double R3, double R4, int k, int m) {
    const double kd = k, md = m;
    const double k2 = kd * kd, k4 = k2 * k2;
    const double m1 = md - 1.0, m2 = md - 2.0;
    const double m1sq = m1 * m1;
    const double term1 =
        18.0 * (md - 3.0) * (kd + 2.0) * (kd + 2.0) / (k4 * std::pow(m1, 5) * md * m2 * m2) * R4;
    const double c = 2.0 / (k4 * m1sq * m1 * m2);
    const double v1 = 2.0 * (m1sq * (3.0 * md - 7.0) * k2 - 4.0 * m1 * kd - 4.0);
    const double v2 = -8.0 * m1sq * m2 * kd;
    const double v3 = m2 * (m1sq * k2 + 4.0 * m1 * kd + 4.0 * md);
    const double v4 = 4.0 * m1sq * m2;
    return term1 + c * (v1 * R4 + v2 * R3 * R1 + v3 * R2 * R2 + v4 * R1 * R1 * R2);
}

// ----- shared helpers for the experiments -----

namespace {

std::vector<double> evenly_spread(double lo, double hi, int k) {
    std::vector<double> r(static_cast<std::size_t>(k));
    for (int j = 0; j < k; ++j)
        r[static_cast<std::size_t>(j)] =
            k == 1 ? hi : lo + (hi - lo) * static_cast<double>(j) / (k - 1);
    return r;
}

double population_variance(const std::vector<double>& r) {
    const double n = static_cast<double>(r.size());
    const double mean = std::accumulate(r.begin(), r.end(), 0.0) / n;
    double acc = 0.0;
    for (double x : r) acc += (x - mean) * (x - mean);
    return acc / n;
}

std::uint64_t derived_seed(std::uint64_t seed, std::uint64_t salt) {
    return Rng::substream(seed, salt).next_u64();
}

}  // namespace

CsvTable experiment_omi_mse(const OmiMseConfig& cfg) {
    CsvTable out;
    out.header = {"k", "m", "r_max", "hypothesis", "reps", "sum_mse"};
    std::uint64_t cell = 0;
    for (int k : cfg.k_grid)
        for (int m : cfg.m_grid)
            for (double rmax : cfg.r_max_grid)
                for (int hyp = 0; hyp <= (cfg.with_alternative ? 1 : 0); ++hyp) {
                    SimConfig sc;
                    sc.k = k;
                    sc.m = m;
                    sc.r = evenly_spread(0.1, rmax, k);
                    if (hyp == 1) sc.delta.assign(static_cast<std::size_t>(k), 1.0);
                    sc.reps = cfg.reps;
                    const std::uint64_t cellseed = derived_seed(cfg.seed, cell++);
                    std::vector<double> truth = sc.r;
                    std::sort(truth.begin(), truth.end(), std::greater<>());
                    const SelectionRule rule = selection_rule(RuleKind::Jack, m);
                    std::vector<double> per_rep(cfg.reps);
                    parallel_for(cfg.reps, cfg.threads, [&](std::size_t i) {
                        Rng rng = Rng::substream(cellseed, i);
                        const SmiStatistics stats = draw_moment_stats(sc, rng, rule, k);
                        const OmiEstimate est = estimate_omi(stats, m, k);
                        double sum = 0.0;
                        for (int j = 0; j < k; ++j) {
                            const double d = est.r_hat[static_cast<std::size_t>(j)] -
                                             truth[static_cast<std::size_t>(j)];
                            sum += d * d;
                        }
                        per_rep[i] = sum;
                    });
                    const double mse =
                        std::accumulate(per_rep.begin(), per_rep.end(), 0.0) /
                        static_cast<double>(cfg.reps);
                    out.rows.push_back({std::to_string(k), std::to_string(m), format_cell(rmax),
                                        hyp ? "H1" : "H0", std::to_string(cfg.reps),
                                        format_cell(mse)});
                }
    return out;
}

CsvTable experiment_sigma_bias(const SigmaBiasConfig& cfg) {
    CsvTable out;
    out.header = {"m",
                  "k",
                  "r_max",
                  "reps",
                  "bias100_corrected",
                  "se100_corrected",
                  "bias100_plugin",
                  "se100_plugin"};
    std::uint64_t cell = 0;
    for (int m : cfg.m_grid)
        for (double rmax : cfg.r_max_grid) {
            SimConfig sc;
            sc.k = cfg.k;
            sc.m = m;
            sc.r = evenly_spread(0.1, rmax, cfg.k);
            sc.reps = cfg.reps;
            const double truth = population_variance(sc.r);
            const std::uint64_t cellseed = derived_seed(cfg.seed, cell++);
            const SelectionRule rule = selection_rule(RuleKind::Jack, m);
            std::vector<double> d_corr(cfg.reps), d_plug(cfg.reps);
            parallel_for(cfg.reps, cfg.threads, [&](std::size_t i) {
                Rng rng = Rng::substream(cellseed, i);
                const SmiStatistics stats = draw_moment_stats(sc, rng, rule, 2);
                const MuSigma ms = mu_sigma(stats.t_hat[0], stats.t_hat[1], m, cfg.k);
                d_corr[i] = ms.sigma2_hat_raw - truth;
                d_plug[i] = ms.sigma2_check_raw - truth;
            });
            auto mean_se = [&](const std::vector<double>& v) {
                const double n = static_cast<double>(v.size());
                const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
                double ss = 0.0;
                for (double x : v) ss += (x - mean) * (x - mean);
                return std::pair<double, double>{mean, std::sqrt(ss / (n - 1.0) / n)};
            };
            const auto [bc, sc_] = mean_se(d_corr);
            const auto [bp, sp] = mean_se(d_plug);
            out.rows.push_back({std::to_string(m), std::to_string(cfg.k), format_cell(rmax),
                                std::to_string(cfg.reps), format_cell(100.0 * bc),
                                format_cell(100.0 * sc_), format_cell(100.0 * bp),
                                format_cell(100.0 * sp)});
        }
    return out;
}

CsvTable experiment_size_accuracy(const SizeAccuracyConfig& cfg) {
    SimConfig sc;
    sc.k = cfg.k;
    sc.m = cfg.m;
    sc.r = cfg.r;
    sc.reps = cfg.reps;
    check_sim_config(sc);
    const SelectionRule rule = selection_rule(RuleKind::Jack, cfg.m);
    const std::size_t nm = cfg.methods.size();
    std::vector<double> pvals(cfg.reps * nm);
    parallel_for(cfg.reps, cfg.threads, [&](std::size_t i) {
        Rng rng = Rng::substream(cfg.seed, i);
        const SmiStatistics stats = draw_moment_stats(sc, rng, rule, cfg.k);
        const OmiEstimate est = estimate_omi(stats, cfg.m, cfg.k);
        const double D = d_hat_statistic(stats.d_full, est.mu_hat, cfg.k, cfg.m);
        const std::uint64_t inner = rng.next_u64();
        for (std::size_t q = 0; q < nm; ++q) {
            double p = 1.0;
            switch (cfg.methods[q]) {
                case RefMethod::T1: p = pvalue_T1(D, cfg.k); break;
                case RefMethod::T2: p = pvalue_T2(D, est.mu_hat, cfg.k, cfg.m); break;
                case RefMethod::T3:
                    p = pvalue_T3(D, est.mu_hat, est.sigma2_hat, cfg.k);
                    break;
                case RefMethod::T4: {
                    const auto reps4 = sample_T4(est.r_hat, cfg.m, cfg.N, inner, 1);
                    p = pvalue_from_samples(D, reps4);
                    break;
                }
                case RefMethod::T4Gamma: {
                    const auto repsg =
                        sample_T4_gamma(est.mu_hat, est.sigma2_hat, cfg.k, cfg.m, cfg.N, inner, 1);
                    p = pvalue_from_samples(D, repsg);
                    break;
                }
                case RefMethod::FTwoMoment:
                    p = pvalue_f_two_moment(D, est.mu_hat, est.sigma2_hat, cfg.k, cfg.m);
                    break;
            }
            pvals[i * nm + q] = p;
        }
    });
    CsvTable out;
    out.header = {"method", "alpha", "reps", "empirical_size", "relative_error"};
    for (std::size_t q = 0; q < nm; ++q)
        for (double alpha : cfg.alphas) {
            std::size_t rej = 0;
            for (std::size_t i = 0; i < cfg.reps; ++i)
                if (pvals[i * nm + q] <= alpha) ++rej;
            const double rate = static_cast<double>(rej) / static_cast<double>(cfg.reps);
            out.rows.push_back({to_string(cfg.methods[q]), format_cell(alpha),
                                std::to_string(cfg.reps), format_cell(rate),
                                format_cell(std::abs(rate - alpha) / alpha)});
        }
    return out;
}

CsvTable experiment_eomi_power(const EomiPowerConfig& cfg) {
    CsvTable out;
    out.header = {"k", "m", "C", "c_r", "crit95", "reps", "reject_rate"};
    std::uint64_t cell = 0;
    for (int k : cfg.k_grid)
        for (int m : cfg.m_grid) {
            std::vector<double> null_draws =
                sample_Q0(k, m, cfg.null_N, derived_seed(cfg.seed, 1000003 + cell), cfg.threads);
            const double crit = empirical_quantile(null_draws, 0.95);
            for (double C : cfg.C_grid) {
                SimConfig sc;
                sc.k = k;
                sc.m = m;
                sc.r = std::vector<double>(static_cast<std::size_t>(k), 1.0 - C);
                sc.r.back() = 1.0 + (k - 1) * C;
                sc.reps = cfg.reps;
                check_sim_config(sc);
                const std::uint64_t cellseed = derived_seed(cfg.seed, cell++);
                const SelectionRule rule = selection_rule(RuleKind::Jack, m);
                std::vector<char> reject(cfg.reps);
                parallel_for(cfg.reps, cfg.threads, [&](std::size_t i) {
                    Rng rng = Rng::substream(cellseed, i);
                    const SmiStatistics stats = draw_moment_stats(sc, rng, rule, 2);
                    const MuSigma ms = mu_sigma(stats.t_hat[0], stats.t_hat[1], m, k);
                    const double Q = q_statistic(ms.mu_hat, ms.sigma2_hat_raw, m);
                    reject[i] = Q > crit ? 1 : 0;
                });
                const double rate =
                    static_cast<double>(std::count(reject.begin(), reject.end(), 1)) /
                    static_cast<double>(cfg.reps);
                out.rows.push_back({std::to_string(k), std::to_string(m), format_cell(C),
                                    format_cell(C * std::sqrt(static_cast<double>(k - 1))),
                                    format_cell(crit), std::to_string(cfg.reps),
                                    format_cell(rate)});
            }
        }
    return out;
}

// ----- posterior-draw imputation for monotone patterns -----

ImputationSet gibbs_imputer(const Dataset& incomplete, int m, int n_burn, int n_thin,
                            std::uint64_t seed) {
    incomplete.validate(/*allow_nan=*/true);
    if (m < 2) throw std::invalid_argument("gibbs_imputer: m >= 2 required");
    if (n_burn < 0 || n_thin < 1) throw std::invalid_argument("gibbs_imputer: bad burn/thin");
    const Eigen::Index n = incomplete.n(), p = incomplete.p();

    // monotone check: within each row the missing cells form a suffix, and the
    // first column is fully observed
    std::vector<std::vector<Eigen::Index>> missing_rows(static_cast<std::size_t>(p));
    for (Eigen::Index i = 0; i < n; ++i) {
        bool seen_missing = false;
        for (Eigen::Index j = 0; j < p; ++j) {
            const bool miss = std::isnan(incomplete.values(i, j));
            if (j == 0 && miss)
                throw std::invalid_argument("gibbs_imputer: leading column must be observed");
            if (miss) {
                seen_missing = true;
                missing_rows[static_cast<std::size_t>(j)].push_back(i);
            } else if (seen_missing) {
                throw DataError(
                    "gibbs_imputer: missingness is not monotone (observed cell after a missing "
                    "one in row " +
                    std::to_string(i + 1) + ")");
            }
        }
    }

    ImputationSet out;
    bool any_missing = false;
    for (const auto& v : missing_rows) any_missing |= !v.empty();
    if (!any_missing) {
        out.datasets.assign(static_cast<std::size_t>(m), incomplete);
        return out;
    }

    // with a monotone pattern the sequential-normal posterior factorizes over the
    // observed rows of each column, so the regression fits are fixed across sweeps
    // and can be prepared once; each sweep then draws (v_j, phi_j) from the exact
    // observed-data posterior and regenerates the missing suffix left to right
    struct ColFit {
        std::vector<Eigen::Index> obs;
        Eigen::LLT<Eigen::MatrixXd> llt;
        Eigen::VectorXd phi_hat;
        double rss = 0.0;
        double dof = 0.0;
    };
    std::vector<ColFit> fits(static_cast<std::size_t>(p));
    for (Eigen::Index j = 1; j < p; ++j) {
        ColFit& f = fits[static_cast<std::size_t>(j)];
        for (Eigen::Index i = 0; i < n; ++i)
            if (!std::isnan(incomplete.values(i, j))) f.obs.push_back(i);
        if (f.obs.empty())
            throw std::invalid_argument("gibbs_imputer: column " + std::to_string(j + 1) +
                                        " has no observed cases");
        const Eigen::Index q = j + 1;  // intercept + earlier columns
        const Eigen::Index nj = static_cast<Eigen::Index>(f.obs.size());
        if (nj - q < 1)
            throw std::invalid_argument("gibbs_imputer: too few complete cases for column " +
                                        std::to_string(j + 1));
        Eigen::MatrixXd X(nj, q);
        Eigen::VectorXd w(nj);
        for (Eigen::Index a = 0; a < nj; ++a) {
            X(a, 0) = 1.0;
            for (Eigen::Index b = 0; b < j; ++b) X(a, b + 1) = incomplete.values(f.obs[static_cast<std::size_t>(a)], b);
            w(a) = incomplete.values(f.obs[static_cast<std::size_t>(a)], j);
        }
        f.llt.compute(X.transpose() * X);
        if (f.llt.info() != Eigen::Success)
            throw std::invalid_argument("gibbs_imputer: singular design in column " +
                                        std::to_string(j + 1));
        f.phi_hat = f.llt.solve(X.transpose() * w);
        f.rss = (w - X * f.phi_hat).squaredNorm();
        f.dof = static_cast<double>(nj - q);
    }

    Rng rng(seed);
    Eigen::MatrixXd cur = incomplete.values;
    const int total = n_burn + n_thin * m;
    for (int it = 1; it <= total; ++it) {
        for (Eigen::Index j = 1; j < p; ++j) {
            if (missing_rows[static_cast<std::size_t>(j)].empty()) continue;
            const ColFit& f = fits[static_cast<std::size_t>(j)];
            const Eigen::Index q = j + 1;
            const double v = std::max(f.rss, 1e-300) / rng.chi2(f.dof);
            Eigen::VectorXd z(q);
            for (Eigen::Index a = 0; a < q; ++a) z(a) = rng.normal();
            // phi ~ N(phi_hat, v A^{-1}); A = L L^T so solve L^T w = z
            const Eigen::VectorXd phi = f.phi_hat + std::sqrt(v) * f.llt.matrixU().solve(z);
            for (Eigen::Index i : missing_rows[static_cast<std::size_t>(j)]) {
                double mu = phi(0);
                for (Eigen::Index a = 0; a < j; ++a) mu += phi(a + 1) * cur(i, a);
                cur(i, j) = mu + std::sqrt(v) * rng.normal();
            }
        }
        if (it > n_burn && (it - n_burn) % n_thin == 0) {
            Dataset d;
            d.column_names = incomplete.column_names;
            d.values = cur;
            out.datasets.push_back(std::move(d));
            if (static_cast<int>(out.datasets.size()) == m) break;
        }
    }
    out.validate();
    return out;
}

namespace {

double expit(double t) { return 1.0 / (1.0 + std::exp(-t)); }

}  // namespace

CsvTable experiment_regression_finite_n(const RegressionSimConfig& cfg) {
    if (cfg.p < 2 || cfg.p >= 64)
        throw std::invalid_argument("regression experiment: need 2 <= p < 64");
    if (!cfg.beta.empty() && static_cast<int>(cfg.beta.size()) != cfg.p)
        throw std::invalid_argument("regression experiment: beta must have p entries");
    const int n = cfg.n, p = cfg.p, m = cfg.m;

    Eigen::MatrixXd Sigma(p, p);
    for (int a = 0; a < p; ++a)
        for (int b = 0; b < p; ++b) Sigma(a, b) = std::pow(2.0, -std::abs(a - b));
    const Eigen::MatrixXd L = Sigma.llt().matrixL();

    const std::size_t nd = cfg.devices.size(), nq = cfg.methods.size();
    std::vector<char> reject(cfg.reps * nd * nq, 0);
    std::vector<std::array<double, 64>> miss_frac(cfg.reps);
    const SelectionRule rule = selection_rule(RuleKind::Jack, m);

    parallel_for(cfg.reps, cfg.threads, [&](std::size_t rep) {
        Rng rng = Rng::substream(cfg.seed, rep);
        Eigen::MatrixXd X(n, p);
        Eigen::VectorXd y(n);
        for (int i = 0; i < n; ++i) {
            Eigen::VectorXd z(p);
            for (int j = 0; j < p; ++j) z(j) = rng.normal();
            X.row(i) = (Eigen::VectorXd::Ones(p) + L * z).transpose();
            double mean = cfg.beta0;
            if (!cfg.beta.empty())
                for (int j = 0; j < p; ++j) mean += cfg.beta[static_cast<std::size_t>(j)] * X(i, j);
            y(i) = mean + std::sqrt(cfg.sigma2) * rng.normal();
        }
        // monotone missingness on the covariates, driven by the previous column
        Eigen::MatrixXd Xmiss = X;
        std::array<double, 64> frac{};
        for (int i = 0; i < n; ++i) {
            bool observed = true;
            for (int j = 1; j < p; ++j) {
                if (observed) {
                    const double pr = expit(cfg.gamma0 + cfg.gamma1 * X(i, j - 1));
                    observed = rng.uniform() < pr;
                }
                if (!observed) {
                    Xmiss(i, j) = std::numeric_limits<double>::quiet_NaN();
                    frac[static_cast<std::size_t>(j)] += 1.0 / n;
                }
            }
        }
        miss_frac[rep] = frac;

        // the response leads the imputation dataset so imputed covariates carry
        // the observed outcome information, as proper imputation requires
        Dataset xds;
        xds.column_names.push_back("y");
        for (int j = 0; j < p; ++j) xds.column_names.push_back("x" + std::to_string(j + 1));
        xds.values.resize(n, p + 1);
        xds.values.col(0) = y;
        xds.values.rightCols(p) = Xmiss;
        const ImputationSet imps = gibbs_imputer(xds, m, cfg.n_burn, cfg.n_thin, rng.next_u64());

        for (std::size_t dv = 0; dv < nd; ++dv) {
            const LinRegDevice dev(cfg.devices[dv], "y", p);
            const StatProvider provider = make_device_provider(dev, imps);
            const SmiStatistics stats = moment_estimates(provider, m, rule, p, 1);
            const OmiEstimate est = estimate_omi(stats, m, p);
            const double D = d_hat_statistic(stats.d_full, est.mu_hat, p, m);
            const std::uint64_t inner = rng.next_u64();
            for (std::size_t q = 0; q < nq; ++q) {
                double pval = 1.0;
                switch (cfg.methods[q]) {
                    case RefMethod::T1: pval = pvalue_T1(D, p); break;
                    case RefMethod::T2: pval = pvalue_T2(D, est.mu_hat, p, m); break;
                    case RefMethod::T3: pval = pvalue_T3(D, est.mu_hat, est.sigma2_hat, p); break;
                    case RefMethod::T4: {
                        const auto reps4 = sample_T4(est.r_hat, m, cfg.N, inner, 1);
                        pval = pvalue_from_samples(D, reps4);
                        break;
                    }
                    case RefMethod::T4Gamma: {
                        const auto repsg = sample_T4_gamma(est.mu_hat, est.sigma2_hat, p, m, cfg.N,
                                                           inner, 1);
                        pval = pvalue_from_samples(D, repsg);
                        break;
                    }
                    case RefMethod::FTwoMoment:
                        pval = pvalue_f_two_moment(D, est.mu_hat, est.sigma2_hat, p, m);
                        break;
                }
                reject[(rep * nd + dv) * nq + q] = pval <= cfg.alpha ? 1 : 0;
            }
        }
    });

    std::array<double, 64> frac_mean{};
    for (const auto& f : miss_frac)
        for (int j = 0; j < p; ++j)
            frac_mean[static_cast<std::size_t>(j)] += f[static_cast<std::size_t>(j)] / cfg.reps;

    CsvTable out;
    out.header = {"device", "method", "alpha", "reps", "reject_rate"};
    for (int j = 0; j < p; ++j) out.header.push_back("frac_missing_x" + std::to_string(j + 1));
    for (std::size_t dv = 0; dv < nd; ++dv)
        for (std::size_t q = 0; q < nq; ++q) {
            std::size_t rej = 0;
            for (std::size_t rep = 0; rep < cfg.reps; ++rep)
                rej += reject[(rep * nd + dv) * nq + q];
            const LinRegDevice dev(cfg.devices[dv], "y", p);
            std::vector<std::string> row = {dev.name(), to_string(cfg.methods[q]),
                                            format_cell(cfg.alpha), std::to_string(cfg.reps),
                                            format_cell(static_cast<double>(rej) / cfg.reps)};
            for (int j = 0; j < p; ++j) row.push_back(format_cell(frac_mean[static_cast<std::size_t>(j)]));
            out.rows.push_back(std::move(row));
        }
    return out;
}

// ----- clinic / parental-care demo -----

ClinicTable clinic_demo_table() {
    ClinicTable t{};
    // indices: [care][survival], care 0 = less, 1 = more; survival 0 = died
    t.a_count[0][0] = 3;
    t.a_count[0][1] = 176;
    t.a_count[1][0] = 4;
    t.a_count[1][1] = 293;
    t.b_count[0][0] = 17;
    t.b_count[0][1] = 197;
    t.b_count[1][0] = 2;
    t.b_count[1][1] = 23;
    t.missing[0][0] = 10;
    t.missing[0][1] = 150;
    t.missing[1][0] = 5;
    t.missing[1][1] = 90;
    return t;
}

CsvTable meng_rubin_demo(const MengRubinConfig& cfg) {
    const ClinicTable tab = clinic_demo_table();
    CsvTable out;
    out.header = {"m", "rep", "r1", "r2", "mu_hat", "sigma2_hat_raw", "eomi_p"};
    std::uint64_t cell = 0;
    for (int m : cfg.m_grid) {
        if (m < 3) throw std::invalid_argument("meng_rubin_demo: m >= 3 required");
        std::vector<double> q0 = sample_Q0(2, m, cfg.eomi_N,
                                           derived_seed(cfg.seed, 7000003 + cell), cfg.threads);
        std::sort(q0.begin(), q0.end());
        const std::uint64_t cellseed = derived_seed(cfg.seed, cell++);
        const SelectionRule rule = selection_rule(RuleKind::Jack, m);
        std::vector<std::array<double, 5>> res(cfg.reps);
        parallel_for(cfg.reps, cfg.threads, [&](std::size_t rep) {
            Rng rng = Rng::substream(cellseed, rep);
            ImputationSet imps;
            imps.datasets.reserve(static_cast<std::size_t>(m));
            for (int ell = 0; ell < m; ++ell) {
                Dataset d;
                d.column_names = {"clinic", "care", "survival", "count"};
                d.values.resize(8, 4);
                Eigen::Index row = 0;
                for (int b = 0; b < 2; ++b)
                    for (int s = 0; s < 2; ++s) {
                        const double nA = tab.a_count[b][s], nB = tab.b_count[b][s];
                        const double miss = tab.missing[b][s];
                        const double pA = nA / (nA + nB);
                        const double mA =
                            static_cast<double>(rng.binomial(static_cast<long>(miss), pA));
                        d.values.row(row++) << 1, b, s, nA + mA;
                        d.values.row(row++) << 0, b, s, nB + (miss - mA);
                    }
                imps.datasets.push_back(std::move(d));
            }
            const ContingencyCiLrtDevice dev;
            const StatProvider provider = make_device_provider(dev, imps);
            const SmiStatistics stats = moment_estimates(provider, m, rule, 2, 1);
            const OmiEstimate est = estimate_omi(stats, m, 2);
            const double Q = q_statistic(est.mu_hat, est.sigma2_hat_raw, m);
            const auto it = std::lower_bound(q0.begin(), q0.end(), Q);
            const double p = static_cast<double>(q0.end() - it) / static_cast<double>(q0.size());
            res[rep] = {est.r_hat[0], est.r_hat[1], est.mu_hat, est.sigma2_hat_raw, p};
        });
        for (std::size_t rep = 0; rep < cfg.reps; ++rep)
            out.rows.push_back({std::to_string(m), std::to_string(rep), format_cell(res[rep][0]),
                                format_cell(res[rep][1]), format_cell(res[rep][2]),
                                format_cell(res[rep][3]), format_cell(res[rep][4])});
    }
    return out;
}

}  // namespace smi
