#include <doctest.h>

#include <cmath>
#include <numeric>

#include "smi/simulate.hpp"

using namespace smi;

TEST_CASE("asymptotic generator collapses when no information is missing") {
    SimConfig cfg;
    cfg.k = 3;
    cfg.m = 5;
    cfg.r = {0.0, 0.0, 0.0};
    const auto rule = selection_rule(RuleKind::Jack, cfg.m);
    const auto needed = sets_for_rule(rule, cfg.m);
    Rng rng(31);
    const auto draw = asymptotic_dS_draw(cfg, rng, needed);
    // every multiset sees the same value: the shared chi-square core
    const double ref = draw.begin()->second;
    for (const auto& [S, v] : draw) CHECK(v == doctest::Approx(ref).epsilon(1e-12));
    CHECK(ref > 0.0);
}

TEST_CASE("generator mean matches the closed-form first moment") {
    SimConfig cfg;
    cfg.k = 2;
    cfg.m = 4;
    cfg.r = {0.8, 0.2};
    cfg.delta = {0.5, 0.0};
    const std::vector<IndexMultiset> singles = {{1}, {2}, {3}, {4}};
    const std::size_t reps = 40000;
    Rng rng(12);
    double sum = 0.0, sumsq = 0.0;
    for (std::size_t i = 0; i < reps; ++i) {
        const auto draw = asymptotic_dS_draw(cfg, rng, singles);
        for (const auto& s : singles) {
            const double v = draw.at(s);
            sum += v;
            sumsq += v * v;
        }
    }
    const double n = static_cast<double>(reps * singles.size());
    const double mean = sum / n;
    const double se = std::sqrt((sumsq / n - mean * mean) / n);
    // E d^l = sum_j (delta_j^2 + 1 + 2 r_j)
    const double target = 0.25 + 1.0 + 1.6 + 1.0 + 0.4;
    CHECK(std::abs(mean - target) < 5.0 * se);
}

TEST_CASE("jackknife statistics are exchangeable with the documented correlation") {
    SimConfig cfg;
    cfg.k = 2;
    cfg.m = 6;
    cfg.r = {0.7, 0.3};
    const auto rule = selection_rule(RuleKind::Jack, cfg.m);
    const std::size_t reps = 30000;
    Rng rng(77);
    double s1 = 0.0, s2 = 0.0, s11 = 0.0, s22 = 0.0, s12 = 0.0;
    for (std::size_t i = 0; i < reps; ++i) {
        const auto stats = draw_moment_stats(cfg, rng, rule, cfg.k);
        const double a = stats.T_by_pair[0], b = stats.T_by_pair[1];
        s1 += a; s2 += b; s11 += a * a; s22 += b * b; s12 += a * b;
    }
    const double n = static_cast<double>(reps);
    const double m1 = s1 / n, m2 = s2 / n;
    const double v1 = s11 / n - m1 * m1, v2 = s22 / n - m2 * m2;
    const double cov = s12 / n - m1 * m2;
    // exchangeability: matching means and variances
    CHECK(std::abs(m1 - m2) < 5.0 * std::sqrt((v1 + v2) / n));
    CHECK(v1 == doctest::Approx(v2).epsilon(0.1));
    // squares of jointly centered normals: pairwise correlation 1/(m-1)^2
    const double rho = cov / std::sqrt(v1 * v2);
    const double target_rho = 1.0 / ((cfg.m - 1.0) * (cfg.m - 1.0));
    CHECK(std::abs(rho - target_rho) < 5.0 / std::sqrt(n));
}

TEST_CASE("mixed-moment closed forms: degenerate anchor and simulation check") {
    // a single unit odds makes every power sum one, so E(T1^4) = 105
    const auto t = lemma_mixed_moment_targets({1.0, 0.0}, 5);
    CHECK(t[0] == doctest::Approx(105.0).epsilon(1e-12));

    const auto report = moment_oracle_check({0.9, 0.5}, 5, 40000, 17, 2);
    for (int i = 0; i < 5; ++i) {
        INFO(report.names[static_cast<std::size_t>(i)]);
        CHECK(std::abs(report.estimate[static_cast<std::size_t>(i)] -
                       report.closed_form[static_cast<std::size_t>(i)]) <
              4.0 * report.std_error[static_cast<std::size_t>(i)]);
    }
    CHECK_THROWS_AS((void)lemma_mixed_moment_targets({0.5}, 4), std::invalid_argument);
}

TEST_CASE("limiting variance of the spread estimator") {
    CHECK(var_sigma_limit(0.0, 0.0, 0.0, 0.0, 3, 10) == 0.0);
    // large m: dominated by 2(6 k^2 R4 - 8 k R3 R1 + k^2 R2^2 + 4 R1^2 R2) / (k^4 m)
    const double R1 = 0.7, R2 = 0.29, R3 = 0.133, R4 = 0.0641;
    const int k = 2, m = 100000;
    const double lead = 2.0 * (6 * k * k * R4 - 8 * k * R3 * R1 + k * k * R2 * R2 +
                               4 * R1 * R1 * R2) /
                        (std::pow(k, 4) * m);
    CHECK(var_sigma_limit(R1, R2, R3, R4, k, m) == doctest::Approx(lead).epsilon(0.01));
    CHECK(var_sigma_limit(R1, R2, R3, R4, 2, 10) > 0.0);
}

TEST_CASE("sequential imputer: complete data passes through unchanged") {
    Rng rng(3);
    Dataset d;
    d.column_names = {"y", "x1", "x2"};
    d.values.resize(25, 3);
    for (Eigen::Index i = 0; i < 25; ++i) {
        const double x1 = rng.normal(), x2 = 0.5 * x1 + rng.normal();
        d.values.row(i) << 1.0 + x1 - x2 + rng.normal(), x1, x2;
    }
    const ImputationSet imps = gibbs_imputer(d, 3, 10, 2, 5);
    REQUIRE(imps.m() == 3);
    for (const auto& ds : imps.datasets) CHECK(ds.values == d.values);
}

TEST_CASE("sequential imputer fills monotone gaps with nondegenerate draws") {
    Rng rng(4);
    Dataset d;
    d.column_names = {"x1", "x2", "x3"};
    d.values.resize(120, 3);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (Eigen::Index i = 0; i < 120; ++i) {
        const double x1 = rng.normal();
        const double x2 = 0.8 * x1 + 0.6 * rng.normal();
        const double x3 = 0.5 * x2 + rng.normal();
        d.values.row(i) << x1, x2, x3;
        if (i % 4 == 0) {
            d.values(i, 2) = nan;
            if (i % 8 == 0) d.values(i, 1) = nan;
        }
    }
    const ImputationSet imps = gibbs_imputer(d, 4, 50, 5, 9);
    REQUIRE(imps.m() == 4);
    double spread = 0.0;
    double filled_sum = 0.0;
    int filled_n = 0;
    for (Eigen::Index i = 0; i < 120; ++i)
        for (Eigen::Index j = 0; j < 3; ++j)
            if (std::isnan(d.values(i, j))) {
                const double a = imps.datasets[0].values(i, j);
                const double b = imps.datasets[1].values(i, j);
                CHECK(std::isfinite(a));
                CHECK(std::isfinite(b));
                spread += std::abs(a - b);
                for (const auto& ds : imps.datasets) {
                    filled_sum += ds.values(i, j);
                    ++filled_n;
                }
            } else {
                for (const auto& ds : imps.datasets) CHECK(ds.values(i, j) == d.values(i, j));
            }
    CHECK(spread > 0.0);
    // MCAR deletions: filled values stay near the observed center
    CHECK(std::abs(filled_sum / filled_n) < 1.0);

    // non-monotone pattern is rejected
    Dataset bad = d;
    bad.values(1, 1) = nan;
    bad.values(1, 2) = 0.0;
    CHECK_THROWS_AS((void)gibbs_imputer(bad, 2, 10, 2, 1), DataError);
}

TEST_CASE("fixed demo counts") {
    const ClinicTable t = clinic_demo_table();
    CHECK(t.a_count[0][0] == 3.0);
    CHECK(t.a_count[0][1] == 176.0);
    CHECK(t.a_count[1][0] == 4.0);
    CHECK(t.a_count[1][1] == 293.0);
    CHECK(t.b_count[0][0] == 17.0);
    CHECK(t.b_count[1][1] == 23.0);
    CHECK(t.missing[0][1] == 150.0);
    double total = 0.0;
    for (int b = 0; b < 2; ++b)
        for (int s = 0; s < 2; ++s)
            total += t.a_count[b][s] + t.b_count[b][s] + t.missing[b][s];
    CHECK(total == 970.0);
}

TEST_CASE("experiment tables have stable schemas and deterministic bytes") {
    OmiMseConfig omi;
    omi.r_max_grid = {0.5};
    omi.k_grid = {2};
    omi.m_grid = {10};
    omi.reps = 50;
    const CsvTable a = experiment_omi_mse(omi);
    CHECK(a.header.front() == "k");
    CHECK(!a.rows.empty());
    CHECK(a.to_csv() == experiment_omi_mse(omi).to_csv());

    SigmaBiasConfig sb;
    sb.m_grid = {5};
    sb.r_max_grid = {0.5};
    sb.reps = 500;
    const CsvTable b = experiment_sigma_bias(sb);
    CHECK(!b.rows.empty());
    sb.threads = 3;
    CHECK(b.to_csv() == experiment_sigma_bias(sb).to_csv());

    SizeAccuracyConfig sa;
    sa.reps = 40;
    sa.N = 400;
    const CsvTable c = experiment_size_accuracy(sa);
    CHECK(c.header.front() == "method");
    CHECK(c.rows.size() == sa.methods.size() * sa.alphas.size());

    EomiPowerConfig ep;
    ep.C_grid = {0.0};
    ep.k_grid = {5};
    ep.m_grid = {10};
    ep.reps = 200;
    ep.null_N = 20000;
    const CsvTable e = experiment_eomi_power(ep);
    CHECK(e.rows.size() == 1);
}

TEST_CASE("numeric cells survive a parse round trip") {
    CHECK(format_cell(0.5) == "0.5");
    CHECK(std::stod(format_cell(1.0 / 3.0)) == doctest::Approx(1.0 / 3.0).epsilon(1e-9));
    CsvTable t;
    t.header = {"a", "b"};
    t.rows = {{"1", "2"}, {"3", "4"}};
    CHECK(t.to_csv() == "a,b\n1,2\n3,4\n");
}
