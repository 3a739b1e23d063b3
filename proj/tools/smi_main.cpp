// Command-line front end: hypothesis tests on multiply-imputed datasets via
// stacking, odds-of-missing-information estimation, the equal-odds test,
// simulated null quantiles, and the simulation experiments.
#include <CLI11.hpp>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "smi/dataset.hpp"
#include "smi/devices.hpp"
#include "smi/eomi.hpp"
#include "smi/omi.hpp"
#include "smi/reference.hpp"
#include "smi/simulate.hpp"
#include "smi/stacking.hpp"

using namespace smi;
using nlohmann::json;

namespace {

constexpr std::uint64_t kDefaultSeed = 20230816;  // override with SMI_SEED

std::uint64_t default_seed() {
    if (const char* env = std::getenv("SMI_SEED")) {
        char* end = nullptr;
        const unsigned long long v = std::strtoull(env, &end, 10);
        if (end && *end == '\0') return static_cast<std::uint64_t>(v);
        throw std::invalid_argument("SMI_SEED is not a valid integer: " + std::string(env));
    }
    return kDefaultSeed;
}

void emit(const std::string& text, const std::string& out_path) {
    if (out_path.empty()) {
        std::cout << text;
        if (!text.empty() && text.back() != '\n') std::cout << '\n';
        return;
    }
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw DataError("cannot open output file: " + out_path);
    out << text;
    if (!text.empty() && text.back() != '\n') out << '\n';
}

// shared flags for subcommands that read an imputation set and run a device
struct DeviceArgs {
    std::string imps_path;
    std::string device = "linreg-lrt";
    std::string response = "y";
    int covariates = -1;  // linreg; -1 means all non-response columns
    std::string sigma0_path;
    std::vector<double> theta0 = {0.5, 0.5};
    std::string command;
    int external_k = 1;
    int timeout_ms = 60000;
    std::string rule = "jack";

    void attach(CLI::App* cmd, bool need_device = true) {
        cmd->add_option("--imps", imps_path,
                        "imputation set: directory of imp_*.csv, or one CSV with an "
                        "integer 'imp' column")
            ->required();
        if (need_device) {
            cmd->add_option("--device", device, "testing device")
                ->check(CLI::IsMember({"linreg-wald", "linreg-lrt", "linreg-rs", "mvn-cov-lrt",
                                       "contingency-ci-lrt", "bernoulli-lrt", "external"}));
            cmd->add_option("--response", response, "response column for linreg devices");
            cmd->add_option("--covariates", covariates,
                            "number of covariate columns for linreg (default: all "
                            "non-response columns)");
            cmd->add_option("--sigma0", sigma0_path,
                            "CSV with the null covariance matrix for mvn-cov-lrt "
                            "(default: identity)");
            cmd->add_option("--theta0", theta0,
                            "null success probabilities (group 0, group 1) for "
                            "bernoulli-lrt")
                ->expected(2);
            cmd->add_option("--command", command, "child command for the external device");
            cmd->add_option("--k", external_k, "statistic dimension for the external device");
            cmd->add_option("--timeout-ms", timeout_ms, "external device timeout");
        }
        cmd->add_option("--rule", rule, "selection rule")
            ->check(CLI::IsMember({"jack", "full", "pair"}));
    }

    std::unique_ptr<TestDevice> make(const ImputationSet& imps) const {
        if (device == "linreg-wald" || device == "linreg-lrt" || device == "linreg-rs") {
            const LinRegKind kind = device == "linreg-wald" ? LinRegKind::Wald
                                    : device == "linreg-lrt" ? LinRegKind::Lrt
                                                             : LinRegKind::RaoScore;
            int p = covariates;
            if (p < 0) p = static_cast<int>(imps.p()) - 1;
            return std::make_unique<LinRegDevice>(kind, response, p);
        }
        if (device == "mvn-cov-lrt") {
            Eigen::MatrixXd sigma0;
            if (sigma0_path.empty()) {
                sigma0 = Eigen::MatrixXd::Identity(imps.p(), imps.p());
            } else {
                const Dataset s = read_csv_file(sigma0_path);
                sigma0 = s.values;
            }
            return std::make_unique<MvnCovLrtDevice>(sigma0);
        }
        if (device == "contingency-ci-lrt") return std::make_unique<ContingencyCiLrtDevice>();
        if (device == "bernoulli-lrt")
            return std::make_unique<BernoulliTwoGroupLrtDevice>(theta0.at(0), theta0.at(1));
        if (device == "external") {
            if (command.empty())
                throw std::invalid_argument("--command is required for the external device");
            return std::make_unique<ExternalDevice>(command, external_k, timeout_ms);
        }
        throw std::invalid_argument("unknown device: " + device);
    }
};

OmiEstimate run_estimate(const DeviceArgs& dargs, RuleKind rule, int threads,
                         const ImputationSet& imps, const TestDevice& dev) {
    (void)dargs;
    const auto stats =
        moment_estimates(dev, imps, selection_rule(rule, imps.m()), dev.k(), threads);
    return estimate_omi(stats, imps.m(), dev.k());
}

int cmd_test(const DeviceArgs& dargs, const std::string& ref, std::size_t N, std::uint64_t seed,
             int threads, const std::string& out) {
    const ImputationSet imps = load_imputation_set(dargs.imps_path);
    const auto dev = dargs.make(imps);
    ReferenceSpec spec;
    spec.method = ref_method_from_string(ref);
    spec.N = N;
    spec.seed = seed;
    spec.threads = threads;
    spec.rule = rule_kind_from_string(dargs.rule);
    const MiTestResult res = mi_test(*dev, imps, spec);
    emit(to_json_string(res), out);
    return 0;
}

int cmd_estimate_omi(const DeviceArgs& dargs, int threads, const std::string& out) {
    const ImputationSet imps = load_imputation_set(dargs.imps_path);
    const auto dev = dargs.make(imps);
    const OmiEstimate est =
        run_estimate(dargs, rule_kind_from_string(dargs.rule), threads, imps, *dev);
    emit(to_json_string(est), out);
    return 0;
}

int cmd_eomi(const DeviceArgs& dargs, std::size_t N, std::uint64_t seed, int threads,
             const std::string& out) {
    const ImputationSet imps = load_imputation_set(dargs.imps_path);
    const auto dev = dargs.make(imps);
    const OmiEstimate est =
        run_estimate(dargs, rule_kind_from_string(dargs.rule), threads, imps, *dev);
    const EomiResult res = eomi_test(est, N, seed, threads);
    emit(to_json_string(res), out);
    return 0;
}

int cmd_quantiles(int k_min, int k_max, std::vector<int> m_grid, std::vector<double> probs,
                  std::size_t N, std::uint64_t seed, int threads, const std::string& out) {
    if (k_min < 2 || k_max < k_min) throw std::invalid_argument("need 2 <= k-min <= k-max");
    CsvTable table;
    table.header = {"m", "k"};
    for (double q : probs) table.header.push_back("q" + format_cell(100.0 * q));
    std::uint64_t cell = 0;
    for (int m : m_grid)
        for (int k = k_min; k <= k_max; ++k) {
            auto draws = sample_Q0(k, m, N, seed + 7919 * (cell++), threads);
            std::vector<std::string> row = {std::to_string(m), std::to_string(k)};
            for (double q : probs) {
                auto copy = draws;
                row.push_back(format_cell(empirical_quantile(copy, q)));
            }
            table.rows.push_back(std::move(row));
        }
    emit(table.to_csv(), out);
    return 0;
}

void write_manifest(const std::string& csv_path, const json& config) {
    if (csv_path.empty()) return;
    std::ofstream out(csv_path + ".manifest.json", std::ios::binary);
    if (!out) throw DataError("cannot open manifest file: " + csv_path + ".manifest.json");
    out << config.dump(2) << "\n";
}

int cmd_simulate(const std::string& experiment, std::size_t reps, std::size_t N,
                 std::vector<double> r, int k, int m, std::uint64_t seed, int threads,
                 const std::string& out) {
    json manifest;
    manifest["subcommand"] = "simulate";
    manifest["experiment"] = experiment;
    manifest["seed"] = seed;
    manifest["threads"] = threads;
    CsvTable table;
    if (experiment == "omi-mse") {
        OmiMseConfig cfg;
        if (reps) cfg.reps = reps;
        cfg.seed = seed;
        cfg.threads = threads;
        manifest["reps"] = cfg.reps;
        table = experiment_omi_mse(cfg);
    } else if (experiment == "sigma-bias") {
        SigmaBiasConfig cfg;
        if (reps) cfg.reps = reps;
        if (k > 0) cfg.k = k;
        cfg.seed = seed;
        cfg.threads = threads;
        manifest["reps"] = cfg.reps;
        manifest["k"] = cfg.k;
        table = experiment_sigma_bias(cfg);
    } else if (experiment == "size-accuracy") {
        SizeAccuracyConfig cfg;
        if (reps) cfg.reps = reps;
        if (N) cfg.N = N;
        if (!r.empty()) {
            cfg.r = r;
            cfg.k = static_cast<int>(r.size());
        }
        if (m > 0) cfg.m = m;
        cfg.seed = seed;
        cfg.threads = threads;
        manifest["reps"] = cfg.reps;
        manifest["N"] = cfg.N;
        manifest["k"] = cfg.k;
        manifest["m"] = cfg.m;
        manifest["r"] = cfg.r;
        table = experiment_size_accuracy(cfg);
    } else if (experiment == "eomi-power") {
        EomiPowerConfig cfg;
        if (reps) cfg.reps = reps;
        if (N) cfg.null_N = N;
        cfg.seed = seed;
        cfg.threads = threads;
        manifest["reps"] = cfg.reps;
        manifest["null_N"] = cfg.null_N;
        table = experiment_eomi_power(cfg);
    } else if (experiment == "regression") {
        RegressionSimConfig cfg;
        if (reps) cfg.reps = reps;
        if (N) cfg.N = N;
        if (m > 0) cfg.m = m;
        cfg.seed = seed;
        cfg.threads = threads;
        manifest["reps"] = cfg.reps;
        manifest["N"] = cfg.N;
        manifest["n"] = cfg.n;
        manifest["p"] = cfg.p;
        manifest["m"] = cfg.m;
        table = experiment_regression_finite_n(cfg);
    } else if (experiment == "meng-rubin") {
        MengRubinConfig cfg;
        if (reps) cfg.reps = reps;
        if (N) cfg.eomi_N = N;
        cfg.seed = seed;
        cfg.threads = threads;
        manifest["reps"] = cfg.reps;
        manifest["eomi_N"] = cfg.eomi_N;
        table = meng_rubin_demo(cfg);
    } else if (experiment == "moment-oracle") {
        if (r.empty()) r = {0.9, 0.5, 0.1};
        const int mm = m > 0 ? m : 5;
        const std::size_t rr = reps ? reps : 100000;
        const auto rep = moment_oracle_check(r, mm, rr, seed, threads);
        manifest["reps"] = rr;
        manifest["m"] = mm;
        manifest["r"] = r;
        table.header = {"moment", "closed_form", "estimate", "std_error"};
        for (std::size_t i = 0; i < 5; ++i)
            table.rows.push_back({rep.names[i], format_cell(rep.closed_form[i]),
                                  format_cell(rep.estimate[i]), format_cell(rep.std_error[i])});
    } else {
        throw std::invalid_argument("unknown experiment: " + experiment);
    }
    emit(table.to_csv(), out);
    write_manifest(out, manifest);
    return 0;
}

int cmd_pvalue_function(const DeviceArgs& dargs, const std::string& ref, std::size_t N,
                        std::uint64_t seed, int threads, std::vector<double> start,
                        std::vector<double> stop, int steps, double alpha0,
                        const std::string& out) {
    if (dargs.device != "bernoulli-lrt")
        throw std::invalid_argument("pvalue-function supports --device bernoulli-lrt");
    if (start.size() != 2 || stop.size() != 2 || steps < 1)
        throw std::invalid_argument("need --grid-start a b, --grid-stop a b, --grid-steps >= 1");
    const ImputationSet imps = load_imputation_set(dargs.imps_path);
    ReferenceSpec spec;
    spec.method = ref_method_from_string(ref);
    spec.N = N;
    spec.seed = seed;
    spec.threads = threads;
    spec.rule = rule_kind_from_string(dargs.rule);
    std::vector<std::vector<double>> grid;
    for (int i = 0; i < steps; ++i)
        for (int j = 0; j < steps; ++j) {
            const double f1 = steps == 1 ? 0.0 : static_cast<double>(i) / (steps - 1);
            const double f2 = steps == 1 ? 0.0 : static_cast<double>(j) / (steps - 1);
            grid.push_back({start[0] + f1 * (stop[0] - start[0]),
                            start[1] + f2 * (stop[1] - start[1])});
        }
    const DeviceFactory factory = [&](const std::vector<double>& theta) {
        return std::make_unique<BernoulliTwoGroupLrtDevice>(theta.at(0), theta.at(1));
    };
    const auto points = pvalue_function(factory, imps, spec, grid);
    CsvTable table;
    table.header = {"theta0_group0", "theta0_group1", "p_value", "in_region", "error"};
    for (const auto& pt : points)
        table.rows.push_back({format_cell(pt.theta[0]), format_cell(pt.theta[1]),
                              pt.ok ? format_cell(pt.p_value) : "",
                              pt.ok && pt.p_value >= alpha0 ? "1" : "0", pt.error});
    emit(table.to_csv(), out);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hypothesis tests on multiply-imputed datasets via stacking"};
    app.require_subcommand(1);

    std::uint64_t seed = 0;
    std::size_t N = 10000;
    int threads = 1;
    std::string out;
    std::string ref = "t4";

    try {
        seed = default_seed();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }

    auto add_common = [&](CLI::App* cmd, bool with_ref) {
        cmd->add_option("--seed", seed, "RNG seed (default " + std::to_string(kDefaultSeed) +
                                            ", or the SMI_SEED environment variable)");
        cmd->add_option("-N,--replicates", N, "Monte Carlo replicate count");
        cmd->add_option("--threads", threads, "worker threads (0 = hardware)");
        cmd->add_option("--out", out, "write output to a file instead of stdout");
        if (with_ref)
            cmd->add_option("--ref", ref, "reference null distribution")
                ->check(CLI::IsMember({"t1", "t2", "t3", "t4", "t4-gamma", "f2m"}));
    };

    DeviceArgs test_args;
    auto* test_cmd = app.add_subcommand("test", "run a multiple-imputation hypothesis test");
    test_args.attach(test_cmd);
    add_common(test_cmd, true);

    DeviceArgs omi_args;
    auto* omi_cmd =
        app.add_subcommand("estimate-omi", "estimate the odds of missing information");
    omi_args.attach(omi_cmd);
    add_common(omi_cmd, false);

    DeviceArgs eomi_args;
    auto* eomi_cmd = app.add_subcommand("eomi", "test equality of the odds across components");
    eomi_args.attach(eomi_cmd);
    add_common(eomi_cmd, false);

    int k_min = 2, k_max = 10;
    std::vector<int> m_grid = {5, 10, 20, 30};
    std::vector<double> probs = {0.95};
    auto* quant_cmd =
        app.add_subcommand("quantiles", "simulated null quantiles of the equal-odds statistic");
    quant_cmd->add_option("--k-min", k_min);
    quant_cmd->add_option("--k-max", k_max);
    quant_cmd->add_option("--m", m_grid, "imputation counts");
    quant_cmd->add_option("--prob", probs, "quantile levels");
    add_common(quant_cmd, false);

    std::string experiment;
    std::size_t sim_reps = 0;
    std::vector<double> sim_r;
    int sim_k = 0, sim_m = 0;
    auto* sim_cmd = app.add_subcommand("simulate", "run a simulation experiment");
    sim_cmd->add_option("experiment", experiment, "experiment name")
        ->required()
        ->check(CLI::IsMember({"omi-mse", "sigma-bias", "size-accuracy", "eomi-power",
                               "regression", "meng-rubin", "moment-oracle"}));
    sim_cmd->add_option("--reps", sim_reps, "replication count override");
    sim_cmd->add_option("--r", sim_r, "odds of missing information");
    sim_cmd->add_option("--k", sim_k, "statistic dimension override");
    sim_cmd->add_option("--m", sim_m, "imputation count override");
    add_common(sim_cmd, false);

    DeviceArgs pv_args;
    pv_args.device = "bernoulli-lrt";
    std::vector<double> grid_start = {0.05, 0.05}, grid_stop = {0.95, 0.95};
    int grid_steps = 10;
    double alpha0 = 0.05;
    auto* pv_cmd =
        app.add_subcommand("pvalue-function", "p-value over a null-parameter grid");
    pv_args.attach(pv_cmd);
    pv_cmd->add_option("--grid-start", grid_start)->expected(2);
    pv_cmd->add_option("--grid-stop", grid_stop)->expected(2);
    pv_cmd->add_option("--grid-steps", grid_steps, "points per axis");
    pv_cmd->add_option("--alpha0", alpha0, "confidence-region level for the mask column");
    add_common(pv_cmd, true);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*test_cmd) return cmd_test(test_args, ref, N, seed, threads, out);
        if (*omi_cmd) return cmd_estimate_omi(omi_args, threads, out);
        if (*eomi_cmd) return cmd_eomi(eomi_args, N, seed, threads, out);
        if (*quant_cmd)
            return cmd_quantiles(k_min, k_max, m_grid, probs, N, seed, threads, out);
        if (*sim_cmd)
            return cmd_simulate(experiment, sim_reps, N, sim_r, sim_k, sim_m, seed, threads,
                                out);
        if (*pv_cmd)
            return cmd_pvalue_function(pv_args, ref, N, seed, threads, grid_start, grid_stop,
                                       grid_steps, alpha0, out);
    } catch (const DeviceError& e) {
        std::cerr << "device error: " << e.what() << "\n";
        return 3;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
