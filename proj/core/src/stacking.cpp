#include "smi/stacking.hpp"

#include <cmath>
#include <memory>
#include <mutex>
#include <set>

#include "smi/parallel.hpp"

namespace smi {

Dataset stack(const ImputationSet& imps, const IndexMultiset& S_in) {
    const int m = imps.m();
    const IndexMultiset S = canonical(S_in);
    check_multiset(S, m);
    const Eigen::Index n = imps.n();
    Dataset out;
    out.column_names = imps.column_names();
    out.values.resize(n * static_cast<Eigen::Index>(S.size()), imps.p());
    Eigen::Index row = 0;
    for (int idx : S) {
        out.values.middleRows(row, n) = imps.datasets[static_cast<std::size_t>(idx - 1)].values;
        row += n;
    }
    return out;
}

namespace {

double eval_scaled(const TestDevice& dev, const ImputationSet& imps, const IndexMultiset& S) {
    const Dataset stacked = stack(imps, S);
    double v;
    try {
        v = dev.evaluate(stacked);
    } catch (const std::exception& e) {
        throw DeviceError("device '" + dev.name() + "' failed on stack {" + multiset_label(S) +
                          "}: " + e.what());
    }
    if (!std::isfinite(v))
        throw DeviceError("device '" + dev.name() + "' returned a non-finite value on stack {" +
                          multiset_label(S) + "}");
    return v / static_cast<double>(S.size());
}

}  // namespace

StatProvider make_device_provider(const TestDevice& dev, const ImputationSet& imps) {
    imps.validate();
    struct Cache {
        std::mutex mu;
        std::map<IndexMultiset, double> memo;
    };
    auto cache = std::make_shared<Cache>();
    return [cache, &dev, &imps](const IndexMultiset& S_in) {
        const IndexMultiset S = canonical(S_in);
        {
            std::scoped_lock lock(cache->mu);
            auto it = cache->memo.find(S);
            if (it != cache->memo.end()) return it->second;
        }
        const double v = eval_scaled(dev, imps, S);
        std::scoped_lock lock(cache->mu);
        return cache->memo.emplace(S, v).first->second;
    };
}

double device_stat(const TestDevice& dev, const ImputationSet& imps, const IndexMultiset& S) {
    imps.validate();
    const IndexMultiset cs = canonical(S);
    check_multiset(cs, imps.m());
    return eval_scaled(dev, imps, cs);
}

double smi_statistic_from(const StatProvider& provider, const IndexMultiset& S1_in,
                          const IndexMultiset& S2_in) {
    const IndexMultiset S1 = canonical(S1_in);
    const IndexMultiset S2 = canonical(S2_in);
    if (S1 == S2) throw std::invalid_argument("SMI statistic needs S1 != S2");
    const double s1 = static_cast<double>(S1.size());
    const double s2 = static_cast<double>(S2.size());
    const double inter = static_cast<double>(multiset_intersection_size(S1, S2));
    const double denom = s1 + s2 - 2.0 * inter;
    if (denom == 0.0) throw std::invalid_argument("degenerate pair: |S1|+|S2| = 2|S1 and S2|");
    const double coeff = (s1 + s2) / denom;
    const double d1 = provider(S1);
    const double d2 = provider(S2);
    const double d12 = provider(multiset_add(S1, S2));
    return coeff * (s1 * d1 + s2 * d2 - (s1 + s2) * d12);
}

double smi_statistic(const TestDevice& dev, const ImputationSet& imps, const IndexMultiset& S1,
                     const IndexMultiset& S2) {
    return smi_statistic_from(make_device_provider(dev, imps), S1, S2);
}

SmiStatistics moment_estimates(const StatProvider& provider, int m, const SelectionRule& rule,
                               int k, int threads) {
    if (k < 1) throw std::invalid_argument("k must be >= 1");
    if (rule.pairs.empty()) throw std::invalid_argument("selection rule has no pairs");

    // collect the distinct stacks the rule needs, plus the full stack
    std::set<IndexMultiset> needed;
    needed.insert(full_set(m));
    for (const auto& [S1, S2] : rule.pairs) {
        needed.insert(canonical(S1));
        needed.insert(canonical(S2));
        needed.insert(canonical(multiset_add(S1, S2)));
    }
    std::vector<IndexMultiset> order(needed.begin(), needed.end());
    std::vector<double> vals(order.size());
    parallel_for(order.size(), threads, [&](std::size_t i) { vals[i] = provider(order[i]); });

    SmiStatistics out;
    out.rule = rule;
    out.m = m;
    for (std::size_t i = 0; i < order.size(); ++i) out.d_by_S.emplace(order[i], vals[i]);
    out.d_full = out.d_by_S.at(full_set(m));

    auto cached = [&](const IndexMultiset& S) { return out.d_by_S.at(canonical(S)); };
    out.T_by_pair.reserve(rule.pairs.size());
    for (const auto& [S1, S2] : rule.pairs)
        out.T_by_pair.push_back(smi_statistic_from(cached, S1, S2));

    out.t_hat.assign(static_cast<std::size_t>(k), 0.0);
    for (double T : out.T_by_pair) {
        double pw = 1.0;
        for (int tau = 0; tau < k; ++tau) {
            pw *= T;
            out.t_hat[static_cast<std::size_t>(tau)] += pw;
        }
    }
    for (double& t : out.t_hat) t /= static_cast<double>(rule.pairs.size());
    return out;
}

SmiStatistics moment_estimates(const TestDevice& dev, const ImputationSet& imps,
                               const SelectionRule& rule, int k, int threads) {
    return moment_estimates(make_device_provider(dev, imps), imps.m(), rule, k, threads);
}

}  // namespace smi
