#pragma once

#include <functional>
#include <map>
#include <vector>

#include "smi/dataset.hpp"
#include "smi/device.hpp"
#include "smi/multiset_index.hpp"

namespace smi {

// Row-concatenation of {X^l : l in S} in ascending multiset order.
Dataset stack(const ImputationSet& imps, const IndexMultiset& S);

// d^S = device(stack)/|S|, as a function of the canonical multiset. The
// provider abstraction lets simulated draws feed the same downstream pipeline
// as real device evaluations.
using StatProvider = std::function<double(const IndexMultiset&)>;

// Memoizing provider; the cache is internally synchronized so device calls for
// distinct S may run concurrently. The referenced device and imputations must
// outlive the provider.
StatProvider make_device_provider(const TestDevice& dev, const ImputationSet& imps);

// One-shot variant (no sharing across calls).
double device_stat(const TestDevice& dev, const ImputationSet& imps, const IndexMultiset& S);

struct SmiStatistics {
    std::map<IndexMultiset, double> d_by_S;
    std::vector<double> T_by_pair;  // aligned with rule.pairs
    std::vector<double> t_hat;      // sample moments t_1..t_k of T_by_pair
    double d_full = 0.0;            // d^{1:m}
    SelectionRule rule;
    int m = 0;
};

double smi_statistic_from(const StatProvider& provider, const IndexMultiset& S1,
                          const IndexMultiset& S2);
double smi_statistic(const TestDevice& dev, const ImputationSet& imps, const IndexMultiset& S1,
                     const IndexMultiset& S2);

// Evaluates every d^S the rule needs (plus d^{1:m}), then the per-pair SMI
// contrasts and their first k sample moments. threads > 1 evaluates distinct
// stacks concurrently; the result is identical for any thread count.
SmiStatistics moment_estimates(const StatProvider& provider, int m, const SelectionRule& rule,
                               int k, int threads = 1);
SmiStatistics moment_estimates(const TestDevice& dev, const ImputationSet& imps,
                               const SelectionRule& rule, int k, int threads = 1);

}  // namespace smi
