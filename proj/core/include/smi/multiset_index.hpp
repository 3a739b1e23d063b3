#pragma once

#include <algorithm>
#include <stdexcept>
#include <string>
#include <vector>

namespace smi {

// Multiset over imputation indices 1..m, kept sorted so it can serve as a
// canonical cache key. Row order of the matching stack follows this order.
using IndexMultiset = std::vector<int>;

inline IndexMultiset canonical(IndexMultiset s) {
    std::sort(s.begin(), s.end());
    return s;
}

inline void check_multiset(const IndexMultiset& s, int m) {
    if (s.empty()) throw std::invalid_argument("index multiset must be nonempty");
    for (int i : s)
        if (i < 1 || i > m)
            throw std::out_of_range("imputation index " + std::to_string(i) +
                                    " outside 1.." + std::to_string(m));
}

inline IndexMultiset full_set(int m) {
    IndexMultiset s(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) s[static_cast<std::size_t>(i)] = i + 1;
    return s;
}

inline IndexMultiset leave_one_out(int m, int ell) {
    IndexMultiset s;
    s.reserve(static_cast<std::size_t>(m - 1));
    for (int i = 1; i <= m; ++i)
        if (i != ell) s.push_back(i);
    return s;
}

// multiset addition S1 (+) S2
inline IndexMultiset multiset_add(const IndexMultiset& a, const IndexMultiset& b) {
    IndexMultiset out;
    out.reserve(a.size() + b.size());
    std::merge(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
}

inline std::size_t multiset_intersection_size(const IndexMultiset& a, const IndexMultiset& b) {
    IndexMultiset out;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out.size();
}

inline std::string multiset_label(const IndexMultiset& s) {
    std::string out;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out.push_back(',');
        out += std::to_string(s[i]);
    }
    return out;
}

enum class RuleKind { Jack, Full, Pair };

struct SelectionRule {
    RuleKind kind = RuleKind::Jack;
    std::vector<std::pair<IndexMultiset, IndexMultiset>> pairs;
};

inline SelectionRule selection_rule(RuleKind kind, int m) {
    if (m < 2) throw std::invalid_argument("selection rule needs m >= 2");
    SelectionRule rule;
    rule.kind = kind;
    switch (kind) {
        case RuleKind::Jack:
            for (int ell = 1; ell <= m; ++ell)
                rule.pairs.emplace_back(IndexMultiset{ell}, leave_one_out(m, ell));
            break;
        case RuleKind::Full:
            for (int ell = 1; ell <= m; ++ell)
                rule.pairs.emplace_back(IndexMultiset{ell}, full_set(m));
            break;
        case RuleKind::Pair:
            for (int a = 1; a <= m; ++a)
                for (int b = a + 1; b <= m; ++b)
                    rule.pairs.emplace_back(IndexMultiset{a}, IndexMultiset{b});
            break;
    }
    return rule;
}

inline RuleKind rule_kind_from_string(const std::string& s) {
    if (s == "jack") return RuleKind::Jack;
    if (s == "full") return RuleKind::Full;
    if (s == "pair") return RuleKind::Pair;
    throw std::invalid_argument("unknown selection rule: " + s);
}

inline std::string to_string(RuleKind k) {
    switch (k) {
        case RuleKind::Jack: return "jack";
        case RuleKind::Full: return "full";
        case RuleKind::Pair: return "pair";
    }
    return "?";
}

}  // namespace smi
