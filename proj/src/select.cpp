#include "t2sql/select.hpp"

#include <algorithm>
#include <array>
#include <random>

#include "t2sql/errors.hpp"
#include "t2sql/rng.hpp"

namespace t2sql {

std::string_view to_string(SelectionKind kind) {
    switch (kind) {
        case SelectionKind::g1: return "g1";
        case SelectionKind::g2: return "g2";
        case SelectionKind::g3: return "g3";
        default: return "random";
    }
}

SelectionKind selection_kind_from_string(std::string_view text) {
    if (text == "random") return SelectionKind::random;
    if (text == "g1" || text == "G1") return SelectionKind::g1;
    if (text == "g2" || text == "G2") return SelectionKind::g2;
    if (text == "g3" || text == "G3") return SelectionKind::g3;
    throw ConfigError("unknown selection policy '" + std::string(text) + "'");
}

namespace {

std::array<int, 4> quotas(const SelectionPolicy& p) {
    const int n = p.shots;
    switch (p.kind) {
        case SelectionKind::g1:
            if (n % 4 != 0) throw SelectionError("g1 needs shots divisible by 4, got " + std::to_string(n));
            return {n / 4, n / 4, n / 4, n / 4};
        case SelectionKind::g2:
            if (n % 2 != 0) throw SelectionError("g2 needs shots divisible by 2, got " + std::to_string(n));
            return {0, 0, n / 2, n / 2};
        case SelectionKind::g3: return {0, 0, 0, n};
        default: return {0, 0, 0, 0};
    }
}

}  // namespace

std::vector<SchemaExample> select_examples(const std::vector<SchemaExample>& pool, const SelectionPolicy& policy,
                                           const HardnessFn& hardness) {
    if (policy.shots < 0) throw SelectionError("negative shot count");
    std::mt19937_64 rng(policy.seed);
    std::vector<std::size_t> remaining(pool.size());
    for (std::size_t i = 0; i < pool.size(); ++i) remaining[i] = i;

    std::vector<Hardness> level(pool.size(), Hardness::easy);
    const bool stratified = policy.kind != SelectionKind::random;
    if (stratified || policy.sort_easy_to_hard)
        for (std::size_t i = 0; i < pool.size(); ++i) level[i] = hardness(pool[i]);

    std::vector<std::size_t> picked;
    if (!stratified) {
        if (static_cast<std::size_t>(policy.shots) > pool.size())
            throw SelectionError("pool has " + std::to_string(pool.size()) + " examples, " +
                                 std::to_string(policy.shots) + " requested");
        for (int k = 0; k < policy.shots; ++k) {
            const std::size_t j = uniform_index(rng, remaining.size());
            picked.push_back(remaining[j]);
            remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(j));
        }
    } else {
        std::array<int, 4> left = quotas(policy);
        for (int l = 0; l < 4; ++l) {
            const auto have = std::count_if(remaining.begin(), remaining.end(),
                                            [&](std::size_t i) { return static_cast<int>(level[i]) == l; });
            if (have < left[l])
                throw SelectionError("level " + std::string(to_string(static_cast<Hardness>(l))) + " has " +
                                     std::to_string(have) + " examples, " + std::to_string(left[l]) + " needed");
        }
        // Draw from every example whose level still has quota left, so the
        // interleaving of levels is itself seeded.
        for (;;) {
            std::vector<std::size_t> open;
            for (std::size_t j = 0; j < remaining.size(); ++j)
                if (left[static_cast<int>(level[remaining[j]])] > 0) open.push_back(j);
            if (open.empty()) break;
            const std::size_t j = open[uniform_index(rng, open.size())];
            const std::size_t idx = remaining[j];
            picked.push_back(idx);
            --left[static_cast<int>(level[idx])];
            remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(j));
        }
    }
    if (policy.sort_easy_to_hard)
        std::stable_sort(picked.begin(), picked.end(), [&](std::size_t a, std::size_t b) { return level[a] < level[b]; });

    std::vector<SchemaExample> out;
    for (std::size_t i : picked) out.push_back(pool[i]);
    return out;
}

}  // namespace t2sql
