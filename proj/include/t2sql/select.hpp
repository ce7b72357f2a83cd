#pragma once

#include <cstdint>
#include <functional>
#include <string_view>
#include <vector>

#include "t2sql/dataset.hpp"
#include "t2sql/sqlkit.hpp"

namespace t2sql {

enum class SelectionKind { random, g1, g2, g3 };

std::string_view to_string(SelectionKind kind);
SelectionKind selection_kind_from_string(std::string_view text);

struct SelectionPolicy {
    SelectionKind kind = SelectionKind::random;
    int shots = 8;
    std::uint64_t seed = 0;
    bool sort_easy_to_hard = false;  // ablation only; default keeps draw order
};

using HardnessFn = std::function<Hardness(const SchemaExample&)>;

// Output order is the seeded draw order unless sort_easy_to_hard is set.
std::vector<SchemaExample> select_examples(const std::vector<SchemaExample>& pool, const SelectionPolicy& policy,
                                           const HardnessFn& hardness);

}  // namespace t2sql
