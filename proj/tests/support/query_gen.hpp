#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "t2sql/dataset.hpp"

namespace t2sql::testing {

struct GeneratedQuery {
    std::string db_id;
    std::string sql;          // aliases T1..Tn when there are joins
    std::string sql_renamed;  // same query with other alias names
};

// Random Spider-dialect queries over the given schemas: joins along foreign
// keys, aggregates, conditions with nesting, grouping, ordering, set ops.
std::vector<GeneratedQuery> generate_queries(const std::vector<DatabaseSchema>& schemas, std::size_t n,
                                             std::uint64_t seed);

}  // namespace t2sql::testing
