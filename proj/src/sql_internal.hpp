#pragma once

#include <string>

#include "t2sql/sqlkit.hpp"

namespace t2sql::detail {

// Canonical rendering with every literal except NULL replaced by <value>.
std::string render_masked(const Query& query);

}  // namespace t2sql::detail
