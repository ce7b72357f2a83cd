#pragma once

#include <compare>
#include <string>
#include <string_view>

namespace t2sql {

std::string to_lower(std::string_view text);
std::string to_upper(std::string_view text);
bool iequals(std::string_view a, std::string_view b);

// A resolved table.column reference. `table` and `column` are the lowercase
// canonical identifiers used for every comparison; the display fields keep
// the casing the reference was written with. `occurrence` distinguishes the
// instances of a table that appears more than once in one FROM clause and is
// zero otherwise.
struct ColumnRef {
    std::string table;
    std::string column;
    std::string table_display;
    std::string column_display;
    unsigned occurrence = 0;

    static ColumnRef make(std::string_view table, std::string_view column, unsigned occurrence = 0);

    std::string qualified() const { return table + "." + column; }

    friend bool operator==(const ColumnRef& a, const ColumnRef& b) {
        return a.table == b.table && a.column == b.column && a.occurrence == b.occurrence;
    }
    friend std::strong_ordering operator<=>(const ColumnRef& a, const ColumnRef& b) {
        if (auto c = a.table <=> b.table; c != 0) return c;
        if (auto c = a.column <=> b.column; c != 0) return c;
        return a.occurrence <=> b.occurrence;
    }
};

// Pair identity ignores which instance of a self-joined table was meant.
inline bool same_pair(const ColumnRef& a, const ColumnRef& b) {
    return a.table == b.table && a.column == b.column;
}

}  // namespace t2sql
