#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "t2sql/column_ref.hpp"

namespace t2sql {

std::string trim(std::string_view text);
std::string rtrim(std::string_view text);
std::vector<std::string> split_lines(std::string_view text);
std::string join(const std::vector<std::string>& parts, std::string_view sep);
std::string replace_all(std::string text, std::string_view from, std::string_view to);
// CRLF and lone CR become LF.
std::string normalize_newlines(std::string_view text);
std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);

}  // namespace t2sql
