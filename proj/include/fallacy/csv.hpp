#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace fallacy::csv {

using Row = std::vector<std::string>;

/// RFC 4180 reader: quoted fields may hold delimiters, doubled quotes and
/// line breaks. CRLF and a leading UTF-8 BOM are accepted. With
/// `quoting` off every quote character is literal (plain TSV).
std::vector<Row> parse(std::string_view content, char delimiter = ',', bool quoting = true);

/// Quotes a field when it needs it.
std::string escape(std::string_view field, char delimiter = ',');
std::string format_row(const Row& row, char delimiter = ',');

}  // namespace fallacy::csv
