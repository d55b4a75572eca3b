#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace gpusentinel::csv {

// Splits one line into fields with RFC-4180 quoting. Unquoted fields are
// trimmed of surrounding blanks; quoted fields keep their inner text intact
// ("" unescapes to "). Throws DataError on an unterminated quote.
std::vector<std::string> split_line(std::string_view line);

// Quotes a field only if it contains a comma, quote, CR/LF, or edge blanks.
std::string escape(std::string_view field);

// Splits text into lines, dropping a trailing '\r' from each.
std::vector<std::string_view> lines(std::string_view text);

}  // namespace gpusentinel::csv
