#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace morphbert::csv {

// RFC 4180 quoting: fields containing ',', '"' or newlines are quoted.
std::string field(std::string_view value);

// Splits one record; understands quoted fields with doubled quotes.
std::vector<std::string> split(std::string_view line);

}  // namespace morphbert::csv
