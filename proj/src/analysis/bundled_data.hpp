#pragma once

#include <string_view>

namespace morphbert::analysis::detail {

extern const std::string_view kResultsCsv;
extern const std::string_view kMetadataCsv;
extern const std::string_view kChecksums;

}  // namespace morphbert::analysis::detail
