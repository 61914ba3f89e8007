#pragma once

#include "rtlevo/model.hpp"
#include "rtlevo/search.hpp"

#include <string>
#include <vector>

namespace rtlevo {

/// Aggregate metrics over the task directories found under `roots`. A pure
/// function of history files: no timestamps or absolute paths in the output.
json build_report(const std::vector<fs::path>& roots, std::vector<std::string>* warnings = nullptr);

std::string render_report_table(const json& report);

} // namespace rtlevo
