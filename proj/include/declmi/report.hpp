#pragma once

#include <string>
#include <vector>

#include "declmi/experiment.hpp"

namespace declmi::report {

// Writes the result in the requested format under out_dir and returns the
// paths written:
//   json     -> result.json (full machine-readable result)
//   csv      -> per_class.csv (four quantities per class) + headline.csv
//   markdown -> report.md (headline blocks + surprisal extremes)
std::vector<std::string> emit_report(const experiment::ExperimentResult& result,
                                     const std::string& format, const std::string& out_dir);

}  // namespace declmi::report
