#pragma once

#include <string>
#include <vector>

#include "prunekit/pipeline.hpp"

namespace prunekit {

// Writes (a) the per-step CSV with the fixed header
//   step,layer_id,criterion,kept,acc_damage,acc_recovery,epochs_to_peak,params,mult_adds
// and (b) a run-summary text file next to it (same path with ".summary.txt"
// in place of the extension). UTF-8, LF endings; accuracies serialized with
// nine significant digits so parsing the CSV reproduces the float values
// exactly.
struct ReportFiles {
  std::string csv_path;
  std::string summary_path;
};
ReportFiles emit_report(const RunReport& report, const std::string& csv_path);

std::string report_csv_text(const RunReport& report);
std::string report_summary_text(const RunReport& report);

// Strict CSV reader for emitted reports (header checked).
RunReport read_report_csv(const std::string& path);
RunReport parse_report_csv(const std::string& text);

inline const char* kReportCsvHeader =
    "step,layer_id,criterion,kept,acc_damage,acc_recovery,epochs_to_peak,params,mult_adds";

}  // namespace prunekit
