#include "prunekit/report.hpp"

#include <cinttypes>
#include <cstdio>
#include <memory>
#include <sstream>

namespace prunekit {

namespace {

std::string format_float(float v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.9g", static_cast<double>(v));
  return buf;
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      cells.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  cells.push_back(cur);
  return cells;
}

void write_text_file(const std::string& path, const std::string& text) {
  std::unique_ptr<std::FILE, int (*)(std::FILE*)> f(std::fopen(path.c_str(), "wb"), &std::fclose);
  if (!f) fail(ErrorCategory::io, "cannot open '" + path + "' for writing");
  if (std::fwrite(text.data(), 1, text.size(), f.get()) != text.size()) {
    fail(ErrorCategory::io, "short write to '" + path + "'");
  }
}

}  // namespace

std::string report_csv_text(const RunReport& report) {
  std::ostringstream out;
  out << kReportCsvHeader << "\n";
  for (const StepRecord& s : report.steps) {
    out << s.step << "," << s.layer_id << "," << criterion_name(s.criterion) << "," << s.kept
        << "," << format_float(s.acc_damage) << "," << format_float(s.acc_recovery) << ","
        << s.epochs_to_peak << "," << s.params << "," << s.mult_adds << "\n";
  }
  return out.str();
}

std::string report_summary_text(const RunReport& report) {
  std::ostringstream out;
  out << "prunekit run summary\n";
  out << "====================\n\n";
  out << "baseline_accuracy = " << format_float(report.baseline_accuracy) << "\n";
  out << "final_accuracy = " << format_float(report.final_accuracy) << "\n";
  out << "final_epochs_to_peak = " << report.final_epochs_to_peak << "\n";
  out << "pruned_layers = " << report.steps.size() << "\n";
  if (!report.steps.empty()) {
    out << "params_after = " << report.steps.back().params << "\n";
    out << "mult_adds_after = " << report.steps.back().mult_adds << "\n";
  }
  out << "total_wall_seconds = " << format_float(report.total_wall_seconds) << "\n";
  out << "rng = " << report.rng_name << "\n";
  out << "\nconfig:\n" << report.config_echo;
  return out.str();
}

ReportFiles emit_report(const RunReport& report, const std::string& csv_path) {
  ReportFiles files;
  files.csv_path = csv_path;
  const std::size_t dot = csv_path.find_last_of('.');
  const std::size_t slash = csv_path.find_last_of('/');
  const bool has_ext = dot != std::string::npos && (slash == std::string::npos || dot > slash);
  files.summary_path = (has_ext ? csv_path.substr(0, dot) : csv_path) + ".summary.txt";

  write_text_file(files.csv_path, report_csv_text(report));
  write_text_file(files.summary_path, report_summary_text(report));
  return files;
}

RunReport parse_report_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) fail(ErrorCategory::format, "empty report CSV");
  while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
  if (line != kReportCsvHeader) {
    fail(ErrorCategory::format, "unexpected report CSV header: '" + line + "'");
  }
  RunReport report;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::vector<std::string> cells = split_line(line);
    if (cells.size() != 9) {
      fail(ErrorCategory::format,
           "report CSV line " + std::to_string(line_no) + " has " +
               std::to_string(cells.size()) + " cells");
    }
    StepRecord s;
    try {
      s.step = std::stoi(cells[0]);
      s.layer_id = std::stoi(cells[1]);
      s.criterion = parse_criterion(cells[2]);
      s.kept = static_cast<std::size_t>(std::stoull(cells[3]));
      s.acc_damage = std::stof(cells[4]);
      s.acc_recovery = std::stof(cells[5]);
      s.epochs_to_peak = std::stoi(cells[6]);
      s.params = std::stoull(cells[7]);
      s.mult_adds = std::stoull(cells[8]);
    } catch (const std::exception& e) {
      fail(ErrorCategory::format,
           "report CSV line " + std::to_string(line_no) + ": " + e.what());
    }
    report.steps.push_back(s);
  }
  return report;
}

RunReport read_report_csv(const std::string& path) {
  std::unique_ptr<std::FILE, int (*)(std::FILE*)> f(std::fopen(path.c_str(), "rb"), &std::fclose);
  if (!f) fail(ErrorCategory::io, "cannot open report '" + path + "'");
  std::string text;
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, f.get())) > 0) text.append(buf, n);
  return parse_report_csv(text);
}

}  // namespace prunekit
