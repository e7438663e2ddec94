#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "survfuse/explain.hpp"
#include "survfuse/train.hpp"

namespace survfuse {

inline constexpr int kReportSchemaVersion = 1;

/// Writes crossval_report.json and crossval_report.csv (one row per fold plus
/// mean/std rows); returns the written paths.
std::vector<std::filesystem::path> write_crossval_report(
    const std::filesystem::path& dir, const CrossvalReport& report);

CrossvalReport read_crossval_report(const std::filesystem::path& json_path);

struct ExplainReportFile {
  int schema_version = kReportSchemaVersion;
  std::string label;
  std::string baseline_mode = "mean";
  // Normalization recipe note carried in the report metadata.
  std::string recipe =
      "per-patient |phi| normalized to shares, averaged over patients, "
      "then mean/std across folds";
  ExplainReport report;
};

std::vector<std::filesystem::path> write_explain_report(
    const std::filesystem::path& dir, const ExplainReportFile& file);

ExplainReportFile read_explain_report(const std::filesystem::path& json_path);

/// Human-readable tables over any mix of crossval and explain reports:
/// survival (c-index), disentanglement (D1/D2/total) and attribution shares,
/// one row per run label, mean +/- std recomputed from the per-fold values.
std::string render_report_tables(
    const std::vector<CrossvalReport>& crossval_reports,
    const std::vector<ExplainReportFile>& explain_reports);

/// Static SVG line chart of per-epoch training losses (one polyline per
/// fold).
void write_loss_curves_svg(const std::filesystem::path& path,
                           const CrossvalReport& report);

/// Static SVG of per-epoch disentanglement-loss traces.
void write_dc_curves_svg(const std::filesystem::path& path,
                         const CrossvalReport& report);

}  // namespace survfuse
