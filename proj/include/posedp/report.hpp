#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "posedp/config.hpp"
#include "posedp/harness.hpp"

namespace posedp {

struct BenchmarkRow {
  std::string task;
  std::string mode;
  std::string tier;
  std::size_t params = 0;
  double sr = 0.0;
  double te_seconds = 0.0;
  double position_error = 0.0;
  double orientation_error = 0.0;
};

inline constexpr const char* kReportCsvHeader = "task,mode,params,sr,te_seconds";

/// Rows ordered by (task, mode, params).
std::vector<BenchmarkRow> sorted_rows(std::vector<BenchmarkRow> rows);

std::string report_csv(const std::vector<BenchmarkRow>& rows);
std::string report_table(const std::vector<BenchmarkRow>& rows);

/// Writes report.csv and report.txt into `dir`.
void write_report(const std::vector<BenchmarkRow>& rows,
                  const std::filesystem::path& dir);

/// One JSON object per line; the input format of the report subcommand.
void save_results(const std::vector<BenchmarkRow>& rows,
                  const std::filesystem::path& path);
std::vector<BenchmarkRow> load_results(const std::filesystem::path& path);

/// One training + evaluation configuration of a benchmark sweep.
struct BenchVariant {
  std::string tier;
  ObservationMode mode = ObservationMode::gt_pose;
  std::size_t param_budget = 0;  // 0 keeps the configured hidden width
};

/// gt_pose/est_pose/grid_image at the pose network's parameter count, plus
/// grid_image at `large_factor` times that count.
std::vector<BenchVariant> standard_variants(const ExperimentConfig& base,
                                            double large_factor = 8.0);

ExperimentConfig variant_config(const ExperimentConfig& base,
                                const BenchVariant& variant);

struct BenchOutcome {
  BenchmarkRow row;
  Checkpoint checkpoint;
  EvaluationResult evaluation;
};

BenchOutcome run_variant(const ExperimentConfig& base, const Dataset& dataset,
                         const BenchVariant& variant,
                         const EpochCallback& on_epoch = {});

}  // namespace posedp
