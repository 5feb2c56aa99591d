#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "posedp/report.hpp"

using namespace posedp;
namespace fs = std::filesystem;

namespace {

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

}  // namespace

TEST(Report, SingleRowCsv) {
  const BenchmarkRow row{"reach", "gt_pose", "small", 1234, 0.95, 0.5, 0.0, 0.0};
  const auto lines = lines_of(report_csv({row}));
  ASSERT_EQ(lines.size(), 2u);
  EXPECT_EQ(lines[0], kReportCsvHeader);
  EXPECT_EQ(lines[0], "task,mode,params,sr,te_seconds");
  EXPECT_EQ(lines[1].substr(0, 19), "reach,gt_pose,1234,");
}

TEST(Report, RowsSortedByTaskModeParams) {
  const std::vector<BenchmarkRow> rows{
      {"stack", "gt_pose", "", 10, 0.1, 1.0},
      {"reach", "grid_image", "", 800, 0.4, 1.0},
      {"reach", "grid_image", "", 100, 0.2, 1.0},
      {"reach", "est_pose", "", 100, 0.9, 1.0},
  };
  const auto sorted = sorted_rows(rows);
  EXPECT_EQ(sorted[0].mode, "est_pose");
  EXPECT_EQ(sorted[1].params, 100u);
  EXPECT_EQ(sorted[2].params, 800u);
  EXPECT_EQ(sorted[3].task, "stack");
  const auto csv = lines_of(report_csv(rows));
  EXPECT_EQ(csv[1].substr(0, 15), "reach,est_pose,");
}

TEST(Report, SrColumnStaysInUnitInterval) {
  std::vector<BenchmarkRow> rows;
  for (int i = 0; i <= 4; ++i) rows.push_back({"reach", "gt_pose", "", static_cast<std::size_t>(i), i / 4.0, 0.1});
  const auto csv = lines_of(report_csv(rows));
  for (std::size_t i = 1; i < csv.size(); ++i) {
    std::stringstream ss(csv[i]);
    std::string field;
    for (int f = 0; f < 4; ++f) std::getline(ss, field, ',');
    const double sr = std::stod(field);
    EXPECT_GE(sr, 0.0);
    EXPECT_LE(sr, 1.0);
  }
}

TEST(Report, TeEqualsMeanOfRecordedEpochDurations) {
  TrainingMetrics m;
  m.epoch_seconds = {0.5f, 0.7f, 0.65f, 0.4f};
  const double mean = std::accumulate(m.epoch_seconds.begin(), m.epoch_seconds.end(), 0.0) / 4.0;
  EXPECT_NEAR(m.mean_epoch_seconds(), mean, 1e-7);
}

TEST(Report, WritesCsvAndTextTables) {
  const fs::path dir = fs::temp_directory_path() / "posedp_unit_report";
  fs::remove_all(dir);
  const std::vector<BenchmarkRow> rows{{"push_to_goal_late", "est_pose", "small", 55232, 0.84, 0.56}};
  write_report(rows, dir);
  std::ifstream csv(dir / "report.csv");
  std::string header;
  std::getline(csv, header);
  EXPECT_EQ(header, kReportCsvHeader);
  std::ifstream txt(dir / "report.txt");
  std::stringstream body;
  body << txt.rdbuf();
  EXPECT_NE(body.str().find("push_to_goal_late"), std::string::npos);
  EXPECT_NE(body.str().find("est_pose"), std::string::npos);
}

TEST(Report, ResultsJsonLinesRoundTrip) {
  const fs::path path = fs::temp_directory_path() / "posedp_unit_results.jsonl";
  const std::vector<BenchmarkRow> rows{{"reach", "gt_pose", "small", 50, 0.9, 0.25, 0.001, 0.7},
                                       {"reach", "grid_image", "large", 400, 0.4, 2.5, 0.0, 0.0}};
  save_results(rows, path);
  const auto back = load_results(path);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].tier, "large");
  EXPECT_EQ(back[1].params, 400u);
  EXPECT_DOUBLE_EQ(back[0].sr, 0.9);
  EXPECT_DOUBLE_EQ(back[0].orientation_error, 0.7);
}

TEST(Bench, StandardVariantsMatchPoseParameterCount) {
  ExperimentConfig base;
  const auto variants = standard_variants(base);
  ASSERT_EQ(variants.size(), 4u);
  const std::size_t pose_params = parameter_count(variant_config(base, variants[0]).denoiser());
  const std::size_t grid_small = parameter_count(variant_config(base, variants[2]).denoiser());
  const std::size_t grid_large = parameter_count(variant_config(base, variants[3]).denoiser());
  EXPECT_EQ(variants[2].mode, ObservationMode::grid_image);
  EXPECT_LE(grid_small, pose_params);
  EXPECT_GT(static_cast<double>(grid_small), 0.9 * static_cast<double>(pose_params));
  EXPECT_LE(grid_large, 8 * pose_params);
  EXPECT_GT(static_cast<double>(grid_large), 7.5 * static_cast<double>(pose_params));
}
