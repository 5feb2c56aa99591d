#include "posedp/report.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <tuple>

namespace posedp {

namespace {

using nlohmann::json;

std::string fixed(double v, int digits) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(digits) << v;
  return out.str();
}

}  // namespace

std::vector<BenchmarkRow> sorted_rows(std::vector<BenchmarkRow> rows) {
  std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
    return std::tie(a.task, a.mode, a.params) < std::tie(b.task, b.mode, b.params);
  });
  return rows;
}

std::string report_csv(const std::vector<BenchmarkRow>& rows) {
  std::ostringstream out;
  out << kReportCsvHeader << '\n';
  for (const auto& r : sorted_rows(rows)) {
    out << r.task << ',' << r.mode << ',' << r.params << ',' << fixed(r.sr, 4) << ','
        << fixed(r.te_seconds, 6) << '\n';
  }
  return out.str();
}

std::string report_table(const std::vector<BenchmarkRow>& rows) {
  std::ostringstream out;
  out << std::left << std::setw(20) << "task" << std::setw(12) << "mode"
      << std::setw(12) << "tier" << std::right << std::setw(10) << "params"
      << std::setw(8) << "SR" << std::setw(10) << "TE [s]" << std::setw(12)
      << "pos err" << std::setw(10) << "ori err" << '\n';
  out << std::string(94, '-') << '\n';
  for (const auto& r : sorted_rows(rows)) {
    out << std::left << std::setw(20) << r.task << std::setw(12) << r.mode
        << std::setw(12) << r.tier << std::right << std::setw(10) << r.params
        << std::setw(8) << fixed(r.sr, 2) << std::setw(10) << fixed(r.te_seconds, 3)
        << std::setw(12) << fixed(r.position_error, 5) << std::setw(10)
        << fixed(r.orientation_error, 4) << '\n';
  }
  return out.str();
}

void write_report(const std::vector<BenchmarkRow>& rows,
                  const std::filesystem::path& dir) {
  if (rows.empty()) throw std::invalid_argument("report: no results");
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "report.csv") << report_csv(rows);
  std::ofstream(dir / "report.txt") << report_table(rows);
}

void save_results(const std::vector<BenchmarkRow>& rows,
                  const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  for (const auto& r : rows) {
    out << json{{"task", r.task},
                {"mode", r.mode},
                {"tier", r.tier},
                {"params", r.params},
                {"sr", r.sr},
                {"te_seconds", r.te_seconds},
                {"position_error", r.position_error},
                {"orientation_error", r.orientation_error}}
               .dump()
        << '\n';
  }
}

std::vector<BenchmarkRow> load_results(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open results " + path.string());
  std::vector<BenchmarkRow> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line);
    BenchmarkRow r;
    r.task = j.at("task").get<std::string>();
    r.mode = j.at("mode").get<std::string>();
    r.tier = j.value("tier", std::string("small"));
    r.params = j.at("params").get<std::size_t>();
    r.sr = j.at("sr").get<double>();
    r.te_seconds = j.at("te_seconds").get<double>();
    r.position_error = j.value("position_error", 0.0);
    r.orientation_error = j.value("orientation_error", 0.0);
    rows.push_back(r);
  }
  return rows;
}

std::vector<BenchVariant> standard_variants(const ExperimentConfig& base,
                                            double large_factor) {
  ExperimentConfig pose = base;
  pose.mode = ObservationMode::gt_pose;
  pose.param_budget = 0;
  const std::size_t small = parameter_count(pose.denoiser());
  const auto large = static_cast<std::size_t>(std::llround(large_factor * static_cast<double>(small)));
  return {{"small", ObservationMode::gt_pose, 0},
          {"small", ObservationMode::est_pose, 0},
          {"small", ObservationMode::grid_image, small},
          {"large", ObservationMode::grid_image, large}};
}

ExperimentConfig variant_config(const ExperimentConfig& base,
                                const BenchVariant& variant) {
  ExperimentConfig cfg = base;
  cfg.mode = variant.mode;
  cfg.param_budget = variant.param_budget;
  return cfg;
}

BenchOutcome run_variant(const ExperimentConfig& base, const Dataset& dataset,
                         const BenchVariant& variant,
                         const EpochCallback& on_epoch) {
  const ExperimentConfig cfg = variant_config(base, variant);
  BenchOutcome out{{}, train(cfg, dataset, on_epoch), {}};
  out.evaluation = evaluate(out.checkpoint, cfg.task, dataset.tracker,
                            cfg.eval_rollouts, cfg.eval_seed);
  out.row.task = cfg.task.name();
  out.row.mode = to_string(cfg.mode);
  out.row.tier = variant.tier;
  out.row.params = out.checkpoint.params.size();
  out.row.sr = out.evaluation.success_rate;
  out.row.te_seconds = out.checkpoint.metrics.mean_epoch_seconds();
  out.row.position_error = out.evaluation.mean_position_error();
  out.row.orientation_error = out.evaluation.mean_orientation_error();
  return out;
}

}  // namespace posedp
