// Metrics rows written during training, their CSV form, and SVG learning
// curves.
#pragma once

#include <filesystem>
#include <stdexcept>
#include <optional>
#include <string>
#include <vector>

namespace imitlab {

struct MetricsRow {
  long learner_step = 0;
  std::optional<double> wall_clock_s;  // blank in deterministic single-thread runs
  double eval_return_mean = 0.0;
  double eval_return_std = 0.0;
  std::optional<double> disc_train_mean;
  std::optional<double> disc_holdout_mean;
  std::optional<double> constraint_accuracy;  // TRAIL only
  long actor_episodes = 0;
  double actor_episode_len_mean = 0.0;
  long aes_stops = 0;
  long env_steps = 0;
};

// Column order of the metrics CSV (header row first).
const std::vector<std::string>& metrics_columns();

std::string metrics_header();
std::string to_csv_line(const MetricsRow& row);
void write_metrics_csv(const std::vector<MetricsRow>& rows, const std::filesystem::path& path);

struct ParseError : std::runtime_error {
  ParseError(const std::string& what, int line) : std::runtime_error(what), line(line) {}
  int line;
};

std::vector<MetricsRow> read_metrics_csv(const std::filesystem::path& path);

// One faint trace per file plus their mean (over steps present in every
// file). Output is a function of the inputs only.
std::string learning_curve_svg(const std::vector<std::vector<MetricsRow>>& runs,
                               const std::vector<std::string>& labels,
                               const std::string& title = "eval return");
void plot(const std::vector<std::filesystem::path>& metrics_files,
          const std::filesystem::path& out_svg, const std::string& title = "eval return");

}  // namespace imitlab
