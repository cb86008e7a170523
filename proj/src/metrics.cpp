#include "imitlab/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "imitlab/nn.hpp"

namespace imitlab {

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string fmt_opt(const std::optional<double>& v) { return v ? fmt(*v) : std::string(); }

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

double parse_double(const std::string& s, int line) {
  try {
    std::size_t used = 0;
    double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ParseError("malformed number '" + s + "'", line);
  }
}

std::optional<double> parse_opt(const std::string& s, int line) {
  if (s.empty()) return std::nullopt;
  return parse_double(s, line);
}

}  // namespace

const std::vector<std::string>& metrics_columns() {
  static const std::vector<std::string> cols{
      "learner_step",     "wall_clock_s",   "eval_return_mean",       "eval_return_std",
      "disc_train_mean",  "disc_holdout_mean", "constraint_accuracy", "actor_episodes",
      "actor_episode_len_mean", "aes_stops", "env_steps"};
  return cols;
}

std::string metrics_header() {
  std::string h;
  for (const auto& c : metrics_columns()) h += (h.empty() ? "" : ",") + c;
  return h;
}

std::string to_csv_line(const MetricsRow& r) {
  std::ostringstream os;
  os << r.learner_step << ',' << fmt_opt(r.wall_clock_s) << ',' << fmt(r.eval_return_mean) << ','
     << fmt(r.eval_return_std) << ',' << fmt_opt(r.disc_train_mean) << ','
     << fmt_opt(r.disc_holdout_mean) << ',' << fmt_opt(r.constraint_accuracy) << ','
     << r.actor_episodes << ',' << fmt(r.actor_episode_len_mean) << ',' << r.aes_stops << ','
     << r.env_steps;
  return os.str();
}

void write_metrics_csv(const std::vector<MetricsRow>& rows, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write metrics file " + path.string());
  out << metrics_header() << '\n';
  for (const auto& r : rows) out << to_csv_line(r) << '\n';
}

std::vector<MetricsRow> read_metrics_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string(), 0);
  std::string line;
  int line_no = 0;
  if (!std::getline(in, line)) throw ParseError("empty metrics file", 1);
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != metrics_header()) throw ParseError("unexpected metrics header", line_no);
  std::vector<MetricsRow> rows;
  long prev_step = -1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto f = split_csv(line);
    if (f.size() != metrics_columns().size()) {
      throw ParseError("expected " + std::to_string(metrics_columns().size()) + " fields, got " +
                           std::to_string(f.size()),
                       line_no);
    }
    MetricsRow r;
    r.learner_step = static_cast<long>(parse_double(f[0], line_no));
    r.wall_clock_s = parse_opt(f[1], line_no);
    r.eval_return_mean = parse_double(f[2], line_no);
    r.eval_return_std = parse_double(f[3], line_no);
    r.disc_train_mean = parse_opt(f[4], line_no);
    r.disc_holdout_mean = parse_opt(f[5], line_no);
    r.constraint_accuracy = parse_opt(f[6], line_no);
    r.actor_episodes = static_cast<long>(parse_double(f[7], line_no));
    r.actor_episode_len_mean = parse_double(f[8], line_no);
    r.aes_stops = static_cast<long>(parse_double(f[9], line_no));
    r.env_steps = static_cast<long>(parse_double(f[10], line_no));
    if (r.learner_step <= prev_step) throw ParseError("learner steps must increase", line_no);
    prev_step = r.learner_step;
    rows.push_back(r);
  }
  return rows;
}

std::string learning_curve_svg(const std::vector<std::vector<MetricsRow>>& runs,
                               const std::vector<std::string>& labels, const std::string& title) {
  if (runs.empty()) throw ConfigError("plot needs at least one metrics file");
  constexpr double W = 640, H = 400, L = 60, R = 20, T = 40, B = 50;
  long max_step = 1;
  for (const auto& run : runs) {
    for (const auto& r : run) max_step = std::max(max_step, r.learner_step);
  }
  const double y_max = 200.0;
  auto px = [&](double step) { return L + (W - L - R) * step / static_cast<double>(max_step); };
  auto py = [&](double ret) { return H - B - (H - T - B) * std::clamp(ret, 0.0, y_max) / y_max; };
  auto polyline = [&](const std::vector<std::pair<double, double>>& pts, const char* style) {
    std::ostringstream os;
    os << "<polyline fill=\"none\" " << style << " points=\"";
    char buf[64];
    for (const auto& [s, v] : pts) {
      std::snprintf(buf, sizeof buf, "%.2f,%.2f ", px(s), py(v));
      os << buf;
    }
    os << "\"/>\n";
    return os.str();
  };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" viewBox=\"0 0 " << W << ' ' << H << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"14\">"
      << title << "</text>\n";
  svg << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
      << "\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B
      << "\" stroke=\"black\"/>\n";
  for (int tick = 0; tick <= 4; ++tick) {
    const double v = y_max * tick / 4.0;
    svg << "<text x=\"" << L - 6 << "\" y=\"" << py(v) + 4
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">" << v << "</text>\n";
  }
  svg << "<text x=\"" << W - R << "\" y=\"" << H - B + 30
      << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">learner step (max "
      << max_step << ")</text>\n";

  std::map<long, std::pair<double, int>> by_step;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    std::vector<std::pair<double, double>> pts;
    for (const auto& r : runs[i]) {
      pts.emplace_back(static_cast<double>(r.learner_step), r.eval_return_mean);
      auto& acc = by_step[r.learner_step];
      acc.first += r.eval_return_mean;
      acc.second += 1;
    }
    svg << "<g class=\"trace\"><title>" << (i < labels.size() ? labels[i] : "run") << "</title>\n";
    svg << polyline(pts, "stroke=\"#1f77b4\" stroke-opacity=\"0.3\" stroke-width=\"1\"");
    svg << "</g>\n";
  }
  std::vector<std::pair<double, double>> mean_pts;
  for (const auto& [step, acc] : by_step) {
    if (acc.second == static_cast<int>(runs.size())) {
      mean_pts.emplace_back(static_cast<double>(step), acc.first / acc.second);
    }
  }
  svg << "<g class=\"mean\">\n"
      << polyline(mean_pts, "stroke=\"#d62728\" stroke-width=\"2.5\"") << "</g>\n";
  svg << "</svg>\n";
  return svg.str();
}

void plot(const std::vector<std::filesystem::path>& metrics_files,
          const std::filesystem::path& out_svg, const std::string& title) {
  if (metrics_files.empty()) throw ConfigError("plot needs at least one metrics file");
  std::vector<std::vector<MetricsRow>> runs;
  std::vector<std::string> labels;
  for (const auto& f : metrics_files) {
    try {
      runs.push_back(read_metrics_csv(f));
    } catch (const ParseError& e) {
      throw ParseError(f.string() + ":" + std::to_string(e.line) + ": " + e.what(), e.line);
    }
    labels.push_back(f.filename().string());
  }
  const std::string svg = learning_curve_svg(runs, labels, title);
  std::ofstream out(out_svg);
  if (!out) throw ConfigError("cannot write " + out_svg.string());
  out << svg;
}

}  // namespace imitlab
