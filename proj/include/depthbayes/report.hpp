#ifndef DEPTHBAYES_REPORT_HPP
#define DEPTHBAYES_REPORT_HPP

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "depthbayes/config.hpp"
#include "depthbayes/data.hpp"
#include "depthbayes/eval.hpp"

namespace depthbayes {

// Mean and half-width of the two-sided 95% t interval; the half-width is
// NaN for a single value.
struct Aggregate {
  std::size_t count = 0;
  double mean = 0.0;
  double ci95 = 0.0;
};

inline Aggregate aggregate(const std::vector<double>& values) {
  if (values.empty()) throw DomainError("aggregate: no values");
  Aggregate a;
  a.count = values.size();
  for (double v : values) a.mean += v;
  a.mean /= static_cast<double>(a.count);
  if (a.count < 2) {
    a.ci95 = std::numeric_limits<double>::quiet_NaN();
    return a;
  }
  double ss = 0.0;
  for (double v : values) ss += (v - a.mean) * (v - a.mean);
  const double sd = std::sqrt(ss / static_cast<double>(a.count - 1));
  const boost::math::students_t t(static_cast<double>(a.count - 1));
  a.ci95 = boost::math::quantile(t, 0.975) * sd / std::sqrt(static_cast<double>(a.count));
  return a;
}

// ---------------------------------------------------------------------------
// CSV input

inline std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path,
                                                      const std::string& expected_header) {
  std::istringstream in(read_file(path));
  std::string line;
  if (!std::getline(in, line) || line != expected_header) {
    throw MissingArtifact(path.string() + ": unexpected header");
  }
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::istringstream ls(line);
    for (std::string f; std::getline(ls, f, ',');) fields.push_back(f);
    rows.push_back(std::move(fields));
  }
  return rows;
}

inline double parse_field(const std::string& s, const std::filesystem::path& path) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw MissingArtifact(path.string() + ": malformed number '" + s + "'");
}

// (method, inference, rank) identifies a configuration.
using ConfigKey = std::tuple<std::string, std::string, long>;

struct ReportInputs {
  // per configuration, per seed label: image id -> NLL
  std::map<ConfigKey, std::map<std::string, std::map<long, double>>> nll;
  // per configuration, per seed label: quantile -> retention loss
  std::map<ConfigKey, std::map<std::string, std::map<double, double>>> retention;
};

inline std::vector<std::filesystem::path> find_files(const std::filesystem::path& root, const std::string& name,
                                                      const std::filesystem::path& skip) {
  std::vector<std::filesystem::path> out;
  if (!std::filesystem::is_directory(root)) return out;
  for (const auto& e : std::filesystem::recursive_directory_iterator(root)) {
    if (!e.is_regular_file() || e.path().filename() != name) continue;
    const auto rel = e.path().lexically_relative(skip);
    if (!rel.empty() && *rel.begin() != "..") continue;
    out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

// Rows repeated across files (the deterministic baseline accompanies every
// evaluation) are merged; conflicting duplicates are an error.
inline ReportInputs collect_inputs(const std::filesystem::path& out_dir) {
  const std::filesystem::path skip = out_dir / "report";
  ReportInputs in;
  for (const auto& path : find_files(out_dir, "nll.csv", skip)) {
    for (const auto& r : read_csv(path, "method,inference,rank,seed,image_id,nll")) {
      if (r.size() != 6) throw MissingArtifact(path.string() + ": expected 6 fields");
      const ConfigKey key{r[0], r[1], static_cast<long>(parse_field(r[2], path))};
      const auto image = static_cast<long>(parse_field(r[4], path));
      const double v = parse_field(r[5], path);
      auto [it, inserted] = in.nll[key][r[3]].emplace(image, v);
      if (!inserted && it->second != v) throw MissingArtifact(path.string() + ": conflicting duplicate row");
    }
  }
  for (const auto& path : find_files(out_dir, "retention.csv", skip)) {
    for (const auto& r : read_csv(path, "method,inference,rank,seed,quantile,loss")) {
      if (r.size() != 6) throw MissingArtifact(path.string() + ": expected 6 fields");
      const ConfigKey key{r[0], r[1], static_cast<long>(parse_field(r[2], path))};
      const double q = parse_field(r[4], path);
      const double v = parse_field(r[5], path);
      auto [it, inserted] = in.retention[key][r[3]].emplace(q, v);
      if (!inserted && it->second != v) throw MissingArtifact(path.string() + ": conflicting duplicate row");
    }
  }
  if (in.nll.empty() || in.retention.empty()) {
    throw MissingArtifact("no evaluation results found under " + out_dir.string());
  }
  return in;
}

// ---------------------------------------------------------------------------
// Aggregation

struct NllSummaryRow {
  std::string method;
  std::string inference;
  long rank = 0;
  Aggregate nll;  // over replicates of the per-replicate mean test NLL
};

inline std::vector<NllSummaryRow> summarize_nll(const ReportInputs& in) {
  std::vector<NllSummaryRow> rows;
  for (const auto& [key, seeds] : in.nll) {
    std::vector<double> means;
    for (const auto& [seed, images] : seeds) {
      double s = 0.0;
      for (const auto& [id, v] : images) s += v;
      means.push_back(s / static_cast<double>(images.size()));
    }
    rows.push_back({std::get<0>(key), std::get<1>(key), std::get<2>(key), aggregate(means)});
  }
  return rows;
}

inline std::vector<SweepRow> summarize_retention(const ReportInputs& in) {
  std::vector<SweepRow> rows;
  for (const auto& [key, seeds] : in.retention) {
    std::map<double, std::vector<double>> by_q;
    for (const auto& [seed, curve] : seeds)
      for (const auto& [q, v] : curve) by_q[q].push_back(v);
    for (const auto& [q, values] : by_q) {
      const Aggregate a = aggregate(values);
      rows.push_back({std::get<0>(key), std::get<1>(key), std::get<2>(key), q, a.mean, a.ci95});
    }
  }
  return rows;
}

inline std::string nll_summary_csv(const std::vector<NllSummaryRow>& rows) {
  std::string s = "method,inference,rank,replicates,nll_mean,nll_ci95\n";
  for (const auto& r : rows) {
    s += r.method + "," + r.inference + "," + std::to_string(r.rank) + "," + std::to_string(r.nll.count) + "," +
         format_double(r.nll.mean) + "," + format_double(r.nll.ci95) + "\n";
  }
  return s;
}

inline std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string s = "method,inference,rank,quantile,loss_mean,loss_ci95\n";
  for (const auto& r : rows) {
    s += r.method + "," + r.inference + "," + std::to_string(r.rank) + "," + format_double(r.quantile) + "," +
         format_double(r.loss_mean) + "," + format_double(r.loss_ci95) + "\n";
  }
  return s;
}

// ---------------------------------------------------------------------------
// Plots

namespace detail {

inline std::string label(const std::string& method, const std::string& inference, long rank) {
  return method + (rank > 0 ? " r" + std::to_string(rank) : "") + " / " + inference;
}

inline std::string svg_number(double v) {
  std::ostringstream os;
  os.precision(6);
  os << std::fixed << v;
  return os.str();
}

inline std::string svg_escape(const std::string& s) {
  std::string out;
  for (char ch : s) {
    if (ch == '<') out += "&lt;";
    else if (ch == '>') out += "&gt;";
    else if (ch == '&') out += "&amp;";
    else if (ch == '-' && !out.empty() && out.back() == '-') out += "&#45;";
    else out += ch;
  }
  return out;
}

struct Frame {
  double x0 = 240, y0 = 30, w = 480, h = 0;
  double lo = 0, hi = 1;
  double x(double v) const { return x0 + (hi > lo ? (v - lo) / (hi - lo) : 0.5) * w; }
};

inline std::pair<double, double> padded_range(double lo, double hi) {
  if (!(hi > lo)) return {lo - 0.5, hi + 0.5};
  const double pad = 0.05 * (hi - lo);
  return {lo - pad, hi + pad};
}

const char* const palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2"};

}  // namespace detail

// Dot per configuration at its mean NLL with a 95% interval bar.
inline std::string nll_svg(const std::vector<NllSummaryRow>& rows) {
  using detail::svg_number;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& r : rows) {
    const double ci = std::isfinite(r.nll.ci95) ? r.nll.ci95 : 0.0;
    lo = std::min(lo, r.nll.mean - ci);
    hi = std::max(hi, r.nll.mean + ci);
  }
  detail::Frame f;
  std::tie(f.lo, f.hi) = detail::padded_range(lo, hi);
  f.h = 20.0 * static_cast<double>(rows.size());
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"760\" height=\"" << svg_number(f.h + 80) << "\">\n"
     << "<!-- data: method,inference,rank,replicates,nll_mean,nll_ci95\n"
     << detail::svg_escape(nll_summary_csv(rows)) << "-->\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
     << "<text x=\"380\" y=\"18\" text-anchor=\"middle\" font-size=\"13\">Test NLL (mean, 95% interval)</text>\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    const double y = f.y0 + 20.0 * static_cast<double>(i) + 10.0;
    const double ci = std::isfinite(r.nll.ci95) ? r.nll.ci95 : 0.0;
    os << "<text x=\"" << svg_number(f.x0 - 8) << "\" y=\"" << svg_number(y + 4)
       << "\" text-anchor=\"end\" font-size=\"11\">" << detail::svg_escape(detail::label(r.method, r.inference, r.rank))
       << "</text>\n"
       << "<line x1=\"" << svg_number(f.x(r.nll.mean - ci)) << "\" y1=\"" << svg_number(y) << "\" x2=\""
       << svg_number(f.x(r.nll.mean + ci)) << "\" y2=\"" << svg_number(y) << "\" stroke=\"black\"/>\n"
       << "<circle cx=\"" << svg_number(f.x(r.nll.mean)) << "\" cy=\"" << svg_number(y) << "\" r=\"4\" fill=\""
       << (r.inference == "deterministic" ? "#7f7f7f" : "#1f77b4") << "\"/>\n";
  }
  const double axis_y = f.y0 + f.h + 10;
  os << "<line x1=\"" << svg_number(f.x0) << "\" y1=\"" << svg_number(axis_y) << "\" x2=\""
     << svg_number(f.x0 + f.w) << "\" y2=\"" << svg_number(axis_y) << "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double v = f.lo + (f.hi - f.lo) * k / 4.0;
    os << "<text x=\"" << svg_number(f.x(v)) << "\" y=\"" << svg_number(axis_y + 16)
       << "\" text-anchor=\"middle\" font-size=\"10\">" << svg_number(v).substr(0, 6) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

// One polyline per configuration: mean retention loss against quantile.
inline std::string retention_svg(const std::vector<SweepRow>& rows) {
  using detail::svg_number;
  std::map<ConfigKey, std::vector<std::pair<double, double>>> curves;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& r : rows) {
    curves[{r.method, r.inference, r.rank}].emplace_back(r.quantile, r.loss_mean);
    lo = std::min(lo, r.loss_mean);
    hi = std::max(hi, r.loss_mean);
  }
  std::tie(lo, hi) = detail::padded_range(lo, hi);
  const double x0 = 60, y0 = 30, w = 440, h = 300;
  auto px = [&](double q) { return x0 + q * w; };
  auto py = [&](double v) { return y0 + h - (v - lo) / (hi - lo) * h; };
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"760\" height=\""
     << svg_number(std::max(h + 80, 40 + 14.0 * static_cast<double>(curves.size()))) << "\">\n"
     << "<!-- data: method,inference,rank,quantile,loss_mean,loss_ci95\n"
     << detail::svg_escape(sweep_csv(rows)) << "-->\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
     << "<text x=\"280\" y=\"18\" text-anchor=\"middle\" font-size=\"13\">Test loss on the q most certain pixels</text>\n"
     << "<line x1=\"" << x0 << "\" y1=\"" << y0 + h << "\" x2=\"" << x0 + w << "\" y2=\"" << y0 + h
     << "\" stroke=\"black\"/>\n"
     << "<line x1=\"" << x0 << "\" y1=\"" << y0 << "\" x2=\"" << x0 << "\" y2=\"" << y0 + h << "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double q = k / 4.0, v = lo + (hi - lo) * k / 4.0;
    os << "<text x=\"" << svg_number(px(q)) << "\" y=\"" << y0 + h + 16
       << "\" text-anchor=\"middle\" font-size=\"10\">" << svg_number(q).substr(0, 4) << "</text>\n"
       << "<text x=\"" << x0 - 6 << "\" y=\"" << svg_number(py(v) + 3)
       << "\" text-anchor=\"end\" font-size=\"10\">" << svg_number(v).substr(0, 5) << "</text>\n";
  }
  std::size_t i = 0;
  for (const auto& [key, pts] : curves) {
    const char* colour = detail::palette[i % std::size(detail::palette)];
    os << "<polyline fill=\"none\" stroke=\"" << colour << "\" points=\"";
    for (std::size_t k = 0; k < pts.size(); ++k)
      os << (k ? " " : "") << svg_number(px(pts[k].first)) << "," << svg_number(py(pts[k].second));
    os << "\"/>\n"
       << "<text x=\"" << x0 + w + 12 << "\" y=\"" << svg_number(y0 + 14.0 * static_cast<double>(i) + 4)
       << "\" font-size=\"10\" fill=\"" << colour << "\">"
       << detail::svg_escape(detail::label(std::get<0>(key), std::get<1>(key), std::get<2>(key))) << "</text>\n";
    ++i;
  }
  os << "</svg>\n";
  return os.str();
}

// Writes nll_summary.csv, retention_summary.csv, rank_sweep.csv, nll.svg and
// retention.svg into <out>/report.
inline void cmd_report(const ExperimentConfig& c) {
  const std::filesystem::path out(c.out_dir);
  const ReportInputs in = collect_inputs(out);
  const auto nll = summarize_nll(in);
  const auto retention = summarize_retention(in);
  const std::filesystem::path dir = out / "report";
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create directory " + dir.string() + ": " + ec.message());
  write_file(dir / "nll_summary.csv", nll_summary_csv(nll));
  write_file(dir / "retention_summary.csv", sweep_csv(retention));
  write_file(dir / "rank_sweep.csv", sweep_csv(rank_sweep(retention)));
  write_file(dir / "nll.svg", nll_svg(nll));
  write_file(dir / "retention.svg", retention_svg(retention));
}

}  // namespace depthbayes

#endif  // DEPTHBAYES_REPORT_HPP
