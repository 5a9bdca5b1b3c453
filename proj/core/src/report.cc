#include "advsr/report.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "advsr/error.h"

namespace advsr::harness {
namespace {

constexpr double kWidth = 640.0;
constexpr double kHeight = 400.0;
constexpr double kLeft = 64.0;
constexpr double kRight = 150.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 52.0;

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                    "#9467bd", "#8c564b", "#e377c2", "#17becf"};

std::string fixed(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << v;
  std::string s = os.str();
  return s == "-0.00" ? "0.00" : s;
}

std::string escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

double parse_number(const std::string& field, long line, std::string_view column) {
  if (field == "inf") return std::numeric_limits<double>::infinity();
  if (field == "-inf") return -std::numeric_limits<double>::infinity();
  if (field == "nan") return std::numeric_limits<double>::quiet_NaN();
  double v = 0.0;
  const auto* end = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(field.data(), end, v);
  if (ec != std::errc() || ptr != end || field.empty()) {
    throw ParseError("column '" + std::string(column) + "': '" + field + "' is not a number",
                     line);
  }
  return v;
}

// Round a positive span up to 1, 2 or 5 times a power of ten.
double nice_step(double span, int ticks) {
  const double raw = span / ticks;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    if (m * mag >= raw) return m * mag;
  }
  return 10.0 * mag;
}

}  // namespace

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream os;
  os << std::setprecision(6) << v;
  std::string s = os.str();
  return s == "-0" ? "0" : s;
}

std::size_t CsvTable::column(std::string_view name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw ParseError("missing column '" + std::string(name) + "'", 1);
  return static_cast<std::size_t>(it - header.begin());
}

CsvTable parse_csv(std::string_view text) {
  CsvTable table;
  long line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) {
      // Only a trailing newline may produce an empty line.
      if (pos < text.size()) throw ParseError("empty line", line_no);
      continue;
    }
    if (line.find('"') != std::string_view::npos) {
      throw ParseError("quoted fields are not supported", line_no);
    }
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      fields.emplace_back(line.substr(start, comma - start));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (table.header.empty()) {
      table.header = std::move(fields);
    } else if (fields.size() != table.header.size()) {
      throw ParseError("expected " + std::to_string(table.header.size()) + " fields, found " +
                           std::to_string(fields.size()),
                       line_no);
    } else {
      table.rows.push_back(std::move(fields));
    }
  }
  if (table.header.empty()) throw ParseError("missing header row", 1);
  return table;
}

std::string to_csv(const CsvTable& table) {
  std::string out;
  const auto emit = [&out](const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i > 0) out += ',';
      out += fields[i];
    }
    out += '\n';
  };
  emit(table.header);
  for (const auto& r : table.rows) emit(r);
  return out;
}

std::string render_svg(const Chart& chart) {
  double x_min = std::numeric_limits<double>::infinity(), x_max = -x_min;
  double y_max = 0.0;
  for (const auto& s : chart.series) {
    for (const auto& [x, y] : s.points) {
      x_min = std::min(x_min, x);
      x_max = std::max(x_max, x);
      y_max = std::max(y_max, y);
    }
  }
  if (!std::isfinite(x_min)) {
    x_min = 0.0;
    x_max = 1.0;
  }
  if (x_max == x_min) {
    x_min -= 1.0;
    x_max += 1.0;
  }
  const double y_step = nice_step(std::max(y_max, 100.0), 5);
  const double y_top = y_step * std::ceil(std::max(y_max, 100.0) / y_step);
  const double pw = kWidth - kLeft - kRight;
  const double ph = kHeight - kTop - kBottom;
  const auto px = [&](double x) { return kLeft + (x - x_min) / (x_max - x_min) * pw; };
  const auto py = [&](double y) { return kTop + ph - y / y_top * ph; };

  std::ostringstream os;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
     << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << kWidth
     << "\" height=\"" << kHeight << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
     << "<rect x=\"0\" y=\"0\" width=\"" << kWidth << "\" height=\"" << kHeight
     << "\" fill=\"white\"/>\n"
     << "<text x=\"" << fixed(kLeft + pw / 2) << "\" y=\"24\" text-anchor=\"middle\" "
     << "font-size=\"14\">" << escape(chart.title) << "</text>\n";

  // Axes.
  os << "<g stroke=\"black\" stroke-width=\"1\">\n"
     << "<line x1=\"" << fixed(kLeft) << "\" y1=\"" << fixed(kTop + ph) << "\" x2=\""
     << fixed(kLeft + pw) << "\" y2=\"" << fixed(kTop + ph) << "\"/>\n"
     << "<line x1=\"" << fixed(kLeft) << "\" y1=\"" << fixed(kTop) << "\" x2=\"" << fixed(kLeft)
     << "\" y2=\"" << fixed(kTop + ph) << "\"/>\n"
     << "</g>\n";

  // X ticks at every distinct x value.
  std::vector<double> xs;
  for (const auto& s : chart.series) {
    for (const auto& p : s.points) xs.push_back(p.first);
  }
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
  os << "<g class=\"x-ticks\">\n";
  for (double x : xs) {
    os << "<line x1=\"" << fixed(px(x)) << "\" y1=\"" << fixed(kTop + ph) << "\" x2=\""
       << fixed(px(x)) << "\" y2=\"" << fixed(kTop + ph + 5) << "\" stroke=\"black\"/>"
       << "<text x=\"" << fixed(px(x)) << "\" y=\"" << fixed(kTop + ph + 18)
       << "\" text-anchor=\"middle\">" << format_number(x) << "</text>\n";
  }
  os << "</g>\n<g class=\"y-ticks\">\n";
  for (double y = 0.0; y <= y_top + 1e-9; y += y_step) {
    os << "<line x1=\"" << fixed(kLeft - 5) << "\" y1=\"" << fixed(py(y)) << "\" x2=\""
       << fixed(kLeft) << "\" y2=\"" << fixed(py(y)) << "\" stroke=\"black\"/>"
       << "<text x=\"" << fixed(kLeft - 8) << "\" y=\"" << fixed(py(y) + 4)
       << "\" text-anchor=\"end\">" << format_number(y) << "</text>\n";
  }
  os << "</g>\n"
     << "<text x=\"" << fixed(kLeft + pw / 2) << "\" y=\"" << fixed(kHeight - 12)
     << "\" text-anchor=\"middle\">" << escape(chart.x_label) << "</text>\n"
     << "<text x=\"16\" y=\"" << fixed(kTop + ph / 2) << "\" text-anchor=\"middle\" "
     << "transform=\"rotate(-90 16 " << fixed(kTop + ph / 2) << ")\">" << escape(chart.y_label)
     << "</text>\n";

  const std::size_t n_colors = std::size(kPalette);
  for (std::size_t i = 0; i < chart.series.size(); ++i) {
    const auto& s = chart.series[i];
    const char* color = kPalette[i % n_colors];
    os << "<g class=\"series\" data-label=\"" << escape(s.label) << "\">\n<polyline points=\"";
    for (std::size_t k = 0; k < s.points.size(); ++k) {
      if (k > 0) os << ' ';
      os << fixed(px(s.points[k].first)) << ',' << fixed(py(s.points[k].second));
    }
    os << "\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    for (const auto& [x, y] : s.points) {
      os << "<circle cx=\"" << fixed(px(x)) << "\" cy=\"" << fixed(py(y)) << "\" r=\"3\" fill=\""
         << color << "\"/>\n";
    }
    os << "</g>\n";
    const double ly = kTop + 10 + 18.0 * static_cast<double>(i);
    const double lx = kLeft + pw + 16;
    os << "<line x1=\"" << fixed(lx) << "\" y1=\"" << fixed(ly) << "\" x2=\"" << fixed(lx + 20)
       << "\" y2=\"" << fixed(ly) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>"
       << "<text x=\"" << fixed(lx + 26) << "\" y=\"" << fixed(ly + 4) << "\">"
       << escape(s.label) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

std::vector<std::pair<std::string, Chart>> sweep_charts(const CsvTable& table) {
  const std::size_t c_model = table.column("model");
  const std::size_t c_attack = table.column("attack");
  const std::size_t c_snr = table.column("snr_db");
  const std::size_t c_wer = table.column("mean_wer");
  std::vector<std::pair<std::string, Chart>> charts;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const long line = static_cast<long>(r) + 2;
    const double x = parse_number(row[c_snr], line, "snr_db");
    const double y = parse_number(row[c_wer], line, "mean_wer");
    if (!std::isfinite(x) || !std::isfinite(y)) {
      throw ParseError("snr_db and mean_wer must be finite", line);
    }
    auto chart = std::find_if(charts.begin(), charts.end(),
                              [&](const auto& c) { return c.first == row[c_attack]; });
    if (chart == charts.end()) {
      Chart c;
      c.title = "WER under " + row[c_attack] + " vs SNR bound";
      c.x_label = "SNR bound (dB)";
      c.y_label = "mean WER (%)";
      charts.emplace_back(row[c_attack], std::move(c));
      chart = charts.end() - 1;
    }
    auto& series = chart->second.series;
    auto s = std::find_if(series.begin(), series.end(),
                          [&](const Series& v) { return v.label == row[c_model]; });
    if (s == series.end()) {
      series.push_back(Series{row[c_model], {}});
      s = series.end() - 1;
    }
    s->points.emplace_back(x, y);
  }
  return charts;
}

std::vector<std::filesystem::path> cmd_report(std::span<const std::filesystem::path> csvs,
                                              const std::filesystem::path& out_dir) {
  std::vector<std::filesystem::path> written;
  std::filesystem::create_directories(out_dir);
  for (const auto& path : csvs) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream text;
    text << in.rdbuf();
    const auto charts = sweep_charts(parse_csv(text.str()));
    for (const auto& [attack, chart] : charts) {
      const auto out = out_dir / (path.stem().string() + "_" + attack + ".svg");
      std::ofstream f(out, std::ios::binary);
      if (!f) throw IoError("cannot write " + out.string());
      f << render_svg(chart);
      if (!f) throw IoError("write failed: " + out.string());
      written.push_back(out);
    }
  }
  return written;
}

}  // namespace advsr::harness
