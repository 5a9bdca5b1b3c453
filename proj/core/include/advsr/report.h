#ifndef ADVSR_REPORT_H_
#define ADVSR_REPORT_H_

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace advsr::harness {

// Six significant digits, "." decimal point; "inf", "-inf" and "nan" for
// non-finite values.
std::string format_number(double v);

// Plain comma-separated text: a header row, no quoting. Every row must have
// as many fields as the header.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Index of a header column; throws ParseError (line 1) if absent.
  std::size_t column(std::string_view name) const;
};

// Throws ParseError with the 1-based line number of the first bad line.
CsvTable parse_csv(std::string_view text);
std::string to_csv(const CsvTable& table);

struct Series {
  std::string label;
  std::vector<std::pair<double, double>> points;  // drawn in this order
};

struct Chart {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
};

// SVG 1.1 line chart: axes with ticks, a legend, one polyline per series and
// a marker per point. Output bytes depend only on the chart.
std::string render_svg(const Chart& chart);

// Sweep table (model, attack, snr_db, mean_wer, ...) to one chart per attack,
// in order of first appearance. Series are models in order of first
// appearance; x is snr_db, y is mean_wer.
std::vector<std::pair<std::string, Chart>> sweep_charts(const CsvTable& table);

// Renders every sweep CSV into `<out_dir>/<csv stem>_<attack>.svg`. Returns
// the written paths.
std::vector<std::filesystem::path> cmd_report(std::span<const std::filesystem::path> csvs,
                                              const std::filesystem::path& out_dir);

}  // namespace advsr::harness

#endif  // ADVSR_REPORT_H_
