#ifndef INVLMP_PLOT_HPP_
#define INVLMP_PLOT_HPP_

#include <filesystem>
#include <string>
#include <vector>

namespace invlmp {

/// Numeric CSV with a header row. Throws InputError on ragged rows, empty
/// files or non-numeric cells.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  std::vector<double> column(std::size_t j) const;
};

CsvTable parse_csv(const std::string& text);
CsvTable read_csv(const std::filesystem::path& path);

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

/// Polylines on shared linear axes.
std::string svg_line_chart(const std::vector<Series>& series, const std::string& title, const std::string& x_label,
                           const std::string& y_label);

/// Side-by-side bars per bin; `counts[s][b]` is series s in bin b.
std::string svg_histogram(const std::vector<double>& bin_edges, const std::vector<std::string>& names,
                          const std::vector<std::vector<double>>& counts, const std::string& title,
                          const std::string& x_label);

/// A table whose first two columns are bin_lo, bin_hi becomes a histogram
/// (one series per remaining column); anything else is a line chart of
/// every column against the first.
std::string svg_from_csv(const CsvTable& table, const std::string& title);

}  // namespace invlmp

#endif  // INVLMP_PLOT_HPP_
