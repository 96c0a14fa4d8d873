#pragma once

#include <initializer_list>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace optosync {

/// 17 significant digits, locale independent; "nan"/"inf"/"-inf" for non-finite.
std::string format_double(double value);

/// Minimal comma-separated writer; values are written with `format_double`.
class CsvWriter {
 public:
  CsvWriter(std::ostream& out, const std::vector<std::string>& header);

  CsvWriter& operator<<(double value);
  CsvWriter& operator<<(const std::string& text);
  void end_row();
  void row(std::span<const double> values);

 private:
  void separator();

  std::ostream& out_;
  std::size_t columns_;
  std::size_t column_ = 0;
};

/// Header names V_<a>_<b> for the 21 upper-triangle entries of a 6x6
/// covariance in fluctuation order, row-major.
std::vector<std::string> covariance_entry_names(const std::string& prefix = "V_");

}  // namespace optosync
