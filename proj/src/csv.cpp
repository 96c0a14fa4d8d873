#include "optosync/csv.hpp"

#include <charconv>
#include <cmath>
#include <stdexcept>

namespace optosync {

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value, std::chars_format::general, 17);
  if (ec != std::errc{}) throw std::runtime_error("format_double: conversion failed");
  return std::string(buf, ptr);
}

CsvWriter::CsvWriter(std::ostream& out, const std::vector<std::string>& header)
    : out_(out), columns_(header.size()) {
  for (std::size_t i = 0; i < header.size(); ++i) out_ << (i ? "," : "") << header[i];
  out_ << '\n';
}

void CsvWriter::separator() {
  if (column_ >= columns_) throw std::logic_error("CsvWriter: too many columns in row");
  if (column_ > 0) out_ << ',';
  ++column_;
}

CsvWriter& CsvWriter::operator<<(double value) {
  separator();
  out_ << format_double(value);
  return *this;
}

CsvWriter& CsvWriter::operator<<(const std::string& text) {
  separator();
  out_ << text;
  return *this;
}

void CsvWriter::end_row() {
  if (column_ != columns_) throw std::logic_error("CsvWriter: row has too few columns");
  out_ << '\n';
  column_ = 0;
}

void CsvWriter::row(std::span<const double> values) {
  for (double v : values) *this << v;
  end_row();
}

std::vector<std::string> covariance_entry_names(const std::string& prefix) {
  static const char* names[6] = {"qm", "pm", "qd", "pd", "qc", "pc"};
  std::vector<std::string> out;
  out.reserve(21);
  for (int i = 0; i < 6; ++i) {
    for (int j = i; j < 6; ++j) out.push_back(prefix + names[i] + "_" + names[j]);
  }
  return out;
}

}  // namespace optosync
