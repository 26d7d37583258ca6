#include "jbsde/report.hpp"

#include <charconv>
#include <cmath>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace jbsde {

const char* to_string(Status s) {
  switch (s) {
    case Status::kPass:
      return "pass";
    case Status::kFail:
      return "fail";
    case Status::kDiagnostic:
      return "diagnostic";
  }
  return "fail";
}

PropertyReport make_upper_report(std::string property, std::string tag, double statistic,
                                 double tolerance, std::string note) {
  PropertyReport r;
  r.property = std::move(property);
  r.theorem_tag = std::move(tag);
  r.statistic = statistic;
  r.tolerance = tolerance;
  r.status = (std::isfinite(statistic) && statistic <= tolerance) ? Status::kPass : Status::kFail;
  r.note = std::move(note);
  return r;
}

CsvTable::CsvTable(std::vector<std::string> columns) : columns_(std::move(columns)) {}

void CsvTable::add_row(const std::vector<double>& row) {
  if (row.size() != columns_.size()) {
    throw std::invalid_argument("CsvTable: row has " + std::to_string(row.size()) +
                                " values, expected " + std::to_string(columns_.size()));
  }
  values_.insert(values_.end(), row.begin(), row.end());
}

std::size_t CsvTable::column_index(const std::string& name) const {
  for (std::size_t j = 0; j < columns_.size(); ++j) {
    if (columns_[j] == name) return j;
  }
  throw std::out_of_range("CsvTable: no column " + name);
}

double CsvTable::at(std::size_t row, const std::string& col) const {
  return at(row, column_index(col));
}

std::vector<double> CsvTable::column(const std::string& name) const {
  const std::size_t j = column_index(name);
  std::vector<double> out(rows());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = at(i, j);
  return out;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void CsvTable::write(std::ostream& os) const {
  for (std::size_t j = 0; j < columns_.size(); ++j) {
    os << (j ? "," : "") << columns_[j];
  }
  os << '\n';
  for (std::size_t i = 0; i < rows(); ++i) {
    for (std::size_t j = 0; j < columns_.size(); ++j) {
      os << (j ? "," : "") << format_double(at(i, j));
    }
    os << '\n';
  }
}

std::string CsvTable::to_string() const {
  std::ostringstream os;
  write(os);
  return os.str();
}

}  // namespace jbsde
