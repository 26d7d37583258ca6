#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace jbsde {

enum class Status { kPass, kFail, kDiagnostic };

const char* to_string(Status s);

// Outcome of one theorem-derived check. `status == kPass` exactly when the
// statistic lies within the tolerance in the direction the check defines.
struct PropertyReport {
  std::string property;
  std::string theorem_tag;
  Status status = Status::kFail;
  double statistic = 0.0;
  double tolerance = 0.0;
  std::string note;

  bool passed() const { return status == Status::kPass; }
};

// Pass when statistic <= tolerance.
PropertyReport make_upper_report(std::string property, std::string tag, double statistic,
                                 double tolerance, std::string note = {});

// Rectangular table of doubles with named columns.
class CsvTable {
 public:
  CsvTable() = default;
  explicit CsvTable(std::vector<std::string> columns);

  void add_row(const std::vector<double>& row);

  const std::vector<std::string>& columns() const { return columns_; }
  std::size_t rows() const { return columns_.empty() ? 0 : values_.size() / columns_.size(); }
  std::size_t cols() const { return columns_.size(); }
  double at(std::size_t row, std::size_t col) const { return values_[row * columns_.size() + col]; }
  double at(std::size_t row, const std::string& col) const;
  std::size_t column_index(const std::string& name) const;
  std::vector<double> column(const std::string& name) const;

  // Comma separated, header row, values printed with round-trip precision.
  void write(std::ostream& os) const;
  std::string to_string() const;

 private:
  std::vector<std::string> columns_;
  std::vector<double> values_;
};

std::string format_double(double v);

}  // namespace jbsde
