#include "rodflow/harness/csv.hpp"

#include "rodflow/error.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

namespace rodflow::harness {

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, r.ptr);
}

CsvWriter::CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header)
    : out_(path), columns_(header.size()) {
  require(out_.good(), ErrorCode::InvalidArgument, "csv: cannot open " + path.string());
  for (std::size_t i = 0; i < header.size(); ++i) out_ << (i ? "," : "") << header[i];
  out_ << '\n';
  out_.flush();
}

void CsvWriter::write_row(const std::vector<double>& values) {
  require_same_dim(columns_, values.size(), "csv row");
  for (std::size_t i = 0; i < values.size(); ++i) out_ << (i ? "," : "") << format_double(values[i]);
  out_ << '\n';
  out_.flush();
}

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  throw Error(ErrorCode::InvalidArgument, "csv: no column " + name);
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::InvalidArgument, "csv: cannot open " + path.string());
  CsvTable t;
  std::string line, cell;
  if (std::getline(in, line)) {
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) t.header.push_back(cell);
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) {
      double v = 0.0;
      if (cell == "nan") v = std::nan("");
      else if (cell == "inf") v = INFINITY;
      else if (cell == "-inf") v = -INFINITY;
      else {
        const auto r = std::from_chars(cell.data(), cell.data() + cell.size(), v);
        require(r.ec == std::errc(), ErrorCode::InvalidArgument, "csv: bad number " + cell);
      }
      row.push_back(v);
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

}  // namespace rodflow::harness
