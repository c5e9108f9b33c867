#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace rodflow::harness {

// Shortest decimal that reads back to the same double; "nan", "inf", "-inf".
std::string format_double(double x);

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header);
  void write_row(const std::vector<double>& values);
  std::size_t columns() const { return columns_; }

 private:
  std::ofstream out_;
  std::size_t columns_;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
  std::size_t column(const std::string& name) const;
};

CsvTable read_csv(const std::filesystem::path& path);

}  // namespace rodflow::harness
