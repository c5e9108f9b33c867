#include "rodflow/dataset.hpp"

#include "rodflow/error.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace rodflow {

void Dataset::validate() const {
  require(inputs.rows() > 0, ErrorCode::InvalidArgument, "dataset: no samples");
  require(inputs.cols() > 0 && targets.cols() > 0, ErrorCode::InvalidArgument, "dataset: empty input or target");
  require_same_dim(static_cast<std::size_t>(inputs.rows()), static_cast<std::size_t>(targets.rows()),
                   "dataset targets rows");
  require(all_finite(inputs) && all_finite(targets), ErrorCode::NonFinite, "dataset: non-finite value");
}

Dataset make_teacher_dataset(const TeacherConfig& c) {
  require(c.samples > 0 && c.input_dim > 0 && c.output_dim > 0 && c.hidden > 0, ErrorCode::InvalidArgument,
          "teacher dataset: sizes must be positive");
  std::mt19937_64 rng(c.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto n = static_cast<Eigen::Index>(c.samples);
  const auto d = static_cast<Eigen::Index>(c.input_dim);
  const auto h = static_cast<Eigen::Index>(c.hidden);
  const auto o = static_cast<Eigen::Index>(c.output_dim);

  auto draw = [&](Eigen::Index r, Eigen::Index k) {
    Mat m(r, k);
    for (Eigen::Index i = 0; i < r; ++i)
      for (Eigen::Index j = 0; j < k; ++j) m(i, j) = normal(rng);
    return m;
  };
  Dataset data;
  data.inputs = draw(n, d);
  const Mat w1 = draw(d, h) / std::sqrt(static_cast<double>(d));
  const Mat w2 = draw(h, o);
  const Mat hidden = (data.inputs * w1).array().tanh().matrix();
  data.targets = c.target_scale * hidden * w2 / std::sqrt(static_cast<double>(h));
  return data;
}

Dataset load_csv_dataset(const std::filesystem::path& path, std::size_t target_columns) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::InvalidArgument, "csv dataset: cannot open " + path.string());
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorCode::InvalidArgument, "csv dataset: missing header");
  std::size_t columns = 1;
  for (char ch : line) columns += (ch == ',');
  require(target_columns >= 1 && target_columns < columns, ErrorCode::InvalidArgument,
          "csv dataset: target column count must leave at least one input column");

  std::vector<std::vector<double>> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
      } catch (const std::exception&) {
        throw Error(ErrorCode::InvalidArgument,
                    "csv dataset: bad number '" + cell + "' on line " + std::to_string(line_no));
      }
    }
    require(row.size() == columns, ErrorCode::DimensionMismatch,
            "csv dataset: line " + std::to_string(line_no) + " has " + std::to_string(row.size()) + " fields");
    rows.push_back(std::move(row));
  }
  Dataset data;
  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto d = static_cast<Eigen::Index>(columns - target_columns);
  data.inputs.resize(n, d);
  data.targets.resize(n, static_cast<Eigen::Index>(target_columns));
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(columns); ++j) {
      const double x = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      if (j < d) data.inputs(i, j) = x;
      else data.targets(i, j - d) = x;
    }
  data.validate();
  return data;
}

}  // namespace rodflow
