#include "gpcal/data.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace gpcal {

SyntheticSpec::SyntheticSpec() {
  theta_true.resize(2);
  theta_true << 2.0, 1.0;
}

void SyntheticSpec::validate() const {
  if (n < 1) {
    throw Error("synthetic spec: n must be at least 1");
  }
  if (sigma2 < 0.0) {
    throw Error("synthetic spec: sigma2 must be non-negative");
  }
  if (theta_true.size() != 2) {
    throw Error("synthetic spec: theta must have two entries (intercept, slope)");
  }
}

Dataset generate_synthetic(const SyntheticSpec& spec, RandomStream& rng) {
  spec.validate();
  const auto n = static_cast<Eigen::Index>(spec.n);
  Matrix X(n, 2);
  Vector y(n);
  const double sd = std::sqrt(spec.sigma2);
  for (Eigen::Index i = 0; i < n; ++i) {
    double chi2 = 0.0;
    for (int j = 0; j < 4; ++j) {
      const double z = rng.normal();
      chi2 += z * z;
    }
    X(i, 0) = 1.0;
    X(i, 1) = chi2 - 2.0;
    y[i] = spec.theta_true[0] + spec.theta_true[1] * X(i, 1) + sd * rng.normal();
  }
  return Dataset(std::move(y), std::move(X));
}

Dataset generate_gaussian(std::size_t n, double mean, double sigma2, RandomStream& rng) {
  const auto rows = static_cast<Eigen::Index>(n);
  Vector y(rows);
  const double sd = std::sqrt(sigma2);
  for (Eigen::Index i = 0; i < rows; ++i) {
    y[i] = mean + sd * rng.normal();
  }
  return Dataset(std::move(y), Matrix::Ones(rows, 1));
}

void CsvSchema::validate() const {
  if (label_column.empty()) {
    throw Error("csv schema: label_column is required");
  }
  if (predictor_columns.empty()) {
    throw Error("csv schema: predictor_columns must be non-empty");
  }
  if (!label_mapping.empty()) {
    std::set<double> targets;
    for (const auto& [key, value] : label_mapping) {
      if (value != 1.0 && value != -1.0) {
        throw Error("csv schema: label_mapping values must be -1 or +1");
      }
      targets.insert(value);
    }
    if (label_mapping.size() != 2 || targets.size() != 2) {
      throw Error("csv schema: label_mapping must map exactly two values onto -1 and +1");
    }
  }
}

namespace {

std::string trim(std::string_view text) {
  auto begin = text.find_first_not_of(" \t\r\n");
  if (begin == std::string_view::npos) {
    return {};
  }
  auto end = text.find_last_not_of(" \t\r\n");
  std::string out(text.substr(begin, end - begin + 1));
  if (out.size() >= 2 && out.front() == '"' && out.back() == '"') {
    out = out.substr(1, out.size() - 2);
  }
  return out;
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string_view rest(line);
  while (true) {
    const auto comma = rest.find(',');
    cells.push_back(trim(rest.substr(0, comma)));
    if (comma == std::string_view::npos) {
      break;
    }
    rest.remove_prefix(comma + 1);
  }
  return cells;
}

double parse_number(const std::string& cell, std::size_t row, const std::string& column) {
  double value = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  if (!cell.empty() && *first == '+') {
    ++first;
  }
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (cell.empty() || ec != std::errc() || ptr != last || !std::isfinite(value)) {
    throw CsvError("parse error at row " + std::to_string(row) + ", column '" + column + "': '" + cell + "'");
  }
  return value;
}

std::string format_number(double value) {
  char buffer[64];
  const auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
  return std::string(buffer, ptr);
}

}  // namespace

Dataset load_csv(const std::filesystem::path& path, const CsvSchema& schema) {
  schema.validate();
  std::ifstream in(path);
  if (!in) {
    throw CsvError("cannot open csv file '" + path.string() + "'");
  }
  std::string line;
  if (!std::getline(in, line)) {
    throw CsvError("csv file '" + path.string() + "' is empty");
  }
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) {
    line.erase(0, 3);
  }
  const auto header = split_line(line);
  auto locate = [&](const std::string& name) {
    for (std::size_t j = 0; j < header.size(); ++j) {
      if (header[j] == name) {
        return j;
      }
    }
    throw CsvError("schema mismatch: column '" + name + "' not found in '" + path.string() + "'");
  };
  const std::size_t label_index = locate(schema.label_column);
  std::vector<std::size_t> predictor_index;
  for (const auto& name : schema.predictor_columns) {
    predictor_index.push_back(locate(name));
  }

  std::vector<double> labels;
  std::vector<std::vector<double>> rows;
  std::size_t row_number = 1;
  while (std::getline(in, line)) {
    ++row_number;
    if (trim(line).empty()) {
      continue;
    }
    const auto cells = split_line(line);
    if (cells.size() != header.size()) {
      throw CsvError("parse error at row " + std::to_string(row_number) + ": expected " +
                     std::to_string(header.size()) + " cells, found " + std::to_string(cells.size()));
    }
    const std::string& raw_label = cells[label_index];
    if (schema.label_mapping.empty()) {
      labels.push_back(parse_number(raw_label, row_number, schema.label_column));
    } else {
      const auto it = schema.label_mapping.find(raw_label);
      if (it == schema.label_mapping.end()) {
        throw CsvError("label domain error at row " + std::to_string(row_number) + ": '" + raw_label + "'");
      }
      labels.push_back(it->second);
    }
    std::vector<double> values;
    values.reserve(predictor_index.size());
    for (std::size_t j = 0; j < predictor_index.size(); ++j) {
      values.push_back(parse_number(cells[predictor_index[j]], row_number, schema.predictor_columns[j]));
    }
    rows.push_back(std::move(values));
  }

  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto offset = schema.add_intercept ? 1 : 0;
  const auto k = static_cast<Eigen::Index>(predictor_index.size()) + offset;
  Matrix X(n, k);
  Vector y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    y[i] = labels[static_cast<std::size_t>(i)];
    if (offset) {
      X(i, 0) = 1.0;
    }
    for (Eigen::Index j = offset; j < k; ++j) {
      X(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j - offset)];
    }
  }
  return Dataset(std::move(y), std::move(X), !schema.label_mapping.empty());
}

void save_csv(const Dataset& data, const std::filesystem::path& path, const std::string& label_column,
              const std::vector<std::string>& predictor_columns) {
  if (predictor_columns.size() + 1 != data.dim()) {
    throw CsvError("save_csv: expected " + std::to_string(data.dim() - 1) + " predictor names");
  }
  std::ofstream out(path);
  if (!out) {
    throw CsvError("cannot write csv file '" + path.string() + "'");
  }
  out << label_column;
  for (const auto& name : predictor_columns) {
    out << ',' << name;
  }
  out << '\n';
  for (Eigen::Index i = 0; i < data.y().size(); ++i) {
    out << format_number(data.y()[i]);
    for (Eigen::Index j = 1; j < data.X().cols(); ++j) {
      out << ',' << format_number(data.X()(i, j));
    }
    out << '\n';
  }
}

Dataset materialize_bootstrap(const Dataset& data, const std::vector<std::size_t>& indices) {
  const auto n = static_cast<Eigen::Index>(indices.size());
  Vector y(n);
  Matrix X(n, data.X().cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::size_t source = indices[static_cast<std::size_t>(i)];
    if (source >= data.size()) {
      throw Error("bootstrap index " + std::to_string(source) + " out of range for N = " +
                  std::to_string(data.size()));
    }
    y[i] = data.y()[static_cast<Eigen::Index>(source)];
    X.row(i) = data.X().row(static_cast<Eigen::Index>(source));
  }
  return Dataset(std::move(y), std::move(X), data.classification());
}

}  // namespace gpcal
