#include "gpsgld/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace gpsgld {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    // trim surrounding whitespace
    const auto first = cell.find_first_not_of(" \t\r");
    const auto last = cell.find_last_not_of(" \t\r");
    cells.push_back(first == std::string::npos ? std::string()
                                               : cell.substr(first, last - first + 1));
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  const char* begin = s.data();
  const char* end = begin + s.size();
  auto res = std::from_chars(begin, end, out);
  return res.ec == std::errc() && res.ptr == end;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

Vector Scaler::standardize_point(const Eigen::Ref<const Vector>& x) const {
  Vector out(x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k)
    out[k] = x_std[k] > 0.0 ? (x[k] - x_mean[k]) / x_std[k] : 0.0;
  return out;
}

std::pair<Dataset, Scaler> standardize(const RowMatrix& x_raw, const Vector& y_raw) {
  const Eigen::Index n = x_raw.rows();
  const Eigen::Index d = x_raw.cols();
  if (n < 2) throw std::invalid_argument("standardize: need at least 2 rows");
  Scaler sc;
  sc.x_mean = x_raw.colwise().mean();
  sc.x_std = Vector(d);
  Dataset data;
  data.X.resize(n, d);
  for (Eigen::Index k = 0; k < d; ++k) {
    const double var =
        (x_raw.col(k).array() - sc.x_mean[k]).square().sum() / static_cast<double>(n - 1);
    const double sd = std::sqrt(var);
    sc.x_std[k] = sd;
    if (sd > 0.0)
      data.X.col(k) = (x_raw.col(k).array() - sc.x_mean[k]) / sd;
    else
      data.X.col(k).setZero();
  }
  sc.y_mean = y_raw.mean();
  const double y_var =
      (y_raw.array() - sc.y_mean).square().sum() / static_cast<double>(n - 1);
  sc.y_std = std::sqrt(y_var);
  if (sc.y_std > 0.0)
    data.y = (y_raw.array() - sc.y_mean) / sc.y_std;
  else
    data.y = Vector::Zero(n);
  data.validate();
  return {std::move(data), std::move(sc)};
}

std::pair<RowMatrix, Vector> parse_csv_matrix(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open " + path.string());
  std::string line;
  std::vector<std::vector<double>> rows;
  Eigen::Index cols = -1;
  long line_no = 0;
  bool first_content_line = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split_csv_line(line);
    std::vector<double> vals(cells.size());
    bool all_numeric = true;
    for (size_t c = 0; c < cells.size(); ++c)
      if (!parse_double(cells[c], vals[c])) {
        all_numeric = false;
        if (!first_content_line)
          throw std::invalid_argument(path.string() + ":" + std::to_string(line_no) +
                                      ": non-numeric cell '" + cells[c] + "'");
        break;
      }
    if (first_content_line) {
      first_content_line = false;
      if (!all_numeric) continue;  // header row
    }
    if (cols < 0) cols = static_cast<Eigen::Index>(vals.size());
    if (static_cast<Eigen::Index>(vals.size()) != cols)
      throw std::invalid_argument(path.string() + ":" + std::to_string(line_no) +
                                  ": ragged row (expected " + std::to_string(cols) +
                                  " cells, got " + std::to_string(vals.size()) + ")");
    rows.push_back(std::move(vals));
  }
  if (cols < 2)
    throw std::invalid_argument(path.string() +
                                ": need at least one feature column and a label column");
  if (rows.size() < 2)
    throw std::invalid_argument(path.string() + ": need at least 2 data rows, got " +
                                std::to_string(rows.size()));
  RowMatrix x(static_cast<Eigen::Index>(rows.size()), cols - 1);
  Vector y(static_cast<Eigen::Index>(rows.size()));
  for (size_t i = 0; i < rows.size(); ++i) {
    for (Eigen::Index k = 0; k + 1 < cols; ++k) x(static_cast<Eigen::Index>(i), k) = rows[i][k];
    y[static_cast<Eigen::Index>(i)] = rows[i][cols - 1];
  }
  return {std::move(x), std::move(y)};
}

std::pair<Dataset, Scaler> load_dataset(const std::filesystem::path& path,
                                        DatasetFormat) {
  auto [x, y] = parse_csv_matrix(path);
  return standardize(x, y);
}

RowMatrix load_feature_csv(const std::filesystem::path& path, Eigen::Index expected_d) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open " + path.string());
  std::string line;
  std::vector<std::vector<double>> rows;
  long line_no = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split_csv_line(line);
    std::vector<double> vals(cells.size());
    bool numeric = true;
    for (size_t c = 0; c < cells.size(); ++c)
      if (!parse_double(cells[c], vals[c])) numeric = false;
    if (first && !numeric) {
      first = false;
      continue;
    }
    first = false;
    if (!numeric)
      throw std::invalid_argument(path.string() + ":" + std::to_string(line_no) +
                                  ": non-numeric cell");
    if (static_cast<Eigen::Index>(vals.size()) != expected_d)
      throw std::invalid_argument(path.string() + ":" + std::to_string(line_no) +
                                  ": expected " + std::to_string(expected_d) +
                                  " feature columns");
    rows.push_back(std::move(vals));
  }
  RowMatrix x(static_cast<Eigen::Index>(rows.size()), expected_d);
  for (size_t i = 0; i < rows.size(); ++i)
    for (Eigen::Index k = 0; k < expected_d; ++k)
      x(static_cast<Eigen::Index>(i), k) = rows[i][k];
  return x;
}

void write_chain_csv(const std::filesystem::path& path, const SampleChain& chain,
                     bool mh_chain) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "iter,log_sigma,log_tau,log_lambda,sigma,tau,lambda,eps_t,frozen";
  if (mh_chain) out << ",accepted";
  out << "\n";
  for (long t = 0; t < chain.size(); ++t) {
    const Vector3& psi = chain.samples[t];
    const double eps = t < static_cast<long>(chain.step_sizes.size())
                           ? chain.step_sizes[t]
                           : 0.0;
    const bool frozen = chain.frozen_at && t + 1 >= *chain.frozen_at;
    out << (t + 1);
    for (int i = 0; i < 3; ++i) out << ',' << format_double(psi[i]);
    for (int i = 0; i < 3; ++i) out << ',' << format_double(std::exp(psi[i]));
    out << ',' << format_double(eps) << ',' << (frozen ? 1 : 0);
    if (mh_chain) out << ',' << int(t < static_cast<long>(chain.accepted.size())
                                        ? chain.accepted[t]
                                        : 0);
    out << "\n";
  }
}

SampleChain read_chain_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line))
    throw std::invalid_argument(path.string() + ": empty chain file");
  const auto header = split_csv_line(line);
  const bool has_accepted = !header.empty() && header.back() == "accepted";
  SampleChain chain;
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size())
      throw std::invalid_argument(path.string() + ":" + std::to_string(line_no) +
                                  ": ragged row");
    auto num = [&](size_t i) {
      double v;
      if (!parse_double(cells[i], v))
        throw std::invalid_argument(path.string() + ":" + std::to_string(line_no) +
                                    ": non-numeric cell '" + cells[i] + "'");
      return v;
    };
    chain.samples.push_back(Vector3(num(1), num(2), num(3)));
    chain.step_sizes.push_back(num(7));
    if (num(8) != 0.0 && !chain.frozen_at)
      chain.frozen_at = static_cast<long>(num(0));
    if (has_accepted) chain.accepted.push_back(num(9) != 0.0 ? 1 : 0);
  }
  chain.burn_in = chain.frozen_at.value_or(0);
  return chain;
}

void write_condition_sweep_csv(const std::filesystem::path& path,
                               const std::vector<HyperParams>& draws,
                               const std::vector<double>& kappas) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "draw_index,sigma,tau,lambda,kappa\n";
  for (size_t i = 0; i < kappas.size(); ++i) {
    out << i << ',' << format_double(draws[i].sigma) << ',' << format_double(draws[i].tau)
        << ',' << format_double(draws[i].lambda) << ',' << format_double(kappas[i])
        << "\n";
  }
}

void write_diagnostics_csv(const std::filesystem::path& path,
                           const std::vector<DiagnosticRow>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "iter,statistic,value\n";
  for (const auto& r : rows)
    out << r.iter << ',' << r.statistic << ',' << format_double(r.value) << "\n";
}

void write_predictions_csv(const std::filesystem::path& path,
                           const std::vector<std::pair<double, double>>& mean_var,
                           const Scaler* scaler) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "test_index,mean,variance";
  if (scaler) out << ",mean_raw,variance_raw";
  out << "\n";
  for (size_t i = 0; i < mean_var.size(); ++i) {
    out << i << ',' << format_double(mean_var[i].first) << ','
        << format_double(mean_var[i].second);
    if (scaler)
      out << ',' << format_double(scaler->destandardize_mean(mean_var[i].first)) << ','
          << format_double(scaler->destandardize_variance(mean_var[i].second));
    out << "\n";
  }
}

void write_dataset_csv(const std::filesystem::path& path, const Dataset& data) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (Eigen::Index k = 0; k < data.d(); ++k) out << 'x' << k << ',';
  out << "y\n";
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    for (Eigen::Index k = 0; k < data.d(); ++k) out << format_double(data.X(i, k)) << ',';
    out << format_double(data.y[i]) << "\n";
  }
}

}  // namespace gpsgld
