#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "gpsgld/samplers.hpp"

namespace gpsgld {

/// Column means/stds used to map between raw and standardized units.
struct Scaler {
  Vector x_mean, x_std;  // std entries are 0 for constant columns
  double y_mean = 0.0;
  double y_std = 1.0;

  double destandardize_mean(double m) const { return m * y_std + y_mean; }
  double destandardize_variance(double v) const { return v * y_std * y_std; }
  Vector standardize_point(const Eigen::Ref<const Vector>& x) const;
};

/// Zero-mean / unit-sample-std columns; constant columns are left at 0.
std::pair<Dataset, Scaler> standardize(const RowMatrix& x_raw, const Vector& y_raw);

enum class DatasetFormat { Csv };

/// Parses a CSV whose last column is the label, standardizes features and
/// labels. A header row is auto-detected (non-numeric first row). Parse
/// problems are reported with 1-based line numbers.
std::pair<Dataset, Scaler> load_dataset(const std::filesystem::path& path,
                                        DatasetFormat format = DatasetFormat::Csv);

/// Raw (unstandardized) parse of the same layout; used by ingest to surface
/// the scaler and by tests.
std::pair<RowMatrix, Vector> parse_csv_matrix(const std::filesystem::path& path);

/// Feature-only CSV (no label column), e.g. test inputs for prediction.
RowMatrix load_feature_csv(const std::filesystem::path& path, Eigen::Index expected_d);

// --- artifact serialization -------------------------------------------------

/// Columns: iter, log_sigma, log_tau, log_lambda, sigma, tau, lambda, eps_t,
/// frozen and, for MH chains, accepted. Values are written with enough
/// digits to round-trip exactly.
void write_chain_csv(const std::filesystem::path& path, const SampleChain& chain,
                     bool mh_chain);
SampleChain read_chain_csv(const std::filesystem::path& path);

void write_condition_sweep_csv(const std::filesystem::path& path,
                               const std::vector<HyperParams>& draws,
                               const std::vector<double>& kappas);

/// Rows of (iter, statistic, value).
struct DiagnosticRow {
  long iter = 0;
  std::string statistic;
  double value = 0.0;
};
void write_diagnostics_csv(const std::filesystem::path& path,
                           const std::vector<DiagnosticRow>& rows);

void write_predictions_csv(const std::filesystem::path& path,
                           const std::vector<std::pair<double, double>>& mean_var,
                           const Scaler* scaler = nullptr);

void write_dataset_csv(const std::filesystem::path& path, const Dataset& data);

}  // namespace gpsgld
