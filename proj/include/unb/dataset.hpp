#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "unb/distributions.hpp"

namespace unb {

struct CsvOptions {
  char delimiter = ',';
  /// Without a header row the columns are named V1, V2, ...
  bool header = true;
};

/// Column-oriented table of real values sharing a common length n >= 1.
/// Immutable after construction.
class Dataset {
 public:
  Dataset(std::vector<std::string> names, std::vector<Eigen::VectorXd> columns);

  std::size_t n() const { return n_; }
  const std::vector<std::string>& column_names() const { return names_; }
  bool has_column(std::string_view name) const;
  const Eigen::VectorXd& column(std::string_view name) const;

  /// The named column as counts; throws DataError unless every entry is a
  /// non-negative integer.
  std::vector<Count> counts(std::string_view name) const;

 private:
  std::vector<std::string> names_;
  std::vector<Eigen::VectorXd> columns_;
  std::size_t n_ = 0;
};

/// Reads a delimited file with a header row, keeping the response and the
/// listed covariates. Parse errors carry the line number; missing values and
/// invalid responses carry the 1-based data row.
Dataset load_csv(const std::filesystem::path& path, const std::string& response,
                 const std::vector<std::string>& covariates, const CsvOptions& options = {});

/// Header and column names of a delimited file.
std::vector<std::string> read_csv_header(const std::filesystem::path& path,
                                         const CsvOptions& options = {});

void write_csv(const Dataset& data, const std::filesystem::path& path,
               const CsvOptions& options = {});

struct GroupSummary {
  std::string group_label;
  std::size_t n = 0;
  Count max = 0;
  Count min = 0;
  double mean = 0.0;
  double variance = 0.0;  ///< sample variance, divisor n - 1
  std::optional<double> dispersion_index;  ///< absent when mean or variance is 0
  double zero_proportion = 0.0;
};

struct FrequencyRow {
  Count value = 0;
  std::size_t count = 0;
  double relative = 0.0;
};

struct SummaryReport {
  std::string response;
  std::optional<std::string> group_by;
  std::vector<GroupSummary> groups;
  /// Relative frequencies of the response over the whole dataset.
  std::vector<FrequencyRow> frequencies;
};

SummaryReport summarize(const Dataset& data, const std::string& response,
                        const std::optional<std::string>& group_by = std::nullopt);

struct CovariateSummary {
  std::string name;
  double mean = 0.0;
  double stdev = 0.0;  ///< sample standard deviation, divisor n - 1
};

std::vector<CovariateSummary> covariate_summary(const Dataset& data,
                                                const std::vector<std::string>& covariates);

}  // namespace unb
