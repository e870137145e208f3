#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace tckls {

struct Series {
  std::vector<double> times;
  std::vector<double> values;
};

/// Reads a "time,value" or "value" CSV. With `dt`, a value-only file gets
/// times i * dt and a time column is read as an index scaled by dt. A
/// value-only file without `dt` is an InputError.
Series read_series_csv(const std::string& path, std::optional<double> dt = std::nullopt);

/// "time,value" with 17 significant digits.
void write_series_csv(const std::string& path, std::span<const double> times, std::span<const double> values);

/// Generic two-column writer used for statistic curves and samples.
void write_columns_csv(const std::string& path, const std::vector<std::string>& header,
                       const std::vector<std::vector<double>>& columns);

}  // namespace tckls
