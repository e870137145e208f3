#include "tckls/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "tckls/error.hpp"

namespace tckls {

namespace {

std::string trim(std::string s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return {};
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_number(const std::string& s, const std::string& path, std::size_t row) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (!s.empty() && *first == '+') ++first;
  const auto res = std::from_chars(first, last, v);
  if (s.empty() || res.ec != std::errc() || res.ptr != last) {
    throw InputError(path + ":" + std::to_string(row) + ": cannot parse number '" + s + "'");
  }
  return v;
}

}  // namespace

Series read_series_csv(const std::string& path, std::optional<double> dt) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open data file '" + path + "'");
  if (dt && !(*dt > 0.0 && std::isfinite(*dt))) throw InputError("--dt must be positive");
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (!trim(line).empty()) break;
  }
  const auto header = split(trim(line));
  bool has_time = false;
  if (header.size() == 2 && header[0] == "time" && header[1] == "value") {
    has_time = true;
  } else if (!(header.size() == 1 && header[0] == "value")) {
    throw InputError(path + ": header must be 'time,value' or 'value'");
  }
  if (!has_time && !dt) throw InputError(path + ": value-only data needs --dt");

  Series s;
  while (std::getline(in, line)) {
    ++row;
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto cells = split(t);
    if (cells.size() != header.size()) {
      throw InputError(path + ":" + std::to_string(row) + ": expected " + std::to_string(header.size()) + " columns");
    }
    if (has_time) {
      const double tv = parse_number(cells[0], path, row);
      s.times.push_back(dt ? tv * *dt : tv);
      s.values.push_back(parse_number(cells[1], path, row));
    } else {
      s.times.push_back(static_cast<double>(s.values.size()) * *dt);
      s.values.push_back(parse_number(cells[0], path, row));
    }
  }
  return s;
}

void write_series_csv(const std::string& path, std::span<const double> times, std::span<const double> values) {
  write_columns_csv(path, {"time", "value"},
                    {std::vector<double>(times.begin(), times.end()), std::vector<double>(values.begin(), values.end())});
}

void write_columns_csv(const std::string& path, const std::vector<std::string>& header,
                       const std::vector<std::vector<double>>& columns) {
  if (header.size() != columns.size()) throw InputError("write_columns_csv: header/column mismatch");
  std::ofstream os(path);
  if (!os) throw InputError("cannot write '" + path + "'");
  os.precision(17);
  for (std::size_t c = 0; c < header.size(); ++c) os << (c ? "," : "") << header[c];
  os << '\n';
  const std::size_t rows = columns.empty() ? 0 : columns.front().size();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < columns.size(); ++c) os << (c ? "," : "") << columns[c].at(r);
    os << '\n';
  }
  if (!os) throw Error("write failed for '" + path + "'");
}

}  // namespace tckls
