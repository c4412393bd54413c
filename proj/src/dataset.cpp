#include "unb/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include "unb/errors.hpp"

namespace unb {

namespace {

struct CsvRecord {
  std::vector<std::string> fields;
  std::size_t line = 0;  // line on which the record starts
};

// RFC 4180 reader: quoted fields, doubled quotes, embedded delimiters and
// newlines inside quotes, LF or CRLF line ends.
class CsvReader {
 public:
  CsvReader(std::istream& in, char delimiter) : in_(in), delim_(delimiter) { skip_bom(); }

  bool next(CsvRecord& rec) {
    rec.fields.clear();
    rec.line = line_ + 1;
    std::string field;
    bool in_quotes = false;
    bool any = false;
    bool quoted_field = false;
    char c;
    while (in_.get(c)) {
      any = true;
      if (in_quotes) {
        if (c == '"') {
          if (in_.peek() == '"') {
            in_.get(c);
            field.push_back('"');
          } else {
            in_quotes = false;
          }
        } else {
          if (c == '\n') ++line_;
          field.push_back(c);
        }
        continue;
      }
      if (c == '"') {
        if (!field.empty() || quoted_field) {
          throw DataError("malformed quoted field on line " + std::to_string(line_ + 1));
        }
        in_quotes = true;
        quoted_field = true;
      } else if (c == delim_) {
        rec.fields.push_back(std::move(field));
        field.clear();
        quoted_field = false;
      } else if (c == '\n') {
        ++line_;
        rec.fields.push_back(std::move(field));
        return true;
      } else if (c == '\r') {
        if (in_.peek() != '\n') field.push_back(c);
      } else {
        field.push_back(c);
      }
    }
    if (in_quotes) throw DataError("unterminated quoted field starting on line " + std::to_string(rec.line));
    if (!any) return false;
    ++line_;
    rec.fields.push_back(std::move(field));
    return true;
  }

 private:
  void skip_bom() {
    static constexpr char kBom[] = "\xEF\xBB\xBF";
    char buf[3];
    in_.read(buf, 3);
    if (in_.gcount() == 3 && std::equal(buf, buf + 3, kBom)) return;
    in_.clear();
    in_.seekg(0);
  }

  std::istream& in_;
  char delim_;
  std::size_t line_ = 0;
};

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t");
  return std::string(s.substr(first, last - first + 1));
}

bool is_missing(const std::string& s) { return s.empty() || s == "NA" || s == "na" || s == "NaN"; }

bool blank_record(const CsvRecord& rec) {
  return rec.fields.size() == 1 && trim(rec.fields[0]).empty();
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  return in;
}

// Column names, and with header = false the first record, which is data.
std::vector<std::string> parse_header(CsvReader& reader, const std::filesystem::path& path,
                                      const CsvOptions& options, std::optional<CsvRecord>* first = nullptr) {
  CsvRecord rec;
  while (reader.next(rec)) {
    if (blank_record(rec)) continue;
    std::vector<std::string> names;
    if (options.header) {
      for (auto& f : rec.fields) names.push_back(trim(f));
    } else {
      for (std::size_t j = 0; j < rec.fields.size(); ++j) names.push_back("V" + std::to_string(j + 1));
      if (first) *first = std::move(rec);
    }
    return names;
  }
  throw DataError("'" + path.string() + "' is empty" +
                  (options.header ? ": a header row is required (line 1)" : ": no data (line 1)"));
}

std::string format_value(double v) {
  std::ostringstream os;
  os << std::setprecision(6) << v;
  return os.str();
}

}  // namespace

Dataset::Dataset(std::vector<std::string> names, std::vector<Eigen::VectorXd> columns)
    : names_(std::move(names)), columns_(std::move(columns)) {
  if (names_.size() != columns_.size()) throw DataError("Dataset: names and columns differ in number");
  if (columns_.empty()) throw DataError("Dataset: at least one column is required");
  n_ = static_cast<std::size_t>(columns_.front().size());
  if (n_ == 0) throw DataError("Dataset: no rows");
  std::set<std::string> seen;
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (!seen.insert(names_[i]).second) throw DataError("Dataset: duplicate column '" + names_[i] + "'");
    if (static_cast<std::size_t>(columns_[i].size()) != n_) {
      throw DataError("Dataset: column '" + names_[i] + "' has a different length");
    }
  }
}

bool Dataset::has_column(std::string_view name) const {
  return std::find(names_.begin(), names_.end(), name) != names_.end();
}

const Eigen::VectorXd& Dataset::column(std::string_view name) const {
  const auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) throw DataError("unknown column '" + std::string(name) + "'");
  return columns_[static_cast<std::size_t>(it - names_.begin())];
}

std::vector<Count> Dataset::counts(std::string_view name) const {
  const auto& col = column(name);
  std::vector<Count> out(n_);
  for (std::size_t i = 0; i < n_; ++i) {
    const double v = col[static_cast<Eigen::Index>(i)];
    if (!(v >= 0.0) || v != std::floor(v) || v > 9.0e15) {
      throw DataError("column '" + std::string(name) + "' row " + std::to_string(i + 1) +
                      ": expected a non-negative integer count, got " + format_value(v));
    }
    out[i] = static_cast<Count>(v);
  }
  return out;
}

std::vector<std::string> read_csv_header(const std::filesystem::path& path, const CsvOptions& options) {
  auto in = open_input(path);
  CsvReader reader(in, options.delimiter);
  return parse_header(reader, path, options);
}

Dataset load_csv(const std::filesystem::path& path, const std::string& response,
                 const std::vector<std::string>& covariates, const CsvOptions& options) {
  auto in = open_input(path);
  CsvReader reader(in, options.delimiter);
  std::optional<CsvRecord> pending;
  const auto header = parse_header(reader, path, options, &pending);

  std::vector<std::string> wanted{response};
  for (const auto& c : covariates) {
    if (std::find(wanted.begin(), wanted.end(), c) == wanted.end()) wanted.push_back(c);
  }
  std::vector<std::size_t> index;
  for (const auto& name : wanted) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) {
      throw DataError("'" + path.string() + "': missing column '" + name + "'");
    }
    index.push_back(static_cast<std::size_t>(it - header.begin()));
  }

  std::vector<std::vector<double>> values(wanted.size());
  CsvRecord rec;
  std::size_t row = 0;
  while (pending || reader.next(rec)) {
    if (pending) {
      rec = std::move(*pending);
      pending.reset();
    }
    if (blank_record(rec)) continue;
    ++row;
    if (rec.fields.size() != header.size()) {
      throw DataError("line " + std::to_string(rec.line) + ": expected " + std::to_string(header.size()) +
                      " fields, found " + std::to_string(rec.fields.size()));
    }
    for (std::size_t k = 0; k < wanted.size(); ++k) {
      const std::string raw = trim(rec.fields[index[k]]);
      const std::string where = "row " + std::to_string(row) + " (line " + std::to_string(rec.line) +
                                "), column '" + wanted[k] + "'";
      if (is_missing(raw)) throw DataError(where + ": missing value");
      double v = 0.0;
      const char* end = raw.data() + raw.size();
      const auto [ptr, ec] = std::from_chars(raw.data(), end, v);
      if (ec != std::errc() || ptr != end || !std::isfinite(v)) {
        throw DataError(where + ": cannot parse '" + raw + "' as a number");
      }
      if (k == 0 && (v < 0.0 || v != std::floor(v))) {
        throw DataError(where + ": response must be a non-negative integer, got '" + raw + "'");
      }
      values[k].push_back(v);
    }
  }
  if (row == 0) throw DataError("'" + path.string() + "': no data rows after the header");

  std::vector<Eigen::VectorXd> columns;
  for (auto& v : values) columns.emplace_back(Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
  return Dataset(std::move(wanted), std::move(columns));
}

void write_csv(const Dataset& data, const std::filesystem::path& path, const CsvOptions& options) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  const auto& names = data.column_names();
  if (options.header) {
    for (std::size_t j = 0; j < names.size(); ++j) {
      if (j) out << options.delimiter;
      const bool quote = names[j].find_first_of(std::string("\"\n\r") + options.delimiter) != std::string::npos;
      if (quote) {
        out << '"';
        for (char c : names[j]) out << (c == '"' ? "\"\"" : std::string(1, c));
        out << '"';
      } else {
        out << names[j];
      }
    }
    out << '\n';
  }
  out << std::setprecision(17);
  for (std::size_t i = 0; i < data.n(); ++i) {
    for (std::size_t j = 0; j < names.size(); ++j) {
      if (j) out << options.delimiter;
      out << data.column(names[j])[static_cast<Eigen::Index>(i)];
    }
    out << '\n';
  }
  if (!out) throw DataError("write to '" + path.string() + "' failed");
}

namespace {

GroupSummary summarize_counts(std::string label, const std::vector<Count>& xs) {
  GroupSummary g;
  g.group_label = std::move(label);
  g.n = xs.size();
  const double n = static_cast<double>(g.n);
  g.max = *std::max_element(xs.begin(), xs.end());
  g.min = *std::min_element(xs.begin(), xs.end());
  double sum = 0.0, zeros = 0.0;
  for (Count x : xs) {
    sum += static_cast<double>(x);
    zeros += x == 0 ? 1.0 : 0.0;
  }
  g.mean = sum / n;
  double ss = 0.0;
  for (Count x : xs) ss += (static_cast<double>(x) - g.mean) * (static_cast<double>(x) - g.mean);
  g.variance = g.n > 1 ? ss / (n - 1.0) : 0.0;
  if (g.mean > 0.0 && g.variance > 0.0) g.dispersion_index = g.variance / g.mean;
  g.zero_proportion = zeros / n;
  return g;
}

}  // namespace

SummaryReport summarize(const Dataset& data, const std::string& response,
                        const std::optional<std::string>& group_by) {
  SummaryReport report;
  report.response = response;
  report.group_by = group_by;
  const auto ys = data.counts(response);

  if (!group_by) {
    report.groups.push_back(summarize_counts("all", ys));
  } else {
    const auto& g = data.column(*group_by);
    std::map<double, std::vector<Count>> groups;
    for (std::size_t i = 0; i < ys.size(); ++i) groups[g[static_cast<Eigen::Index>(i)]].push_back(ys[i]);
    for (const auto& [value, members] : groups) {
      report.groups.push_back(summarize_counts(*group_by + "=" + format_value(value), members));
    }
  }

  std::map<Count, std::size_t> freq;
  for (Count y : ys) ++freq[y];
  for (const auto& [value, count] : freq) {
    report.frequencies.push_back({value, count, static_cast<double>(count) / static_cast<double>(ys.size())});
  }
  return report;
}

std::vector<CovariateSummary> covariate_summary(const Dataset& data,
                                                const std::vector<std::string>& covariates) {
  std::vector<CovariateSummary> out;
  for (const auto& name : covariates) {
    const auto& col = data.column(name);
    const double n = static_cast<double>(col.size());
    const double mean = col.mean();
    const double ss = (col.array() - mean).square().sum();
    out.push_back({name, mean, col.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0});
  }
  return out;
}

}  // namespace unb
