#include "lowrank/io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "lowrank/errors.hpp"

namespace lowrank {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) {
    s.remove_prefix(1);
  }
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(trim(line.substr(start)));
      return out;
    }
    out.push_back(trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
}

bool parse_real(std::string_view tok, double& out) {
  if (tok.empty()) return false;
  if (tok.front() == '+') tok.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), out);
  return ec == std::errc() && ptr == tok.data() + tok.size();
}

bool parse_int(std::string_view tok, long long& out) {
  if (tok.empty()) return false;
  std::string_view digits = tok.front() == '-' ? tok.substr(1) : tok;
  if (digits.empty() || !std::all_of(digits.begin(), digits.end(),
                                     [](char c) { return c >= '0' && c <= '9'; })) {
    return false;
  }
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), out);
  return ec == std::errc() && ptr == tok.data() + tok.size();
}

struct Line {
  std::size_t number;
  std::string_view text;
};

// Non-blank, non-comment lines with their 1-based numbers.
std::vector<Line> content_lines(std::string_view text) {
  std::vector<Line> out;
  std::size_t number = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    ++number;
    const std::string_view line = trim(text.substr(start, end - start));
    if (!line.empty() && line.front() != '#') out.push_back({number, line});
    start = end + 1;
  }
  return out;
}

bool is_numeric_row(const std::vector<std::string_view>& fields) {
  double v;
  return std::all_of(fields.begin(), fields.end(),
                     [&](std::string_view f) { return f.empty() || parse_real(f, v); });
}

bool is_triplet_header(std::string_view line) {
  std::string lower;
  for (char c : line) {
    if (c != ' ' && c != '\t') lower.push_back(static_cast<char>(std::tolower(c)));
  }
  return lower == "j,k,value";
}

std::string csv_opt(const std::optional<bool>& v) {
  return v ? (*v ? "true" : "false") : "";
}
const char* csv_bool(bool v) { return v ? "true" : "false"; }

}  // namespace

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

InputFormat detect_format(std::string_view text) {
  const auto lines = content_lines(text);
  if (lines.empty()) return InputFormat::Dense;
  if (is_triplet_header(lines.front().text)) return InputFormat::Triplets;
  std::size_t first = 0;
  if (!is_numeric_row(split(lines.front().text))) first = 1;
  if (first >= lines.size()) return InputFormat::Dense;
  const auto fields = split(lines[first].text);
  long long j, k;
  double v;
  if (fields.size() == 3 && parse_int(fields[0], j) && parse_int(fields[1], k) &&
      parse_real(fields[2], v)) {
    return InputFormat::Triplets;
  }
  return InputFormat::Dense;
}

MatrixXd parse_dense_csv(std::string_view text) {
  const auto lines = content_lines(text);
  std::vector<std::vector<double>> rows;
  std::size_t width = 0;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto fields = split(lines[i].text);
    if (i == 0 && !is_numeric_row(fields)) continue;
    std::vector<double> row;
    row.reserve(fields.size());
    for (std::size_t c = 0; c < fields.size(); ++c) {
      double v = std::numeric_limits<double>::quiet_NaN();
      if (!fields[c].empty() && !parse_real(fields[c], v)) {
        throw ParseError(lines[i].number, "line " + std::to_string(lines[i].number) + ": field " +
                                              std::to_string(c + 1) + " is not a number: '" +
                                              std::string(fields[c]) + "'");
      }
      row.push_back(v);
    }
    if (rows.empty()) {
      width = row.size();
    } else if (row.size() != width) {
      throw ParseError(lines[i].number, "line " + std::to_string(lines[i].number) + ": expected " +
                                            std::to_string(width) + " fields, found " +
                                            std::to_string(row.size()));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError(0, "no data rows");
  MatrixXd m(static_cast<Index>(rows.size()), static_cast<Index>(width));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < width; ++j)
      m(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
  return m;
}

TripletFile parse_triplet_file(std::string_view text) {
  const auto lines = content_lines(text);
  TripletFile out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto fields = split(lines[i].text);
    if (i == 0 && (is_triplet_header(lines[i].text) || !is_numeric_row(fields))) continue;
    const std::string where = "line " + std::to_string(lines[i].number) + ": ";
    if (fields.size() != 3) {
      throw ParseError(lines[i].number,
                       where + "expected 3 fields, found " + std::to_string(fields.size()));
    }
    long long j, k;
    double v;
    if (!parse_int(fields[0], j) || !parse_int(fields[1], k)) {
      throw ParseError(lines[i].number, where + "row and column must be integers");
    }
    if (!parse_real(fields[2], v) || !std::isfinite(v)) {
      throw ParseError(lines[i].number, where + "value must be a finite number");
    }
    if (j < 0 || k < 0) throw ParseError(lines[i].number, where + "negative index");
    out.triplets.push_back({static_cast<Index>(j), static_cast<Index>(k), v});
    out.lines.push_back(lines[i].number);
  }
  if (out.triplets.empty()) throw ParseError(0, "no triplet rows");
  return out;
}

std::vector<Triplet> parse_triplets(std::string_view text) {
  return parse_triplet_file(text).triplets;
}

std::pair<Index, Index> triplet_extent(const std::vector<Triplet>& triplets) {
  Index m1 = 0, m2 = 0;
  for (const auto& t : triplets) {
    m1 = std::max(m1, t.row + 1);
    m2 = std::max(m2, t.col + 1);
  }
  return {m1, m2};
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("error reading '" + path + "'");
  return ss.str();
}

void write_file(const std::string& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  out.flush();
  if (!out) throw IoError("error writing '" + path + "'");
}

std::string dense_csv(const MatrixXd& m) {
  std::string out;
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (j > 0) out += ',';
      out += format_double(m(i, j));
    }
    out += '\n';
  }
  return out;
}

std::string results_csv(const std::vector<TrialOutcome>& trials, bool include_runtime) {
  std::string out =
      "model,m1,m2,r,n,N,penalty,lambda,b,repeat,seed,mse,frob_err,rank_hat,rank_correct,"
      "oracle_match,bound_total,bound_holds,converged,fixed_point_residual,runtime_seconds\n";
  for (const auto& t : trials) {
    std::ostringstream row;
    row << to_string(t.model) << ',' << t.m1 << ',' << t.m2 << ',' << t.r << ',' << t.n << ','
        << format_double(t.rescaled_n) << ',' << t.penalty << ',' << format_double(t.lambda)
        << ',' << format_double(t.b) << ',' << t.repeat << ',' << t.seed << ','
        << format_double(t.mse) << ',' << format_double(t.frob_err) << ',' << t.rank_hat << ','
        << csv_bool(t.rank_correct) << ',' << csv_opt(t.oracle_match) << ','
        << (t.bound ? format_double(t.bound->total) : "") << ',' << csv_opt(t.bound_holds) << ','
        << csv_bool(t.converged) << ',' << format_double(t.fixed_point_residual) << ','
        << (include_runtime ? format_double(t.runtime_seconds) : "") << '\n';
    out += row.str();
  }
  return out;
}

std::string summary_csv(const std::vector<CellSummary>& cells, ObservationModel model) {
  std::string out =
      "model,n,N,penalty,count,converged,mean_lambda,mean_mse,std_mse,mean_frob_err,"
      "rank_recovery_rate\n";
  for (const auto& c : cells) {
    std::ostringstream row;
    row << to_string(model) << ',' << c.n << ',' << format_double(c.rescaled_n) << ','
        << c.penalty << ',' << c.count << ',' << c.converged << ','
        << format_double(c.mean_lambda) << ',' << format_double(c.mean_mse) << ','
        << format_double(c.std_mse) << ',' << format_double(c.mean_frob_err) << ','
        << format_double(c.rank_recovery_rate) << '\n';
    out += row.str();
  }
  return out;
}

}  // namespace lowrank
