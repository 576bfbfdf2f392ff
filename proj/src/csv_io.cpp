#include "gls/csv_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <string_view>

#include "gls/error.hpp"

namespace gls {
namespace {

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    std::string_view cell = line.substr(start, comma == std::string_view::npos ? line.npos : comma - start);
    while (!cell.empty() && (cell.front() == ' ' || cell.front() == '\t')) cell.remove_prefix(1);
    while (!cell.empty() && (cell.back() == ' ' || cell.back() == '\t' || cell.back() == '\r')) cell.remove_suffix(1);
    out.push_back(cell);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

[[noreturn]] void parse_fail(const std::string& source, int line, const std::string& msg) {
  throw Error(Errc::ParseError, source + ":" + std::to_string(line) + ": " + msg);
}

double parse_double(std::string_view cell, const std::string& source, int line) {
  double v = 0.0;
  const auto* end = cell.data() + cell.size();
  const auto res = std::from_chars(cell.data(), end, v);
  if (cell.empty() || res.ec != std::errc() || res.ptr != end) {
    parse_fail(source, line, "not a number: '" + std::string(cell) + "'");
  }
  return v;
}

bool blank(const std::string& line) { return line.find_first_not_of(" \t\r") == std::string::npos; }

}  // namespace

std::string format_number(double v, Precision p) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, p == Precision::Full ? "%.17g" : "%.6g", v);
  return buf;
}

CsvTable read_numeric_csv(std::istream& in, const std::string& source) {
  CsvTable t;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!blank(line)) break;
  }
  if (line_no == 0 || blank(line)) parse_fail(source, line_no, "missing header");
  for (auto cell : split(line)) t.header.emplace_back(cell);

  std::vector<double> flat;
  Eigen::Index rows = 0;
  const auto width = t.header.size();
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line)) continue;
    const auto cells = split(line);
    if (cells.size() != width) {
      parse_fail(source, line_no, "expected " + std::to_string(width) + " fields, found " + std::to_string(cells.size()));
    }
    for (auto c : cells) flat.push_back(parse_double(c, source, line_no));
    t.lines.push_back(line_no);
    ++rows;
  }
  t.values.resize(rows, static_cast<Eigen::Index>(width));
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(width); ++j)
      t.values(i, j) = flat[static_cast<std::size_t>(i) * width + static_cast<std::size_t>(j)];
  return t;
}

void write_numeric_csv(std::ostream& out, const CsvTable& table, Precision p) {
  for (std::size_t j = 0; j < table.header.size(); ++j) out << (j ? "," : "") << table.header[j];
  out << '\n';
  for (Eigen::Index i = 0; i < table.values.rows(); ++i) {
    for (Eigen::Index j = 0; j < table.values.cols(); ++j) out << (j ? "," : "") << format_number(table.values(i, j), p);
    out << '\n';
  }
}

void write_dataset_csv(std::ostream& out, const Dataset& data, Precision p) {
  for (Eigen::Index j = 0; j < data.dim(); ++j) out << "feature_" << j << ',';
  out << "label\n";
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    for (Eigen::Index j = 0; j < data.dim(); ++j) out << format_number(data.features(i, j), p) << ',';
    out << data.labels[static_cast<std::size_t>(i)] << '\n';
  }
}

Dataset read_dataset_csv(std::istream& in, const std::string& source, int k) {
  const CsvTable t = read_numeric_csv(in, source);
  if (t.header.empty() || t.header.back() != "label") parse_fail(source, 1, "last column must be 'label'");
  const Eigen::Index d = t.values.cols() - 1;
  Dataset out;
  out.features = t.values.leftCols(d);
  int max_label = -1;
  for (Eigen::Index i = 0; i < t.values.rows(); ++i) {
    const double v = t.values(i, d);
    if (v != std::floor(v) || v < 0.0) {
      parse_fail(source, t.lines[static_cast<std::size_t>(i)], "label must be a non-negative integer");
    }
    out.labels.push_back(static_cast<int>(v));
    max_label = std::max(max_label, out.labels.back());
  }
  out.k = k > 0 ? k : std::max(2, max_label + 1);
  for (std::size_t i = 0; i < out.labels.size(); ++i) {
    if (out.labels[i] >= out.k) parse_fail(source, t.lines[i], "label " + std::to_string(out.labels[i]) + " outside [0, k)");
  }
  return out;
}

void write_trace_csv(std::ostream& out, const TrainTrace& trace, Precision p) {
  const std::size_t k = trace.w_true.size();
  out << "epoch,acc_src,acc_tgt,loss_da,loss_c";
  for (std::size_t y = 0; y < k; ++y) out << ",w_" << y;
  out << ",w_dist,jsd_label\n";
  for (const auto& e : trace.epochs) {
    out << e.epoch << ',' << format_number(e.acc_src, p) << ',' << format_number(e.acc_tgt, p) << ','
        << format_number(e.loss_da, p) << ',' << format_number(e.loss_c, p);
    for (std::size_t y = 0; y < k; ++y) out << ',' << format_number(e.w[y], p);
    out << ',' << format_number(e.w_dist, p) << ',' << format_number(e.jsd_label, p) << '\n';
  }
}

void write_bounds_header(std::ostream& out) { out << "check,epoch,lhs,rhs,holds,slack\n"; }

void write_bound_row(std::ostream& out, const BoundReport& r, int epoch, Precision p) {
  out << r.name << ',' << epoch << ',' << format_number(r.lhs, p) << ',' << format_number(r.rhs, p) << ','
      << (r.applicable ? (r.holds ? "true" : "false") : "na") << ',' << format_number(r.slack, p) << '\n';
}

void write_bounds_csv(std::ostream& out, const TrainTrace& trace, Precision p) {
  write_bounds_header(out);
  for (const auto& e : trace.epochs)
    for (const auto& r : e.bounds) write_bound_row(out, r, e.epoch, p);
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows, Precision p) {
  out << "task_id,jsd,acc_base,acc_variant,gain\n";
  for (const auto& r : rows) {
    out << r.task_id << ',' << format_number(r.jsd, p) << ',' << format_number(r.acc_base, p) << ','
        << format_number(r.acc_variant, p) << ',' << format_number(r.gain(), p) << '\n';
  }
}

}  // namespace gls
