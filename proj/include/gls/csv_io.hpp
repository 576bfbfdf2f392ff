#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <string>
#include <vector>

#include "gls/datagen.hpp"
#include "gls/diagnostics.hpp"
#include "gls/trainer.hpp"

namespace gls {

enum class Precision { Display, Full };

/// 6 significant digits for Display, round-trip precision for Full.
std::string format_number(double v, Precision p = Precision::Display);

/// A numeric table with a header row.
struct CsvTable {
  std::vector<std::string> header;
  Eigen::MatrixXd values;
  std::vector<int> lines;  // 1-based source line of each row
};

/// Reads a header line then rows of numbers; every row must match the header
/// width. Throws ParseError naming `source` and the 1-based line number.
CsvTable read_numeric_csv(std::istream& in, const std::string& source);
void write_numeric_csv(std::ostream& out, const CsvTable& table, Precision p = Precision::Display);

/// feature_0,...,feature_{d-1},label
void write_dataset_csv(std::ostream& out, const Dataset& data, Precision p = Precision::Display);
/// k <= 0 infers the class count as max label + 1. Throws ParseError.
Dataset read_dataset_csv(std::istream& in, const std::string& source, int k = 0);

/// epoch,acc_src,acc_tgt,loss_da,loss_c,w_0..w_{k-1},w_dist,jsd_label
void write_trace_csv(std::ostream& out, const TrainTrace& trace, Precision p = Precision::Display);

/// check,epoch,lhs,rhs,holds,slack; holds is "na" when the premise fails.
void write_bounds_csv(std::ostream& out, const TrainTrace& trace, Precision p = Precision::Display);
void write_bounds_header(std::ostream& out);
void write_bound_row(std::ostream& out, const BoundReport& r, int epoch, Precision p = Precision::Display);

struct SweepRow {
  int task_id = 0;
  double jsd = 0.0;
  double acc_base = 0.0;
  double acc_variant = 0.0;
  double gain() const { return acc_variant - acc_base; }
};

/// task_id,jsd,acc_base,acc_variant,gain
void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows, Precision p = Precision::Display);

}  // namespace gls
