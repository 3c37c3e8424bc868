#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "lowrank/operators.hpp"
#include "lowrank/simlab.hpp"

namespace lowrank {

// Shortest round-trip decimal form; "nan", "inf", "-inf" for non-finite values.
std::string format_double(double v);

enum class InputFormat { Dense, Triplets };

/// A file is read as triplets when its header is "j,k,value" or when it has
/// three columns and the first data row parses as (integer, integer, real).
InputFormat detect_format(std::string_view text);

/// Comma-separated rows of reals. An optional non-numeric header line is
/// skipped; blank lines and lines starting with '#' are ignored. An empty
/// field stands for an unobserved entry and is returned as NaN.
/// Throws ParseError with the 1-based line number.
MatrixXd parse_dense_csv(std::string_view text);

/// Rows "j,k,value" with 0-based indices, optional header.
/// Throws ParseError on malformed rows or negative indices.
std::vector<Triplet> parse_triplets(std::string_view text);

/// Dimensions covering every index (max index + 1 per axis).
std::pair<Index, Index> triplet_extent(const std::vector<Triplet>& triplets);

// Line number of a triplet is its position in the file, needed for range errors.
struct TripletFile {
  std::vector<Triplet> triplets;
  std::vector<std::size_t> lines;
};
TripletFile parse_triplet_file(std::string_view text);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);

std::string dense_csv(const MatrixXd& m);

// Columns: model,m1,m2,r,n,N,penalty,lambda,b,repeat,seed,mse,frob_err,rank_hat,
// rank_correct,oracle_match,bound_total,bound_holds,converged,fixed_point_residual,
// runtime_seconds. Absent optionals and, unless requested, runtimes are empty.
std::string results_csv(const std::vector<TrialOutcome>& trials, bool include_runtime = false);

// One row per (n, penalty) cell.
std::string summary_csv(const std::vector<CellSummary>& cells, ObservationModel model);

}  // namespace lowrank
