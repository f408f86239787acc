#pragma once

#include "conlasso/types.hpp"

#include <string>
#include <vector>

namespace conlasso {

// --- csv primitives (RFC 4180, '.' decimals, mandatory header) ---

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

CsvTable read_csv(const std::string& path);
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const Matrix& values);  // 17 significant digits

Matrix read_matrix_csv(const std::string& path);
Vector read_vector_csv(const std::string& path);

// --- synthetic generation ---

struct SyntheticSpec {
  Index n = 100;
  Index d = 100;
  Index d_nonzero = 5;
  Index k = 1;
  double sigma = 0.5;
  bool zerosum = true;
  std::uint64_t seed = 0;
};

struct SyntheticData {
  Matrix X;
  Matrix C;
  Vector y;
  Vector beta_true;
  std::vector<Index> support;
};

// Normally distributed X, a planted sparse beta (sign-balanced to exact
// zero sum when requested), C = ones row under the zero-sum flag plus
// extra normal rows orthogonalized against the planted beta, and
// y = X beta + sigma * noise. One portable stream, draw order: X entries
// row-major, support positions, extra C rows, noise.
SyntheticData random_data(const SyntheticSpec& spec);

void write_synthetic(const SyntheticData& data, const SyntheticSpec& spec,
                     const std::string& out_dir);

// --- dataset ingestion (log-contrast preprocessing) ---

struct DatasetOptions {
  std::vector<std::string> compositional;  // columns treated as parts
  bool all_compositional = false;          // every non-response column
  double pseudocount = 0.5;                // added to parts before closure
  bool closure = true;                     // row-normalize parts to sum 1
  bool log_transform = true;
  bool zero_sum_row = true;                // constraint over the parts
  std::string constraints_csv;             // optional explicit C rows
};

struct Dataset {
  std::vector<std::string> feature_names;
  std::vector<bool> compositional_mask;
  Matrix X;
  Vector y;
  Matrix C;
  std::string response_name;
  std::string source;
};

Dataset load_dataset(const std::string& features_csv, const std::string& response_column,
                     const DatasetOptions& options);

// --- result serialization ---

struct ResultBox {
  enum class Kind { Fixed, Path, CV, StabSel } kind = Kind::Fixed;
  Solution solution;  // Fixed result or CV refit
  PathResult path;
  CVResult cv;
  StabSelResult stabsel;

  std::string task;  // "fixed" | "path" | "cv" | "stabsel"
  std::string formulation;
  std::string method;
  double lambda_max = 0.0;
  std::optional<double> lambda;
  std::optional<std::uint64_t> seed;
  double runtime_seconds = 0.0;
  bool converged = true;
  std::vector<std::string> feature_names;  // may be empty (indices used)

  std::vector<Index> selected() const;
};

// writes summary.json plus the kind's csv side files (beta.csv, path.csv,
// cv.csv, stabsel.csv)
void save_results(const ResultBox& box, const std::string& out_dir);

std::string summary_json(const ResultBox& box);

// tidy long-format plot data (series,x,y,label) derived from a saved
// result directory; kind is one of coefficients | path | stabsel-profile
// | cv-curve
void emit_plotdata(const std::string& result_dir, const std::string& kind,
                   const std::string& out_csv);

}  // namespace conlasso
