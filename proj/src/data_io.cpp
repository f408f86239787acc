#include "conlasso/data_io.hpp"

#include "conlasso/losses.hpp"
#include "conlasso/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace conlasso {

namespace fs = std::filesystem;
using nlohmann::json;

SyntheticData random_data(const SyntheticSpec& spec) {
  if (spec.n < 1 || spec.d < 1) throw Error(ErrorCode::InvalidArgument, "n and d must be >= 1");
  if (spec.d_nonzero > spec.d)
    throw Error(ErrorCode::InvalidArgument, "d_nonzero cannot exceed d");
  if (spec.k > spec.d) throw Error(ErrorCode::InvalidArgument, "k cannot exceed d");
  if (spec.sigma < 0) throw Error(ErrorCode::InvalidArgument, "sigma must be >= 0");
  if (spec.zerosum && spec.d_nonzero == 1)
    throw Error(ErrorCode::InvalidArgument, "a single nonzero cannot satisfy the zero-sum");

  Rng rng(spec.seed);
  SyntheticData out;

  out.X = Matrix(spec.n, spec.d);
  for (Index i = 0; i < spec.n; ++i)
    for (Index j = 0; j < spec.d; ++j) out.X(i, j) = rng.next_normal();

  std::vector<std::size_t> pos =
      rng.sample_without_replacement(std::size_t(spec.d), std::size_t(spec.d_nonzero));
  std::sort(pos.begin(), pos.end());
  out.support.assign(pos.begin(), pos.end());

  out.beta_true = Vector::Zero(spec.d);
  const Index m = spec.d_nonzero;
  if (m > 0) {
    if (spec.zerosum) {
      const Index npos = (m + 1) / 2, nneg = m - npos;
      for (Index i = 0; i < m; ++i)
        out.beta_true[out.support[i]] =
            i < npos ? 1.0 : -double(npos) / double(nneg);
    } else {
      for (Index i = 0; i < m; ++i) out.beta_true[out.support[i]] = (i % 2 == 0) ? 1.0 : -1.0;
    }
  }

  const Index extra = spec.zerosum ? spec.k - 1 : spec.k;
  out.C = Matrix(spec.k, spec.d);
  Index row = 0;
  if (spec.zerosum && spec.k >= 1) out.C.row(row++).setOnes();
  const double bnorm2 = out.beta_true.squaredNorm();
  for (Index e = 0; e < extra && row < spec.k; ++e, ++row) {
    for (Index j = 0; j < spec.d; ++j) out.C(row, j) = rng.next_normal();
    if (bnorm2 > 0.0) {
      const double proj = out.C.row(row).dot(out.beta_true) / bnorm2;
      out.C.row(row) -= proj * out.beta_true.transpose();
    }
  }

  out.y = out.X * out.beta_true;
  for (Index i = 0; i < spec.n; ++i) out.y[i] += spec.sigma * rng.next_normal();
  return out;
}

namespace {

std::vector<std::string> index_names(Index d, const std::string& prefix) {
  std::vector<std::string> names(d);
  for (Index j = 0; j < d; ++j) names[j] = prefix + std::to_string(j);
  return names;
}

void dump_json(const json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
  out << j.dump(2) << "\n";
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path);
}

}  // namespace

void write_synthetic(const SyntheticData& data, const SyntheticSpec& spec,
                     const std::string& out_dir) {
  fs::create_directories(out_dir);
  const auto names = index_names(data.X.cols(), "x");
  write_csv((fs::path(out_dir) / "X.csv").string(), names, data.X);
  write_csv((fs::path(out_dir) / "y.csv").string(), {"y"}, data.y);
  write_csv((fs::path(out_dir) / "C.csv").string(), names, data.C);

  json truth;
  truth["n"] = spec.n;
  truth["d"] = spec.d;
  truth["d_nonzero"] = spec.d_nonzero;
  truth["k"] = spec.k;
  truth["sigma"] = spec.sigma;
  truth["zerosum"] = spec.zerosum;
  truth["seed"] = spec.seed;
  truth["support"] = data.support;
  std::vector<double> bt(data.beta_true.data(), data.beta_true.data() + data.beta_true.size());
  truth["beta_true"] = bt;
  dump_json(truth, (fs::path(out_dir) / "truth.json").string());
}

Dataset load_dataset(const std::string& features_csv, const std::string& response_column,
                     const DatasetOptions& options) {
  CsvTable t = read_csv(features_csv);
  const Index n = static_cast<Index>(t.rows.size());
  if (n == 0) throw Error(ErrorCode::Io, features_csv + ": no data rows");

  std::set<std::string> seen;
  for (const auto& h : t.header)
    if (!seen.insert(h).second)
      throw Error(ErrorCode::Io, features_csv + ": duplicate column '" + h + "'");

  Index resp_col = -1;
  for (std::size_t c = 0; c < t.header.size(); ++c)
    if (t.header[c] == response_column) resp_col = static_cast<Index>(c);
  if (resp_col < 0)
    throw Error(ErrorCode::Io,
                features_csv + ": response column '" + response_column + "' not found");

  Dataset ds;
  ds.source = features_csv;
  ds.response_name = response_column;
  for (std::size_t c = 0; c < t.header.size(); ++c)
    if (static_cast<Index>(c) != resp_col) ds.feature_names.push_back(t.header[c]);
  const Index d = static_cast<Index>(ds.feature_names.size());

  ds.compositional_mask.assign(d, options.all_compositional);
  if (!options.all_compositional) {
    std::set<std::string> comp(options.compositional.begin(), options.compositional.end());
    for (const auto& name : options.compositional) {
      if (std::find(ds.feature_names.begin(), ds.feature_names.end(), name) ==
          ds.feature_names.end())
        throw Error(ErrorCode::Io, "compositional column '" + name + "' not found");
    }
    for (Index j = 0; j < d; ++j) ds.compositional_mask[j] = comp.count(ds.feature_names[j]) > 0;
  }

  ds.X = Matrix(n, d);
  ds.y = Vector(n);
  for (Index i = 0; i < n; ++i) {
    Index j = 0;
    for (std::size_t c = 0; c < t.header.size(); ++c) {
      if (static_cast<Index>(c) == resp_col)
        ds.y[i] = t.rows[i][c];
      else
        ds.X(i, j++) = t.rows[i][c];
    }
  }

  const bool any_comp =
      std::any_of(ds.compositional_mask.begin(), ds.compositional_mask.end(), [](bool b) { return b; });
  if (any_comp) {
    for (Index i = 0; i < n; ++i) {
      double rowsum = 0.0;
      for (Index j = 0; j < d; ++j) {
        if (!ds.compositional_mask[j]) continue;
        ds.X(i, j) += options.pseudocount;
        if (ds.X(i, j) < 0.0) {
          std::ostringstream os;
          os << "negative compositional value at row " << (i + 2) << ", column '"
             << ds.feature_names[j] << "'";
          throw Error(ErrorCode::Io, os.str());
        }
        rowsum += ds.X(i, j);
      }
      if (rowsum <= 0.0) {
        std::ostringstream os;
        os << "all-zero compositional row " << (i + 2)
           << (options.pseudocount > 0.0 ? " despite pseudocount" : "; set a pseudocount > 0");
        throw Error(ErrorCode::Io, os.str());
      }
      if (options.closure)
        for (Index j = 0; j < d; ++j)
          if (ds.compositional_mask[j]) ds.X(i, j) /= rowsum;
      if (options.log_transform)
        for (Index j = 0; j < d; ++j)
          if (ds.compositional_mask[j]) ds.X(i, j) = std::log(ds.X(i, j));
    }
  }

  std::vector<Vector> c_rows;
  if (!options.constraints_csv.empty()) {
    Matrix extra = read_matrix_csv(options.constraints_csv);
    if (extra.cols() != d)
      throw Error(ErrorCode::Io, options.constraints_csv + ": constraint rows must have " +
                                     std::to_string(d) + " columns");
    for (Index r = 0; r < extra.rows(); ++r) c_rows.push_back(extra.row(r).transpose());
  }
  if (options.zero_sum_row && any_comp) {
    Vector zs = Vector::Zero(d);
    for (Index j = 0; j < d; ++j) zs[j] = ds.compositional_mask[j] ? 1.0 : 0.0;
    c_rows.push_back(zs);
  }
  ds.C = Matrix(static_cast<Index>(c_rows.size()), d);
  for (std::size_t r = 0; r < c_rows.size(); ++r) ds.C.row(static_cast<Index>(r)) = c_rows[r];
  return ds;
}

std::vector<Index> ResultBox::selected() const {
  std::vector<Index> out;
  switch (kind) {
    case Kind::Fixed:
    case Kind::CV: {
      const Vector& b = kind == Kind::Fixed ? solution.beta : cv.refit.beta;
      for (Index j = 0; j < b.size(); ++j)
        if (std::abs(b[j]) > 1e-8) out.push_back(j);
      break;
    }
    case Kind::Path: {
      if (path.num_points() > 0) {
        Vector last = path.betas.col(path.num_points() - 1);
        for (Index j = 0; j < last.size(); ++j)
          if (std::abs(last[j]) > 1e-8) out.push_back(j);
      }
      break;
    }
    case Kind::StabSel:
      out = stabsel.selected;
      break;
  }
  return out;
}

std::string summary_json(const ResultBox& box) {
  json j;
  j["task"] = box.task;
  j["formulation"] = box.formulation;
  j["method"] = box.method;
  j["lambda"] = nullptr;
  if (box.lambda) j["lambda"] = *box.lambda;
  j["lambda_max"] = box.lambda_max;
  j["objective"] = nullptr;
  j["sigma"] = nullptr;
  j["iterations"] = nullptr;
  j["kkt_residual"] = nullptr;
  if (box.kind == ResultBox::Kind::Fixed || box.kind == ResultBox::Kind::CV) {
    const Solution& s = box.kind == ResultBox::Kind::Fixed ? box.solution : box.cv.refit;
    j["objective"] = s.objective;
    if (s.sigma) j["sigma"] = *s.sigma;
    j["iterations"] = s.diagnostics.iterations;
    if (std::isfinite(s.diagnostics.kkt_residual)) j["kkt_residual"] = s.diagnostics.kkt_residual;
  } else if (box.kind == ResultBox::Kind::Path) {
    j["iterations"] = box.path.num_events;
  }
  j["selected"] = box.selected();
  j["runtime_seconds"] = box.runtime_seconds;
  j["seed"] = nullptr;
  if (box.seed) j["seed"] = *box.seed;
  j["converged"] = box.converged;
  if (box.kind == ResultBox::Kind::CV) {
    j["lambda_min"] = box.cv.lambda_min;
    j["lambda_1se"] = box.cv.lambda_1se;
    j["rule"] = box.cv.rule == CVRule::OneSE ? "1se" : "min";
  }
  if (box.kind == ResultBox::Kind::StabSel) {
    j["threshold"] = box.stabsel.threshold;
    j["mode"] = to_string(box.stabsel.mode);
  }
  return j.dump(2);
}

namespace {

std::string feature_label(const ResultBox& box, Index j) {
  if (j >= 0 && j < Index(box.feature_names.size())) return box.feature_names[j];
  return "x" + std::to_string(j);
}

void write_beta_csv(const ResultBox& box, const Vector& beta, const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw Error(ErrorCode::Io, "cannot write " + path);
  std::fprintf(f, "feature,name,value\n");
  for (Index j = 0; j < beta.size(); ++j)
    std::fprintf(f, "%lld,%s,%.17g\n", static_cast<long long>(j),
                 feature_label(box, j).c_str(), beta[j]);
  std::fclose(f);
}

}  // namespace

void save_results(const ResultBox& box, const std::string& out_dir) {
  fs::create_directories(out_dir);
  {
    std::ofstream out(fs::path(out_dir) / "summary.json");
    if (!out) throw Error(ErrorCode::Io, "cannot write summary.json in " + out_dir);
    out << summary_json(box) << "\n";
  }
  switch (box.kind) {
    case ResultBox::Kind::Fixed:
      write_beta_csv(box, box.solution.beta, (fs::path(out_dir) / "beta.csv").string());
      break;
    case ResultBox::Kind::Path: {
      const Index npts = box.path.num_points();
      const Index d = box.path.betas.rows();
      Matrix m(npts, d + 1);
      for (Index i = 0; i < npts; ++i) {
        m(i, 0) = box.path.lambdas[i];
        m.row(i).tail(d) = box.path.betas.col(i).transpose();
      }
      std::vector<std::string> header{"lambda"};
      for (Index j = 0; j < d; ++j) header.push_back(feature_label(box, j));
      write_csv((fs::path(out_dir) / "path.csv").string(), header, m);
      break;
    }
    case ResultBox::Kind::CV: {
      const Index G = static_cast<Index>(box.cv.lambdas.size());
      Matrix m(G, 3);
      for (Index i = 0; i < G; ++i) {
        m(i, 0) = box.cv.lambdas[i];
        m(i, 1) = box.cv.mean_error[i];
        m(i, 2) = box.cv.std_error[i];
      }
      write_csv((fs::path(out_dir) / "cv.csv").string(), {"lambda", "mean_error", "std_error"},
                m);
      write_beta_csv(box, box.cv.refit.beta, (fs::path(out_dir) / "beta.csv").string());
      break;
    }
    case ResultBox::Kind::StabSel: {
      std::FILE* f = std::fopen((fs::path(out_dir) / "stabsel.csv").string().c_str(), "w");
      if (!f) throw Error(ErrorCode::Io, "cannot write stabsel.csv in " + out_dir);
      std::fprintf(f, "feature,name,frequency,selected\n");
      std::set<Index> sel(box.stabsel.selected.begin(), box.stabsel.selected.end());
      for (Index j = 0; j < box.stabsel.frequency.size(); ++j)
        std::fprintf(f, "%lld,%s,%.17g,%d\n", static_cast<long long>(j),
                     feature_label(box, j).c_str(), box.stabsel.frequency[j],
                     sel.count(j) ? 1 : 0);
      std::fclose(f);
      break;
    }
  }
}

namespace {

json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
  json j;
  in >> j;
  return j;
}

struct NamedTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> cells;
};

NamedTable read_csv_raw(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
  NamedTable t;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
      if (c == ',') {
        fields.push_back(cur);
        cur.clear();
      } else if (c != '\r') {
        cur += c;
      }
    }
    fields.push_back(cur);
    if (first) {
      t.header = fields;
      first = false;
    } else {
      t.cells.push_back(fields);
    }
  }
  return t;
}

void write_plot_rows(const std::string& out_csv,
                     const std::vector<std::array<std::string, 4>>& rows) {
  std::FILE* f = std::fopen(out_csv.c_str(), "w");
  if (!f) throw Error(ErrorCode::Io, "cannot write " + out_csv);
  std::fprintf(f, "series,x,y,label\n");
  for (const auto& r : rows)
    std::fprintf(f, "%s,%s,%s,%s\n", r[0].c_str(), r[1].c_str(), r[2].c_str(), r[3].c_str());
  std::fclose(f);
}

}  // namespace

void emit_plotdata(const std::string& result_dir, const std::string& kind,
                   const std::string& out_csv) {
  const fs::path dir(result_dir);
  std::vector<std::array<std::string, 4>> rows;

  if (kind == "coefficients") {
    const fs::path src = dir / "beta.csv";
    if (!fs::exists(src)) throw Error(ErrorCode::Io, "missing " + src.string());
    NamedTable t = read_csv_raw(src.string());
    for (const auto& r : t.cells) rows.push_back({"beta", r[0], r[2], r[1]});
  } else if (kind == "path") {
    const fs::path src = dir / "path.csv";
    if (!fs::exists(src)) throw Error(ErrorCode::Io, "missing " + src.string());
    NamedTable t = read_csv_raw(src.string());
    for (const auto& r : t.cells)
      for (std::size_t c = 1; c < t.header.size(); ++c)
        rows.push_back({std::to_string(c - 1), r[0], r[c], t.header[c]});
  } else if (kind == "stabsel-profile") {
    const fs::path src = dir / "stabsel.csv";
    if (!fs::exists(src)) throw Error(ErrorCode::Io, "missing " + src.string());
    NamedTable t = read_csv_raw(src.string());
    for (const auto& r : t.cells) rows.push_back({"frequency", r[0], r[2], r[1]});
    json s = load_json((dir / "summary.json").string());
    if (s.contains("threshold"))
      rows.push_back({"threshold", "", std::to_string(double(s["threshold"])), "threshold"});
  } else if (kind == "cv-curve") {
    const fs::path src = dir / "cv.csv";
    if (!fs::exists(src)) throw Error(ErrorCode::Io, "missing " + src.string());
    NamedTable t = read_csv_raw(src.string());
    for (const auto& r : t.cells) {
      rows.push_back({"mean", r[0], r[1], ""});
      const double m = std::strtod(r[1].c_str(), nullptr);
      const double se = std::strtod(r[2].c_str(), nullptr);
      std::ostringstream hi, lo;
      hi.precision(17);
      lo.precision(17);
      hi << (m + se);
      lo << (m - se);
      rows.push_back({"mean+se", r[0], hi.str(), ""});
      rows.push_back({"mean-se", r[0], lo.str(), ""});
    }
    json s = load_json((dir / "summary.json").string());
    if (s.contains("lambda_min"))
      rows.push_back({"lambda_min", std::to_string(double(s["lambda_min"])), "", "lambda_min"});
    if (s.contains("lambda_1se"))
      rows.push_back({"lambda_1se", std::to_string(double(s["lambda_1se"])), "", "lambda_1se"});
  } else {
    throw Error(ErrorCode::InvalidArgument, "unknown plot kind '" + kind + "'");
  }
  write_plot_rows(out_csv, rows);
}

}  // namespace conlasso
