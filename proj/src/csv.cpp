#include "conlasso/data_io.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>

namespace conlasso {

namespace {

std::vector<std::string> split_record(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(field);
      field.clear();
    } else if (c == '\r') {
      // tolerated; dropped
    } else {
      field += c;
    }
  }
  out.push_back(field);
  return out;
}

bool parse_double(const std::string& s, double* out) {
  if (s.empty()) return false;
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || errno == ERANGE) return false;
  while (*end == ' ' || *end == '\t') ++end;
  if (*end != '\0') return false;
  *out = v;
  return true;
}

}  // namespace

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
  CsvTable table;
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() && in.peek() == EOF) break;
    std::vector<std::string> fields = split_record(line);
    if (lineno == 1) {
      table.header = fields;
      continue;
    }
    if (fields.size() != table.header.size()) {
      std::ostringstream os;
      os << path << ": row " << lineno << " has " << fields.size() << " cells, expected "
         << table.header.size();
      throw Error(ErrorCode::Io, os.str());
    }
    std::vector<double> row(fields.size());
    for (std::size_t c = 0; c < fields.size(); ++c) {
      if (!parse_double(fields[c], &row[c])) {
        std::ostringstream os;
        os << path << ": non-numeric cell at row " << lineno << ", column '"
           << table.header[c] << "' (value '" << fields[c] << "')";
        throw Error(ErrorCode::Io, os.str());
      }
    }
    table.rows.push_back(std::move(row));
  }
  if (table.header.empty()) throw Error(ErrorCode::Io, path + ": missing header row");
  return table;
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const Matrix& values) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw Error(ErrorCode::Io, "cannot write " + path);
  for (std::size_t c = 0; c < header.size(); ++c)
    std::fprintf(f, "%s%s", header[c].c_str(), c + 1 < header.size() ? "," : "\n");
  for (Index r = 0; r < values.rows(); ++r)
    for (Index c = 0; c < values.cols(); ++c)
      std::fprintf(f, "%.17g%s", values(r, c), c + 1 < values.cols() ? "," : "\n");
  if (std::fclose(f) != 0) throw Error(ErrorCode::Io, "write failed for " + path);
}

Matrix read_matrix_csv(const std::string& path) {
  CsvTable t = read_csv(path);
  Matrix m(static_cast<Index>(t.rows.size()), static_cast<Index>(t.header.size()));
  for (std::size_t r = 0; r < t.rows.size(); ++r)
    for (std::size_t c = 0; c < t.header.size(); ++c)
      m(static_cast<Index>(r), static_cast<Index>(c)) = t.rows[r][c];
  return m;
}

Vector read_vector_csv(const std::string& path) {
  Matrix m = read_matrix_csv(path);
  if (m.cols() != 1)
    throw Error(ErrorCode::Io, path + ": expected a single column, found " +
                                   std::to_string(m.cols()));
  return m.col(0);
}

}  // namespace conlasso
