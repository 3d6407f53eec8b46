#include "manp/field_io.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <vector>

namespace manp {
namespace {

constexpr int kDigits = std::numeric_limits<double>::max_digits10;

std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  return cells;
}

double parse_double(const std::string& s, std::size_t row) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ValidationError("csv row " + std::to_string(row) + ": cannot parse number '" + s + "'");
  }
}

void check_coordinate(double got, double want, double h, std::size_t row) {
  if (std::abs(got - want) > 1e-9 * std::max(1.0, h)) {
    throw ValidationError("csv row " + std::to_string(row) + ": coordinate does not match grid");
  }
}

void expect_header(std::istream& in, const std::string& header) {
  std::string line;
  if (!std::getline(in, line) || line != header) {
    throw ValidationError("csv header mismatch, expected '" + header + "'");
  }
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path + " for writing");
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  return in;
}

}  // namespace

void write_cell_csv(std::ostream& out, const CellFieldd& field) {
  const GridSpec& g = field.grid();
  out << "x,y,value\n" << std::setprecision(kDigits);
  for (Index j = 0; j < g.ny(); ++j)
    for (Index i = 0; i < g.nx(); ++i)
      out << g.x(i) << ',' << g.y(j) << ',' << field.values()(i, j) << '\n';
}

void write_face_csv(std::ostream& out, const FaceFieldd& field) {
  const GridSpec& g = field.grid();
  out << "x,y,component,value\n" << std::setprecision(kDigits);
  for (Index j = 0; j < g.ny(); ++j) {
    for (Index i = 0; i < g.nx(); ++i) {
      out << g.x_face(i) << ',' << g.y(j) << ",x," << field.xs()(i, j) << '\n';
      out << g.x(i) << ',' << g.y_face(j) << ",y," << field.ys()(i, j) << '\n';
    }
  }
}

CellFieldd read_cell_csv(std::istream& in, const GridSpec& g) {
  expect_header(in, "x,y,value");
  CellFieldd out(g);
  std::string line;
  std::size_t row = 1;
  for (Index j = 0; j < g.ny(); ++j) {
    for (Index i = 0; i < g.nx(); ++i) {
      ++row;
      if (!std::getline(in, line)) throw ValidationError("cell csv truncated at row " + std::to_string(row));
      const auto cells = split_row(line);
      if (cells.size() != 3) throw ValidationError("cell csv row " + std::to_string(row) + ": expected 3 columns");
      check_coordinate(parse_double(cells[0], row), g.x(i), g.dx(), row);
      check_coordinate(parse_double(cells[1], row), g.y(j), g.dy(), row);
      out.values()(i, j) = parse_double(cells[2], row);
    }
  }
  return out;
}

FaceFieldd read_face_csv(std::istream& in, const GridSpec& g) {
  expect_header(in, "x,y,component,value");
  FaceFieldd out(g);
  std::string line;
  std::size_t row = 1;
  for (Index j = 0; j < g.ny(); ++j) {
    for (Index i = 0; i < g.nx(); ++i) {
      for (const char* comp : {"x", "y"}) {
        ++row;
        if (!std::getline(in, line)) throw ValidationError("face csv truncated at row " + std::to_string(row));
        const auto cells = split_row(line);
        if (cells.size() != 4 || cells[2] != comp) {
          throw ValidationError("face csv row " + std::to_string(row) + ": malformed");
        }
        const bool is_x = comp[0] == 'x';
        check_coordinate(parse_double(cells[0], row), is_x ? g.x_face(i) : g.x(i), g.dx(), row);
        check_coordinate(parse_double(cells[1], row), is_x ? g.y(j) : g.y_face(j), g.dy(), row);
        (is_x ? out.xs() : out.ys())(i, j) = parse_double(cells[3], row);
      }
    }
  }
  return out;
}

void save_cell_csv(const std::string& path, const CellFieldd& field) {
  auto out = open_out(path);
  write_cell_csv(out, field);
}

void save_face_csv(const std::string& path, const FaceFieldd& field) {
  auto out = open_out(path);
  write_face_csv(out, field);
}

CellFieldd load_cell_csv(const std::string& path, const GridSpec& grid) {
  auto in = open_in(path);
  return read_cell_csv(in, grid);
}

FaceFieldd load_face_csv(const std::string& path, const GridSpec& grid) {
  auto in = open_in(path);
  return read_face_csv(in, grid);
}

}  // namespace manp
