#pragma once

#include <iosfwd>
#include <string>

#include "manp/grid.hpp"

namespace manp {

/// Cell fields: header `x,y,value`, one row per node, j outer / i inner.
/// Values are written with 17 significant digits so a write/read cycle is
/// bit-exact.
void write_cell_csv(std::ostream& out, const CellFieldd& field);

/// Face fields: header `x,y,component,value`; for every (i, j) the x-face
/// row (component `x`) precedes the y-face row (component `y`).
void write_face_csv(std::ostream& out, const FaceFieldd& field);

/// Reads a file written by write_cell_csv back onto `grid`. Row count and
/// coordinates must match the grid.
CellFieldd read_cell_csv(std::istream& in, const GridSpec& grid);
FaceFieldd read_face_csv(std::istream& in, const GridSpec& grid);

void save_cell_csv(const std::string& path, const CellFieldd& field);
void save_face_csv(const std::string& path, const FaceFieldd& field);
CellFieldd load_cell_csv(const std::string& path, const GridSpec& grid);
FaceFieldd load_face_csv(const std::string& path, const GridSpec& grid);

}  // namespace manp
