#pragma once

#include <Eigen/Core>
#include <utility>
#include <vector>

namespace qvs {

using Field = Eigen::VectorXd;

// Interior-node discretization of the unit square (or unit interval) with
// homogeneous Dirichlet boundary.  Nodes are ordered row-major:
// index = iy*nx + ix, ix fastest.  Mesh widths are per axis, h = 1/(n+1).
struct Grid {
  int dim = 2;       // 1: interval (no second difference direction), 2: rectangle
  int nx = 0;
  int ny = 0;        // 1 when dim == 1
  double hx = 0.0;
  double hy = 0.0;   // 0 when dim == 1

  int size() const { return nx * ny; }
  int index(int ix, int iy) const { return iy * nx + ix; }
  double x(int ix) const { return (ix + 1) * hx; }
  double y(int iy) const { return (iy + 1) * hy; }
  double cell_area() const { return dim == 1 ? hx : hx * hy; }

  static Grid rect(int nx, int ny);
  static Grid line(int nx);
};

// Rectangular grid; rejects nonpositive node counts.
Grid build_grid(int nx, int ny);

// Nodes marking the subregion that should stay free of material.
struct RegionMask {
  std::vector<int> indices;  // 0-based node indices, unique and in range
};

// Forward differences with zero ghost values past the boundary:
// (d1)_i = (y_right - y_i)/hx, (d2)_i = (y_up - y_i)/hy.
void apply_gradient(const Grid& g, const Field& y, Field& d1, Field& d2);
std::pair<Field, Field> apply_gradient(const Grid& g, const Field& y);

// Exact transpose of apply_gradient: returns D1^T q1 + D2^T q2.
Field apply_gradient_adjoint(const Grid& g, const Field& q1, const Field& q2);

// Dense matrices of the two difference operators (d2 is zero for line grids).
Eigen::MatrixXd d1_matrix(const Grid& g);
Eigen::MatrixXd d2_matrix(const Grid& g);

// Cell-area-weighted indicator of the masked region: a_i = hx*hy on the mask.
Field region_weights(const Grid& g, const RegionMask& mask);

}  // namespace qvs
