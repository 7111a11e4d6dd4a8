#include "qvsweep/grid.hpp"

#include <stdexcept>
#include <string>

namespace qvs {

namespace {

void check_size(const Grid& g, const Field& v, const char* name) {
  if (v.size() != g.size()) {
    throw std::invalid_argument(std::string(name) + ": field size " +
                                std::to_string(v.size()) + " does not match grid size " +
                                std::to_string(g.size()));
  }
}

}  // namespace

Grid Grid::rect(int nx, int ny) {
  if (nx < 1 || ny < 1) throw std::invalid_argument("Grid::rect: node counts must be positive");
  Grid g;
  g.dim = 2;
  g.nx = nx;
  g.ny = ny;
  g.hx = 1.0 / (nx + 1);
  g.hy = 1.0 / (ny + 1);
  return g;
}

Grid Grid::line(int nx) {
  if (nx < 1) throw std::invalid_argument("Grid::line: node count must be positive");
  Grid g;
  g.dim = 1;
  g.nx = nx;
  g.ny = 1;
  g.hx = 1.0 / (nx + 1);
  g.hy = 0.0;
  return g;
}

Grid build_grid(int nx, int ny) { return Grid::rect(nx, ny); }

void apply_gradient(const Grid& g, const Field& y, Field& d1, Field& d2) {
  check_size(g, y, "apply_gradient");
  const int n = g.size();
  d1.resize(n);
  d2.resize(n);
  for (int iy = 0; iy < g.ny; ++iy) {
    for (int ix = 0; ix < g.nx; ++ix) {
      const int i = g.index(ix, iy);
      const double right = (ix + 1 < g.nx) ? y[i + 1] : 0.0;
      d1[i] = (right - y[i]) / g.hx;
      if (g.dim == 2) {
        const double up = (iy + 1 < g.ny) ? y[i + g.nx] : 0.0;
        d2[i] = (up - y[i]) / g.hy;
      } else {
        d2[i] = 0.0;
      }
    }
  }
}

std::pair<Field, Field> apply_gradient(const Grid& g, const Field& y) {
  Field d1, d2;
  apply_gradient(g, y, d1, d2);
  return {std::move(d1), std::move(d2)};
}

Field apply_gradient_adjoint(const Grid& g, const Field& q1, const Field& q2) {
  check_size(g, q1, "apply_gradient_adjoint");
  check_size(g, q2, "apply_gradient_adjoint");
  Field out = Field::Zero(g.size());
  for (int iy = 0; iy < g.ny; ++iy) {
    for (int ix = 0; ix < g.nx; ++ix) {
      const int i = g.index(ix, iy);
      out[i] -= q1[i] / g.hx;
      if (ix > 0) out[i] += q1[i - 1] / g.hx;
      if (g.dim == 2) {
        out[i] -= q2[i] / g.hy;
        if (iy > 0) out[i] += q2[i - g.nx] / g.hy;
      }
    }
  }
  return out;
}

Eigen::MatrixXd d1_matrix(const Grid& g) {
  const int n = g.size();
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  for (int iy = 0; iy < g.ny; ++iy) {
    for (int ix = 0; ix < g.nx; ++ix) {
      const int i = g.index(ix, iy);
      m(i, i) = -1.0 / g.hx;
      if (ix + 1 < g.nx) m(i, i + 1) = 1.0 / g.hx;
    }
  }
  return m;
}

Eigen::MatrixXd d2_matrix(const Grid& g) {
  const int n = g.size();
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  if (g.dim == 1) return m;
  for (int iy = 0; iy < g.ny; ++iy) {
    for (int ix = 0; ix < g.nx; ++ix) {
      const int i = g.index(ix, iy);
      m(i, i) = -1.0 / g.hy;
      if (iy + 1 < g.ny) m(i, i + g.nx) = 1.0 / g.hy;
    }
  }
  return m;
}

Field region_weights(const Grid& g, const RegionMask& mask) {
  Field a = Field::Zero(g.size());
  for (int idx : mask.indices) {
    if (idx < 0 || idx >= g.size()) {
      throw std::invalid_argument("region_weights: mask index " + std::to_string(idx) +
                                  " out of range");
    }
    a[idx] = g.cell_area();
  }
  return a;
}

}  // namespace qvs
