#include "hybridfem/mesh.hpp"

#include <cmath>
#include <limits>

namespace hybridfem {

namespace {

double tri_area2(const Eigen::Vector2d& a, const Eigen::Vector2d& b, const Eigen::Vector2d& c) {
  return (b.x() - a.x()) * (c.y() - a.y()) - (c.x() - a.x()) * (b.y() - a.y());
}

}  // namespace

void Mesh::validate() const {
  if (quad_tags.size() != quads.size() || tri_tags.size() != tris.size())
    throw Error("Mesh: material tag count does not match element count");
  const int nn = n_nodes();
  const auto check_index = [nn](int v) {
    if (v < 0 || v >= nn) throw Error("Mesh: connectivity index out of range");
  };
  constexpr double kGp = 0.577350269189625764509148780502;  // 1/sqrt(3)
  for (std::size_t e = 0; e < quads.size(); ++e) {
    const auto& q = quads[e];
    for (int v : q) check_index(v);
    for (int gx = 0; gx < 2; ++gx) {
      for (int gy = 0; gy < 2; ++gy) {
        const double xi = gx ? kGp : -kGp;
        const double eta = gy ? kGp : -kGp;
        const double dxi[4] = {-0.25 * (1 - eta), 0.25 * (1 - eta), 0.25 * (1 + eta),
                               -0.25 * (1 + eta)};
        const double deta[4] = {-0.25 * (1 - xi), -0.25 * (1 + xi), 0.25 * (1 + xi),
                                0.25 * (1 - xi)};
        Eigen::Matrix2d j = Eigen::Matrix2d::Zero();
        for (int a = 0; a < 4; ++a) {
          j(0, 0) += dxi[a] * nodes[static_cast<std::size_t>(q[a])].x();
          j(0, 1) += dxi[a] * nodes[static_cast<std::size_t>(q[a])].y();
          j(1, 0) += deta[a] * nodes[static_cast<std::size_t>(q[a])].x();
          j(1, 1) += deta[a] * nodes[static_cast<std::size_t>(q[a])].y();
        }
        if (j.determinant() <= 0.0)
          throw Error("Mesh: quad " + std::to_string(e) + " has non-positive Jacobian");
      }
    }
  }
  for (std::size_t e = 0; e < tris.size(); ++e) {
    for (int v : tris[e]) check_index(v);
    const auto& t = tris[e];
    if (tri_area2(nodes[static_cast<std::size_t>(t[0])], nodes[static_cast<std::size_t>(t[1])],
                  nodes[static_cast<std::size_t>(t[2])]) <= 0.0)
      throw Error("Mesh: triangle " + std::to_string(e) + " has non-positive area");
  }
}

Mesh rect_quad_mesh(double length, double height, int nx, int ny) {
  if (length <= 0.0 || height <= 0.0 || nx < 1 || ny < 1)
    throw Error("rect_quad_mesh: invalid geometry");
  Mesh m;
  m.nodes.reserve(static_cast<std::size_t>((nx + 1) * (ny + 1)));
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i <= nx; ++i)
      m.nodes.emplace_back(length * i / nx, height * j / ny);
  const auto id = [nx](int i, int j) { return j * (nx + 1) + i; };
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i)
      m.quads.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)});
  m.quad_tags.assign(m.quads.size(), 0);
  return m;
}

Mesh rect_quad_mesh_density(double length, double height, int n_el) {
  if (n_el < 1) throw Error("rect_quad_mesh_density: n_el must be >= 1");
  const int ny = std::max(1, static_cast<int>(std::lround(n_el * height / length)));
  return rect_quad_mesh(length, height, n_el, ny);
}

Mesh patch_mesh(double length) {
  if (length <= 0.0) throw Error("patch_mesh: invalid length");
  const double l = length;
  Mesh m;
  m.nodes = {{0.0, 0.0},           {l, 0.0},            {l, l},
             {0.0, l},             {0.30 * l, 0.25 * l}, {0.70 * l, 0.30 * l},
             {0.75 * l, 0.80 * l}, {0.20 * l, 0.70 * l}};
  m.quads = {{4, 5, 6, 7}, {0, 1, 5, 4}, {1, 2, 6, 5}, {2, 3, 7, 6}, {3, 0, 4, 7}};
  m.quad_tags.assign(m.quads.size(), 0);
  m.validate();
  return m;
}

Mesh cook_mesh(double length, double height, double rise, int n) {
  if (length <= 0.0 || height <= 0.0 || rise <= 0.0 || n < 1)
    throw Error("cook_mesh: invalid geometry");
  Mesh m;
  for (int j = 0; j <= n; ++j) {
    for (int i = 0; i <= n; ++i) {
      const double xi = static_cast<double>(i) / n;
      const double eta = static_cast<double>(j) / n;
      const double y_bot = height * xi;
      const double y_top = height + rise * xi;
      m.nodes.emplace_back(length * xi, y_bot + eta * (y_top - y_bot));
    }
  }
  const auto id = [n](int i, int j) { return j * (n + 1) + i; };
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i)
      m.quads.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)});
  m.quad_tags.assign(m.quads.size(), 0);
  m.validate();
  return m;
}

Mesh tri_grid_mesh(double side, int n) {
  if (side <= 0.0 || n < 1) throw Error("tri_grid_mesh: invalid geometry");
  Mesh m;
  for (int j = 0; j <= n; ++j)
    for (int i = 0; i <= n; ++i)
      m.nodes.emplace_back(side * i / n, side * j / n);
  const auto id = [n](int i, int j) { return j * (n + 1) + i; };
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const int a = id(i, j), b = id(i + 1, j), c = id(i + 1, j + 1), d = id(i, j + 1);
      if ((i + j) % 2 == 0) {
        m.tris.push_back({a, b, c});
        m.tris.push_back({a, c, d});
      } else {
        m.tris.push_back({a, b, d});
        m.tris.push_back({b, c, d});
      }
    }
  }
  m.tri_tags.assign(m.tris.size(), 0);
  return m;
}

std::vector<int> nodes_on_line(const Mesh& mesh, int axis, double value, double tol) {
  std::vector<int> out;
  for (int i = 0; i < mesh.n_nodes(); ++i)
    if (std::abs(mesh.nodes[static_cast<std::size_t>(i)](axis) - value) <= tol) out.push_back(i);
  return out;
}

int nearest_node(const Mesh& mesh, const Eigen::Vector2d& x) {
  int best = 0;
  double best_d = std::numeric_limits<double>::max();
  for (int i = 0; i < mesh.n_nodes(); ++i) {
    const double d = (mesh.nodes[static_cast<std::size_t>(i)] - x).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

}  // namespace hybridfem
