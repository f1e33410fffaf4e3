#pragma once

#include <array>
#include <vector>

#include <Eigen/Dense>

#include "hybridfem/util.hpp"

namespace hybridfem {

// Plane mesh of 4-node quadrilaterals (macroscale) and/or 3-node triangles
// (microscale). Node ordering is counter-clockwise. Each element carries an
// integer material tag.
struct Mesh {
  std::vector<Eigen::Vector2d> nodes;
  std::vector<std::array<int, 4>> quads;
  std::vector<std::array<int, 3>> tris;
  std::vector<int> quad_tags;
  std::vector<int> tri_tags;

  int n_nodes() const { return static_cast<int>(nodes.size()); }
  int n_elements() const { return static_cast<int>(quads.size() + tris.size()); }

  // Connectivity bounds and positive reference Jacobians at all quadrature
  // points; throws on degenerate elements.
  void validate() const;
};

// Structured nx-by-ny quad grid of the rectangle [0,L]x[0,H].
Mesh rect_quad_mesh(double length, double height, int nx, int ny);

// Rectangle meshed at density n_el along the longer side L, aspect-preserving
// (ny = round(n_el H / L)).
Mesh rect_quad_mesh_density(double length, double height, int n_el);

// The 5-element, 8-node irregular patch on the square [0,L]^2: four boundary
// corners, four interior nodes, one interior quad and four ring quads, all
// non-rectangular.
Mesh patch_mesh(double length);

// Tapered Cook domain with vertices (0,0), (L,H), (L,H+rise), (0,H), meshed by
// mapping an n-by-n unit-square grid.
Mesh cook_mesh(double length, double height, double rise, int n);

// Structured triangulation of the square [0,side]^2: n-by-n cells, two
// triangles each, cell diagonal alternating with (i+j) parity.
Mesh tri_grid_mesh(double side, int n);

// Node lookups used when building boundary conditions.
std::vector<int> nodes_on_line(const Mesh& mesh, int axis, double value, double tol = 1e-9);
int nearest_node(const Mesh& mesh, const Eigen::Vector2d& x);

}  // namespace hybridfem
