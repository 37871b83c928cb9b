#pragma once

#include <array>
#include <functional>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "viscofe/tensor.hpp"

namespace viscofe {

// Ten-node tetrahedron. Nodes 0-3 are vertices, 4-9 sit on edges
// (0,1) (1,2) (0,2) (0,3) (1,3) (2,3).
inline constexpr std::array<std::array<int, 2>, 6> kTetEdges{{{0, 1}, {1, 2}, {0, 2}, {0, 3}, {1, 3}, {2, 3}}};

// Faces with outward orientation for a positively oriented tet. Face k is
// listed by its vertices (a, b, c) and edge nodes (ab, bc, ca).
inline constexpr std::array<std::array<int, 6>, 4> kTetFaces{{
    {0, 2, 1, 6, 5, 4},
    {0, 1, 3, 4, 8, 7},
    {1, 2, 3, 5, 9, 8},
    {0, 3, 2, 7, 9, 6},
}};

/// Quadratic shape functions at barycentric point L and their derivatives
/// with respect to (L1, L2, L3) with L0 = 1 - L1 - L2 - L3.
void tet10_shape(const std::array<double, 4>& L, Eigen::Matrix<double, 10, 1>& N, Eigen::Matrix<double, 10, 3>& dN);

/// Six-node triangle at barycentric (l0, l1, l2); derivatives with respect to (l1, l2).
void tri6_shape(const std::array<double, 3>& l, Eigen::Matrix<double, 6, 1>& N, Eigen::Matrix<double, 6, 2>& dN);

struct Facet {
  std::array<int, 6> nodes;  // (a, b, c, ab, bc, ca), outward
  int element = -1;
  int face = -1;  // index into kTetFaces
};

struct Mesh {
  std::vector<Vec3> X;                        // m
  std::vector<std::array<int, 10>> elements;  // Tet10 connectivity
  std::vector<int> pressure_index;            // node -> P1 dof, -1 on edge nodes
  int n_pressure = 0;
  std::map<std::string, std::vector<Facet>> facet_sets;

  std::size_t n_nodes() const { return X.size(); }
  std::size_t n_elements() const { return elements.size(); }

  /// Numbers the pressure nodes, attaches every facet to its owning element
  /// face and checks positive Jacobians and the boundary labelling.
  void finalize();

  /// Sorted unique node ids touched by a facet set.
  std::vector<int> set_nodes(const std::string& name) const;
  const std::vector<Facet>& facets(const std::string& name) const;

  double volume() const;
  /// Mean circumscribed-sphere diameter of the vertex tetrahedra.
  double mean_size() const;
  double min_jacobian() const;
};

/// Builds a Tet10 mesh from linear tets. midside(a, b) places the node on
/// vertex edge (a, b); label(a, b, c) names the set of each boundary face.
Mesh build_tet10(const std::vector<Vec3>& vertices, std::vector<std::array<int, 4>> tets,
                 const std::function<Vec3(int, int)>& midside,
                 const std::function<std::string(int, int, int)>& label);

/// Unit cube split into 6 n^3 tets (six per sub-cube along its main diagonal).
/// Sets x0 x1 y0 y1 z0 z1. With distortion > 0 the vertices are moved by up
/// to distortion * (1/n) (tangentially on the boundary, corners fixed); edges stay straight.
Mesh generate_cube_mesh(int n, double distortion = 0.0, unsigned seed = 1);

/// One octant of the shell A <= |X| <= B. The octant of the sphere is the
/// radial projection of the triangle x + y + z = 1, split into ntheta^2
/// triangles, with nr prism layers of three tets each. Edge nodes are placed on the
/// curved geometry. Sets inner, outer, sym_x, sym_y, sym_z.
Mesh generate_shell_mesh(int nr, int ntheta, double A = 0.9, double B = 1.0);

void write_mesh(std::ostream& os, const Mesh& mesh);
Mesh read_mesh(std::istream& is);

}  // namespace viscofe
