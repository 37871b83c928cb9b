#pragma once

#include <array>
#include <vector>

namespace viscofe {

/// Point in barycentric coordinates and weight; weights sum to the reference
/// measure (1/6 for the unit tetrahedron, 1/2 for the unit triangle).
struct TetQuadPoint {
  std::array<double, 4> L;
  double w;
};

struct TriQuadPoint {
  std::array<double, 3> L;
  double w;
};

/// 14-point rule exact for polynomials of degree 5 on tetrahedra.
const std::vector<TetQuadPoint>& tet_rule_deg5();

/// 6-point rule exact for polynomials of degree 4 on triangles.
const std::vector<TriQuadPoint>& tri_rule_deg4();

}  // namespace viscofe
