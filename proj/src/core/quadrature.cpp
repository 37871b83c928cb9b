#include "viscofe/quadrature.hpp"

namespace viscofe {
namespace {

std::vector<TetQuadPoint> build_tet() {
  std::vector<TetQuadPoint> pts;
  auto add_orbit4 = [&](double a, double w) {
    const double b = 1.0 - 3.0 * a;
    for (int k = 0; k < 4; ++k) {
      std::array<double, 4> L{a, a, a, a};
      L[k] = b;
      pts.push_back({L, w / 6.0});
    }
  };
  auto add_orbit6 = [&](double a, double w) {
    const double b = 0.5 - a;
    const int pairs[6][2] = {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}};
    for (const auto& pr : pairs) {
      std::array<double, 4> L{b, b, b, b};
      L[pr[0]] = a;
      L[pr[1]] = a;
      pts.push_back({L, w / 6.0});
    }
  };
  add_orbit4(0.0927352503108912264, 0.0734930431163619495);
  add_orbit4(0.310885919263300609797, 0.112687925718015850799);
  add_orbit6(0.0455037041256496494918, 0.042546020777081466438);
  return pts;
}

std::vector<TriQuadPoint> build_tri() {
  std::vector<TriQuadPoint> pts;
  auto add_orbit3 = [&](double a, double w) {
    const double b = 1.0 - 2.0 * a;
    for (int k = 0; k < 3; ++k) {
      std::array<double, 3> L{a, a, a};
      L[k] = b;
      pts.push_back({L, w / 2.0});
    }
  };
  add_orbit3(0.445948490915965, 0.223381589678011);
  add_orbit3(0.091576213509771, 0.109951743655322);
  return pts;
}

}  // namespace

const std::vector<TetQuadPoint>& tet_rule_deg5() {
  static const std::vector<TetQuadPoint> rule = build_tet();
  return rule;
}

const std::vector<TriQuadPoint>& tri_rule_deg4() {
  static const std::vector<TriQuadPoint> rule = build_tri();
  return rule;
}

}  // namespace viscofe
