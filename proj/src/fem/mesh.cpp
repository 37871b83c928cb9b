#include "viscofe/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <random>
#include <set>
#include <sstream>

#include <Eigen/Dense>

#include "viscofe/errors.hpp"
#include "viscofe/quadrature.hpp"

namespace viscofe {

void tet10_shape(const std::array<double, 4>& L, Eigen::Matrix<double, 10, 1>& N, Eigen::Matrix<double, 10, 3>& dN) {
  // Derivatives in the four barycentric coordinates first.
  Eigen::Matrix<double, 10, 4> dL = Eigen::Matrix<double, 10, 4>::Zero();
  for (int i = 0; i < 4; ++i) {
    N[i] = L[i] * (2.0 * L[i] - 1.0);
    dL(i, i) = 4.0 * L[i] - 1.0;
  }
  for (int e = 0; e < 6; ++e) {
    const int a = kTetEdges[e][0], b = kTetEdges[e][1];
    N[4 + e] = 4.0 * L[a] * L[b];
    dL(4 + e, a) = 4.0 * L[b];
    dL(4 + e, b) = 4.0 * L[a];
  }
  for (int j = 0; j < 3; ++j) dN.col(j) = dL.col(j + 1) - dL.col(0);
}

void tri6_shape(const std::array<double, 3>& l, Eigen::Matrix<double, 6, 1>& N, Eigen::Matrix<double, 6, 2>& dN) {
  Eigen::Matrix<double, 6, 3> dl = Eigen::Matrix<double, 6, 3>::Zero();
  constexpr int edges[3][2] = {{0, 1}, {1, 2}, {2, 0}};
  for (int i = 0; i < 3; ++i) {
    N[i] = l[i] * (2.0 * l[i] - 1.0);
    dl(i, i) = 4.0 * l[i] - 1.0;
  }
  for (int e = 0; e < 3; ++e) {
    const int a = edges[e][0], b = edges[e][1];
    N[3 + e] = 4.0 * l[a] * l[b];
    dl(3 + e, a) = 4.0 * l[b];
    dl(3 + e, b) = 4.0 * l[a];
  }
  for (int j = 0; j < 2; ++j) dN.col(j) = dl.col(j + 1) - dl.col(0);
}

namespace {

using Key = std::array<int, 3>;

Key sorted_key(int a, int b, int c) {
  Key k{a, b, c};
  std::sort(k.begin(), k.end());
  return k;
}

double jacobian_at(const Mesh& m, std::size_t e, const std::array<double, 4>& L) {
  Eigen::Matrix<double, 10, 1> N;
  Eigen::Matrix<double, 10, 3> dN;
  tet10_shape(L, N, dN);
  Mat3 J = Mat3::Zero();
  for (int a = 0; a < 10; ++a) J += m.X[m.elements[e][a]] * dN.row(a);
  return J.determinant();
}

}  // namespace

void Mesh::finalize() {
  pressure_index.assign(X.size(), -1);
  std::vector<char> is_vertex(X.size(), 0);
  for (const auto& el : elements)
    for (int i = 0; i < 10; ++i) {
      if (el[i] < 0 || el[i] >= static_cast<int>(X.size())) raise(ErrorKind::Geometry, "element node id out of range");
      if (i < 4) is_vertex[el[i]] = 1;
    }
  n_pressure = 0;
  for (std::size_t n = 0; n < X.size(); ++n)
    if (is_vertex[n]) pressure_index[n] = n_pressure++;

  std::map<Key, std::pair<int, int>> owner;
  std::map<Key, int> count;
  for (std::size_t e = 0; e < elements.size(); ++e)
    for (int f = 0; f < 4; ++f) {
      const auto& fd = kTetFaces[f];
      const Key k = sorted_key(elements[e][fd[0]], elements[e][fd[1]], elements[e][fd[2]]);
      owner[k] = {static_cast<int>(e), f};
      ++count[k];
    }
  std::map<Key, std::string> labelled;
  for (auto& [name, facets] : facet_sets) {
    for (auto& fc : facets) {
      const Key k = sorted_key(fc.nodes[0], fc.nodes[1], fc.nodes[2]);
      const auto it = count.find(k);
      if (it == count.end() || it->second != 1)
        raise(ErrorKind::Geometry, "facet in set '" + name + "' is not a boundary face");
      if (!labelled.emplace(k, name).second)
        raise(ErrorKind::Geometry, "boundary facet belongs to sets '" + labelled[k] + "' and '" + name + "'");
      const auto [e, f] = owner[k];
      fc.element = e;
      fc.face = f;
      for (int i = 0; i < 6; ++i) fc.nodes[i] = elements[e][kTetFaces[f][i]];
    }
  }
  for (const auto& [k, c] : count)
    if (c == 1 && !labelled.count(k)) raise(ErrorKind::Geometry, "unlabelled boundary facet");
  if (!(min_jacobian() > 0.0)) raise(ErrorKind::Geometry, "non-positive element Jacobian");
}

std::vector<int> Mesh::set_nodes(const std::string& name) const {
  std::set<int> s;
  for (const auto& f : facets(name)) s.insert(f.nodes.begin(), f.nodes.end());
  return {s.begin(), s.end()};
}

const std::vector<Facet>& Mesh::facets(const std::string& name) const {
  const auto it = facet_sets.find(name);
  if (it == facet_sets.end()) raise(ErrorKind::Contract, "unknown facet set '" + name + "'");
  return it->second;
}

double Mesh::volume() const {
  double v = 0.0;
  for (std::size_t e = 0; e < elements.size(); ++e)
    for (const auto& q : tet_rule_deg5()) v += q.w * jacobian_at(*this, e, q.L);
  return v;
}

double Mesh::mean_size() const {
  if (elements.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& el : elements) {
    const Vec3 x0 = X[el[0]];
    Mat3 A;
    Vec3 rhs;
    for (int i = 0; i < 3; ++i) {
      const Vec3 xi = X[el[i + 1]];
      A.row(i) = 2.0 * (xi - x0).transpose();
      rhs[i] = xi.squaredNorm() - x0.squaredNorm();
    }
    const Vec3 c = A.fullPivLu().solve(rhs);
    sum += 2.0 * (c - x0).norm();
  }
  return sum / static_cast<double>(elements.size());
}

double Mesh::min_jacobian() const {
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t e = 0; e < elements.size(); ++e)
    for (const auto& q : tet_rule_deg5()) m = std::min(m, jacobian_at(*this, e, q.L));
  return m;
}

Mesh build_tet10(const std::vector<Vec3>& vertices, std::vector<std::array<int, 4>> tets,
                 const std::function<Vec3(int, int)>& midside,
                 const std::function<std::string(int, int, int)>& label) {
  Mesh m;
  m.X = vertices;
  std::map<std::pair<int, int>, int> edge_node;
  for (auto& t : tets) {
    const double vol = (vertices[t[1]] - vertices[t[0]])
                           .cross(vertices[t[2]] - vertices[t[0]])
                           .dot(vertices[t[3]] - vertices[t[0]]);
    if (vol < 0.0) std::swap(t[1], t[2]);
    std::array<int, 10> el{};
    for (int i = 0; i < 4; ++i) el[i] = t[i];
    for (int e = 0; e < 6; ++e) {
      int a = t[kTetEdges[e][0]], b = t[kTetEdges[e][1]];
      if (a > b) std::swap(a, b);
      auto [it, inserted] = edge_node.try_emplace({a, b}, static_cast<int>(m.X.size()));
      if (inserted) m.X.push_back(midside(a, b));
      el[4 + e] = it->second;
    }
    m.elements.push_back(el);
  }
  // Boundary faces are those owned by a single tet.
  std::map<Key, std::pair<int, int>> faces;
  std::map<Key, int> count;
  for (std::size_t e = 0; e < m.elements.size(); ++e)
    for (int f = 0; f < 4; ++f) {
      const auto& fd = kTetFaces[f];
      const Key k = sorted_key(m.elements[e][fd[0]], m.elements[e][fd[1]], m.elements[e][fd[2]]);
      faces[k] = {static_cast<int>(e), f};
      ++count[k];
    }
  for (const auto& [k, c] : count) {
    if (c != 1) continue;
    const auto [e, f] = faces[k];
    Facet fc;
    for (int i = 0; i < 6; ++i) fc.nodes[i] = m.elements[e][kTetFaces[f][i]];
    const std::string name = label(fc.nodes[0], fc.nodes[1], fc.nodes[2]);
    if (name.empty()) raise(ErrorKind::Geometry, "boundary face without a label");
    m.facet_sets[name].push_back(fc);
  }
  m.finalize();
  return m;
}

Mesh generate_cube_mesh(int n, double distortion, unsigned seed) {
  if (n < 1) raise(ErrorKind::Contract, "cube mesh needs n >= 1");
  const int np = n + 1;
  auto vid = [np](int i, int j, int k) { return (k * np + j) * np + i; };
  std::vector<Vec3> V(static_cast<std::size_t>(np) * np * np);
  std::vector<std::array<int, 3>> ijk(V.size());
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  const double h = 1.0 / n;
  for (int k = 0; k < np; ++k)
    for (int j = 0; j < np; ++j)
      for (int i = 0; i < np; ++i) {
        Vec3 x(i * h, j * h, k * h);
        const std::array<int, 3> idx{i, j, k};
        if (distortion > 0.0)
          for (int d = 0; d < 3; ++d) {
            const double r = U(rng);
            if (idx[d] > 0 && idx[d] < n) x[d] += distortion * h * r;
          }
        V[vid(i, j, k)] = x;
        ijk[vid(i, j, k)] = idx;
      }
  std::vector<std::array<int, 4>> tets;
  constexpr int perms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i)
        for (const auto& p : perms) {
          std::array<int, 3> c{i, j, k};
          std::array<int, 4> t{};
          t[0] = vid(c[0], c[1], c[2]);
          for (int s = 0; s < 3; ++s) {
            ++c[p[s]];
            t[s + 1] = vid(c[0], c[1], c[2]);
          }
          tets.push_back(t);
        }
  auto midside = [&](int a, int b) -> Vec3 { return 0.5 * (V[a] + V[b]); };
  auto label = [&](int a, int b, int c) -> std::string {
    static const char* names[3][2] = {{"x0", "x1"}, {"y0", "y1"}, {"z0", "z1"}};
    for (int d = 0; d < 3; ++d)
      for (int side = 0; side < 2; ++side) {
        const int v = side ? n : 0;
        if (ijk[a][d] == v && ijk[b][d] == v && ijk[c][d] == v) return names[d][side];
      }
    return "";
  };
  return build_tet10(V, std::move(tets), midside, label);
}

Mesh generate_shell_mesh(int nr, int ntheta, double A, double B) {
  if (nr < 1 || ntheta < 1) raise(ErrorKind::Contract, "shell mesh needs nr, ntheta >= 1");
  if (!(A > 0.0 && A < B)) raise(ErrorKind::Geometry, "shell mesh needs 0 < A < B");
  // Triangle lattice (i, j) with i + j <= ntheta on the plane x + y + z = 1.
  std::vector<std::array<int, 2>> tri_ij;
  std::map<std::pair<int, int>, int> tri_id;
  for (int j = 0; j <= ntheta; ++j)
    for (int i = 0; i + j <= ntheta; ++i) {
      tri_id[{i, j}] = static_cast<int>(tri_ij.size());
      tri_ij.push_back({i, j});
    }
  const int per_layer = static_cast<int>(tri_ij.size());
  struct Param {
    Vec3 p;  // point on the plane triangle
    double r;
  };
  auto plane_point = [ntheta](int i, int j) -> Vec3 {
    return Vec3(static_cast<double>(ntheta - i - j), static_cast<double>(i), static_cast<double>(j)) / ntheta;
  };
  auto map = [](const Param& q) -> Vec3 { return q.r * q.p / q.p.norm(); };

  std::vector<Param> param;
  std::vector<Vec3> V;
  std::vector<std::array<int, 3>> tag;  // (i, j, layer)
  for (int k = 0; k <= nr; ++k) {
    const double r = A + (B - A) * k / nr;
    for (const auto& ij : tri_ij) {
      param.push_back({plane_point(ij[0], ij[1]), r});
      V.push_back(map(param.back()));
      tag.push_back({ij[0], ij[1], k});
    }
  }
  std::vector<std::array<int, 3>> tris;
  for (int j = 0; j < ntheta; ++j)
    for (int i = 0; i + j < ntheta; ++i) {
      tris.push_back({tri_id[{i, j}], tri_id[{i + 1, j}], tri_id[{i, j + 1}]});
      if (i + j + 1 < ntheta) tris.push_back({tri_id[{i + 1, j}], tri_id[{i + 1, j + 1}], tri_id[{i, j + 1}]});
    }
  // Prisms split by sorted vertex ids so shared quad faces get matching diagonals.
  std::vector<std::array<int, 4>> tets;
  for (int k = 0; k < nr; ++k)
    for (auto t : tris) {
      std::sort(t.begin(), t.end());
      const int o0 = k * per_layer, o1 = (k + 1) * per_layer;
      const int a = t[0] + o0, b = t[1] + o0, c = t[2] + o0;
      const int a1 = t[0] + o1, b1 = t[1] + o1, c1 = t[2] + o1;
      tets.push_back({a, b, c, a1});
      tets.push_back({b, c, a1, b1});
      tets.push_back({c, a1, b1, c1});
    }
  auto midside = [&](int a, int b) -> Vec3 {
    return map({0.5 * (param[a].p + param[b].p), 0.5 * (param[a].r + param[b].r)});
  };
  auto label = [&](int a, int b, int c) -> std::string {
    auto all = [&](auto pred) { return pred(tag[a]) && pred(tag[b]) && pred(tag[c]); };
    if (all([](const auto& t) { return t[2] == 0; })) return "inner";
    if (all([nr](const auto& t) { return t[2] == nr; })) return "outer";
    if (all([ntheta](const auto& t) { return t[0] + t[1] == ntheta; })) return "sym_x";
    if (all([](const auto& t) { return t[0] == 0; })) return "sym_y";
    if (all([](const auto& t) { return t[1] == 0; })) return "sym_z";
    return "";
  };
  return build_tet10(V, std::move(tets), midside, label);
}

void write_mesh(std::ostream& os, const Mesh& mesh) {
  os << "viscofe-mesh 1\n";
  os << "nodes " << mesh.X.size() << "\n" << std::setprecision(17);
  for (std::size_t n = 0; n < mesh.X.size(); ++n)
    os << n << ' ' << mesh.X[n][0] << ' ' << mesh.X[n][1] << ' ' << mesh.X[n][2] << "\n";
  os << "elements " << mesh.elements.size() << "\n";
  for (std::size_t e = 0; e < mesh.elements.size(); ++e) {
    os << e;
    for (int id : mesh.elements[e]) os << ' ' << id;
    os << "\n";
  }
  for (const auto& [name, facets] : mesh.facet_sets) {
    os << "facet_set " << name << ' ' << facets.size() << "\n";
    for (const auto& f : facets) os << f.nodes[0] << ' ' << f.nodes[1] << ' ' << f.nodes[2] << "\n";
  }
  os << "end\n";
}

Mesh read_mesh(std::istream& is) {
  std::string line;
  int line_no = 0;
  auto next = [&]() -> std::istringstream {
    while (std::getline(is, line)) {
      ++line_no;
      const auto pos = line.find('#');
      if (pos != std::string::npos) line.erase(pos);
      if (line.find_first_not_of(" \t\r") != std::string::npos) return std::istringstream(line);
    }
    raise(ErrorKind::Io, "mesh: unexpected end of input after line " + std::to_string(line_no));
  };
  auto fail = [&](const std::string& msg) { raise(ErrorKind::Io, "mesh line " + std::to_string(line_no) + ": " + msg); };

  Mesh m;
  {
    auto ss = next();
    std::string magic;
    int version = 0;
    ss >> magic >> version;
    if (magic != "viscofe-mesh" || version != 1) fail("expected header 'viscofe-mesh 1'");
  }
  std::size_t count = 0;
  {
    auto ss = next();
    std::string kw;
    if (!(ss >> kw >> count) || kw != "nodes") fail("expected 'nodes <count>'");
  }
  m.X.resize(count);
  for (std::size_t n = 0; n < count; ++n) {
    auto ss = next();
    std::size_t id;
    double x, y, z;
    if (!(ss >> id >> x >> y >> z) || id != n) fail("bad node record");
    m.X[n] = Vec3(x, y, z);
  }
  {
    auto ss = next();
    std::string kw;
    if (!(ss >> kw >> count) || kw != "elements") fail("expected 'elements <count>'");
  }
  m.elements.resize(count);
  for (std::size_t e = 0; e < count; ++e) {
    auto ss = next();
    std::size_t id;
    if (!(ss >> id) || id != e) fail("bad element record");
    for (int& n : m.elements[e])
      if (!(ss >> n)) fail("element needs 10 node ids");
  }
  for (;;) {
    auto ss = next();
    std::string kw;
    ss >> kw;
    if (kw == "end") break;
    std::string name;
    if (kw != "facet_set" || !(ss >> name >> count)) fail("expected 'facet_set <name> <count>' or 'end'");
    auto& facets = m.facet_sets[name];
    for (std::size_t i = 0; i < count; ++i) {
      auto fs = next();
      Facet f;
      f.nodes.fill(-1);
      if (!(fs >> f.nodes[0] >> f.nodes[1] >> f.nodes[2])) fail("facet needs 3 vertex ids");
      facets.push_back(f);
    }
  }
  m.finalize();
  return m;
}

}  // namespace viscofe
