#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "viscofe/cli.hpp"

namespace viscofe::cli {

namespace {

constexpr std::pair<Command, std::string_view> kCommands[] = {
    {Command::Matpoint, "matpoint"},
    {Command::ShellExact, "shell-exact"},
    {Command::PatchTest, "patch-test"},
    {Command::ShellFem, "shell-fem"},
    {Command::Convergence, "convergence"},
};

[[noreturn]] void fail(int line, const std::string& msg) {
  raise(ErrorKind::Parse, (line > 0 ? "line " + std::to_string(line) + ": " : std::string()) + msg);
}

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos - start)));
    if (pos == std::string_view::npos) return out;
    start = pos + 1;
  }
}

double to_double(std::string_view v, int line, std::string_view key) {
  if (v == "inf") return std::numeric_limits<double>::infinity();
  double x = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || ptr != v.data() + v.size() || !std::isfinite(x))
    fail(line, "'" + std::string(key) + "' expects a number, got '" + std::string(v) + "'");
  return x;
}

int to_int(std::string_view v, int line, std::string_view key) {
  int x = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || ptr != v.data() + v.size())
    fail(line, "'" + std::string(key) + "' expects an integer, got '" + std::string(v) + "'");
  return x;
}

bool to_bool(std::string_view v, int line, std::string_view key) {
  if (v == "true") return true;
  if (v == "false") return false;
  fail(line, "'" + std::string(key) + "' expects true or false, got '" + std::string(v) + "'");
}

// Shortest text that reads back to the same double.
std::string fmt(double x) {
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

struct Entry {
  std::string value;
  int line = 0;
};

struct Section {
  int line = 0;
  std::map<std::string, Entry> keys;
};

// Typed setter for every known key, by section.
using Setter = std::function<void(RunConfig&, std::string_view value, int line)>;

const std::map<std::string, std::map<std::string, Setter>>& setters() {
  static const auto table = [] {
    std::map<std::string, std::map<std::string, Setter>> t;
    auto num = [](double MaterialParams::*f, const char* key) -> Setter {
      return [f, key](RunConfig& c, std::string_view v, int line) { c.material.*f = to_double(v, line, key); };
    };
    auto& mat = t["material"];
    mat["preset"] = [](RunConfig&, std::string_view, int) {};  // applied before the other keys
    for (const auto& [name, field] : std::initializer_list<std::pair<const char*, double MaterialParams::*>>{
             {"mu1", &MaterialParams::mu1},     {"mu2", &MaterialParams::mu2},     {"alpha1", &MaterialParams::alpha1},
             {"alpha2", &MaterialParams::alpha2}, {"m1", &MaterialParams::m1},       {"m2", &MaterialParams::m2},
             {"a1", &MaterialParams::a1},       {"a2", &MaterialParams::a2},       {"kappa", &MaterialParams::kappa},
             {"eta0", &MaterialParams::eta0},   {"etaInf", &MaterialParams::etaInf}, {"K1", &MaterialParams::K1},
             {"K2", &MaterialParams::K2},       {"beta1", &MaterialParams::beta1}, {"beta2", &MaterialParams::beta2}})
      mat[name] = num(field, name);

    auto& load = t["loading"];
    load["control"] = [](RunConfig& c, std::string_view v, int line) {
      if (v != "uniaxial-stress" && v != "isochoric") fail(line, "control must be uniaxial-stress or isochoric");
      c.loading.control = std::string(v);
    };
    load["knots"] = [](RunConfig& c, std::string_view v, int line) {
      c.loading.knots.clear();
      for (auto pair : split(v, ',')) {
        std::istringstream is{std::string(pair)};
        std::string a, b, extra;
        if (!(is >> a >> b) || (is >> extra)) fail(line, "knots expects 't stretch' pairs separated by commas");
        c.loading.knots.emplace_back(to_double(a, line, "knots"), to_double(b, line, "knots"));
      }
    };
    // Shorthand for a single ramp: knots = 0 1, t_end 1 + rate t_end. Resolved after parsing.
    load["rate"] = [](RunConfig&, std::string_view, int) {};
    load["t_end"] = [](RunConfig&, std::string_view, int) {};
    load["A"] = [](RunConfig& c, std::string_view v, int line) { c.loading.A = to_double(v, line, "A"); };
    load["B"] = [](RunConfig& c, std::string_view v, int line) { c.loading.B = to_double(v, line, "B"); };

    auto& numeric = t["numeric"];
    auto dbl = [](double NumericBlock::*f, const char* key) -> Setter {
      return [f, key](RunConfig& c, std::string_view v, int line) { c.numeric.*f = to_double(v, line, key); };
    };
    auto integer = [](int NumericBlock::*f, const char* key) -> Setter {
      return [f, key](RunConfig& c, std::string_view v, int line) { c.numeric.*f = to_int(v, line, key); };
    };
    numeric["tol1"] = dbl(&NumericBlock::tol1, "tol1");
    numeric["tol2"] = dbl(&NumericBlock::tol2, "tol2");
    numeric["safety"] = dbl(&NumericBlock::safety, "safety");
    numeric["dt_max"] = dbl(&NumericBlock::dt_max, "dt_max");
    numeric["exact_safety"] = dbl(&NumericBlock::exact_safety, "exact_safety");
    numeric["distortion"] = dbl(&NumericBlock::distortion, "distortion");
    numeric["max_staggered"] = integer(&NumericBlock::max_staggered, "max_staggered");
    numeric["max_halvings"] = integer(&NumericBlock::max_halvings, "max_halvings");
    numeric["n_gauss"] = integer(&NumericBlock::n_gauss, "n_gauss");
    numeric["cube_n"] = integer(&NumericBlock::cube_n, "cube_n");
    numeric["seed"] = integer(&NumericBlock::seed, "seed");
    numeric["nr"] = integer(&NumericBlock::nr, "nr");
    numeric["ntheta"] = integer(&NumericBlock::ntheta, "ntheta");
    numeric["adaptive"] = [](RunConfig& c, std::string_view v, int line) { c.numeric.adaptive = to_bool(v, line, "adaptive"); };
    numeric["levels"] = [](RunConfig& c, std::string_view v, int line) {
      c.numeric.levels.clear();
      for (auto lvl : split(v, ',')) {
        const auto x = lvl.find('x');
        if (x == std::string_view::npos) fail(line, "levels expects 'nr x ntheta' entries such as 2x4");
        c.numeric.levels.emplace_back(to_int(trim(lvl.substr(0, x)), line, "levels"),
                                      to_int(trim(lvl.substr(x + 1)), line, "levels"));
      }
    };

    auto& out = t["output"];
    out["dir"] = [](RunConfig& c, std::string_view v, int) { c.output.dir = std::string(v); };
    out["interval"] = [](RunConfig& c, std::string_view v, int line) { c.output.interval = to_double(v, line, "interval"); };
    return t;
  }();
  return table;
}

bool is_shell(Command c) { return c == Command::ShellExact || c == Command::ShellFem || c == Command::Convergence; }

void validate(const RunConfig& c, const std::map<std::string, Section>& sections) {
  auto line_of = [&](const std::string& sec, const std::string& key) {
    const auto s = sections.find(sec);
    if (s == sections.end()) return 0;
    const auto k = s->second.keys.find(key);
    return k == s->second.keys.end() ? s->second.line : k->second.line;
  };
  try {
    c.material.validate();
  } catch (const Error& e) {
    fail(line_of("material", ""), e.what());
  }
  const auto& k = c.loading.knots;
  const int kl = line_of("loading", "knots");
  if (k.size() < 2) fail(kl, "loading needs at least two knots");
  if (k.front().first != 0.0) fail(kl, "the first knot must be at t = 0");
  for (std::size_t i = 0; i < k.size(); ++i) {
    if (i > 0 && !(k[i].first > k[i - 1].first)) fail(kl, "knot times must increase strictly");
    if (!(k[i].second > 0.0)) fail(kl, "knot stretches must be positive");
  }
  if (is_shell(c.command)) {
    if (!(c.loading.A > 0.0 && c.loading.A < c.loading.B)) fail(line_of("loading", "A"), "need 0 < A < B");
    if (k.front().second != 1.0) fail(kl, "the shell starts undeformed: the first stretch must be 1");
    if (!c.material.incompressible()) fail(line_of("material", "kappa"), "the shell problem needs kappa = inf");
  }
  if (c.command != Command::Matpoint && c.loading.control != "uniaxial-stress")
    fail(line_of("loading", "control"), "control applies to matpoint only");
  const auto& n = c.numeric;
  if (!(n.tol1 > 0.0)) fail(line_of("numeric", "tol1"), "tol1 must be positive");
  if (!(n.tol2 > 0.0)) fail(line_of("numeric", "tol2"), "tol2 must be positive");
  if (!(n.safety > 0.0)) fail(line_of("numeric", "safety"), "safety must be positive");
  if (!(n.exact_safety > 0.0)) fail(line_of("numeric", "exact_safety"), "exact_safety must be positive");
  if (!(n.dt_max > 0.0)) fail(line_of("numeric", "dt_max"), "dt_max must be positive");
  if (!n.adaptive && std::isinf(n.dt_max)) fail(line_of("numeric", "adaptive"), "adaptive = false needs a finite dt_max");
  if (n.max_staggered < 1) fail(line_of("numeric", "max_staggered"), "max_staggered must be >= 1");
  if (n.max_halvings < 0) fail(line_of("numeric", "max_halvings"), "max_halvings must be >= 0");
  if (n.n_gauss < 1) fail(line_of("numeric", "n_gauss"), "n_gauss must be >= 1");
  if (n.cube_n < 1) fail(line_of("numeric", "cube_n"), "cube_n must be >= 1");
  if (n.distortion < 0.0 || n.distortion >= 0.5) fail(line_of("numeric", "distortion"), "distortion must be in [0, 0.5)");
  if (n.seed < 0) fail(line_of("numeric", "seed"), "seed must be >= 0");
  if (n.nr < 1 || n.ntheta < 1) fail(line_of("numeric", n.nr < 1 ? "nr" : "ntheta"), "nr and ntheta must be >= 1");
  if (n.levels.empty()) fail(line_of("numeric", "levels"), "levels must not be empty");
  for (const auto& [a, b] : n.levels)
    if (a < 1 || b < 1) fail(line_of("numeric", "levels"), "level sizes must be >= 1");
  if (c.output.dir.empty()) fail(line_of("output", "dir"), "dir must not be empty");
  if (!(c.output.interval >= 0.0)) fail(line_of("output", "interval"), "interval must be >= 0");
}

}  // namespace

std::string_view to_string(Command c) {
  for (const auto& [cmd, name] : kCommands)
    if (cmd == c) return name;
  return "?";
}

Command command_from_string(std::string_view name) {
  for (const auto& [cmd, n] : kCommands)
    if (n == name) return cmd;
  raise(ErrorKind::Parse, "unknown command '" + std::string(name) +
                              "' (expected matpoint, shell-exact, patch-test, shell-fem or convergence)");
}

RunConfig parse_config(std::string_view text) {
  std::map<std::string, Section> sections;
  Entry command;
  std::string current;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail(line_no, "malformed section header");
      current = std::string(trim(line.substr(1, line.size() - 2)));
      if (!setters().count(current)) fail(line_no, "unknown section [" + current + "]");
      auto [it, fresh] = sections.try_emplace(current, Section{line_no, {}});
      if (!fresh)
        fail(line_no, "duplicate section [" + current + "] (first on line " + std::to_string(it->second.line) + ")");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) fail(line_no, "expected 'key = value'");
    const std::string key(trim(line.substr(0, eq)));
    const std::string value(trim(line.substr(eq + 1)));
    if (key.empty()) fail(line_no, "missing key before '='");
    if (value.empty()) fail(line_no, "missing value for '" + key + "'");
    if (current.empty()) {
      if (key != "command") fail(line_no, "unknown top-level key '" + key + "' (only 'command' precedes the sections)");
      if (command.line) fail(line_no, "duplicate key 'command' (first on line " + std::to_string(command.line) + ")");
      command = {value, line_no};
      continue;
    }
    const auto& known = setters().at(current);
    if (!known.count(key)) fail(line_no, "unknown key '" + key + "' in [" + current + "]");
    auto [it, fresh] = sections[current].keys.try_emplace(key, Entry{value, line_no});
    if (!fresh)
      fail(line_no, "duplicate key '" + key + "' in [" + current + "] (first on line " + std::to_string(it->second.line) + ")");
  }

  RunConfig cfg;
  if (!command.line) fail(0, "missing required key 'command'");
  try {
    cfg.command = command_from_string(command.value);
  } catch (const Error& e) {
    fail(command.line, e.what());
  }
  for (const char* required : {"material", "loading"})
    if (!sections.count(required) || sections.at(required).keys.empty())
      fail(sections.count(required) ? sections.at(required).line : 0,
           std::string("missing or empty section [") + required + "]");

  // Material: a preset supplies defaults; without one every constant is required.
  const Section& mat = sections.at("material");
  if (auto it = mat.keys.find("preset"); it != mat.keys.end()) {
    if (it->second.value != "vhb4910") fail(it->second.line, "unknown material preset '" + it->second.value + "'");
    cfg.material = vhb4910();
  } else {
    for (const auto& [name, setter] : setters().at("material"))
      if (name != "preset" && !mat.keys.count(name)) fail(mat.line, "missing required key '" + name + "' in [material]");
  }
  for (const auto& [sec, body] : sections)
    for (const auto& [key, entry] : body.keys) {
      try {
        setters().at(sec).at(key)(cfg, entry.value, entry.line);
      } catch (const Error& e) {
        if (e.kind() == ErrorKind::Parse) throw;
        fail(entry.line, e.what());
      }
    }

  // Loading: explicit knots or a single ramp.
  const Section& load = sections.at("loading");
  const bool has_knots = load.keys.count("knots");
  const bool has_rate = load.keys.count("rate"), has_end = load.keys.count("t_end");
  if (has_knots && (has_rate || has_end))
    fail(load.keys.at(has_rate ? "rate" : "t_end").line, "give either knots or rate and t_end, not both");
  if (!has_knots) {
    if (!has_rate || !has_end) fail(load.line, "missing required key 'knots' (or 'rate' and 't_end') in [loading]");
    const auto& r = load.keys.at("rate");
    const auto& te = load.keys.at("t_end");
    const double rate = to_double(r.value, r.line, "rate");
    const double t_end = to_double(te.value, te.line, "t_end");
    if (!(t_end > 0.0)) fail(te.line, "t_end must be positive");
    cfg.loading.knots = {{0.0, 1.0}, {t_end, 1.0 + rate * t_end}};
  }
  validate(cfg, sections);
  return cfg;
}

std::string serialize_config(const RunConfig& c) {
  std::ostringstream os;
  os << "command = " << to_string(c.command) << "\n\n[material]\n";
  const MaterialParams& m = c.material;
  os << "mu1 = " << fmt(m.mu1) << "\nmu2 = " << fmt(m.mu2) << "\nalpha1 = " << fmt(m.alpha1)
     << "\nalpha2 = " << fmt(m.alpha2) << "\nm1 = " << fmt(m.m1) << "\nm2 = " << fmt(m.m2) << "\na1 = " << fmt(m.a1)
     << "\na2 = " << fmt(m.a2) << "\nkappa = " << fmt(m.kappa) << "\neta0 = " << fmt(m.eta0)
     << "\netaInf = " << fmt(m.etaInf) << "\nK1 = " << fmt(m.K1) << "\nK2 = " << fmt(m.K2)
     << "\nbeta1 = " << fmt(m.beta1) << "\nbeta2 = " << fmt(m.beta2) << "\n\n[loading]\n";
  os << "control = " << c.loading.control << "\nknots = ";
  for (std::size_t i = 0; i < c.loading.knots.size(); ++i)
    os << (i ? ", " : "") << fmt(c.loading.knots[i].first) << " " << fmt(c.loading.knots[i].second);
  os << "\nA = " << fmt(c.loading.A) << "\nB = " << fmt(c.loading.B) << "\n\n[numeric]\n";
  const NumericBlock& n = c.numeric;
  os << "tol1 = " << fmt(n.tol1) << "\ntol2 = " << fmt(n.tol2) << "\nsafety = " << fmt(n.safety)
     << "\ndt_max = " << fmt(n.dt_max) << "\nadaptive = " << (n.adaptive ? "true" : "false")
     << "\nmax_staggered = " << n.max_staggered << "\nmax_halvings = " << n.max_halvings << "\nn_gauss = " << n.n_gauss
     << "\nexact_safety = " << fmt(n.exact_safety) << "\ncube_n = " << n.cube_n << "\ndistortion = " << fmt(n.distortion)
     << "\nseed = " << n.seed << "\nnr = " << n.nr << "\nntheta = " << n.ntheta << "\nlevels = ";
  for (std::size_t i = 0; i < n.levels.size(); ++i) os << (i ? ", " : "") << n.levels[i].first << "x" << n.levels[i].second;
  os << "\n\n[output]\ndir = " << c.output.dir << "\ninterval = " << fmt(c.output.interval) << "\n";
  return os.str();
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorKind::Io, "cannot open config '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str());
  } catch (const Error& e) {
    raise(e.kind(), path.string() + ": " + e.what());
  }
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::NonConvergence: return 2;
    case ErrorKind::StepTooLarge: return 3;
    case ErrorKind::Io: return 4;
    default: return 1;
  }
}

}  // namespace viscofe::cli
