#include "agediff/scenario_file.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

namespace agediff {

namespace {

[[noreturn]] void fail(const std::string& origin, int line, const std::string& msg) {
  std::ostringstream os;
  os << origin << ":" << line << ": " << msg;
  throw Error(os.str());
}

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

struct RawValue {
  std::string text;
  int line = 0;
  int col = 0;  // column of the first value character in the original line
};

double parse_number(const RawValue& v, const std::string& origin) {
  const char* begin = v.text.c_str();
  char* end = nullptr;
  const double x = std::strtod(begin, &end);
  if (end == begin || *end != '\0' || !std::isfinite(x))
    fail(origin, v.line, "expected a number, got '" + v.text + "'");
  return x;
}

long parse_integer(const RawValue& v, const std::string& origin) {
  const char* begin = v.text.c_str();
  char* end = nullptr;
  const long x = std::strtol(begin, &end, 10);
  if (end == begin || *end != '\0')
    fail(origin, v.line, "expected an integer, got '" + v.text + "'");
  return x;
}

bool parse_bool(const RawValue& v, const std::string& origin) {
  if (v.text == "true" || v.text == "1") return true;
  if (v.text == "false" || v.text == "0") return false;
  fail(origin, v.line, "expected true or false, got '" + v.text + "'");
}

expr::Expression parse_expression(const RawValue& v, const std::string& origin) {
  try {
    return expr::Expression::parse(v.text, v.line, v.col);
  } catch (const Error& e) {
    // expression diagnostics already carry line/column; prefix the origin
    throw Error(origin + ": " + e.what());
  }
}

Field to_field(const expr::Expression& e) {
  return [e](double a, double x) { return e.eval(a, x); };
}

}  // namespace

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ULL;
  for (const char ch : bytes) {
    h ^= static_cast<unsigned char>(ch);
    h *= 1099511628211ULL;
  }
  return h;
}

ParsedScenario parse_scenario_text(const std::string& text,
                                   const std::string& origin) {
  std::map<std::string, RawValue> kv;
  std::set<std::string> sections_seen;

  std::istringstream in(text);
  std::string raw;
  std::string section;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = raw;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const std::string stripped = trim(line);
    if (stripped.empty()) continue;

    if (stripped.front() == '[') {
      if (stripped.back() != ']')
        fail(origin, line_no, "malformed section header '" + stripped + "'");
      section = trim(stripped.substr(1, stripped.size() - 2));
      if (section != "grid" && section != "coefficients" && section != "run")
        fail(origin, line_no,
             "unknown section [" + section +
                 "] (expected [grid], [coefficients], or [run])");
      if (!sections_seen.insert(section).second)
        fail(origin, line_no, "duplicate section [" + section + "]");
      continue;
    }

    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      fail(origin, line_no, "expected 'key = value', got '" + stripped + "'");
    if (section.empty())
      fail(origin, line_no, "key outside of any section");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) fail(origin, line_no, "missing key before '='");

    std::size_t vstart = eq + 1;
    while (vstart < line.size() &&
           std::isspace(static_cast<unsigned char>(line[vstart])))
      ++vstart;
    RawValue value;
    value.text = trim(line.substr(vstart));
    value.line = line_no;
    value.col = static_cast<int>(vstart) + 1;
    if (value.text.empty()) fail(origin, line_no, "missing value for '" + key + "'");

    const std::string qualified = section + "." + key;
    static const std::set<std::string> known = {
        "grid.backend",  "grid.a_max",       "grid.n_age",
        "grid.x_min",    "grid.x_max",       "grid.n_cells",
        "grid.n",        "grid.infinite_age",
        "coefficients.d", "coefficients.m",  "coefficients.b",
        "coefficients.holder_rho",
        "run.T",         "run.stride"};
    if (!known.count(qualified))
      fail(origin, line_no, "unknown key '" + key + "' in section [" + section + "]");
    if (!kv.emplace(qualified, value).second)
      fail(origin, line_no, "duplicate key '" + key + "' in section [" + section + "]");
  }

  auto get = [&](const char* name) -> std::optional<RawValue> {
    const auto it = kv.find(name);
    if (it == kv.end()) return std::nullopt;
    return it->second;
  };
  auto require_key = [&](const char* name, const char* why) -> RawValue {
    const auto v = get(name);
    if (!v) {
      std::ostringstream os;
      os << origin << ": missing required key '" << name << "' (" << why << ")";
      throw Error(os.str());
    }
    return *v;
  };

  ParsedScenario out;
  out.source_text = text;
  out.source_hash = fnv1a64(text);

  if (const auto backend = get("grid.backend")) {
    if (backend->text == "matrix")
      out.config.backend = Backend::matrix;
    else if (backend->text == "diffusion1d")
      out.config.backend = Backend::diffusion1d;
    else
      fail(origin, backend->line,
           "unknown backend '" + backend->text + "' (matrix or diffusion1d)");
  }

  out.config.age.a_max = parse_number(require_key("grid.a_max", "age span"), origin);
  {
    const RawValue v = require_key("grid.n_age", "age steps");
    const long n = parse_integer(v, origin);
    if (n < 2) fail(origin, v.line, "n_age must be at least 2");
    out.config.age.n_age = static_cast<int>(n);
  }
  if (const auto v = get("grid.x_min"))
    out.config.space.x_min = parse_number(*v, origin);
  if (const auto v = get("grid.x_max"))
    out.config.space.x_max = parse_number(*v, origin);

  const auto cells = get("grid.n_cells");
  const auto cells_alias = get("grid.n");
  if (cells && cells_alias)
    fail(origin, cells_alias->line, "give either n_cells or n, not both");
  if (const auto v = cells ? cells : cells_alias) {
    const long n = parse_integer(*v, origin);
    if (n < 1) fail(origin, v->line, "n_cells must be at least 1");
    out.config.space.n_cells = static_cast<int>(n);
  } else if (out.config.backend == Backend::diffusion1d) {
    throw Error(origin + ": missing required key 'grid.n_cells' (diffusion grid)");
  }

  if (const auto v = get("grid.infinite_age"))
    out.config.infinite_age = parse_bool(*v, origin);

  const auto d = get("coefficients.d");
  if (out.config.backend == Backend::diffusion1d) {
    if (!d)
      throw Error(origin + ": missing required key 'coefficients.d' (diffusivity)");
    const expr::Expression e = parse_expression(*d, origin);
    out.config.coeffs.d = to_field(e);
    out.d_src = e.to_string();
  } else if (d) {
    fail(origin, d->line, "diffusivity d is only meaningful for backend = diffusion1d");
  }

  {
    RawValue m;
    if (const auto v = get("coefficients.m")) m = *v;
    else { m.text = "0"; m.line = 1; m.col = 1; }
    const expr::Expression e = parse_expression(m, origin);
    out.config.coeffs.m_death = to_field(e);
    out.m_src = e.to_string();
  }
  {
    const RawValue b = require_key("coefficients.b", "birth rate");
    const expr::Expression e = parse_expression(b, origin);
    out.config.coeffs.b_birth = to_field(e);
    out.b_src = e.to_string();
  }
  if (const auto v = get("coefficients.holder_rho"))
    out.config.coeffs.holder_rho = parse_number(*v, origin);

  if (const auto v = get("run.T")) {
    out.run.T = parse_number(*v, origin);
    if (!(out.run.T > 0.0)) fail(origin, v->line, "T must be positive");
  }
  if (const auto v = get("run.stride")) {
    const long stride = parse_integer(*v, origin);
    if (stride < 1) fail(origin, v->line, "stride must be at least 1");
    out.run.stride = static_cast<int>(stride);
  }
  return out;
}

ParsedScenario load_scenario(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open scenario file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario_text(buf.str(), path);
}

}  // namespace agediff
