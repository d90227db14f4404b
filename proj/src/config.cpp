#include "kscontrol/config.hpp"

#include <charconv>
#include <cmath>
#include <functional>
#include <numbers>
#include <set>

#include "kscontrol/errors.hpp"

namespace ksc {
namespace {

struct BadValue {
  std::string what;
};

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Shortest text that parses back to the same double.
std::string fmt(double v) {
  char buf[32];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

double to_double(std::string_view v) {
  double out = 0.0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || !std::isfinite(out)) {
    throw BadValue{"expected a finite number, got '" + std::string(v) + "'"};
  }
  return out;
}

std::uint64_t to_uint(std::string_view v) {
  std::uint64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw BadValue{"expected a nonnegative integer, got '" + std::string(v) + "'"};
  }
  return out;
}

bool to_bool(std::string_view v) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw BadValue{"expected true or false, got '" + std::string(v) + "'"};
}

double positive(std::string_view v) {
  const double x = to_double(v);
  if (!(x > 0.0)) throw BadValue{"must be > 0, got " + std::string(v)};
  return x;
}

double nonnegative(std::string_view v) {
  const double x = to_double(v);
  if (!(x >= 0.0)) throw BadValue{"must be >= 0, got " + std::string(v)};
  return x;
}

std::size_t at_least(std::string_view v, std::uint64_t lo) {
  const auto x = to_uint(v);
  if (x < lo) throw BadValue{"must be an integer >= " + std::to_string(lo) + ", got " + std::string(v)};
  return static_cast<std::size_t>(x);
}

std::optional<double> positive_or_auto(std::string_view v) {
  if (v == "auto") return std::nullopt;
  const double x = to_double(v);
  if (!(x > 0.0)) throw BadValue{"must be auto or > 0, got " + std::string(v)};
  return x;
}

std::string auto_or(const std::optional<double>& v) { return v ? fmt(*v) : "auto"; }

std::vector<double> decreasing_list(std::string_view v) {
  std::vector<double> out;
  while (true) {
    const auto comma = v.find(',');
    const double x = to_double(trim(v.substr(0, comma)));
    if (!(x > 0.0)) throw BadValue{"entries must be > 0"};
    if (!out.empty() && !(x < out.back())) throw BadValue{"entries must strictly decrease"};
    out.push_back(x);
    if (comma == std::string_view::npos) break;
    v.remove_prefix(comma + 1);
  }
  return out;
}

std::string join(const std::vector<double>& v) {
  std::string out;
  for (std::size_t j = 0; j < v.size(); ++j) out += (j ? "," : "") + fmt(v[j]);
  return out;
}

struct Field {
  std::string key;
  std::function<void(RunConfig&, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define KSC_REAL(name, member, check)                                                 \
  Field {                                                                             \
    name, [](RunConfig& c, std::string_view v) { c.member = check(v); },              \
        [](const RunConfig& c) { return fmt(c.member); }                              \
  }
#define KSC_COUNT(name, member, lo)                                                   \
  Field {                                                                             \
    name, [](RunConfig& c, std::string_view v) { c.member = at_least(v, lo); },       \
        [](const RunConfig& c) { return std::to_string(c.member); }                   \
  }
#define KSC_PROFILE(prefix, member)                                                   \
  KSC_REAL(prefix "_mean", member.mean, to_double),                                   \
      KSC_REAL(prefix "_amp", member.amp, to_double),                                 \
      Field{prefix "_mode",                                                           \
            [](RunConfig& c, std::string_view v) {                                    \
              const auto k = to_uint(v);                                              \
              if (k > 10000) throw BadValue{"must be an integer in [0, 10000]"};      \
              c.member.mode = static_cast<int>(k);                                    \
            },                                                                        \
            [](const RunConfig& c) { return std::to_string(c.member.mode); }}

const std::vector<Field>& fields() {
  static const std::vector<Field> table{
      KSC_REAL("x_lo", domain.x_lo, to_double),
      KSC_REAL("x_hi", domain.x_hi, to_double),
      KSC_REAL("omega_lo", domain.omega.lo, to_double),
      KSC_REAL("omega_hi", domain.omega.hi, to_double),
      KSC_REAL("omega_prime_lo", domain.omega_prime.lo, to_double),
      KSC_REAL("omega_prime_hi", domain.omega_prime.hi, to_double),
      KSC_REAL("T", domain.T, positive),
      KSC_COUNT("n", n, Grid::kMinNodes),
      KSC_COUNT("m", m, 2),
      KSC_REAL("chi", physics.chi, nonnegative),
      KSC_REAL("gamma", physics.gamma, positive),
      KSC_REAL("delta", physics.delta, nonnegative),
      Field{"weight_mode",
            [](RunConfig& c, std::string_view v) {
              if (v == "practice") c.weight_mode = WeightMode::practice;
              else if (v == "theory") c.weight_mode = WeightMode::theory;
              else throw BadValue{"must be practice or theory, got '" + std::string(v) + "'"};
            },
            [](const RunConfig& c) {
              return std::string(c.weight_mode == WeightMode::theory ? "theory" : "practice");
            }},
      Field{"lambda", [](RunConfig& c, std::string_view v) { c.lambda = positive_or_auto(v); },
            [](const RunConfig& c) { return auto_or(c.lambda); }},
      Field{"s", [](RunConfig& c, std::string_view v) { c.s = positive_or_auto(v); },
            [](const RunConfig& c) { return auto_or(c.s); }},
      KSC_REAL("c_lambda", c_lambda, positive),
      KSC_REAL("c_s", c_s, positive),
      KSC_REAL("exponent_budget", exponent_budget, positive),
      Field{"control_exponent",
            [](RunConfig& c, std::string_view v) {
              const double x = to_double(v);
              if (!(x > 0.0 && x <= 2.0)) throw BadValue{"must lie in (0, 2], got " + std::string(v)};
              c.control_exponent = x;
            },
            [](const RunConfig& c) { return fmt(c.control_exponent); }},
      KSC_REAL("epsilon", epsilon, positive),
      Field{"cg_tol",
            [](RunConfig& c, std::string_view v) {
              const double x = to_double(v);
              if (!(x > 0.0 && x < 1.0)) throw BadValue{"must lie in (0, 1), got " + std::string(v)};
              c.cg_tol = x;
            },
            [](const RunConfig& c) { return fmt(c.cg_tol); }},
      KSC_COUNT("cg_max_iter", cg_max_iter, 1),
      Field{"preconditioner",
            [](RunConfig& c, std::string_view v) {
              if (v == "none") c.jacobi = false;
              else if (v == "jacobi") c.jacobi = true;
              else throw BadValue{"must be none or jacobi, got '" + std::string(v) + "'"};
            },
            [](const RunConfig& c) { return std::string(c.jacobi ? "jacobi" : "none"); }},
      KSC_COUNT("stagnation_window", stagnation_window, 1),
      KSC_REAL("fp_tol", fp_tol, positive),
      KSC_COUNT("fp_max_outer", fp_max_outer, 1),
      KSC_REAL("c0", c0, positive),
      KSC_REAL("c1", c1, positive),
      Field{"epsilons",
            [](RunConfig& c, std::string_view v) { c.epsilons = decreasing_list(v); },
            [](const RunConfig& c) { return join(c.epsilons); }},
      KSC_COUNT("samples", samples, 1),
      Field{"seed", [](RunConfig& c, std::string_view v) { c.seed = to_uint(v); },
            [](const RunConfig& c) { return std::to_string(c.seed); }},
      KSC_REAL("a_const", a_const, to_double),
      KSC_REAL("b_const", b_const, to_double),
      KSC_PROFILE("y0", y0),
      KSC_PROFILE("z0", z0),
      KSC_PROFILE("u0", u0),
      KSC_PROFILE("v0", v0),
      KSC_REAL("perturbation", perturbation, to_double),
      KSC_REAL("blowup_guard", blowup_guard, positive),
      Field{"verbose", [](RunConfig& c, std::string_view v) { c.verbose = to_bool(v); },
            [](const RunConfig& c) { return std::string(c.verbose ? "true" : "false"); }},
      Field{"output_dir",
            [](RunConfig& c, std::string_view v) {
              if (v.empty()) throw BadValue{"must not be empty"};
              c.output_dir = std::string(v);
            },
            [](const RunConfig& c) { return c.output_dir; }},
  };
  return table;
}

#undef KSC_REAL
#undef KSC_COUNT
#undef KSC_PROFILE

const Field* find_field(std::string_view key) {
  for (const auto& f : fields()) {
    if (f.key == key) return &f;
  }
  return nullptr;
}

void assign(RunConfig& cfg, std::set<std::string>& seen, std::size_t line, std::string_view text) {
  const auto eq = text.find('=');
  if (eq == std::string_view::npos) throw ParseError(line, "", "expected key = value");
  const std::string key(trim(text.substr(0, eq)));
  const auto value = trim(text.substr(eq + 1));
  if (key.empty()) throw ParseError(line, "", "missing key");
  const Field* f = find_field(key);
  if (!f) throw ParseError(line, key, "unknown key");
  if (!seen.insert(key).second) throw ParseError(line, key, "duplicate key");
  try {
    f->set(cfg, value);
  } catch (const BadValue& e) {
    throw ParseError(line, key, e.what);
  }
}

void cross_check(const RunConfig& cfg) {
  try {
    cfg.domain.validate();
  } catch (const InvalidDomain& e) {
    throw ParseError(0, "domain", e.what());
  }
  try {
    const Grid grid(cfg.domain.x_lo, cfg.domain.x_hi, cfg.n);
    build_beta(cfg.domain, grid);
  } catch (const Error& e) {
    throw ParseError(0, "n", e.what());
  }
}

}  // namespace

std::vector<double> CosineProfile::sample(const Grid& grid) const {
  std::vector<double> v(grid.size());
  const double L = grid.x_hi() - grid.x_lo();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    v[i] = mean + amp * std::cos(mode * std::numbers::pi * (grid.x(i) - grid.x_lo()) / L);
  }
  return v;
}

RunConfig parse_config(std::string_view text, const std::vector<std::string>& overrides) {
  RunConfig cfg;
  std::set<std::string> seen;
  std::size_t line = 0;
  while (!text.empty()) {
    ++line;
    const auto nl = text.find('\n');
    auto raw = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    raw = trim(raw.substr(0, raw.find('#')));
    if (!raw.empty()) assign(cfg, seen, line, raw);
  }
  std::set<std::string> overridden;
  for (const auto& o : overrides) assign(cfg, overridden, 0, o);
  cross_check(cfg);
  return cfg;
}

std::string serialize(const RunConfig& cfg) {
  std::string out;
  for (const auto& f : fields()) out += f.key + " = " + f.get(cfg) + "\n";
  return out;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& f : fields()) keys.push_back(f.key);
  return keys;
}

}  // namespace ksc
