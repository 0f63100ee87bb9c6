#include "cli.hpp"

#include "expr.hpp"

#include "clfstab/clf_smooth.hpp"
#include "clfstab/comparison.hpp"
#include "clfstab/iss_analysis.hpp"
#include "clfstab/nonsmooth_clf.hpp"
#include "clfstab/obstructions.hpp"
#include "clfstab/parallel.hpp"
#include "clfstab/robust.hpp"
#include "clfstab/sampling_sim.hpp"
#include "clfstab/signals.hpp"
#include "clfstab/systems.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <memory>
#include <optional>
#include <sstream>

namespace clfstab::cli {

namespace {

using json = nlohmann::json;

constexpr std::size_t kMaxCells = 1000000;
constexpr int kSchemaVersion = 1;

[[noreturn]] void invalid(const std::string& msg) { throw Error(ErrorKind::Validation, msg); }

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::NonFinite:
    case ErrorKind::NonConvergence:
    case ErrorKind::UnboundedBundle:
      return kExitSimulation;
    default:
      return kExitValidation;
  }
}

void report_error(std::ostream& err, const std::string& kind, const std::string& message, int code) {
  err << json{{"error", message}, {"kind", kind}, {"exit_code", code}}.dump() << '\n';
}

// Parsing helpers -----------------------------------------------------------

double parse_double(const std::string& text, const std::string& what) {
  const std::string t = trim(text);
  if (t.empty()) invalid(what + ": empty number");
  char* end = nullptr;
  const double v = std::strtod(t.c_str(), &end);
  if (end != t.c_str() + t.size() || !std::isfinite(v)) invalid(what + ": bad number '" + t + "'");
  return v;
}

long long parse_int(const std::string& text, const std::string& what) {
  const double v = parse_double(text, what);
  if (v != std::floor(v) || std::abs(v) > 9.0e15) invalid(what + ": expected an integer, got '" + text + "'");
  return static_cast<long long>(v);
}

std::uint64_t parse_seed(const std::string& text, const std::string& what) {
  const std::string t = trim(text);
  if (t.empty() || t.find_first_not_of("0123456789") != std::string::npos) invalid(what + ": bad seed '" + t + "'");
  return std::stoull(t);
}

Vec parse_vec(const std::string& text, const std::string& what) {
  const auto parts = split(text, ',');
  if (static_cast<int>(parts.size()) > kMaxDim) invalid(what + ": more than " + std::to_string(kMaxDim) + " entries");
  Vec v(static_cast<Eigen::Index>(parts.size()));
  for (std::size_t i = 0; i < parts.size(); ++i) v[static_cast<Eigen::Index>(i)] = parse_double(parts[i], what);
  return v;
}

std::vector<double> parse_list(const std::string& text, const std::string& what) {
  std::vector<double> out;
  for (const auto& p : split(text, ',')) out.push_back(parse_double(p, what));
  return out;
}

std::vector<Vec> parse_points(const std::string& text, int n, const std::string& what) {
  std::vector<Vec> pts;
  for (const auto& p : split(text, ';')) {
    if (p.empty()) continue;
    Vec v = parse_vec(p, what);
    require_dim(v, n, what);
    pts.push_back(v);
  }
  return pts;
}

std::vector<double> to_std(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json parse_json_text(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    invalid(what + ": " + e.what());
  }
}

json read_json_file(const std::string& path) { return parse_json_text(read_file(path), path); }

void require_schema(const json& j, const std::string& what) {
  if (!j.is_object()) invalid(what + ": expected a JSON object");
  if (!j.contains("schema") || !j["schema"].is_number_integer() || j["schema"].get<int>() != kSchemaVersion) {
    invalid(what + ": missing or unsupported \"schema\" (expected 1)");
  }
}

void require_keys(const json& j, const std::vector<std::string>& allowed, const std::string& what) {
  for (const auto& [key, value] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) invalid(what + ": unknown key '" + key + "'");
  }
}

std::string json_string(const json& j, const std::string& key, const std::string& what) {
  if (!j.contains(key) || !j[key].is_string()) invalid(what + ": \"" + key + "\" must be a string");
  return j[key].get<std::string>();
}

double json_number(const json& j, const std::string& key, const std::string& what) {
  if (!j.contains(key) || !j[key].is_number()) invalid(what + ": \"" + key + "\" must be a number");
  return j[key].get<double>();
}

Vec json_vec(const json& j, const std::string& what) {
  if (j.is_number()) return make_vec({j.get<double>()});
  if (!j.is_array() || j.empty() || static_cast<int>(j.size()) > kMaxDim) invalid(what + ": expected a number array");
  Vec v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) invalid(what + ": expected a number array");
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return v;
}

// Config values become the text a flag would carry.
std::string config_text(const json& v, const std::string& key) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  if (v.is_number()) return format_double(v.get<double>());
  if (v.is_object()) return v.dump();
  if (v.is_array()) {
    std::string out;
    const char sep = (!v.empty() && v[0].is_array()) ? ';' : ',';
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) out += sep;
      out += v[i].is_array() || v[i].is_number() ? config_text(v[i], key) : v[i].get<std::string>();
    }
    return out;
  }
  invalid("config key '" + key + "': unsupported value");
}

std::vector<std::string> state_names(int n) {
  std::vector<std::string> names;
  for (int j = 1; j <= n; ++j) names.push_back("x" + std::to_string(j));
  if (n == 1) names.push_back("x");
  return names;
}

// Evaluates state expressions; for n = 1 both x1 and x are bound.
struct StateExprs {
  std::vector<Expr> exprs;
  int n{0};
  Vec operator()(const Vec& x) const {
    double buf[kMaxDim + 1];
    for (int j = 0; j < n; ++j) buf[j] = x[j];
    if (n == 1) buf[1] = x[0];
    Vec out(static_cast<Eigen::Index>(exprs.size()));
    for (std::size_t i = 0; i < exprs.size(); ++i) out[static_cast<Eigen::Index>(i)] = exprs[i](buf);
    return out;
  }
};

StateExprs compile_state_exprs(const std::vector<std::string>& texts, int n) {
  StateExprs s;
  s.n = n;
  const auto names = state_names(n);
  for (const auto& t : texts) s.exprs.push_back(Expr::compile(t, names));
  return s;
}

RealFn compile_scalar_fn(const std::string& text) {
  const Expr e = Expr::compile(text, {"r", "s"});
  return [e](double r) {
    const double buf[2] = {r, r};
    return e(buf);
  };
}

// Systems, CLFs, feedbacks --------------------------------------------------

ParamMap parse_params(const std::string& text) {
  ParamMap params;
  if (trim(text).empty()) return params;
  for (const auto& kv : split(text, ',')) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) invalid("--params: expected key=value, got '" + kv + "'");
    params[trim(kv.substr(0, eq))] = parse_double(kv.substr(eq + 1), "--params");
  }
  return params;
}

ControlSet parse_control_set(const std::string& text, const ControlSystem& sys) {
  if (trim(text).empty()) {
    if (sys.default_controls) return *sys.default_controls;
    return ControlSet::ball(sys.m, 1.0);
  }
  const auto parts = split(text, ':');
  const std::string& kind = parts[0];
  auto resolution = [&](std::size_t idx) -> int {
    if (parts.size() <= idx) return 101;
    const long long r = parse_int(parts[idx], "--control-set resolution");
    if (r < 2 || r > 100001) invalid("--control-set: resolution out of range");
    return static_cast<int>(r);
  };
  ControlSet set = [&]() {
    if (kind == "interval" && (parts.size() == 3 || parts.size() == 4)) {
      return ControlSet::interval(parse_double(parts[1], "--control-set"), parse_double(parts[2], "--control-set"),
                                  resolution(3));
    }
    if (kind == "ball" && (parts.size() == 2 || parts.size() == 3)) {
      return ControlSet::ball(sys.m, parse_double(parts[1], "--control-set"), resolution(2));
    }
    if (kind == "box" && (parts.size() == 3 || parts.size() == 4)) {
      return ControlSet::box(parse_vec(parts[1], "--control-set"), parse_vec(parts[2], "--control-set"),
                             resolution(3));
    }
    if (kind == "finite" && parts.size() == 2) {
      std::vector<Vec> pts;
      for (const auto& p : split(parts[1], ';')) pts.push_back(parse_vec(p, "--control-set"));
      return ControlSet::finite(pts);
    }
    invalid("--control-set: expected interval:lo:hi[:res], ball:r[:res], box:lo..:hi..[:res] or finite:u;u");
  }();
  if (set.dim() != sys.m) throw Error(ErrorKind::DimensionMismatch, "--control-set: dimension differs from m");
  return set;
}

bool is_builtin_clf(const std::string& name) {
  return name == "quadratic" || name == "oscillator" || name == "log-quadratic" || name == "artstein" ||
         name == "norm";
}

std::string default_clf_name(const ControlSystem& sys) {
  if (sys.name == "double-integrator" || sys.name == "forced-oscillator") return "oscillator";
  if (sys.name == "artstein-circles") return "artstein";
  return "quadratic";
}

struct ClfFile {
  std::string name;
  int n{0};
  ScalarField V;
  VectorField grad;
  ScalarField W;
};

ClfFile load_clf_file(const std::string& path, int n) {
  const json j = read_json_file(path);
  require_schema(j, path);
  require_keys(j, {"schema", "name", "n", "V", "grad", "W"}, path);
  ClfFile f;
  f.name = j.contains("name") ? json_string(j, "name", path) : path;
  f.n = j.contains("n") ? static_cast<int>(json_number(j, "n", path)) : n;
  if (f.n != n) throw Error(ErrorKind::DimensionMismatch, path + ": CLF dimension differs from the system");
  const StateExprs V = compile_state_exprs({json_string(j, "V", path)}, n);
  f.V = [V](const Vec& x) { return V(x)[0]; };
  if (j.contains("grad")) {
    if (!j["grad"].is_array() || static_cast<int>(j["grad"].size()) != n) invalid(path + ": \"grad\" needs n entries");
    std::vector<std::string> texts;
    for (const auto& g : j["grad"]) {
      if (!g.is_string()) invalid(path + ": \"grad\" entries must be strings");
      texts.push_back(g.get<std::string>());
    }
    const StateExprs G = compile_state_exprs(texts, n);
    f.grad = [G](const Vec& x) { return G(x); };
  }
  if (j.contains("W")) {
    const StateExprs W = compile_state_exprs({json_string(j, "W", path)}, n);
    f.W = [W](const Vec& x) { return W(x)[0]; };
  }
  return f;
}

SmoothCLF smooth_clf_for(const std::string& spec, const ControlSystem& sys) {
  const std::string name = trim(spec).empty() ? default_clf_name(sys) : trim(spec);
  if (name == "quadratic") return quadratic_clf(sys.n);
  if (name == "log-quadratic") return log_quadratic_clf(sys.n);
  if (name == "oscillator") {
    if (sys.n != 2) throw Error(ErrorKind::DimensionMismatch, "CLF 'oscillator' needs n = 2");
    return oscillator_clf();
  }
  if (name == "artstein") {
    if (sys.n != 2) throw Error(ErrorKind::DimensionMismatch, "CLF 'artstein' needs n = 2");
    return artstein_smooth_view();
  }
  if (name == "norm") throw Error(ErrorKind::InvalidParams, "CLF 'norm' is nonsmooth; use --method proximal");
  if (!std::filesystem::exists(name)) throw Error(ErrorKind::UnknownName, "unknown CLF '" + name + "'");
  ClfFile f = load_clf_file(name, sys.n);
  return clf_from_value(f.name, sys.n, f.V, f.grad, f.W);
}

ContinuousCLF continuous_clf_for(const std::string& spec, const ControlSystem& sys) {
  const std::string name = trim(spec).empty() ? default_clf_name(sys) : trim(spec);
  if (name == "artstein") {
    if (sys.n != 2) throw Error(ErrorKind::DimensionMismatch, "CLF 'artstein' needs n = 2");
    return artstein_clf();
  }
  if (name == "norm") return norm_clf(sys.n);
  if (is_builtin_clf(name)) return continuous_from_smooth(smooth_clf_for(name, sys));
  if (!std::filesystem::exists(name)) throw Error(ErrorKind::UnknownName, "unknown CLF '" + name + "'");
  ClfFile f = load_clf_file(name, sys.n);
  if (!f.W) throw Error(ErrorKind::InvalidParams, name + ": a continuous CLF file needs \"W\"");
  ContinuousCLF c;
  c.name = f.name;
  c.n = sys.n;
  c.V = f.V;
  c.W = f.W;
  return c;
}

FeedbackLaw builtin_feedback(const ControlSystem& sys) {
  if (sys.name == "rigid-body-reduced") {
    return user_feedback("rigid-body-reduced:builtin", 3, 2, [](const Vec& x) -> Vec {
      return make_vec({-x[0] - x[1] - x[1] * x[2], -x[2] + x[0] * x[0] + 2.0 * x[0] * x[1] * x[2]});
    });
  }
  if (sys.name == "cubic-1d") {
    return user_feedback("cubic-1d:builtin", 1, 1,
                         [](const Vec& x) -> Vec { return make_vec({-std::cbrt(2.0 * x[0])}); });
  }
  throw Error(ErrorKind::UnknownName, "no built-in feedback for '" + sys.name + "'");
}

struct FeedbackChoice {
  FeedbackLaw law;
  SampleDiagnostics diagnostics;
  std::string description;
};

FeedbackChoice make_feedback(const std::string& spec, const std::string& clf_spec, const std::string& alpha_text,
                             const std::string& control_text, const ControlSystem& sys) {
  const std::string method = trim(spec).empty() ? "universal" : trim(spec);
  FeedbackChoice c;
  c.description = method;
  if (method.rfind("expr:", 0) == 0) {
    const auto texts = split(method.substr(5), ';');
    if (static_cast<int>(texts.size()) != sys.m) {
      throw Error(ErrorKind::DimensionMismatch, "--feedback expr: need " + std::to_string(sys.m) + " components");
    }
    const StateExprs k = compile_state_exprs(texts, sys.n);
    c.law = user_feedback("expr", sys.n, sys.m, [k](const Vec& x) { return k(x); });
    return c;
  }
  if (method == "zero") {
    c.law = zero_feedback(sys.n, sys.m);
    return c;
  }
  if (method == "builtin" || method == "paper") {
    c.law = builtin_feedback(sys);
    c.description = "builtin";
    return c;
  }
  if (method == "universal" || method == "pointwise") {
    const SmoothCLF clf = smooth_clf_for(clf_spec, sys);
    c.law = method == "universal" ? universal_formula_feedback(clf, sys)
                                  : pointwise_min_feedback(clf, sys, parse_control_set(control_text, sys));
    c.diagnostics.V = clf.V;
    return c;
  }
  if (method == "proximal") {
    const ContinuousCLF clf = continuous_clf_for(clf_spec, sys);
    const double alpha = trim(alpha_text).empty() ? 0.25 : parse_double(alpha_text, "--alpha");
    if (!(alpha > 0.0)) invalid("--alpha must be positive");
    auto env = std::make_shared<const MoreauEnvelope>(clf, alpha);
    c.law = proximal_feedback(env, sys, parse_control_set(control_text, sys));
    c.diagnostics.V = clf.V;
    c.diagnostics.envelope = env;
    return c;
  }
  throw Error(ErrorKind::UnknownName,
              "unknown feedback '" + method + "' (universal, pointwise, proximal, zero, builtin, expr:...)");
}

// Signals -------------------------------------------------------------------

json signal_text_to_json(const std::string& text) {
  const std::string t = trim(text);
  if (!t.empty() && t.front() == '{') return parse_json_text(t, "signal spec");
  const auto parts = split(t, ':');
  const std::string& kind = parts[0];
  auto need = [&](std::size_t lo, std::size_t hi) {
    if (parts.size() < lo || parts.size() > hi) invalid("signal spec '" + t + "': wrong number of fields");
  };
  if (t.empty() || kind == "none" || kind == "zero") {
    need(1, 1);
    return {{"kind", "zero"}};
  }
  if (kind == "constant") {
    need(2, 2);
    return {{"kind", "constant"}, {"value", parse_list(parts[1], "signal value")}};
  }
  if (kind == "sinusoid") {
    need(3, 4);
    json j{{"kind", "sinusoid"},
           {"amplitude", parse_list(parts[1], "signal amplitude")},
           {"freq", parse_double(parts[2], "signal freq")}};
    if (parts.size() == 4) j["phase"] = parse_double(parts[3], "signal phase");
    return j;
  }
  if (kind == "piecewise-constant") {
    need(3, 4);
    json j{{"kind", "piecewise-constant"},
           {"amp", parse_double(parts[1], "signal amp")},
           {"dwell", parse_double(parts[2], "signal dwell")}};
    if (parts.size() == 4) j["seed"] = parse_seed(parts[3], "signal seed");
    return j;
  }
  if (kind == "pulse") {
    need(4, 4);
    return {{"kind", "pulse"},
            {"value", parse_list(parts[1], "signal value")},
            {"t_on", parse_double(parts[2], "signal t_on")},
            {"t_off", parse_double(parts[3], "signal t_off")}};
  }
  invalid("unknown signal kind '" + kind + "'");
}

Vec broadcast(const Vec& v, int dim, const std::string& what) {
  if (v.size() == dim) return v;
  if (v.size() == 1) return Vec::Constant(dim, v[0]);
  throw Error(ErrorKind::DimensionMismatch, what + ": expected " + std::to_string(dim) + " components");
}

Signal signal_from_json(const json& j, int dim, std::uint64_t default_seed) {
  if (j.is_string()) return signal_from_json(signal_text_to_json(j.get<std::string>()), dim, default_seed);
  if (!j.is_object()) invalid("signal spec: expected an object or a string");
  const std::string kind = json_string(j, "kind", "signal spec");
  if (kind == "zero" || kind == "none") {
    require_keys(j, {"kind"}, "zero signal");
    return Signal::zero(dim);
  }
  if (kind == "constant") {
    require_keys(j, {"kind", "value"}, "constant signal");
    return Signal::constant(broadcast(json_vec(j.at("value"), "constant signal"), dim, "constant signal"));
  }
  if (kind == "sinusoid") {
    require_keys(j, {"kind", "amplitude", "freq", "phase"}, "sinusoid signal");
    if (!j.contains("amplitude")) invalid("sinusoid signal: missing amplitude");
    const double phase = j.contains("phase") ? json_number(j, "phase", "sinusoid signal") : 0.0;
    return Signal::sinusoid(broadcast(json_vec(j["amplitude"], "sinusoid signal"), dim, "sinusoid signal"),
                            json_number(j, "freq", "sinusoid signal"), phase);
  }
  if (kind == "piecewise-constant") {
    require_keys(j, {"kind", "amp", "dwell", "seed"}, "piecewise-constant signal");
    const std::uint64_t seed = j.contains("seed") ? j["seed"].get<std::uint64_t>() : default_seed;
    const double dwell = json_number(j, "dwell", "piecewise-constant signal");
    if (!(dwell > 0.0)) invalid("piecewise-constant signal: dwell must be positive");
    return Signal::piecewise_constant(dim, seed, dwell, json_number(j, "amp", "piecewise-constant signal"));
  }
  if (kind == "pulse") {
    require_keys(j, {"kind", "value", "t_on", "t_off"}, "pulse signal");
    if (!j.contains("value")) invalid("pulse signal: missing value");
    return Signal::pulse(broadcast(json_vec(j["value"], "pulse signal"), dim, "pulse signal"),
                         json_number(j, "t_on", "pulse signal"), json_number(j, "t_off", "pulse signal"));
  }
  invalid("unknown signal kind '" + kind + "'");
}

Signal parse_signal(const std::string& text, int dim, std::uint64_t seed) {
  return signal_from_json(signal_text_to_json(text), dim, seed);
}

SamplingSchedule parse_schedule(const std::string& text, double horizon) {
  const std::string t = trim(text).empty() ? "uniform:0.01" : trim(text);
  const auto parts = split(t, ':');
  if (parts[0] == "uniform" && parts.size() == 2) {
    const double h = parse_double(parts[1], "--schedule");
    if (!(h > 0.0)) invalid("--schedule: h must be positive");
    if (horizon / h > 5e7) invalid("--schedule: more than 5e7 samples");
    return SamplingSchedule::uniform(h, horizon);
  }
  if (parts[0] == "jitter" && parts.size() == 4) {
    const double h = parse_double(parts[1], "--schedule");
    const double j = parse_double(parts[2], "--schedule");
    if (!(h > 0.0) || !(j >= 0.0) || !(j < 1.0)) invalid("--schedule: need h > 0 and 0 <= j < 1");
    if (horizon / (h * (1.0 - j)) > 5e7) invalid("--schedule: more than 5e7 samples");
    return SamplingSchedule::jittered(h, j, parse_seed(parts[3], "--schedule"), horizon);
  }
  invalid("--schedule: expected uniform:h or jitter:h:j:seed");
}

// Command plumbing ------------------------------------------------------------

const std::map<std::string, std::string>& option_help() {
  static const std::map<std::string, std::string> h{
      {"system", "zoo system name"},
      {"params", "system parameters key=value,..."},
      {"feedback", "universal | pointwise | proximal | zero | builtin | expr:k1;k2"},
      {"method", "synthesis or test method"},
      {"clf", "built-in CLF name or CLF JSON file"},
      {"alpha", "envelope parameter"},
      {"control-set", "interval:lo:hi[:res] | ball:r[:res] | box:lo:hi[:res] | finite:u;u"},
      {"schedule", "uniform:h | jitter:h:j:seed"},
      {"x0", "initial state, comma separated"},
      {"e", "measurement error signal"},
      {"d", "actuator disturbance signal"},
      {"horizon", "final time"},
      {"substeps", "RK4 substeps per sampling interval"},
      {"blowup", "escape radius"},
      {"seed", "base RNG seed"},
      {"summary", "JSON summary file"},
      {"expect-final-norm", "check |x(T)| against this bound"},
      {"extent", "half width of the state grid"},
      {"grid", "points per axis"},
      {"region", "annulus r:R"},
      {"tol", "decrease tolerance"},
      {"x-radius", "probe state radius"},
      {"u-radius", "probe control radius"},
      {"targets", "probe target count"},
      {"inputs", "inputs JSON file"},
      {"amplitudes", "constant input amplitudes, comma separated"},
      {"x0-grid", "initial states, points separated by ';'"},
      {"step", "integration step"},
      {"tail", "tail fraction used for the limsup"},
      {"candidate", "Lyapunov candidate JSON file"},
      {"x-range", "state box half width"},
      {"x-res", "state points per axis"},
      {"u-range", "input box half width"},
      {"u-res", "input points per axis"},
      {"r", "inner radius"},
      {"R", "outer radius"},
      {"schedules", "h factors, e.g. compliant,2x,10x"},
      {"jitter", "relative sampling jitter"},
      {"errors", "none | model:factor[:axis], comma separated"},
      {"states", "number of ring initial states"},
      {"ring", "ring radius"}};
  return h;
}

struct Command {
  CLI::App* app{nullptr};
  std::map<std::string, std::string> values;
  std::map<std::string, bool> flags;
  std::set<std::string> from_config;

  void option(const std::string& key, const std::string& help) {
    const auto it = option_help().find(key);
    app->add_option("--" + key, values[key], help.empty() && it != option_help().end() ? it->second : help);
  }
  void flag(const std::string& key, const std::string& help) {
    flags[key] = false;
    app->add_flag("--" + key, flags[key], help);
  }
  const std::string& get(const std::string& key) const { return values.at(key); }
  bool has(const std::string& key) const { return !trim(values.at(key)).empty(); }
  // passed on the command line or in the config file, possibly empty
  bool given(const std::string& key) const {
    return app->get_option("--" + key)->count() > 0 || from_config.count(key) > 0;
  }
  bool on(const std::string& key) const { return flags.at(key); }
  double number(const std::string& key, double fallback) const {
    return has(key) ? parse_double(get(key), "--" + key) : fallback;
  }
  long long integer(const std::string& key, long long fallback) const {
    return has(key) ? parse_int(get(key), "--" + key) : fallback;
  }
  std::string text(const std::string& key, const std::string& fallback) const {
    return has(key) ? trim(get(key)) : fallback;
  }
  const std::string& require(const std::string& key) const {
    if (!has(key)) invalid("missing required --" + key);
    return get(key);
  }
};

void merge_config(Command& cmd, const std::string& name) {
  if (!cmd.has("config")) return;
  const std::string path = cmd.get("config");
  const json j = read_json_file(path);
  require_schema(j, path);
  for (const auto& [key, value] : j.items()) {
    if (key == "schema") continue;
    if (key == "command") {
      if (!value.is_string() || value.get<std::string>() != name) {
        invalid(path + ": \"command\" does not match '" + name + "'");
      }
      continue;
    }
    if (key == "config") invalid(path + ": nested \"config\" is not allowed");
    if (auto f = cmd.flags.find(key); f != cmd.flags.end()) {
      if (!value.is_boolean()) invalid(path + ": \"" + key + "\" must be a boolean");
      if (cmd.app->get_option("--" + key)->count() == 0) f->second = value.get<bool>();
      continue;
    }
    auto it = cmd.values.find(key);
    if (it == cmd.values.end()) invalid(path + ": unknown key '" + key + "' for command '" + name + "'");
    if (cmd.app->get_option("--" + key)->count() == 0) {
      it->second = config_text(value, key);
      cmd.from_config.insert(key);
    }
  }
}

// Artifacts are buffered and written only after the command succeeds.
struct Artifacts {
  std::vector<std::pair<std::string, std::string>> files;
  std::string stdout_text;

  void emit(const std::string& path, std::string content) {
    if (path.empty()) {
      stdout_text += content;
    } else {
      files.emplace_back(path, std::move(content));
    }
  }
  void flush(std::ostream& out) const {
    for (const auto& [path, content] : files) {
      std::ofstream f(path, std::ios::binary);
      if (!f) throw Error(ErrorKind::Io, "cannot write '" + path + "'");
      f << content;
      if (!f) throw Error(ErrorKind::Io, "write failed for '" + path + "'");
    }
    out << stdout_text;
  }
};

std::string dump(const json& j) { return j.dump(2) + "\n"; }

struct Outcome {
  Artifacts artifacts;
  int code{kExitOk};
};

ControlSystem system_from(const Command& cmd) {
  return zoo_build(cmd.require("system"), parse_params(cmd.get("params")));
}

// zoo -----------------------------------------------------------------------

json describe_system(const ZooEntry& entry, const ParamMap& params) {
  const ControlSystem sys = zoo_build(entry.name, params);
  ParamMap effective = entry.default_params;
  for (const auto& [k, v] : params) effective[k] = v;
  json j{{"name", entry.name},
         {"description", entry.description},
         {"n", sys.n},
         {"m", sys.m},
         {"affine", sys.affine.has_value()},
         {"driftless", is_driftless_affine(sys)},
         {"params", effective},
         {"default_controls", sys.default_controls ? sys.default_controls->describe() : std::string("ball:1")}};
  if (!sys.notes.empty()) j["notes"] = sys.notes;
  if (sys.lipschitz_hint) j["lipschitz_hint"] = *sys.lipschitz_hint;
  return j;
}

Outcome cmd_zoo(const Command& cmd, const std::string& action, const std::string& name) {
  Outcome o;
  const auto& catalog = zoo_catalog();
  json j;
  if (action == "list") {
    if (!name.empty()) invalid("zoo list takes no name");
    j = json::array();
    for (const auto& e : catalog) j.push_back(describe_system(e, {}));
  } else if (action == "show") {
    if (name.empty()) invalid("zoo show needs a system name");
    auto it = std::find_if(catalog.begin(), catalog.end(), [&](const ZooEntry& e) { return e.name == name; });
    if (it == catalog.end()) throw Error(ErrorKind::UnknownName, "unknown zoo system '" + name + "'");
    j = describe_system(*it, parse_params(cmd.get("params")));
  } else {
    invalid("zoo: expected 'list' or 'show <name>'");
  }
  o.artifacts.emit(cmd.get("out"), dump(j));
  return o;
}

// simulate --------------------------------------------------------------------

Outcome cmd_simulate(const Command& cmd) {
  Outcome o;
  const ControlSystem sys = system_from(cmd);
  const Vec x0 = parse_vec(cmd.require("x0"), "--x0");
  require_dim(x0, sys.n, "--x0");
  const double horizon = cmd.number("horizon", 10.0);
  if (!(horizon > 0.0)) invalid("--horizon must be positive");
  const std::uint64_t seed = cmd.has("seed") ? parse_seed(cmd.get("seed"), "--seed") : 1;
  const SamplingSchedule schedule = parse_schedule(cmd.get("schedule"), horizon);
  const FeedbackChoice fb =
      make_feedback(cmd.get("feedback"), cmd.get("clf"), cmd.get("alpha"), cmd.get("control-set"), sys);
  PerturbationSpec pert{parse_signal(cmd.get("e"), sys.n, seed), parse_signal(cmd.get("d"), sys.n, seed + 1)};
  IntegratorOptions opts;
  opts.substeps = static_cast<int>(cmd.integer("substeps", 8));
  opts.blowup = cmd.number("blowup", kDefaultBlowup);
  opts.record_dense = !cmd.on("samples-only");

  const PiTrajectory traj = simulate_pi_trajectory(sys, fb.law, schedule, x0, pert, opts, fb.diagnostics);
  std::ostringstream csv;
  write_pi_csv(csv, traj, fb.diagnostics);
  o.artifacts.emit(cmd.get("out"), csv.str());

  const Vec xf = traj.escaped ? traj.dense.state(traj.dense.size() - 1) : traj.final_state();
  json summary{{"command", "simulate"},
               {"system", sys.name},
               {"feedback", fb.description},
               {"continuity", std::string(to_string(fb.law.continuity))},
               {"schedule", schedule.describe()},
               {"x0", to_std(x0)},
               {"horizon", horizon},
               {"samples", traj.samples()},
               {"rows", traj.dense.size()},
               {"final_time", traj.dense.times.back()},
               {"final_state", to_std(xf)},
               {"final_norm", xf.norm()},
               {"max_norm", traj.max_norm},
               {"escaped", traj.escaped},
               {"e", pert.e.describe()},
               {"d", pert.d.describe()}};
  if (traj.escaped) summary["escape_time"] = traj.escape_time;
  bool check_failed = false;
  if (cmd.has("expect-final-norm")) {
    const double bound = cmd.number("expect-final-norm", 0.0);
    const bool pass = !traj.escaped && xf.norm() < bound;
    summary["checks"] = {{"final_norm_below", {{"threshold", bound}, {"passed", pass}}}};
    check_failed = !pass;
  }
  if (cmd.has("summary")) {
    o.artifacts.emit(cmd.get("summary"), dump(summary));
  } else if (cmd.has("out")) {
    o.artifacts.emit("", dump(summary));
  }
  if (traj.escaped) {
    o.code = kExitSimulation;
  } else if (check_failed && cmd.on("strict")) {
    o.code = kExitCheckFailed;
  }
  return o;
}

// synthesize ------------------------------------------------------------------

Outcome cmd_synthesize(const Command& cmd) {
  Outcome o;
  const ControlSystem sys = system_from(cmd);
  const std::string method = cmd.text("method", "universal");
  if (method != "universal" && method != "pointwise" && method != "proximal") {
    throw Error(ErrorKind::UnknownName, "--method: expected universal, pointwise or proximal");
  }
  const FeedbackChoice fb = make_feedback(method, cmd.get("clf"), cmd.get("alpha"), cmd.get("control-set"), sys);
  const double extent = cmd.number("extent", 2.0);
  const long long res = cmd.integer("grid", 41);
  if (!(extent > 0.0) || res < 2) invalid("--extent must be positive and --grid at least 2");
  if (std::pow(static_cast<double>(res), sys.n) > static_cast<double>(kMaxCells)) {
    invalid("grid has more than 1e6 points");
  }
  const auto pts = box_grid(sys.n, extent, static_cast<int>(res));
  const bool proximal = method == "proximal";
  struct Row {
    double value;
    Vec u;
  };
  const auto rows = map_indices<Row>(pts.size(), Execution::Parallel, [&](std::size_t i) {
    const Vec& x = pts[i];
    const double v = proximal ? fb.diagnostics.envelope->value(x) : fb.diagnostics.V(x);
    return Row{v, fb.law(x)};
  });
  std::ostringstream csv;
  for (int j = 1; j <= sys.n; ++j) csv << (j > 1 ? "," : "") << 'x' << j;
  csv << (proximal ? ",Valpha" : ",V");
  for (int j = 1; j <= sys.m; ++j) csv << ",u" << j;
  csv << '\n';
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (int j = 0; j < sys.n; ++j) csv << (j > 0 ? "," : "") << format_double(pts[i][j]);
    csv << ',' << format_double(rows[i].value);
    for (int j = 0; j < sys.m; ++j) csv << ',' << format_double(rows[i].u[j]);
    csv << '\n';
  }
  o.artifacts.emit(cmd.get("out"), csv.str());
  json summary{{"command", "synthesize"},
               {"system", sys.name},
               {"method", method},
               {"feedback", fb.law.name},
               {"continuity", std::string(to_string(fb.law.continuity))},
               {"provenance", std::string(to_string(fb.law.provenance))},
               {"points", pts.size()},
               {"extent", extent},
               {"notes", fb.law.notes}};
  if (proximal) summary["alpha"] = fb.diagnostics.envelope->alpha();
  if (cmd.has("summary")) {
    o.artifacts.emit(cmd.get("summary"), dump(summary));
  } else if (cmd.has("out")) {
    o.artifacts.emit("", dump(summary));
  }
  return o;
}

// clf-verify ------------------------------------------------------------------

std::pair<double, double> parse_region(const std::string& text) {
  const auto parts = split(text, ':');
  if (parts.size() != 2) invalid("--region: expected r:R");
  const double r = parse_double(parts[0], "--region");
  const double R = parse_double(parts[1], "--region");
  if (!(r >= 0.0) || !(R > r)) invalid("--region: need 0 <= r < R");
  return {r, R};
}

Outcome cmd_clf_verify(const Command& cmd) {
  Outcome o;
  const ControlSystem sys = system_from(cmd);
  const SmoothCLF clf = smooth_clf_for(cmd.get("clf"), sys);
  const ControlSet controls = parse_control_set(cmd.get("control-set"), sys);
  const auto [r, R] = parse_region(cmd.text("region", "0.1:2"));
  const long long res = cmd.integer("grid", 41);
  if (res < 2) invalid("--grid must be at least 2");
  if (std::pow(static_cast<double>(res), sys.n) > static_cast<double>(kMaxCells)) invalid("grid has more than 1e6 points");
  const double tol = cmd.number("tol", 1e-9);
  SmoothCLF checked = clf;
  if (!checked.W) checked = with_default_rate(checked, sys, controls, Region{r, R, {}}, static_cast<int>(res));
  const RegionReport rep = verify_clf_on_region(checked, sys, controls, Region{r, R, {}}, static_cast<int>(res), tol);
  json j = to_json(rep);
  j["command"] = "clf-verify";
  j["system"] = sys.name;
  j["clf"] = checked.name;
  j["controls"] = controls.describe();
  j["region"] = {{"inner", r}, {"outer", R}};
  j["grid"] = res;
  j["tol"] = tol;
  o.artifacts.emit(cmd.get("out"), dump(j));
  if (!rep.ok() && cmd.on("strict")) o.code = kExitCheckFailed;
  return o;
}

// check-brockett ----------------------------------------------------------------

Outcome cmd_check_brockett(const Command& cmd) {
  Outcome o;
  const ControlSystem sys = system_from(cmd);
  const std::string method = cmd.text("method", "auto");
  ProbeOptions probe;
  if (cmd.has("seed")) probe.seed = parse_seed(cmd.get("seed"), "--seed");
  BrockettVerdict v;
  if (method == "auto") {
    v = brockett_check(sys, probe);
  } else if (method == "linear") {
    const Linearization lin = linearize_at_origin(sys);
    v = brockett_linear_test(lin.A, lin.B);
  } else if (method == "driftless") {
    v = brockett_driftless_test(sys);
  } else if (method == "probe") {
    const long long targets = cmd.integer("targets", 32);
    if (targets < 1 || targets > 100000) invalid("--targets out of range");
    v = onto_neighborhood_probe(sys, cmd.number("x-radius", 1.0), cmd.number("u-radius", 1.0),
                                static_cast<int>(targets), probe);
  } else {
    throw Error(ErrorKind::UnknownName, "--method: expected auto, linear, driftless or probe");
  }
  json j = to_json(v);
  j["system"] = sys.name;
  j["command"] = "check-brockett";
  o.artifacts.emit(cmd.get("out"), dump(j));
  if (v.fails() && cmd.on("strict")) o.code = kExitCheckFailed;
  return o;
}

// iss-fit -----------------------------------------------------------------------

std::vector<Signal> load_inputs(const Command& cmd, int m) {
  std::vector<Signal> inputs;
  const std::uint64_t seed = cmd.has("seed") ? parse_seed(cmd.get("seed"), "--seed") : 1;
  if (cmd.has("inputs")) {
    const std::string path = cmd.get("inputs");
    const json j = read_json_file(path);
    require_schema(j, path);
    require_keys(j, {"schema", "inputs"}, path);
    if (!j.contains("inputs") || !j["inputs"].is_array()) invalid(path + ": \"inputs\" must be an array");
    for (const auto& s : j["inputs"]) inputs.push_back(signal_from_json(s, m, seed + inputs.size()));
  }
  if (cmd.given("amplitudes")) {
    for (double a : parse_list(cmd.get("amplitudes"), "--amplitudes")) inputs.push_back(Signal::constant(Vec::Constant(m, a)));
  }
  return inputs;
}

Outcome cmd_iss_fit(const Command& cmd) {
  Outcome o;
  const ControlSystem sys = system_from(cmd);
  std::optional<FeedbackChoice> fb;
  if (cmd.has("feedback")) fb = make_feedback(cmd.get("feedback"), cmd.get("clf"), cmd.get("alpha"), cmd.get("control-set"), sys);
  const std::vector<Signal> inputs = load_inputs(cmd, sys.m);
  const std::vector<Vec> x0s = cmd.given("x0-grid") ? parse_points(cmd.get("x0-grid"), sys.n, "--x0-grid")
                                                  : std::vector<Vec>{Vec::Zero(sys.n)};
  if (inputs.empty() || x0s.empty()) invalid("iss-fit: empty input or initial-state grid");
  if (inputs.size() * x0s.size() > kMaxCells) invalid("iss-fit: more than 1e6 cells");
  const double horizon = cmd.number("horizon", 50.0);
  const double step = cmd.number("step", 0.01);
  if (!(horizon > 0.0) || !(step > 0.0) || horizon / step > 5e7) invalid("iss-fit: bad --horizon/--step");
  const GainProbe probe = asymptotic_gain_probe(sys, fb ? &fb->law : nullptr, inputs, x0s, horizon, step,
                                                cmd.number("tail", 0.25));
  json j = to_json(probe);
  j["command"] = "iss-fit";
  j["system"] = sys.name;
  j["feedback"] = fb ? fb->description : std::string("none");
  j["horizon"] = horizon;
  j["step"] = step;
  j["cells"] = inputs.size() * x0s.size();
  json descr = json::array();
  for (const auto& s : inputs) descr.push_back(s.describe());
  j["inputs"] = descr;
  json states = json::array();
  for (const auto& x : x0s) states.push_back(to_std(x));
  j["x0_grid"] = states;
  if (!fb && is_linear(sys)) {
    const Linearization lin = linearize_at_origin(sys);
    try {
      j["linear_gain"] = linear_gain(lin.A, lin.B);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::NotHurwitz) throw;
      j["linear_gain"] = nullptr;
    }
  }
  o.artifacts.emit(cmd.get("out"), dump(j));
  return o;
}

// lyap-verify -------------------------------------------------------------------

DissipationForm form_from_string(const std::string& s) {
  if (s == "iss") return DissipationForm::ISS;
  if (s == "iiss") return DissipationForm::IISS;
  if (s == "implication") return DissipationForm::Implication;
  throw Error(ErrorKind::UnknownName, "unknown dissipation form '" + s + "' (iss, iiss, implication)");
}

Outcome cmd_lyap_verify(const Command& cmd) {
  Outcome o;
  const std::string path = cmd.require("candidate");
  const json j = read_json_file(path);
  require_schema(j, path);
  require_keys(j, {"schema", "name", "system", "params", "V", "grad", "form", "alpha", "gamma"}, path);
  std::string system_name = cmd.text("system", "");
  if (system_name.empty()) system_name = j.contains("system") ? json_string(j, "system", path) : "";
  if (system_name.empty()) invalid("lyap-verify: no system given");
  ParamMap params = parse_params(cmd.get("params"));
  if (params.empty() && j.contains("params")) {
    if (!j["params"].is_object()) invalid(path + ": \"params\" must be an object");
    for (const auto& [k, v] : j["params"].items()) params[k] = v.get<double>();
  }
  const ControlSystem sys = zoo_build(system_name, params);

  LyapunovCandidate cand;
  cand.name = j.contains("name") ? json_string(j, "name", path) : path;
  cand.n = sys.n;
  const StateExprs V = compile_state_exprs({json_string(j, "V", path)}, sys.n);
  cand.V = [V](const Vec& x) { return V(x)[0]; };
  if (j.contains("grad")) {
    if (!j["grad"].is_array() || static_cast<int>(j["grad"].size()) != sys.n) invalid(path + ": \"grad\" needs n entries");
    std::vector<std::string> texts;
    for (const auto& g : j["grad"]) texts.push_back(g.get<std::string>());
    const StateExprs G = compile_state_exprs(texts, sys.n);
    cand.grad = [G](const Vec& x) { return G(x); };
  } else {
    const ScalarField Vf = cand.V;
    cand.grad = [Vf](const Vec& x) { return fd_gradient(Vf, x); };
  }
  cand.form = form_from_string(json_string(j, "form", path));
  cand.alpha_text = json_string(j, "alpha", path);
  cand.gamma_text = json_string(j, "gamma", path);
  cand.alpha = compile_scalar_fn(cand.alpha_text);
  cand.gamma = compile_scalar_fn(cand.gamma_text);

  const double xr = cmd.number("x-range", 5.0);
  const double ur = cmd.number("u-range", 2.0);
  const long long xres = cmd.integer("x-res", 41);
  const long long ures = cmd.integer("u-res", 21);
  if (!(xr > 0.0) || !(ur > 0.0) || xres < 2 || ures < 2) invalid("lyap-verify: bad grid ranges");
  const double cells = std::pow(static_cast<double>(xres), sys.n) * std::pow(static_cast<double>(ures), sys.m);
  if (cells > static_cast<double>(kMaxCells)) invalid("lyap-verify: more than 1e6 cells");
  const auto states = box_grid(sys.n, xr, static_cast<int>(xres));
  const auto us = box_grid(sys.m, ur, static_cast<int>(ures));
  const LyapunovReport rep = verify_lyapunov_candidate(cand, sys, states, us);
  json out = to_json(rep);
  out["command"] = "lyap-verify";
  out["system"] = sys.name;
  out["candidate"] = cand.name;
  out["form"] = std::string(to_string(cand.form));
  out["alpha"] = cand.alpha_text;
  out["gamma"] = cand.gamma_text;
  out["grid"] = {{"x_range", xr}, {"x_res", xres}, {"u_range", ur}, {"u_res", ures}};
  o.artifacts.emit(cmd.get("out"), dump(out));
  if (!rep.ok() && cmd.on("strict")) o.code = kExitCheckFailed;
  return o;
}

// sweep-robustness --------------------------------------------------------------

std::vector<ScheduleChoice> parse_schedule_choices(const std::string& text, double jitter, std::uint64_t seed) {
  std::vector<ScheduleChoice> out;
  for (const auto& item : split(text, ',')) {
    if (item.empty()) continue;
    ScheduleChoice c;
    if (item == "compliant") {
      c.h_factor = 1.0;
    } else if (item.back() == 'x') {
      c.h_factor = parse_double(item.substr(0, item.size() - 1), "--schedules");
    } else {
      c.h_factor = parse_double(item, "--schedules");
    }
    if (!(c.h_factor > 0.0)) invalid("--schedules: factors must be positive");
    c.label = item;
    c.jitter = jitter;
    c.seed = seed + out.size();
    out.push_back(c);
  }
  return out;
}

std::vector<ErrorChoice> parse_error_choices(const std::string& text, int n, std::uint64_t seed) {
  std::vector<ErrorChoice> out;
  for (const auto& item : split(text, ',')) {
    if (item.empty()) continue;
    const auto parts = split(item, ':');
    ErrorChoice c;
    c.label = item;
    c.model = error_model_from_string(parts[0]);
    c.seed = seed + out.size();
    if (c.model == ErrorModel::None) {
      if (parts.size() != 1) invalid("--errors: 'none' takes no factor");
    } else {
      if (parts.size() < 2 || parts.size() > 3) invalid("--errors: expected model:factor[:axis]");
      c.eps_factor = parse_double(parts[1], "--errors");
      if (!(c.eps_factor >= 0.0)) invalid("--errors: factor must be nonnegative");
      if (parts.size() == 3) {
        c.axis = static_cast<int>(parse_int(parts[2], "--errors axis"));
        if (c.axis < 0 || c.axis >= n) invalid("--errors: axis out of range");
      }
    }
    out.push_back(c);
  }
  return out;
}

Outcome cmd_sweep_robustness(const Command& cmd) {
  Outcome o;
  const ControlSystem sys = zoo_build(cmd.text("system", "artstein-circles"), parse_params(cmd.get("params")));
  const ContinuousCLF clf = continuous_clf_for(cmd.get("clf"), sys);
  const ControlSet controls = parse_control_set(cmd.get("control-set"), sys);
  const double r = cmd.number("r", 0.5);
  const double R = cmd.number("R", 1.5);
  const std::uint64_t seed = cmd.has("seed") ? parse_seed(cmd.get("seed"), "--seed") : 1;

  RobustExperimentSpec spec;
  spec.schedules = parse_schedule_choices(cmd.text("schedules", "compliant"), cmd.number("jitter", 0.0), seed);
  spec.errors = parse_error_choices(cmd.text("errors", "none"), sys.n, seed);
  const long long states = cmd.integer("states", 16);
  if (states < 0 || states > 100000) invalid("--states out of range");
  if (cmd.given("x0-grid")) spec.initial_states = parse_points(cmd.get("x0-grid"), sys.n, "--x0-grid");
  else if (states > 0) spec.initial_states = ring_states(sys.n, cmd.number("ring", 1.0), static_cast<int>(states));
  const std::size_t cells = spec.schedules.size() * spec.errors.size() * spec.initial_states.size();
  if (cells == 0) invalid("sweep-robustness: empty grid");
  if (cells > kMaxCells) invalid("sweep-robustness: more than 1e6 cells");
  for (const Vec& x : spec.initial_states) {
    if (x.norm() > R) invalid("sweep-robustness: initial state outside B_R");
  }
  spec.horizon = cmd.number("horizon", 0.0);
  spec.substeps = static_cast<int>(cmd.integer("substeps", 16));

  ConstantsOptions copts;
  if (cmd.has("alpha")) copts.alpha = cmd.number("alpha", 0.0);
  const RobustConstants constants = constants_for(clf, sys, controls, r, R, copts);
  const RobustReport report = robust_stabilization_experiment(sys, constants, controls, spec);
  json j = to_json(report);
  j["command"] = "sweep-robustness";
  j["system"] = sys.name;
  j["clf"] = clf.name;
  o.artifacts.emit(cmd.get("out"), dump(j));
  if (report.compliant_failures() > 0 && cmd.on("strict")) o.code = kExitCheckFailed;
  return o;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  configure_threads_from_env();
  CLI::App app{"clfstab: control-Lyapunov feedback synthesis, sampled simulation and stability checks"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  std::map<std::string, Command> commands;
  auto add = [&](const std::string& name, const std::string& help) -> Command& {
    Command& c = commands[name];
    c.app = app.add_subcommand(name, help);
    c.option("config", "JSON config file (schema 1); flags override its values");
    c.option("out", "output file (default: stdout)");
    c.flag("strict", "exit 4 when a check fails");
    return c;
  };

  std::string zoo_action, zoo_name;
  {
    Command& c = add("zoo", "list zoo systems or show one");
    c.app->add_option("action", zoo_action, "list | show")->required();
    c.app->add_option("name", zoo_name, "system name for show");
    c.option("params", "system parameters key=value,...");
  }
  {
    Command& c = add("simulate", "sample-and-hold closed-loop simulation to CSV");
    for (const char* k : {"system", "params", "feedback", "clf", "alpha", "control-set", "schedule", "x0", "e", "d",
                          "horizon", "substeps", "blowup", "seed", "summary", "expect-final-norm"}) {
      c.option(k, "");
    }
    c.flag("samples-only", "write only the sample rows");
  }
  {
    Command& c = add("synthesize", "tabulate a synthesized feedback on a grid");
    for (const char* k : {"system", "params", "method", "clf", "alpha", "control-set", "extent", "grid", "summary"}) {
      c.option(k, "");
    }
  }
  {
    Command& c = add("clf-verify", "grid check of the CLF decrease condition");
    for (const char* k : {"system", "params", "clf", "region", "grid", "control-set", "tol"}) c.option(k, "");
  }
  {
    Command& c = add("check-brockett", "Brockett necessary-condition verdict");
    for (const char* k : {"system", "params", "method", "x-radius", "u-radius", "targets", "seed"}) c.option(k, "");
  }
  {
    Command& c = add("iss-fit", "asymptotic-gain table and fitted gain");
    for (const char* k : {"system", "params", "feedback", "clf", "alpha", "control-set", "inputs", "amplitudes",
                          "x0-grid", "horizon", "step", "tail", "seed"}) {
      c.option(k, "");
    }
  }
  {
    Command& c = add("lyap-verify", "grid check of an ISS/iISS Lyapunov candidate");
    for (const char* k : {"candidate", "system", "params", "x-range", "x-res", "u-range", "u-res"}) c.option(k, "");
  }
  {
    Command& c = add("sweep-robustness", "sampled robust-stabilization sweep");
    for (const char* k : {"system", "params", "clf", "control-set", "r", "R", "alpha", "schedules", "jitter", "errors",
                          "states", "ring", "x0-grid", "horizon", "substeps", "seed"}) {
      c.option(k, "");
    }
  }

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    report_error(err, "Validation", e.what(), kExitValidation);
    return kExitValidation;
  }

  try {
    for (auto& [name, cmd] : commands) {
      if (!cmd.app->parsed()) continue;
      merge_config(cmd, name);
      Outcome o;
      if (name == "zoo") o = cmd_zoo(cmd, zoo_action, zoo_name);
      else if (name == "simulate") o = cmd_simulate(cmd);
      else if (name == "synthesize") o = cmd_synthesize(cmd);
      else if (name == "clf-verify") o = cmd_clf_verify(cmd);
      else if (name == "check-brockett") o = cmd_check_brockett(cmd);
      else if (name == "iss-fit") o = cmd_iss_fit(cmd);
      else if (name == "lyap-verify") o = cmd_lyap_verify(cmd);
      else if (name == "sweep-robustness") o = cmd_sweep_robustness(cmd);
      o.artifacts.flush(out);
      if (o.code == kExitSimulation) report_error(err, "Escape", "trajectory escaped the blow-up radius", o.code);
      if (o.code == kExitCheckFailed) report_error(err, "CheckFailed", "a check failed under --strict", o.code);
      return o.code;
    }
  } catch (const Error& e) {
    const int code = exit_code_for(e.kind());
    report_error(err, std::string(to_string(e.kind())), e.what(), code);
    return code;
  } catch (const json::exception& e) {
    report_error(err, "Validation", e.what(), kExitValidation);
    return kExitValidation;
  } catch (const std::exception& e) {
    report_error(err, "Internal", e.what(), 1);
    return 1;
  }
  return kExitValidation;
}

}  // namespace clfstab::cli
