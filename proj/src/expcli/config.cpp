#include "minpo/expcli/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "minpo/encoders/encoder.hpp"

namespace minpo::expcli {

using core::Experiment;

namespace {

const std::map<std::string, Method>& method_names() {
  static const std::map<std::string, Method> names{
      {"minpo-kan", Method::minpo_kan}, {"minpo-mlp", Method::minpo_mlp}, {"apinn", Method::apinn},
      {"apikan", Method::apikan},       {"fpinn", Method::fpinn},         {"fpikan", Method::fpikan},
      {"fd-forward", Method::fd_forward}, {"fd-upwind", Method::fd_upwind}};
  return names;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size() || !std::isfinite(d)) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("option " + key + ": not a number: '" + v + "'");
  }
}

long long parse_integer(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const long long i = std::stoll(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return i;
  } catch (const std::exception&) {
    throw ConfigError("option " + key + ": not an integer: '" + v + "'");
  }
}

int parse_count(const std::string& key, const std::string& v, int min) {
  const long long i = parse_integer(key, v);
  if (i < min || i > 100000000) throw ConfigError("option " + key + ": out of range: " + v);
  return static_cast<int>(i);
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw ConfigError("option " + key + ": not a boolean: '" + v + "'");
}

std::vector<int> parse_widths(const std::string& key, const std::string& v) {
  std::vector<int> w;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) w.push_back(parse_count(key, trim(item), 1));
  if (w.empty()) throw ConfigError("option " + key + ": needs at least one hidden width");
  return w;
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> s{
      {"experiment",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         try {
           c.experiment = core::experiment_from_string(v);
         } catch (const std::exception&) {
           throw ConfigError("option " + k + ": unknown experiment '" + v + "'");
         }
       }},
      {"method", [](RunConfig& c, const std::string&, const std::string& v) { c.method = method_from_string(v); }},
      {"widths", [](RunConfig& c, const std::string& k, const std::string& v) { c.widths = parse_widths(k, v); }},
      {"degree", [](RunConfig& c, const std::string& k, const std::string& v) { c.degree = parse_count(k, v, 1); }},
      {"kappa", [](RunConfig& c, const std::string& k, const std::string& v) { c.kappa = parse_double(k, v); }},
      {"alpha", [](RunConfig& c, const std::string& k, const std::string& v) { c.alpha = parse_double(k, v); }},
      {"A", [](RunConfig& c, const std::string& k, const std::string& v) { c.horizon = parse_double(k, v); }},
      {"n-res", [](RunConfig& c, const std::string& k, const std::string& v) { c.n_res = parse_count(k, v, 1); }},
      {"n-i", [](RunConfig& c, const std::string& k, const std::string& v) { c.n_i = parse_count(k, v, 1); }},
      {"n-t", [](RunConfig& c, const std::string& k, const std::string& v) { c.n_t = parse_count(k, v, 1); }},
      {"n-meas", [](RunConfig& c, const std::string& k, const std::string& v) { c.n_meas = parse_count(k, v, 1); }},
      {"n-m", [](RunConfig& c, const std::string& k, const std::string& v) { c.n_m = parse_count(k, v, 1); }},
      {"n-bc", [](RunConfig& c, const std::string& k, const std::string& v) { c.n_bc = parse_count(k, v, 1); }},
      {"n-x", [](RunConfig& c, const std::string& k, const std::string& v) { c.n_x = parse_count(k, v, 1); }},
      {"seed",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         const long long s = parse_integer(k, v);
         if (s < 0) throw ConfigError("option " + k + ": must be non-negative");
         c.seed = static_cast<std::uint64_t>(s);
       }},
      {"adam-iters", [](RunConfig& c, const std::string& k, const std::string& v) { c.adam_iters = parse_count(k, v, 0); }},
      {"lbfgs-iters", [](RunConfig& c, const std::string& k, const std::string& v) { c.lbfgs_iters = parse_count(k, v, 0); }},
      {"lr", [](RunConfig& c, const std::string& k, const std::string& v) { c.learning_rate = parse_double(k, v); }},
      {"lambda-ide", [](RunConfig& c, const std::string& k, const std::string& v) { c.weights.ide = parse_double(k, v); }},
      {"lambda-data", [](RunConfig& c, const std::string& k, const std::string& v) { c.weights.data = parse_double(k, v); }},
      {"lambda-m", [](RunConfig& c, const std::string& k, const std::string& v) { c.weights.memory = parse_double(k, v); }},
      {"log-every", [](RunConfig& c, const std::string& k, const std::string& v) { c.log_every = parse_count(k, v, 1); }},
      {"width-ladder", [](RunConfig& c, const std::string& k, const std::string& v) { c.width_ladder = parse_bool(k, v); }},
      {"out", [](RunConfig& c, const std::string& k, const std::string& v) {
         if (v.empty()) throw ConfigError("option " + k + ": empty path");
         c.out = v;
       }}};
  return s;
}

std::string normalize(std::string key) {
  std::replace(key.begin(), key.end(), '_', '-');
  return key;
}

std::string join_widths(const std::vector<int>& w) {
  std::string s;
  for (std::size_t i = 0; i < w.size(); ++i) s += (i ? "," : "") + std::to_string(w[i]);
  return s;
}

int parameter_count(const RunConfig& c, int width) {
  const auto spec = make_problem(c);
  const int in = spec.dims();
  int out = 1;
  if (c.method == Method::apinn || c.method == Method::apikan) out = c.experiment == Experiment::exp2 ? 4 : 2;
  std::vector<int> w{in, width, width, width, out};
  return uses_kan(c.method) ? encoders::ckan_parameter_count(w, c.degree) : encoders::mlp_parameter_count(w);
}

}  // namespace

std::string to_string(Method m) {
  for (const auto& [name, value] : method_names()) {
    if (value == m) return name;
  }
  throw std::logic_error("unnamed method");
}

Method method_from_string(const std::string& name) {
  const auto it = method_names().find(name);
  if (it == method_names().end()) throw ConfigError("unknown method '" + name + "'");
  return it->second;
}

bool uses_kan(Method m) { return m == Method::minpo_kan || m == Method::apikan || m == Method::fpikan; }

bool is_fd(Method m) { return m == Method::fd_forward || m == Method::fd_upwind; }

void set_option(RunConfig& config, const std::string& key, const std::string& value) {
  const std::string k = key == "A" ? key : normalize(key);
  const auto it = setters().find(k);
  if (it == setters().end()) throw ConfigError("unknown option '" + key + "'");
  it->second(config, k, trim(value));
}

const std::vector<std::string>& option_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& [name, setter] : setters()) k.push_back(name);
    return k;
  }();
  return keys;
}

void apply_config_text(RunConfig& config, std::istream& in) {
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(number) + ": expected key=value");
    set_option(config, trim(line.substr(0, eq)), line.substr(eq + 1));
  }
}

void apply_config_file(RunConfig& config, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  apply_config_text(config, in);
}

core::ProblemSpec make_problem(const RunConfig& c) {
  core::ProblemSpec spec;
  switch (c.experiment) {
    case Experiment::exp1_forward:
      spec = core::make_volterra_spec(c.kappa.value_or(1.0), c.horizon, false);
      break;
    case Experiment::exp1_inverse:
      spec = core::make_volterra_spec(c.kappa.value_or(0.8), c.horizon, true);
      break;
    case Experiment::exp2:
      spec = core::make_nested_spec();
      break;
    case Experiment::exp3:
      spec = core::make_fractional_spec(c.alpha.value_or(0.5), c.n_t > 0 ? c.n_t : 10);
      break;
  }
  spec.weights = c.weights;
  return spec;
}

int ladder_width(const RunConfig& config, int target) {
  int best = 2;
  for (int w = 2; w <= 128; ++w) {
    if (std::abs(parameter_count(config, w) - target) < std::abs(parameter_count(config, best) - target)) best = w;
  }
  return best;
}

RunConfig resolve(RunConfig c) {
  const Experiment e = c.experiment;
  const Method m = c.method;
  if (is_fd(m) && e != Experiment::exp2) throw ConfigError("finite-difference methods apply to exp2 only");
  if ((m == Method::fpinn || m == Method::fpikan) && e != Experiment::exp3) {
    throw ConfigError("fpinn/fpikan apply to exp3 only");
  }
  if ((m == Method::apinn || m == Method::apikan) && e == Experiment::exp3) {
    throw ConfigError("the auxiliary-field baselines do not apply to the fractional problem");
  }
  if (e == Experiment::exp3 && !c.alpha) throw ConfigError("exp3 requires alpha");
  if (e != Experiment::exp3 && c.alpha) throw ConfigError("alpha applies to exp3 only");
  if (c.alpha && !(*c.alpha > 0.0 && *c.alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
  if (c.kappa && !(*c.kappa > 0.0)) throw ConfigError("kappa must be positive");
  if (c.kappa && e != Experiment::exp1_forward && e != Experiment::exp1_inverse) {
    throw ConfigError("kappa applies to exp1 only");
  }
  if (!(c.horizon > 0.0)) throw ConfigError("A must be positive");
  if (c.horizon != 1.0 && e != Experiment::exp1_forward && e != Experiment::exp1_inverse) {
    throw ConfigError("A applies to exp1 only");
  }
  if (!(c.learning_rate > 0.0)) throw ConfigError("lr must be positive");
  if (!(c.weights.ide > 0.0 && c.weights.data > 0.0 && c.weights.memory > 0.0)) {
    throw ConfigError("loss weights must be positive");
  }

  const bool exp1 = e == Experiment::exp1_forward || e == Experiment::exp1_inverse;
  if (exp1 && !c.kappa) c.kappa = e == Experiment::exp1_forward ? 1.0 : 0.8;
  if (c.degree == 0) c.degree = (e == Experiment::exp1_inverse || e == Experiment::exp2) ? 3 : 4;
  if (c.n_res == 0) {
    c.n_res = e == Experiment::exp1_forward ? 2400 : e == Experiment::exp2 ? 1000 : 2000;
  }
  if (c.n_i == 0) c.n_i = e == Experiment::exp2 ? (is_fd(m) ? 20 : 10) : 20;
  if (c.n_t == 0 && e == Experiment::exp3) c.n_t = 10;
  if (c.n_meas == 0 && e == Experiment::exp1_inverse) c.n_meas = 10;
  if (c.n_m == 0) c.n_m = exp1 ? 100 : e == Experiment::exp2 ? 5 : 200;
  if (c.n_bc == 0) c.n_bc = 100;
  if (c.n_x == 0 && is_fd(m)) c.n_x = 25;
  if (c.widths.empty()) {
    if (c.width_ladder) {
      const int w = ladder_width(c, c.n_res);
      c.widths = {w, w, w};
    } else if (uses_kan(m)) {
      c.widths = e == Experiment::exp2 ? std::vector<int>{10, 10, 10} : std::vector<int>{15, 15, 15};
    } else {
      c.widths = e == Experiment::exp2 ? std::vector<int>{20, 20, 20} : std::vector<int>{33, 33, 33};
    }
  }
  if (c.adam_iters < 0) c.adam_iters = exp1 ? 10000 : e == Experiment::exp2 ? 3000 : 5000;
  if (c.lbfgs_iters < 0) c.lbfgs_iters = 2000;
  if (c.log_every == 0) c.log_every = e == Experiment::exp2 ? 250 : 100;
  return c;
}

std::string describe(const RunConfig& c) {
  std::ostringstream o;
  o.precision(17);
  o << "experiment=" << core::to_string(c.experiment) << "\n";
  o << "method=" << to_string(c.method) << "\n";
  o << "widths=" << join_widths(c.widths) << "\n";
  o << "degree=" << c.degree << "\n";
  if (c.kappa) o << "kappa=" << *c.kappa << "\n";
  if (c.alpha) o << "alpha=" << *c.alpha << "\n";
  o << "A=" << c.horizon << "\n";
  o << "n-res=" << c.n_res << "\n";
  o << "n-i=" << c.n_i << "\n";
  if (c.n_t > 0) o << "n-t=" << c.n_t << "\n";
  if (c.n_meas > 0) o << "n-meas=" << c.n_meas << "\n";
  o << "n-m=" << c.n_m << "\n";
  o << "n-bc=" << c.n_bc << "\n";
  if (c.n_x > 0) o << "n-x=" << c.n_x << "\n";
  o << "seed=" << c.seed << "\n";
  o << "adam-iters=" << c.adam_iters << "\n";
  o << "lbfgs-iters=" << c.lbfgs_iters << "\n";
  o << "lr=" << c.learning_rate << "\n";
  o << "lambda-ide=" << c.weights.ide << "\n";
  o << "lambda-data=" << c.weights.data << "\n";
  o << "lambda-m=" << c.weights.memory << "\n";
  o << "log-every=" << c.log_every << "\n";
  o << "width-ladder=" << (c.width_ladder ? "true" : "false") << "\n";
  o << "out=" << c.out << "\n";
  return o.str();
}

}  // namespace minpo::expcli
