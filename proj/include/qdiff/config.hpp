#pragma once

// Experiment configuration: a small TOML subset and the resolved config.
//
// Supported syntax: `[table]` and `[table.sub]` headers, `key = value` pairs,
// `#` comments, double-quoted strings (with \" and \\ escapes), integers,
// floats, booleans and single-line arrays of those. Unknown keys are errors so
// that typos do not silently fall back to defaults.

#include <cctype>
#include <charconv>
#include <cerrno>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "qdiff/error.hpp"
#include "qdiff/integrand.hpp"
#include "qdiff/pipeline.hpp"
#include "qdiff/qae.hpp"
#include "qdiff/schedule.hpp"

namespace qdiff {

struct ConfigValue {
  enum class Kind { number, integer, string, boolean, array };
  Kind kind = Kind::number;
  double number = 0;
  std::uint64_t integer = 0;  ///< magnitude for Kind::integer
  bool negative = false;
  std::string text;
  bool boolean = false;
  std::vector<ConfigValue> items;
  int line = 0;

  double as_number() const { return kind == Kind::integer ? (negative ? -1.0 : 1.0) * static_cast<double>(integer) : number; }
};

/// Flat map from dotted keys ("qae.delta") to values.
class ConfigDocument {
 public:
  static ConfigDocument parse(const std::string& source, const std::string& origin = "<config>") {
    ConfigDocument doc;
    doc.origin_ = origin;
    std::istringstream in(source);
    std::string line;
    std::string table;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      std::size_t pos = 0;
      skip_space(line, pos);
      if (pos >= line.size() || line[pos] == '#') continue;
      if (line[pos] == '[') {
        const auto close = line.find(']', pos);
        if (close == std::string::npos) doc.fail(line_no, "unterminated table header");
        table = trim(line.substr(pos + 1, close - pos - 1));
        if (table.empty() || !valid_key(table)) doc.fail(line_no, "invalid table name '" + table + "'");
        std::size_t rest = close + 1;
        skip_space(line, rest);
        if (rest < line.size() && line[rest] != '#') doc.fail(line_no, "trailing characters after table header");
        continue;
      }
      const auto eq = line.find('=', pos);
      if (eq == std::string::npos) doc.fail(line_no, "expected 'key = value'");
      const std::string key = trim(line.substr(pos, eq - pos));
      if (key.empty() || !valid_key(key)) doc.fail(line_no, "invalid key '" + key + "'");
      std::size_t vpos = eq + 1;
      ConfigValue v = doc.parse_value(line, vpos, line_no);
      skip_space(line, vpos);
      if (vpos < line.size() && line[vpos] != '#') doc.fail(line_no, "trailing characters after value");
      const std::string full = table.empty() ? key : table + "." + key;
      if (doc.values_.count(full)) doc.fail(line_no, "duplicate key '" + full + "'");
      v.line = line_no;
      doc.values_[full] = v;
    }
    return doc;
  }

  static ConfigDocument load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str(), path);
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  const std::map<std::string, ConfigValue>& values() const { return values_; }
  const std::string& origin() const { return origin_; }

  const ConfigValue* find(const std::string& key) const {
    const auto it = values_.find(key);
    return it == values_.end() ? nullptr : &it->second;
  }

  std::optional<double> number(const std::string& key) const {
    const auto* v = find(key);
    if (!v) return std::nullopt;
    if (v->kind != ConfigValue::Kind::number && v->kind != ConfigValue::Kind::integer) type_error(key, "a number");
    return v->as_number();
  }

  std::optional<std::int64_t> integer(const std::string& key) const {
    const auto* v = find(key);
    if (!v) return std::nullopt;
    if (v->kind != ConfigValue::Kind::integer || v->integer > static_cast<std::uint64_t>(INT64_MAX)) {
      type_error(key, "an integer");
    }
    return (v->negative ? -1 : 1) * static_cast<std::int64_t>(v->integer);
  }

  std::optional<std::uint64_t> unsigned_integer(const std::string& key) const {
    const auto* v = find(key);
    if (!v) return std::nullopt;
    if (v->kind != ConfigValue::Kind::integer || v->negative) type_error(key, "a nonnegative integer");
    return v->integer;
  }

  std::optional<std::string> string(const std::string& key) const {
    const auto* v = find(key);
    if (!v) return std::nullopt;
    if (v->kind != ConfigValue::Kind::string) type_error(key, "a string");
    return v->text;
  }

  std::optional<bool> boolean(const std::string& key) const {
    const auto* v = find(key);
    if (!v) return std::nullopt;
    if (v->kind != ConfigValue::Kind::boolean) type_error(key, "a boolean");
    return v->boolean;
  }

  std::optional<std::vector<double>> numbers(const std::string& key) const {
    const auto* v = find(key);
    if (!v) return std::nullopt;
    if (v->kind != ConfigValue::Kind::array) type_error(key, "an array of numbers");
    std::vector<double> out;
    for (const auto& item : v->items) {
      if (item.kind != ConfigValue::Kind::number && item.kind != ConfigValue::Kind::integer) {
        type_error(key, "an array of numbers");
      }
      out.push_back(item.as_number());
    }
    return out;
  }

  /// Throws on any key outside the allowed set.
  void require_known(const std::set<std::string>& allowed) const {
    for (const auto& [key, v] : values_) {
      if (!allowed.count(key)) fail(v.line, "unknown key '" + key + "'");
    }
  }

 private:
  static void skip_space(const std::string& s, std::size_t& pos) {
    while (pos < s.size() && (s[pos] == ' ' || s[pos] == '\t' || s[pos] == '\r')) ++pos;
  }

  static std::string trim(const std::string& s) {
    std::size_t a = 0;
    std::size_t b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
  }

  static bool valid_key(const std::string& k) {
    bool prev_dot = true;
    for (char ch : k) {
      if (ch == '.') {
        if (prev_dot) return false;
        prev_dot = true;
        continue;
      }
      if (!(std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '-')) return false;
      prev_dot = false;
    }
    return !prev_dot;
  }

  [[noreturn]] void fail(int line, const std::string& what) const {
    throw ConfigError(origin_ + ":" + std::to_string(line) + ": " + what);
  }

  [[noreturn]] void type_error(const std::string& key, const std::string& expected) const {
    fail(values_.at(key).line, "'" + key + "' must be " + expected);
  }

  ConfigValue parse_value(const std::string& s, std::size_t& pos, int line) const {
    skip_space(s, pos);
    if (pos >= s.size()) fail(line, "missing value");
    ConfigValue v;
    const char ch = s[pos];
    if (ch == '"') {
      v.kind = ConfigValue::Kind::string;
      ++pos;
      while (true) {
        if (pos >= s.size()) fail(line, "unterminated string");
        const char c = s[pos++];
        if (c == '"') break;
        if (c == '\\') {
          if (pos >= s.size()) fail(line, "dangling escape");
          const char e = s[pos++];
          if (e == '"' || e == '\\') {
            v.text += e;
          } else if (e == 'n') {
            v.text += '\n';
          } else if (e == 't') {
            v.text += '\t';
          } else {
            fail(line, std::string("unsupported escape \\") + e);
          }
          continue;
        }
        v.text += c;
      }
      return v;
    }
    if (ch == '[') {
      v.kind = ConfigValue::Kind::array;
      ++pos;
      while (true) {
        skip_space(s, pos);
        if (pos >= s.size()) fail(line, "unterminated array");
        if (s[pos] == ']') {
          ++pos;
          break;
        }
        ConfigValue item = parse_value(s, pos, line);
        if (item.kind == ConfigValue::Kind::array) fail(line, "nested arrays are not supported");
        v.items.push_back(item);
        skip_space(s, pos);
        if (pos < s.size() && s[pos] == ',') {
          ++pos;
        } else if (pos >= s.size() || s[pos] != ']') {
          fail(line, "expected ',' or ']' in array");
        }
      }
      return v;
    }
    std::size_t end = pos;
    while (end < s.size() && s[end] != ',' && s[end] != ']' && s[end] != '#' &&
           !std::isspace(static_cast<unsigned char>(s[end]))) {
      ++end;
    }
    std::string token = s.substr(pos, end - pos);
    pos = end;
    if (token == "true" || token == "false") {
      v.kind = ConfigValue::Kind::boolean;
      v.boolean = token == "true";
      return v;
    }
    std::string digits;
    for (char c : token) {
      if (c != '_') digits += c;
    }
    const bool is_float = digits.find_first_of(".eE") != std::string::npos || digits == "inf" || digits == "nan";
    if (digits.empty()) fail(line, "missing value");
    if (!is_float) {
      std::size_t start = 0;
      if (digits[0] == '+' || digits[0] == '-') {
        v.negative = digits[0] == '-';
        start = 1;
      }
      if (start >= digits.size() || digits.find_first_not_of("0123456789", start) != std::string::npos) {
        fail(line, "invalid value '" + token + "'");
      }
      errno = 0;
      char* stop = nullptr;
      v.integer = std::strtoull(digits.c_str() + start, &stop, 10);
      if (errno == ERANGE) fail(line, "integer out of range '" + token + "'");
      v.kind = ConfigValue::Kind::integer;
      return v;
    }
    char* stop = nullptr;
    v.number = std::strtod(digits.c_str(), &stop);
    if (stop != digits.c_str() + digits.size() || !std::isfinite(v.number)) {
      fail(line, "invalid number '" + token + "'");
    }
    v.kind = ConfigValue::Kind::number;
    return v;
  }

  std::string origin_;
  std::map<std::string, ConfigValue> values_;
};

enum class ModelKind { black_scholes, sine };
enum class GevreySource { calibrate, declared };
enum class OutputFormat { json, csv };

struct ExperimentConfig {
  // [model]
  ModelKind model = ModelKind::black_scholes;
  BlackScholesModel bs{};
  double sineAmplitude = 1.0;
  double sineFrequency = 1.0;
  // [greek]
  GreekParameter parameter = GreekParameter::P0;
  // [job]
  std::optional<double> x;  ///< defaults to the model parameter (or 0.3 for the sine model)
  int m = 1;
  std::optional<double> eps;
  std::optional<double> epsRelative;
  Method method = Method::naive_nonsmooth;
  std::string schedule = "threshold";  ///< threshold | minimal | explicit
  std::optional<int> n;
  std::optional<double> h;
  int maxHalfWidth = kDefaultMaxHalfWidth;
  double qubitExponent = 1.0;
  // [integrand]
  std::optional<Interval> xWindow;
  std::optional<double> bOverride;
  GevreySource gevrey = GevreySource::calibrate;
  std::string declares = "value";  ///< value | integrand
  GevreySpec declared{};
  double headroom = 2.0;
  int calibrationOrder = 8;
  // [distribution]
  std::string distKind = "normal";  ///< normal | uniform | file
  int levels = 14;
  double truncation = 6.0;
  std::string distFile;
  // [qae]
  QaeConfig qae{};
  std::uint64_t seed = 20240101;
  // [experiment]
  int trials = 1;
  std::string output = "-";
  OutputFormat format = OutputFormat::json;
  double passFraction = 0.95;

  /// Absolute accuracy: eps, or eps_relative scaled by |reference|.
  double resolve_eps(double reference) const {
    if (eps) return *eps;
    return *epsRelative * std::abs(reference);
  }

  double resolve_x() const {
    if (x) return *x;
    return model == ModelKind::sine ? 0.3 : bs.parameter(parameter);
  }

  void validate() const {
    if (trials < 1) throw ConfigError("experiment.trials must be >= 1");
    if (m < 1) throw ConfigError("job.m must be >= 1");
    if (eps.has_value() == epsRelative.has_value()) {
      throw ConfigError("exactly one of job.eps and job.eps_relative must be set");
    }
    if ((eps && !(*eps > 0)) || (epsRelative && !(*epsRelative > 0))) throw ConfigError("accuracy must be positive");
    if (schedule != "threshold" && schedule != "minimal" && schedule != "explicit") {
      throw ConfigError("job.schedule must be threshold, minimal or explicit");
    }
    if (schedule == "explicit" && (!n || !h)) throw ConfigError("an explicit schedule needs job.n and job.h");
    if (schedule != "explicit" && (n || h)) throw ConfigError("job.n and job.h are only used with schedule = \"explicit\"");
    if (!(qae.delta > 0 && qae.delta < 1)) throw ConfigError("qae.delta must lie in (0, 1)");
    if (qae.mlae.repeats < 1) throw ConfigError("qae.repeats must be >= 1");
    if (!(qae.mlae.depthScale > 0)) throw ConfigError("qae.depth_scale must be positive");
    if (distKind != "normal" && distKind != "uniform" && distKind != "file") {
      throw ConfigError("distribution.kind must be normal, uniform or file");
    }
    if (distKind == "file" && distFile.empty()) throw ConfigError("distribution.file is required for kind = \"file\"");
    if (declares != "value" && declares != "integrand") throw ConfigError("integrand.declares must be value or integrand");
    if (!(passFraction > 0 && passFraction <= 1)) throw ConfigError("experiment.pass_fraction must lie in (0, 1]");
    if (model == ModelKind::black_scholes) {
      try {
        bs.validate();
      } catch (const PreconditionError& e) {
        throw ConfigError(e.what());
      }
    }
  }
};

inline const std::set<std::string>& known_config_keys() {
  static const std::set<std::string> keys{
      "model.kind", "model.P0", "model.sigma", "model.r", "model.T", "model.K", "model.payoff", "model.amplitude",
      "model.frequency", "greek.parameter", "greek.order", "job.x", "job.m", "job.eps", "job.eps_relative",
      "job.method", "job.schedule", "job.n", "job.h", "job.max_half_width", "job.qubit_exponent",
      "integrand.x_window", "integrand.B_override", "integrand.gevrey", "integrand.declares", "integrand.A",
      "integrand.c", "integrand.sigma", "integrand.headroom", "integrand.calibration_order", "distribution.kind",
      "distribution.levels", "distribution.truncation", "distribution.file", "qae.variant", "qae.delta",
      "qae.shots_per_depth", "qae.depth_scale", "qae.repeats", "qae.seed", "experiment.trials", "experiment.output",
      "experiment.format", "experiment.pass_fraction"};
  return keys;
}

inline GreekParameter parse_greek_parameter(const std::string& s) {
  if (s == "P0") return GreekParameter::P0;
  if (s == "sigma") return GreekParameter::sigma;
  if (s == "r") return GreekParameter::r;
  throw ConfigError("greek.parameter must be P0, sigma or r");
}

/// Environment variable that overrides qae.seed.
inline constexpr const char* kSeedEnv = "QDIFF_SEED";

inline std::uint64_t parse_seed(const std::string& text, const std::string& where) {
  if (text.empty() || text.find_first_not_of("0123456789") != std::string::npos) {
    throw ConfigError(where + " must be a nonnegative integer, got '" + text + "'");
  }
  errno = 0;
  const auto v = std::strtoull(text.c_str(), nullptr, 10);
  if (errno == ERANGE) throw ConfigError(where + " is out of range");
  return v;
}

inline ExperimentConfig resolve_config(const ConfigDocument& doc, bool honour_env = true) {
  doc.require_known(known_config_keys());
  ExperimentConfig cfg;
  auto int_of = [&](const std::string& key, int& dst) {
    if (auto v = doc.integer(key)) {
      if (*v < INT32_MIN || *v > INT32_MAX) throw ConfigError("'" + key + "' is out of range");
      dst = static_cast<int>(*v);
    }
  };
  auto num_of = [&](const std::string& key, double& dst) {
    if (auto v = doc.number(key)) dst = *v;
  };

  if (auto kind = doc.string("model.kind")) {
    if (*kind == "black_scholes") {
      cfg.model = ModelKind::black_scholes;
    } else if (*kind == "sine") {
      cfg.model = ModelKind::sine;
    } else {
      throw ConfigError("model.kind must be black_scholes or sine");
    }
  }
  num_of("model.P0", cfg.bs.P0);
  num_of("model.sigma", cfg.bs.sigma);
  num_of("model.r", cfg.bs.r);
  num_of("model.T", cfg.bs.T);
  num_of("model.K", cfg.bs.K);
  if (auto p = doc.string("model.payoff")) {
    if (*p == "call") {
      cfg.bs.payoff = Payoff::call;
    } else if (*p == "digital") {
      cfg.bs.payoff = Payoff::digital;
    } else {
      throw ConfigError("model.payoff must be call or digital");
    }
  }
  num_of("model.amplitude", cfg.sineAmplitude);
  num_of("model.frequency", cfg.sineFrequency);

  if (auto p = doc.string("greek.parameter")) cfg.parameter = parse_greek_parameter(*p);
  int_of("job.m", cfg.m);
  if (doc.has("greek.order")) {
    int order = 0;
    int_of("greek.order", order);
    if (doc.has("job.m") && order != cfg.m) throw ConfigError("greek.order and job.m disagree");
    cfg.m = order;
  }
  if (auto v = doc.number("job.x")) cfg.x = *v;
  if (auto v = doc.number("job.eps")) cfg.eps = *v;
  if (auto v = doc.number("job.eps_relative")) cfg.epsRelative = *v;
  if (auto v = doc.string("job.method")) cfg.method = parse_method(*v);
  if (auto v = doc.string("job.schedule")) cfg.schedule = *v;
  if (doc.has("job.n")) {
    int n = 0;
    int_of("job.n", n);
    cfg.n = n;
  }
  if (auto v = doc.number("job.h")) cfg.h = *v;
  int_of("job.max_half_width", cfg.maxHalfWidth);
  num_of("job.qubit_exponent", cfg.qubitExponent);

  if (auto w = doc.numbers("integrand.x_window")) {
    if (w->size() != 2 || !((*w)[0] < (*w)[1])) throw ConfigError("integrand.x_window must be [lo, hi] with lo < hi");
    cfg.xWindow = Interval{(*w)[0], (*w)[1]};
  }
  if (auto v = doc.number("integrand.B_override")) {
    if (!(*v > 0)) throw ConfigError("integrand.B_override must be positive");
    cfg.bOverride = *v;
  }
  if (auto g = doc.string("integrand.gevrey")) {
    if (*g == "calibrate") {
      cfg.gevrey = GevreySource::calibrate;
    } else if (*g == "declared") {
      cfg.gevrey = GevreySource::declared;
    } else {
      throw ConfigError("integrand.gevrey must be calibrate or declared");
    }
  }
  if (auto v = doc.string("integrand.declares")) cfg.declares = *v;
  num_of("integrand.A", cfg.declared.A);
  num_of("integrand.c", cfg.declared.c);
  num_of("integrand.sigma", cfg.declared.sigma);
  num_of("integrand.headroom", cfg.headroom);
  int_of("integrand.calibration_order", cfg.calibrationOrder);
  if (cfg.gevrey == GevreySource::declared && !(doc.has("integrand.A") && doc.has("integrand.c"))) {
    throw ConfigError("a declared Gevrey spec needs integrand.A and integrand.c");
  }

  if (auto v = doc.string("distribution.kind")) cfg.distKind = *v;
  int_of("distribution.levels", cfg.levels);
  num_of("distribution.truncation", cfg.truncation);
  if (auto v = doc.string("distribution.file")) cfg.distFile = *v;

  if (auto v = doc.string("qae.variant")) {
    if (*v == "mlae") {
      cfg.qae.variant = QaeVariant::mlae;
    } else if (*v == "classical") {
      cfg.qae.variant = QaeVariant::classical;
    } else {
      throw ConfigError("qae.variant must be mlae or classical");
    }
  }
  num_of("qae.delta", cfg.qae.delta);
  int_of("qae.shots_per_depth", cfg.qae.mlae.shotsPerDepth);
  num_of("qae.depth_scale", cfg.qae.mlae.depthScale);
  int_of("qae.repeats", cfg.qae.mlae.repeats);
  if (auto v = doc.unsigned_integer("qae.seed")) cfg.seed = *v;

  int_of("experiment.trials", cfg.trials);
  if (auto v = doc.string("experiment.output")) cfg.output = *v;
  if (auto v = doc.string("experiment.format")) {
    if (*v == "json") {
      cfg.format = OutputFormat::json;
    } else if (*v == "csv") {
      cfg.format = OutputFormat::csv;
    } else {
      throw ConfigError("experiment.format must be json or csv");
    }
  }
  num_of("experiment.pass_fraction", cfg.passFraction);

  if (honour_env) {
    if (const char* env = std::getenv(kSeedEnv); env && *env) cfg.seed = parse_seed(env, kSeedEnv);
  }
  cfg.validate();
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path, bool honour_env = true) {
  return resolve_config(ConfigDocument::load(path), honour_env);
}

namespace detail {

inline std::string toml_number(double v) {
  // Shortest text that round-trips.
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  std::string s(buf, res.ptr);
  if (s.find_first_of(".eE") == std::string::npos) s += ".0";
  return s;
}

}  // namespace detail

/// Every key with its default value, as a config file.
inline std::string defaults_toml() {
  const ExperimentConfig d;
  using detail::toml_number;
  std::ostringstream out;
  out << "# Default values of every configuration key.\n"
      << "# Exactly one of job.eps and job.eps_relative must be set in a real config.\n\n"
      << "[model]\nkind = \"black_scholes\"  # black_scholes | sine\n"
      << "P0 = " << toml_number(d.bs.P0) << "\nsigma = " << toml_number(d.bs.sigma) << "\nr = " << toml_number(d.bs.r)
      << "\nT = " << toml_number(d.bs.T) << "\nK = " << toml_number(d.bs.K) << "\npayoff = \"call\"  # call | digital\n"
      << "amplitude = " << toml_number(d.sineAmplitude) << "  # sine model only\nfrequency = "
      << toml_number(d.sineFrequency) << "  # sine model only\n\n"
      << "[greek]\nparameter = \"P0\"  # P0 | sigma | r\norder = " << d.m << "\n\n"
      << "[job]\n# x = <model parameter value; 0.3 for the sine model>\n# eps = <absolute accuracy>\n"
      << "# eps_relative = <accuracy as a fraction of |reference|>\n"
      << "method = \"" << to_string(d.method) << "\"  # naive_smooth | naive_nonsmooth | sum_in_qae\n"
      << "schedule = \"" << d.schedule << "\"  # threshold | minimal | explicit (then set n and h)\n"
      << "max_half_width = " << d.maxHalfWidth << "\nqubit_exponent = " << toml_number(d.qubitExponent) << "\n\n"
      << "[integrand]\n# x_window = [lo, hi]  # required for call payoffs and for parameter r\n"
      << "# B_override = <bound on |F|>\n"
      << "gevrey = \"calibrate\"  # calibrate | declared\ndeclares = \"" << d.declares
      << "\"  # value (V only) | integrand (F(s, .) uniformly)\n"
      << "A = " << toml_number(d.declared.A) << "\nc = " << toml_number(d.declared.c) << "\nsigma = "
      << toml_number(d.declared.sigma) << "\nheadroom = " << toml_number(d.headroom)
      << "\ncalibration_order = " << d.calibrationOrder << "\n\n"
      << "[distribution]\nkind = \"" << d.distKind << "\"  # normal | uniform | file\nlevels = " << d.levels
      << "\ntruncation = " << toml_number(d.truncation) << "\n# file = \"points.csv\"  # rows of point,prob\n\n"
      << "[qae]\nvariant = \"mlae\"  # mlae | classical\ndelta = " << toml_number(d.qae.delta)
      << "\nshots_per_depth = 0  # 0: " << d.qae.mlae.baseShots << " at delta = 0.01, scaled by ln(1/delta)\n"
      << "depth_scale = " << toml_number(d.qae.mlae.depthScale) << "\nrepeats = " << d.qae.mlae.repeats
      << "  # median of this many runs\nseed = " << d.seed << "  # overridden by " << kSeedEnv << "\n\n"
      << "[experiment]\ntrials = " << d.trials << "\noutput = \"" << d.output << "\"  # '-' is stdout\n"
      << "format = \"json\"  # json | csv\npass_fraction = " << toml_number(d.passFraction) << "\n";
  return out.str();
}

}  // namespace qdiff
