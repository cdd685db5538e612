#pragma once

// Experiment runner: builds a job from a resolved config, runs seeded trials
// and renders deterministic JSON or CSV. Also hosts the eps sweep and the
// method-comparison table.

#include <cmath>
#include <cstdint>
#include <iomanip>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "qdiff/config.hpp"
#include "qdiff/distribution.hpp"
#include "qdiff/integrand.hpp"
#include "qdiff/pipeline.hpp"
#include "qdiff/qae.hpp"
#include "qdiff/schedule.hpp"

namespace qdiff {

using Json = nlohmann::ordered_json;

inline constexpr const char* kSchemaVersion = "1.0.0";

/// Exit codes shared by the runner and the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitAccuracy = 2;

struct BuiltJob {
  DiffJob job;
  double reference = 0;          ///< closed-form V^(m)(x)
  std::string referenceSource;
  std::string gevreySource;
  std::optional<GevreyCalibration> calibration;
  std::string scheduleMode;
};

inline std::shared_ptr<const DiscreteDistribution> build_distribution(const ExperimentConfig& cfg) {
  if (cfg.distKind == "normal") {
    return std::make_shared<const DiscreteDistribution>(discretize_standard_normal(cfg.levels, cfg.truncation));
  }
  if (cfg.distKind == "uniform") {
    return std::make_shared<const DiscreteDistribution>(discretize_uniform(cfg.levels, cfg.truncation));
  }
  return std::make_shared<const DiscreteDistribution>(load_distribution_csv(cfg.distFile));
}

/// Builds the job. eps_override replaces the configured accuracy (absolute
/// or relative, following the config) and method/mode overrides the job's.
inline BuiltJob build_job(const ExperimentConfig& cfg, std::optional<double> eps_override = std::nullopt,
                          std::optional<Method> method_override = std::nullopt,
                          std::optional<std::string> schedule_override = std::nullopt) {
  BuiltJob out;
  DiffJob& job = out.job;
  job.x = cfg.resolve_x();
  job.m = cfg.m;
  job.method = method_override.value_or(cfg.method);
  job.maxHalfWidth = cfg.maxHalfWidth;
  job.qubitExponent = cfg.qubitExponent;
  job.qae = cfg.qae;
  job.dist = build_distribution(cfg);

  if (cfg.model == ModelKind::sine) {
    job.integrand = make_sine_integrand(cfg.sineAmplitude, cfg.sineFrequency);
    out.reference = sine_value_derivative(*job.dist, cfg.sineAmplitude, cfg.sineFrequency, job.m, job.x);
    out.referenceSource = "exact derivative of the discretised sine model";
    out.gevreySource = "sine model (A, c, 0)";
  } else {
    const BlackScholesModel model = cfg.bs.with(cfg.parameter, job.x);
    job.integrand = make_greek_integrand(cfg.bs, cfg.parameter, job.dist->max_abs_point(), cfg.xWindow);
    out.reference = analytic_greek(model, cfg.parameter, job.m);
    out.referenceSource = "closed-form Black-Scholes";
    if (cfg.gevrey == GevreySource::calibrate) {
      if (cfg.parameter != GreekParameter::P0) {
        throw ConfigError("Gevrey calibration supports parameter P0 only; declare integrand.A and integrand.c");
      }
      if (job.method == Method::naive_smooth) {
        if (cfg.bs.payoff != Payoff::call) {
          throw ConfigError("payoff '" + to_string(cfg.bs.payoff) + "' is discontinuous in x; naive_smooth needs a smooth F");
        }
        out.calibration = calibrate_call_integrand_gevrey(cfg.bs, job.integrand, job.dist->max_abs_point(), cfg.headroom);
        job.integrand.gevreyF = out.calibration->spec;
        out.gevreySource = "calibrated integrand bound and slope";
      } else {
        if (!cfg.xWindow) throw ConfigError("Gevrey calibration needs integrand.x_window");
        out.calibration = calibrate_value_gevrey(cfg.bs, *cfg.xWindow, cfg.calibrationOrder, cfg.headroom);
        job.integrand.gevreyV = out.calibration->spec;
        out.gevreySource = "calibrated from closed-form spot derivatives";
      }
    }
  }
  if (cfg.gevrey == GevreySource::declared) {
    if (cfg.declares == "integrand") {
      job.integrand.gevreyV.reset();
      declare_smooth_integrand(job.integrand, cfg.declared);
    } else {
      cfg.declared.validate();
      job.integrand.gevreyV = cfg.declared;
    }
    out.gevreySource = "declared (" + cfg.declares + ")";
  }
  if (cfg.bOverride) job.integrand.bound = *cfg.bOverride;
  if (job.method == Method::naive_smooth && !job.integrand.smooth()) {
    throw ConfigError("method naive_smooth needs F(s, .) declared smooth (integrand.declares = \"integrand\")");
  }

  if (eps_override) {
    job.eps = cfg.epsRelative ? *eps_override * std::abs(out.reference) : *eps_override;
  } else {
    job.eps = cfg.resolve_eps(out.reference);
  }
  if (!(job.eps > 0)) throw ConfigError("resolved accuracy is not positive (reference value is zero?)");

  out.scheduleMode = schedule_override.value_or(cfg.schedule);
  if (out.scheduleMode == "explicit") {
    job.n = *cfg.n;
    job.h = *cfg.h;
  } else {
    apply_schedule(job, out.scheduleMode == "minimal" ? ScheduleMode::minimal : ScheduleMode::threshold);
  }
  return out;
}

inline Json config_to_json(const ExperimentConfig& cfg) {
  Json j;
  j["model"] = {{"kind", cfg.model == ModelKind::sine ? "sine" : "black_scholes"}};
  if (cfg.model == ModelKind::sine) {
    j["model"]["amplitude"] = cfg.sineAmplitude;
    j["model"]["frequency"] = cfg.sineFrequency;
  } else {
    j["model"]["P0"] = cfg.bs.P0;
    j["model"]["sigma"] = cfg.bs.sigma;
    j["model"]["r"] = cfg.bs.r;
    j["model"]["T"] = cfg.bs.T;
    j["model"]["K"] = cfg.bs.K;
    j["model"]["payoff"] = to_string(cfg.bs.payoff);
    j["greek"] = {{"parameter", to_string(cfg.parameter)}, {"order", cfg.m}};
  }
  Json job;
  job["x"] = cfg.resolve_x();
  job["m"] = cfg.m;
  if (cfg.eps) job["eps"] = *cfg.eps;
  if (cfg.epsRelative) job["eps_relative"] = *cfg.epsRelative;
  job["method"] = to_string(cfg.method);
  job["schedule"] = cfg.schedule;
  if (cfg.n) job["n"] = *cfg.n;
  if (cfg.h) job["h"] = *cfg.h;
  job["max_half_width"] = cfg.maxHalfWidth;
  job["qubit_exponent"] = cfg.qubitExponent;
  j["job"] = job;
  Json integrand;
  if (cfg.xWindow) integrand["x_window"] = {cfg.xWindow->lo, cfg.xWindow->hi};
  if (cfg.bOverride) integrand["B_override"] = *cfg.bOverride;
  integrand["gevrey"] = cfg.gevrey == GevreySource::calibrate ? "calibrate" : "declared";
  if (cfg.gevrey == GevreySource::declared) {
    integrand["declares"] = cfg.declares;
    integrand["A"] = cfg.declared.A;
    integrand["c"] = cfg.declared.c;
    integrand["sigma"] = cfg.declared.sigma;
  } else {
    integrand["headroom"] = cfg.headroom;
    integrand["calibration_order"] = cfg.calibrationOrder;
  }
  j["integrand"] = integrand;
  Json dist{{"kind", cfg.distKind}};
  if (cfg.distKind == "file") {
    dist["file"] = cfg.distFile;
  } else {
    dist["levels"] = cfg.levels;
    dist["truncation"] = cfg.truncation;
  }
  j["distribution"] = dist;
  j["qae"] = {{"variant", to_string(cfg.qae.variant)},
              {"delta", cfg.qae.delta},
              {"shots_per_depth", mlae_shots_for_delta(cfg.qae.mlae, cfg.qae.delta)},
              {"depth_scale", cfg.qae.mlae.depthScale},
              {"repeats", cfg.qae.mlae.repeats},
              {"seed", cfg.seed}};
  j["experiment"] = {{"trials", cfg.trials},
                     {"format", cfg.format == OutputFormat::json ? "json" : "csv"},
                     {"pass_fraction", cfg.passFraction}};
  return j;
}

inline Json oracle_calls_json(const OracleCalls& c) {
  return {{"O_F", c.F}, {"O_S", c.S}, {"O_coef", c.coef}, {"O_sign", c.sign}};
}

inline Json budget_json(const ErrorBudget& b) {
  return {{"truncationBound", b.truncationBound},   {"quantizationBound", b.quantizationBound},
          {"quantizationRealized", b.quantizationRealized}, {"qaeTarget", b.qaeTarget},
          {"qaeRealized", b.qaeRealized}};
}

struct TrialRecord {
  int index = 0;
  std::uint64_t seed = 0;
  DiffEstimate estimate;
  double absError = 0;
  bool pass = false;
};

struct ExperimentRun {
  BuiltJob built;
  EncodedJob encoded;
  SmoothnessAudit audit;
  std::vector<TrialRecord> trials;
  int passes = 0;
  int required = 0;
  bool budgetWithinEps = true;
  bool contractMet = false;
};

/// Runs every trial of a built job; trial i uses seed trial_seed(seed, i).
inline ExperimentRun run_trials(BuiltJob built, int trials, std::uint64_t seed, double pass_fraction) {
  ExperimentRun run;
  run.built = std::move(built);
  const DiffJob& job = run.built.job;
  run.encoded = encode(job);
  if (job.method == Method::naive_smooth) run.audit = audit_smoothness(job);
  const double tol = job.eps * (1.0 + kScheduleRelTol);
  for (int i = 0; i < trials; ++i) {
    TrialRecord rec;
    rec.index = i;
    rec.seed = trial_seed(seed, static_cast<std::uint64_t>(i));
    Rng rng(rec.seed);
    rec.estimate = estimate(run.encoded, job, rng);
    rec.absError = std::abs(rec.estimate.yTilde - run.built.reference);
    rec.pass = rec.absError <= 3.0 * job.eps;
    const auto& b = rec.estimate.errorBudget;
    if (b.truncationBound > tol || b.quantizationBound > tol || b.quantizationRealized > tol || b.qaeTarget > tol) {
      run.budgetWithinEps = false;
    }
    run.passes += rec.pass ? 1 : 0;
    run.trials.push_back(std::move(rec));
  }
  run.required = static_cast<int>(std::ceil(pass_fraction * trials - 1e-9));
  run.contractMet = run.passes >= run.required && run.budgetWithinEps;
  return run;
}

inline Json run_to_json(const ExperimentConfig& cfg, const ExperimentRun& run) {
  const DiffJob& job = run.built.job;
  const auto& first = run.trials.front().estimate;
  const GevreySpec& g = job.gevrey();
  Json out;
  out["schemaVersion"] = kSchemaVersion;
  out["config"] = config_to_json(cfg);
  out["reference"] = {{"value", run.built.reference}, {"source", run.built.referenceSource}};
  out["job"] = {{"x", job.x},
                {"m", job.m},
                {"eps", job.eps},
                {"method", to_string(job.method)},
                {"schedule", run.built.scheduleMode},
                {"n", job.n},
                {"h", job.h},
                {"B", job.integrand.bound},
                {"epsTilde", run.encoded.epsTilde},
                {"absSum", static_cast<double>(run.encoded.absSum)},
                {"nonzeroOffsets", run.encoded.nonzeroOffsets}};
  Json gev{{"A", g.A}, {"c", g.c}, {"sigma", g.sigma}, {"source", run.built.gevreySource}};
  if (run.built.calibration) {
    gev["headroom"] = run.built.calibration->headroom;
    gev["derivativeBounds"] = run.built.calibration->derivativeBounds;
  }
  out["gevrey"] = gev;
  out["yTilde"] = first.yTilde;
  out["pTilde"] = first.pTilde;
  out["pTrue"] = run.encoded.pTrue;
  out["y"] = run.encoded.y;
  out["normalizer"] = static_cast<double>(run.encoded.normalizer);
  out["ampEps"] = first.ampEps;
  out["oracleCalls"] = oracle_calls_json(first.oracleCalls);
  out["qubitReport"] = run.encoded.qubitReport;
  Json budget = budget_json(first.errorBudget);
  double worst_qae = 0;
  for (const auto& t : run.trials) worst_qae = std::max(worst_qae, t.estimate.errorBudget.qaeRealized);
  budget["qaeRealizedMax"] = worst_qae;
  out["errorBudget"] = budget;
  if (job.method == Method::naive_smooth) {
    out["smoothnessAudit"] = {{"samples", run.audit.samples},
                              {"violations", run.audit.violations},
                              {"worstRatio", run.audit.worstRatio}};
  }
  Json trials = Json::array();
  for (const auto& t : run.trials) {
    trials.push_back({{"index", t.index},
                      {"seed", t.seed},
                      {"yTilde", t.estimate.yTilde},
                      {"pTilde", t.estimate.pTilde},
                      {"absError", t.absError},
                      {"pass", t.pass},
                      {"groverCalls", t.estimate.qae.groverCalls},
                      {"oracleCalls", oracle_calls_json(t.estimate.oracleCalls)}});
  }
  out["trials"] = trials;
  out["pass3eps"] = {{"passes", run.passes},
                     {"trials", static_cast<int>(run.trials.size())},
                     {"required", run.required},
                     {"budgetWithinEps", run.budgetWithinEps},
                     {"met", run.contractMet}};
  return out;
}

namespace detail {

inline std::string fmt(double v) {
  std::ostringstream out;
  out << std::setprecision(17) << v;
  return out.str();
}

}  // namespace detail

inline std::string run_to_csv(const ExperimentRun& run) {
  using detail::fmt;
  const DiffJob& job = run.built.job;
  std::ostringstream out;
  out << "trial,seed,method,m,n,h,eps,reference,yTilde,pTilde,pTrue,absError,pass,O_F,O_S,O_coef,O_sign,qubitReport\n";
  for (const auto& t : run.trials) {
    const auto& e = t.estimate;
    out << t.index << ',' << t.seed << ',' << to_string(job.method) << ',' << job.m << ',' << job.n << ',' << fmt(job.h)
        << ',' << fmt(job.eps) << ',' << fmt(run.built.reference) << ',' << fmt(e.yTilde) << ',' << fmt(e.pTilde) << ','
        << fmt(e.pTrue) << ',' << fmt(t.absError) << ',' << (t.pass ? 1 : 0) << ',' << e.oracleCalls.F << ','
        << e.oracleCalls.S << ',' << e.oracleCalls.coef << ',' << e.oracleCalls.sign << ',' << e.qubitReport << '\n';
  }
  return out.str();
}

struct ExperimentOutput {
  int exitCode = kExitOk;
  std::string body;   ///< report text (empty on a config error)
  std::string error;  ///< diagnostic for exit code 1
};

/// Runs a config end to end. Exit code 0 when the 3 eps contract holds,
/// 2 when it does not, 1 when the config or job is invalid.
inline ExperimentOutput run_experiment(const ExperimentConfig& cfg) {
  ExperimentOutput out;
  try {
    ExperimentRun run = run_trials(build_job(cfg), cfg.trials, cfg.seed, cfg.passFraction);
    out.body = cfg.format == OutputFormat::json ? run_to_json(cfg, run).dump(2) + "\n" : run_to_csv(run);
    out.exitCode = run.contractMet ? kExitOk : kExitAccuracy;
  } catch (const ConfigError& e) {
    out.exitCode = kExitConfig;
    out.error = e.what();
  } catch (const PreconditionError& e) {
    out.exitCode = kExitConfig;
    out.error = e.what();
  } catch (const OutOfRangeError& e) {
    out.exitCode = kExitConfig;
    out.error = e.what();
  }
  return out;
}

/// One CSV row per (method, eps, trial).
inline std::string sweep_csv(const ExperimentConfig& cfg, const std::vector<double>& eps_list,
                             const std::vector<Method>& methods) {
  using detail::fmt;
  if (eps_list.empty()) throw ConfigError("sweep needs at least one eps value");
  std::ostringstream out;
  out << "method,schedule,eps,trial,seed,n,h,reference,yTilde,absError,pass,O_F,O_S,O_coef,O_sign,groverCalls,"
         "qubitReport,pTrue\n";
  std::uint64_t stream = 0;
  for (Method method : methods) {
    for (double eps : eps_list) {
      const ExperimentRun run =
          run_trials(build_job(cfg, eps, method), cfg.trials, splitmix64(cfg.seed + ++stream), cfg.passFraction);
      const DiffJob& job = run.built.job;
      for (const auto& t : run.trials) {
        const auto& e = t.estimate;
        out << to_string(method) << ',' << run.built.scheduleMode << ',' << fmt(job.eps) << ',' << t.index << ','
            << t.seed << ',' << job.n << ',' << fmt(job.h) << ',' << fmt(run.built.reference) << ','
            << fmt(e.yTilde) << ',' << fmt(t.absError) << ',' << (t.pass ? 1 : 0) << ',' << e.oracleCalls.F << ','
            << e.oracleCalls.S << ',' << e.oracleCalls.coef << ',' << e.oracleCalls.sign << ','
            << e.qae.groverCalls << ',' << e.qubitReport << ',' << fmt(e.pTrue) << '\n';
      }
    }
  }
  return out.str();
}

/// Least-squares slope of log(y) against log(x).
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw PreconditionError("slope fit needs >= 2 paired points");
  double mx = 0;
  double my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(x.size());
  double sxy = 0;
  double sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  if (sxx == 0) throw PreconditionError("slope fit needs distinct x values");
  return sxy / sxx;
}

struct Table1Cell {
  std::string setting;  ///< "any" for nonsmooth F, else "large" or "small"
  Method method = Method::sum_in_qae;
  ScheduleMode mode = ScheduleMode::threshold;
  std::vector<double> eps;
  std::vector<int> n;
  std::vector<double> h;
  std::vector<int> nonzero;
  std::vector<OracleCalls> calls;
  std::vector<std::int64_t> qubits;
  std::vector<double> pTrue;
  std::vector<double> absError;
  double slope = 0;  ///< fitted exponent of O_F against 1/eps
};

struct Table1Setting {
  std::string setting;
  std::vector<MethodChoice> recommended;
  Method measuredWinner = Method::sum_in_qae;  ///< smaller O_F at the smallest eps
  bool agrees = false;
};

struct Table1Report {
  bool smooth = false;
  double reference = 0;
  std::vector<Table1Cell> cells;
  std::vector<Table1Setting> settings;
};

/// Runs every applicable (method, setting) cell of the comparison on the model.
inline Table1Report table1_report(const ExperimentConfig& cfg, const std::vector<double>& eps_list) {
  if (eps_list.size() < 4) throw ConfigError("the comparison needs at least 4 eps values");
  Table1Report rep;
  const BuiltJob probe = build_job(cfg, eps_list.front());
  rep.smooth = probe.job.integrand.smooth() && !probe.job.integrand.discontinuousInX;
  rep.reference = probe.reference;

  struct Plan {
    std::string setting;
    Method method;
    ScheduleMode mode;
  };
  std::vector<Plan> plans;
  if (rep.smooth) {
    plans = {{"large", Method::naive_smooth, ScheduleMode::minimal},
             {"large", Method::sum_in_qae, ScheduleMode::threshold},
             {"small", Method::naive_smooth, ScheduleMode::threshold},
             {"small", Method::sum_in_qae, ScheduleMode::threshold}};
  } else {
    plans = {{"any", Method::naive_nonsmooth, ScheduleMode::threshold},
             {"any", Method::sum_in_qae, ScheduleMode::threshold}};
  }
  std::uint64_t stream = 0;
  for (const auto& plan : plans) {
    Table1Cell cell;
    cell.setting = plan.setting;
    cell.method = plan.method;
    cell.mode = plan.mode;
    std::vector<double> inv_eps;
    std::vector<double> of;
    for (double e : eps_list) {
      const ExperimentRun run = run_trials(build_job(cfg, e, plan.method, to_string(plan.mode)), 1,
                                           splitmix64(cfg.seed + ++stream), cfg.passFraction);
      const auto& est = run.trials.front().estimate;
      cell.eps.push_back(run.built.job.eps);
      cell.n.push_back(run.built.job.n);
      cell.h.push_back(run.built.job.h);
      cell.nonzero.push_back(est.nonzeroOffsets);
      cell.calls.push_back(est.oracleCalls);
      cell.qubits.push_back(est.qubitReport);
      cell.pTrue.push_back(est.pTrue);
      cell.absError.push_back(run.trials.front().absError);
      inv_eps.push_back(1.0 / run.built.job.eps);
      of.push_back(static_cast<double>(est.oracleCalls.F));
    }
    cell.slope = loglog_slope(inv_eps, of);
    rep.cells.push_back(std::move(cell));
  }

  const double sigma = probe.job.integrand.value_gevrey().sigma;
  for (const std::string& setting : rep.smooth ? std::vector<std::string>{"large", "small"}
                                               : std::vector<std::string>{"any"}) {
    Table1Setting s;
    s.setting = setting;
    s.recommended = select_method(rep.smooth, setting == "small" ? QubitBudget::small : QubitBudget::large, cfg.m,
                                  sigma)
                        .ranked;
    const Table1Cell* best = nullptr;
    for (const auto& c : rep.cells) {
      if (c.setting != setting) continue;
      if (!best || c.calls.back().F < best->calls.back().F) best = &c;
    }
    s.measuredWinner = best->method;
    // A second ranked entry is also underlined, so either counts.
    for (const auto& r : s.recommended) s.agrees = s.agrees || r.method == s.measuredWinner;
    rep.settings.push_back(s);
  }
  return rep;
}

inline std::string table1_csv(const Table1Report& rep) {
  using detail::fmt;
  std::ostringstream out;
  out << "kind,smoothness,setting,method,schedule,eps,n,h,nonzeroOffsets,O_F,O_S,O_coef,O_sign,qubitReport,pTrue,"
         "absError,slope,recommended,agrees\n";
  const std::string smooth = rep.smooth ? "smooth" : "nonsmooth";
  for (const auto& c : rep.cells) {
    for (std::size_t i = 0; i < c.eps.size(); ++i) {
      out << "cell," << smooth << ',' << c.setting << ',' << to_string(c.method) << ',' << to_string(c.mode) << ','
          << fmt(c.eps[i]) << ',' << c.n[i] << ',' << fmt(c.h[i]) << ',' << c.nonzero[i] << ',' << c.calls[i].F
          << ',' << c.calls[i].S << ',' << c.calls[i].coef << ',' << c.calls[i].sign << ',' << c.qubits[i] << ','
          << fmt(c.pTrue[i]) << ',' << fmt(c.absError[i]) << ",,,\n";
    }
    out << "fit," << smooth << ',' << c.setting << ',' << to_string(c.method) << ',' << to_string(c.mode)
        << ",,,,,,,,,,,," << fmt(c.slope) << ",,\n";
  }
  for (const auto& s : rep.settings) {
    std::string rec;
    for (const auto& r : s.recommended) {
      if (!rec.empty()) rec += '|';
      rec += to_string(r.method) + "@" + to_string(r.mode);
    }
    out << "recommend," << smooth << ',' << s.setting << ',' << to_string(s.measuredWinner) << ",,,,,,,,,,,,,,"
        << rec << ',' << (s.agrees ? 1 : 0) << '\n';
  }
  return out.str();
}

}  // namespace qdiff
