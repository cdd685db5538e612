// qdiff: command-line front end for stencils, schedules, estimation runs,
// sweeps, bound audits and the method-comparison table.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "qdiff/audit.hpp"
#include "qdiff/config.hpp"
#include "qdiff/experiment.hpp"
#include "qdiff/schedule.hpp"
#include "qdiff/stencil.hpp"

namespace {

using qdiff::Json;

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (item.empty()) continue;
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size() || !(v > 0)) throw qdiff::ConfigError("bad eps value '" + item + "'");
    out.push_back(v);
  }
  if (out.empty()) throw qdiff::ConfigError("eps list is empty");
  return out;
}

void emit(const std::string& body, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << body;
    std::cout.flush();
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw qdiff::ConfigError("cannot write '" + path + "'");
  out << body;
}

std::string stencil_report(int m, int n, const std::string& format) {
  const qdiff::Stencil st = qdiff::compute_stencil({m, n});
  if (format == "csv") {
    std::ostringstream out;
    out << "j,coefficient,value,sign\n";
    for (int j = -n; j <= n; ++j) {
      out << j << ',' << st.coeff(j).str() << ',' << std::setprecision(17)
          << static_cast<double>(st.coeff_approx(j)) << ',' << st.sign_bit(j) << '\n';
    }
    return out.str();
  }
  Json j{{"m", m}, {"n", n}};
  Json coeffs = Json::array();
  for (int k = -n; k <= n; ++k) {
    coeffs.push_back({{"j", k},
                      {"exact", st.coeff(k).str()},
                      {"value", static_cast<double>(st.coeff_approx(k))},
                      {"sign", st.sign_bit(k)}});
  }
  j["coefficients"] = coeffs;
  j["absSum"] = st.abs_sum().str();
  j["absSumValue"] = static_cast<double>(st.abs_sum_approx());
  j["absSumBound"] = qdiff::abs_sum_bound({m, n});
  j["nonzeroOffsets"] = st.nonzero_offsets();
  return j.dump(2) + "\n";
}

std::string schedule_report(const qdiff::GevreySpec& g, int m, double eps, qdiff::ScheduleMode mode,
                            std::optional<double> bound, double qubit_exponent) {
  const qdiff::Schedule s = qdiff::make_schedule(g, m, eps);
  Json j{{"A", g.A}, {"c", g.c}, {"sigma", g.sigma}, {"m", m}, {"eps", eps}, {"epsPrime", s.epsPrime},
         {"sigmaPlus", s.sigmaPlus}};
  if (s.nTh) {
    j["nTh"] = *s.nTh;
    j["hTh"] = *s.hTh;
  } else {
    j["nTh"] = nullptr;
    j["hTh"] = nullptr;
    j["thresholdDiagnostic"] = s.thresholdDiagnostic;
  }
  j["nMin"] = qdiff::half_width_min(m);
  j["hMin"] = s.hMin;
  const auto [n, h] = s.choose(mode);
  const qdiff::Stencil st = qdiff::compute_stencil({m, n});
  j["mode"] = qdiff::to_string(mode);
  j["n"] = n;
  j["h"] = h;
  j["truncationBound"] = qdiff::truncation_bound(g, m, n, h);
  j["hConditionHolds"] = qdiff::check_h_condition(g, m, n, h, eps);
  j["epsTilde"] = qdiff::eps_tilde(st, h, eps);
  if (bound) j["qubitReport"] = qdiff::qubit_estimate(qdiff::eps_tilde(st, h, eps), *bound + 1.0, qubit_exponent);
  return j.dump(2) + "\n";
}

std::string audit_report(const std::vector<qdiff::AuditReport>& reps, bool& all_pass) {
  Json arr = Json::array();
  all_pass = true;
  for (const auto& r : reps) {
    all_pass = all_pass && r.pass();
    Json v = Json::array();
    for (std::size_t i = 0; i < r.violations.size() && i < 20; ++i) v.push_back(r.violations[i]);
    arr.push_back({{"lemma", r.lemma},
                   {"grid", r.grid},
                   {"checks", r.checks},
                   {"violationCount", r.violations.size()},
                   {"violations", v},
                   {"worstMargin", r.worstMargin},
                   {"pass", r.pass()}});
  }
  return Json{{"audits", arr}, {"pass", all_pass}}.dump(2) + "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Numerical differentiation of expectations with simulated amplitude estimation"};
  app.require_subcommand(1);

  int st_m = 1;
  int st_n = 1;
  std::string st_format = "json";
  auto* stencil = app.add_subcommand("stencil", "Exact central-difference coefficients");
  stencil->add_option("--m", st_m, "derivative order")->required();
  stencil->add_option("--n", st_n, "half width")->required();
  stencil->add_option("--format", st_format)->check(CLI::IsMember({"json", "csv"}));

  qdiff::GevreySpec sc_g{1.0, 1.0, 0.0};
  int sc_m = 1;
  double sc_eps = 1e-3;
  std::string sc_mode = "threshold";
  std::optional<double> sc_bound;
  double sc_a = 1.0;
  auto* schedule = app.add_subcommand("schedule", "Step schedule for a Gevrey class");
  schedule->add_option("--A", sc_g.A)->required();
  schedule->add_option("--c", sc_g.c)->required();
  schedule->add_option("--sigma", sc_g.sigma);
  schedule->add_option("--m", sc_m)->required();
  schedule->add_option("--eps", sc_eps)->required();
  schedule->add_option("--mode", sc_mode)->check(CLI::IsMember({"threshold", "minimal"}));
  schedule->add_option("--B", sc_bound, "bound on |F|, enables the qubit figure");
  schedule->add_option("--a", sc_a, "qubit exponent");

  std::string config_path;
  std::optional<int> trials;
  std::optional<std::string> seed_text;
  std::optional<std::string> output;
  std::optional<std::string> format;
  auto* est = app.add_subcommand("estimate", "Run a configured experiment");
  est->add_option("--config", config_path)->required()->check(CLI::ExistingFile);
  est->add_option("--trials", trials);
  est->add_option("--seed", seed_text);
  est->add_option("--output", output, "'-' for stdout");
  est->add_option("--format", format)->check(CLI::IsMember({"json", "csv"}));

  std::string eps_list;
  std::string method_list;
  auto* sweep = app.add_subcommand("sweep", "CSV rows per (method, eps, trial)");
  sweep->add_option("--config", config_path)->required()->check(CLI::ExistingFile);
  sweep->add_option("--eps-list", eps_list, "comma separated; relative if the config uses eps_relative")->required();
  sweep->add_option("--methods", method_list, "comma separated; defaults to the config's method");
  sweep->add_option("--trials", trials);
  sweep->add_option("--seed", seed_text);
  sweep->add_option("--output", output);

  std::string audit_sel = "all";
  auto* audit = app.add_subcommand("audit", "Numeric audits of the error bounds");
  audit->add_option("--lemma", audit_sel)
      ->check(CLI::IsMember({"lemma1", "lemma2", "lemma3", "lemma5", "lemma6", "all"}));
  audit->add_option("--output", output);

  auto* table1 = app.add_subcommand("table1", "Method comparison on a model");
  table1->add_option("--config", config_path)->required()->check(CLI::ExistingFile);
  table1->add_option("--eps-list", eps_list)->required();
  table1->add_option("--seed", seed_text);
  table1->add_option("--output", output);

  auto* defaults = app.add_subcommand("defaults", "Print every config key with its default");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? qdiff::kExitOk : qdiff::kExitConfig;
  }

  auto load = [&]() {
    qdiff::ExperimentConfig cfg = qdiff::load_config(config_path);
    if (trials) cfg.trials = *trials;
    if (seed_text) cfg.seed = qdiff::parse_seed(*seed_text, "--seed");
    if (format) cfg.format = *format == "csv" ? qdiff::OutputFormat::csv : qdiff::OutputFormat::json;
    if (output) cfg.output = *output;
    cfg.validate();
    return cfg;
  };

  try {
    if (*stencil) {
      emit(stencil_report(st_m, st_n, st_format), "-");
    } else if (*schedule) {
      emit(schedule_report(sc_g, sc_m, sc_eps,
                           sc_mode == "minimal" ? qdiff::ScheduleMode::minimal : qdiff::ScheduleMode::threshold,
                           sc_bound, sc_a),
           "-");
    } else if (*est) {
      const qdiff::ExperimentConfig cfg = load();
      const qdiff::ExperimentOutput res = qdiff::run_experiment(cfg);
      if (res.exitCode == qdiff::kExitConfig) {
        std::cerr << "error: " << res.error << "\n";
        return res.exitCode;
      }
      emit(res.body, cfg.output);
      if (res.exitCode == qdiff::kExitAccuracy) std::cerr << "accuracy contract not met\n";
      return res.exitCode;
    } else if (*sweep) {
      const qdiff::ExperimentConfig cfg = load();
      std::vector<qdiff::Method> methods;
      std::stringstream in(method_list);
      std::string item;
      while (std::getline(in, item, ',')) {
        if (!item.empty()) methods.push_back(qdiff::parse_method(item));
      }
      if (methods.empty()) methods.push_back(cfg.method);
      emit(qdiff::sweep_csv(cfg, parse_list(eps_list), methods), cfg.output);
    } else if (*audit) {
      bool pass = false;
      const std::string body = audit_report(qdiff::audit_bounds(qdiff::parse_audit_selector(audit_sel)), pass);
      emit(body, output.value_or("-"));
      return pass ? qdiff::kExitOk : qdiff::kExitAccuracy;
    } else if (*table1) {
      const qdiff::ExperimentConfig cfg = load();
      emit(qdiff::table1_csv(qdiff::table1_report(cfg, parse_list(eps_list))), cfg.output);
    } else if (*defaults) {
      emit(qdiff::defaults_toml(), "-");
    }
  } catch (const qdiff::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return qdiff::kExitConfig;
  }
  return qdiff::kExitOk;
}
