// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "qdiff/audit.hpp"
#include "qdiff/experiment.hpp"

using namespace qdiff;

namespace {

const std::string kConfigs = std::string(QDIFF_SOURCE_DIR) + "/configs/";

struct Outcome {
  bool pass = true;
  std::string detail;
};

void fail(Outcome& o, const std::string& why) {
  o.pass = false;
  if (!o.detail.empty()) o.detail += "; ";
  o.detail += why;
}

std::string fmt(double v, int prec = 4) {
  std::ostringstream out;
  out.precision(prec);
  out << v;
  return out.str();
}

// 1. Exact stencil agreement with an independent solve.
Outcome stencil_correctness() {
  Outcome o;
  int keys = 0;
  for (int n = 1; n <= 6; ++n) {
    for (int m = 1; m <= 2 * n; ++m) {
      ++keys;
      const Stencil st = compute_stencil({m, n});
      if (!(st == vandermonde_stencil({m, n}))) fail(o, "mismatch at m=" + std::to_string(m) + " n=" + std::to_string(n));
      if (m % 2 == 1 && st.coeff(0) != 0) fail(o, "nonzero centre at m=" + std::to_string(m));
    }
  }
  const Stencil d = compute_stencil({1, 1});
  if (d.coeff(1) != Rational(1, 2) || d.coeff(-1) != Rational(-1, 2)) fail(o, "d(1,1,+-1) != +-1/2");
  if (o.pass) o.detail = std::to_string(keys) + " keys equal exactly";
  return o;
}

// 2. Log-log error slope on exp equals 2n - m + 1 within 0.25.
Outcome convergence_order() {
  Outcome o;
  std::string detail;
  for (auto [m, n] : std::vector<std::pair<int, int>>{{1, 1}, {1, 2}, {2, 2}, {3, 2}}) {
    const Stencil st = compute_stencil({m, n});
    std::vector<double> hs;
    std::vector<double> errs;
    for (long double h = 0.2L; h >= 0.0249L; h /= 2) {
      const long double approx = apply_stencil<long double>(st, [](long double y) { return std::exp(y); }, 0.5L, h);
      hs.push_back(static_cast<double>(h));
      errs.push_back(static_cast<double>(std::abs(approx - std::exp(0.5L))));
    }
    const double slope = loglog_slope(hs, errs);
    const int expected = 2 * n - m + 1;
    detail += "(" + std::to_string(m) + "," + std::to_string(n) + "):" + fmt(slope) + " ";
    if (std::abs(slope - expected) > 0.25) {
      o.pass = false;
      detail += "[expected " + std::to_string(expected) + "] ";
    }
  }
  o.detail = detail;
  return o;
}

// 3. Bound audits, zero violations.
Outcome bound_audits() {
  Outcome o;
  std::string detail;
  for (const auto& r : audit_bounds(AuditSelector::all)) {
    detail += r.lemma + ":" + std::to_string(r.checks) + " ";
    if (!r.pass()) fail(o, r.lemma + " " + std::to_string(r.violations.size()) + " violations, first " + r.violations[0]);
  }
  if (o.pass) o.detail = detail + "checks, 0 violations";
  return o;
}

// 4. QAE contract: failure rate <= 0.03 at delta = 0.01 with 200 trials per
// cell, and call-count exponents 1.0 +- 0.15 (MLAE), 2.0 +- 0.15 (classical).
Outcome qae_contract() {
  Outcome o;
  const double delta = 0.01;
  double worst = 0;
  int cells = 0;
  std::uint64_t root = 4040;
  for (double p : {0.02, 0.25, 0.5, 0.75, 0.98}) {
    for (double eps : {1e-2, 1e-3, 1e-4}) {
      ++cells;
      int failures = 0;
      const std::uint64_t cell_seed = splitmix64(root++);
      for (int t = 0; t < 200; ++t) {
        Rng rng(trial_seed(cell_seed, static_cast<std::uint64_t>(t)));
        const auto r = mlae_estimate(AmplitudeProblem(p), eps, delta, rng);
        failures += std::abs(r.estimate - p) > eps;
      }
      worst = std::max(worst, failures / 200.0);
      if (failures / 200.0 > 0.03) fail(o, "p=" + fmt(p) + " eps=" + fmt(eps) + " failure rate " + fmt(failures / 200.0));
    }
  }
  std::vector<double> inv;
  std::vector<double> mlae_calls;
  std::vector<double> mc_calls;
  for (int k = 4; k <= 14; ++k) {
    const double eps = std::ldexp(1.0, -k);
    Rng rng(static_cast<std::uint64_t>(k));
    inv.push_back(1.0 / eps);
    mlae_calls.push_back(static_cast<double>(mlae_estimate(AmplitudeProblem(0.3), eps, delta, rng).groverCalls));
    mc_calls.push_back(static_cast<double>(hoeffding_samples(eps, delta)));
  }
  // The classical baseline also runs to check its count is what it charges.
  Rng rng(1);
  QaeConfig mc;
  mc.variant = QaeVariant::classical;
  if (estimate_amplitude(AmplitudeProblem(0.3), 1.0 / 64, mc, rng).groverCalls != hoeffding_samples(1.0 / 64, delta)) {
    fail(o, "classical call count mismatch");
  }
  const double s_mlae = loglog_slope(inv, mlae_calls);
  const double s_mc = loglog_slope(inv, mc_calls);
  if (std::abs(s_mlae - 1.0) > 0.15) fail(o, "MLAE exponent " + fmt(s_mlae));
  if (std::abs(s_mc - 2.0) > 0.15) fail(o, "classical exponent " + fmt(s_mc));
  if (o.pass) {
    o.detail = std::to_string(cells) + " cells, worst failure rate " + fmt(worst) + ", exponents " + fmt(s_mlae) +
               " / " + fmt(s_mc);
  }
  return o;
}

const std::vector<std::string> kGreekConfigs{"call_delta", "digital_delta_naive", "digital_delta_sum",
                                             "digital_gamma_naive", "digital_gamma_sum"};

std::vector<std::string> greek_bodies;

// 5. End-to-end Greeks: >= 95 of 100 trials within 3 eps, eps = 1% of the Greek.
Outcome end_to_end_greeks() {
  Outcome o;
  std::string detail;
  greek_bodies.clear();
  for (const auto& name : kGreekConfigs) {
    const ExperimentConfig cfg = load_config(kConfigs + name + ".toml", false);
    if (cfg.trials != 100 || !cfg.epsRelative || *cfg.epsRelative != 0.01) fail(o, name + " is not a 100-trial 1% job");
    const ExperimentRun run = run_trials(build_job(cfg), cfg.trials, cfg.seed, cfg.passFraction);
    greek_bodies.push_back(run_to_json(cfg, run).dump(2));
    detail += name + " " + std::to_string(run.passes) + "/100 ";
    if (run.passes < 95) fail(o, name + " passed " + std::to_string(run.passes) + "/100");
    if (!run.budgetWithinEps) fail(o, name + " error budget component above eps");
    if (cfg.bs.payoff == Payoff::digital && run.built.scheduleMode != "threshold") fail(o, name + " not at threshold");
    if (name == "call_delta" && (run.built.job.method != Method::naive_smooth || cfg.gevrey != GevreySource::declared)) {
      fail(o, "call delta must use the declared smooth path");
    }
    if (run.audit.violations > 0) fail(o, name + " smoothness audit violations");
  }
  if (o.pass) o.detail = detail;
  return o;
}

// 6. P-equivalence on 20 randomized jobs.
Outcome p_equivalence() {
  Outcome o;
  Rng rng(6006);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0;
  for (int i = 0; i < 20; ++i) {
    DiffJob job;
    job.m = 1 + i % 2;
    job.dist = std::make_shared<const DiscreteDistribution>(discretize_standard_normal(8 + i % 4, 6.0));
    if (i % 3 == 0) {
      const double amp = 0.5 + 2 * u(rng);
      const double freq = 0.5 + 2 * u(rng);
      job.integrand = make_sine_integrand(amp, freq);
      job.x = -1 + 2 * u(rng);
      job.eps = std::pow(10.0, -2 - 3 * u(rng));
    } else {
      BlackScholesModel model;
      model.payoff = i % 3 == 1 ? Payoff::digital : Payoff::call;
      model.sigma = 0.1 + 0.3 * u(rng);
      model.r = 0.1 * u(rng);
      model.K = 80 + 40 * u(rng);
      const Interval window{20, 200};
      job.x = 90 + 20 * u(rng);
      job.integrand = make_greek_integrand(model, GreekParameter::P0, job.dist->max_abs_point(), window);
      job.integrand.gevreyV = calibrate_value_gevrey(model, window).spec;
      job.eps = std::abs(analytic_greek(model.with(GreekParameter::P0, job.x), GreekParameter::P0, job.m)) *
                (0.005 + 0.05 * u(rng));
    }
    job.method = Method::naive_nonsmooth;
    apply_schedule(job, ScheduleMode::threshold);
    DiffJob sum = job;
    sum.method = Method::sum_in_qae;
    const double diff = std::abs(encoded_probability_nonsmooth(job) - encoded_probability_sum_in_qae(sum));
    worst = std::max(worst, diff);
    if (diff > 1e-12) fail(o, "job " + std::to_string(i) + " differs by " + fmt(diff));
  }
  if (o.pass) o.detail = "20 jobs, worst |dP| " + fmt(worst);
  return o;
}

std::vector<std::string> table_bodies;

// 7. Method comparison on a nonsmooth and a smooth model.
Outcome table_one() {
  Outcome o;
  table_bodies.clear();
  const auto digital = load_config(kConfigs + "digital_delta_sum.toml", false);
  const auto drep = table1_report(digital, {0.04, 0.02, 0.01, 0.005, 0.0025});
  table_bodies.push_back(table1_csv(drep));
  const auto& naive = drep.cells.at(0);
  const auto& sum = drep.cells.at(1);
  for (std::size_t i = 0; i < naive.eps.size(); ++i) {
    if (!(sum.calls[i].F < naive.calls[i].F)) fail(o, "digital: sum-in-QAE not below naive at eps " + fmt(naive.eps[i]));
    const auto nz = static_cast<std::int64_t>(compute_stencil({1, naive.n[i]}).nonzero_offsets().size());
    if (naive.calls[i].F != nz * sum.calls[i].F) fail(o, "digital: ratio is not the nonzero offset count");
  }

  const auto sine = load_config(kConfigs + "sine.toml", false);
  std::vector<double> slope_eps;
  for (int k = 4; k <= 9; ++k) slope_eps.push_back(std::ldexp(1.0, -k));
  const auto srep = table1_report(sine, slope_eps);
  table_bodies.push_back(table1_csv(srep));
  std::string slopes;
  for (const auto& c : srep.cells) {
    const bool sum_th = c.method == Method::sum_in_qae && c.mode == ScheduleMode::threshold;
    const bool naive_min = c.method == Method::naive_smooth && c.mode == ScheduleMode::minimal;
    if (!sum_th && !naive_min) continue;
    if (c.setting == "small" && sum_th) continue;  // same cell as in "large"
    slopes += to_string(c.method) + "@" + to_string(c.mode) + ":" + fmt(c.slope) + " ";
    if (std::abs(c.slope - 1.0) > 0.2) fail(o, "sine slope " + fmt(c.slope) + " for " + to_string(c.method));
  }

  const auto qrep = table1_report(sine, {1e-3, 5e-4, 2.5e-4, 1e-4, 1e-5});
  table_bodies.push_back(table1_csv(qrep));
  const Table1Cell* minimal = nullptr;
  const Table1Cell* threshold = nullptr;
  for (const auto& c : qrep.cells) {
    if (c.method == Method::naive_smooth && c.mode == ScheduleMode::minimal) minimal = &c;
    if (c.method == Method::naive_smooth && c.mode == ScheduleMode::threshold) threshold = &c;
  }
  std::string qubits;
  for (std::size_t i = 0; i < minimal->eps.size(); ++i) {
    qubits += std::to_string(minimal->qubits[i]) + ">" + std::to_string(threshold->qubits[i]) + " ";
    if (!(minimal->qubits[i] > threshold->qubits[i])) fail(o, "qubits not larger at h_min for eps " + fmt(minimal->eps[i]));
  }
  if (o.pass) o.detail = "digital ratio exact at 5 eps; sine slopes " + slopes + "; qubits " + qubits;
  return o;
}

// 8. Re-running every experiment with the same seed gives identical bytes.
Outcome determinism() {
  Outcome o;
  for (std::size_t i = 0; i < kGreekConfigs.size(); ++i) {
    const ExperimentConfig cfg = load_config(kConfigs + kGreekConfigs[i] + ".toml", false);
    const std::string again = run_experiment(cfg).body;
    if (i >= greek_bodies.size() || again != greek_bodies[i] + "\n") fail(o, kGreekConfigs[i] + " differs");
  }
  const auto sine = load_config(kConfigs + "sine.toml", false);
  const auto a = run_experiment(sine);
  if (a.body != run_experiment(sine).body) fail(o, "sine differs");
  const auto digital = load_config(kConfigs + "digital_delta_sum.toml", false);
  if (table_bodies.empty() || table1_csv(table1_report(digital, {0.04, 0.02, 0.01, 0.005, 0.0025})) != table_bodies[0]) {
    fail(o, "comparison table differs");
  }
  auto small = sine;
  small.trials = 3;
  if (sweep_csv(small, {1e-2, 1e-3}, {Method::naive_smooth, Method::sum_in_qae}) !=
      sweep_csv(small, {1e-2, 1e-3}, {Method::naive_smooth, Method::sum_in_qae})) {
    fail(o, "sweep differs");
  }
  if (o.pass) o.detail = "6 estimate runs, a sweep and a table re-run byte-identical";
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double limit_s;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {1, "stencil correctness", 10, stencil_correctness},
      {2, "convergence order", 5, convergence_order},
      {3, "bound audits", 30, bound_audits},
      {4, "QAE simulator contract", 180, qae_contract},
      {5, "end-to-end Greeks", 300, end_to_end_greeks},
      {6, "P-equivalence", 10, p_equivalence},
      {7, "method comparison", 300, table_one},
      {8, "determinism", 600, determinism},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (secs > c.limit_s) fail(o, "took " + fmt(secs) + " s, limit " + fmt(c.limit_s) + " s");
    failed += !o.pass;
    std::printf("%s %d %s [%.1f s] %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, secs, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
