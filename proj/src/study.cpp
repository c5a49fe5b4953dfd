#include "chaoslab/study.hpp"

#include "chaoslab/chaos.hpp"
#include "chaoslab/concentration.hpp"
#include "chaoslab/liouville.hpp"
#include "chaoslab/particles.hpp"
#include "chaoslab/rng.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <set>

namespace chaoslab {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class Checks {
 public:
  void add(std::string name, bool ok, std::string detail = {}) {
    list.push_back({std::move(name), ok, std::move(detail)});
  }
  bool all_passed() const {
    return std::all_of(list.begin(), list.end(), [](const auto& c) { return c.passed; });
  }
  json to_json() const {
    json out = json::array();
    for (const auto& c : list) out.push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
    return out;
  }
  std::vector<CheckResult> list;
};

std::string sci(double v) { return format_double(v); }

std::vector<double> times_or_horizon(const std::vector<double>& snapshots, double horizon) {
  if (!snapshots.empty()) return snapshots;
  return horizon > 0.0 ? std::vector<double>{0.0, horizon} : std::vector<double>{0.0};
}

// Removes the artifacts of an earlier run listed in its manifest. Anything
// else in the directory is left alone and reported.
void prepare_output(const fs::path& dir) {
  if (!fs::exists(dir)) return;
  const fs::path manifest = dir / "manifest.json";
  std::set<fs::path> owned;
  if (fs::exists(manifest)) {
    std::ifstream in(manifest);
    json old;
    try {
      in >> old;
    } catch (const json::exception&) {
      throw ConfigError({"output: " + manifest.string() + " is not a readable manifest"});
    }
    owned.insert(manifest.lexically_normal());
    for (const auto& f : old.value("files", json::array()))
      owned.insert((dir / f.value("path", "")).lexically_normal());
  }
  // refuse before touching anything
  for (const auto& entry : fs::recursive_directory_iterator(dir))
    if (entry.is_regular_file() && !owned.count(entry.path().lexically_normal()))
      throw ConfigError({"output: directory " + dir.string() + " holds files not produced by a previous run (" +
                         entry.path().string() + ")"});
  for (const auto& p : owned)
    if (fs::is_regular_file(p)) fs::remove(p);
}

// ------------------------------------------------------------- pde-solve

void pde_study(const StudyConfig& cfg, ArtifactWriter& out, Checks& checks) {
  const KernelField kernel = build_kernel(cfg.kernel);
  const PeriodicGrid grid = make_grid(cfg.kernel.dimension, cfg.pde.points);
  const DensityField f0 = discretize(cfg.initial, grid);
  const MeanFieldSolver solver(kernel, grid);
  const auto times = times_or_horizon(cfg.pde.snapshots, cfg.pde.horizon);
  const auto traj = solver.solve(f0, cfg.pde.horizon, cfg.pde.dt, times);
  const int d = grid.dimension;

  std::vector<std::string> cols{"t", "i"};
  if (d == 2) cols.push_back("j");
  cols.push_back("f");
  CsvTable snap(cols);
  json series = json::array();
  double worst_mass = 0.0, worst_min = std::numeric_limits<double>::infinity();
  double eig_lo = std::numeric_limits<double>::infinity(), eig_hi = -eig_lo;
  bool entropy_finite = true, entropy_monotone = true;
  double heat_error = 0.0;
  double prev_entropy = std::numeric_limits<double>::infinity();
  const bool constant = cfg.kernel.modes.empty();

  for (const DensityField& f : traj) {
    for (std::size_t idx = 0; idx < grid.size(); ++idx) {
      snap.row().add(f.time);
      if (d == 1) {
        snap.add(idx);
      } else {
        snap.add(idx / grid.points).add(idx % grid.points);
      }
      snap.add(f.values[idx]);
    }
    const ConvolvedFields conv = solver.convolve(f);
    for (std::size_t idx = 0; idx < grid.size(); ++idx) {
      Eigen::SelfAdjointEigenSolver<Mat> es(conv.a_at(idx), Eigen::EigenvaluesOnly);
      eig_lo = std::min(eig_lo, es.eigenvalues().minCoeff());
      eig_hi = std::max(eig_hi, es.eigenvalues().maxCoeff());
    }
    const double entropy = f.entropy();
    entropy_finite = entropy_finite && std::isfinite(entropy);
    if (entropy > prev_entropy + 1e-10) entropy_monotone = false;
    prev_entropy = entropy;
    worst_mass = std::max(worst_mass, std::abs(f.mass() - 1.0));
    worst_min = std::min(worst_min, f.min_value());
    const double lg = f.min_value() > 0.0 ? log_gradient_bound(f) : std::numeric_limits<double>::infinity();
    if (constant) {
      // closed-form heat solution of the cosine profile
      for (std::size_t idx = 0; idx < grid.size(); ++idx) {
        const auto v = grid.node(idx);
        double exact = 1.0;
        for (const auto& m : cfg.initial.modes) {
          double k2 = 0.0, theta = m.phase;
          for (int a = 0; a < d; ++a) {
            k2 += double(m.wave[a]) * m.wave[a];
            theta += kTwoPi * m.wave[a] * v[a];
          }
          exact += m.amplitude * std::exp(-cfg.kernel.base_level * kTwoPi * kTwoPi * k2 * f.time) * std::cos(theta);
        }
        heat_error = std::max(heat_error, std::abs(f.values[idx] - exact));
      }
    }
    series.push_back({{"t", f.time}, {"mass", f.mass()}, {"min", f.min_value()}, {"entropy", entropy},
                      {"log_gradient_bound", lg}});
  }
  out.write("snapshots.csv", snap.str());

  checks.add("mass_conservation", worst_mass <= 1e-8, "max |mass - 1| = " + sci(worst_mass));
  checks.add("positivity", worst_min > 0.0, "min f = " + sci(worst_min));
  checks.add("ellipticity_inherited",
             eig_lo >= kernel.lambda_min() - 1e-8 && eig_hi <= kernel.lambda_max() + 1e-8,
             "eig(a*f) in [" + sci(eig_lo) + ", " + sci(eig_hi) + "]");
  checks.add("entropy_finite", entropy_finite);
  if (constant) {
    checks.add("entropy_monotone", entropy_monotone);
    checks.add("heat_oracle", heat_error <= 1e-6, "max error = " + sci(heat_error));
  }

  if (d == 1) {
    PlotSpec plot{"mean-field density", "v", "f(t, v)", false, false, {}};
    for (const DensityField& f : traj) {
      PlotSeries s{"t = " + sci(f.time), {}, {}, false, false};
      for (std::size_t idx = 0; idx < grid.size(); ++idx) {
        s.x.push_back(grid.node(idx)[0]);
        s.y.push_back(f.values[idx]);
      }
      plot.series.push_back(std::move(s));
    }
    out.write("density.svg", render_svg(plot));
  }
  out.write_json("summary.json", {{"schema_version", 1},
                                  {"study", "pde-solve"},
                                  {"lambda_min", kernel.lambda_min()},
                                  {"lambda_max", kernel.lambda_max()},
                                  {"snapshots", series},
                                  {"checks", checks.to_json()}});
}

// ------------------------------------------------------------- particles-run

void particles_study(const StudyConfig& cfg, ArtifactWriter& out, Checks& checks) {
  const auto& p = cfg.particles;
  const KernelField kernel = build_kernel(cfg.kernel);
  const int d = cfg.kernel.dimension;
  const PeriodicGrid grid = make_grid(d, p.pde_points);
  const DensityField f0 = discretize(cfg.initial, grid);

  EnsembleConfig ens;
  ens.replicas = p.replicas;
  ens.particles = p.count;
  ens.dt = p.dt;
  ens.horizon = p.horizon;
  ens.snapshot_times = times_or_horizon(p.snapshots, p.horizon);
  ens.seed = cfg.seed;
  ens.options.method = p.method;
  ens.options.drift_factor = p.drift_factor;
  const EnsembleResult res = run_ensemble(ens, kernel, f0, cfg.workers);

  std::vector<std::string> cols{"replica", "t", "particle", "x0"};
  if (d == 2) cols.push_back("x1");
  CsvTable table(cols);
  bool in_range = true;
  for (std::size_t s = 0; s < res.times.size(); ++s) {
    const auto& pos = res.positions[s];
    for (std::size_t r = 0; r < res.replicas; ++r)
      for (std::size_t i = 0; i < res.particles; ++i) {
        table.row().add(r).add(res.times[s]).add(i);
        for (int a = 0; a < d; ++a) {
          const double x = pos[(r * res.particles + i) * d + a];
          in_range = in_range && x >= 0.0 && x < 1.0;
          table.add(x);
        }
      }
  }
  out.write("positions.csv", table.str());
  checks.add("positions_on_torus", in_range);

  json summary = {{"schema_version", 1},
                  {"study", "particles-run"},
                  {"replicas", res.replicas},
                  {"particles", res.particles},
                  {"times", res.times},
                  {"seed", cfg.seed}};
  if (p.compare_pde) {
    const MeanFieldSolver pde(kernel, grid);
    const auto traj = pde.solve(f0, p.horizon, p.pde_dt, res.times);
    const int bins = std::max(4, std::min(p.bins, p.pde_points / 2));
    CsvTable cmp({"t", "bins", "l1", "binomial_error"});
    double final_l1 = 0.0;
    for (std::size_t s = 0; s < res.times.size(); ++s) {
      const auto hist = histogram(res.positions[s], d, bins);
      const auto ref = bin_masses(traj[s], bins);
      const double l1 = l1_distance(hist.mass, ref, 1.0);
      cmp.row().add(res.times[s]).add(bins).add(l1).add(binomial_l1_error(ref, hist.samples));
      final_l1 = l1;
    }
    out.write("pde_comparison.csv", cmp.str());
    checks.add("marginal_matches_pde", final_l1 <= p.max_l1,
               "L1 = " + sci(final_l1) + " (limit " + sci(p.max_l1) + ")");
    summary["final_l1"] = final_l1;
  }
  summary["checks"] = checks.to_json();
  out.write_json("summary.json", summary);
}

// ------------------------------------------------------------- liouville-run

void liouville_study(const StudyConfig& cfg, ArtifactWriter& out, Checks& checks) {
  const auto& l = cfg.liouville;
  const KernelField kernel = build_kernel(cfg.kernel);
  const PeriodicGrid grid = make_grid(1, l.points);
  const DensityField f0 = discretize(cfg.initial, grid);
  std::vector<double> times;
  for (int i = 0; i < l.snapshots; ++i) times.push_back(l.horizon * i / (l.snapshots - 1));
  const MeanFieldSolver pde(kernel, grid);
  const auto fs_traj = pde.solve(f0, l.horizon, l.pde_dt, times);
  const LiouvilleSolver liou(kernel, l.particles, l.points);
  // March between snapshots in pieces of ten steps so the residual's time
  // integral is resolved independently of the snapshot spacing.
  std::vector<LiouvilleDensity> traj;
  std::vector<double> residuals;
  {
    LiouvilleDensity cur = tensor_power(f0, l.particles);
    const double s0 = cur.entropy();
    const double piece = 10.0 * std::min(l.dt, liou.stability_limit());
    double rate = liou.fisher_information(cur) + liou.div_b_moment(cur), integral = 0.0;
    for (double target : times) {
      while (target - cur.time > 1e-12) {
        const double h = std::min(piece, target - cur.time);
        const double t_next = cur.time + h;
        cur = liou.solve(cur, h, l.dt).back();
        cur.time = t_next;
        const double next_rate = liou.fisher_information(cur) + liou.div_b_moment(cur);
        integral += 0.5 * h * (rate + next_rate);
        rate = next_rate;
      }
      cur.time = target;
      traj.push_back(cur);
      residuals.push_back(cur.entropy() + integral - s0);
    }
  }
  const int n_part = l.particles;

  CsvTable table({"t", "H_N", "N_H_N", "H_1", "H_2", "l1_marginal", "ckp_bound", "mass", "residual", "I1", "I2",
                  "I3"});
  std::vector<double> h_n, h_1;
  bool mass_ok = true, nonneg = true, subadditive = true, ckp_ok = true, i1_ok = true;
  double worst_balance = 0.0;
  std::vector<EntropyBalance> balances;
  for (std::size_t s = 0; s < traj.size(); ++s) {
    const auto& fn = traj[s];
    const auto& f = fs_traj[s];
    const double hn = relative_entropy(fn, f);
    const LiouvilleDensity m1 = marginal(fn, 1);
    const double h1 = relative_entropy(m1, f);
    double h2 = std::numeric_limits<double>::quiet_NaN();
    if (n_part == 3) {
      h2 = relative_entropy(marginal(fn, 2), f);
      subadditive = subadditive && h2 <= hn + 1e-10;
    }
    subadditive = subadditive && h1 <= hn + 1e-10;
    const double l1 = l1_distance(m1.values, f.values, f.grid.cell_volume());
    const auto audit = ckp_audit(l1, h1, 1);
    ckp_ok = ckp_ok && audit.holds;
    mass_ok = mass_ok && std::abs(fn.mass() - 1.0) <= 1e-8;
    nonneg = nonneg && hn >= -1e-10;
    const EntropyBalance bal = liou.balance_terms(fn, f);
    i1_ok = i1_ok && bal.i1 <= 1e-14;
    balances.push_back(bal);
    h_n.push_back(hn);
    h_1.push_back(h1);
    table.row().add(fn.time).add(hn).add(n_part * hn).add(h1).add(h2).add(l1).add(audit.bound).add(fn.mass());
    table.add(residuals[s]).add(bal.i1).add(bal.i2).add(bal.i3);
  }
  // central differences of H_N against the balance at interior snapshots
  CsvTable balance_table({"t", "dH_dt", "I_total", "gap"});
  for (std::size_t s = 1; s + 1 < traj.size(); ++s) {
    const double dhdt = (h_n[s + 1] - h_n[s - 1]) / (times[s + 1] - times[s - 1]);
    const double gap = std::abs(dhdt - balances[s].total());
    worst_balance = std::max(worst_balance, gap);
    balance_table.row().add(times[s]).add(dhdt).add(balances[s].total()).add(gap);
  }
  out.write("entropy.csv", table.str());
  out.write("balance.csv", balance_table.str());

  double worst_residual = 0.0;
  for (double r : residuals) worst_residual = std::max(worst_residual, std::abs(r));
  checks.add("mass_conservation", mass_ok);
  checks.add("initial_entropy_zero", std::abs(h_n.front()) <= 1e-10, "H_N(0) = " + sci(h_n.front()));
  checks.add("entropy_nonnegative", nonneg);
  checks.add("subadditivity", subadditive);
  checks.add("ckp", ckp_ok);
  checks.add("dissipation_sign", i1_ok);
  checks.add("entropy_solution_residual", worst_residual <= 1e-4, "max residual = " + sci(worst_residual));

  PlotSpec plot{"relative entropy", "t", "entropy", false, false, {}};
  PlotSeries s_n{"N H_N(t)", times, {}, true, false};
  for (double h : h_n) s_n.y.push_back(n_part * h);
  plot.series.push_back(std::move(s_n));
  plot.series.push_back({"H_1(t)", times, h_1, true, true});
  out.write("entropy.svg", render_svg(plot));

  out.write_json("summary.json", {{"schema_version", 1},
                                  {"study", "liouville-run"},
                                  {"particles", n_part},
                                  {"points", l.points},
                                  {"times", times},
                                  {"H_N", h_n},
                                  {"H_1", h_1},
                                  {"residuals", residuals},
                                  {"max_balance_gap", worst_balance},
                                  {"checks", checks.to_json()}});
}

// ------------------------------------------------------------- chaos-study

ChaosStudyReport run_chaos(const StudyConfig& cfg, const KernelSpec& kernel) {
  const auto& c = cfg.chaos;
  ChaosStudyConfig sc;
  sc.kernel = kernel;
  sc.initial = cfg.initial;
  sc.ladder = c.ladder;
  sc.replicas = c.replicas;
  sc.horizon = c.horizon;
  sc.particle_dt = c.particle_dt;
  sc.pde_points = c.pde_points;
  sc.pde_dt = c.pde_dt;
  sc.bins = c.bins;
  sc.seed = cfg.seed;
  sc.config_hash = cfg.hash;
  sc.workers = cfg.workers;
  return marginal_error_study(sc);
}

json report_json(const ChaosStudyReport& r) {
  json rows = json::array();
  for (const auto& row : r.rows)
    rows.push_back({{"N", row.particles},
                    {"M", row.replicas},
                    {"T", row.horizon},
                    {"bins", row.bins},
                    {"l1_error", row.l1_error},
                    {"standard_error", row.standard_error},
                    {"seed", row.seed},
                    {"config_hash", row.config_hash},
                    {"included", row.included},
                    {"exclusion_reason", row.exclusion_reason}});
  json out = {{"rows", rows}, {"fit_available", r.fit_available}};
  if (r.fit_available)
    out["fit"] = {{"slope", r.fit.slope},
                  {"intercept", r.fit.intercept},
                  {"slope_stderr", r.fit.slope_stderr},
                  {"points", r.fit.points},
                  {"slope_ci95", {r.slope_ci_low, r.slope_ci_high}}};
  return out;
}

void add_rows(CsvTable& t, const std::string& ladder, const ChaosStudyReport& r) {
  for (const auto& row : r.rows)
    t.row()
        .add(ladder)
        .add(row.particles)
        .add(row.replicas)
        .add(row.horizon)
        .add(row.bins)
        .add(row.l1_error)
        .add(row.standard_error)
        .add(static_cast<long long>(row.seed))
        .add(row.config_hash)
        .add(row.included ? 1 : 0)
        .add(row.exclusion_reason);
}

void chaos_study(const StudyConfig& cfg, ArtifactWriter& out, Checks& checks) {
  const auto& c = cfg.chaos;
  const ChaosStudyReport main = run_chaos(cfg, cfg.kernel);
  CsvTable rows({"ladder", "N", "M", "T", "bins", "l1_error", "standard_error", "seed", "config_hash", "included",
                 "exclusion_reason"});
  add_rows(rows, "kernel", main);
  json doc = {{"schema_version", 1}, {"study", "chaos-study"}, {"kernel", report_json(main)}};
  checks.add("slope_in_band", slope_within(main, c.slope_low, c.slope_high),
             main.fit_available ? "slope = " + sci(main.fit.slope) : "no rows above the noise floor");

  PlotSpec plot{"marginal L1 error", "N", "L1 error", true, true, {}};
  PlotSeries err{"L1 error", {}, {}, true, false}, floor{"noise floor", {}, {}, true, true};
  for (const auto& row : main.rows) {
    err.x.push_back(double(row.particles));
    err.y.push_back(row.l1_error);
    floor.x.push_back(double(row.particles));
    floor.y.push_back(row.standard_error);
  }
  plot.series.push_back(err);
  plot.series.push_back(floor);
  if (!main.rows.empty()) {
    const double n0 = double(main.rows.front().particles), e0 = main.rows.front().l1_error;
    PlotSeries ref{"slope -1/2", {}, {}, false, true};
    for (const auto& row : main.rows) {
      ref.x.push_back(double(row.particles));
      ref.y.push_back(e0 * std::sqrt(n0 / double(row.particles)));
    }
    plot.series.push_back(ref);
  }
  if (main.fit_available) {
    PlotSeries fit{"fit", {}, {}, false, false};
    for (const auto& row : main.rows) {
      fit.x.push_back(double(row.particles));
      fit.y.push_back(std::exp(main.fit.intercept + main.fit.slope * std::log(double(row.particles))));
    }
    plot.series.push_back(fit);
  }

  if (c.control) {
    const ChaosStudyReport control =
        run_chaos(cfg, constant_kernel_spec(cfg.kernel.dimension, cfg.kernel.base_level));
    add_rows(rows, "control", control);
    doc["control"] = report_json(control);
    checks.add("control_no_trend", no_significant_trend(control),
               control.fit_available ? "slope CI upper = " + sci(control.slope_ci_high) : "no fit (noise floor)");
    PlotSeries ctl{"constant-kernel control", {}, {}, true, true};
    for (const auto& row : control.rows) {
      ctl.x.push_back(double(row.particles));
      ctl.y.push_back(row.l1_error);
    }
    plot.series.push_back(ctl);
  }
  doc["checks"] = checks.to_json();
  out.write("chaos_rows.csv", rows.str());
  out.write_json("chaos_report.json", doc);
  out.write("chaos_loglog.svg", render_svg(plot));
}

// ------------------------------------------------------------- verify-inequalities

void inequality_study(const StudyConfig& cfg, ArtifactWriter& out, Checks& checks) {
  const auto& s = cfg.inequalities;
  CsvTable instances_table({"instance", "outcomes", "particles", "eta", "lhs", "rhs", "holds"});
  std::size_t violations = 0;
  for (std::size_t i = 0; i < s.instances; ++i) {
    const auto inst = random_discrete_instance(cfg.seed, static_cast<std::uint32_t>(i), s.max_outcomes,
                                               s.max_particles);
    const auto r = change_of_measure_check(inst.space, inst.eta);
    if (!r.holds) ++violations;
    instances_table.row().add(i).add(inst.space.outcomes).add(inst.space.particles).add(inst.eta).add(r.lhs).add(r.rhs);
    instances_table.add(r.holds ? 1 : 0);
  }
  out.write("change_of_measure.csv", instances_table.str());
  checks.add("change_of_measure", violations == 0, std::to_string(violations) + " violations");

  const KernelField kernel = build_kernel(cfg.kernel);
  const int d = cfg.kernel.dimension;
  const DensityField f = discretize(cfg.initial, make_grid(d, s.pde_points));
  json psis = json::array();
  bool centered = true, below = true;
  std::vector<PsiEntry> entries;
  for (int a = 0; a < d; ++a)
    for (int b = a; b < d; ++b) entries.push_back({false, a, b});
  for (int a = 0; a < d; ++a) entries.push_back({true, a, 0});
  std::optional<PsiFunction> first;
  for (const auto& e : entries) {
    const PsiFunction psi = build_psi(kernel, f, e);
    centered = centered && psi.centering_residual() <= 1e-10;
    below = below && psi.sup_norm() < 1.0 / (2.0 * std::numbers::e);
    psis.push_back({{"entry", e.drift ? "b" : "a"},
                    {"alpha", e.alpha},
                    {"beta", e.beta},
                    {"eta", psi.eta()},
                    {"sup_norm", psi.sup_norm()},
                    {"certified_bound", psi.certified_bound()},
                    {"centering_residual", psi.centering_residual()}});
    if (!first) first = psi;
  }
  checks.add("psi_centering", centered);
  checks.add("psi_sup_below_threshold", below);

  CsvTable moments({"case", "N", "mean", "standard_error"});
  const auto study = exp_moment_check(*first, f, s.moment_ladder, s.moment_samples, cfg.seed, cfg.workers);
  for (const auto& e : study.estimates) moments.row().add(std::string("psi")).add(e.particles).add(e.mean).add(e.standard_error);
  checks.add("exp_moment_bounded", study.bounded);
  checks.add("exp_moment_above_one", study.above_one);
  json control = nullptr;
  if (s.negative_control && first->sup_norm() > 0.0) {
    // outside the hypothesis: reported, not asserted
    const auto big = first->rescaled_to(1.2);
    const auto ctl = exp_moment_check(big, f, s.moment_ladder, s.moment_samples, cfg.seed + 1, cfg.workers);
    for (const auto& e : ctl.estimates)
      moments.row().add(std::string("control")).add(e.particles).add(e.mean).add(e.standard_error);
    control = {{"sup_norm", big.sup_norm()}, {"bounded", ctl.bounded}};
  }
  out.write("exp_moments.csv", moments.str());

  json est = json::array();
  for (const auto& e : study.estimates)
    est.push_back({{"N", e.particles}, {"mean", e.mean}, {"standard_error", e.standard_error}});
  out.write_json("inequalities.json", {{"schema_version", 1},
                                       {"study", "verify-inequalities"},
                                       {"change_of_measure", {{"instances", s.instances}, {"violations", violations}}},
                                       {"psi", psis},
                                       {"exp_moments", est},
                                       {"negative_control", control},
                                       {"checks", checks.to_json()}});
}

// ------------------------------------------------------------- bench-forces

ParticleState random_state(int d, std::size_t n, std::uint64_t seed, std::uint32_t index) {
  ParticleState st;
  st.dimension = d;
  st.seed = seed;
  st.positions.resize(n * d);
  st.streams.resize(n);
  const rng::StreamAddress addr{seed, index, static_cast<std::uint32_t>(n), rng::Purpose::kInstance};
  for (std::size_t i = 0; i < n; ++i) {
    st.streams[i] = static_cast<std::uint32_t>(i);
    const auto u = rng::uniform_pair(addr, static_cast<std::uint32_t>(i));
    for (int a = 0; a < d; ++a) st.positions[i * d + a] = u[a] >= 1.0 ? 0.0 : u[a];
  }
  return st;
}

double max_force_gap(const DriftDiffusion& x, const DriftDiffusion& y) {
  double gap = 0.0;
  for (std::size_t i = 0; i < x.drift.size(); ++i) gap = std::max(gap, std::abs(x.drift[i] - y.drift[i]));
  for (std::size_t i = 0; i < x.diffusion.size(); ++i)
    gap = std::max(gap, std::abs(x.diffusion[i] - y.diffusion[i]));
  return gap;
}

void bench_study(const StudyConfig& cfg, ArtifactWriter& out, Checks& checks) {
  const auto& b = cfg.bench;
  const KernelField kernel = build_kernel(cfg.kernel);
  const int d = cfg.kernel.dimension;
  double worst = 0.0;
  for (std::size_t n : b.check_sizes)
    for (std::size_t k = 0; k < b.check_states; ++k) {
      const auto st = random_state(d, n, cfg.seed, static_cast<std::uint32_t>(k));
      worst = std::max(worst, max_force_gap(forces_naive(st, kernel), forces_spectral(st, kernel)));
    }
  checks.add("spectral_matches_naive", worst <= 1e-10, "max gap = " + sci(worst));

  const auto st = random_state(d, b.particles, cfg.seed, 0xFFFFu);
  auto time_it = [&](auto&& fn) {
    double best = std::numeric_limits<double>::infinity();
    for (int r = 0; r < b.repeats; ++r) {
      const auto t0 = std::chrono::steady_clock::now();
      const auto forces = fn();
      const auto t1 = std::chrono::steady_clock::now();
      if (forces.drift.empty()) throw Error("empty force evaluation");
      best = std::min(best, std::chrono::duration<double>(t1 - t0).count());
    }
    return best;
  };
  const double naive = time_it([&] { return forces_naive(st, kernel); });
  const double spectral = time_it([&] { return forces_spectral(st, kernel); });
  const double ratio = naive / spectral;
  CsvTable table({"method", "N", "modes", "seconds"});
  table.row().add(std::string("naive")).add(b.particles).add(kernel.terms().size()).add(naive);
  table.row().add(std::string("spectral")).add(b.particles).add(kernel.terms().size()).add(spectral);
  out.write("bench.csv", table.str());
  checks.add("speedup", ratio >= b.min_speedup, "naive / spectral = " + sci(ratio));
  out.write_json("bench.json", {{"schema_version", 1},
                                {"study", "bench-forces"},
                                {"particles", b.particles},
                                {"modes", kernel.terms().size()},
                                {"naive_seconds", naive},
                                {"spectral_seconds", spectral},
                                {"speedup", ratio},
                                {"max_equivalence_gap", worst},
                                {"checks", checks.to_json()}});
}

}  // namespace

StudyOutcome run_study(const StudyConfig& cfg) {
  prepare_output(cfg.output);
  ArtifactWriter out(cfg.output);
  StudyOutcome outcome;
  RunManifest& m = outcome.manifest;
  m.study = to_string(cfg.kind);
  m.config_hash = cfg.hash;
  m.version = kVersion;
  m.workers = cfg.workers;
  m.started = utc_timestamp();
  out.write_json("config.json", cfg.canonical);

  Checks checks;
  try {
    switch (cfg.kind) {
      case StudyKind::kPdeSolve: pde_study(cfg, out, checks); break;
      case StudyKind::kParticlesRun: particles_study(cfg, out, checks); break;
      case StudyKind::kLiouvilleRun: liouville_study(cfg, out, checks); break;
      case StudyKind::kChaosStudy: chaos_study(cfg, out, checks); break;
      case StudyKind::kVerifyInequalities: inequality_study(cfg, out, checks); break;
      case StudyKind::kBenchForces: bench_study(cfg, out, checks); break;
    }
    m.status = checks.all_passed() ? "pass" : "fail";
    for (const auto& c : checks.list)
      if (!c.passed) {
        m.failure_point = c.name + (c.detail.empty() ? "" : ": " + c.detail);
        break;
      }
  } catch (const std::exception& e) {
    m.status = "error";
    m.failure_point = e.what();
  }
  m.finished = utc_timestamp();
  m.files = out.files();
  outcome.checks = checks.list;
  json doc = m.to_json();
  doc["checks"] = checks.to_json();
  std::ofstream(cfg.output / "manifest.json") << doc.dump(2) << "\n";
  return outcome;
}

}  // namespace chaoslab
