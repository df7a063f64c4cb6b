#include "coagdiff/commands.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>

#include <CLI11.hpp>

#include "coagdiff/output.hpp"
#include "coagdiff/scenario_file.hpp"

namespace coagdiff {
namespace {

using nlohmann::json;

int guarded(std::ostream& err, const std::function<int()>& body) {
  try {
    return body();
  } catch (const SchemaError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const AdmissibilityError& e) {
    err << "error: " << e.what() << '\n';
    return kExitCheckFailed;
  } catch (const json::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

std::filesystem::path output_dir(const ScenarioFile& file, const RunFlags& flags) {
  return flags.out_dir ? *flags.out_dir : file.outputs.dir;
}

void apply_flags(Scenario& s, const RunFlags& flags) {
  s.force = s.force || flags.force;
  if (flags.cadence) s.cadence = *flags.cadence;
  s.validate();
}

template <class Write>
std::string to_text(Write&& write) {
  std::ostringstream os;
  write(os);
  return os.str();
}

std::string opt_number(std::optional<double> x) { return x ? format_number(*x) : "na"; }

double field_l1(const ClassField& a, const ClassField& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.raw().size(); ++i) s += std::abs(a.raw()[i] - b.raw()[i]);
  return s * a.grid().cell_volume();
}

// Cell averages of a fine field on a grid coarser by an integer factor.
ClassField restrict_to(const ClassField& fine, const SpatialGrid& coarse) {
  const int ratio = fine.grid().cells_per_axis() / coarse.cells_per_axis();
  ClassField out(coarse, fine.num_classes());
  const double w = fine.grid().cell_volume() / coarse.cell_volume();
  for (int k = 1; k <= fine.num_classes(); ++k) {
    const auto src = fine.cls(k);
    auto dst = out.cls(k);
    for (std::size_t c = 0; c < src.size(); ++c) {
      auto idx = fine.grid().unravel(c);
      for (int a = 0; a < coarse.dim(); ++a) idx[static_cast<std::size_t>(a)] /= ratio;
      dst[coarse.ravel(idx)] += w * src[c];
    }
  }
  return out;
}

struct LevelRun {
  double h = 0.0;
  ClassField kappa;
  ClassField lambda;
};

int converge_levels(const std::filesystem::path& path, const ScenarioFile& base,
                    const std::string& axis, std::vector<double> levels, const RunFlags& flags,
                    std::ostream& out, std::ostream& err) {
  const Scenario& s0 = base.scenario;
  if (levels.empty()) {
    if (axis == "dt") levels = {s0.dt, s0.dt / 2, s0.dt / 4, s0.dt / 8};
    else levels = {double(s0.grid.cells_per_axis()), 2.0 * s0.grid.cells_per_axis(),
                   4.0 * s0.grid.cells_per_axis()};
  }
  const std::filesystem::path base_dir =
      path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path();
  std::vector<LevelRun> runs;
  for (double level : levels) {
    json doc = base.source;
    if (axis == "dt") {
      if (!(level > 0.0)) throw SchemaError("dt levels must be positive");
      doc["time"]["dt"] = level;
    } else {
      if (level < 1.0 || level != std::floor(level))
        throw SchemaError("dx levels must be whole cell counts");
      doc["grid"]["cells_per_axis"] = static_cast<int>(level);
    }
    ScenarioFile file = parse_scenario(doc, base_dir);
    Scenario& s = file.scenario;
    apply_flags(s, flags);
    s.cadence = static_cast<int>(std::max<std::int64_t>(1, s.steps()));
    RunResult r = run(s);
    const double h = axis == "dt" ? s.dt : s.grid.spacing();
    runs.push_back({h, r.trajectory.kappa.back(), r.trajectory.lambda.back()});
    err << axis << " level " << format_number(level) << " done\n";
  }
  if (axis == "dx")
    for (std::size_t i = 0; i + 1 < runs.size(); ++i) {
      const int a = runs[i].kappa.grid().cells_per_axis(), b = runs[i + 1].kappa.grid().cells_per_axis();
      if (b <= a || b % a != 0) throw SchemaError("dx levels must increase by integer factors");
    }

  std::vector<std::optional<double>> error(runs.size());
  for (std::size_t i = 0; i + 1 < runs.size(); ++i) {
    const SpatialGrid& g = runs[i].kappa.grid();
    const ClassField k1 = axis == "dx" ? restrict_to(runs[i + 1].kappa, g) : runs[i + 1].kappa;
    const ClassField l1 = axis == "dx" ? restrict_to(runs[i + 1].lambda, g) : runs[i + 1].lambda;
    error[i] = field_l1(runs[i].kappa, k1) + field_l1(runs[i].lambda, l1);
  }
  out << "level," << (axis == "dt" ? "dt" : "dx") << ",l1_difference_to_next,observed_order\n";
  for (std::size_t i = 0; i < runs.size(); ++i) {
    std::optional<double> order;
    if (i > 0 && error[i] && error[i - 1] && *error[i] > 0.0 && *error[i - 1] > 0.0)
      order = std::log(*error[i - 1] / *error[i]) / std::log(runs[i - 1].h / runs[i].h);
    out << format_number(levels[i]) << ',' << format_number(runs[i].h) << ','
        << opt_number(error[i]) << ',' << opt_number(order) << '\n';
  }
  return kExitOk;
}

int converge_truncation(const ScenarioFile& base, std::vector<double> levels, const RunFlags& flags,
                        std::ostream& out) {
  Scenario s = base.scenario;
  apply_flags(s, flags);
  const int m = s.model.num_classes();
  std::vector<int> ms;
  if (levels.empty()) {
    for (int x : {m / 4, m / 2, m})
      if (x >= 1 && (ms.empty() || x > ms.back())) ms.push_back(x);
  } else {
    for (double x : levels) {
      if (x < 1.0 || x != std::floor(x)) throw SchemaError("M levels must be positive integers");
      ms.push_back(static_cast<int>(x));
    }
  }
  const MonotonicityReport rep = refine_in_M(s, ms);
  out << "M,eta_l1_final,kappa_violations_vs_next,w_violations_vs_next,worst_kappa_excess,"
         "worst_w_excess\n";
  for (std::size_t i = 0; i < rep.levels.size(); ++i) {
    out << rep.levels[i] << ',' << format_number(rep.eta_l1[i].back());
    if (i < rep.pairs.size()) {
      const MonotonicityPair& p = rep.pairs[i];
      out << ',' << p.kappa_violations << ',' << p.w_violations << ','
          << format_number(p.worst_kappa_excess) << ',' << format_number(p.worst_w_excess) << '\n';
    } else {
      out << ",na,na,na,na\n";
    }
  }
  out << "# eta_decreasing=" << (rep.eta_decreasing ? 1 : 0) << " clean=" << (rep.clean() ? 1 : 0)
      << '\n';
  return rep.clean() ? kExitOk : kExitCheckFailed;
}

bool kernel_is_zero(const Model& model) {
  const auto& t = model.kernel_table();
  return std::all_of(t.begin(), t.end(), [](double x) { return x == 0.0; });
}

int oracle_homogeneous(const ScenarioFile& file, const std::filesystem::path& dir, std::ostream& out) {
  const Scenario& s = file.scenario;
  const RunResult result = run(s);
  const ClassField mu0 = initial_measure(s);
  const std::vector<double> n0(mu0.raw().begin(), mu0.raw().end());
  const Reference ref = homogeneous_ode(s.model, n0, s.t_end, s.dt / 10.0, 10 * s.cadence);
  const ErrorReport rep = compare(to_reference(result.trajectory), ref);

  write_text_file(dir / "oracle_reference.csv", to_text([&](std::ostream& os) { write_reference_csv(os, ref); }));
  write_text_file(dir / "oracle_errors.csv", to_text([&](std::ostream& os) {
    os << "t,l1,linf,max_class_l1\n";
    for (std::size_t i = 0; i < rep.times.size(); ++i)
      os << format_number(rep.times[i]) << ',' << format_number(rep.l1[i]) << ','
         << format_number(rep.linf[i]) << ','
         << format_number(*std::max_element(rep.class_l1[i].begin(), rep.class_l1[i].end())) << '\n';
  }));
  json j;
  j["reduction"] = "homogeneous";
  j["provenance"] = ref.provenance;
  j["dt_ref"] = s.dt / 10.0;
  j["max_l1"] = rep.max_l1;
  j["max_linf"] = rep.max_linf;
  j["max_class_l1"] = rep.max_class_l1;
  j["final_class_l1"] = rep.class_l1.back();
  out << j.dump(2) << '\n';
  return kExitOk;
}

int oracle_diffusion(const ScenarioFile& file, const std::filesystem::path& dir, std::ostream& out,
                     std::ostream& err) {
  const Scenario& s = file.scenario;
  if (file.init.kind != "profile") {
    err << "error: the diffusion oracle needs a profile init of Gaussian bumps\n";
    return kExitCheckFailed;
  }
  std::vector<const InitComponent*> bumps;
  for (const InitComponent& c : file.init.components) {
    if (c.background != 0.0 || c.amplitude <= 0.0 || c.cls > s.model.num_classes()) {
      err << "error: diffusion oracle components must be pure live Gaussian bumps\n";
      return kExitCheckFailed;
    }
    for (const InitComponent* b : bumps)
      if (b->cls == c.cls) {
        err << "error: diffusion oracle allows one bump per class\n";
        return kExitCheckFailed;
      }
    bumps.push_back(&c);
  }
  const RunResult result = run(s);
  const Trajectory& traj = result.trajectory;
  json j;
  j["reduction"] = "diffusion";
  j["provenance"] = "closed-form";
  json classes = json::array();
  std::ostringstream csv;
  csv << "class,t,l1,linf,variance,variance_expected,variance_rel_error\n";
  double worst_var = 0.0;
  for (const InitComponent* b : bumps) {
    const double a = s.model.diffusivity(b->cls);
    Reference ref = diffusion_reference(s.grid, a, b->sigma, traj.times, b->centre);
    for (ClassField& f : ref.values)
      for (double& x : f.raw()) x *= b->amplitude;
    Reference run_ref{"run", traj.times, {}};
    for (const ClassField& k : traj.kappa) {
      ClassField one(s.grid, 1);
      const auto src = k.cls(b->cls);
      std::copy(src.begin(), src.end(), one.cls(1).begin());
      run_ref.values.push_back(std::move(one));
    }
    const ErrorReport rep = compare(run_ref, ref);
    double class_var = 0.0;
    for (std::size_t i = 0; i < traj.times.size(); ++i) {
      const double expected = b->sigma * b->sigma + a * traj.times[i];
      std::optional<double> var, rel;
      if (s.grid.dim() == 1) {
        var = profile_variance(run_ref.values[i].cls(1), s.grid, b->centre[0]);
        rel = std::abs(*var - expected) / expected;
        class_var = std::max(class_var, *rel);
      }
      csv << b->cls << ',' << format_number(traj.times[i]) << ',' << format_number(rep.l1[i]) << ','
          << format_number(rep.linf[i]) << ',' << opt_number(var) << ',' << format_number(expected)
          << ',' << opt_number(rel) << '\n';
    }
    worst_var = std::max(worst_var, class_var);
    json cj = {{"class", b->cls}, {"max_l1", rep.max_l1}, {"max_linf", rep.max_linf}};
    if (s.grid.dim() == 1) cj["max_variance_rel_error"] = class_var;
    else cj["max_variance_rel_error"] = nullptr;
    classes.push_back(cj);
  }
  write_text_file(dir / "oracle_errors.csv", csv.str());
  j["classes"] = classes;
  if (s.grid.dim() == 1) j["max_variance_rel_error"] = worst_var;
  else j["max_variance_rel_error"] = nullptr;
  out << j.dump(2) << '\n';
  return kExitOk;
}

}  // namespace

int cmd_check(const std::filesystem::path& scenario, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const ScenarioFile file = load_scenario(scenario);
    const AdmissibilityReport rep = check_admissible(file.scenario.model);
    out << report_to_json(rep).dump(2) << '\n';
    if (rep.admissible()) return kExitOk;
    if (!rep.violations.empty()) {
      const Violation& v = rep.violations.front();
      err << "check failed: " << v.check << " at (" << v.i << ", " << v.j << "): "
          << format_number(v.lhs) << " vs " << format_number(v.rhs) << '\n';
    }
    return kExitCheckFailed;
  });
}

int cmd_run(const std::filesystem::path& scenario, const RunFlags& flags, std::ostream& out,
            std::ostream& err) {
  return guarded(err, [&] {
    ScenarioFile file = load_scenario(scenario);
    apply_flags(file.scenario, flags);
    const RunResult result = run(file.scenario);
    const std::filesystem::path dir = output_dir(file, flags);
    json files = json::array({"diagnostics.csv"});
    write_text_file(dir / "diagnostics.csv",
                    to_text([&](std::ostream& os) { write_diagnostics_csv(os, result.diagnostics); }));
    if (file.outputs.snapshots) {
      write_text_file(dir / "snapshots.csv", to_text([&](std::ostream& os) {
        write_snapshots_csv(os, result.trajectory.times, result.trajectory.kappa);
      }));
      write_text_file(dir / "defect_snapshots.csv", to_text([&](std::ostream& os) {
        write_snapshots_csv(os, result.trajectory.times, result.trajectory.lambda);
      }));
      files.push_back("snapshots.csv");
      files.push_back("defect_snapshots.csv");
    }
    files.push_back("manifest.json");
    write_text_file(dir / "manifest.json",
                    run_manifest(file, result.diagnostics, files).dump(2) + "\n");
    const Diagnostics& d = result.diagnostics;
    if (d.t_end_beyond_horizon)
      err << "note: t_end exceeds the guaranteed horizon " << format_number(d.horizon.zeta_lower) << '\n';
    if (d.horizon_bound_tripped) err << "note: horizon moment monitor tripped\n";
    if (d.global_bound_tripped) err << "note: global moment monitor tripped\n";
    out << "wrote " << (dir / "diagnostics.csv").string() << '\n';
    return kExitOk;
  });
}

int cmd_horizon(const std::filesystem::path& scenario, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const ScenarioFile file = load_scenario(scenario);
    const Scenario& s = file.scenario;
    const DominatingMeasure mu_star = dominating_measure(initial_measure(s));
    json j = horizon_to_json(alpha_and_horizon(s.model, mu_star));
    j["dominating_measure"] = mu_star;
    out << j.dump(2) << '\n';
    return kExitOk;
  });
}

int cmd_converge(const std::filesystem::path& scenario, const std::string& axis,
                 const std::vector<double>& levels, const RunFlags& flags, std::ostream& out,
                 std::ostream& err) {
  return guarded(err, [&] {
    if (axis != "dt" && axis != "dx" && axis != "M") {
      err << "error: --grid must be dt, dx or M\n";
      return kExitUsage;
    }
    const ScenarioFile file = load_scenario(scenario);
    if (axis == "M") return converge_truncation(file, levels, flags, out);
    return converge_levels(scenario, file, axis, levels, flags, out, err);
  });
}

int cmd_oracle(const std::filesystem::path& scenario, const RunFlags& flags, std::ostream& out,
               std::ostream& err) {
  return guarded(err, [&] {
    ScenarioFile file = load_scenario(scenario);
    apply_flags(file.scenario, flags);
    const std::filesystem::path dir = output_dir(file, flags);
    if (file.scenario.grid.cell_count() == 1) return oracle_homogeneous(file, dir, out);
    if (kernel_is_zero(file.scenario.model)) return oracle_diffusion(file, dir, out, err);
    err << "error: no oracle applies (needs one spatial cell or a zero kernel)\n";
    return kExitCheckFailed;
  });
}

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Truncated coagulation-diffusion solver", "coagdiff"};
  app.require_subcommand(1);
  std::string path;
  RunFlags flags;
  int cadence = 0;
  std::string out_dir;
  std::string axis;
  std::vector<double> levels;

  auto add_path = [&](CLI::App* sub) {
    sub->add_option("scenario", path, "scenario JSON file")->required();
  };
  CLI::App* check = app.add_subcommand("check", "validate the model's admissibility");
  add_path(check);
  CLI::App* runc = app.add_subcommand("run", "integrate and write diagnostics");
  add_path(runc);
  CLI::App* horizon = app.add_subcommand("horizon", "report alpha and the horizon lower bound");
  add_path(horizon);
  CLI::App* converge = app.add_subcommand("converge", "refinement study along one axis");
  add_path(converge);
  converge->add_option("--grid", axis, "dt, dx or M")->required()->check(CLI::IsMember({"dt", "dx", "M"}));
  converge->add_option("--levels", levels, "refinement levels")->delimiter(',');
  CLI::App* oracle = app.add_subcommand("oracle", "compare against a reference solution");
  add_path(oracle);
  for (CLI::App* sub : {runc, converge, oracle}) {
    sub->add_flag("--force", flags.force, "skip the admissibility gate");
    sub->add_option("--cadence", cadence, "output every n steps")->check(CLI::PositiveNumber);
    sub->add_option("--out-dir", out_dir, "output directory");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }
  if (cadence > 0) flags.cadence = cadence;
  if (!out_dir.empty()) flags.out_dir = out_dir;

  if (check->parsed()) return cmd_check(path, out, err);
  if (runc->parsed()) return cmd_run(path, flags, out, err);
  if (horizon->parsed()) return cmd_horizon(path, out, err);
  if (converge->parsed()) return cmd_converge(path, axis, levels, flags, out, err);
  return cmd_oracle(path, flags, out, err);
}

}  // namespace coagdiff
