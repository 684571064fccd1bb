// Command-line front end: one-off solves, the five experiment families,
// decay profiles, and per-element spectra.
#include <cstdio>
#include <filesystem>
#include <iostream>

#include "CLI11.hpp"
#include "maxms/maxms.hpp"

using namespace maxms;

namespace {

struct CliOptions {
  std::string config_path;
  std::string outdir_flag;
  bool paper_scale = false;
  bool check_resolution = false;
  // Optional overrides; negative or empty means "leave the config alone".
  double k = -1.0;
  i64 n_fine = -1;
  std::vector<i64> coarse;
  std::vector<int> m;
  int l = -1;
  int jobs = -1;
  i64 seed = -1;
  std::string model;
  std::string voxel_path;
  double inclusion = -1.0;
  std::vector<double> contrast;
  bool timings = false;
  bool strict_trace = false;
  bool fine_reference = false;
  bool aux_ascending = false;
  bool basis_cache = false;
  std::string cache_dir;
  bool no_slices = false;
};

void add_common_flags(CLI::App* cmd, CliOptions& opt) {
  cmd->add_option("--config", opt.config_path, "config file (key = value lines)");
  cmd->add_option("--outdir", opt.outdir_flag, "output directory");
  cmd->add_flag("--paper-scale", opt.paper_scale,
                "full-size grids (h = 1/64, H down to 1/16)");
  cmd->add_flag("--check-resolution", opt.check_resolution,
                "print the resolution-condition status per coarse mesh, then run");
  cmd->add_option("--k", opt.k, "wave number");
  cmd->add_option("--n-fine", opt.n_fine, "fine cells per side");
  cmd->add_option("--coarse", opt.coarse, "coarse cells per side (repeatable)");
  cmd->add_option("--m", opt.m, "oversampling layers (repeatable)");
  cmd->add_option("--l", opt.l, "retained modes per element");
  cmd->add_option("--jobs", opt.jobs, "worker threads");
  cmd->add_option("--seed", opt.seed, "rng seed for coefficient sampling");
  cmd->add_option("--model", opt.model,
                  "homogeneous | random_cubes | periodic_rods | voxel");
  cmd->add_option("--voxel-path", opt.voxel_path, "voxel coefficient file");
  cmd->add_option("--inclusion", opt.inclusion, "inclusion permeability");
  cmd->add_option("--contrast", opt.contrast, "contrast sweep values (repeatable)");
  cmd->add_flag("--timings", opt.timings, "fill the timing columns");
  cmd->add_flag("--strict-trace", opt.strict_trace,
                "drop impedance DOFs on patch boundaries too");
  cmd->add_flag("--fine-reference", opt.fine_reference,
                "compare against the fine solve even when an exact solution exists");
  cmd->add_flag("--aux-ascending", opt.aux_ascending,
                "keep the raw pencil's lowest band instead of deflating gradients");
  cmd->add_flag("--basis-cache", opt.basis_cache, "cache multiscale bases on disk");
  cmd->add_option("--cache-dir", opt.cache_dir, "basis cache directory");
  cmd->add_flag("--no-slices", opt.no_slices, "skip midplane slice export");
}

ExperimentConfig build_config(const CliOptions& opt) {
  ExperimentConfig cfg;
  if (!opt.config_path.empty()) cfg = load_config_file(opt.config_path);
  if (opt.paper_scale) apply_paper_scale(cfg);
  if (opt.k > 0.0) cfg.k = opt.k;
  if (opt.n_fine > 0) cfg.n_fine = opt.n_fine;
  if (!opt.coarse.empty()) cfg.coarse_list = opt.coarse;
  if (!opt.m.empty()) cfg.m_list = opt.m;
  if (opt.l > 0) cfg.l = opt.l;
  if (opt.jobs > 0) cfg.jobs = opt.jobs;
  if (opt.seed >= 0) {
    cfg.rng_seed = std::uint64_t(opt.seed);
    cfg.model.rng_seed = cfg.rng_seed;
  }
  if (!opt.model.empty()) cfg.model.kind = parse_model_kind(opt.model);
  if (!opt.voxel_path.empty()) cfg.model.path = opt.voxel_path;
  if (opt.inclusion > 0.0) cfg.model.inclusion_value = opt.inclusion;
  if (!opt.contrast.empty()) cfg.contrast_list = opt.contrast;
  if (opt.timings) cfg.timings = true;
  if (opt.strict_trace) cfg.strict_trace = true;
  if (opt.fine_reference) cfg.fine_reference = true;
  if (opt.aux_ascending) cfg.aux_ascending = true;
  if (opt.basis_cache) cfg.basis_cache = true;
  if (!opt.cache_dir.empty()) cfg.cache_dir = opt.cache_dir;
  if (opt.no_slices) cfg.export_slices = false;
  cfg.outdir = resolve_outdir(opt.outdir_flag, cfg.outdir);
  validate_config(cfg);
  return cfg;
}

CoefficientField make_field(const ExperimentConfig& cfg, const NestedMesh& mesh) {
  return cfg.model.kind == ModelKind::VOXEL_FILE
             ? load_voxels(cfg.model.path, mesh)
             : generate(cfg.model, mesh);
}

void print_resolution_status(const ExperimentConfig& cfg) {
  for (i64 nc : cfg.coarse_list) {
    NestedMesh cmesh = build_nested_mesh(int(nc), int(cfg.n_fine / nc));
    CoefficientField field = make_field(cfg, cmesh);
    AuxiliarySpace aux = build_auxiliary_space(cmesh, field, cfg.k, cmesh.H,
                                               cfg.l, cfg.jobs,
                                               aux_selection(cfg));
    ResolutionReport rc =
        resolution_check(cfg.k, cmesh.H, field.mu_max, aux.Lambda);
    std::printf(
        "resolution H=%.6g: k H sqrt(mu_max/Lambda) = %.4f (Lambda %.6e, "
        "threshold %.2f) -> %s\n",
        cmesh.H, rc.value, aux.Lambda, rc.threshold,
        rc.satisfied ? "satisfied" : "NOT satisfied");
  }
}

void write_family_report(const ExperimentConfig& cfg, const ErrorReport& rep,
                         const std::string& stem) {
  std::filesystem::create_directories(cfg.outdir);
  std::string path = cfg.outdir + "/" + stem + ".csv";
  emit_report(rep, path);
  std::fputs(summary_text(rep).c_str(), stdout);
  std::printf("wrote %s\n", path.c_str());
}

int run_solve(const ExperimentConfig& cfg, bool fine_only) {
  i64 nc = cfg.coarse_list.front();
  bool exact = cfg.model.kind == ModelKind::HOMOGENEOUS;
  FineCase fc;
  if (exact) {
    Benchmark bm = exact_benchmark(cfg.k);
    fc = make_fine_case(cfg, cfg.model, cfg.k, nc, bm.f, bm.g, bm.u);
  } else {
    VolumeFn f = [](const Eigen::Vector3d&) {
      return Eigen::Vector3cd(1.0, 1.0, 1.0);
    };
    fc = make_fine_case(cfg, cfg.model, cfg.k, nc, f, {}, {});
  }
  if (exact) {
    NormErrors fe = compute_errors(fc.ops, fc.u_exact, fc.u_fine);
    std::printf("fine solve: n=%lld dofs=%lld, vs exact a_rel %.6e l2_rel %.6e\n",
                (long long)fc.mesh.n, (long long)fc.mesh.num_edges(), fe.a_rel,
                fe.l2_rel);
  } else {
    std::printf("fine solve: n=%lld dofs=%lld\n", (long long)fc.mesh.n,
                (long long)fc.mesh.num_edges());
  }
  if (fine_only) return 0;

  Timer t;
  AuxiliarySpace aux = build_auxiliary_space(fc.mesh, fc.field, cfg.k,
                                             fc.mesh.H, cfg.l, cfg.jobs,
                                             aux_selection(cfg));
  double ts = t.seconds();
  int m = cfg.m_list.front();
  ReportRow row = ms_row(cfg, "solve", cfg.k, fc.mesh, fc, aux, ts, m);
  std::printf("%s\n%s\n", csv_header(), format_row(row).c_str());
  return 0;
}

int run_decay(const ExperimentConfig& cfg) {
  i64 nc = cfg.coarse_list.front();
  NestedMesh cmesh = build_nested_mesh(int(nc), int(cfg.n_fine / nc));
  CoefficientField field = make_field(cfg, cmesh);
  AuxiliarySpace aux = build_auxiliary_space(cmesh, field, cfg.k, cmesh.H,
                                             cfg.l, cfg.jobs,
                                             aux_selection(cfg));
  i64 c = cmesh.n_coarse / 2;
  i64 elem = cmesh.coarse_id(c, c, c);
  std::vector<DecayPoint> pts =
      decay_profile(cmesh, field, cfg.k, cmesh.H, aux, elem, 0, cfg.m_list,
                    cfg.strict_trace, cfg.policy);
  std::string text = "m,a_diff,s_pi_diff\n";
  char buf[128];
  for (const DecayPoint& p : pts) {
    std::snprintf(buf, sizeof buf, "%d,%.9e,%.9e\n", p.m, p.a_diff, p.s_pi_diff);
    text += buf;
  }
  std::fputs(text.c_str(), stdout);
  if (!cfg.outdir.empty()) {
    std::filesystem::create_directories(cfg.outdir);
    std::ofstream out(cfg.outdir + "/decay.csv", std::ios::binary);
    out << text;
  }
  return 0;
}

int run_spectra(const ExperimentConfig& cfg) {
  i64 nc = cfg.coarse_list.front();
  NestedMesh cmesh = build_nested_mesh(int(nc), int(cfg.n_fine / nc));
  CoefficientField field = make_field(cfg, cmesh);
  AuxiliarySpace aux = build_auxiliary_space(cmesh, field, cfg.k, cmesh.H,
                                             cfg.l, cfg.jobs,
                                             aux_selection(cfg));
  std::string text = "element,index,eigenvalue\n";
  char buf[96];
  for (const AuxElement& e : aux.elements)
    for (i64 j = 0; j < e.eigvals.size(); ++j) {
      std::snprintf(buf, sizeof buf, "%lld,%lld,%.12e\n", (long long)e.element,
                    (long long)j, e.eigvals[j]);
      text += buf;
    }
  std::snprintf(buf, sizeof buf, "Lambda,,%.12e\n", aux.Lambda);
  text += buf;
  std::fputs(text.c_str(), stdout);
  if (!cfg.outdir.empty()) {
    std::filesystem::create_directories(cfg.outdir);
    std::ofstream out(cfg.outdir + "/spectra.csv", std::ios::binary);
    out << text;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multiscale solver for the heterogeneous Maxwell impedance problem"};
  app.require_subcommand(1);
  CliOptions opt;
  bool fine_only = false;

  CLI::App* solve = app.add_subcommand("solve", "one fine or multiscale solve");
  solve->add_flag("--fine-only", fine_only, "stop after the fine reference solve");
  CLI::App* table1 = app.add_subcommand("table1", "homogeneous benchmark sweep");
  CLI::App* table2 = app.add_subcommand("table2", "wave-number sweep");
  CLI::App* table3 = app.add_subcommand("table3", "random-cube medium sweep");
  CLI::App* table4 = app.add_subcommand("table4", "periodic-rod medium sweep");
  CLI::App* table5 = app.add_subcommand("table5", "contrast sweep");
  CLI::App* decay = app.add_subcommand("decay", "basis decay profile");
  CLI::App* spectra = app.add_subcommand("spectra", "per-element eigenvalues");
  for (CLI::App* cmd : {solve, table1, table2, table3, table4, table5, decay, spectra})
    add_common_flags(cmd, opt);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  ExperimentConfig cfg;
  try {
    cfg = build_config(opt);
  } catch (const std::exception& ex) {
    std::fprintf(stderr, "error: %s\n", ex.what());
    return 2;
  }

  try {
    if (opt.check_resolution) print_resolution_status(cfg);
    if (solve->parsed()) return run_solve(cfg, fine_only);
    if (table1->parsed()) {
      write_family_report(cfg, run_homogeneous(cfg), "table1");
      return 0;
    }
    if (table2->parsed()) {
      write_family_report(cfg, run_wave_sweep(cfg), "table2");
      return 0;
    }
    if (table3->parsed()) {
      write_family_report(cfg, run_model1(cfg), "table3");
      return 0;
    }
    if (table4->parsed()) {
      write_family_report(cfg, run_model2(cfg), "table4");
      return 0;
    }
    if (table5->parsed()) {
      write_family_report(cfg, run_contrast_sweep(cfg), "table5");
      return 0;
    }
    if (decay->parsed()) return run_decay(cfg);
    if (spectra->parsed()) return run_spectra(cfg);
  } catch (const std::exception& ex) {
    std::fprintf(stderr, "error: %s\n", ex.what());
    return 1;
  }
  return 0;
}
