#ifndef MAXMS_HARNESS_HPP
#define MAXMS_HARNESS_HPP

#include <filesystem>

#include "maxms/coarse.hpp"
#include "maxms/config.hpp"
#include "maxms/fine.hpp"
#include "maxms/report.hpp"

// Experiment drivers. Each family produces an ErrorReport with one row per
// parameter combination, in a deterministic order; CSV emission lives in
// report.hpp.

namespace maxms {

inline AuxSelection aux_selection(const ExperimentConfig& cfg) {
  return cfg.aux_ascending ? AuxSelection::ASCENDING
                           : AuxSelection::DEFLATE_GRADIENTS;
}

// Shared fine-scale state for one (coefficient field, k) pair. Every coarse
// mesh in a sweep nests in the same fine grid, so the reference solve, the
// full-domain operators, and the load are computed once and reused; only the
// auxiliary space and the basis depend on the coarse mesh.
struct FineCase {
  NestedMesh mesh;
  CoefficientField field;
  OperatorSet ops;
  VectorXcd load;
  VectorXcd u_fine;
  VectorXcd u_exact;  // empty when no closed form exists
  double t_fine = 0.0;
};

inline FineCase make_fine_case(const ExperimentConfig& cfg,
                               const ModelSpec& spec, double k, i64 nc,
                               const VolumeFn& f, const BoundaryFn& g,
                               const VolumeFn& exact) {
  FineCase fc;
  fc.mesh = build_nested_mesh(int(nc), int(cfg.n_fine / nc));
  fc.field = spec.kind == ModelKind::VOXEL_FILE ? load_voxels(spec.path, fc.mesh)
                                                : generate(spec, fc.mesh);
  fc.ops = assemble_operators(fc.mesh, fc.field, full_region(fc.mesh), k,
                              fc.mesh.H);
  fc.load = assemble_load(fc.mesh, full_region(fc.mesh), f, g);
  Timer t;
  fc.u_fine = solve_fine(fc.ops, fc.load, cfg.policy).u;
  fc.t_fine = t.seconds();
  if (exact) fc.u_exact = interpolate_edge(fc.mesh, exact);
  return fc;
}

// Basis cache. One file per key; the header repeats the key verbatim, so a
// hash collision in the file name degrades to a miss, never to wrong data.
inline std::string basis_cache_key(const CoefficientField& field, double k,
                                   const NestedMesh& cmesh, int m, int l,
                                   bool strict, AuxSelection sel,
                                   double patch_rel_tol) {
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "MAXMS-BASIS v1 field=%016llx k=%.17g nc=%d n=%d m=%d l=%d "
                "strict=%d sel=%d tol=%.17g",
                (unsigned long long)field.hash(), k, cmesh.n_coarse, cmesh.n,
                m, l, strict ? 1 : 0, int(sel), patch_rel_tol);
  return buf;
}

inline std::string basis_cache_path(const std::string& dir,
                                    const std::string& key) {
  char name[32];
  std::snprintf(name, sizeof name, "%016llx.basis",
                (unsigned long long)std::hash<std::string>{}(key));
  return dir + "/" + name;
}

inline bool load_cached_basis(const std::string& path, const std::string& key,
                              const NestedMesh& cmesh, int m, int l,
                              bool strict, MsBasis* out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return false;
  std::string header;
  std::getline(in, header);
  if (header != key) return false;
  i64 count = 0;
  in.read(reinterpret_cast<char*>(&count), sizeof count);
  if (!in || count != cmesh.num_coarse() * i64(l)) return false;
  MsBasis basis;
  basis.m = m;
  basis.l = l;
  basis.strict = strict;
  basis.entries.resize(std::size_t(count));
  std::shared_ptr<const Patch> patch;
  for (i64 p = 0; p < count; ++p) {
    i64 element = -1, len = 0;
    std::int32_t mode = 0;
    std::uint8_t global = 0;
    double coerc = 0.0;
    in.read(reinterpret_cast<char*>(&element), sizeof element);
    in.read(reinterpret_cast<char*>(&mode), sizeof mode);
    in.read(reinterpret_cast<char*>(&global), sizeof global);
    in.read(reinterpret_cast<char*>(&coerc), sizeof coerc);
    in.read(reinterpret_cast<char*>(&len), sizeof len);
    if (!in || element != p / l || mode != p % l) return false;
    if (mode == 0)
      patch = std::make_shared<Patch>(extract_patch(cmesh, element, m));
    if (len != patch->num_edges()) return false;
    BasisEntry& e = basis.entries[std::size_t(p)];
    e.element = element;
    e.mode = int(mode);
    e.m = m;
    e.global_flag = global != 0;
    e.coercivity_ratio = coerc;
    e.patch = patch;
    e.t.resize(len);
    in.read(reinterpret_cast<char*>(e.t.data()),
            std::streamsize(std::size_t(len) * sizeof(cdouble)));
    if (!in) return false;
  }
  *out = std::move(basis);
  return true;
}

inline void save_cached_basis(const std::string& path, const std::string& key,
                              const MsBasis& basis) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("basis cache: cannot open " + path);
  out << key << "\n";
  i64 count = i64(basis.entries.size());
  out.write(reinterpret_cast<const char*>(&count), sizeof count);
  for (const BasisEntry& e : basis.entries) {
    std::int32_t mode = e.mode;
    std::uint8_t global = e.global_flag ? 1 : 0;
    i64 len = e.t.size();
    out.write(reinterpret_cast<const char*>(&e.element), sizeof e.element);
    out.write(reinterpret_cast<const char*>(&mode), sizeof mode);
    out.write(reinterpret_cast<const char*>(&global), sizeof global);
    out.write(reinterpret_cast<const char*>(&e.coercivity_ratio),
              sizeof e.coercivity_ratio);
    out.write(reinterpret_cast<const char*>(&len), sizeof len);
    out.write(reinterpret_cast<const char*>(e.t.data()),
              std::streamsize(std::size_t(len) * sizeof(cdouble)));
  }
  if (!out) throw std::runtime_error("basis cache: write failed for " + path);
}

inline MsBasis load_or_build_basis(const ExperimentConfig& cfg,
                                   const NestedMesh& cmesh,
                                   const CoefficientField& field, double k,
                                   const AuxiliarySpace& aux, int m,
                                   BasisBuildStats* stats = nullptr) {
  if (!cfg.basis_cache)
    return build_basis(cmesh, field, k, cmesh.H, aux, m, cfg.strict_trace,
                       cfg.policy, cfg.jobs, stats);
  std::string dir = cfg.cache_dir;
  if (dir.empty())
    dir = (cfg.outdir.empty() ? std::string(".") : cfg.outdir) + "/basis-cache";
  std::filesystem::create_directories(dir);
  std::string key = basis_cache_key(field, k, cmesh, m, aux.l, cfg.strict_trace,
                                    aux_selection(cfg), cfg.policy.patch_rel_tol);
  std::string path = basis_cache_path(dir, key);
  MsBasis basis;
  if (load_cached_basis(path, key, cmesh, m, aux.l, cfg.strict_trace, &basis))
    return basis;
  basis = build_basis(cmesh, field, k, cmesh.H, aux, m, cfg.strict_trace,
                      cfg.policy, cfg.jobs, stats);
  save_cached_basis(path, key, basis);
  return basis;
}

// One multiscale row. Timing columns stay zero unless enabled, which keeps
// the CSV byte-identical across machines and worker counts.
inline ReportRow ms_row(const ExperimentConfig& cfg, const std::string& family,
                        double k, const NestedMesh& cmesh, const FineCase& fc,
                        const AuxiliarySpace& aux, double t_spectral, int m,
                        VectorXcd* u_ms_out = nullptr) {
  Timer t;
  MsBasis basis = load_or_build_basis(cfg, cmesh, fc.field, k, aux, m);
  double t_basis = t.seconds();
  t.reset();
  CoarseProblem cp = assemble_coarse(fc.ops, basis, fc.load);
  double t_coarse = t.seconds();

  bool use_exact = !cfg.fine_reference && fc.u_exact.size() > 0;
  NormErrors ne =
      compute_errors(fc.ops, use_exact ? fc.u_exact : fc.u_fine, cp.u_ms);
  ReportRow r;
  r.family = family;
  r.k = k;
  r.H = cmesh.H;
  r.h = cmesh.h;
  r.m = m;
  r.l = aux.l;
  r.contrast = fc.field.contrast();
  r.ref_kind = use_exact ? "exact" : "fine";
  r.err_a_rel = ne.a_rel;
  r.err_l2_rel = ne.l2_rel;
  r.lambda_min_next = aux.Lambda;
  r.rescheck = resolution_check(k, cmesh.H, fc.field.mu_max, aux.Lambda).value;
  if (cfg.timings) {
    r.t_spectral_s = t_spectral;
    r.t_basis_s = t_basis;
    r.t_coarse_s = t_coarse;
    r.t_fine_s = fc.t_fine;
  }
  if (u_ms_out) *u_ms_out = std::move(cp.u_ms);
  return r;
}

// Plain FEM comparison on the coarse grid itself, marked m = -1: the coarse
// mesh is the whole discretization, so h = H and no multiscale machinery runs.
// Only meaningful for the homogeneous benchmark, where the exact solution
// supplies the reference on any mesh.
inline ReportRow fem_row(const ExperimentConfig& cfg, const std::string& family,
                         double k, i64 nc) {
  NestedMesh mesh = build_nested_mesh(int(nc), 1);
  ModelSpec hom;
  CoefficientField field = generate(hom, mesh);
  OperatorSet ops = assemble_operators(mesh, field, full_region(mesh), k, mesh.H);
  Benchmark bm = exact_benchmark(k);
  VectorXcd load = assemble_load(mesh, full_region(mesh), bm.f, bm.g);
  Timer t;
  FineSolution sol = solve_fine(ops, load, cfg.policy);
  double tf = t.seconds();
  NormErrors ne = compute_errors(ops, interpolate_edge(mesh, bm.u), sol.u);
  ReportRow r;
  r.family = family;
  r.k = k;
  r.H = mesh.H;
  r.h = mesh.h;
  r.m = -1;
  r.l = 0;
  r.contrast = 1.0;
  r.ref_kind = "exact";
  r.err_a_rel = ne.a_rel;
  r.err_l2_rel = ne.l2_rel;
  if (cfg.timings) r.t_fine_s = tf;
  return r;
}

// |u| on the z = 0.5 plane, sampled at the in-plane cell centers; plain CSV
// grid, one row per y, x across the columns. Points on the plane itself take
// the lower cell's values (see evaluate_field).
inline void export_slice(const NestedMesh& mesh, const VectorXcd& dofs,
                         const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("export_slice: cannot open " + path);
  char buf[32];
  for (i64 y = 0; y < mesh.n; ++y) {
    for (i64 x = 0; x < mesh.n; ++x) {
      Eigen::Vector3d p((x + 0.5) * mesh.h, (y + 0.5) * mesh.h, 0.5);
      double mag = evaluate_field(mesh, dofs, p).norm();
      std::snprintf(buf, sizeof buf, "%.6e", mag);
      out << (x ? "," : "") << buf;
    }
    out << "\n";
  }
  if (!out) throw std::runtime_error("export_slice: write failed for " + path);
}

inline ErrorReport run_homogeneous(const ExperimentConfig& cfg) {
  validate_config(cfg);
  Benchmark bm = exact_benchmark(cfg.k);
  ModelSpec hom;
  FineCase fc = make_fine_case(cfg, hom, cfg.k, cfg.coarse_list.front(), bm.f,
                               bm.g, bm.u);
  ErrorReport rep;
  for (i64 nc : cfg.coarse_list) {
    rep.rows.push_back(fem_row(cfg, "homogeneous", cfg.k, nc));
    NestedMesh cmesh = build_nested_mesh(int(nc), int(cfg.n_fine / nc));
    Timer t;
    AuxiliarySpace aux = build_auxiliary_space(cmesh, fc.field, cfg.k, cmesh.H,
                                               cfg.l, cfg.jobs,
                                               aux_selection(cfg));
    double ts = t.seconds();
    for (int m : cfg.m_list)
      rep.rows.push_back(ms_row(cfg, "homogeneous", cfg.k, cmesh, fc, aux, ts, m));
  }
  return rep;
}

inline ErrorReport run_wave_sweep(const ExperimentConfig& cfg) {
  validate_config(cfg);
  ErrorReport rep;
  ModelSpec hom;
  for (const auto& [k, nc] : cfg.wave_pairs) {
    Benchmark bm = exact_benchmark(k);
    rep.rows.push_back(fem_row(cfg, "wave", k, nc));
    FineCase fc = make_fine_case(cfg, hom, k, nc, bm.f, bm.g, bm.u);
    Timer t;
    AuxiliarySpace aux = build_auxiliary_space(fc.mesh, fc.field, k, fc.mesh.H,
                                               cfg.l, cfg.jobs,
                                               aux_selection(cfg));
    double ts = t.seconds();
    for (int m : cfg.m_list)
      rep.rows.push_back(ms_row(cfg, "wave", k, fc.mesh, fc, aux, ts, m));
  }
  return rep;
}

// Heterogeneous families share one driver: unit volume source, zero impedance
// data, fine-solve reference. The final (largest coarse mesh, last m) cell
// exports midplane slices of the reference and multiscale fields.
inline ErrorReport run_heterogeneous(const ExperimentConfig& cfg,
                                     ModelKind kind, const std::string& family) {
  validate_config(cfg);
  ModelSpec spec = cfg.model;
  spec.kind = kind;
  spec.rng_seed = cfg.rng_seed;
  VolumeFn f = [](const Eigen::Vector3d&) {
    return Eigen::Vector3cd(1.0, 1.0, 1.0);
  };
  FineCase fc = make_fine_case(cfg, spec, cfg.k, cfg.coarse_list.front(), f,
                               {}, {});
  ErrorReport rep;
  VectorXcd u_ms_last;
  for (i64 nc : cfg.coarse_list) {
    NestedMesh cmesh = build_nested_mesh(int(nc), int(cfg.n_fine / nc));
    Timer t;
    AuxiliarySpace aux = build_auxiliary_space(cmesh, fc.field, cfg.k, cmesh.H,
                                               cfg.l, cfg.jobs,
                                               aux_selection(cfg));
    double ts = t.seconds();
    for (int m : cfg.m_list) {
      bool last = nc == cfg.coarse_list.back() && m == cfg.m_list.back();
      rep.rows.push_back(ms_row(cfg, family, cfg.k, cmesh, fc, aux, ts, m,
                                last ? &u_ms_last : nullptr));
    }
  }
  if (cfg.export_slices && !cfg.outdir.empty() && u_ms_last.size() > 0) {
    std::filesystem::create_directories(cfg.outdir);
    export_slice(fc.mesh, fc.u_fine, cfg.outdir + "/" + family + "_fine_slice.csv");
    export_slice(fc.mesh, u_ms_last, cfg.outdir + "/" + family + "_ms_slice.csv");
  }
  return rep;
}

inline ErrorReport run_model1(const ExperimentConfig& cfg) {
  return run_heterogeneous(cfg, ModelKind::RANDOM_CUBES, "model1");
}

inline ErrorReport run_model2(const ExperimentConfig& cfg) {
  return run_heterogeneous(cfg, ModelKind::PERIODIC_RODS, "model2");
}

// Contrast sweep at the finest configured coarse mesh: one column of rows per
// inclusion value.
inline ErrorReport run_contrast_sweep(const ExperimentConfig& cfg) {
  validate_config(cfg);
  i64 nc = cfg.coarse_list.back();
  VolumeFn f = [](const Eigen::Vector3d&) {
    return Eigen::Vector3cd(1.0, 1.0, 1.0);
  };
  ErrorReport rep;
  for (double ups : cfg.contrast_list) {
    ModelSpec spec = cfg.model;
    spec.kind = ModelKind::PERIODIC_RODS;
    spec.inclusion_value = ups;
    FineCase fc = make_fine_case(cfg, spec, cfg.k, nc, f, {}, {});
    Timer t;
    AuxiliarySpace aux = build_auxiliary_space(fc.mesh, fc.field, cfg.k,
                                               fc.mesh.H, cfg.l, cfg.jobs,
                                               aux_selection(cfg));
    double ts = t.seconds();
    for (int m : cfg.m_list)
      rep.rows.push_back(ms_row(cfg, "contrast", cfg.k, fc.mesh, fc, aux, ts, m));
  }
  return rep;
}

}  // namespace maxms

#endif
