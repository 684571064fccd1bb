#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <unistd.h>

#include "support/oracles.hpp"

using namespace maxms;
using Catch::Matchers::ContainsSubstring;

namespace {

std::string temp_dir(const char* tag) {
  static int counter = 0;
  std::string dir = "/tmp/maxms-harness-" + std::to_string(::getpid()) + "-" +
                    tag + "-" + std::to_string(counter++);
  std::filesystem::create_directories(dir);
  return dir;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// Small enough to run in milliseconds, big enough to exercise every stage.
ExperimentConfig tiny_config() {
  ExperimentConfig cfg;
  cfg.n_fine = 4;
  cfg.coarse_list = {2};
  cfg.m_list = {1};
  cfg.l = 2;
  cfg.k = 4.0;
  return cfg;
}

}  // namespace

TEST_CASE("config text parsing covers every key") {
  std::string text =
      "# experiment setup\n"
      "model = periodic_rods\n"
      "voxel_path = /data/mu.vox\n"
      "inclusion = 500   # high contrast\n"
      "background = 2\n"
      "cube_count = 3\n"
      "cube_side = 2\n"
      "rod_count = 4\n"
      "rod_radius = 0.11\n"
      "seed = 7\n"
      "k = 8\n"
      "n_fine = 16\n"
      "coarse = 4, 8\n"
      "m = 1,2\n"
      "l = 3\n"
      "outdir = /tmp/somewhere\n"
      "strict_trace = true\n"
      "fine_reference = on\n"
      "aux_ascending = 1\n"
      "basis_cache = true\n"
      "cache_dir = /tmp/cache\n"
      "timings = off\n"
      "jobs = 2\n"
      "contrast = 10,100\n"
      "wave = 4:4, 8:8\n"
      "export_slices = false\n"
      "rel_tol = 1e-9\n"
      "patch_rel_tol = 1e-6\n"
      "max_iterations = 500\n"
      "umfpack_budget = 1e9\n"
      "umfpack_max_unknowns = 20000\n";
  ExperimentConfig cfg = parse_config_text(text);
  CHECK(cfg.model.kind == ModelKind::PERIODIC_RODS);
  CHECK(cfg.model.path == "/data/mu.vox");
  CHECK(cfg.model.inclusion_value == 500.0);
  CHECK(cfg.model.background_value == 2.0);
  CHECK(cfg.model.cube_count == 3);
  CHECK(cfg.model.cube_side == 2);
  CHECK(cfg.model.rod_count == 4);
  CHECK(cfg.model.rod_radius == 0.11);
  CHECK(cfg.rng_seed == 7);
  CHECK(cfg.model.rng_seed == 7);
  CHECK(cfg.k == 8.0);
  CHECK(cfg.n_fine == 16);
  CHECK(cfg.coarse_list == std::vector<i64>{4, 8});
  CHECK(cfg.m_list == std::vector<int>{1, 2});
  CHECK(cfg.l == 3);
  CHECK(cfg.outdir == "/tmp/somewhere");
  CHECK(cfg.strict_trace);
  CHECK(cfg.fine_reference);
  CHECK(cfg.aux_ascending);
  CHECK(cfg.basis_cache);
  CHECK(cfg.cache_dir == "/tmp/cache");
  CHECK_FALSE(cfg.timings);
  CHECK(cfg.jobs == 2);
  CHECK(cfg.contrast_list == std::vector<double>{10.0, 100.0});
  REQUIRE(cfg.wave_pairs.size() == 2);
  CHECK(cfg.wave_pairs[0] == std::pair<double, i64>{4.0, 4});
  CHECK(cfg.wave_pairs[1] == std::pair<double, i64>{8.0, 8});
  CHECK_FALSE(cfg.export_slices);
  CHECK(cfg.policy.rel_tol == 1e-9);
  CHECK(cfg.policy.patch_rel_tol == 1e-6);
  CHECK(cfg.policy.max_iterations == 500);
  CHECK(cfg.policy.umfpack_budget_bytes == 1e9);
  CHECK(cfg.policy.umfpack_max_unknowns == 20000);
}

TEST_CASE("config parsing reports precise errors") {
  CHECK_THROWS_WITH(parse_config_text("k = 4\nnot a kv line\n"),
                    ContainsSubstring("line 2"));
  CHECK_THROWS_WITH(parse_config_text("mystery = 1\n"),
                    ContainsSubstring("unknown key"));
  CHECK_THROWS_WITH(parse_config_text("timings = maybe\n"),
                    ContainsSubstring("bad boolean"));
  CHECK_THROWS_WITH(parse_config_text("k = fast\n"),
                    ContainsSubstring("bad number"));
  CHECK_THROWS_WITH(parse_config_text("k = 4x\n"),
                    ContainsSubstring("bad number"));
  CHECK_THROWS_WITH(parse_config_text("wave = 4-4\n"),
                    ContainsSubstring("k:coarse"));
  CHECK_THROWS_WITH(parse_config_text("model = isotropic\n"),
                    ContainsSubstring("unknown model kind"));
  CHECK_THROWS_AS(load_config_file("/nonexistent/maxms.conf"),
                  std::invalid_argument);

  // Comments and blank lines parse to the defaults.
  ExperimentConfig cfg = parse_config_text("\n# only comments\n\n");
  CHECK(cfg.k == 4.0);
  CHECK(cfg.coarse_list == std::vector<i64>{4, 8});
}

TEST_CASE("config files round-trip through the loader") {
  std::string dir = temp_dir("conf");
  std::string path = dir + "/exp.conf";
  {
    std::ofstream out(path);
    out << "k = 2\ncoarse = 2\nn_fine = 4\nm = 0,1\n";
  }
  ExperimentConfig cfg = load_config_file(path);
  CHECK(cfg.k == 2.0);
  CHECK(cfg.coarse_list == std::vector<i64>{2});
  CHECK(cfg.n_fine == 4);
  CHECK(cfg.m_list == std::vector<int>{0, 1});
  std::filesystem::remove_all(dir);
}

TEST_CASE("validate_config rejects inconsistent setups") {
  CHECK_NOTHROW(validate_config(ExperimentConfig{}));

  auto broken = [](auto mutate) {
    ExperimentConfig cfg;
    mutate(cfg);
    return cfg;
  };
  CHECK_THROWS_AS(validate_config(broken([](auto& c) { c.k = 0.0; })),
                  std::invalid_argument);
  CHECK_THROWS_AS(validate_config(broken([](auto& c) { c.n_fine = 0; })),
                  std::invalid_argument);
  CHECK_THROWS_AS(validate_config(broken([](auto& c) { c.coarse_list = {}; })),
                  std::invalid_argument);
  CHECK_THROWS_AS(validate_config(broken([](auto& c) { c.coarse_list = {5}; })),
                  std::invalid_argument);  // 32 % 5 != 0
  CHECK_THROWS_AS(validate_config(broken([](auto& c) { c.m_list = {}; })),
                  std::invalid_argument);
  CHECK_THROWS_AS(validate_config(broken([](auto& c) { c.m_list = {-1}; })),
                  std::invalid_argument);
  CHECK_THROWS_AS(validate_config(broken([](auto& c) { c.l = 0; })),
                  std::invalid_argument);
  CHECK_THROWS_AS(
      validate_config(broken([](auto& c) { c.contrast_list = {0.0}; })),
      std::invalid_argument);
  CHECK_THROWS_AS(
      validate_config(broken([](auto& c) { c.wave_pairs = {{4.0, 3}}; })),
      std::invalid_argument);
  CHECK_THROWS_AS(validate_config(broken([](auto& c) { c.jobs = 0; })),
                  std::invalid_argument);
}

TEST_CASE("resolve_outdir honors flag, config, environment, default") {
  const char* saved = std::getenv("MAXMS_OUTDIR");
  std::string saved_copy = saved ? saved : "";

  ::setenv("MAXMS_OUTDIR", "/tmp/env-out", 1);
  CHECK(resolve_outdir("/tmp/flag", "/tmp/conf") == "/tmp/flag");
  CHECK(resolve_outdir("", "/tmp/conf") == "/tmp/conf");
  CHECK(resolve_outdir("", "") == "/tmp/env-out");
  ::unsetenv("MAXMS_OUTDIR");
  CHECK(resolve_outdir("", "") == "./out");

  if (saved) ::setenv("MAXMS_OUTDIR", saved_copy.c_str(), 1);
}

TEST_CASE("report rows format with pinned precision") {
  CHECK(std::string(csv_header()) ==
        "family,k,H,h,m,l,contrast,ref_kind,err_a_rel,err_l2_rel,"
        "lambda_min_next,rescheck,t_spectral_s,t_basis_s,t_coarse_s,t_fine_s");

  ReportRow r;
  r.family = "homogeneous";
  r.k = 4.0;
  r.H = 0.25;
  r.h = 0.03125;
  r.m = 2;
  r.l = 4;
  r.contrast = 1000.0;
  r.ref_kind = "fine";
  r.err_a_rel = 0.123456789;
  r.err_l2_rel = 0.000123456789;
  r.lambda_min_next = 31.41592653;
  r.rescheck = 0.35;
  r.t_spectral_s = 1.234567;
  CHECK(format_row(r) ==
        "homogeneous,4,0.25,0.03125,2,4,1000,fine,1.234568e-01,1.234568e-04,"
        "3.141592653e+01,3.500000e-01,1.235,0.000,0.000,0.000");
}

TEST_CASE("emit_report writes a CSV and a summary, byte-stable") {
  std::string dir = temp_dir("report");
  std::string path = dir + "/rows.csv";

  ErrorReport empty;
  emit_report(empty, path);
  CHECK(read_file(path) == std::string(csv_header()) + "\n");
  CHECK(std::filesystem::exists(dir + "/rows.summary.txt"));

  ReportRow r;
  r.family = "wave";
  r.k = 8.0;
  r.H = 0.125;
  r.h = 0.125;
  r.m = -1;
  r.ref_kind = "exact";
  r.err_a_rel = 0.5;
  ErrorReport rep;
  rep.rows = {r};
  emit_report(rep, path);
  std::string first = read_file(path);
  emit_report(rep, path);
  CHECK(read_file(path) == first);
  CHECK(first == std::string(csv_header()) + "\n" + format_row(r) + "\n");

  CHECK_THROWS_AS(emit_report(rep, dir + "/missing/rows.csv"),
                  std::runtime_error);
  std::filesystem::remove_all(dir);
}

TEST_CASE("compute_errors reports relative norms against the reference") {
  NestedMesh mesh = build_nested_mesh(2, 1);
  CoefficientField field = oracle::random_field(mesh, 601, 0.5, 4.0);
  OperatorSet ops = assemble_operators(mesh, field, full_region(mesh), 4.0,
                                       mesh.H);
  Rng rng(602);
  VectorXcd u = rng.complex_vector(mesh.num_edges());
  NormErrors self = compute_errors(ops, u, u);
  CHECK(self.a_abs == 0.0);
  CHECK(self.l2_rel == 0.0);

  VectorXcd v = rng.complex_vector(mesh.num_edges());
  NormErrors ne = compute_errors(ops, u, v);
  CHECK(std::abs(ne.a_abs - norm_a(ops, VectorXcd(u - v))) <= 1e-14 * ne.a_abs);
  CHECK(std::abs(ne.a_rel - ne.a_abs / norm_a(ops, u)) <= 1e-14 * ne.a_rel);
  CHECK(std::abs(ne.l2_rel - ne.l2_abs / norm_l2(ops, u)) <= 1e-14 * ne.l2_rel);
  CHECK_THROWS_AS(compute_errors(ops, u, VectorXcd::Zero(3)),
                  std::invalid_argument);
}

TEST_CASE("fem rows carry the reference-comparison conventions") {
  ExperimentConfig cfg = tiny_config();
  ReportRow r = fem_row(cfg, "homogeneous", cfg.k, 4);
  CHECK(r.family == "homogeneous");
  CHECK(r.m == -1);
  CHECK(r.l == 0);
  CHECK(r.contrast == 1.0);
  CHECK(r.ref_kind == "exact");
  CHECK(r.H == 0.25);
  CHECK(r.h == r.H);
  CHECK(r.err_a_rel > 0.0);
  CHECK(r.err_a_rel < 1.0);
  // Timing columns stay zero unless explicitly enabled.
  CHECK(r.t_fine_s == 0.0);
}

TEST_CASE("basis cache round-trips bit for bit and rejects stale headers") {
  NestedMesh mesh = build_nested_mesh(2, 2);
  CoefficientField field = oracle::random_field(mesh, 603, 0.5, 6.0);
  const double k = 4.0;
  AuxiliarySpace aux = build_auxiliary_space(mesh, field, k, mesh.H, 2);
  MsBasis basis = build_basis(mesh, field, k, mesh.H, aux, 1);

  std::string key = basis_cache_key(field, k, mesh, 1, 2, false,
                                    AuxSelection::DEFLATE_GRADIENTS, 1e-7);
  CHECK(key == basis_cache_key(field, k, mesh, 1, 2, false,
                               AuxSelection::DEFLATE_GRADIENTS, 1e-7));
  CHECK(key != basis_cache_key(field, k, mesh, 2, 2, false,
                               AuxSelection::DEFLATE_GRADIENTS, 1e-7));
  CHECK(key != basis_cache_key(field, k, mesh, 1, 2, true,
                               AuxSelection::DEFLATE_GRADIENTS, 1e-7));

  std::string dir = temp_dir("cache");
  std::string path = basis_cache_path(dir, key);
  save_cached_basis(path, key, basis);
  MsBasis loaded;
  REQUIRE(load_cached_basis(path, key, mesh, 1, 2, false, &loaded));
  REQUIRE(loaded.entries.size() == basis.entries.size());
  for (std::size_t i = 0; i < basis.entries.size(); ++i) {
    CHECK(loaded.entries[i].element == basis.entries[i].element);
    CHECK(loaded.entries[i].mode == basis.entries[i].mode);
    CHECK(loaded.entries[i].global_flag == basis.entries[i].global_flag);
    CHECK((loaded.entries[i].t - basis.entries[i].t).norm() == 0.0);
  }

  // A different key is a miss, not an error; so is a truncated payload.
  MsBasis miss;
  CHECK_FALSE(load_cached_basis(path, key + "x", mesh, 1, 2, false, &miss));
  std::string all = read_file(path);
  {
    std::ofstream out(path, std::ios::binary);
    out << all.substr(0, all.size() / 2);
  }
  CHECK_FALSE(load_cached_basis(path, key, mesh, 1, 2, false, &miss));
  std::filesystem::remove_all(dir);
}

TEST_CASE("load_or_build_basis caches on first use and reuses afterwards") {
  ExperimentConfig cfg = tiny_config();
  cfg.basis_cache = true;
  cfg.cache_dir = temp_dir("autocache");

  NestedMesh mesh = build_nested_mesh(2, 2);
  CoefficientField field = oracle::random_field(mesh, 604, 0.5, 6.0);
  AuxiliarySpace aux = build_auxiliary_space(mesh, field, cfg.k, mesh.H, cfg.l);
  MsBasis first = load_or_build_basis(cfg, mesh, field, cfg.k, aux, 1);
  CHECK(std::filesystem::directory_iterator(cfg.cache_dir) !=
        std::filesystem::directory_iterator{});
  MsBasis second = load_or_build_basis(cfg, mesh, field, cfg.k, aux, 1);
  REQUIRE(second.entries.size() == first.entries.size());
  for (std::size_t i = 0; i < first.entries.size(); ++i)
    CHECK((second.entries[i].t - first.entries[i].t).norm() == 0.0);
  std::filesystem::remove_all(cfg.cache_dir);
}

TEST_CASE("slice export writes an n-by-n magnitude grid") {
  NestedMesh mesh = build_nested_mesh(2, 2);
  Benchmark bm = exact_benchmark(4.0);
  VectorXcd dofs = interpolate_edge(mesh, bm.u);
  std::string dir = temp_dir("slice");
  std::string path = dir + "/slice.csv";
  export_slice(mesh, dofs, path);

  std::ifstream in(path);
  REQUIRE(in);
  std::string line;
  i64 rows = 0;
  while (std::getline(in, line)) {
    auto cells = split_list(line);
    REQUIRE(i64(cells.size()) == mesh.n);
    for (i64 x = 0; x < mesh.n; ++x) {
      Eigen::Vector3d p((x + 0.5) * mesh.h, (rows + 0.5) * mesh.h, 0.5);
      double want = evaluate_field(mesh, dofs, p).norm();
      CHECK(std::abs(std::stod(cells[std::size_t(x)]) - want) <=
            1e-5 * std::max(1.0, want));
    }
    ++rows;
  }
  CHECK(rows == mesh.n);
  std::filesystem::remove_all(dir);
}

TEST_CASE("the homogeneous family emits one FEM row and one row per m") {
  ExperimentConfig cfg = tiny_config();
  cfg.m_list = {1, 2};
  ErrorReport rep = run_homogeneous(cfg);
  REQUIRE(rep.rows.size() == 3);
  CHECK(rep.rows[0].m == -1);
  CHECK(rep.rows[1].m == 1);
  CHECK(rep.rows[2].m == 2);
  for (const ReportRow& r : rep.rows) {
    CHECK(r.family == "homogeneous");
    CHECK(r.k == cfg.k);
    CHECK(r.ref_kind == "exact");
    CHECK(r.err_a_rel >= 0.0);
  }
  CHECK(rep.rows[1].H == 0.5);
  CHECK(rep.rows[1].h == 0.25);
  CHECK(rep.rows[1].l == cfg.l);
  CHECK(rep.rows[1].lambda_min_next > 0.0);
  CHECK(rep.rows[1].rescheck > 0.0);
  // At nc = 2 every patch saturates, so m = 1 and m = 2 coincide.
  CHECK(rep.rows[1].err_a_rel == rep.rows[2].err_a_rel);
}

TEST_CASE("experiment rows are byte-identical across worker counts") {
  ExperimentConfig cfg = tiny_config();
  ErrorReport serial = run_homogeneous(cfg);
  cfg.jobs = 2;
  ErrorReport threaded = run_homogeneous(cfg);
  REQUIRE(serial.rows.size() == threaded.rows.size());
  for (std::size_t i = 0; i < serial.rows.size(); ++i)
    CHECK(format_row(serial.rows[i]) == format_row(threaded.rows[i]));
}

TEST_CASE("the wave sweep orders rows by wave pair") {
  ExperimentConfig cfg = tiny_config();
  cfg.wave_pairs = {{2.0, 2}, {4.0, 4}};
  ErrorReport rep = run_wave_sweep(cfg);
  REQUIRE(rep.rows.size() == 4);
  CHECK(rep.rows[0].k == 2.0);
  CHECK(rep.rows[0].m == -1);
  CHECK(rep.rows[1].k == 2.0);
  CHECK(rep.rows[1].m == 1);
  CHECK(rep.rows[2].k == 4.0);
  CHECK(rep.rows[2].m == -1);
  CHECK(rep.rows[3].k == 4.0);
  CHECK(rep.rows[3].m == 1);
  for (const ReportRow& r : rep.rows) CHECK(r.family == "wave");
  CHECK(rep.rows[1].H == 0.5);
  CHECK(rep.rows[3].H == 0.25);
}

TEST_CASE("heterogeneous runs use the fine reference and export slices") {
  ExperimentConfig cfg = tiny_config();
  cfg.model.cube_count = 2;
  cfg.model.cube_side = 1;
  cfg.model.inclusion_value = 100.0;
  cfg.outdir = temp_dir("hetero");
  ErrorReport rep = run_model1(cfg);
  REQUIRE(rep.rows.size() == 1);
  CHECK(rep.rows[0].family == "model1");
  CHECK(rep.rows[0].ref_kind == "fine");
  CHECK(rep.rows[0].contrast == 100.0);
  CHECK(std::filesystem::exists(cfg.outdir + "/model1_fine_slice.csv"));
  CHECK(std::filesystem::exists(cfg.outdir + "/model1_ms_slice.csv"));
  std::filesystem::remove_all(cfg.outdir);
}

TEST_CASE("the contrast sweep walks the inclusion values in order") {
  ExperimentConfig cfg = tiny_config();
  cfg.contrast_list = {1.0, 100.0};
  cfg.model.rod_count = 2;
  cfg.model.rod_radius = 0.2;
  cfg.export_slices = false;
  ErrorReport rep = run_contrast_sweep(cfg);
  REQUIRE(rep.rows.size() == 2);
  CHECK(rep.rows[0].family == "contrast");
  // Unit inclusions collapse to the homogeneous field.
  CHECK(rep.rows[0].contrast == 1.0);
  CHECK(rep.rows[1].contrast == 100.0);
  CHECK(rep.rows[0].ref_kind == "fine");
}
