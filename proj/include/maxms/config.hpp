#ifndef MAXMS_CONFIG_HPP
#define MAXMS_CONFIG_HPP

#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "maxms/coeff.hpp"
#include "maxms/solver.hpp"

namespace maxms {

struct ExperimentConfig {
  ModelSpec model;
  double k = 4.0;
  std::vector<i64> coarse_list = {4, 8};  // coarse cells per side, H = 1/n
  i64 n_fine = 32;                        // global fine cells per side
  std::vector<int> m_list = {1, 2, 3};
  int l = 4;
  SolvePolicy policy;
  std::uint64_t rng_seed = 1;
  std::string outdir;
  bool strict_trace = false;    // drop impedance DOFs on patch boundaries too
  bool fine_reference = false;  // compare against the fine solve even when an
                                // exact solution exists
  bool aux_ascending = false;   // retain the raw pencil's lowest band instead
                                // of deflating the gradient block
  bool basis_cache = false;
  std::string cache_dir;
  bool timings = false;  // timing columns stay 0.000 unless enabled
  int jobs = 1;
  std::vector<double> contrast_list = {10.0, 1000.0};
  // (k, coarse cells) rows with k H held near one; the larger pairs need a
  // coarse space too big for a desk run and live behind the paper scale.
  std::vector<std::pair<double, i64>> wave_pairs = {{4, 4}, {8, 8}};
  bool export_slices = true;
};

inline void apply_paper_scale(ExperimentConfig& cfg) {
  cfg.n_fine = 64;
  cfg.coarse_list = {4, 8, 16};
  cfg.m_list = {1, 2, 3, 4};
  cfg.wave_pairs = {{4, 4}, {8, 8}, {16, 16}, {32, 32}};
  cfg.contrast_list = {10.0, 100.0, 1000.0, 10000.0};
}

inline void validate_config(const ExperimentConfig& cfg) {
  if (!(cfg.k > 0.0))
    throw std::invalid_argument("config: k must be positive");
  if (cfg.n_fine < 1)
    throw std::invalid_argument("config: n_fine must be at least 1");
  if (cfg.coarse_list.empty())
    throw std::invalid_argument("config: empty coarse mesh list");
  for (i64 nc : cfg.coarse_list) {
    if (nc < 1)
      throw std::invalid_argument("config: coarse cell count must be >= 1");
    if (cfg.n_fine % nc != 0)
      throw std::invalid_argument(
          "config: fine mesh does not nest in coarse mesh (n_fine = " +
          std::to_string(cfg.n_fine) + ", coarse = " + std::to_string(nc) +
          ")");
  }
  if (cfg.m_list.empty())
    throw std::invalid_argument("config: empty m list");
  for (int m : cfg.m_list)
    if (m < 0)
      throw std::invalid_argument("config: oversampling layers must be >= 0");
  if (cfg.l < 1)
    throw std::invalid_argument("config: l must be at least 1");
  for (double c : cfg.contrast_list)
    if (!(c > 0.0))
      throw std::invalid_argument("config: contrast values must be positive");
  for (const auto& [kk, nc] : cfg.wave_pairs) {
    if (!(kk > 0.0))
      throw std::invalid_argument("config: wave-sweep k must be positive");
    if (nc < 1 || cfg.n_fine % nc != 0)
      throw std::invalid_argument(
          "config: wave-sweep coarse mesh does not nest (coarse = " +
          std::to_string(nc) + ")");
  }
  if (cfg.jobs < 1)
    throw std::invalid_argument("config: jobs must be at least 1");
}

// Precedence: explicit flag, then config file value, then environment,
// then ./out.
inline std::string resolve_outdir(const std::string& flag_value,
                                  const std::string& config_value) {
  if (!flag_value.empty()) return flag_value;
  if (!config_value.empty()) return config_value;
  if (const char* env = std::getenv("MAXMS_OUTDIR"); env && *env) return env;
  return "./out";
}

// Config files are `key = value` lines; `#` starts a comment. List values are
// comma separated, wave rows are k:coarse pairs.

inline std::string strip_ws(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1" || v == "on") return true;
  if (v == "false" || v == "0" || v == "off") return false;
  throw std::invalid_argument("config: bad boolean for " + key + ": " + v);
}

inline double parse_num(const std::string& v, const std::string& key) {
  std::size_t used = 0;
  double x = 0.0;
  try {
    x = std::stod(v, &used);
  } catch (const std::exception&) {
    throw std::invalid_argument("config: bad number for " + key + ": " + v);
  }
  if (used != v.size())
    throw std::invalid_argument("config: bad number for " + key + ": " + v);
  return x;
}

inline std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> items;
  std::istringstream is(v);
  std::string item;
  while (std::getline(is, item, ',')) {
    item = strip_ws(item);
    if (!item.empty()) items.push_back(item);
  }
  return items;
}

inline ModelKind parse_model_kind(const std::string& v) {
  if (v == "homogeneous") return ModelKind::HOMOGENEOUS;
  if (v == "random_cubes") return ModelKind::RANDOM_CUBES;
  if (v == "periodic_rods") return ModelKind::PERIODIC_RODS;
  if (v == "voxel") return ModelKind::VOXEL_FILE;
  throw std::invalid_argument("config: unknown model kind: " + v);
}

inline void apply_config_key(ExperimentConfig& cfg, const std::string& key,
                             const std::string& val) {
  if (key == "model") {
    cfg.model.kind = parse_model_kind(val);
  } else if (key == "voxel_path") {
    cfg.model.path = val;
  } else if (key == "inclusion") {
    cfg.model.inclusion_value = parse_num(val, key);
  } else if (key == "background") {
    cfg.model.background_value = parse_num(val, key);
  } else if (key == "cube_count") {
    cfg.model.cube_count = int(parse_num(val, key));
  } else if (key == "cube_side") {
    cfg.model.cube_side = int(parse_num(val, key));
  } else if (key == "rod_count") {
    cfg.model.rod_count = int(parse_num(val, key));
  } else if (key == "rod_radius") {
    cfg.model.rod_radius = parse_num(val, key);
  } else if (key == "seed") {
    cfg.rng_seed = std::uint64_t(parse_num(val, key));
    cfg.model.rng_seed = cfg.rng_seed;
  } else if (key == "k") {
    cfg.k = parse_num(val, key);
  } else if (key == "n_fine") {
    cfg.n_fine = i64(parse_num(val, key));
  } else if (key == "coarse") {
    cfg.coarse_list.clear();
    for (const std::string& s : split_list(val))
      cfg.coarse_list.push_back(i64(parse_num(s, key)));
  } else if (key == "m") {
    cfg.m_list.clear();
    for (const std::string& s : split_list(val))
      cfg.m_list.push_back(int(parse_num(s, key)));
  } else if (key == "l") {
    cfg.l = int(parse_num(val, key));
  } else if (key == "outdir") {
    cfg.outdir = val;
  } else if (key == "strict_trace") {
    cfg.strict_trace = parse_bool(val, key);
  } else if (key == "fine_reference") {
    cfg.fine_reference = parse_bool(val, key);
  } else if (key == "aux_ascending") {
    cfg.aux_ascending = parse_bool(val, key);
  } else if (key == "basis_cache") {
    cfg.basis_cache = parse_bool(val, key);
  } else if (key == "cache_dir") {
    cfg.cache_dir = val;
  } else if (key == "timings") {
    cfg.timings = parse_bool(val, key);
  } else if (key == "jobs") {
    cfg.jobs = int(parse_num(val, key));
  } else if (key == "contrast") {
    cfg.contrast_list.clear();
    for (const std::string& s : split_list(val))
      cfg.contrast_list.push_back(parse_num(s, key));
  } else if (key == "wave") {
    cfg.wave_pairs.clear();
    for (const std::string& s : split_list(val)) {
      std::size_t colon = s.find(':');
      if (colon == std::string::npos)
        throw std::invalid_argument("config: wave rows are k:coarse, got " + s);
      cfg.wave_pairs.emplace_back(
          parse_num(strip_ws(s.substr(0, colon)), key),
          i64(parse_num(strip_ws(s.substr(colon + 1)), key)));
    }
  } else if (key == "export_slices") {
    cfg.export_slices = parse_bool(val, key);
  } else if (key == "rel_tol") {
    cfg.policy.rel_tol = parse_num(val, key);
  } else if (key == "patch_rel_tol") {
    cfg.policy.patch_rel_tol = parse_num(val, key);
  } else if (key == "max_iterations") {
    cfg.policy.max_iterations = int(parse_num(val, key));
  } else if (key == "umfpack_budget") {
    cfg.policy.umfpack_budget_bytes = parse_num(val, key);
  } else if (key == "umfpack_max_unknowns") {
    cfg.policy.umfpack_max_unknowns = i64(parse_num(val, key));
  } else {
    throw std::invalid_argument("config: unknown key: " + key);
  }
}

inline ExperimentConfig parse_config_text(const std::string& text) {
  ExperimentConfig cfg;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = strip_ws(line);
    if (line.empty()) continue;
    std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config: line " + std::to_string(lineno) +
                                  " is not key = value: " + line);
    apply_config_key(cfg, strip_ws(line.substr(0, eq)),
                     strip_ws(line.substr(eq + 1)));
  }
  return cfg;
}

inline ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("config: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

}  // namespace maxms

#endif
