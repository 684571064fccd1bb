#ifndef MAXMS_REPORT_HPP
#define MAXMS_REPORT_HPP

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "maxms/assembly.hpp"

namespace maxms {

struct NormErrors {
  double a_abs = 0.0;
  double a_rel = 0.0;
  double l2_abs = 0.0;
  double l2_rel = 0.0;
};

// Errors of u against u_ref in the energy and L2 norms, relative to u_ref.
inline NormErrors compute_errors(const OperatorSet& ops, const VectorXcd& u_ref,
                                 const VectorXcd& u) {
  if (u_ref.size() != u.size())
    throw std::invalid_argument("compute_errors: length mismatch");
  VectorXcd e = u_ref - u;
  NormErrors ne;
  ne.a_abs = norm_a(ops, e);
  ne.l2_abs = norm_l2(ops, e);
  double ra = norm_a(ops, u_ref);
  double rl = norm_l2(ops, u_ref);
  ne.a_rel = ra > 0.0 ? ne.a_abs / ra : ne.a_abs;
  ne.l2_rel = rl > 0.0 ? ne.l2_abs / rl : ne.l2_abs;
  return ne;
}

struct ReportRow {
  std::string family;
  double k = 0.0;
  double H = 0.0;
  double h = 0.0;
  int m = 0;  // -1 marks a plain FEM reference-comparison row
  int l = 0;
  double contrast = 1.0;
  std::string ref_kind;  // "exact" | "fine"
  double err_a_rel = 0.0;
  double err_l2_rel = 0.0;
  double lambda_min_next = 0.0;
  double rescheck = 0.0;
  double t_spectral_s = 0.0;
  double t_basis_s = 0.0;
  double t_coarse_s = 0.0;
  double t_fine_s = 0.0;
};

struct ErrorReport {
  std::vector<ReportRow> rows;
};

inline const char* csv_header() {
  return "family,k,H,h,m,l,contrast,ref_kind,err_a_rel,err_l2_rel,"
         "lambda_min_next,rescheck,t_spectral_s,t_basis_s,t_coarse_s,t_fine_s";
}

inline std::string format_row(const ReportRow& r) {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "%s,%.10g,%.10g,%.10g,%d,%d,%.10g,%s,%.6e,%.6e,%.9e,%.6e,"
                "%.3f,%.3f,%.3f,%.3f",
                r.family.c_str(), r.k, r.H, r.h, r.m, r.l, r.contrast,
                r.ref_kind.c_str(), r.err_a_rel, r.err_l2_rel,
                r.lambda_min_next, r.rescheck, r.t_spectral_s, r.t_basis_s,
                r.t_coarse_s, r.t_fine_s);
  return buf;
}

inline std::string summary_text(const ErrorReport& rep) {
  std::ostringstream os;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-12s %6s %8s %4s %9s %5s %12s %12s %9s\n",
                "family", "k", "H", "m", "contrast", "ref", "err_a_rel",
                "err_l2_rel", "rescheck");
  os << buf;
  for (const ReportRow& r : rep.rows) {
    std::snprintf(buf, sizeof buf,
                  "%-12s %6.3g %8.5g %4d %9.3g %5s %12.4e %12.4e %9.3f\n",
                  r.family.c_str(), r.k, r.H, r.m, r.contrast,
                  r.ref_kind.c_str(), r.err_a_rel, r.err_l2_rel, r.rescheck);
    os << buf;
  }
  return os.str();
}

// Writes <path> (CSV) and a sibling <stem>.summary.txt.
inline void emit_report(const ErrorReport& rep, const std::string& path) {
  std::ofstream csv(path, std::ios::binary);
  if (!csv) throw std::runtime_error("emit_report: cannot open " + path);
  csv << csv_header() << "\n";
  for (const ReportRow& r : rep.rows) csv << format_row(r) << "\n";
  csv.flush();
  if (!csv) throw std::runtime_error("emit_report: write failed for " + path);

  std::string stem = path;
  if (stem.size() > 4 && stem.compare(stem.size() - 4, 4, ".csv") == 0)
    stem.resize(stem.size() - 4);
  std::string spath = stem + ".summary.txt";
  std::ofstream sum(spath, std::ios::binary);
  if (!sum) throw std::runtime_error("emit_report: cannot open " + spath);
  sum << summary_text(rep);
  sum.flush();
  if (!sum) throw std::runtime_error("emit_report: write failed for " + spath);
}

}  // namespace maxms

#endif
