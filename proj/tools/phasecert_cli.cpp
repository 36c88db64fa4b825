#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "phasecert/phasecert.hpp"

using namespace phasecert;

namespace {

constexpr int kExitCertified = 0;
constexpr int kExitError = 1;
constexpr int kExitNotCertified = 2;

std::string fmt(double x) { return io::format_number(x); }

std::string fixed(double x, int digits = 6) {
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, x);
  return buf;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::InvalidParameter, "cannot write " + path);
  out << text;
}

int cmd_phases(const std::string& file, int boundary) {
  const ComplexMatrix a = io::parse_matrix_document(io::load_json_file(file));
  if (detail::is_zero(a)) {
    std::cout << "class: undefined (zero matrix)\nphase_index: 0\n";
    return 0;
  }
  const Sectoriality cls = classify_sectoriality(a);
  std::cout << "class: " << to_string(cls) << '\n';
  if (cls == Sectoriality::Sectorial || cls == Sectoriality::QuasiSectorial) {
    const PhaseSpectrum p = matrix_phases(a);
    std::cout << "phases_rad:";
    for (double x : p.phases) std::cout << ' ' << fixed(x);
    std::cout << "\nphases_deg:";
    for (double x : p.phases) std::cout << ' ' << fixed(io::degrees(x), 4);
    std::cout << "\ncenter_gamma: " << fixed(p.center) << "\nfield_angle_Theta: " << fixed(p.field_angle)
              << "\nphase_index_phi: " << fixed(p.phase_index) << " (" << fixed(io::degrees(p.phase_index), 4)
              << " deg)\n";
    if (p.rank_deficiency > 0) std::cout << "kernel_dimension: " << p.rank_deficiency << '\n';
  } else {
    std::cout << "phases_rad: undefined\nfield_angle_Theta: " << fixed(field_angle(a))
              << "\nphase_index_phi: " << fixed(phase_index(a)) << '\n';
  }
  if (boundary > 0) {
    std::cout << "boundary: theta,re,im\n";
    for (const BoundarySample& s : numerical_range_boundary(a, boundary)) {
      std::cout << fmt(s.theta) << ',' << fmt(s.point.real()) << ',' << fmt(s.point.imag()) << '\n';
    }
  }
  return 0;
}

int cmd_indices(const std::string& file, const std::string& structure, int restarts, std::uint64_t seed) {
  const ComplexMatrix a = io::parse_matrix_document(io::load_json_file(file));
  const BlockDims chi = structure.empty() ? BlockDims{{}, {static_cast<int>(a.rows())}}
                                          : io::parse_block_dims_spec(structure);
  require_compatible(chi, a.rows());
  const PsiUpperResult up = psi_upper(a, chi);
  const PsiLowerResult low = psi_lower(a, chi, restarts, seed);
  const MuUpperResult mu = mu_upper(a, chi);
  std::cout << "psi_upper: " << fixed(up.value) << " (" << fixed(io::degrees(up.value), 4)
            << " deg) stage " << to_string(up.stage) << '\n';
  std::cout << "psi_lower: " << fixed(low.value) << " (" << fixed(io::degrees(low.value), 4) << " deg) starts "
            << low.restarts_used << '\n';
  std::cout << "mu_upper: " << fixed(mu.value) << '\n';
  try {
    std::cout << "relative_passivity_R: " << fixed(relative_passivity(a, chi)) << '\n';
  } catch (const Error& e) {
    if (e.code() != ErrorCode::SingularScattering) throw;
    std::cout << "relative_passivity_R: undefined (I + M is singular)\n";
  }
  if (up.witness_d.size() > 0) std::cout << "witness_norm_D: " << fixed(spectral_norm(up.witness_d)) << '\n';
  std::cout << "witness_norm_P: " << fixed(spectral_norm(mu.witness_p)) << '\n';
  std::cout << "witness_norm_X: " << fixed(low.witness_x.norm()) << '\n';
  return 0;
}

std::vector<IqcCertificate> audit(const CertificationReport& rep, const StateSpace& g, const StateSpace& delta,
                                  const BlockDims& chi) {
  std::vector<IqcCertificate> out;
  for (std::size_t i = 0; i < rep.grid.size(); ++i) {
    const FrequencyRecord& r = rep.records[i];
    const bool phase = rep.criteria_used.phase && r.phase_ok;
    const bool gain = rep.criteria_used.gain && r.gain_ok;
    if (!phase && !gain) continue;
    CertificateOptions opt;
    opt.prefer = phase ? MultiplierKind::Phase : MultiplierKind::Gain;
    const double w = rep.grid[i];
    out.push_back(build_iqc_certificate(w, freq_response(g, w), freq_response(delta, w), chi, r, opt));
  }
  return out;
}

int cmd_analyze(const std::string& file, const std::string& out, const std::string& csv, int threads) {
  const io::AnalysisConfig cfg = io::parse_config(io::load_json_file(file));
  const CertificationReport rep = io::run_analysis(cfg, threads > 0 ? threads : default_threads());
  std::vector<IqcCertificate> certs;
  if (rep.verdict == Verdict::CertifiedStable && cfg.perturbation) certs = audit(rep, cfg.plant, *cfg.perturbation, cfg.structure);
  io::Json report = io::report_json(rep, certs);
  if (cfg.benchmark_a) report["benchmark"] = {{"a", *cfg.benchmark_a}, {"b", *cfg.benchmark_b}};
  if (!out.empty()) write_text(out, report.dump(2) + "\n");
  if (!csv.empty()) {
    std::ostringstream s;
    io::write_csv(rep, s);
    write_text(csv, s.str());
  }
  std::cout << "verdict: " << to_string(rep.verdict) << " (" << rep.qualifier << ", " << rep.grid.size()
            << " frequencies, " << rep.uncovered.size() << " uncovered)\n";
  if (!rep.uncovered.empty()) {
    std::cout << "uncovered omega:";
    for (std::size_t i : rep.uncovered) std::cout << ' ' << fmt(rep.grid[i]);
    std::cout << '\n';
  }
  return rep.verdict == Verdict::CertifiedStable ? kExitCertified : kExitNotCertified;
}

std::vector<double> parse_b_grid(const std::string& spec) {
  std::vector<std::string> parts;
  std::stringstream ss(spec);
  std::string p;
  while (std::getline(ss, p, ':')) parts.push_back(p);
  try {
    if (parts.size() == 4 && (parts[0] == "logspace" || parts[0] == "linspace")) {
      const double lo = std::stod(parts[1]), hi = std::stod(parts[2]);
      const int n = std::stoi(parts[3]);
      return parts[0] == "logspace" ? log_grid(lo, hi, n) : linear_grid(lo, hi, n);
    }
    if (parts.size() == 1) {
      std::vector<double> out;
      std::stringstream list(spec);
      while (std::getline(list, p, ',')) out.push_back(std::stod(p));
      if (!out.empty()) return out;
    }
  } catch (const std::invalid_argument&) {
  } catch (const std::out_of_range&) {
  }
  throw Error(ErrorCode::ParseError, "--b-grid: expected logspace:min:max:n, linspace:min:max:n or a comma list");
}

struct SweepRow {
  double b;
  bool oracle_stable;
  bool gain, gain_passivity, gain_phase;
};

int cmd_benchmark(const std::string& family, const std::string& b_spec, double a0, bool calibrate,
                  const std::string& out_dir, int threads) {
  if (family != "rotating-body") throw Error(ErrorCode::InvalidParameter, "unknown family '" + family + "'");
  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<double> bs = parse_b_grid(b_spec);
  Calibration cal{a0, false, {}};
  if (calibrate) {
    cal = calibrate_a(a0);
  } else if (const auto iv = instability_interval(a0)) {
    cal.interval = *iv;
  }
  const double a = cal.a;
  const BlockDims chi{{}, {1, 1}};
  const std::vector<double> grid = default_grid();
  const Margins margins;
  const std::vector<PlantProfile> plant =
      profile_plant(rotating_body_T(a), chi, grid, threads > 0 ? threads : default_threads());

  std::vector<SweepRow> rows;
  for (double b : bs) {
    const std::vector<PerturbationSample> s = sample_perturbation(delta_family(b), chi, grid);
    auto certified = [&](Criteria c) {
      return certify(plant, s, grid, c, margins).verdict == Verdict::CertifiedStable;
    };
    rows.push_back({b, benchmark_stable(a, b), certified({false, true, false}), certified({false, true, true}),
                    certified({true, true, false})});
  }

  std::printf("rotating-body benchmark, a = %.6f (%s)\n", a, cal.calibrated ? "calibrated" : "as given");
  if (cal.interval.upper > 0) {
    std::printf("pole oracle: unstable for b in [%.4f, %.4f]\n", cal.interval.lower, cal.interval.upper);
  } else {
    std::printf("pole oracle: stable for every b\n");
  }
  std::printf("%12s %8s %6s %13s %10s\n", "b", "oracle", "gain", "gain+passiv", "gain+phase");
  int n_gain = 0, n_gp = 0, n_gph = 0;
  double min_phase_b = kInf;
  bool all_above_22 = true;
  for (const SweepRow& r : rows) {
    std::printf("%12.6g %8s %6s %13s %10s\n", r.b, r.oracle_stable ? "stable" : "UNSTABLE", r.gain ? "yes" : "-",
                r.gain_passivity ? "yes" : "-", r.gain_phase ? "yes" : "-");
    n_gain += r.gain;
    n_gp += r.gain_passivity;
    n_gph += r.gain_phase;
    if (r.gain_phase) min_phase_b = std::min(min_phase_b, r.b);
    if (r.b >= 22.0 && !r.gain_phase) all_above_22 = false;
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("certified: gain %d, gain+passivity %d, gain+phase %d of %zu\n", n_gain, n_gp, n_gph, rows.size());
  std::printf("gain+phase certifies every b >= 22 on the grid: %s (smallest certified b %s)\n",
              all_above_22 ? "yes" : "no", fmt(min_phase_b).c_str());
  std::printf("elapsed %.1f s\n", seconds);

  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    std::ostringstream table;
    table << "b,oracle_stable,certified_gain,certified_gain_passivity,certified_gain_phase\n";
    for (const SweepRow& r : rows) {
      table << fmt(r.b) << ',' << int(r.oracle_stable) << ',' << int(r.gain) << ',' << int(r.gain_passivity) << ','
            << int(r.gain_phase) << '\n';
    }
    write_text(out_dir + "/sweep.csv", table.str());

    // Criterion curves against omega for a few perturbation poles.
    const std::vector<double> series_b{1.0, 10.0, 22.0, 100.0};
    std::ostringstream series;
    series << "omega,mu_bar_T,inv_mu_bar_T,psi_bar_T,R_T,inv_R_T,norm_Delta";
    for (double b : series_b) series << ",phi_Delta_b" << fmt(b) << ",norm_SDelta_b" << fmt(b);
    series << '\n';
    std::vector<std::vector<PerturbationSample>> samples;
    for (double b : series_b) samples.push_back(sample_perturbation(delta_family(b), chi, grid));
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const PlantProfile& p = plant[i];
      series << fmt(grid[i]) << ',' << fmt(p.mu.value) << ',' << fmt(1.0 / p.mu.value) << ',' << fmt(p.psi.value)
             << ',' << fmt(p.passivity) << ',' << fmt(1.0 / p.passivity) << ',' << fmt(samples[0][i].norm);
      for (const auto& s : samples) series << ',' << fmt(s[i].phase_index) << ',' << fmt(s[i].scattering_norm);
      series << '\n';
    }
    write_text(out_dir + "/series.csv", series.str());

    io::Json b_grid = io::Json::array();
    for (double b : bs) b_grid.push_back(b);
    const io::Json manifest{
        {"family", family},
        {"a", a},
        {"a_requested", a0},
        {"a_calibrated", cal.calibrated},
        {"instability_interval", {io::number_json(cal.interval.lower), io::number_json(cal.interval.upper)}},
        {"target_interval", {0.45, 2.9}},
        {"margins", {{"phase", margins.phase}, {"gain", margins.gain}}},
        {"omega_grid", {{"min", 1e-2}, {"max", 1e3}, {"points", 200}, {"spacing", "log"}, {"endpoints", {0.0, "inf"}}}},
        {"b_grid", b_grid},
        {"qualifier", kGridQualifier}};
    write_text(out_dir + "/manifest.json", manifest.dump(2) + "\n");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Structured phase and gain robust-stability analysis"};
  app.require_subcommand(1);

  auto* phases = app.add_subcommand("phases", "Phases of a complex matrix");
  std::string matrix_file;
  int boundary = 0;
  phases->add_option("matrix", matrix_file, "JSON matrix file")->required();
  phases->add_option("--emit-boundary", boundary, "Print this many numerical-range boundary samples");

  auto* indices = app.add_subcommand("indices", "Structured phase and gain indices of a matrix");
  std::string structure;
  int restarts = 8;
  std::uint64_t seed = 0x9e3779b97f4a7c15ULL;
  indices->add_option("matrix", matrix_file, "JSON matrix file")->required();
  indices->add_option("--structure", structure, "Block structure, e.g. scalar:1;full:1,1 (default: one full block)");
  indices->add_option("--restarts", restarts, "Starts for the lower bound");
  indices->add_option("--seed", seed, "Seed for the lower bound restarts");

  auto* analyze = app.add_subcommand("analyze", "Certify a feedback interconnection from a config file");
  std::string config, out, csv;
  int threads = 0;
  analyze->add_option("config", config, "JSON analysis config")->required();
  analyze->add_option("--out", out, "JSON report path");
  analyze->add_option("--csv", csv, "Per-frequency CSV path");
  analyze->add_option("--threads", threads, "Worker threads (default: PHASECERT_THREADS or all cores)");

  auto* bench = app.add_subcommand("benchmark", "Rotating-body benchmark sweep");
  std::string family = "rotating-body", b_grid = "logspace:0.05:100:60", out_dir;
  double a0 = 10.0;
  bool no_calibrate = false;
  bench->add_option("--family", family, "Benchmark family");
  bench->add_option("--b-grid", b_grid, "Perturbation poles: logspace:min:max:n, linspace:min:max:n or a list");
  bench->add_option("--a", a0, "Rotation parameter (starting point for calibration)");
  bench->add_flag("--calibrate-a", "Calibrate a against the instability interval (default)");
  bench->add_flag("--no-calibrate-a", no_calibrate, "Use --a as given");
  bench->add_option("--out-dir", out_dir, "Directory for sweep.csv, series.csv and manifest.json");
  bench->add_option("--threads", threads, "Worker threads");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitError;
  }

  try {
    if (*phases) return cmd_phases(matrix_file, boundary);
    if (*indices) return cmd_indices(matrix_file, structure, restarts, seed);
    if (*analyze) return cmd_analyze(config, out, csv, threads);
    if (*bench) return cmd_benchmark(family, b_grid, a0, !no_calibrate, out_dir, threads);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  }
  return kExitError;
}
