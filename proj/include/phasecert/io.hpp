#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "phasecert/block_structure.hpp"
#include "phasecert/certify.hpp"
#include "phasecert/error.hpp"
#include "phasecert/lti.hpp"
#include "phasecert/matrix_core.hpp"

namespace phasecert::io {

using Json = nlohmann::ordered_json;

[[noreturn]] inline void parse_fail(const std::string& path, const std::string& what) {
  throw Error(ErrorCode::ParseError, path + ": " + what);
}

inline Json load_json_file(const std::string& file) {
  std::ifstream in(file);
  if (!in) throw Error(ErrorCode::ParseError, file + ": cannot open file");
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw Error(ErrorCode::ParseError, file + ": " + e.what());
  }
}

inline const Json& member(const Json& j, const std::string& key, const std::string& path) {
  if (!j.is_object()) parse_fail(path, "expected an object");
  const auto it = j.find(key);
  if (it == j.end()) parse_fail(path + "." + key, "missing");
  return *it;
}

inline double parse_number(const Json& j, const std::string& path) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "inf" || s == "+inf") return kInf;
    if (s == "-inf") return -kInf;
  }
  parse_fail(path, "expected a number");
}

inline int parse_int(const Json& j, const std::string& path) {
  if (!j.is_number_integer()) parse_fail(path, "expected an integer");
  return j.get<int>();
}

/// A real number or a two-element array [re, im].
inline Complex parse_complex(const Json& j, const std::string& path) {
  if (j.is_number()) return {j.get<double>(), 0.0};
  if (j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number()) {
    return {j[0].get<double>(), j[1].get<double>()};
  }
  parse_fail(path, "expected a number or [re, im]");
}

template <typename Matrix, typename Entry>
Matrix parse_rows(const Json& j, const std::string& path, Entry&& entry) {
  if (!j.is_array()) parse_fail(path, "expected an array of rows");
  const Eigen::Index rows = static_cast<Eigen::Index>(j.size());
  Eigen::Index cols = -1;
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_array()) parse_fail(path + "[" + std::to_string(i) + "]", "expected a row array");
    const Eigen::Index c = static_cast<Eigen::Index>(j[i].size());
    if (cols >= 0 && c != cols) parse_fail(path + "[" + std::to_string(i) + "]", "row length differs from row 0");
    cols = c;
  }
  Matrix m(rows, std::max<Eigen::Index>(cols, 0));
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      const std::string at = path + "[" + std::to_string(r) + "][" + std::to_string(c) + "]";
      m(r, c) = entry(j[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)], at);
    }
  }
  return m;
}

inline ComplexMatrix parse_complex_matrix(const Json& j, const std::string& path) {
  return parse_rows<ComplexMatrix>(j, path, parse_complex);
}

inline RealMatrix parse_real_matrix(const Json& j, const std::string& path) {
  return parse_rows<RealMatrix>(j, path, [](const Json& e, const std::string& at) {
    if (!e.is_number()) parse_fail(at, "expected a real number");
    return e.get<double>();
  });
}

/// Reads {"matrix": ...} or a bare nested array.
inline ComplexMatrix parse_matrix_document(const Json& j) {
  const bool wrapped = j.is_object();
  ComplexMatrix m = parse_complex_matrix(wrapped ? member(j, "matrix", "$") : j, wrapped ? "$.matrix" : "$");
  if (m.rows() == 0 || m.rows() != m.cols()) parse_fail("$.matrix", "expected a nonempty square matrix");
  return m;
}

/// {"a": ..., "b": ..., "c": ..., "d": ...}; empty state dimension is allowed.
inline StateSpace parse_state_space(const Json& j, const std::string& path) {
  RealMatrix d = parse_real_matrix(member(j, "d", path), path + ".d");
  auto optional_block = [&](const char* key, Eigen::Index rows, Eigen::Index cols) {
    const auto it = j.find(key);
    if (it == j.end() || (it->is_array() && it->empty())) return RealMatrix(rows, cols);
    return parse_real_matrix(*it, path + "." + key);
  };
  RealMatrix a = optional_block("a", 0, 0);
  const Eigen::Index nx = a.rows();
  RealMatrix b = optional_block("b", nx, d.cols());
  RealMatrix c = optional_block("c", d.rows(), nx);
  const bool stable = !j.contains("stable") || j["stable"].get<bool>();
  try {
    return make_state_space(a, b, c, d, stable);
  } catch (const Error& e) {
    throw Error(ErrorCode::ParseError, path + ": " + e.message());
  }
}

inline BlockDims parse_block_dims(const Json& j, const std::string& path) {
  BlockDims chi;
  auto dims = [&](const char* key, std::vector<int>& out) {
    const auto it = j.find(key);
    if (it == j.end()) return;
    if (!it->is_array()) parse_fail(path + "." + key, "expected an array of block sizes");
    for (std::size_t i = 0; i < it->size(); ++i) {
      const int d = parse_int((*it)[i], path + "." + key + "[" + std::to_string(i) + "]");
      if (d < 1) parse_fail(path + "." + key + "[" + std::to_string(i) + "]", "block size must be positive");
      out.push_back(d);
    }
  };
  if (!j.is_object()) parse_fail(path, "expected {\"scalar\": [...], \"full\": [...]}");
  dims("scalar", chi.scalar_dims);
  dims("full", chi.full_dims);
  return chi;
}

/// "scalar:1,2;full:3" style structure strings used on the command line.
inline BlockDims parse_block_dims_spec(const std::string& spec) {
  BlockDims chi;
  std::stringstream groups(spec);
  std::string group;
  while (std::getline(groups, group, ';')) {
    const auto colon = group.find(':');
    if (colon == std::string::npos) parse_fail("--structure", "expected kind:sizes, got '" + group + "'");
    const std::string kind = group.substr(0, colon);
    std::vector<int>* out = kind == "scalar" ? &chi.scalar_dims : kind == "full" ? &chi.full_dims : nullptr;
    if (!out) parse_fail("--structure", "unknown block kind '" + kind + "'");
    std::stringstream sizes(group.substr(colon + 1));
    std::string s;
    while (std::getline(sizes, s, ',')) {
      if (s.empty()) continue;
      try {
        std::size_t used = 0;
        const int d = std::stoi(s, &used);
        if (used != s.size() || d < 1) throw std::invalid_argument(s);
        out->push_back(d);
      } catch (const std::exception&) {
        parse_fail("--structure", "bad block size '" + s + "'");
      }
    }
  }
  return chi;
}

// Analysis configuration

struct GridSpec {
  double min = 1e-2;
  double max = 1e3;
  int points = 200;
  bool log = true;
  bool endpoints = true;  // add omega = 0 and omega = inf

  std::vector<double> build() const {
    std::vector<double> g = log ? log_grid(min, max, points) : linear_grid(min, max, points);
    return endpoints ? with_endpoints(std::move(g)) : g;
  }
};

/// Per-frequency bounds on an otherwise unspecified perturbation.
struct BoundTable {
  std::vector<double> omega;
  std::vector<double> phase;
  std::vector<double> gain;

  PerturbationSample at(double w) const {
    PerturbationSample s;
    if (std::isinf(w)) {
      if (!std::isinf(omega.back())) parse_fail("perturbation.bounds.omega", "table does not reach omega = inf");
      s.phase_index = phase.back();
      s.norm = gain.back();
      return s;
    }
    for (std::size_t i = 0; i + 1 < omega.size(); ++i) {
      if (w >= omega[i] && w <= omega[i + 1]) {
        if (std::isinf(omega[i + 1])) {
          if (w != omega[i]) parse_fail("perturbation.bounds.omega", "cannot interpolate toward omega = inf");
          s.phase_index = phase[i];
          s.norm = gain[i];
          return s;
        }
        const double t = omega[i + 1] > omega[i] ? (w - omega[i]) / (omega[i + 1] - omega[i]) : 0.0;
        s.phase_index = phase[i] + t * (phase[i + 1] - phase[i]);
        s.norm = gain[i] + t * (gain[i + 1] - gain[i]);
        return s;
      }
    }
    if (omega.size() == 1 && w == omega[0]) return {phase[0], gain[0], kInf};
    parse_fail("perturbation.bounds.omega", "grid frequency " + std::to_string(w) + " lies outside the table");
  }
};

struct AnalysisConfig {
  StateSpace plant;
  std::optional<StateSpace> perturbation;
  std::optional<BoundTable> bounds;
  BlockDims structure;
  GridSpec grid;
  Criteria criteria;
  Margins margins;
  std::optional<double> benchmark_a;
  std::optional<double> benchmark_b;
};

inline BoundTable parse_bound_table(const Json& j, const std::string& path) {
  BoundTable t;
  auto list = [&](const char* key, std::vector<double>& out) {
    const Json& arr = member(j, key, path);
    if (!arr.is_array() || arr.empty()) parse_fail(path + "." + key, "expected a nonempty array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      out.push_back(parse_number(arr[i], path + "." + key + "[" + std::to_string(i) + "]"));
    }
  };
  list("omega", t.omega);
  list("phase", t.phase);
  list("gain", t.gain);
  if (t.phase.size() != t.omega.size() || t.gain.size() != t.omega.size()) {
    parse_fail(path, "omega, phase and gain must have equal lengths");
  }
  for (std::size_t i = 0; i < t.omega.size(); ++i) {
    if (i > 0 && !(t.omega[i] > t.omega[i - 1])) parse_fail(path + ".omega", "must ascend");
    if (t.phase[i] < 0.0 || t.phase[i] > kPi) parse_fail(path + ".phase", "phase bounds must lie in [0, pi]");
    if (t.gain[i] < 0.0) parse_fail(path + ".gain", "gain bounds must be nonnegative");
  }
  return t;
}

inline Criteria parse_criteria(const Json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) parse_fail(path, "expected a nonempty array of criterion names");
  Criteria c{false, false, false};
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string at = path + "[" + std::to_string(i) + "]";
    if (!j[i].is_string()) parse_fail(at, "expected a string");
    const std::string name = j[i].get<std::string>();
    if (name == "phase") c.phase = true;
    else if (name == "gain") c.gain = true;
    else if (name == "passivity") c.passivity = true;
    else parse_fail(at, "unknown criterion '" + name + "'");
  }
  return c;
}

inline GridSpec parse_grid(const Json& j, const std::string& path) {
  GridSpec g;
  if (j.contains("min")) g.min = parse_number(j["min"], path + ".min");
  if (j.contains("max")) g.max = parse_number(j["max"], path + ".max");
  if (j.contains("points")) g.points = parse_int(j["points"], path + ".points");
  if (j.contains("spacing")) {
    const std::string s = j["spacing"].is_string() ? j["spacing"].get<std::string>() : "";
    if (s != "log" && s != "linear") parse_fail(path + ".spacing", "expected \"log\" or \"linear\"");
    g.log = s == "log";
  }
  if (j.contains("endpoints")) g.endpoints = j["endpoints"].get<bool>();
  if (g.points < 2) parse_fail(path + ".points", "at least 2 points are required");
  if (!(g.min < g.max)) parse_fail(path, "min must be below max");
  if (g.log && !(g.min > 0.0)) parse_fail(path + ".min", "log spacing needs a positive minimum");
  if (!g.log && g.min < 0.0) parse_fail(path + ".min", "frequencies must be nonnegative");
  return g;
}

/// The benchmark block {"family": "rotating-body", "a": number | "calibrated", "b": number}
/// stands in for plant, perturbation and structure.
inline AnalysisConfig parse_config(const Json& j) {
  if (!j.is_object()) parse_fail("$", "expected an object");
  AnalysisConfig cfg;
  if (j.contains("benchmark")) {
    const Json& bm = j["benchmark"];
    const std::string family = member(bm, "family", "$.benchmark").get<std::string>();
    if (family != "rotating-body") parse_fail("$.benchmark.family", "unknown family '" + family + "'");
    const Json& a = member(bm, "a", "$.benchmark");
    cfg.benchmark_a = a.is_string() && a.get<std::string>() == "calibrated" ? calibrate_a().a
                                                                             : parse_number(a, "$.benchmark.a");
    cfg.benchmark_b = parse_number(member(bm, "b", "$.benchmark"), "$.benchmark.b");
    if (!(*cfg.benchmark_b > 0.0)) parse_fail("$.benchmark.b", "must be positive");
    cfg.plant = rotating_body_T(*cfg.benchmark_a);
    cfg.perturbation = delta_family(*cfg.benchmark_b);
    cfg.structure = BlockDims{{}, {1, 1}};
  } else {
    cfg.plant = parse_state_space(member(j, "plant", "$"), "$.plant");
    const Json& p = member(j, "perturbation", "$");
    if (p.contains("bounds")) {
      cfg.bounds = parse_bound_table(p["bounds"], "$.perturbation.bounds");
    } else {
      cfg.perturbation = parse_state_space(p, "$.perturbation");
    }
    cfg.structure = parse_block_dims(member(j, "structure", "$"), "$.structure");
  }
  if (j.contains("grid")) cfg.grid = parse_grid(j["grid"], "$.grid");
  if (j.contains("criteria")) cfg.criteria = parse_criteria(j["criteria"], "$.criteria");
  if (j.contains("margins")) {
    const Json& m = j["margins"];
    if (m.contains("phase")) cfg.margins.phase = parse_number(m["phase"], "$.margins.phase");
    if (m.contains("gain")) cfg.margins.gain = parse_number(m["gain"], "$.margins.gain");
  }

  if (cfg.plant.outputs() != cfg.plant.inputs()) parse_fail("$.plant", "plant must be square");
  if (!validate(cfg.structure, static_cast<int>(cfg.plant.outputs()))) {
    parse_fail("$.structure", "block sizes do not add up to the plant dimension " +
                                  std::to_string(cfg.plant.outputs()));
  }
  if (cfg.perturbation &&
      (cfg.perturbation->inputs() != cfg.plant.outputs() || cfg.perturbation->outputs() != cfg.plant.inputs())) {
    parse_fail("$.perturbation", "dimensions do not match the plant");
  }
  if (cfg.bounds && cfg.criteria.passivity) {
    parse_fail("$.criteria", "passivity needs a state-space perturbation, not bound tables");
  }
  return cfg;
}

inline CertificationReport run_analysis(const AnalysisConfig& cfg, int threads = default_threads()) {
  const std::vector<double> grid = cfg.grid.build();
  if (cfg.perturbation) return certify(cfg.plant, *cfg.perturbation, cfg.structure, grid, cfg.criteria, cfg.margins, threads);
  std::vector<PerturbationSample> samples;
  for (double w : grid) samples.push_back(cfg.bounds->at(w));
  return certify(profile_plant(cfg.plant, cfg.structure, grid, threads), samples, grid, cfg.criteria, cfg.margins);
}

// Output

/// Fixed 15-significant-digit formatting; infinities print as inf / -inf.
inline std::string format_number(double x) {
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.15g", x);
  return buf;
}

inline Json number_json(double x) {
  if (std::isinf(x)) return x > 0 ? Json("inf") : Json("-inf");
  if (std::isnan(x)) return Json(nullptr);
  return Json(x);
}

inline Json complex_json(Complex z) { return Json::array({z.real(), z.imag()}); }

inline Json matrix_json(const ComplexMatrix& m) {
  Json rows = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(complex_json(m(r, c)));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline double degrees(double radians) { return radians * 180.0 / kPi; }

inline Json criteria_json(const Criteria& c) {
  Json out = Json::array();
  if (c.phase) out.push_back("phase");
  if (c.gain) out.push_back("gain");
  if (c.passivity) out.push_back("passivity");
  return out;
}

inline Json record_json(const FrequencyRecord& r) {
  return Json{{"omega", number_json(r.omega)},
              {"psi_bar_G", number_json(r.psi_bar_G)},
              {"psi_bar_G_deg", number_json(degrees(r.psi_bar_G))},
              {"stage", std::string(to_string(r.stage))},
              {"mu_bar_G", number_json(r.mu_bar_G)},
              {"R_G", number_json(r.R_G)},
              {"phi_Delta", number_json(r.phi_Delta)},
              {"phi_Delta_deg", number_json(degrees(r.phi_Delta))},
              {"norm_Delta", number_json(r.norm_Delta)},
              {"norm_SDelta", number_json(r.norm_SDelta)},
              {"phase_ok", r.phase_ok},
              {"gain_ok", r.gain_ok},
              {"passivity_ok", r.passivity_ok}};
}

inline Json certificate_json(const IqcCertificate& c) {
  Json j{{"omega", number_json(c.omega)}, {"kind", std::string(to_string(c.kind))}};
  if (c.kind == MultiplierKind::Phase) {
    j["beta"] = c.beta;
  } else {
    j["rho"] = c.rho;
  }
  j["fdi_delta_margin"] = number_json(c.fdi_delta_margin);
  j["fdi_G_margin"] = number_json(c.fdi_G_margin);
  return j;
}

inline Json report_json(const CertificationReport& rep, const std::vector<IqcCertificate>& certificates = {}) {
  Json grid = Json::array();
  for (double w : rep.grid) grid.push_back(number_json(w));
  Json records = Json::array();
  for (const FrequencyRecord& r : rep.records) records.push_back(record_json(r));
  Json out{{"verdict", std::string(to_string(rep.verdict))},
           {"qualifier", rep.qualifier},
           {"criteria_used", criteria_json(rep.criteria_used)},
           {"margins", {{"phase", rep.margins.phase}, {"gain", rep.margins.gain}}},
           {"grid", std::move(grid)},
           {"omega_psi", rep.omega_psi},
           {"omega_mu", rep.omega_mu},
           {"omega_passivity", rep.omega_passivity},
           {"uncovered", rep.uncovered},
           {"records", std::move(records)}};
  if (!certificates.empty()) {
    Json certs = Json::array();
    for (const IqcCertificate& c : certificates) certs.push_back(certificate_json(c));
    out["certificates"] = std::move(certs);
  }
  return out;
}

inline const char* kCsvHeader =
    "omega,psi_bar_G,mu_bar_G,R_G,phi_Delta,norm_Delta,phase_ok,gain_ok,passivity_ok,"
    "psi_bar_G_deg,phi_Delta_deg,norm_SDelta,stage";

inline void write_csv(const CertificationReport& rep, std::ostream& out) {
  out << kCsvHeader << '\n';
  for (const FrequencyRecord& r : rep.records) {
    out << format_number(r.omega) << ',' << format_number(r.psi_bar_G) << ',' << format_number(r.mu_bar_G) << ','
        << format_number(r.R_G) << ',' << format_number(r.phi_Delta) << ',' << format_number(r.norm_Delta) << ','
        << int(r.phase_ok) << ',' << int(r.gain_ok) << ',' << int(r.passivity_ok) << ','
        << format_number(degrees(r.psi_bar_G)) << ',' << format_number(degrees(r.phi_Delta)) << ','
        << format_number(r.norm_SDelta) << ',' << to_string(r.stage) << '\n';
  }
}

}  // namespace phasecert::io
