#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "phasecert/block_structure.hpp"
#include "phasecert/error.hpp"
#include "phasecert/indices.hpp"
#include "phasecert/lti.hpp"
#include "phasecert/matrix_core.hpp"
#include "phasecert/numrange.hpp"

namespace phasecert {

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr const char* kGridQualifier = "grid-certified";

struct Margins {
  double phase = 0.01;  // radians
  double gain = 0.005;
};

struct Criteria {
  bool phase = true;
  bool gain = true;
  bool passivity = false;

  bool any() const { return phase || gain || passivity; }
};

/// Index computations on G(j omega) alone; reusable across perturbations.
struct PlantProfile {
  PsiUpperResult psi;
  MuUpperResult mu;
  double passivity = kInf;  // infinite when I + G is singular
};

/// What certification needs from the perturbation at one frequency.
struct PerturbationSample {
  double phase_index = 0.0;
  double norm = 0.0;
  double scattering_norm = kInf;  // infinite when unavailable
};

struct FrequencyRecord {
  double omega = 0.0;
  double psi_bar_G = kPi;
  PsiStage stage = PsiStage::Vacuous;
  double mu_bar_G = 0.0;
  double R_G = kInf;
  double phi_Delta = 0.0;
  double norm_Delta = 0.0;
  double norm_SDelta = kInf;
  bool phase_ok = false;
  bool gain_ok = false;
  bool passivity_ok = false;
  ComplexMatrix psi_witness;  // D from the phase bound
  ComplexMatrix mu_witness;   // P from the gain bound
};

enum class Verdict { CertifiedStable, NotCertified };

inline std::string_view to_string(Verdict v) {
  return v == Verdict::CertifiedStable ? "CertifiedStable" : "NotCertified";
}

struct CertificationReport {
  std::vector<double> grid;
  std::vector<FrequencyRecord> records;
  std::vector<std::size_t> omega_psi, omega_mu, omega_passivity, uncovered;
  Verdict verdict = Verdict::NotCertified;
  Criteria criteria_used;
  Margins margins;
  std::string qualifier = kGridQualifier;
};

// Frequency grids

inline std::vector<double> log_grid(double lo, double hi, int points) {
  if (!(lo > 0.0) || !(hi > lo) || points < 2) {
    throw Error(ErrorCode::InvalidParameter, "log grid needs 0 < min < max and at least 2 points");
  }
  std::vector<double> out(static_cast<std::size_t>(points));
  const double l0 = std::log10(lo), l1 = std::log10(hi);
  for (int i = 0; i < points; ++i) out[static_cast<std::size_t>(i)] = std::pow(10.0, l0 + (l1 - l0) * i / (points - 1));
  out.front() = lo;
  out.back() = hi;
  return out;
}

inline std::vector<double> linear_grid(double lo, double hi, int points) {
  if (!(hi > lo) || points < 2) throw Error(ErrorCode::InvalidParameter, "linear grid needs min < max and at least 2 points");
  std::vector<double> out(static_cast<std::size_t>(points));
  for (int i = 0; i < points; ++i) out[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (points - 1);
  return out;
}

/// Adds omega = 0 and omega = infinity around an ascending positive grid.
inline std::vector<double> with_endpoints(std::vector<double> grid) {
  if (grid.empty() || grid.front() > 0.0) grid.insert(grid.begin(), 0.0);
  if (!std::isinf(grid.back())) grid.push_back(kInf);
  return grid;
}

inline std::vector<double> default_grid() { return with_endpoints(log_grid(1e-2, 1e3, 200)); }

inline void require_grid(const std::vector<double>& grid) {
  if (grid.empty()) throw Error(ErrorCode::InvalidParameter, "frequency grid is empty");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (std::isnan(grid[i]) || grid[i] < 0.0) throw Error(ErrorCode::InvalidParameter, "frequencies must be >= 0");
    if (i > 0 && !(grid[i] > grid[i - 1])) throw Error(ErrorCode::InvalidParameter, "frequency grid must ascend");
  }
}

// Parallel map

/// Worker count: hardware concurrency, capped by PHASECERT_THREADS when set.
inline int default_threads() {
  int n = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  if (const char* env = std::getenv("PHASECERT_THREADS")) {
    const int cap = std::atoi(env);
    if (cap > 0) n = std::min(n, cap);
  }
  return n;
}

namespace detail {

/// Runs fn(i) for i in [0, count); the exception from the lowest failing index wins.
template <typename Fn>
void parallel_for(std::size_t count, int threads, Fn&& fn) {
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int n = std::max(1, std::min<int>(threads, static_cast<int>(count)));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }
  for (const std::exception_ptr& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

inline std::string omega_label(double omega) {
  return std::isinf(omega) ? std::string("inf") : std::to_string(omega);
}

template <typename Fn>
auto at_frequency(double omega, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const Error& e) {
    throw Error(e.code(), "at omega = " + omega_label(omega) + ": " + e.message());
  }
}

}  // namespace detail

// Per-frequency analysis

inline PlantProfile profile_plant(const ComplexMatrix& gw, const BlockDims& chi) {
  PlantProfile p;
  p.psi = psi_upper(gw, chi);
  p.mu = mu_upper(gw, chi);
  try {
    p.passivity = relative_passivity(gw, chi);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::SingularScattering) throw;
  }
  return p;
}

inline PerturbationSample sample_perturbation(const ComplexMatrix& dw, const BlockDims& chi) {
  require_compatible(chi, dw.rows());
  if (!is_member_B(chi, dw, 1e-9 * std::max(1.0, dw.cwiseAbs().maxCoeff()))) {
    throw Error(ErrorCode::StructureViolation, "perturbation does not have the block structure of B_chi");
  }
  PerturbationSample s;
  s.phase_index = phase_index(dw);
  s.norm = spectral_norm(dw);
  try {
    s.scattering_norm = spectral_norm(scattering(dw));
  } catch (const Error& e) {
    if (e.code() != ErrorCode::SingularScattering) throw;
  }
  return s;
}

inline FrequencyRecord evaluate_record(const PlantProfile& plant, const PerturbationSample& delta,
                                       const Margins& margins) {
  FrequencyRecord r;
  r.psi_bar_G = plant.psi.value;
  r.stage = plant.psi.stage;
  r.mu_bar_G = plant.mu.value;
  r.R_G = plant.passivity;
  r.psi_witness = plant.psi.witness_d;
  r.mu_witness = plant.mu.witness_p;
  r.phi_Delta = delta.phase_index;
  r.norm_Delta = delta.norm;
  r.norm_SDelta = delta.scattering_norm;
  r.phase_ok = r.stage != PsiStage::Vacuous && r.phi_Delta + r.psi_bar_G < kPi - margins.phase;
  r.gain_ok = r.norm_Delta * r.mu_bar_G < 1.0 - margins.gain;
  r.passivity_ok = std::isfinite(r.R_G) && std::isfinite(r.norm_SDelta) && r.R_G * r.norm_SDelta < 1.0 - margins.gain;
  return r;
}

inline FrequencyRecord analyze_frequency(const ComplexMatrix& gw, const ComplexMatrix& dw, const BlockDims& chi,
                                         const Margins& margins = {}) {
  require_square(gw, "plant response");
  if (gw.rows() != dw.rows() || gw.cols() != dw.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "plant and perturbation responses differ in size");
  }
  const PerturbationSample delta = sample_perturbation(dw, chi);
  return evaluate_record(profile_plant(gw, chi), delta, margins);
}

// Sweeps

inline std::vector<PlantProfile> profile_plant(const StateSpace& g, const BlockDims& chi,
                                               const std::vector<double>& grid, int threads = default_threads()) {
  require_grid(grid);
  if (!g.stable) throw Error(ErrorCode::InvalidParameter, "plant must be flagged stable");
  require_compatible(chi, g.outputs());
  std::vector<PlantProfile> out(grid.size());
  detail::parallel_for(grid.size(), threads, [&](std::size_t i) {
    out[i] = detail::at_frequency(grid[i], [&] { return profile_plant(freq_response(g, grid[i]), chi); });
  });
  return out;
}

inline std::vector<PerturbationSample> sample_perturbation(const StateSpace& delta, const BlockDims& chi,
                                                           const std::vector<double>& grid) {
  require_grid(grid);
  if (!delta.stable) throw Error(ErrorCode::InvalidParameter, "perturbation must be flagged stable");
  std::vector<PerturbationSample> out;
  out.reserve(grid.size());
  for (double w : grid) {
    out.push_back(detail::at_frequency(w, [&] { return sample_perturbation(freq_response(delta, w), chi); }));
  }
  return out;
}

/// Combines precomputed plant profiles with perturbation samples on the same grid.
inline CertificationReport certify(const std::vector<PlantProfile>& plant, const std::vector<PerturbationSample>& delta,
                                   const std::vector<double>& grid, const Criteria& criteria,
                                   const Margins& margins = {}) {
  require_grid(grid);
  if (plant.size() != grid.size() || delta.size() != grid.size()) {
    throw Error(ErrorCode::DimensionMismatch, "profiles and samples must match the grid");
  }
  if (!criteria.any()) throw Error(ErrorCode::InvalidParameter, "no certification criterion enabled");
  CertificationReport rep;
  rep.grid = grid;
  rep.criteria_used = criteria;
  rep.margins = margins;
  rep.records.reserve(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    FrequencyRecord r = evaluate_record(plant[i], delta[i], margins);
    r.omega = grid[i];
    const bool by_phase = criteria.phase && r.phase_ok;
    const bool by_gain = criteria.gain && r.gain_ok;
    const bool by_passivity = criteria.passivity && r.passivity_ok;
    if (by_phase) rep.omega_psi.push_back(i);
    if (by_gain) rep.omega_mu.push_back(i);
    if (by_passivity) rep.omega_passivity.push_back(i);
    if (!by_phase && !by_gain && !by_passivity) rep.uncovered.push_back(i);
    rep.records.push_back(std::move(r));
  }
  rep.verdict = rep.uncovered.empty() ? Verdict::CertifiedStable : Verdict::NotCertified;
  return rep;
}

inline CertificationReport certify(const StateSpace& g, const StateSpace& delta, const BlockDims& chi,
                                   const std::vector<double>& grid, const Criteria& criteria,
                                   const Margins& margins = {}, int threads = default_threads()) {
  if (g.outputs() != g.inputs() || delta.outputs() != g.inputs() || delta.inputs() != g.outputs()) {
    throw Error(ErrorCode::DimensionMismatch, "G and Delta must be square of the same size");
  }
  const std::vector<PerturbationSample> samples = sample_perturbation(delta, chi, grid);
  return certify(profile_plant(g, chi, grid, threads), samples, grid, criteria, margins);
}

// IQC multipliers

enum class MultiplierKind { Phase, Gain };

inline std::string_view to_string(MultiplierKind k) { return k == MultiplierKind::Phase ? "phase" : "gain"; }

struct IqcCertificate {
  double omega = 0.0;
  MultiplierKind kind = MultiplierKind::Phase;
  ComplexMatrix d;   // scaling in the multiplier
  double beta = 0.0;  // phase rotation (phase branch)
  double rho = 0.0;   // gain level between mu_bar and 1/||Delta|| (gain branch)
  ComplexMatrix pi;   // 2n x 2n multiplier
  double fdi_delta_margin = 0.0;
  double fdi_G_margin = 0.0;
};

struct CertificateOptions {
  std::optional<double> beta;             // overrides the centered rotation
  std::optional<MultiplierKind> prefer;   // default: phase when the record allows it
  double failure_tol = 1e-8;
};

namespace detail {

struct PhaseSpan {
  double lo = 0.0;
  double hi = 0.0;
};

// Angular extent of W(M) \ {0}; nullopt for the zero matrix.
inline std::optional<PhaseSpan> phase_span(const ComplexMatrix& m) {
  if (is_zero(m)) return std::nullopt;
  const SupportScan scan = scan_support(m, kSectorialityTol);
  if (scan.value < -kSectorialityTol * scan.scale) {
    throw Error(ErrorCode::CertificateFailure, "0 is interior to the numerical range; no phase multiplier exists");
  }
  try {
    const PhaseSpectrum p = phases_from_scan(m, scan, kSectorialityTol);
    return PhaseSpan{p.min_phase(), p.max_phase()};
  } catch (const Error& e) {
    if (e.code() != ErrorCode::NotQuasiSectorial && e.code() != ErrorCode::DegenerateRotation) throw;
  }
  const double c = wrap_angle(scan.theta);
  return PhaseSpan{c - 0.5 * kPi, c + 0.5 * kPi};
}

/// sup { eps : psi - eps q >= 0 } for Hermitian psi and q >= 0. Negative values
/// report lambda_min of psi on the kernel of q when even eps = 0 fails there.
inline double fdi_epsilon(const ComplexMatrix& psi, const ComplexMatrix& q) {
  const Eigen::Index n = psi.rows();
  const HermitianEigen eq = eig_hermitian(q);
  const double qmax = std::max(0.0, eq.eigenvalues(n - 1));
  const double cut = 1e-12 * std::max(qmax, spectral_norm(psi));
  Eigen::Index k = 0;  // kernel dimension
  while (k < n && eq.eigenvalues(k) <= cut) ++k;
  const ComplexMatrix vk = eq.eigenvectors.leftCols(k);
  const ComplexMatrix vr = eq.eigenvectors.rightCols(n - k);
  ComplexMatrix s = vr.adjoint() * psi * vr;
  if (k > 0) {
    const ComplexMatrix pkk = vk.adjoint() * psi * vk;
    const double lk = lambda_min(pkk);
    if (lk < -cut) return lk;
    if (k == n) return kInf;
    const ComplexMatrix pkr = vk.adjoint() * psi * vr;
    const ComplexMatrix reg = pkk + cut * ComplexMatrix::Identity(k, k);
    s -= pkr.adjoint() * reg.llt().solve(pkr);
  }
  const RealVector qr = eq.eigenvalues.tail(n - k);
  const RealVector inv_root = qr.cwiseSqrt().cwiseInverse();
  const ComplexMatrix scaled = inv_root.asDiagonal() * s * inv_root.asDiagonal();
  return lambda_min(real_part(scaled));
}

}  // namespace detail

/// Centered rotation for the phase multiplier: the midpoint of the betas that
/// put W(e^{j beta} G D) in the open right half-plane and W(e^{-j beta} D^{-1} Delta)
/// in the closed one.
inline double centered_beta(const ComplexMatrix& gd, const ComplexMatrix& dinv_delta) {
  double lo = -0.5 * kPi, hi = 0.5 * kPi;
  if (const auto s = detail::phase_span(gd)) {
    lo = std::max(lo, -0.5 * kPi - s->lo);
    hi = std::min(hi, 0.5 * kPi - s->hi);
  }
  if (const auto s = detail::phase_span(dinv_delta)) {
    lo = std::max(lo, s->hi - 0.5 * kPi);
    hi = std::min(hi, s->lo + 0.5 * kPi);
  }
  const double limit = 0.5 * kPi - 1e-6;
  return std::clamp(0.5 * (lo + hi), -limit, limit);
}

inline IqcCertificate phase_certificate(double omega, const ComplexMatrix& gw, const ComplexMatrix& dw,
                                        const ComplexMatrix& d, std::optional<double> beta = std::nullopt) {
  const Eigen::Index n = gw.rows();
  IqcCertificate c;
  c.omega = omega;
  c.kind = MultiplierKind::Phase;
  c.d = d;
  const ComplexMatrix dinv = d.inverse();
  const ComplexMatrix gd = gw * d;
  const ComplexMatrix dinv_delta = dinv * dw;
  c.beta = beta ? *beta : centered_beta(gd, dinv_delta);
  const Complex rot = std::polar(1.0, c.beta);

  c.pi = ComplexMatrix::Zero(2 * n, 2 * n);
  c.pi.topRightCorner(n, n) = -std::conj(rot) * dinv;
  c.pi.bottomLeftCorner(n, n) = -rot * dinv.adjoint();
  c.fdi_delta_margin = lambda_min(real_part(std::conj(rot) * dinv_delta));
  c.fdi_G_margin = detail::fdi_epsilon(real_part(rot * gd), gd.adjoint() * gd);
  return c;
}

inline IqcCertificate gain_certificate(double omega, const ComplexMatrix& gw, const ComplexMatrix& dw,
                                       const ComplexMatrix& p, double mu_bar) {
  const Eigen::Index n = gw.rows();
  IqcCertificate c;
  c.omega = omega;
  c.kind = MultiplierKind::Gain;
  c.d = hermitian_sqrt(p);
  const double nd = spectral_norm(dw);
  if (nd == 0.0) {
    c.rho = mu_bar + 1.0;
  } else if (mu_bar == 0.0) {
    c.rho = 0.5 / nd;
  } else {
    c.rho = std::sqrt(mu_bar / nd);  // geometric mean of mu_bar and 1/||Delta||
  }
  const ComplexMatrix dd = c.d.adjoint() * c.d;
  c.pi = block_diagonal(dd / (c.rho * c.rho), -dd);

  const ComplexMatrix scaled_delta = c.d * dw * c.d.inverse();
  c.fdi_delta_margin =
      lambda_min(ComplexMatrix::Identity(n, n) - c.rho * c.rho * scaled_delta.adjoint() * scaled_delta);
  const ComplexMatrix psi = dd - gw.adjoint() * dd * gw / (c.rho * c.rho);
  c.fdi_G_margin = detail::fdi_epsilon(real_part(psi), gw.adjoint() * gw);
  return c;
}

/// Assembles the multiplier for a covered frequency and evaluates both
/// frequency-domain inequalities.
inline IqcCertificate build_iqc_certificate(double omega, const ComplexMatrix& gw, const ComplexMatrix& dw,
                                            const BlockDims& chi, const FrequencyRecord& record,
                                            const CertificateOptions& opt = {}) {
  require_square(gw, "plant response");
  require_compatible(chi, gw.rows());
  if (!is_member_B(chi, dw, 1e-9 * std::max(1.0, dw.cwiseAbs().maxCoeff()))) {
    throw Error(ErrorCode::StructureViolation, "perturbation does not have the block structure of B_chi");
  }
  if (!record.phase_ok && !record.gain_ok) {
    throw Error(ErrorCode::InvalidParameter, "neither the phase nor the gain condition holds at this frequency");
  }
  MultiplierKind kind = record.phase_ok ? MultiplierKind::Phase : MultiplierKind::Gain;
  if (opt.prefer) {
    const bool allowed = *opt.prefer == MultiplierKind::Phase ? record.phase_ok : record.gain_ok;
    if (!allowed) throw Error(ErrorCode::InvalidParameter, "requested multiplier branch does not apply");
    kind = *opt.prefer;
  }
  IqcCertificate c = kind == MultiplierKind::Phase
                         ? phase_certificate(omega, gw, dw, record.psi_witness, opt.beta)
                         : gain_certificate(omega, gw, dw, record.mu_witness, record.mu_bar_G);
  if (c.fdi_delta_margin < -opt.failure_tol || c.fdi_G_margin < -opt.failure_tol) {
    throw Error(ErrorCode::CertificateFailure,
                std::string(to_string(kind)) + " multiplier at omega = " + detail::omega_label(omega) +
                    " violates an FDI (delta margin " + std::to_string(c.fdi_delta_margin) + ", G margin " +
                    std::to_string(c.fdi_G_margin) + ")");
  }
  return c;
}

}  // namespace phasecert
