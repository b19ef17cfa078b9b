#pragma once

#include <complex>
#include <string>
#include <vector>

namespace nanosq::materials {

using cplx = std::complex<double>;

struct LorentzPole {
  double amplitude = 0;  // dimensionless
  double center = 0;     // rad/s
  double width = 0;      // rad/s
};

// eps(w) = eps_inf - wp^2/(w^2 + i gp w) + sum_j A_j wj^2/(wj^2 - w^2 - i Gj w)
struct DrudeLorentzModel {
  double eps_inf = 1.0;
  double omega_p = 0.0;  // rad/s
  double gamma_p = 0.0;  // rad/s
  std::vector<LorentzPole> lorentz_poles;
};

cplx permittivity(const DrudeLorentzModel& model, double omega);
double permittivity_imag_axis(const DrudeLorentzModel& model, double xi);

struct PermittivityRow {
  double wavelength_nm;
  double eps_re;
  double eps_im;
};

struct PermittivityTable {
  std::vector<PermittivityRow> rows;

  // CSV with header wavelength_nm,eps_re,eps_im
  static PermittivityTable loadCsv(const std::string& path);
  static PermittivityTable parseCsv(const std::string& text);
  // Linear interpolation in wavelength; throws outside the table support.
  cplx interpolate(double wavelength_nm) const;
  void validate() const;
};

struct FitOptions {
  double band_min_nm = 400.0;
  double band_max_nm = 900.0;
  int max_iterations = 400;
  // Fit fails if the rms relative residual over the band exceeds this.
  double residual_threshold = 0.30;
};

struct FitReport {
  DrudeLorentzModel model;
  double rms_relative_residual = 0;
  double max_relative_residual = 0;
  int iterations = 0;
};

// Damped least squares (Levenberg-Marquardt) on log-transformed parameters,
// which keeps every rate positive and the fitted model passive. Deterministic
// for a given seed.
FitReport fit_drude_lorentz(const PermittivityTable& table,
                            const DrudeLorentzModel& seed,
                            const FitOptions& opts = {});

// Gold parameters shipped as the library default: fit_drude_lorentz output
// for data/gold_permittivity.csv over 400-900 nm.
DrudeLorentzModel default_gold();

// The table the default model was fitted against (embedded copy of the
// shipped CSV).
PermittivityTable default_gold_table();

}  // namespace nanosq::materials
