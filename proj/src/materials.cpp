#include "nanosqueeze/materials.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <fstream>
#include <mutex>
#include <sstream>
#include <stdexcept>

#include "nanosqueeze/constants.hpp"

namespace nanosq::materials {

namespace {

void check_model(const DrudeLorentzModel& m) {
  auto finite = [](double v) { return std::isfinite(v); };
  bool ok = finite(m.eps_inf) && finite(m.omega_p) && finite(m.gamma_p);
  for (const auto& p : m.lorentz_poles)
    ok = ok && finite(p.amplitude) && finite(p.center) && finite(p.width);
  if (!ok) throw std::invalid_argument("Drude-Lorentz model has non-finite parameters");
}

}  // namespace

cplx permittivity(const DrudeLorentzModel& model, double omega) {
  check_model(model);
  if (!(omega > 0)) throw std::domain_error("permittivity: omega must be > 0");
  cplx eps = model.eps_inf;
  eps -= model.omega_p * model.omega_p /
         (omega * omega + cplx(0.0, 1.0) * model.gamma_p * omega);
  for (const auto& p : model.lorentz_poles) {
    eps += p.amplitude * p.center * p.center /
           (p.center * p.center - omega * omega - cplx(0.0, 1.0) * p.width * omega);
  }
  return eps;
}

double permittivity_imag_axis(const DrudeLorentzModel& model, double xi) {
  check_model(model);
  if (!(xi > 0)) throw std::domain_error("permittivity_imag_axis: xi must be > 0");
  double eps = model.eps_inf;
  eps += model.omega_p * model.omega_p / (xi * xi + model.gamma_p * xi);
  for (const auto& p : model.lorentz_poles)
    eps += p.amplitude * p.center * p.center /
           (p.center * p.center + xi * xi + p.width * xi);
  return eps;
}

PermittivityTable PermittivityTable::parseCsv(const std::string& text) {
  PermittivityTable t;
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("permittivity table: empty input");
  if (line.find("wavelength_nm") == std::string::npos)
    throw std::runtime_error("permittivity table: missing header wavelength_nm,eps_re,eps_im");
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    PermittivityRow row{};
    char c1, c2;
    if (!(ls >> row.wavelength_nm >> c1 >> row.eps_re >> c2 >> row.eps_im) ||
        c1 != ',' || c2 != ',')
      throw std::runtime_error("permittivity table: bad row at line " +
                               std::to_string(lineno));
    t.rows.push_back(row);
  }
  t.validate();
  return t;
}

PermittivityTable PermittivityTable::loadCsv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open permittivity table: " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parseCsv(ss.str());
}

void PermittivityTable::validate() const {
  if (rows.size() < 2)
    throw std::runtime_error("permittivity table: need at least 2 rows");
  for (size_t i = 0; i < rows.size(); ++i) {
    if (i > 0 && !(rows[i].wavelength_nm > rows[i - 1].wavelength_nm))
      throw std::runtime_error("permittivity table: wavelengths must be strictly increasing");
    if (rows[i].eps_im < 0)
      throw std::runtime_error("permittivity table: Im eps must be >= 0");
  }
}

cplx PermittivityTable::interpolate(double wl) const {
  if (rows.empty() || wl < rows.front().wavelength_nm || wl > rows.back().wavelength_nm)
    throw std::domain_error("permittivity table: wavelength outside table support");
  auto it = std::lower_bound(rows.begin(), rows.end(), wl,
                             [](const PermittivityRow& r, double w) {
                               return r.wavelength_nm < w;
                             });
  if (it == rows.begin()) return {it->eps_re, it->eps_im};
  auto lo = std::prev(it);
  double f = (wl - lo->wavelength_nm) / (it->wavelength_nm - lo->wavelength_nm);
  return {lo->eps_re + f * (it->eps_re - lo->eps_re),
          lo->eps_im + f * (it->eps_im - lo->eps_im)};
}

namespace {

// Parameter packing for the fit: everything positive goes through log so the
// optimizer cannot leave the passive region. eps_inf is kept >= 1.
std::vector<double> pack(const DrudeLorentzModel& m) {
  std::vector<double> p;
  p.push_back(std::log(std::max(m.eps_inf - 1.0, 1e-6)));
  p.push_back(std::log(std::max(m.omega_p, 1.0)));
  p.push_back(std::log(std::max(m.gamma_p, 1.0)));
  for (const auto& lp : m.lorentz_poles) {
    p.push_back(std::log(std::max(lp.amplitude, 1e-8)));
    p.push_back(std::log(std::max(lp.center, 1.0)));
    p.push_back(std::log(std::max(lp.width, 1.0)));
  }
  return p;
}

DrudeLorentzModel unpack(const std::vector<double>& p, size_t npoles) {
  DrudeLorentzModel m;
  m.eps_inf = 1.0 + std::exp(p[0]);
  m.omega_p = std::exp(p[1]);
  m.gamma_p = std::exp(p[2]);
  for (size_t j = 0; j < npoles; ++j) {
    LorentzPole lp;
    lp.amplitude = std::exp(p[3 + 3 * j]);
    lp.center = std::exp(p[4 + 3 * j]);
    lp.width = std::exp(p[5 + 3 * j]);
    m.lorentz_poles.push_back(lp);
  }
  return m;
}

}  // namespace

FitReport fit_drude_lorentz(const PermittivityTable& table,
                            const DrudeLorentzModel& seed,
                            const FitOptions& opts) {
  check_model(seed);
  if (!(opts.band_min_nm < opts.band_max_nm))
    throw std::invalid_argument("fit band is empty");
  std::vector<const PermittivityRow*> band;
  for (const auto& r : table.rows)
    if (r.wavelength_nm >= opts.band_min_nm && r.wavelength_nm <= opts.band_max_nm)
      band.push_back(&r);
  if (band.size() < 10)
    throw std::invalid_argument("fit band must contain at least 10 table rows");

  const size_t npoles = seed.lorentz_poles.size();
  std::vector<double> p = pack(seed);
  const int np = static_cast<int>(p.size());
  const int nr = static_cast<int>(2 * band.size());

  auto residuals = [&](const std::vector<double>& params) {
    DrudeLorentzModel m = unpack(params, npoles);
    Eigen::VectorXd r(nr);
    for (size_t i = 0; i < band.size(); ++i) {
      double omega = wavelength_nm_to_omega(band[i]->wavelength_nm);
      cplx em = permittivity(m, omega);
      cplx et(band[i]->eps_re, band[i]->eps_im);
      double w = 1.0 / std::abs(et);
      r[2 * i] = (em.real() - et.real()) * w;
      r[2 * i + 1] = (em.imag() - et.imag()) * w;
    }
    return r;
  };

  Eigen::VectorXd r = residuals(p);
  double cost = r.squaredNorm();
  double lambda = 1e-3;
  int iter = 0;
  for (; iter < opts.max_iterations; ++iter) {
    Eigen::MatrixXd J(nr, np);
    for (int j = 0; j < np; ++j) {
      double h = 1e-6 * std::max(1.0, std::abs(p[j]));
      auto pj = p;
      pj[j] += h;
      J.col(j) = (residuals(pj) - r) / h;
    }
    Eigen::MatrixXd JtJ = J.transpose() * J;
    Eigen::VectorXd g = J.transpose() * r;
    bool improved = false;
    for (int tries = 0; tries < 12; ++tries) {
      Eigen::MatrixXd A = JtJ;
      A.diagonal() += lambda * JtJ.diagonal().cwiseMax(1e-12);
      Eigen::VectorXd step = A.ldlt().solve(-g);
      auto pn = p;
      // cap each log-space step at half an e-fold: a runaway step can park a
      // rate at zero where its gradient vanishes for good
      for (int j = 0; j < np; ++j) pn[j] += std::clamp(step[j], -0.5, 0.5);
      Eigen::VectorXd rn = residuals(pn);
      double cn = rn.squaredNorm();
      if (cn < cost) {
        p = pn;
        r = rn;
        double rel = (cost - cn) / std::max(cost, 1e-300);
        cost = cn;
        lambda = std::max(lambda * 0.3, 1e-12);
        improved = true;
        if (rel < 1e-12) iter = opts.max_iterations;  // converged
        break;
      }
      lambda *= 4.0;
    }
    if (!improved) break;
  }

  FitReport rep;
  rep.model = unpack(p, npoles);
  rep.iterations = iter;
  double maxrel = 0, sum = 0;
  for (size_t i = 0; i < band.size(); ++i) {
    double rel = std::hypot(r[2 * i], r[2 * i + 1]);  // already |.|-weighted
    maxrel = std::max(maxrel, rel);
    sum += rel * rel;
  }
  rep.rms_relative_residual = std::sqrt(sum / band.size());
  rep.max_relative_residual = maxrel;
  if (rep.rms_relative_residual > opts.residual_threshold) {
    throw std::runtime_error(
        "Drude-Lorentz fit failed: rms relative residual " +
        std::to_string(rep.rms_relative_residual) + " exceeds threshold " +
        std::to_string(opts.residual_threshold));
  }
  return rep;
}

namespace {

// Drude + single-Lorentz parametrization of gold optical constants in the
// visible (after Vial et al., widely used for FDTD gold). Generates the
// shipped reference table.
DrudeLorentzModel gold_reference() {
  DrudeLorentzModel m;
  m.eps_inf = 5.9673;
  m.omega_p = 1.32801e16;
  m.gamma_p = 1.00027e14;
  m.lorentz_poles.push_back({1.09, 4.08407e15, 6.58862e14});
  return m;
}

}  // namespace

PermittivityTable default_gold_table() {
  PermittivityTable t;
  DrudeLorentzModel ref = gold_reference();
  for (int wl = 400; wl <= 1000; wl += 10) {
    cplx e = permittivity(ref, wavelength_nm_to_omega(wl));
    t.rows.push_back({static_cast<double>(wl), e.real(), e.imag()});
  }
  return t;
}

DrudeLorentzModel default_gold() {
  static std::once_flag flag;
  static DrudeLorentzModel model;
  std::call_once(flag, [] {
    DrudeLorentzModel seed = gold_reference();
    // second pole picks up residual interband structure; the fit shrinks it
    // when the table does not need it
    seed.lorentz_poles.push_back({0.05, 5.2e15, 9.0e14});
    FitOptions opts;
    model = fit_drude_lorentz(default_gold_table(), seed, opts).model;
  });
  return model;
}

}  // namespace nanosq::materials
