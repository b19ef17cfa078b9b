#include "nanosqueeze/scan.hpp"

#include <atomic>
#include <cmath>
#include <functional>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <thread>

#include "nanosqueeze/constants.hpp"
#include "nanosqueeze/quadrature.hpp"
#include "nanosqueeze/sha256.hpp"

namespace nanosq::scan {

namespace {

constexpr const char* kVersion = "0.1.0";
using json = nlohmann::json;

const double kNaN = std::numeric_limits<double>::quiet_NaN();

// ---------------------------------------------------------------------------
// config parsing

Samples parse_samples(const json& j, const char* what) {
  Samples s;
  if (j.is_number()) {
    s.values.push_back(j.get<double>());
  } else if (j.is_array()) {
    for (const auto& v : j) {
      if (!v.is_number())
        throw ConfigError(std::string(what) + ": array entries must be numbers");
      s.values.push_back(v.get<double>());
    }
  } else if (j.is_object()) {
    if (!j.contains("min") || !j.contains("max") || !j.contains("count"))
      throw ConfigError(std::string(what) + ": range needs min, max, count");
    int n = j.at("count").get<int>();
    if (n < 1) throw ConfigError(std::string(what) + ": count must be >= 1");
    s = Samples::linspace(j.at("min").get<double>(), j.at("max").get<double>(), n);
  } else {
    throw ConfigError(std::string(what) +
                      ": expected number, array, or {min, max, count}");
  }
  if (s.values.empty())
    throw ConfigError(std::string(what) + ": empty sample list");
  for (double v : s.values)
    if (!std::isfinite(v))
      throw ConfigError(std::string(what) + ": samples must be finite");
  return s;
}

Vec3 parse_vec3(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 3)
    throw ConfigError(std::string(what) + ": expected [x, y, z]");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

json vec3_json(const Vec3& v) { return json::array({v.x, v.y, v.z}); }

ScanKind parse_kind(const std::string& s) {
  if (s == "amplitude_map") return ScanKind::amplitude_map;
  if (s == "farfield_pattern") return ScanKind::farfield_pattern;
  if (s == "variance_map") return ScanKind::variance_map;
  if (s == "distance_scan") return ScanKind::distance_scan;
  if (s == "spatial_map") return ScanKind::spatial_map;
  throw ConfigError("unknown scan kind: " + s);
}

const char* kind_name(ScanKind k) {
  switch (k) {
    case ScanKind::amplitude_map: return "amplitude_map";
    case ScanKind::farfield_pattern: return "farfield_pattern";
    case ScanKind::variance_map: return "variance_map";
    case ScanKind::distance_scan: return "distance_scan";
    case ScanKind::spatial_map: return "spatial_map";
  }
  return "?";
}

const char* detection_name(Detection d) {
  switch (d) {
    case Detection::d1_far: return "D1";
    case Detection::d2_near: return "D2";
    case Detection::custom: return "custom";
  }
  return "?";
}

int parse_component(const std::string& s) {
  if (s == "auto") return -1;
  if (s == "r") return 0;
  if (s == "theta") return 1;
  if (s == "phi") return 2;
  throw ConfigError("component must be auto, r, theta, or phi");
}

const char* component_name(int c) {
  switch (c) {
    case 0: return "r";
    case 1: return "theta";
    case 2: return "phi";
    default: return "auto";
  }
}

materials::DrudeLorentzModel parse_model(const json& j) {
  materials::DrudeLorentzModel m;
  m.eps_inf = j.value("eps_inf", 1.0);
  m.omega_p = j.value("omega_p", 0.0);
  m.gamma_p = j.value("gamma_p", 0.0);
  if (j.contains("lorentz_poles"))
    for (const auto& p : j.at("lorentz_poles"))
      m.lorentz_poles.push_back({p.value("amplitude", 0.0),
                                 p.value("center", 0.0), p.value("width", 0.0)});
  return m;
}

json model_json(const materials::DrudeLorentzModel& m) {
  json j;
  j["eps_inf"] = m.eps_inf;
  j["omega_p"] = m.omega_p;
  j["gamma_p"] = m.gamma_p;
  j["lorentz_poles"] = json::array();
  for (const auto& p : m.lorentz_poles)
    j["lorentz_poles"].push_back(
        {{"amplitude", p.amplitude}, {"center", p.center}, {"width", p.width}});
  return j;
}

// ---------------------------------------------------------------------------
// grid execution

// Independent per-point tasks; results land in pre-allocated arrays by index,
// so scheduling cannot affect the output.
void parallel_for(size_t n, int threads, const std::string& label,
                  const std::function<void(size_t)>& task) {
  int workers = std::max(1, std::min<int>(threads, (int)n));
  std::atomic<size_t> next{0}, done{0};
  std::atomic<int> decile{0};
  auto body = [&] {
    for (;;) {
      size_t i = next.fetch_add(1);
      if (i >= n) return;
      task(i);
      size_t d = done.fetch_add(1) + 1;
      int dec = (int)(10 * d / n);
      int seen = decile.load();
      if (dec > seen && decile.compare_exchange_strong(seen, dec))
        std::fprintf(stderr, "%s: %3d%% (%zu/%zu)\n", label.c_str(), 10 * dec,
                     d, n);
    }
  };
  if (workers == 1) {
    body();
    return;
  }
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) pool.emplace_back(body);
  for (auto& t : pool) t.join();
}

// Map point-evaluation failures onto per-point error codes.
template <class F>
int guarded(F&& f) {
  try {
    f();
    return kOk;
  } catch (const green::ConvergenceError&) {
    return kConvergence;
  } catch (const quad::QuadratureError&) {
    return kConvergence;
  } catch (const std::domain_error&) {
    return kInvalidPoint;
  } catch (const std::invalid_argument&) {
    return kInvalidPoint;
  }
}

emitter::Emitter make_emitter(const ScanConfig& cfg, double radius_nm,
                              double separation_nm, double lambda_nm) {
  emitter::Emitter e;
  e.position = {0.0, 0.0, (radius_nm + separation_nm) * nm};
  e.orientation = cfg.orientation.normalized();
  e.dipole = cfg.dipole;
  e.omega_E = wavelength_nm_to_omega(lambda_nm);
  e.gamma_star = cfg.dephasing_ratio * emitter::free_space_decay_rate(e);
  return e;
}

Vec3 detection_point(const ScanConfig& cfg, double lambda_nm,
                     double radius_nm) {
  switch (cfg.detection) {
    case Detection::d1_far:
      return {1e5 * lambda_nm * nm, 0.0, 0.0};
    case Detection::d2_near:
      return {0.0, 0.0, -(radius_nm + 10.0) * nm};
    case Detection::custom:
      return cfg.custom_point_nm * nm;
  }
  return {};
}

squeeze::PvSettings pv_settings(const ScanConfig& cfg) {
  squeeze::PvSettings pv;
  pv.cutoff_factor = cfg.pv_cutoff_factor;
  pv.rel_tol = cfg.quad_rel_tol;
  pv.green_tol = cfg.green_tol;
  return pv;
}

// Dressed rates without the Lamb shift, which only enters for the bare
// detuning reference.
emitter::DressedRates base_rates(const emitter::Emitter& e,
                                 const green::SphereSystem& sys,
                                 const emitter::Drive& drive,
                                 const ScanConfig& cfg,
                                 bool need_rabi = true) {
  emitter::DressedRates d;
  d.omega_E = e.omega_E;
  d.gamma_0 = emitter::free_space_decay_rate(e);
  d.gamma = sys.radius > 0 ? emitter::decay_rate(e, sys) : d.gamma_0;
  d.rabi = (need_rabi && sys.radius > 0)
               ? emitter::rabi_enhancement(e, sys, drive)
               : cplx(1.0, 0.0);
  d.x = 2.0 * e.gamma_star / d.gamma;
  d.omega_tilde = e.omega_E;
  if (cfg.detuning_reference == emitter::DetuningReference::bare &&
      sys.radius > 0) {
    emitter::QuadratureSettings q;
    q.rel_tol = cfg.quad_rel_tol;
    q.green_tol = cfg.green_tol;
    d.omega_tilde = emitter::lamb_shift(e, sys, q);
  }
  return d;
}

void base_metadata(ResultGrid& g, const ScanConfig& cfg) {
  g.metadata.emplace_back("version", kVersion);
  g.metadata.emplace_back("scan", kind_name(cfg.scan));
  g.metadata.emplace_back("config_hash", cfg.hash());
  g.metadata.emplace_back("mode", cfg.resolved_mode() == squeeze::Mode::full
                                      ? "full"
                                      : "far_field");
  g.metadata.emplace_back("detection", detection_name(cfg.detection));
  g.metadata.emplace_back("component",
                          component_name(cfg.resolved_component()));
  g.metadata.emplace_back(
      "incidence", "plane wave along +x, polarized along z (side illumination)");
}

void minmax_metadata(ResultGrid& g) {
  double lo = kNaN, hi = kNaN;
  bool first = true;
  for (size_t i = 0; i < g.values.size(); ++i) {
    if (g.errors[i] != kOk) continue;
    double v = g.values[i];
    if (first) {
      lo = hi = v;
      first = false;
    } else {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", lo);
  g.metadata.emplace_back("value_min", buf);
  std::snprintf(buf, sizeof buf, "%.12g", hi);
  g.metadata.emplace_back("value_max", buf);
}

std::string format_double(double v, const char* f = "%.12g") {
  char buf[40];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

}  // namespace

// ---------------------------------------------------------------------------
// Samples / ScanConfig

Samples Samples::linspace(double a, double b, int n) {
  Samples s;
  if (n == 1) {
    s.values.push_back(a);
    return s;
  }
  s.values.reserve(n);
  for (int i = 0; i < n; ++i)
    s.values.push_back(a + (b - a) * i / (n - 1));
  return s;
}

double Samples::only() const {
  if (values.size() != 1)
    throw ConfigError("expected a single value, got a range of " +
                      std::to_string(values.size()));
  return values.front();
}

ScanConfig ScanConfig::from_json(const json& j) {
  try {
    ScanConfig c;
    c.scan = parse_kind(j.at("scan").get<std::string>());

    if (j.contains("geometry")) {
      const auto& g = j.at("geometry");
      if (g.contains("radius_nm"))
        c.radius_nm = parse_samples(g.at("radius_nm"), "radius_nm");
      if (g.contains("separation_nm"))
        c.separation_nm = parse_samples(g.at("separation_nm"), "separation_nm");
      if (g.contains("detection")) {
        const auto& d = g.at("detection");
        if (d.is_string()) {
          std::string s = d.get<std::string>();
          if (s == "D1") c.detection = Detection::d1_far;
          else if (s == "D2") c.detection = Detection::d2_near;
          else throw ConfigError("detection must be D1, D2, or {point_nm}");
        } else if (d.is_object() && d.contains("point_nm")) {
          c.detection = Detection::custom;
          c.custom_point_nm = parse_vec3(d.at("point_nm"), "point_nm");
        } else {
          throw ConfigError("detection must be D1, D2, or {point_nm}");
        }
      }
      if (g.contains("component"))
        c.component = parse_component(g.at("component").get<std::string>());
      if (g.contains("theta_count")) c.theta_count = g.at("theta_count").get<int>();
    }

    if (j.contains("emitter")) {
      const auto& e = j.at("emitter");
      if (e.contains("wavelength_nm"))
        c.wavelength_nm = parse_samples(e.at("wavelength_nm"), "wavelength_nm");
      c.dipole = e.value("dipole", c.dipole);
      if (e.contains("orientation"))
        c.orientation = parse_vec3(e.at("orientation"), "orientation");
      c.dephasing_ratio = e.value("dephasing_ratio", c.dephasing_ratio);
    }

    if (j.contains("drive")) {
      const auto& d = j.at("drive");
      if (d.contains("delta0")) c.delta0 = parse_samples(d.at("delta0"), "delta0");
      if (d.contains("z0")) c.z0 = parse_samples(d.at("z0"), "z0");
      if (d.contains("rabi_over_gamma0") && !d.at("rabi_over_gamma0").empty())
        c.rabi_over_gamma0 =
            parse_samples(d.at("rabi_over_gamma0"), "rabi_over_gamma0").values;
      c.reference_rabi_over_gamma0 =
          d.value("reference_rabi_over_gamma0", c.reference_rabi_over_gamma0);
      c.optimal_drive = d.value("optimal", c.optimal_drive);
      if (d.contains("k_dir")) c.k_dir = parse_vec3(d.at("k_dir"), "k_dir");
      if (d.contains("polarization"))
        c.polarization = parse_vec3(d.at("polarization"), "polarization");
      if (d.contains("detuning_reference")) {
        std::string s = d.at("detuning_reference").get<std::string>();
        if (s == "dressed")
          c.detuning_reference = emitter::DetuningReference::dressed;
        else if (s == "bare")
          c.detuning_reference = emitter::DetuningReference::bare;
        else
          throw ConfigError("detuning_reference must be dressed or bare");
      }
    }

    if (j.contains("material")) {
      const auto& m = j.at("material");
      if (m.contains("model")) c.model = parse_model(m.at("model"));
      else if (m.contains("table")) c.table_path = m.at("table").get<std::string>();
      // otherwise the shipped gold model
    }

    if (j.contains("numerics")) {
      const auto& n = j.at("numerics");
      if (n.contains("mode")) {
        std::string s = n.at("mode").get<std::string>();
        if (s == "far_field") c.mode = squeeze::Mode::far_field;
        else if (s == "full") c.mode = squeeze::Mode::full;
        else if (s != "auto") throw ConfigError("mode must be auto, far_field, or full");
      }
      c.green_tol = n.value("green_tol", c.green_tol);
      c.quad_rel_tol = n.value("quad_rel_tol", c.quad_rel_tol);
      c.pv_cutoff_factor = n.value("pv_cutoff_factor", c.pv_cutoff_factor);
    }

    if (j.contains("spatial")) {
      const auto& s = j.at("spatial");
      if (s.contains("x_nm")) c.x_nm = parse_samples(s.at("x_nm"), "x_nm");
      if (s.contains("z_nm")) c.z_nm = parse_samples(s.at("z_nm"), "z_nm");
    }

    if (j.contains("output")) {
      const auto& o = j.at("output");
      c.name = o.value("name", c.name);
      c.out_dir = o.value("out_dir", c.out_dir);
      if (o.contains("formats")) {
        c.formats.clear();
        for (const auto& f : o.at("formats"))
          c.formats.push_back(f.get<std::string>());
      }
    }

    c.validate();
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
}

ScanConfig ScanConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  return from_json(j);
}

json ScanConfig::to_json() const {
  json j;
  j["scan"] = kind_name(scan);

  json g;
  g["radius_nm"] = radius_nm.values;
  g["separation_nm"] = separation_nm.values;
  if (detection == Detection::custom)
    g["detection"] = {{"point_nm", vec3_json(custom_point_nm)}};
  else
    g["detection"] = detection_name(detection);
  g["component"] = component_name(component);
  g["theta_count"] = theta_count;
  j["geometry"] = g;

  json e;
  e["wavelength_nm"] = wavelength_nm.values;
  e["dipole"] = dipole;
  e["orientation"] = vec3_json(orientation);
  e["dephasing_ratio"] = dephasing_ratio;
  j["emitter"] = e;

  json d;
  d["delta0"] = delta0.values;
  d["z0"] = z0.values;
  d["rabi_over_gamma0"] = rabi_over_gamma0;
  d["reference_rabi_over_gamma0"] = reference_rabi_over_gamma0;
  d["optimal"] = optimal_drive;
  d["k_dir"] = vec3_json(k_dir);
  d["polarization"] = vec3_json(polarization);
  d["detuning_reference"] =
      detuning_reference == emitter::DetuningReference::bare ? "bare" : "dressed";
  j["drive"] = d;

  json m;
  if (model) m["model"] = model_json(*model);
  else if (!table_path.empty()) m["table"] = table_path;
  else m["default_gold"] = true;
  j["material"] = m;

  json n;
  n["mode"] = mode ? (*mode == squeeze::Mode::full ? "full" : "far_field")
                   : "auto";
  n["green_tol"] = green_tol;
  n["quad_rel_tol"] = quad_rel_tol;
  n["pv_cutoff_factor"] = pv_cutoff_factor;
  j["numerics"] = n;

  json s;
  s["x_nm"] = x_nm.values;
  s["z_nm"] = z_nm.values;
  j["spatial"] = s;

  json o;
  o["name"] = name;
  o["out_dir"] = out_dir;
  o["formats"] = formats;
  j["output"] = o;
  return j;
}

void ScanConfig::validate() const {
  auto positive = [](const Samples& s, const char* what) {
    for (double v : s.values)
      if (!(v > 0)) throw ConfigError(std::string(what) + " must be > 0");
  };
  positive(wavelength_nm, "wavelength_nm");
  positive(separation_nm, "separation_nm");
  for (double r : radius_nm.values)
    if (!(r >= 0)) throw ConfigError("radius_nm must be >= 0");
  if (!(dipole > 0)) throw ConfigError("dipole must be > 0");
  if (!(dephasing_ratio >= 0)) throw ConfigError("dephasing_ratio must be >= 0");
  if (!(green_tol > 0) || !(quad_rel_tol > 0) || !(pv_cutoff_factor > 1))
    throw ConfigError("numerics tolerances must be positive (cutoff factor > 1)");
  if (!(orientation.norm() > 0) || !(k_dir.norm() > 0) ||
      !(polarization.norm() > 0))
    throw ConfigError("direction vectors must be nonzero");
  for (double z : z0.values)
    if (!(z >= 0)) throw ConfigError("z0 must be >= 0");
  for (const auto& f : formats)
    if (f != "csv" && f != "json" && f != "svg")
      throw ConfigError("unknown output format: " + f);
  if (name.empty()) throw ConfigError("output name must not be empty");

  switch (scan) {
    case ScanKind::amplitude_map:
      separation_nm.only();
      break;
    case ScanKind::farfield_pattern:
      wavelength_nm.only();
      separation_nm.only();
      if (theta_count < 4) throw ConfigError("theta_count must be >= 4");
      break;
    case ScanKind::variance_map:
      wavelength_nm.only();
      radius_nm.only();
      separation_nm.only();
      break;
    case ScanKind::distance_scan:
      wavelength_nm.only();
      radius_nm.only();
      delta0.only();
      if (rabi_over_gamma0.empty())
        throw ConfigError("distance_scan needs rabi_over_gamma0");
      break;
    case ScanKind::spatial_map:
      wavelength_nm.only();
      radius_nm.only();
      separation_nm.only();
      if (!optimal_drive) {
        delta0.only();
        z0.only();
      }
      break;
  }

  if (detection == Detection::custom) {
    double rmax = 0;
    for (double r : radius_nm.values) rmax = std::max(rmax, r);
    if (custom_point_nm.norm() <= rmax)
      throw ConfigError("custom detection point lies inside the sphere");
  }
}

materials::DrudeLorentzModel ScanConfig::resolve_material() const {
  if (model) return *model;
  if (!table_path.empty()) {
    auto table = materials::PermittivityTable::loadCsv(table_path);
    auto report = materials::fit_drude_lorentz(table, materials::default_gold());
    return report.model;
  }
  return materials::default_gold();
}

squeeze::Mode ScanConfig::resolved_mode() const {
  if (mode) return *mode;
  if (scan == ScanKind::spatial_map) return squeeze::Mode::full;
  return detection == Detection::d2_near ? squeeze::Mode::full
                                         : squeeze::Mode::far_field;
}

int ScanConfig::resolved_component() const {
  if (component >= 0) return component;
  if (scan == ScanKind::spatial_map) return 0;
  return detection == Detection::d2_near ? 0 : 1;
}

std::string ScanConfig::hash() const { return sha256::hex_digest(to_json().dump()); }

// ---------------------------------------------------------------------------
// ResultGrid

size_t ResultGrid::size() const {
  size_t n = 1;
  for (const auto& a : axes) n *= a.values.size();
  return n;
}

void ResultGrid::allocate() {
  values.assign(size(), kNaN);
  errors.assign(size(), kOk);
}

std::vector<int> ResultGrid::failed_points() const {
  std::vector<int> out;
  for (size_t i = 0; i < errors.size(); ++i)
    if (errors[i] >= kConvergence) out.push_back((int)i);
  return out;
}

// ---------------------------------------------------------------------------
// pipelines

ResultGrid run_amplitude_map(const ScanConfig& cfg, int threads) {
  cfg.validate();
  const auto mat = cfg.resolve_material();
  const auto pv = pv_settings(cfg);
  const auto mode = cfg.resolved_mode();
  const int comp = cfg.resolved_component();
  const double s_nm = cfg.separation_nm.only();

  ResultGrid g;
  g.axes = {{"wavelength_nm", "nm", cfg.wavelength_nm.values},
            {"radius_nm", "nm", cfg.radius_nm.values}};
  g.value_name = "amplitude_ratio";
  g.value_unit = "1";
  g.allocate();

  const size_t nr = cfg.radius_nm.size();
  parallel_for(g.size(), threads, cfg.name, [&](size_t idx) {
    const double lambda = cfg.wavelength_nm.values[idx / nr];
    const double R = cfg.radius_nm.values[idx % nr];
    g.errors[idx] = guarded([&] {
      emitter::Emitter e = make_emitter(cfg, R, s_nm, lambda);
      green::SphereSystem sys{R * nm, mat};
      green::SphereSystem vac{0.0, mat};
      Vec3 r = detection_point(cfg, lambda, R);
      auto amp = squeeze::field_amplitude(e, sys, r, mode, pv);
      auto amp0 = squeeze::field_amplitude(e, vac, r, mode, pv);
      double ratio = amp.magnitude[comp] / amp0.magnitude[comp];
      g.values[idx] = ratio * ratio;
    });
  });

  base_metadata(g, cfg);
  minmax_metadata(g);
  return g;
}

ResultGrid run_farfield_pattern(const ScanConfig& cfg, int threads) {
  cfg.validate();
  const auto mat = cfg.resolve_material();
  const auto pv = pv_settings(cfg);
  const double lambda = cfg.wavelength_nm.only();
  const double s_nm = cfg.separation_nm.only();
  const double r_det = 1e5 * lambda * nm;

  ResultGrid g;
  std::vector<double> thetas(cfg.theta_count);
  for (int k = 0; k < cfg.theta_count; ++k)
    thetas[k] = 2.0 * constants::pi * k / cfg.theta_count;
  g.axes = {{"radius_nm", "nm", cfg.radius_nm.values},
            {"theta", "rad", thetas}};
  g.value_name = "g_theta";
  g.value_unit = "hbar*gamma0/d";
  g.allocate();

  const size_t nt = thetas.size();
  parallel_for(g.size(), threads, cfg.name, [&](size_t idx) {
    const double R = cfg.radius_nm.values[idx / nt];
    const double th = thetas[idx % nt];
    g.errors[idx] = guarded([&] {
      emitter::Emitter e = make_emitter(cfg, R, s_nm, lambda);
      green::SphereSystem sys{R * nm, mat};
      Vec3 r{r_det * std::sin(th), 0.0, r_det * std::cos(th)};
      auto amp =
          squeeze::field_amplitude(e, sys, r, squeeze::Mode::far_field, pv);
      // |g| is a field amplitude; hbar gamma_0 / d is the natural field scale
      // of the free-space emitter
      double scale =
          constants::hbar * emitter::free_space_decay_rate(e) / e.dipole;
      g.values[idx] = amp.magnitude[1] / scale;
    });
  });

  base_metadata(g, cfg);
  minmax_metadata(g);
  return g;
}

ResultGrid run_variance_map(const ScanConfig& cfg, int threads) {
  cfg.validate();
  const auto mat = cfg.resolve_material();
  const auto pv = pv_settings(cfg);
  const int comp = cfg.resolved_component();
  const double lambda = cfg.wavelength_nm.only();
  const double R = cfg.radius_nm.only();
  const double s_nm = cfg.separation_nm.only();

  emitter::Emitter e = make_emitter(cfg, R, s_nm, lambda);
  green::SphereSystem sys{R * nm, mat};
  green::SphereSystem vac{0.0, mat};
  emitter::Drive drive{cfg.k_dir.normalized(), cfg.polarization.normalized()};
  Vec3 r = detection_point(cfg, lambda, R);

  const auto rates = base_rates(e, sys, drive, cfg);
  const auto amp = squeeze::field_amplitude(e, sys, r, cfg.resolved_mode(), pv);
  const auto amp0 =
      squeeze::field_amplitude(e, vac, r, cfg.resolved_mode(), pv);
  const double ratio2 = std::pow(amp.magnitude[comp] / amp0.magnitude[comp], 2);

  ResultGrid g;
  g.axes = {{"delta0", "1", cfg.delta0.values}, {"z0", "1", cfg.z0.values}};
  g.value_name = "normalized_variance";
  g.value_unit = "|g_0|^2";
  g.allocate();

  const size_t nz = cfg.z0.size();
  parallel_for(g.size(), threads, cfg.name, [&](size_t idx) {
    const double d0 = cfg.delta0.values[idx / nz];
    const double zz0 = cfg.z0.values[idx % nz];
    g.errors[idx] = guarded([&] {
      auto [delta, z] = emitter::normalized_params(d0, zz0, rates,
                                                   cfg.detuning_reference);
      g.values[idx] =
          ratio2 * emitter::atomic_variance_optimal(delta, z, rates.x);
    });
  });

  // zero contour: first upward sign change along each z0 column
  for (size_t i = 0; i < cfg.delta0.size(); ++i) {
    bool below = false;
    for (size_t jz = 0; jz < nz; ++jz) {
      double v = g.values[i * nz + jz];
      if (std::isnan(v)) break;
      if (!below) {
        below = v < 0;
        continue;
      }
      if (v >= 0) {
        double v0 = g.values[i * nz + jz - 1];
        double t = -v0 / (v - v0);
        double zb = cfg.z0.values[jz - 1] +
                    t * (cfg.z0.values[jz] - cfg.z0.values[jz - 1]);
        g.contour.push_back({cfg.delta0.values[i], zb});
        break;
      }
    }
  }

  base_metadata(g, cfg);
  g.metadata.emplace_back("gamma_over_gamma0",
                          format_double(rates.gamma / rates.gamma_0));
  g.metadata.emplace_back("rabi_enhancement",
                          format_double(std::abs(rates.rabi)));
  g.metadata.emplace_back("amplitude_ratio", format_double(ratio2));
  minmax_metadata(g);
  return g;
}

ResultGrid run_distance_scan(const ScanConfig& cfg, int threads) {
  cfg.validate();
  const auto mat = cfg.resolve_material();
  const auto pv = pv_settings(cfg);
  const int comp = cfg.resolved_component();
  const double lambda = cfg.wavelength_nm.only();
  const double R = cfg.radius_nm.only();
  const double d0 = cfg.delta0.only();

  ResultGrid g;
  g.axes = {{"rabi_over_gamma0", "1", cfg.rabi_over_gamma0},
            {"separation_nm", "nm", cfg.separation_nm.values}};
  g.value_name = "normalized_variance";
  g.value_unit = "|g_0|^2";
  g.allocate();
  const size_t nw = cfg.rabi_over_gamma0.size();
  const size_t ns = cfg.separation_nm.size();
  g.extra = {{"gamma_over_gamma0", "1", std::vector<double>(g.size(), kNaN)},
             {"amplitude_ratio", "1", std::vector<double>(g.size(), kNaN)},
             {"dephasing_over_gamma", "1", std::vector<double>(g.size(), kNaN)},
             {"reference_variance", "|g_0|^2",
              std::vector<double>(g.size(), kNaN)}};

  // free-space reference: nothing depends on s
  double ref_value = kNaN;
  {
    emitter::Emitter e = make_emitter(cfg, 0.0, cfg.separation_nm.values[0],
                                      lambda);
    double x0 = 2.0 * e.gamma_star / emitter::free_space_decay_rate(e);
    double zr = std::sqrt(2.0) * cfg.reference_rabi_over_gamma0 /
                std::sqrt(1.0 + x0);
    ref_value = emitter::atomic_variance_optimal(0.0, zr, x0);
  }

  emitter::Drive drive{cfg.k_dir.normalized(), cfg.polarization.normalized()};

  parallel_for(ns, threads, cfg.name, [&](size_t is) {
    const double s_nm = cfg.separation_nm.values[is];
    int err = guarded([&] {
      emitter::Emitter e = make_emitter(cfg, R, s_nm, lambda);
      green::SphereSystem sys{R * nm, mat};
      green::SphereSystem vac{0.0, mat};
      Vec3 r = detection_point(cfg, lambda, R);
      // the curves fix the local Rabi frequency Omega (already at the
      // emitter), so the plane-wave enhancement factor must not enter z
      const auto local = base_rates(e, sys, drive, cfg, false);
      const auto amp =
          squeeze::field_amplitude(e, sys, r, cfg.resolved_mode(), pv);
      const auto amp0 =
          squeeze::field_amplitude(e, vac, r, cfg.resolved_mode(), pv);
      double ratio2 = std::pow(amp.magnitude[comp] / amp0.magnitude[comp], 2);
      for (size_t iw = 0; iw < nw; ++iw) {
        size_t idx = iw * ns + is;
        double zz0 = std::sqrt(2.0) * cfg.rabi_over_gamma0[iw];
        auto [delta, z] = emitter::normalized_params(d0, zz0, local,
                                                     cfg.detuning_reference);
        g.values[idx] =
            ratio2 * emitter::atomic_variance_optimal(delta, z, local.x);
        g.extra[0].values[idx] = local.gamma / local.gamma_0;
        g.extra[1].values[idx] = ratio2;
        g.extra[2].values[idx] = local.x;
        g.extra[3].values[idx] = ref_value;
      }
    });
    if (err != kOk)
      for (size_t iw = 0; iw < nw; ++iw) g.errors[iw * ns + is] = err;
  });

  base_metadata(g, cfg);
  minmax_metadata(g);
  return g;
}

ResultGrid run_spatial_map(const ScanConfig& cfg, int threads) {
  cfg.validate();
  const auto mat = cfg.resolve_material();
  const auto pv = pv_settings(cfg);
  const double lambda = cfg.wavelength_nm.only();
  const double R = cfg.radius_nm.only();
  const double s_nm = cfg.separation_nm.only();
  const double omega = wavelength_nm_to_omega(lambda);

  emitter::Emitter e = make_emitter(cfg, R, s_nm, lambda);
  green::SphereSystem sys{R * nm, mat};
  emitter::Drive drive{cfg.k_dir.normalized(), cfg.polarization.normalized()};

  // position-independent atomic factor
  double atomic = 0;
  if (cfg.optimal_drive) {
    double gamma = R > 0 ? emitter::decay_rate(e, sys)
                         : emitter::free_space_decay_rate(e);
    double x = 2.0 * e.gamma_star / gamma;
    double z2 = std::max(0.0, (1.0 - x) / (3.0 + x));
    atomic = emitter::atomic_variance_optimal(0.0, std::sqrt(z2), x);
  } else {
    const auto rates = base_rates(e, sys, drive, cfg);
    auto [delta, z] = emitter::normalized_params(cfg.delta0.only(),
                                                 cfg.z0.only(), rates,
                                                 cfg.detuning_reference);
    atomic = emitter::atomic_variance_optimal(delta, z, rates.x);
  }

  // report in units independent of the specific emitter: each amplitude
  // carries eps0 c^2 / omega_E^2 and one power of 1/|d|, so the variance is
  // scaled by (eps0 c^2 / omega_E^2)^2 / |d|^2 and has dimension 1/m^2
  const double scale = constants::eps0 * constants::c * constants::c /
                       (omega * omega * cfg.dipole);

  ResultGrid g;
  g.axes = {{"x_nm", "nm", cfg.x_nm.values}, {"z_nm", "nm", cfg.z_nm.values}};
  g.value_name = "scaled_variance";
  g.value_unit = "m^-2";
  g.allocate();

  const size_t nz = cfg.z_nm.size();
  parallel_for(g.size(), threads, cfg.name, [&](size_t idx) {
    Vec3 p{cfg.x_nm.values[idx / nz] * nm, 0.0,
           cfg.z_nm.values[idx % nz] * nm};
    if (p.norm() <= R * nm + 0.5 * nm || (p - e.position).norm() <= 2.0 * nm) {
      g.errors[idx] = kMasked;
      return;
    }
    g.errors[idx] = guarded([&] {
      auto amp = squeeze::field_amplitude(e, sys, p, squeeze::Mode::full, pv);
      double m = amp.magnitude[0] * scale;
      g.values[idx] = m * m * atomic;
    });
  });

  base_metadata(g, cfg);
  g.metadata.emplace_back("atomic_variance", format_double(atomic));
  g.metadata.emplace_back(
      "value_convention",
      "variance * (eps0 c^2 / omega_E^2)^2 / |d|^2, units 1/m^2");
  minmax_metadata(g);
  return g;
}

ResultGrid run(const ScanConfig& cfg, int threads) {
  switch (cfg.scan) {
    case ScanKind::amplitude_map: return run_amplitude_map(cfg, threads);
    case ScanKind::farfield_pattern: return run_farfield_pattern(cfg, threads);
    case ScanKind::variance_map: return run_variance_map(cfg, threads);
    case ScanKind::distance_scan: return run_distance_scan(cfg, threads);
    case ScanKind::spatial_map: return run_spatial_map(cfg, threads);
  }
  throw ConfigError("unknown scan kind");
}

// ---------------------------------------------------------------------------
// output

std::string to_csv(const ResultGrid& grid) {
  std::string out;
  for (const auto& a : grid.axes) {
    out += a.name;
    out += ',';
  }
  out += grid.value_name;
  for (const auto& c : grid.extra) {
    out += ',';
    out += c.name;
  }
  out += ",error\n";

  const size_t n = grid.size();
  std::vector<size_t> strides(grid.axes.size(), 1);
  for (size_t a = grid.axes.size(); a-- > 1;)
    strides[a - 1] = strides[a] * grid.axes[a].values.size();
  for (size_t i = 0; i < n; ++i) {
    for (size_t a = 0; a < grid.axes.size(); ++a) {
      size_t k = (i / strides[a]) % grid.axes[a].values.size();
      out += format_double(grid.axes[a].values[k]);
      out += ',';
    }
    if (std::isnan(grid.values[i])) out += "";
    else out += format_double(grid.values[i]);
    for (const auto& c : grid.extra) {
      out += ',';
      if (!std::isnan(c.values[i])) out += format_double(c.values[i]);
    }
    out += ',';
    out += std::to_string(grid.errors[i]);
    out += '\n';
  }
  return out;
}

std::string contour_csv(const ResultGrid& grid) {
  std::string out = grid.axes[0].name + "," + grid.axes[1].name + "\n";
  for (const auto& p : grid.contour)
    out += format_double(p[0]) + "," + format_double(p[1]) + "\n";
  return out;
}

nlohmann::json to_output_json(const ResultGrid& grid) {
  json j;
  j["axes"] = json::array();
  for (const auto& a : grid.axes)
    j["axes"].push_back({{"name", a.name}, {"unit", a.unit},
                         {"values", a.values}});
  j["value"] = {{"name", grid.value_name}, {"unit", grid.value_unit}};
  j["values"] = grid.values;  // NaN serializes to null
  j["errors"] = grid.errors;
  j["extra"] = json::array();
  for (const auto& c : grid.extra)
    j["extra"].push_back({{"name", c.name}, {"unit", c.unit},
                          {"values", c.values}});
  if (!grid.contour.empty()) {
    j["contour"] = json::array();
    for (const auto& p : grid.contour) j["contour"].push_back({p[0], p[1]});
  }
  json meta;
  for (const auto& [k, v] : grid.metadata) meta[k] = v;
  j["metadata"] = meta;
  return j;
}

namespace {

void svg_color(double t, int& r, int& gc, int& b) {
  // diverging blue (-1) - white (0) - red (+1)
  t = std::clamp(t, -1.0, 1.0);
  if (t < 0) {
    r = (int)std::lround(255 * (1 + t));
    gc = (int)std::lround(255 * (1 + t));
    b = 255;
  } else {
    r = 255;
    gc = (int)std::lround(255 * (1 - t));
    b = (int)std::lround(255 * (1 - t));
  }
}

}  // namespace

std::string to_svg(const ResultGrid& grid) {
  char buf[256];
  std::string out;
  const auto& ax = grid.axes;
  bool heat = ax.size() == 2 && ax[0].values.size() > 8 &&
              ax[1].values.size() > 1;

  double lo = 0, hi = 0;
  bool first = true;
  for (size_t i = 0; i < grid.values.size(); ++i) {
    if (grid.errors[i] != kOk) continue;
    double v = grid.values[i];
    if (first) { lo = hi = v; first = false; }
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }

  if (heat) {
    const size_t nx = ax[0].values.size(), ny = ax[1].values.size();
    const double w = 640.0, h = 640.0, mx = 60.0, my = 40.0;
    std::snprintf(buf, sizeof buf,
                  "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%g\" "
                  "height=\"%g\">\n", w + 2 * mx, h + 2 * my);
    out += buf;
    double span = std::max(std::abs(lo), std::abs(hi));
    if (span == 0) span = 1;
    const double cw = w / nx, ch = h / ny;
    for (size_t i = 0; i < nx; ++i)
      for (size_t j = 0; j < ny; ++j) {
        size_t idx = i * ny + j;
        if (grid.errors[idx] != kOk) continue;
        double t = lo < 0 ? grid.values[idx] / span
                          : 2.0 * grid.values[idx] / span - 1.0;
        int r, gc, b;
        svg_color(t, r, gc, b);
        std::snprintf(buf, sizeof buf,
                      "<rect x=\"%.2f\" y=\"%.2f\" width=\"%.2f\" "
                      "height=\"%.2f\" fill=\"rgb(%d,%d,%d)\"/>\n",
                      mx + i * cw, my + h - (j + 1) * ch, cw + 0.5, ch + 0.5,
                      r, gc, b);
        out += buf;
      }
    std::snprintf(buf, sizeof buf,
                  "<text x=\"%g\" y=\"%g\" font-size=\"14\">%s [%s] vs %s, %s "
                  "(min %.4g, max %.4g)</text>\n",
                  mx, my - 10, grid.value_name.c_str(), grid.value_unit.c_str(),
                  ax[0].name.c_str(), ax[1].name.c_str(), lo, hi);
    out += buf;
    out += "</svg>\n";
    return out;
  }

  // line plot: one polyline per value of the first axis
  const size_t ncurve = ax.size() == 2 ? ax[0].values.size() : 1;
  const size_t npts = ax.size() == 2 ? ax[1].values.size()
                                     : ax[0].values.size();
  const auto& xs = ax.size() == 2 ? ax[1].values : ax[0].values;
  const double w = 640.0, h = 400.0, mx = 60.0, my = 40.0;
  std::snprintf(buf, sizeof buf,
                "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%g\" "
                "height=\"%g\">\n", w + 2 * mx, h + 2 * my);
  out += buf;
  double x0 = xs.front(), x1 = xs.back();
  if (x1 == x0) x1 = x0 + 1;
  if (hi == lo) hi = lo + 1;
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                  "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22"};
  for (size_t c = 0; c < ncurve; ++c) {
    std::string pts;
    for (size_t k = 0; k < npts; ++k) {
      size_t idx = c * npts + k;
      if (grid.errors[idx] != kOk || std::isnan(grid.values[idx])) continue;
      double px = mx + w * (xs[k] - x0) / (x1 - x0);
      double py = my + h - h * (grid.values[idx] - lo) / (hi - lo);
      std::snprintf(buf, sizeof buf, "%.2f,%.2f ", px, py);
      pts += buf;
    }
    std::snprintf(buf, sizeof buf,
                  "<polyline fill=\"none\" stroke=\"%s\" stroke-width=\"1.5\" "
                  "points=\"%s\"/>\n",
                  palette[c % 8], pts.c_str());
    out += buf;
  }
  if (lo < 0 && hi > 0) {
    double py = my + h - h * (0.0 - lo) / (hi - lo);
    std::snprintf(buf, sizeof buf,
                  "<line x1=\"%g\" y1=\"%.2f\" x2=\"%g\" y2=\"%.2f\" "
                  "stroke=\"#999\" stroke-dasharray=\"4\"/>\n",
                  mx, py, mx + w, py);
    out += buf;
  }
  std::snprintf(buf, sizeof buf,
                "<text x=\"%g\" y=\"%g\" font-size=\"14\">%s [%s] vs %s "
                "(min %.4g, max %.4g)</text>\n",
                mx, my - 10, grid.value_name.c_str(), grid.value_unit.c_str(),
                ax.back().name.c_str(), lo, hi);
  out += buf;
  out += "</svg>\n";
  return out;
}

namespace {

void write_atomic(const std::string& path, const std::string& content) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + tmp);
    out.write(content.data(), (std::streamsize)content.size());
    if (!out) throw IoError("write failed: " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw IoError("rename failed: " + path);
}

}  // namespace

std::vector<std::string> emit_outputs(const ResultGrid& grid,
                                      const ScanConfig& cfg) {
  std::error_code ec;
  std::filesystem::create_directories(cfg.out_dir, ec);
  if (ec) throw IoError("cannot create output directory: " + cfg.out_dir);
  std::string base = cfg.out_dir + "/" + cfg.name;

  std::vector<std::string> paths;
  for (const auto& f : cfg.formats) {
    if (f == "csv") {
      write_atomic(base + ".csv", to_csv(grid));
      paths.push_back(base + ".csv");
      if (!grid.contour.empty()) {
        write_atomic(base + "_contour.csv", contour_csv(grid));
        paths.push_back(base + "_contour.csv");
      }
    } else if (f == "json") {
      write_atomic(base + ".json", to_output_json(grid).dump(1) + "\n");
      paths.push_back(base + ".json");
    } else if (f == "svg") {
      write_atomic(base + ".svg", to_svg(grid));
      paths.push_back(base + ".svg");
    }
  }
  return paths;
}

}  // namespace nanosq::scan
