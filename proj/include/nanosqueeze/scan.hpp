#pragma once

#include <array>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "nanosqueeze/emitter.hpp"
#include "nanosqueeze/materials.hpp"
#include "nanosqueeze/squeeze.hpp"

namespace nanosq::scan {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Ordered sample list for one swept quantity. Configs accept a bare number,
// an explicit array, or {"min":..,"max":..,"count":..}; serialization always
// emits the resolved sample array, so parse -> serialize -> parse is
// idempotent.
struct Samples {
  std::vector<double> values;

  static Samples single(double v) { return {{v}}; }
  static Samples linspace(double a, double b, int n);
  bool singleton() const { return values.size() == 1; }
  double only() const;  // throws ConfigError unless singleton
  size_t size() const { return values.size(); }
};

enum class ScanKind {
  amplitude_map,    // |g_i / g_{i,0}|^2 over (wavelength, radius)
  farfield_pattern, // |g_theta| polar pattern at fixed far-field distance
  variance_map,     // normalized variance over (delta0, z0)
  distance_scan,    // normalized variance vs emitter-surface distance
  spatial_map,      // radial-component variance over the xz-plane
};

enum class Detection {
  d1_far,  // on the x-axis, 1e5 wavelengths from the sphere center
  d2_near, // on the z-axis, 10 nm below the sphere surface (opposite the emitter)
  custom,  // explicit point in nm
};

struct ScanConfig {
  ScanKind scan = ScanKind::amplitude_map;

  // geometry
  Samples radius_nm = Samples::single(60.0);
  Samples separation_nm = Samples::single(10.0);
  Detection detection = Detection::d1_far;
  Vec3 custom_point_nm{};
  int component = -1;     // spherical index 0=r,1=theta,2=phi; -1 = by detection
  int theta_count = 201;  // farfield_pattern polar samples over [0, 2 pi)

  // emitter
  Samples wavelength_nm = Samples::single(550.0);
  double dipole = 1e-29;            // C m
  Vec3 orientation{0.0, 0.0, 1.0};  // radial by default
  double dephasing_ratio = 0.0;     // gamma* / gamma_0

  // drive
  Samples delta0 = Samples::single(0.0);
  Samples z0 = Samples::single(0.0);
  std::vector<double> rabi_over_gamma0;            // distance_scan curves
  double reference_rabi_over_gamma0 = 0.4;         // free-space reference curve
  bool optimal_drive = false;                      // spatial_map: optimal (delta, z)
  Vec3 k_dir{1.0, 0.0, 0.0};
  Vec3 polarization{0.0, 0.0, 1.0};
  emitter::DetuningReference detuning_reference = emitter::DetuningReference::dressed;

  // material: default gold model, explicit Drude-Lorentz parameters, or a
  // permittivity table to be fitted at load time
  std::optional<materials::DrudeLorentzModel> model;
  std::string table_path;

  // numerics
  std::optional<squeeze::Mode> mode;  // unset: far_field at D1, full at D2
  double green_tol = 1e-9;
  double quad_rel_tol = 1e-8;
  double pv_cutoff_factor = 20.0;

  // spatial_map window
  Samples x_nm = Samples::linspace(-200.0, 200.0, 61);
  Samples z_nm = Samples::linspace(-200.0, 200.0, 61);

  // output
  std::string name = "scan";
  std::string out_dir = ".";
  std::vector<std::string> formats{"csv", "json"};

  static ScanConfig from_json(const nlohmann::json& j);
  static ScanConfig from_file(const std::string& path);
  nlohmann::json to_json() const;
  void validate() const;  // throws ConfigError

  materials::DrudeLorentzModel resolve_material() const;
  squeeze::Mode resolved_mode() const;
  int resolved_component() const;
  std::string hash() const;  // SHA-256 of the canonical serialization
};

// Per-point error codes. Failed points carry NaN values; the run continues.
inline constexpr int kOk = 0;
inline constexpr int kMasked = 1;       // inside the sphere / at the emitter
inline constexpr int kConvergence = 2;  // series or quadrature failure
inline constexpr int kInvalidPoint = 3;

struct Axis {
  std::string name, unit;
  std::vector<double> values;
};

// Auxiliary per-point column (distance-scan inset quantities and the like).
struct Column {
  std::string name, unit;
  std::vector<double> values;
};

struct ResultGrid {
  std::vector<Axis> axes;  // row-major over axes in declared order
  std::string value_name, value_unit;
  std::vector<double> values;
  std::vector<int> errors;
  std::vector<Column> extra;
  std::vector<std::array<double, 2>> contour;  // variance-map zero boundary
  std::vector<std::pair<std::string, std::string>> metadata;

  size_t size() const;
  void allocate();  // size values/errors from axes
  std::vector<int> failed_points() const;  // indices with error >= kConvergence
};

ResultGrid run_amplitude_map(const ScanConfig& cfg, int threads = 1);
ResultGrid run_farfield_pattern(const ScanConfig& cfg, int threads = 1);
ResultGrid run_variance_map(const ScanConfig& cfg, int threads = 1);
ResultGrid run_distance_scan(const ScanConfig& cfg, int threads = 1);
ResultGrid run_spatial_map(const ScanConfig& cfg, int threads = 1);

// Dispatch on cfg.scan.
ResultGrid run(const ScanConfig& cfg, int threads = 1);

std::string to_csv(const ResultGrid& grid);
std::string contour_csv(const ResultGrid& grid);
nlohmann::json to_output_json(const ResultGrid& grid);
std::string to_svg(const ResultGrid& grid);

// Writes the formats requested in cfg (temp file + rename; throws IoError).
// Returns the written paths.
std::vector<std::string> emit_outputs(const ResultGrid& grid,
                                      const ScanConfig& cfg);

}  // namespace nanosq::scan
