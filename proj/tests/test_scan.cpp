#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <fstream>
#include <iterator>

#include "nanosqueeze/constants.hpp"
#include "nanosqueeze/scan.hpp"
#include "nanosqueeze/sha256.hpp"

using namespace nanosq;
using json = nlohmann::json;

namespace {

json minimal_map_config() {
  return json::parse(R"({
    "scan": "amplitude_map",
    "geometry": {"radius_nm": 60, "separation_nm": 10, "detection": "D1"},
    "emitter": {"wavelength_nm": 550}
  })");
}

}  // namespace

TEST_CASE("config round-trip is idempotent") {
  json j = json::parse(R"({
    "scan": "variance_map",
    "geometry": {"radius_nm": 60, "separation_nm": 10, "detection": "D2",
                 "component": "r"},
    "emitter": {"wavelength_nm": 550, "dipole": 2e-29, "dephasing_ratio": 0.5},
    "drive": {"delta0": {"min": -10, "max": 10, "count": 5},
              "z0": [0, 1, 2], "detuning_reference": "dressed"},
    "numerics": {"mode": "full", "green_tol": 1e-7},
    "output": {"name": "t", "formats": ["csv", "json", "svg"]}
  })");
  auto c1 = scan::ScanConfig::from_json(j);
  auto s1 = c1.to_json();
  auto c2 = scan::ScanConfig::from_json(s1);
  auto s2 = c2.to_json();
  CHECK(s1.dump() == s2.dump());
  CHECK(c1.hash() == c2.hash());

  // ranges resolve to explicit sample lists
  CHECK(c1.delta0.size() == 5);
  CHECK(c1.delta0.values[1] == doctest::Approx(-5.0));
}

TEST_CASE("config validation rejects bad input") {
  json j = minimal_map_config();
  j["geometry"]["separation_nm"] = json::array({5, 10});  // must be singleton
  CHECK_THROWS_AS(scan::ScanConfig::from_json(j), scan::ConfigError);

  j = minimal_map_config();
  j["emitter"]["wavelength_nm"] = -5;
  CHECK_THROWS_AS(scan::ScanConfig::from_json(j), scan::ConfigError);

  j = minimal_map_config();
  j["geometry"]["detection"] = {{"point_nm", {10, 0, 0}}};  // inside R = 60
  CHECK_THROWS_AS(scan::ScanConfig::from_json(j), scan::ConfigError);

  j = minimal_map_config();
  j["output"] = {{"formats", {"pdf"}}};
  CHECK_THROWS_AS(scan::ScanConfig::from_json(j), scan::ConfigError);
}

TEST_CASE("degenerate amplitude map equals the direct library call") {
  auto cfg = scan::ScanConfig::from_json(minimal_map_config());
  auto grid = scan::run_amplitude_map(cfg);
  REQUIRE(grid.size() == 1);
  REQUIRE(grid.errors[0] == scan::kOk);

  emitter::Emitter e;
  e.position = {0, 0, 70 * nm};
  e.omega_E = wavelength_nm_to_omega(550.0);
  e.gamma_star = 0;
  green::SphereSystem sys{60 * nm, materials::default_gold()};
  green::SphereSystem vac{0.0, materials::default_gold()};
  Vec3 r{1e5 * 550 * nm, 0, 0};
  auto amp = squeeze::field_amplitude(e, sys, r, squeeze::Mode::far_field);
  auto amp0 = squeeze::field_amplitude(e, vac, r, squeeze::Mode::far_field);
  double want = std::pow(amp.magnitude[1] / amp0.magnitude[1], 2);
  CHECK(grid.values[0] == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("free-space far-field pattern follows |sin theta|") {
  json j = json::parse(R"({
    "scan": "farfield_pattern",
    "geometry": {"radius_nm": [0], "separation_nm": 10, "theta_count": 24},
    "emitter": {"wavelength_nm": 550}
  })");
  auto grid = scan::run_farfield_pattern(scan::ScanConfig::from_json(j));
  REQUIRE(grid.size() == 24);
  double at90 = grid.values[6];  // theta = pi/2
  REQUIRE(at90 > 0);
  for (int k = 0; k < 24; ++k) {
    double th = grid.axes[1].values[k];
    // normalize so the comparison scale is O(1); |g| in hbar*gamma0 units is
    // tiny at 1e5 wavelengths
    CHECK(grid.values[k] / at90 ==
          doctest::Approx(std::abs(std::sin(th))).epsilon(2e-3));
  }
}

TEST_CASE("variance map: z0 = 0 row vanishes and the contour brackets zero") {
  json j = json::parse(R"({
    "scan": "variance_map",
    "geometry": {"radius_nm": 0, "separation_nm": 10},
    "emitter": {"wavelength_nm": 550},
    "drive": {"delta0": {"min": -3, "max": 3, "count": 7},
              "z0": {"min": 0, "max": 4, "count": 33}}
  })");
  auto grid = scan::run_variance_map(scan::ScanConfig::from_json(j));
  const size_t nz = 33;
  for (size_t i = 0; i < 7; ++i) {
    CHECK(grid.values[i * nz] == 0.0);  // z0 = 0
  }
  // free space, x = 0: boundary at z0 = sqrt(1 + delta0^2)
  REQUIRE(grid.contour.size() == 7);
  for (const auto& p : grid.contour) {
    double want = std::sqrt(1.0 + p[0] * p[0]);
    CHECK(p[1] == doctest::Approx(want).epsilon(0.02));
  }
}

TEST_CASE("csv contract: one row per point, NaN flagged with empty cell") {
  scan::ResultGrid g;
  g.axes = {{"a", "1", {1.0, 2.0}}, {"b", "1", {10.0}}};
  g.value_name = "v";
  g.value_unit = "1";
  g.allocate();
  g.values[0] = 0.5;
  g.errors[1] = scan::kConvergence;  // value stays NaN
  std::string csv = scan::to_csv(g);
  CHECK(csv == "a,b,v,error\n1,10,0.5,0\n2,10,,2\n");
  CHECK(g.failed_points() == std::vector<int>{1});
}

TEST_CASE("outputs are deterministic and written atomically") {
  json j = minimal_map_config();
  j["geometry"]["radius_nm"] = json::array({40, 60});
  j["emitter"]["wavelength_nm"] =
      json{{"min", 500}, {"max", 600}, {"count", 3}};
  j["output"] = {{"name", "det_check"},
                 {"out_dir", "scan_test_out"},
                 {"formats", {"csv", "json", "svg"}}};
  auto cfg = scan::ScanConfig::from_json(j);

  auto g1 = scan::run(cfg, 1);
  auto g3 = scan::run(cfg, 3);
  REQUIRE(g1.values.size() == g3.values.size());
  for (size_t i = 0; i < g1.values.size(); ++i)
    CHECK(g1.values[i] == g3.values[i]);  // bitwise, worker-count independent

  auto paths = scan::emit_outputs(g1, cfg);
  REQUIRE(paths.size() == 3);
  std::string csv1 = scan::to_csv(g1);
  std::string csv3 = scan::to_csv(g3);
  CHECK(sha256::hex_digest(csv1) == sha256::hex_digest(csv3));

  // re-run, re-emit: same bytes on disk
  std::ifstream in(paths[0], std::ios::binary);
  std::string on_disk((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
  CHECK(on_disk == csv1);
}

TEST_CASE("sha256 reference vectors") {
  CHECK(sha256::hex_digest("") ==
        "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256::hex_digest("abc") ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}
