#include "thzsb/channel.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <numbers>
#include <sstream>

namespace thzsb {

namespace {

constexpr double kPi = std::numbers::pi;

double wrap_angle(double a) {
  // into (-pi, pi]
  a = std::fmod(a + kPi, 2.0 * kPi);
  if (a <= 0.0) a += 2.0 * kPi;
  return a - kPi;
}

// U(-pi, pi]: the half-open flip keeps -pi out and pi in.
double draw_angle(SeededRng& rng) { return kPi - 2.0 * kPi * rng.uniform(); }

}  // namespace

double vacuum_impedance() {
  return std::sqrt(kVacuumPermeability / kVacuumPermittivity);
}

std::vector<Material> table_v_materials() {
  return {
      {"plaster_s1", 0.05e-3, 10.0 * 100.0, 2.0},
      {"gypsum_plaster", 0.13e-3, 38.0 * 100.0, 1.4},
      {"plaster_s2", 0.15e-3, 10.0 * 100.0, 2.0},
  };
}

AbsorptionTable::AbsorptionTable(std::vector<std::pair<double, double>> points)
    : points_(std::move(points)) {
  for (std::size_t i = 0; i < points_.size(); ++i) {
    if (points_[i].second < 0.0) {
      throw ConfigError("absorption table: negative coefficient at row " +
                        std::to_string(i + 1));
    }
    if (i > 0 && points_[i].first <= points_[i - 1].first) {
      throw ConfigError(
          "absorption table: frequencies must be strictly increasing (row " +
          std::to_string(i + 1) + ")");
    }
  }
}

AbsorptionTable AbsorptionTable::from_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("absorption table: cannot open " + path);
  std::vector<std::pair<double, double>> points;
  std::string line;
  std::size_t lineno = 0;
  bool header_allowed = true;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream row(line);
    std::string f_field, k_field;
    if (!std::getline(row, f_field, ',') || !std::getline(row, k_field)) {
      throw ConfigError("absorption table: malformed line " + std::to_string(lineno));
    }
    try {
      std::size_t f_used = 0, k_used = 0;
      const double f = std::stod(f_field, &f_used);
      const double k = std::stod(k_field, &k_used);
      points.emplace_back(f, k);
    } catch (const std::exception&) {
      if (header_allowed) {
        header_allowed = false;  // one non-numeric line tolerated as a header
        continue;
      }
      throw ConfigError("absorption table: non-numeric line " + std::to_string(lineno));
    }
    header_allowed = false;
  }
  return AbsorptionTable(std::move(points));
}

double AbsorptionTable::k_abs(double frequency_hz) const {
  if (points_.empty()) return 0.0;
  if (frequency_hz < points_.front().first || frequency_hz > points_.back().first) {
    throw ContractError("absorption table: frequency outside tabulated range");
  }
  if (points_.size() == 1) return points_.front().second;
  auto hi = std::upper_bound(points_.begin(), points_.end(), frequency_hz,
                             [](double f, const auto& p) { return f < p.first; });
  if (hi == points_.end()) return points_.back().second;
  if (hi == points_.begin()) return points_.front().second;
  auto lo = hi - 1;
  const double w = (frequency_hz - lo->first) / (hi->first - lo->first);
  return lo->second + w * (hi->second - lo->second);
}

ComplexVector array_response(double phi, int n_bs, double d_r_over_lambda) {
  if (n_bs < 1) throw ContractError("array_response: n_bs must be >= 1");
  if (d_r_over_lambda <= 0.0) throw ContractError("array_response: spacing must be positive");
  ComplexVector a(n_bs);
  const double step = -2.0 * kPi * d_r_over_lambda * std::cos(phi);
  const double scale = 1.0 / std::sqrt(static_cast<double>(n_bs));
  for (int m = 0; m < n_bs; ++m) {
    a(m) = scale * std::polar(1.0, step * static_cast<double>(m));
  }
  return a;
}

double spreading_loss(double frequency_hz, double distance_m) {
  if (frequency_hz <= 0.0 || distance_m <= 0.0) {
    throw ContractError("spreading_loss: frequency and distance must be positive");
  }
  const double amp = kSpeedOfLight / (4.0 * kPi * frequency_hz * distance_m);
  return amp * amp;
}

double absorption_loss(const AbsorptionTable& table, double frequency_hz,
                       double distance_m) {
  if (distance_m < 0.0) throw ContractError("absorption_loss: negative distance");
  return std::exp(-table.k_abs(frequency_hz) * distance_m);
}

Complex wave_impedance(const Material& material, double frequency_hz) {
  if (frequency_hz <= 0.0) throw ContractError("wave_impedance: frequency must be positive");
  const double n = material.refractive_index;
  const double kappa =
      material.varsigma_absorption * kSpeedOfLight / (4.0 * kPi * frequency_hz);
  const Complex eps_r(n * n - kappa * kappa, -2.0 * n * kappa);
  return std::sqrt(Complex(kVacuumPermeability, 0.0) /
                   (kVacuumPermittivity * eps_r));
}

Complex fresnel_coefficient(const Material& material, double frequency_hz,
                            double theta_in) {
  if (theta_in < 0.0 || theta_in >= kPi / 2.0) {
    throw ContractError("fresnel_coefficient: incidence angle outside [0, pi/2)");
  }
  const Complex z = wave_impedance(material, frequency_hz);
  const double z0 = vacuum_impedance();
  const Complex sin_ref = std::sin(theta_in) * z / z0;
  const Complex theta_ref = std::asin(sin_ref);
  const Complex num = z * std::cos(theta_in) - z0 * std::cos(theta_ref);
  const Complex den = z * std::cos(theta_in) + z0 * std::cos(theta_ref);
  return num / den;
}

double rayleigh_roughness(const Material& material, double frequency_hz,
                          double theta_in) {
  if (theta_in < 0.0 || theta_in >= kPi / 2.0) {
    throw ContractError("rayleigh_roughness: incidence angle outside [0, pi/2)");
  }
  const double x = 4.0 * kPi * frequency_hz * material.sigma_roughness *
                   std::cos(theta_in) / kSpeedOfLight;
  return std::exp(-0.5 * x * x);
}

double ChannelParams::b_r_amplitude() const { return std::pow(10.0, b_r_dbi / 20.0); }

void ChannelParams::validate() const {
  std::string problems;
  auto complain = [&problems](const std::string& msg) {
    if (!problems.empty()) problems += "; ";
    problems += msg;
  };
  if (frequency_hz <= 0.0) complain("frequency_hz must be positive");
  if (distance_m <= 0.0) complain("distance_m must be positive");
  if (n_bs < 1) complain("n_bs must be >= 1");
  if (k_u < 1) complain("k_u must be >= 1");
  if (n_nlos < 0) complain("n_nlos must be >= 0");
  if (n_nlos > 0 && n_ray < 1) complain("n_ray must be >= 1 when n_nlos > 0");
  if (n_nlos > 0 && materials.empty()) complain("materials must be nonempty when n_nlos > 0");
  if (diffuse_spread_rad < 0.0) complain("diffuse_spread_rad must be >= 0");
  if (d_r_over_lambda <= 0.0) complain("d_r_over_lambda must be positive");
  if (!problems.empty()) throw ConfigError("channel params: " + problems);
}

ComplexVector ChannelRealization::rebuild_column(int k) const {
  if (k < 0 || k >= static_cast<int>(paths.size())) {
    throw ContractError("rebuild_column: user index out of range");
  }
  const double b_r = params.b_r_amplitude();
  const double los_scale = std::sqrt(static_cast<double>(params.n_bs));
  const double nlos_scale =
      params.n_nlos > 0
          ? std::sqrt(static_cast<double>(params.n_bs) /
                      (static_cast<double>(params.n_nlos) * params.n_ray))
          : 0.0;
  ComplexVector col = ComplexVector::Zero(params.n_bs);
  for (const PathComponent& p : paths[k]) {
    const double scale = p.kind == PathKind::Los ? los_scale : nlos_scale;
    col += scale * b_r * p.gain *
           array_response(p.aoa, params.n_bs, params.d_r_over_lambda);
  }
  return col;
}

ChannelRealization generate_channel(const ChannelParams& params,
                                    const AbsorptionTable& table,
                                    SeededRng& rng) {
  params.validate();
  ChannelRealization out;
  out.params = params;
  out.paths.resize(params.k_u);
  out.h.resize(params.n_bs, params.k_u);

  const double los_gain_mag = std::sqrt(
      spreading_loss(params.frequency_hz, params.distance_m) *
      absorption_loss(table, params.frequency_hz, params.distance_m));

  for (int k = 0; k < params.k_u; ++k) {
    auto& user_paths = out.paths[k];

    PathComponent los;
    los.kind = PathKind::Los;
    los.gain = std::polar(los_gain_mag, draw_angle(rng));
    los.aoa = draw_angle(rng);
    los.travel_distance = params.distance_m;
    user_paths.push_back(los);

    for (int z = 0; z < params.n_nlos; ++z) {
      const double cluster_aoa = draw_angle(rng);
      const int material_index = rng.uniform_int(static_cast<int>(params.materials.size()));
      const Material& material = params.materials[material_index];
      for (int l = 0; l < params.n_ray; ++l) {
        PathComponent ray;
        ray.kind = PathKind::Nlos;
        ray.cluster_index = z;
        ray.ray_index = l;
        ray.aoa = wrap_angle(cluster_aoa + rng.uniform(-params.diffuse_spread_rad,
                                                       params.diffuse_spread_rad));
        ray.incidence_angle = rng.uniform(0.0, kPi / 2.0);
        ray.travel_distance = params.distance_m * (1.0 + rng.uniform(0.0, 0.5));
        ray.material_index = material_index;
        const Complex reflection =
            fresnel_coefficient(material, params.frequency_hz, ray.incidence_angle) *
            rayleigh_roughness(material, params.frequency_hz, ray.incidence_angle);
        const double mag =
            std::abs(reflection) *
            std::sqrt(spreading_loss(params.frequency_hz, ray.travel_distance) *
                      absorption_loss(table, params.frequency_hz, ray.travel_distance));
        ray.gain = std::polar(mag, draw_angle(rng));
        user_paths.push_back(ray);
      }
    }
    out.h.col(k) = out.rebuild_column(k);
  }
  return out;
}

ComplexMatrix normalized_unit_column_power(const ComplexMatrix& h) {
  const double fro2 = h.squaredNorm();
  if (fro2 <= 0.0) throw ContractError("normalized_unit_column_power: zero channel");
  return h * std::sqrt(static_cast<double>(h.cols()) / fro2);
}

}  // namespace thzsb
