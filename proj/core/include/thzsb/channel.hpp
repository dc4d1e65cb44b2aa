#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "thzsb/numerics.hpp"
#include "thzsb/types.hpp"

namespace thzsb {

inline constexpr double kSpeedOfLight = 299792458.0;            // m/s
inline constexpr double kVacuumPermeability = 4e-7 * 3.14159265358979323846;
inline constexpr double kVacuumPermittivity = 8.8541878128e-12;  // F/m

// Free-space wave impedance, about 376.73 ohm.
double vacuum_impedance();

struct Material {
  std::string name;
  double sigma_roughness = 0.0;      // surface roughness std dev [m]
  double varsigma_absorption = 0.0;  // material absorption coefficient [1/m]
  double refractive_index = 1.0;
};

// The three indoor plaster surfaces used throughout: roughness and
// absorption converted to SI from their usual mm / cm^-1 quotes.
std::vector<Material> table_v_materials();

// Piecewise-linear molecular absorption coefficient k_abs(f) over a strictly
// increasing frequency grid. Queries outside the grid are contract errors
// rather than extrapolations; an empty table means no molecular absorption.
class AbsorptionTable {
 public:
  AbsorptionTable() = default;
  explicit AbsorptionTable(std::vector<std::pair<double, double>> points);

  // CSV with columns frequency_hz,k_abs_per_m; an optional header line and
  // '#' comments are skipped.
  static AbsorptionTable from_csv(const std::string& path);

  bool empty() const { return points_.empty(); }
  double k_abs(double frequency_hz) const;

 private:
  std::vector<std::pair<double, double>> points_;
};

// Unit-norm ULA steering vector, entry m = exp(-j 2 pi (d_r/lambda) m cos phi)
// over sqrt(n_bs).
ComplexVector array_response(double phi, int n_bs, double d_r_over_lambda);

// (c / (4 pi f d))^2
double spreading_loss(double frequency_hz, double distance_m);

// exp(-k_abs(f) * d)
double absorption_loss(const AbsorptionTable& table, double frequency_hz,
                       double distance_m);

// Z(f) = sqrt(mu0 / (eps0 (n^2 - kappa^2 - 2 j n kappa))), kappa = varsigma c/(4 pi f).
Complex wave_impedance(const Material& material, double frequency_hz);

// Smooth-surface reflection coefficient from the impedance contrast, with the
// refraction angle taken through the complex Snell relation. theta_in is
// measured from the surface normal and must lie in [0, pi/2).
Complex fresnel_coefficient(const Material& material, double frequency_hz,
                            double theta_in);

// Rayleigh roughness attenuation exp(-g/2), g = (4 pi f sigma cos(theta)/c)^2.
double rayleigh_roughness(const Material& material, double frequency_hz,
                          double theta_in);

enum class PathKind { Los, Nlos };

// One propagation path of one user's channel column. `gain` is the complex
// path gain alpha alone: the array scaling sqrt(N_BS) or
// sqrt(N_BS/(N_nlos N_ray)) and the aggregate antenna gain are applied when
// the column is assembled, so |gain|^2 always equals the closed-form loss
// product for the stored geometry.
struct PathComponent {
  PathKind kind = PathKind::Los;
  int cluster_index = -1;  // -1 for the LoS path
  int ray_index = -1;
  Complex gain;
  double aoa = 0.0;              // radians in (-pi, pi]
  double travel_distance = 0.0;  // m
  double incidence_angle = 0.0;  // radians, NLoS only
  int material_index = -1;       // into ChannelParams::materials, NLoS only
};

struct ChannelParams {
  double frequency_hz = 0.3e12;
  double distance_m = 15.0;
  int n_bs = 64;
  int k_u = 12;
  int n_nlos = 3;  // NLoS clusters; one LoS path is always present
  int n_ray = 1;   // diffuse rays per NLoS cluster
  double b_r_dbi = 26.0;  // aggregate transceiver antenna gain
  double d_r_over_lambda = 0.5;
  double diffuse_spread_rad = 5.0 * 3.14159265358979323846 / 180.0;
  std::vector<Material> materials = table_v_materials();

  // The channel equations multiply complex amplitudes, so the quoted dB gain
  // enters as a field ratio.
  double b_r_amplitude() const;
  void validate() const;  // throws ConfigError listing every violation
};

struct ChannelRealization {
  ComplexMatrix h;  // n_bs x k_u
  std::vector<std::vector<PathComponent>> paths;  // per user
  ChannelParams params;

  // Reassembles column k from its stored path components; the generator
  // guarantees agreement with h.col(k) to 1e-10 relative.
  ComplexVector rebuild_column(int k) const;
};

// Draws one multipath realization. Per user the draw order is fixed: LoS
// phase, LoS angle, then per cluster its angle and material, then per ray the
// angle offset, incidence angle, excess-distance factor, and phase. Relying
// on that order is what makes a (seed, stream) pair reproduce a channel.
ChannelRealization generate_channel(const ChannelParams& params,
                                    const AbsorptionTable& table,
                                    SeededRng& rng);

// Scales h so the average squared column norm is one (||H||_F^2 = K_U).
ComplexMatrix normalized_unit_column_power(const ComplexMatrix& h);

}  // namespace thzsb
