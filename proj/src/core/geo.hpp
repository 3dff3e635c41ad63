#pragma once

#include <array>
#include <span>
#include <string_view>
#include <vector>

namespace geoconcept {

inline constexpr double kEarthRadiusKm = 6371.0088;

// Latitude/longitude in degrees. Construct through make() to get the
// normalized form: lat in [-90, 90], lon in [-180, 180), lon = 0 at the poles.
struct GeoCoordinate {
  double lat = 0.0;
  double lon = 0.0;

  static GeoCoordinate make(double lat_deg, double lon_deg);
  friend bool operator==(const GeoCoordinate&, const GeoCoordinate&) = default;
};

// Wraps any finite longitude into [-180, 180).
double wrap_longitude(double lon_deg);

// Unit vector on the sphere: (cos lat cos lon, cos lat sin lon, sin lat).
std::array<double, 3> to_unit_sphere(const GeoCoordinate& c);

double haversine_km(const GeoCoordinate& a, const GeoCoordinate& b);

class ThresholdSpec {
 public:
  // Strictly ascending positive distances in km.
  explicit ThresholdSpec(std::vector<double> thresholds_km);
  static ThresholdSpec standard();  // 1, 25, 200, 750, 2500 km

  const std::vector<double>& thresholds_km() const noexcept { return thresholds_; }

 private:
  std::vector<double> thresholds_;
};

// For each threshold t, the fraction of errors <= t.
std::vector<double> threshold_accuracy(std::span<const double> errors_km,
                                       const ThresholdSpec& spec);

enum class ErrorBin { kUnder25, k25To200, k200To750, kOver750 };
inline constexpr std::array<ErrorBin, 4> kAllErrorBins = {
    ErrorBin::kUnder25, ErrorBin::k25To200, ErrorBin::k200To750, ErrorBin::kOver750};

ErrorBin error_bin(double error_km);
std::string_view error_bin_label(ErrorBin bin);

// Regular lat-lon lattice, lat-major ascending, each pole row collapsed to one
// point.
std::vector<GeoCoordinate> sphere_grid(double resolution_deg);

}  // namespace geoconcept
