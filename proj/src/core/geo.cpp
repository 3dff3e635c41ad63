#include "geo.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "error.hpp"

namespace geoconcept {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

}  // namespace

double wrap_longitude(double lon_deg) {
  if (!std::isfinite(lon_deg)) fail(ErrorCode::kUsage, "longitude must be finite");
  double lon = std::fmod(lon_deg + 180.0, 360.0);
  if (lon < 0.0) lon += 360.0;
  lon -= 180.0;
  if (lon >= 180.0) lon -= 360.0;
  return lon;
}

GeoCoordinate GeoCoordinate::make(double lat_deg, double lon_deg) {
  if (!std::isfinite(lat_deg) || lat_deg < -90.0 || lat_deg > 90.0) {
    fail(ErrorCode::kUsage, "latitude out of range [-90, 90]: " + std::to_string(lat_deg));
  }
  GeoCoordinate c;
  c.lat = lat_deg;
  c.lon = (lat_deg == 90.0 || lat_deg == -90.0) ? 0.0 : wrap_longitude(lon_deg);
  if (c.lon == 0.0) c.lon = 0.0;  // drop negative zero
  return c;
}

std::array<double, 3> to_unit_sphere(const GeoCoordinate& c) {
  const double lat = c.lat * kDegToRad;
  const double lon = c.lon * kDegToRad;
  return {std::cos(lat) * std::cos(lon), std::cos(lat) * std::sin(lon), std::sin(lat)};
}

double haversine_km(const GeoCoordinate& a, const GeoCoordinate& b) {
  const double lat1 = a.lat * kDegToRad;
  const double lat2 = b.lat * kDegToRad;
  const double s_lat = std::sin((lat2 - lat1) / 2.0);
  const double s_lon = std::sin((b.lon - a.lon) * kDegToRad / 2.0);
  const double cos_prod = std::cos(lat1) * std::cos(lat2);
  const double h = std::min(1.0, s_lat * s_lat + cos_prod * (s_lon * s_lon));
  return 2.0 * kEarthRadiusKm * std::asin(std::sqrt(h));
}

ThresholdSpec::ThresholdSpec(std::vector<double> thresholds_km)
    : thresholds_(std::move(thresholds_km)) {
  if (thresholds_.empty()) fail(ErrorCode::kUsage, "threshold list is empty");
  for (std::size_t i = 0; i < thresholds_.size(); ++i) {
    if (!(thresholds_[i] > 0.0) || !std::isfinite(thresholds_[i])) {
      fail(ErrorCode::kUsage, "thresholds must be positive and finite");
    }
    if (i > 0 && !(thresholds_[i] > thresholds_[i - 1])) {
      fail(ErrorCode::kUsage, "thresholds must be strictly ascending");
    }
  }
}

ThresholdSpec ThresholdSpec::standard() { return ThresholdSpec({1.0, 25.0, 200.0, 750.0, 2500.0}); }

std::vector<double> threshold_accuracy(std::span<const double> errors_km,
                                       const ThresholdSpec& spec) {
  if (errors_km.empty()) fail(ErrorCode::kUsage, "threshold_accuracy: empty error list");
  std::vector<std::size_t> counts(spec.thresholds_km().size(), 0);
  for (double e : errors_km) {
    if (!(e >= 0.0)) fail(ErrorCode::kUsage, "threshold_accuracy: errors must be non-negative");
    for (std::size_t t = 0; t < counts.size(); ++t) {
      if (e <= spec.thresholds_km()[t]) ++counts[t];
    }
  }
  std::vector<double> out(counts.size());
  for (std::size_t t = 0; t < counts.size(); ++t) {
    out[t] = static_cast<double>(counts[t]) / static_cast<double>(errors_km.size());
  }
  return out;
}

ErrorBin error_bin(double error_km) {
  if (!(error_km >= 0.0)) fail(ErrorCode::kUsage, "error_bin: error must be non-negative");
  if (error_km < 25.0) return ErrorBin::kUnder25;
  if (error_km < 200.0) return ErrorBin::k25To200;
  if (error_km < 750.0) return ErrorBin::k200To750;
  return ErrorBin::kOver750;
}

std::string_view error_bin_label(ErrorBin bin) {
  switch (bin) {
    case ErrorBin::kUnder25: return "[0-25)";
    case ErrorBin::k25To200: return "[25-200)";
    case ErrorBin::k200To750: return "[200-750)";
    case ErrorBin::kOver750: return "[750-inf)";
  }
  return "?";
}

std::vector<GeoCoordinate> sphere_grid(double resolution_deg) {
  if (!(resolution_deg > 0.0) || resolution_deg > 180.0) {
    fail(ErrorCode::kUsage, "sphere_grid: resolution must be in (0, 180]");
  }
  std::vector<GeoCoordinate> out;
  const double slack = 1e-9;
  for (std::size_t i = 0;; ++i) {
    const double lat = -90.0 + static_cast<double>(i) * resolution_deg;
    if (lat > 90.0 + slack) break;
    const double clamped = std::min(lat, 90.0);
    if (clamped == -90.0 || clamped == 90.0) {
      out.push_back(GeoCoordinate::make(clamped, 0.0));
      continue;
    }
    for (std::size_t j = 0;; ++j) {
      const double lon = -180.0 + static_cast<double>(j) * resolution_deg;
      if (lon >= 180.0 - slack) break;
      out.push_back(GeoCoordinate::make(clamped, lon));
    }
  }
  return out;
}

}  // namespace geoconcept
