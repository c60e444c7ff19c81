#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include "esrs/user_model.hpp"

namespace esrs {

inline double haversine_km(double lat1, double lon1, double lat2, double lon2) {
  constexpr double kEarthRadiusKm = 6371.0088;
  const double rad = std::numbers::pi / 180.0;
  const double dlat = (lat2 - lat1) * rad;
  const double dlon = (lon2 - lon1) * rad;
  const double a = std::sin(dlat / 2) * std::sin(dlat / 2) +
                   std::cos(lat1 * rad) * std::cos(lat2 * rad) * std::sin(dlon / 2) * std::sin(dlon / 2);
  return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(a)));
}

inline double distance_km(const PoiAttributes& a, const PoiAttributes& b) {
  return haversine_km(a.lat, a.lon, b.lat, b.lon);
}

/// N_f(p) = { q : sim_cat(p, q) > θ1 or dist(p, q) < θ2 }, θ2 in metres.
inline std::vector<std::size_t> soft_neighborhood(const PoiAttributes& poi, std::span<const PoiAttributes> pois,
                                                  double theta_category = 0.5, double theta_metres = 500.0) {
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < pois.size(); ++j) {
    if (pois[j].id == poi.id) continue;
    if (jaccard(poi.categories, pois[j].categories) > theta_category || distance_km(poi, pois[j]) * 1000.0 < theta_metres)
      out.push_back(j);
  }
  return out;
}

}  // namespace esrs
