#pragma once

#include <cmath>

namespace reposim {

struct LatLon {
  double lat = 0.0;
  double lon = 0.0;
};

// Equirectangular projection around a reference point. At city scale the
// planar distance agrees with the great-circle distance to well under 0.1%,
// and it keeps the hex lattice geometry exact (all neighbor spacings equal).
class Projection {
 public:
  Projection() = default;
  explicit Projection(LatLon ref)
      : ref_(ref), cos_ref_(std::cos(ref.lat * kDegToRad)) {}

  // meters east/north of the reference point
  void to_local(LatLon p, double& x, double& y) const {
    x = (p.lon - ref_.lon) * kDegToRad * kEarthRadiusM * cos_ref_;
    y = (p.lat - ref_.lat) * kDegToRad * kEarthRadiusM;
  }

  LatLon to_latlon(double x, double y) const {
    LatLon p;
    p.lat = ref_.lat + y / kEarthRadiusM / kDegToRad;
    p.lon = ref_.lon + x / (kEarthRadiusM * cos_ref_) / kDegToRad;
    return p;
  }

  double distance_m(LatLon a, LatLon b) const {
    double ax, ay, bx, by;
    to_local(a, ax, ay);
    to_local(b, bx, by);
    return std::hypot(ax - bx, ay - by);
  }

  LatLon reference() const { return ref_; }

  static constexpr double kEarthRadiusM = 6371000.0;
  static constexpr double kDegToRad = 3.14159265358979323846 / 180.0;

 private:
  LatLon ref_{};
  double cos_ref_ = 1.0;
};

}  // namespace reposim
