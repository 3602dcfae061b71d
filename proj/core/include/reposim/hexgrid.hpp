#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "reposim/geo.hpp"

namespace reposim {

using CellId = int32_t;
inline constexpr CellId kNoCell = -1;

struct AxialCoord {
  int q = 0;
  int r = 0;
  friend bool operator==(AxialCoord a, AxialCoord b) { return a.q == b.q && a.r == b.r; }
  friend bool operator<(AxialCoord a, AxialCoord b) {
    return a.q != b.q ? a.q < b.q : a.r < b.r;
  }
};

// Fixed axial direction order (pointy-top): E, NE, NW, W, SW, SE.
// This order defines the canonical destination slots 1..6 used by the
// planner, the Q-network outputs and the bandit arms; slot 0 is "stay".
inline constexpr std::array<AxialCoord, 6> kAxialDirs = {
    AxialCoord{+1, 0}, AxialCoord{+1, -1}, AxialCoord{0, -1},
    AxialCoord{-1, 0}, AxialCoord{-1, +1}, AxialCoord{0, +1}};

inline constexpr int kNumDestSlots = 7;  // stay + 6 neighbors

// Which destination slots a reposition from a cell may use.
using DestMask = std::array<bool, kNumDestSlots>;

struct HexCell {
  CellId id = kNoCell;
  AxialCoord axial;
  LatLon center;
  bool valid = true;  // accessible and has pick-up points
  std::vector<LatLon> pickup_points;
};

struct BoundingBox {
  double lat_min = 0, lat_max = 0, lon_min = 0, lon_max = 0;
  bool contains(LatLon p) const {
    return p.lat >= lat_min && p.lat <= lat_max && p.lon >= lon_min && p.lon <= lon_max;
  }
};

// Immutable hexagonal tessellation of a bounding box. Pointy-top hexagons in
// axial coordinates; cell (0,0) sits at the bounding-box center. Thread-safe
// for concurrent reads after construction.
class GridIndex {
 public:
  GridIndex() = default;

  // Tessellates the box with hexagons of the given edge length; cells listed
  // in `invalid` are kept in the index but excluded as reposition targets.
  GridIndex(BoundingBox box, double edge_m, const std::vector<AxialCoord>& invalid = {});

  int size() const { return static_cast<int>(cells_.size()); }
  double edge_m() const { return edge_m_; }
  const BoundingBox& bbox() const { return bbox_; }
  const Projection& projection() const { return proj_; }
  const std::vector<HexCell>& cells() const { return cells_; }

  const HexCell& cell(CellId id) const;             // throws LookupError
  CellId find(AxialCoord a) const;                  // kNoCell if absent
  bool is_valid(CellId id) const { return cell(id).valid; }

  // Valid neighbors in the fixed axial direction order.
  std::vector<CellId> neighbors(CellId id) const;

  // Neighbor (valid or not) in direction slot 1..6; kNoCell if absent.
  CellId neighbor_in_dir(CellId id, int dir) const;

  // Destination slot of `dest` relative to `from`: 0 = same cell,
  // 1..6 = axial direction, -1 = not adjacent.
  int dest_slot(CellId from, CellId dest) const;

  // Cell containing the point. Boundary ties resolve to the lowest cell id.
  CellId locate(LatLon p) const;  // throws OutOfRegionError

  // Cells reachable from `id` in at most n valid-neighbor hops (incl. self).
  std::vector<CellId> cells_within(CellId id, int n) const;

  // Nearest valid cells by hop distance, searching the whole grid; used when
  // nothing valid exists within the planner's expansion depth.
  std::vector<CellId> nearest_valid(CellId from) const;

  // Nearest configured pick-up point to the cell center (center if none).
  LatLon representative_point(CellId id) const;

  void set_pickup_points(CellId id, std::vector<LatLon> pts);
  void set_valid(CellId id, bool valid);

  LatLon axial_center(AxialCoord a) const;

  void save(const std::string& path) const;
  static GridIndex load(const std::string& path);

 private:
  void check(CellId id) const;

  BoundingBox bbox_{};
  double edge_m_ = 0;
  Projection proj_{};
  std::vector<HexCell> cells_;                // sorted by (q, r); index == id
  std::map<AxialCoord, CellId> by_axial_;
};

// Slot k is usable iff the cell in that slot exists and is valid (slot 0:
// the cell itself).
DestMask dest_mask(const GridIndex& grid, CellId cell);

// Constant-speed travel times on the grid's planar metric with optional
// per-cell-pair overrides. Immutable after construction.
class TravelTimeModel {
 public:
  TravelTimeModel() = default;
  TravelTimeModel(const GridIndex* grid, double speed_m_per_min)
      : grid_(grid), speed_(speed_m_per_min) {}

  void set_override(CellId from, CellId to, double minutes);

  double speed_m_per_min() const { return speed_; }

  // Minutes from origin to dest; throws OutOfRegionError for points outside
  // the grid. Identical points cost 0.
  double eta_min(LatLon origin, LatLon dest) const;

  double distance_m(LatLon a, LatLon b) const;

 private:
  const GridIndex* grid_ = nullptr;
  double speed_ = 400.0;
  std::map<std::pair<CellId, CellId>, double> overrides_;
};

}  // namespace reposim
