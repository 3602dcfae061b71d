#include "reposim/hexgrid.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <limits>
#include <set>

#include <json.hpp>

#include "reposim/errors.hpp"

namespace reposim {

namespace {

constexpr double kSqrt3 = 1.7320508075688772;

// Planar center of axial (q, r) for pointy-top hexes with edge e.
void axial_to_xy(AxialCoord a, double e, double& x, double& y) {
  x = e * kSqrt3 * (a.q + a.r / 2.0);
  y = e * 1.5 * a.r;
}

AxialCoord cube_round(double qf, double rf) {
  double sf = -qf - rf;
  double q = std::round(qf), r = std::round(rf), s = std::round(sf);
  double dq = std::abs(q - qf), dr = std::abs(r - rf), ds = std::abs(s - sf);
  if (dq > dr && dq > ds)
    q = -r - s;
  else if (dr > ds)
    r = -q - s;
  return {static_cast<int>(q), static_cast<int>(r)};
}

}  // namespace

GridIndex::GridIndex(BoundingBox box, double edge_m, const std::vector<AxialCoord>& invalid)
    : bbox_(box), edge_m_(edge_m) {
  if (edge_m <= 0) throw DataError("hex edge length must be positive");
  if (box.lat_max < box.lat_min || box.lon_max < box.lon_min)
    throw DataError("malformed bounding box");
  proj_ = Projection(LatLon{(box.lat_min + box.lat_max) / 2.0,
                            (box.lon_min + box.lon_max) / 2.0});

  // Enumerate axial coordinates whose centers fall inside the box. The loop
  // bounds overshoot by one ring so boundary centers are not missed.
  double xmax, ymax;
  proj_.to_local(LatLon{box.lat_max, box.lon_max}, xmax, ymax);
  double xmin, ymin;
  proj_.to_local(LatLon{box.lat_min, box.lon_min}, xmin, ymin);
  int r_lo = static_cast<int>(std::floor(ymin / (1.5 * edge_m))) - 1;
  int r_hi = static_cast<int>(std::ceil(ymax / (1.5 * edge_m))) + 1;

  std::set<AxialCoord> bad(invalid.begin(), invalid.end());
  std::vector<HexCell> found;
  for (int r = r_lo; r <= r_hi; ++r) {
    int q_lo = static_cast<int>(std::floor(xmin / (kSqrt3 * edge_m) - r / 2.0)) - 1;
    int q_hi = static_cast<int>(std::ceil(xmax / (kSqrt3 * edge_m) - r / 2.0)) + 1;
    for (int q = q_lo; q <= q_hi; ++q) {
      AxialCoord a{q, r};
      double x, y;
      axial_to_xy(a, edge_m_, x, y);
      LatLon c = proj_.to_latlon(x, y);
      if (!box.contains(c)) continue;
      HexCell cell;
      cell.axial = a;
      cell.center = c;
      cell.valid = !bad.count(a);
      found.push_back(std::move(cell));
    }
  }
  std::sort(found.begin(), found.end(),
            [](const HexCell& a, const HexCell& b) { return a.axial < b.axial; });
  cells_ = std::move(found);
  for (int i = 0; i < static_cast<int>(cells_.size()); ++i) {
    cells_[i].id = i;
    by_axial_[cells_[i].axial] = i;
  }
}

void GridIndex::check(CellId id) const {
  if (id < 0 || id >= static_cast<int>(cells_.size()))
    throw LookupError("unknown cell id " + std::to_string(id));
}

const HexCell& GridIndex::cell(CellId id) const {
  check(id);
  return cells_[id];
}

CellId GridIndex::find(AxialCoord a) const {
  auto it = by_axial_.find(a);
  return it == by_axial_.end() ? kNoCell : it->second;
}

std::vector<CellId> GridIndex::neighbors(CellId id) const {
  const HexCell& c = cell(id);
  std::vector<CellId> out;
  out.reserve(6);
  for (const AxialCoord& d : kAxialDirs) {
    CellId n = find({c.axial.q + d.q, c.axial.r + d.r});
    if (n != kNoCell && cells_[n].valid) out.push_back(n);
  }
  return out;
}

CellId GridIndex::neighbor_in_dir(CellId id, int dir) const {
  const HexCell& c = cell(id);
  if (dir < 1 || dir > 6) throw LookupError("direction slot must be 1..6");
  const AxialCoord& d = kAxialDirs[dir - 1];
  return find({c.axial.q + d.q, c.axial.r + d.r});
}

int GridIndex::dest_slot(CellId from, CellId dest) const {
  const HexCell& a = cell(from);
  const HexCell& b = cell(dest);
  if (from == dest) return 0;
  for (int i = 0; i < 6; ++i) {
    if (b.axial.q == a.axial.q + kAxialDirs[i].q &&
        b.axial.r == a.axial.r + kAxialDirs[i].r)
      return i + 1;
  }
  return -1;
}

LatLon GridIndex::axial_center(AxialCoord a) const {
  double x, y;
  axial_to_xy(a, edge_m_, x, y);
  return proj_.to_latlon(x, y);
}

CellId GridIndex::locate(LatLon p) const {
  if (!bbox_.contains(p))
    throw OutOfRegionError("point outside region bounding box");
  double x, y;
  proj_.to_local(p, x, y);
  // Fractional axial coordinates, rounded in cube space, give the candidate
  // hex; centers can fall outside the box so the true owner may be one of
  // its neighbors. Scan candidate plus ring and keep the nearest center that
  // exists in the index, ties to the lowest id.
  double qf = (kSqrt3 / 3.0 * x - 1.0 / 3.0 * y) / edge_m_;
  double rf = (2.0 / 3.0 * y) / edge_m_;
  AxialCoord base = cube_round(qf, rf);

  CellId best = kNoCell;
  double best_d = std::numeric_limits<double>::infinity();
  const double tie = 1e-9 * edge_m_;
  auto consider = [&](AxialCoord a) {
    CellId id = find(a);
    if (id == kNoCell) return;
    double cx, cy;
    axial_to_xy(a, edge_m_, cx, cy);
    double d = std::hypot(x - cx, y - cy);
    if (d < best_d - tie || (std::abs(d - best_d) <= tie && id < best)) {
      best = id;
      best_d = d;
    }
  };
  consider(base);
  for (const AxialCoord& d : kAxialDirs) consider({base.q + d.q, base.r + d.r});
  if (best == kNoCell)
    throw OutOfRegionError("point not covered by any grid cell");
  return best;
}

std::vector<CellId> GridIndex::cells_within(CellId id, int n) const {
  check(id);
  std::vector<CellId> out;
  std::vector<int> depth(cells_.size(), -1);
  std::deque<CellId> queue;
  depth[id] = 0;
  queue.push_back(id);
  while (!queue.empty()) {
    CellId cur = queue.front();
    queue.pop_front();
    out.push_back(cur);
    if (depth[cur] == n) continue;
    for (CellId nb : neighbors(cur)) {
      if (depth[nb] < 0) {
        depth[nb] = depth[cur] + 1;
        queue.push_back(nb);
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<CellId> GridIndex::nearest_valid(CellId from) const {
  check(from);
  // Breadth-first over full adjacency (invalid cells may be traversed) so an
  // island of valid cells is still reachable; returns all valid cells at the
  // first depth where any exist.
  std::vector<int> depth(cells_.size(), -1);
  std::deque<CellId> queue;
  depth[from] = 0;
  queue.push_back(from);
  std::vector<CellId> out;
  int found_depth = -1;
  while (!queue.empty()) {
    CellId cur = queue.front();
    queue.pop_front();
    if (found_depth >= 0 && depth[cur] > found_depth) break;
    if (cur != from && cells_[cur].valid) {
      out.push_back(cur);
      found_depth = depth[cur];
      continue;
    }
    const HexCell& c = cells_[cur];
    for (const AxialCoord& d : kAxialDirs) {
      CellId nb = find({c.axial.q + d.q, c.axial.r + d.r});
      if (nb != kNoCell && depth[nb] < 0) {
        depth[nb] = depth[cur] + 1;
        queue.push_back(nb);
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

LatLon GridIndex::representative_point(CellId id) const {
  const HexCell& c = cell(id);
  if (c.pickup_points.empty()) return c.center;
  double cx, cy;
  proj_.to_local(c.center, cx, cy);
  double best_d = std::numeric_limits<double>::infinity();
  LatLon best = c.center;
  for (const LatLon& p : c.pickup_points) {
    double x, y;
    proj_.to_local(p, x, y);
    double d = std::hypot(x - cx, y - cy);
    if (d < best_d) {
      best_d = d;
      best = p;
    }
  }
  return best;
}

void GridIndex::set_pickup_points(CellId id, std::vector<LatLon> pts) {
  check(id);
  cells_[id].pickup_points = std::move(pts);
}

void GridIndex::set_valid(CellId id, bool valid) {
  check(id);
  cells_[id].valid = valid;
}

void GridIndex::save(const std::string& path) const {
  nlohmann::json j;
  j["edge_m"] = edge_m_;
  j["bbox"] = {{"lat_min", bbox_.lat_min},
               {"lat_max", bbox_.lat_max},
               {"lon_min", bbox_.lon_min},
               {"lon_max", bbox_.lon_max}};
  nlohmann::json cells = nlohmann::json::array();
  for (const HexCell& c : cells_) {
    nlohmann::json jc;
    jc["id"] = c.id;
    jc["q"] = c.axial.q;
    jc["r"] = c.axial.r;
    jc["center"] = {c.center.lat, c.center.lon};
    jc["valid"] = c.valid;
    if (!c.pickup_points.empty()) {
      nlohmann::json pts = nlohmann::json::array();
      for (const LatLon& p : c.pickup_points) pts.push_back({p.lat, p.lon});
      jc["pickup_points"] = pts;
    }
    cells.push_back(std::move(jc));
  }
  j["cells"] = std::move(cells);
  std::ofstream f(path);
  if (!f) throw DataError("cannot write grid file " + path);
  f << j.dump(2) << "\n";
}

GridIndex GridIndex::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot read grid file " + path);
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed grid file " + path + ": " + e.what());
  }
  try {
    BoundingBox box{j.at("bbox").at("lat_min"), j.at("bbox").at("lat_max"),
                    j.at("bbox").at("lon_min"), j.at("bbox").at("lon_max")};
    GridIndex g(box, j.at("edge_m").get<double>());
    for (const auto& jc : j.at("cells")) {
      AxialCoord a{jc.at("q").get<int>(), jc.at("r").get<int>()};
      CellId id = g.find(a);
      if (id == kNoCell)
        throw DataError("grid file cell (" + std::to_string(a.q) + "," +
                        std::to_string(a.r) + ") not in tessellation");
      if (id != jc.at("id").get<CellId>())
        throw DataError("grid file cell id mismatch, expected " +
                        std::to_string(id));
      g.cells_[id].valid = jc.at("valid").get<bool>();
      if (jc.contains("pickup_points")) {
        std::vector<LatLon> pts;
        for (const auto& jp : jc.at("pickup_points"))
          pts.push_back({jp.at(0).get<double>(), jp.at(1).get<double>()});
        g.cells_[id].pickup_points = std::move(pts);
      }
    }
    return g;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("grid file " + path + " missing fields: " + e.what());
  }
}

DestMask dest_mask(const GridIndex& grid, CellId cell) {
  DestMask m{};
  m[0] = grid.is_valid(cell);
  for (int dir = 1; dir <= 6; ++dir) {
    CellId nb = grid.neighbor_in_dir(cell, dir);
    m[dir] = nb != kNoCell && grid.is_valid(nb);
  }
  return m;
}

void TravelTimeModel::set_override(CellId from, CellId to, double minutes) {
  overrides_[{from, to}] = minutes;
}

double TravelTimeModel::distance_m(LatLon a, LatLon b) const {
  return grid_->projection().distance_m(a, b);
}

double TravelTimeModel::eta_min(LatLon origin, LatLon dest) const {
  if (!overrides_.empty()) {
    CellId a = grid_->locate(origin);
    CellId b = grid_->locate(dest);
    auto it = overrides_.find({a, b});
    if (it != overrides_.end()) return it->second;
  } else {
    if (!grid_->bbox().contains(origin) || !grid_->bbox().contains(dest))
      throw OutOfRegionError("eta endpoint outside region");
  }
  return distance_m(origin, dest) / speed_;
}

}  // namespace reposim
