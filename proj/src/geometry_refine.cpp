// Copyright 2026 The Crossview Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "crossview/geometry_refine.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>

#include "crossview/parallel.hpp"
#include "json.hpp"

namespace crossview {

namespace fs = std::filesystem;

void FootprintMask::validate() const {
  if (raster.channels() != 1 || raster.type() != PixelType::kU8)
    throw ValidationError("footprint mask must be a 1-channel u8 raster");
  for (std::uint8_t v : raster.u8_data())
    if (v > 1) throw ValidationError("footprint mask values must be 0 or 1");
  georef.validate();
}

void FootprintMask::validate_against(const HeightField& hf) const {
  validate();
  if (raster.width() != hf.width() || raster.height() != hf.height())
    throw DimMismatch("footprint mask and height field differ in size");
  if (!(georef == hf.georef))
    throw DimMismatch("footprint mask and height field differ in georef");
}

FootprintMask read_footprint(const fs::path& png) {
  FootprintMask m{read_raster(png, RasterFormat::kPng8),
                  read_georef(geo_sidecar_path(png))};
  // Accept 0/255 masks as written by common tools.
  for (auto& v : m.raster.u8_data()) v = v != 0 ? 1 : 0;
  m.validate();
  return m;
}

void write_footprint(const FootprintMask& mask, const fs::path& png) {
  write_raster(mask.raster, png);
  write_georef(mask.georef, geo_sidecar_path(png));
}

// ---------------------------------------------------------------------------
// Ring utilities

double signed_area(const Ring& r) {
  double s = 0.0;
  for (std::size_t i = 0, n = r.size(); i < n; ++i) {
    const Point2& a = r[i];
    const Point2& b = r[(i + 1) % n];
    s += a.x * b.y - b.x * a.y;
  }
  return 0.5 * s;
}

namespace {

double cross(const Point2& o, const Point2& a, const Point2& b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

bool on_segment(const Point2& p, const Point2& a, const Point2& b) {
  return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) &&
         std::min(a.y, b.y) <= p.y && p.y <= std::max(a.y, b.y);
}

bool segments_intersect(const Point2& p1, const Point2& p2, const Point2& q1,
                        const Point2& q2) {
  const double d1 = cross(q1, q2, p1);
  const double d2 = cross(q1, q2, p2);
  const double d3 = cross(p1, p2, q1);
  const double d4 = cross(p1, p2, q2);
  if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) &&
      ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0)))
    return true;
  if (d1 == 0 && on_segment(p1, q1, q2)) return true;
  if (d2 == 0 && on_segment(p2, q1, q2)) return true;
  if (d3 == 0 && on_segment(q1, p1, p2)) return true;
  if (d4 == 0 && on_segment(q2, p1, p2)) return true;
  return false;
}

double point_segment_distance(const Point2& p, const Point2& a,
                              const Point2& b) {
  const double dx = b.x - a.x, dy = b.y - a.y;
  const double len2 = dx * dx + dy * dy;
  double t = 0.0;
  if (len2 > 0.0)
    t = std::clamp(((p.x - a.x) * dx + (p.y - a.y) * dy) / len2, 0.0, 1.0);
  const double ex = a.x + t * dx - p.x, ey = a.y + t * dy - p.y;
  return std::sqrt(ex * ex + ey * ey);
}

}  // namespace

bool is_simple(const Ring& r) {
  const std::size_t n = r.size();
  if (n < 3) return false;
  for (std::size_t i = 0; i < n; ++i) {
    const Point2& a1 = r[i];
    const Point2& a2 = r[(i + 1) % n];
    if (a1 == a2) return false;
    for (std::size_t j = i + 1; j < n; ++j) {
      // Adjacent edges share exactly one vertex.
      if (j == i + 1 || (i == 0 && j == n - 1)) continue;
      if (segments_intersect(a1, a2, r[j], r[(j + 1) % n])) return false;
    }
  }
  return true;
}

bool point_in_ring(const Ring& r, double x, double y) {
  bool inside = false;
  for (std::size_t i = 0, n = r.size(), j = n - 1; i < n; j = i++) {
    const Point2& a = r[i];
    const Point2& b = r[j];
    if ((a.y > y) != (b.y > y) &&
        x < (b.x - a.x) * (y - a.y) / (b.y - a.y) + a.x)
      inside = !inside;
  }
  return inside;
}

// ---------------------------------------------------------------------------
// Boundary tracing

std::vector<Contour> trace_boundaries(const FootprintMask& mask,
                                      int min_pixels) {
  const Raster& m = mask.raster;
  const int w = m.width(), h = m.height();
  std::vector<int> label(static_cast<std::size_t>(w) * h, -1);
  std::vector<Contour> out;
  std::vector<std::pair<int, int>> stack;
  int components = 0;

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (m.u8_at(x, y) == 0 || label[y * w + x] >= 0) continue;
      const int comp = components++;
      int count = 0;
      stack.assign(1, {x, y});
      label[y * w + x] = comp;
      while (!stack.empty()) {
        auto [cx, cy] = stack.back();
        stack.pop_back();
        ++count;
        constexpr std::array<std::pair<int, int>, 4> nbr{
            {{1, 0}, {-1, 0}, {0, 1}, {0, -1}}};
        for (auto [dx, dy] : nbr) {
          const int nx = cx + dx, ny = cy + dy;
          if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
          if (m.u8_at(nx, ny) == 0 || label[ny * w + nx] >= 0) continue;
          label[ny * w + nx] = comp;
          stack.push_back({nx, ny});
        }
      }
      if (count < min_pixels) continue;

      auto inside = [&](int px, int py) {
        return px >= 0 && py >= 0 && px < w && py < h &&
               label[py * w + px] == comp;
      };
      // Directions: 0 east, 1 south, 2 west, 3 north (y grows downward).
      // The component stays on the right-hand side of travel; preferring
      // right turns keeps diagonal-only neighbours apart (4-connectivity).
      constexpr int kDx[4] = {1, 0, -1, 0};
      constexpr int kDy[4] = {0, 1, 0, -1};
      auto is_boundary_edge = [&](int vx, int vy, int dir) {
        switch (dir) {
          case 0: return inside(vx, vy) && !inside(vx, vy - 1);
          case 1: return inside(vx - 1, vy) && !inside(vx, vy);
          case 2: return inside(vx - 1, vy - 1) && !inside(vx - 1, vy);
          default: return inside(vx, vy - 1) && !inside(vx - 1, vy - 1);
        }
      };

      Contour contour;
      contour.id = static_cast<int>(out.size());
      int vx = x, vy = y, dir = 0;
      do {
        contour.points.push_back({static_cast<double>(vx),
                                  static_cast<double>(vy)});
        vx += kDx[dir];
        vy += kDy[dir];
        for (int turn : {1, 0, 3}) {
          const int cand = (dir + turn) % 4;
          if (is_boundary_edge(vx, vy, cand)) {
            dir = cand;
            break;
          }
        }
      } while (vx != x || vy != y);
      out.push_back(std::move(contour));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Douglas-Peucker

namespace {

void douglas_peucker(const Ring& r, std::size_t first, std::size_t last,
                     double eps, std::vector<char>& keep) {
  const std::size_t n = r.size();
  std::vector<std::pair<std::size_t, std::size_t>> work{{first, last}};
  while (!work.empty()) {
    auto [a, b] = work.back();
    work.pop_back();
    const std::size_t span = (b + n - a) % n;
    if (span < 2) continue;
    double best = -1.0;
    std::size_t best_i = a;
    for (std::size_t k = 1; k < span; ++k) {
      const std::size_t i = (a + k) % n;
      const double d = point_segment_distance(r[i], r[a], r[b]);
      if (d > best) {
        best = d;
        best_i = i;
      }
    }
    if (best > eps) {
      keep[best_i] = 1;
      work.push_back({a, best_i});
      work.push_back({best_i, b});
    }
  }
}

Ring simplify_once(const Ring& r, double eps) {
  const std::size_t n = r.size();
  Point2 c{};
  for (const auto& p : r) {
    c.x += p.x / n;
    c.y += p.y / n;
  }
  // Anchors are extreme points, hence genuine corners of the ring.
  auto farthest_from = [&](const Point2& q) {
    std::size_t idx = 0;
    double best = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = std::hypot(r[i].x - q.x, r[i].y - q.y);
      if (d > best) {
        best = d;
        idx = i;
      }
    }
    return idx;
  };
  const std::size_t a = farthest_from(c);
  const std::size_t b = farthest_from(r[a]);
  std::vector<char> keep(n, 0);
  keep[a] = keep[b] = 1;
  if (a != b) {
    douglas_peucker(r, a, b, eps, keep);
    douglas_peucker(r, b, a, eps, keep);
  }
  Ring out;
  for (std::size_t i = 0; i < n; ++i)
    if (keep[i]) out.push_back(r[i]);
  return out;
}

}  // namespace

Ring simplify_polygon(const Ring& contour, double epsilon) {
  if (!(epsilon > 0.0))
    throw ValidationError("geometry_refine.simplify_polygon: epsilon must be > 0");
  if (contour.size() < 3)
    throw DegenerateRing("geometry_refine.simplify_polygon: ring has fewer "
                         "than 3 points");
  // Douglas-Peucker can introduce self-intersections on thin parts; shrink
  // the tolerance until the result is simple.
  for (double eps = epsilon; eps >= 1e-3; eps *= 0.5) {
    Ring out = simplify_once(contour, eps);
    if (out.size() < 3 || std::abs(signed_area(out)) < 1e-12)
      throw DegenerateRing("geometry_refine.simplify_polygon: fewer than 3 "
                           "non-collinear points survive");
    if (is_simple(out)) return out;
  }
  Ring out = simplify_once(contour, 1e-9);
  if (out.size() < 3 || std::abs(signed_area(out)) < 1e-12)
    throw DegenerateRing("geometry_refine.simplify_polygon: degenerate ring");
  return out;
}

// ---------------------------------------------------------------------------
// Regularization

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

// Orientation of a segment folded into [0, 90) degrees.
double folded_angle_deg(const Point2& a, const Point2& b) {
  double t = std::atan2(b.y - a.y, b.x - a.x) / kDeg;
  t = std::fmod(t, 90.0);
  if (t < 0) t += 90.0;
  if (t >= 90.0) t -= 90.0;
  return t;
}

double fold_distance_deg(double a, double b) {
  double d = std::fmod(std::abs(a - b), 90.0);
  return std::min(d, 90.0 - d);
}

Ring dedupe(const Ring& r) {
  Ring out;
  for (const auto& p : r)
    if (out.empty() || !(out.back() == p)) out.push_back(p);
  while (out.size() > 1 && out.front() == out.back()) out.pop_back();
  return out;
}

}  // namespace

double dominant_angle(const Ring& polygon, const RegularizeOptions& opt) {
  const std::size_t n = polygon.size();
  std::vector<double> angle(n), length(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Point2& a = polygon[i];
    const Point2& b = polygon[(i + 1) % n];
    angle[i] = folded_angle_deg(a, b);
    length[i] = std::hypot(b.x - a.x, b.y - a.y);
    total += length[i];
  }
  const int steps = static_cast<int>(std::lround(90.0 / opt.angle_step_deg));
  double best_score = -1.0, best_spread = 0.0, best_theta = 0.0;
  for (int s = 0; s < steps; ++s) {
    const double theta = s * opt.angle_step_deg;
    double score = 0.0, spread = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = fold_distance_deg(angle[i], theta);
      if (d <= opt.angle_window_deg + 1e-12) {
        score += length[i];
        spread += length[i] * d;
      }
    }
    // The score is flat across the window; among equal scores prefer the
    // grid angle closest to the supporting edges.
    const double tie = 1e-9 * total;
    if (score > best_score + tie ||
        (score > best_score - tie && spread < best_spread - tie)) {
      best_score = score;
      best_spread = spread;
      best_theta = theta;
    }
  }
  return best_theta * kDeg;
}

BuildingPolygon regularize_polygon(const Ring& input, int id,
                                   const RegularizeOptions& opt) {
  const Ring poly = dedupe(input);
  if (poly.size() < 4)
    throw DegenerateRing("geometry_refine.regularize_polygon: needs at least "
                         "4 vertices");
  const double theta = dominant_angle(poly, opt);
  const double ct = std::cos(theta), st = std::sin(theta);
  auto to_frame = [&](const Point2& p) {
    return Point2{p.x * ct + p.y * st, -p.x * st + p.y * ct};
  };
  auto from_frame = [&](const Point2& p) {
    return Point2{p.x * ct - p.y * st, p.x * st + p.y * ct};
  };

  const std::size_t n = poly.size();
  Ring rot(n);
  for (std::size_t i = 0; i < n; ++i) rot[i] = to_frame(poly[i]);

  // Classify edges: horizontal (true) or vertical in the rotated frame.
  std::vector<char> horiz(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Point2& a = rot[i];
    const Point2& b = rot[(i + 1) % n];
    horiz[i] = std::abs(b.x - a.x) >= std::abs(b.y - a.y);
  }
  std::size_t start = n;
  for (std::size_t i = 0; i < n; ++i)
    if (horiz[i] != horiz[(i + n - 1) % n]) {
      start = i;
      break;
    }
  if (start == n)
    throw RegularizationRejected(
        "geometry_refine.regularize_polygon: all edges share one orientation");

  // Merge runs of same-class edges into a single axis-aligned line whose
  // offset is the length-weighted mean of the member edge midpoints.
  struct Line {
    bool horizontal;
    double offset;
  };
  std::vector<Line> lines;
  for (std::size_t k = 0; k < n;) {
    const std::size_t i0 = (start + k) % n;
    const bool cls = horiz[i0];
    double wsum = 0.0, osum = 0.0;
    while (k < n && horiz[(start + k) % n] == cls) {
      const std::size_t i = (start + k) % n;
      const Point2& a = rot[i];
      const Point2& b = rot[(i + 1) % n];
      const double len = std::hypot(b.x - a.x, b.y - a.y);
      const double mid = cls ? 0.5 * (a.y + b.y) : 0.5 * (a.x + b.x);
      wsum += len;
      osum += len * mid;
      ++k;
    }
    lines.push_back({cls, osum / wsum});
  }
  if (lines.size() < 4 || lines.size() % 2 != 0)
    throw RegularizationRejected(
        "geometry_refine.regularize_polygon: fewer than 4 snapped edges");

  Ring snapped;
  for (std::size_t g = 0; g < lines.size(); ++g) {
    const Line& cur = lines[g];
    const Line& next = lines[(g + 1) % lines.size()];
    const double x = cur.horizontal ? next.offset : cur.offset;
    const double y = cur.horizontal ? cur.offset : next.offset;
    snapped.push_back(from_frame({x, y}));
  }
  snapped = dedupe(snapped);

  const double a_in = signed_area(poly);
  const double a_out = signed_area(snapped);
  if (snapped.size() < 4 || !is_simple(snapped) ||
      (a_in > 0) != (a_out > 0))
    throw RegularizationRejected(
        "geometry_refine.regularize_polygon: snapped polygon is not simple");
  const double change = std::abs(a_out - a_in) / std::abs(a_in);
  if (change > opt.max_area_change)
    throw RegularizationRejected(
        "geometry_refine.regularize_polygon: area change " +
        std::to_string(change) + " exceeds bound");

  BuildingPolygon out;
  out.id = id;
  out.vertices = std::move(snapped);
  out.dominant_angle = theta;
  out.regularized = true;
  return out;
}

BuildingPolygon refit_to_boundary(const BuildingPolygon& polygon,
                                  const Ring& boundary,
                                  const RegularizeOptions& opt) {
  const Ring& v = polygon.vertices;
  const std::size_t n = v.size();
  if (!polygon.regularized || n < 4 || boundary.size() < 2) return polygon;
  const double ct = std::cos(polygon.dominant_angle);
  const double st = std::sin(polygon.dominant_angle);
  auto to_frame = [&](const Point2& p) {
    return Point2{p.x * ct + p.y * st, -p.x * st + p.y * ct};
  };
  auto from_frame = [&](const Point2& p) {
    return Point2{p.x * ct - p.y * st, p.x * st + p.y * ct};
  };
  Ring rot(n);
  for (std::size_t i = 0; i < n; ++i) rot[i] = to_frame(v[i]);

  std::vector<char> horiz(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Point2& a = rot[i];
    const Point2& b = rot[(i + 1) % n];
    horiz[i] = std::abs(b.x - a.x) >= std::abs(b.y - a.y);
    if (horiz[i] == horiz[(i + n - 1) % n] && i > 0) return polygon;
  }
  if (horiz[0] == horiz[n - 1]) return polygon;

  std::vector<double> wsum(n, 0.0), osum(n, 0.0);
  const std::size_t m = boundary.size();
  for (std::size_t j = 0; j < m; ++j) {
    const Point2 a = to_frame(boundary[j]);
    const Point2 b = to_frame(boundary[(j + 1) % m]);
    const double len = std::hypot(b.x - a.x, b.y - a.y);
    if (len == 0.0) continue;
    const Point2 mid{0.5 * (a.x + b.x), 0.5 * (a.y + b.y)};
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      const Point2& p = rot[i];
      const Point2& q = rot[(i + 1) % n];
      double d;
      if (horiz[i]) {
        const double x = std::clamp(mid.x, std::min(p.x, q.x), std::max(p.x, q.x));
        d = std::hypot(mid.x - x, mid.y - p.y);
      } else {
        const double y = std::clamp(mid.y, std::min(p.y, q.y), std::max(p.y, q.y));
        d = std::hypot(mid.x - p.x, mid.y - y);
      }
      if (d < best_d) best_d = d, best = i;
    }
    wsum[best] += len;
    osum[best] += len * (horiz[best] ? mid.y : mid.x);
  }

  std::vector<double> offset(n);
  for (std::size_t i = 0; i < n; ++i)
    offset[i] = wsum[i] > 0.0 ? osum[i] / wsum[i]
                              : (horiz[i] ? rot[i].y : rot[i].x);
  Ring out(n);
  for (std::size_t i = 0; i < n; ++i) {
    // Vertex i joins edge i-1 and edge i.
    const std::size_t prev = (i + n - 1) % n;
    const double x = horiz[i] ? offset[prev] : offset[i];
    const double y = horiz[i] ? offset[i] : offset[prev];
    out[i] = from_frame({x, y});
  }
  const double a_in = signed_area(v);
  const double a_out = signed_area(out);
  if (!is_simple(out) || (a_in > 0) != (a_out > 0) ||
      std::abs(a_out - a_in) / std::abs(a_in) > opt.max_area_change)
    return polygon;
  BuildingPolygon r = polygon;
  r.vertices = std::move(out);
  return r;
}

// ---------------------------------------------------------------------------
// Ground plane

namespace {

struct Sample {
  double x, y, z;
};

bool least_squares_plane(const std::vector<Sample>& pts, GroundPlane& plane) {
  double mx = 0.0, my = 0.0;
  for (const auto& p : pts) {
    mx += p.x;
    my += p.y;
  }
  mx /= pts.size();
  my /= pts.size();
  Eigen::MatrixXd a(pts.size(), 3);
  Eigen::VectorXd z(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    a(i, 0) = pts[i].x - mx;
    a(i, 1) = pts[i].y - my;
    a(i, 2) = 1.0;
    z(i) = pts[i].z;
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  qr.setThreshold(1e-10);
  if (qr.rank() < 3) return false;
  const Eigen::Vector3d sol = qr.solve(z);
  plane.a = sol(0);
  plane.b = sol(1);
  plane.c = sol(2) - sol(0) * mx - sol(1) * my;
  return true;
}

}  // namespace

GroundPlane fit_ground_plane(const HeightField& hf, const FootprintMask& mask,
                             const RansacOptions& opt) {
  mask.validate_against(hf);
  const TileFrame frame = hf.frame();
  std::vector<Sample> pts;
  for (int y = 0; y < hf.height(); ++y)
    for (int x = 0; x < hf.width(); ++x)
      if (!mask.building(x, y) && hf.valid_at(x, y))
        pts.push_back({frame.east_of(x + 0.5), frame.north_of(y + 0.5),
                       static_cast<double>(hf.at(x, y))});
  if (pts.size() < opt.min_samples)
    throw InsufficientSamples("geometry_refine.fit_ground_plane: " +
                              std::to_string(pts.size()) +
                              " non-building samples, need " +
                              std::to_string(opt.min_samples));

  const std::size_t n = pts.size();
  auto count_inliers = [&](double a, double b, double c) {
    std::size_t k = 0;
    for (const auto& p : pts)
      if (std::abs(p.z - (a * p.x + b * p.y + c)) <= opt.inlier_threshold) ++k;
    return k;
  };

  // Modulo sampling keeps the draw sequence identical across standard
  // libraries, unlike std::uniform_int_distribution.
  std::mt19937_64 rng(opt.seed);
  std::size_t best = 0;
  GroundPlane best_plane;
  for (int it = 0; it < opt.iterations; ++it) {
    const std::size_t i = rng() % n;
    const std::size_t j = rng() % n;
    const std::size_t k = rng() % n;
    if (i == j || j == k || i == k) continue;
    const Eigen::Vector3d p0(pts[i].x, pts[i].y, pts[i].z);
    const Eigen::Vector3d p1(pts[j].x, pts[j].y, pts[j].z);
    const Eigen::Vector3d p2(pts[k].x, pts[k].y, pts[k].z);
    const Eigen::Vector3d nrm = (p1 - p0).cross(p2 - p0);
    if (std::abs(nrm.z()) < 1e-12 * std::max(1.0, nrm.norm())) continue;
    const double a = -nrm.x() / nrm.z();
    const double b = -nrm.y() / nrm.z();
    const double c = p0.z() - a * p0.x() - b * p0.y();
    const std::size_t cnt = count_inliers(a, b, c);
    if (cnt > best) {
      best = cnt;
      best_plane = {a, b, c, 0.0, 0};
    }
  }
  if (best < 3)
    throw DegenerateGeometry(
        "geometry_refine.fit_ground_plane: no non-degenerate consensus set");

  // Least-squares refit on the consensus set until it stops changing.
  GroundPlane plane = best_plane;
  std::vector<Sample> consensus;
  std::vector<char> member(n, 0), prev;
  for (int round = 0; round < 5; ++round) {
    consensus.clear();
    for (std::size_t i = 0; i < n; ++i) {
      const auto& p = pts[i];
      member[i] = std::abs(p.z - plane.height_at(p.x, p.y)) <=
                  opt.inlier_threshold;
      if (member[i]) consensus.push_back(p);
    }
    if (member == prev) break;
    if (consensus.size() < 3 || !least_squares_plane(consensus, plane))
      throw DegenerateGeometry("geometry_refine.fit_ground_plane: consensus "
                               "set is collinear");
    prev = member;
  }
  double ss = 0.0;
  for (const auto& p : consensus) {
    const double r = p.z - plane.height_at(p.x, p.y);
    ss += r * r;
  }
  plane.inliers = consensus.size();
  plane.inlier_rms = std::sqrt(ss / consensus.size());
  return plane;
}

// ---------------------------------------------------------------------------
// Height refinement

std::vector<int> rasterize_polygons(const std::vector<BuildingPolygon>& polys,
                                    int width, int height) {
  std::vector<int> label(static_cast<std::size_t>(width) * height, 0);
  for (std::size_t k = 0; k < polys.size(); ++k) {
    const Ring& r = polys[k].vertices;
    if (r.size() < 3) continue;
    double x0 = r[0].x, x1 = r[0].x, y0 = r[0].y, y1 = r[0].y;
    for (const auto& p : r) {
      x0 = std::min(x0, p.x);
      x1 = std::max(x1, p.x);
      y0 = std::min(y0, p.y);
      y1 = std::max(y1, p.y);
    }
    const int ix0 = std::max(0, static_cast<int>(std::floor(x0)));
    const int ix1 = std::min(width - 1, static_cast<int>(std::ceil(x1)));
    const int iy0 = std::max(0, static_cast<int>(std::floor(y0)));
    const int iy1 = std::min(height - 1, static_cast<int>(std::ceil(y1)));
    for (int y = iy0; y <= iy1; ++y)
      for (int x = ix0; x <= ix1; ++x) {
        int& l = label[static_cast<std::size_t>(y) * width + x];
        if (l == 0 && point_in_ring(r, x + 0.5, y + 0.5))
          l = static_cast<int>(k) + 1;
      }
  }
  return label;
}

HeightField refine_heightfield(const HeightField& hf,
                               const std::vector<BuildingPolygon>& polygons,
                               const GroundPlane& plane,
                               const FootprintMask& mask) {
  mask.validate_against(hf);
  const int w = hf.width(), h = hf.height();
  const TileFrame frame = hf.frame();
  const std::vector<int> label = rasterize_polygons(polygons, w, h);

  // Fill height for cells a polygon annexed beyond the original mask: the
  // (lower) median of the original building heights inside that polygon.
  std::vector<float> fill(polygons.size(), std::numeric_limits<float>::quiet_NaN());
  {
    std::vector<std::vector<float>> inside_mask(polygons.size());
    std::vector<std::vector<float>> inside_any(polygons.size());
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const int l = label[static_cast<std::size_t>(y) * w + x];
        if (l == 0 || !hf.valid_at(x, y)) continue;
        inside_any[l - 1].push_back(hf.at(x, y));
        if (mask.building(x, y)) inside_mask[l - 1].push_back(hf.at(x, y));
      }
    for (std::size_t k = 0; k < polygons.size(); ++k) {
      auto& v = inside_mask[k].empty() ? inside_any[k] : inside_mask[k];
      if (v.empty()) continue;
      auto mid = v.begin() + (v.size() - 1) / 2;
      std::nth_element(v.begin(), mid, v.end());
      fill[k] = *mid;
    }
  }

  HeightField out = hf;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const int l = label[static_cast<std::size_t>(y) * w + x];
      const float ground = static_cast<float>(
          plane.height_at(frame.east_of(x + 0.5), frame.north_of(y + 0.5)));
      float& dst = out.raster.f32_at(x, y);
      if (l == 0)
        dst = ground;
      else if (!mask.building(x, y))
        dst = std::isnan(fill[l - 1]) ? ground : fill[l - 1];
      // else: original building height, bit-exact
    }
  return out;
}

RefineResult refine_geometry(const HeightField& hf, const FootprintMask& mask,
                             const RefineOptions& opt) {
  mask.validate_against(hf);
  const std::vector<Contour> contours =
      trace_boundaries(mask, opt.min_component_pixels);

  std::vector<std::optional<BuildingPolygon>> slots(contours.size());
  parallel_for(contours.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const Contour& c = contours[i];
      Ring simple;
      try {
        simple = simplify_polygon(c.points, opt.simplify_epsilon);
      } catch (const DegenerateRing&) {
        continue;
      }
      try {
        slots[i] = refit_to_boundary(regularize_polygon(simple, c.id, opt.regularize),
                                     c.points, opt.regularize);
      } catch (const RuntimeError&) {
        BuildingPolygon p;
        p.id = c.id;
        p.vertices = simple;
        p.dominant_angle = simple.size() >= 3 ? dominant_angle(simple, opt.regularize) : 0.0;
        p.regularized = false;
        slots[i] = std::move(p);
      }
    }
  });

  RefineResult res;
  for (auto& s : slots)
    if (s) res.polygons.push_back(std::move(*s));
  res.plane = fit_ground_plane(hf, mask, opt.ransac);
  res.refined = refine_heightfield(hf, res.polygons, res.plane, mask);
  const std::vector<int> label =
      rasterize_polygons(res.polygons, hf.width(), hf.height());
  res.building_cells = Raster::u8(hf.width(), hf.height(), 1);
  for (int y = 0; y < hf.height(); ++y)
    for (int x = 0; x < hf.width(); ++x)
      res.building_cells.u8_at(x, y) =
          label[static_cast<std::size_t>(y) * hf.width() + x] != 0;
  return res;
}

// ---------------------------------------------------------------------------
// Persistence

void write_polygons(const std::vector<BuildingPolygon>& polygons,
                    const fs::path& path) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& p : polygons) {
    nlohmann::ordered_json b;
    b["id"] = p.id;
    b["angle_deg"] = p.dominant_angle / kDeg;
    b["regularized"] = p.regularized;
    nlohmann::ordered_json verts = nlohmann::ordered_json::array();
    for (const auto& v : p.vertices) verts.push_back({v.x, v.y});
    b["vertices"] = std::move(verts);
    arr.push_back(std::move(b));
  }
  nlohmann::ordered_json j;
  j["buildings"] = std::move(arr);
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("write_polygons: cannot open " + path.string());
  out << j.dump(2) << '\n';
}

std::vector<BuildingPolygon> read_polygons(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("read_polygons: cannot open " + path.string());
  std::vector<BuildingPolygon> out;
  try {
    nlohmann::json j;
    in >> j;
    for (const auto& b : j.at("buildings")) {
      BuildingPolygon p;
      p.id = b.at("id").get<int>();
      p.dominant_angle = b.at("angle_deg").get<double>() * kDeg;
      p.regularized = b.value("regularized", true);
      for (const auto& v : b.at("vertices"))
        p.vertices.push_back({v.at(0).get<double>(), v.at(1).get<double>()});
      out.push_back(std::move(p));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("read_polygons: " + path.string() + ": " + e.what());
  }
  return out;
}

void write_plane(const GroundPlane& plane, const fs::path& path) {
  nlohmann::ordered_json j;
  j["a"] = plane.a;
  j["b"] = plane.b;
  j["c"] = plane.c;
  j["inlier_rms"] = plane.inlier_rms;
  j["inliers"] = plane.inliers;
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("write_plane: cannot open " + path.string());
  out << j.dump(2) << '\n';
}

GroundPlane read_plane(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("read_plane: cannot open " + path.string());
  try {
    nlohmann::json j;
    in >> j;
    GroundPlane p;
    p.a = j.at("a").get<double>();
    p.b = j.at("b").get<double>();
    p.c = j.at("c").get<double>();
    p.inlier_rms = j.value("inlier_rms", 0.0);
    p.inliers = j.value("inliers", std::size_t{0});
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("read_plane: " + path.string() + ": " + e.what());
  }
}

}  // namespace crossview
