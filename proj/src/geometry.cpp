#include "shmpipe/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "shmpipe/error.hpp"

namespace shmpipe {

namespace {

constexpr double kPi = 3.14159265358979323846;

} // namespace

std::vector<ComponentInstance> connected_components(const MaskLayer& mask, std::uint8_t code) {
    if (code > code_table_max(mask.table))
        throw Error("class code " + std::to_string(code) + " outside the " +
                    std::string(code_table_name(mask.table)) + " table");

    const int w = mask.width;
    const int h = mask.height;
    std::vector<std::int32_t> labels(static_cast<std::size_t>(w) * h, -1);
    std::vector<ComponentInstance> instances;
    std::vector<std::size_t> queue;

    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            std::size_t start = static_cast<std::size_t>(y) * w + x;
            if (mask.codes[start] != code || labels[start] >= 0) continue;
            std::int32_t id = static_cast<std::int32_t>(instances.size());
            ComponentInstance instance;
            instance.id = id;
            instance.class_code = code;
            instances.push_back(std::move(instance));

            labels[start] = id;
            queue.clear();
            queue.push_back(start);
            for (std::size_t head = 0; head < queue.size(); ++head) {
                std::size_t idx = queue[head];
                int px = static_cast<int>(idx % w);
                int py = static_cast<int>(idx / w);
                for (int dy = -1; dy <= 1; ++dy) {
                    for (int dx = -1; dx <= 1; ++dx) {
                        if (dx == 0 && dy == 0) continue;
                        int nx = px + dx;
                        int ny = py + dy;
                        if (nx < 0 || nx >= w || ny < 0 || ny >= h) continue;
                        std::size_t nidx = static_cast<std::size_t>(ny) * w + nx;
                        if (mask.codes[nidx] != code || labels[nidx] >= 0) continue;
                        labels[nidx] = id;
                        queue.push_back(nidx);
                    }
                }
            }
        }
    }

    // Second pass keeps every pixel list in raster-scan order.
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            std::int32_t id = labels[static_cast<std::size_t>(y) * w + x];
            if (id < 0) continue;
            instances[static_cast<std::size_t>(id)].pixels.push_back({x, y});
        }
    }
    for (auto& instance : instances) {
        int min_x = instance.pixels.front().x, max_x = min_x;
        int min_y = instance.pixels.front().y, max_y = min_y;
        for (const auto& p : instance.pixels) {
            min_x = std::min(min_x, p.x);
            max_x = std::max(max_x, p.x);
            min_y = std::min(min_y, p.y);
            max_y = std::max(max_y, p.y);
        }
        instance.bbox = {min_x, min_y, max_x - min_x + 1, max_y - min_y + 1};
    }
    return instances;
}

std::array<std::array<double, 2>, 4> RotatedRect::corners() const {
    double rad = angle_deg * kPi / 180.0;
    double c = std::cos(rad), s = std::sin(rad);
    std::array<std::array<double, 2>, 4> local = {{{-w / 2, -h / 2},
                                                   {w / 2, -h / 2},
                                                   {w / 2, h / 2},
                                                   {-w / 2, h / 2}}};
    std::array<std::array<double, 2>, 4> out{};
    for (int i = 0; i < 4; ++i) {
        out[i][0] = cx + local[i][0] * c - local[i][1] * s;
        out[i][1] = cy + local[i][0] * s + local[i][1] * c;
    }
    return out;
}

bool RotatedRect::contains(double x, double y, double tolerance) const {
    double rad = angle_deg * kPi / 180.0;
    double c = std::cos(rad), s = std::sin(rad);
    double dx = x - cx, dy = y - cy;
    double lu = dx * c + dy * s;
    double lv = -dx * s + dy * c;
    return std::abs(lu) <= w / 2 + tolerance && std::abs(lv) <= h / 2 + tolerance;
}

namespace {

// Cross product of OA x OB; positive when the turn is counter-clockwise in
// a y-up frame. Integer math keeps the hull exact.
std::int64_t cross(const PixelPoint& o, const PixelPoint& a, const PixelPoint& b) {
    return std::int64_t(a.x - o.x) * (b.y - o.y) - std::int64_t(a.y - o.y) * (b.x - o.x);
}

std::vector<PixelPoint> convex_hull(std::span<const PixelPoint> points) {
    std::vector<PixelPoint> pts(points.begin(), points.end());
    std::sort(pts.begin(), pts.end(),
              [](const PixelPoint& a, const PixelPoint& b) {
                  return a.x != b.x ? a.x < b.x : a.y < b.y;
              });
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    if (pts.size() <= 2) return pts;

    std::vector<PixelPoint> hull(2 * pts.size());
    std::size_t k = 0;
    for (const auto& p : pts) { // lower chain
        while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
        hull[k++] = p;
    }
    for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) { // upper chain
        while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
        hull[k++] = pts[i];
    }
    hull.resize(k - 1);
    return hull;
}

struct OrientedFit {
    double area = std::numeric_limits<double>::infinity();
    double theta = 0;
    double min_u = 0, max_u = 0, min_v = 0, max_v = 0;
};

void consider_orientation(const std::vector<PixelPoint>& hull, double theta, OrientedFit& best) {
    double c = std::cos(theta), s = std::sin(theta);
    double min_u = std::numeric_limits<double>::infinity(), max_u = -min_u;
    double min_v = min_u, max_v = -min_u;
    for (const auto& p : hull) {
        double u = p.x * c + p.y * s;
        double v = -p.x * s + p.y * c;
        min_u = std::min(min_u, u);
        max_u = std::max(max_u, u);
        min_v = std::min(min_v, v);
        max_v = std::max(max_v, v);
    }
    double area = (max_u - min_u + 1.0) * (max_v - min_v + 1.0);
    if (area < best.area - 1e-9) best = {area, theta, min_u, max_u, min_v, max_v};
}

} // namespace

RotatedRect min_area_rect(std::span<const PixelPoint> points) {
    if (points.empty()) throw Error("empty point set has no bounding rectangle");
    std::vector<PixelPoint> hull = convex_hull(points);

    // Axis-aligned first so ties settle at angle 0, then every hull edge
    // direction. Each side carries the pixel footprint: extent plus one.
    OrientedFit best;
    consider_orientation(hull, 0.0, best);
    for (std::size_t i = 0; i < hull.size(); ++i) {
        const PixelPoint& a = hull[i];
        const PixelPoint& b = hull[(i + 1) % hull.size()];
        if (a == b) continue;
        consider_orientation(hull, std::atan2(double(b.y - a.y), double(b.x - a.x)), best);
    }

    double c = std::cos(best.theta), s = std::sin(best.theta);
    double cu = (best.min_u + best.max_u) / 2;
    double cv = (best.min_v + best.max_v) / 2;
    RotatedRect rect;
    rect.cx = cu * c - cv * s;
    rect.cy = cu * s + cv * c;
    rect.w = best.max_u - best.min_u + 1.0;
    rect.h = best.max_v - best.min_v + 1.0;
    rect.angle_deg = best.theta * 180.0 / kPi;
    if (rect.w < rect.h) {
        std::swap(rect.w, rect.h);
        rect.angle_deg += 90.0;
    }
    rect.angle_deg = std::fmod(rect.angle_deg + 90.0, 180.0);
    if (rect.angle_deg < 0) rect.angle_deg += 180.0;
    rect.angle_deg -= 90.0;
    return rect;
}

Raster warp_to_square(const Raster& src, const RotatedRect& rect, int side, Sampling sampling) {
    if (side <= 0) throw Error("warp side must be positive");
    if (!(rect.w > 0) || !(rect.h > 0)) throw Error("cannot warp a degenerate rectangle");

    Raster out = Raster::make(side, side, src.channels);
    double rad = rect.angle_deg * kPi / 180.0;
    double c = std::cos(rad), s = std::sin(rad);
    double scale_u = rect.w / side;
    double scale_v = rect.h / side;
    double half = side * 0.5;

    auto sample = [&](int x, int y, int ch) -> double {
        if (x < 0 || x >= src.width || y < 0 || y >= src.height) return 0.0;
        return src.at(x, y, ch);
    };

    for (int j = 0; j < side; ++j) {
        for (int i = 0; i < side; ++i) {
            double fu = (i + 0.5 - half) * scale_u;
            double fv = (j + 0.5 - half) * scale_v;
            double sx = rect.cx + fu * c - fv * s;
            double sy = rect.cy + fu * s + fv * c;
            if (sampling == Sampling::Nearest) {
                int xi = static_cast<int>(std::floor(sx + 0.5));
                int yi = static_cast<int>(std::floor(sy + 0.5));
                for (int ch = 0; ch < src.channels; ++ch)
                    out.at(i, j, ch) = static_cast<std::uint8_t>(sample(xi, yi, ch));
            } else {
                int x0 = static_cast<int>(std::floor(sx));
                int y0 = static_cast<int>(std::floor(sy));
                double ax = sx - x0, ay = sy - y0;
                for (int ch = 0; ch < src.channels; ++ch) {
                    double v = (1 - ax) * (1 - ay) * sample(x0, y0, ch) +
                               ax * (1 - ay) * sample(x0 + 1, y0, ch) +
                               (1 - ax) * ay * sample(x0, y0 + 1, ch) +
                               ax * ay * sample(x0 + 1, y0 + 1, ch);
                    out.at(i, j, ch) = static_cast<std::uint8_t>(
                        std::clamp(std::lround(v), 0L, 255L));
                }
            }
        }
    }
    return out;
}

Raster apply_foreground_mask(const Raster& rgb, const MaskLayer& fg, const Color& fill) {
    if (rgb.width != fg.width || rgb.height != fg.height)
        throw Error("foreground mask size differs from image");
    Raster out = rgb;
    for (int y = 0; y < rgb.height; ++y) {
        for (int x = 0; x < rgb.width; ++x) {
            if (fg.at(x, y) != 0) continue;
            for (int ch = 0; ch < rgb.channels; ++ch)
                out.at(x, y, ch) = fill[static_cast<std::size_t>(ch % 3)];
        }
    }
    return out;
}

} // namespace shmpipe
