#pragma once

#include <array>
#include <span>
#include <vector>

#include "shmpipe/raster.hpp"

namespace shmpipe {

struct PixelPoint {
    int x = 0;
    int y = 0;
    bool operator==(const PixelPoint&) const = default;
};

/// One connected component of a single class, 8-connected.
struct ComponentInstance {
    int id = 0;
    std::uint8_t class_code = 0;
    std::vector<PixelPoint> pixels; // raster-scan order
    PixelRect bbox;                 // tight axis-aligned bound
};

/// Splits the pixels of `code` in `mask` into 8-connected instances.
/// Ids are assigned in raster-scan order of each instance's first pixel.
std::vector<ComponentInstance> connected_components(const MaskLayer& mask, std::uint8_t code);

/// Rotated rectangle in pixel coordinates (pixel centers at integers).
/// Canonical form: w >= h, angle of the long edge in degrees in [-90, 90).
struct RotatedRect {
    double cx = 0;
    double cy = 0;
    double w = 0;
    double h = 0;
    double angle_deg = 0;

    double area() const { return w * h; }
    /// Corners in canonical order: the (-w/2,-h/2) corner first, then
    /// clockwise in rect-local coordinates.
    std::array<std::array<double, 2>, 4> corners() const;
    bool contains(double x, double y, double tolerance = 0.0) const;
};

/// Minimum-area enclosing rotated rectangle of a pixel set.
///
/// The orientation comes from a support scan over the convex hull edges (the
/// optimum is flush with one of them), with the axis-aligned orientation as
/// an extra candidate. Sizes carry the pixel footprint: each side is the
/// point extent along the rect axis plus one, so a 10x4 axis-aligned block
/// yields size (10,4) and a single pixel yields (1,1).
RotatedRect min_area_rect(std::span<const PixelPoint> points);

enum class Sampling { Bilinear, Nearest };

/// Inverse-maps `rect` onto a side-by-side square. Bilinear sampling over
/// pixel centers; reads outside the source count as black. Rect corners map
/// to the output corners in canonical order.
Raster warp_to_square(const Raster& src, const RotatedRect& rect, int side = 224,
                      Sampling sampling = Sampling::Bilinear);

/// Replaces pixels where fg == 0 with `fill`; identical dimensions required.
Raster apply_foreground_mask(const Raster& rgb, const MaskLayer& fg, const Color& fill);

} // namespace shmpipe
