#pragma once

#include "vulncity/city_model.hpp"

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace vulncity {

/// Axis-aligned ground-plane rectangle; (x, z) is the minimum corner, sizes in meters.
struct Rect {
  double x = 0.0;
  double z = 0.0;
  double width = 0.0;
  double depth = 0.0;

  double area() const { return width * depth; }
  double max_x() const { return x + width; }
  double max_z() const { return z + depth; }
  double center_x() const { return x + width / 2.0; }
  double center_z() const { return z + depth / 2.0; }
  double shorter_side() const { return width < depth ? width : depth; }

  Rect inset(double d) const { return {x + d, z + d, width - 2.0 * d, depth - 2.0 * d}; }
  Rect scaled_about_center(double factor) const;
  bool contains(const Rect& inner, double eps = 1e-9) const;
  bool interiors_overlap(const Rect& other, double eps = 1e-9) const;

  bool operator==(const Rect&) const = default;
};

struct LayoutConfig {
  double areaPerLine = 0.25;
  double heightPerLine = 0.05;
  // streetWidth(level) = max(streetWidthBase * streetWidthDecay^level, streetWidthMin)
  double streetWidthBase = 2.0;
  double streetWidthDecay = 0.7;
  double streetWidthMin = 0.5;
  double buildingGap = 0.3;
  double widenFactor = 1.08;
  double platformThickness = 0.2;
  double minFootprintSide = 0.4;
  double baseplateSlack = 1.15;

  double street_width(int level) const;
  /// Throws InputError when a value is non-positive or widenFactor <= 1.
  void validate() const;

  bool operator==(const LayoutConfig&) const = default;
};

/// Largest aspect ratio among the rectangles of a row of areas laid along `side`.
double worst_aspect(std::span<const double> rowAreas, double side);

struct WeightedKey {
  std::string key;
  double weight = 0.0;
};

struct TreemapRow {
  std::vector<std::string> keys;  // placement order
  Rect strip;                      // the part of the parent this row occupies
};

struct Treemap {
  std::map<std::string, Rect> rects;
  std::vector<TreemapRow> rows;
};

/// Squarified treemap (greedy row building). Items are placed by weight
/// descending, ties by key ascending; an item joins the current row iff it does
/// not worsen the row's worst aspect ratio. Throws InputError for non-positive weights.
Treemap squarify_rows(std::vector<WeightedKey> weights, const Rect& rect);
std::map<std::string, Rect> squarify(std::vector<WeightedKey> weights, const Rect& rect);

/// Square centered at the origin, side sqrt(totalLoc * areaPerLine) * slack,
/// never smaller than 2 * minFootprintSide.
Rect compute_baseplate(long long totalLoc, const LayoutConfig& cfg);

struct District {
  Rect rect;  // the slot allotted by the parent's treemap
  int level = 0;
  double baseY = 0.0;  // platform bottom; top is baseY + platformThickness
  // Where the package's own classes are placed when it also has subpackages.
  std::optional<Rect> classArea;
};

struct Building {
  Rect rect;
  double height = 0.0;
  double baseY = 0.0;
  std::string packageFq;
  Rect cell;  // treemap slot; the footprint and its widened floors stay inside
};

struct FloorSlab {
  Rect rect;
  double y0 = 0.0;  // relative to the building base
  double y1 = 0.0;
  bool synthetic = false;  // no line info; parked on the roof
};

struct CityLayout {
  Rect baseplate;
  std::map<std::string, District> districts;
  std::map<std::string, Building> buildings;
  std::map<MethodId, FloorSlab> floors;
  std::vector<std::string> warnings;
};

FloorSlab floor_geometry(const MethodRecord& method, const ClassRecord& cls, const Building& building,
                         const LayoutConfig& cfg);

CityLayout layout_city(const CityModel& model, const LayoutConfig& cfg);

}  // namespace vulncity
