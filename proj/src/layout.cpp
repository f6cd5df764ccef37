#include "vulncity/layout.hpp"

#include "vulncity/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace vulncity {

Rect Rect::scaled_about_center(double factor) const {
  double w = width * factor;
  double d = depth * factor;
  return {center_x() - w / 2.0, center_z() - d / 2.0, w, d};
}

bool Rect::contains(const Rect& inner, double eps) const {
  return inner.x >= x - eps && inner.z >= z - eps && inner.max_x() <= max_x() + eps && inner.max_z() <= max_z() + eps;
}

bool Rect::interiors_overlap(const Rect& other, double eps) const {
  return x < other.max_x() - eps && other.x < max_x() - eps && z < other.max_z() - eps && other.z < max_z() - eps;
}

double LayoutConfig::street_width(int level) const {
  return std::max(streetWidthBase * std::pow(streetWidthDecay, level), streetWidthMin);
}

void LayoutConfig::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) throw InputError(std::string("layout: ") + name + " must be positive");
  };
  positive(areaPerLine, "areaPerLine");
  positive(heightPerLine, "heightPerLine");
  positive(streetWidthBase, "streetWidth");
  positive(streetWidthDecay, "streetWidthDecay");
  positive(streetWidthMin, "streetWidthMin");
  positive(buildingGap, "buildingGap");
  positive(platformThickness, "platformThickness");
  positive(minFootprintSide, "minFootprintSide");
  positive(baseplateSlack, "baseplateSlack");
  if (!(widenFactor > 1.0) || !std::isfinite(widenFactor)) throw InputError("layout: widenFactor must be > 1");
}

double worst_aspect(std::span<const double> rowAreas, double side) {
  double sum = 0.0;
  double largest = rowAreas.front();
  double smallest = rowAreas.front();
  for (double a : rowAreas) {
    sum += a;
    largest = std::max(largest, a);
    smallest = std::min(smallest, a);
  }
  double side2 = side * side;
  double sum2 = sum * sum;
  return std::max(side2 * largest / sum2, sum2 / (side2 * smallest));
}

namespace {

struct Item {
  std::string key;
  double area;
};

// Lays `row` along the shorter side of `free` and shrinks `free` by the strip.
// The final row takes whatever remains so the parent is tiled exactly.
TreemapRow place_row(const std::vector<Item>& row, Rect& free, bool lastRow, std::map<std::string, Rect>& out) {
  double sum = 0.0;
  for (const auto& it : row) sum += it.area;

  TreemapRow placed;
  bool alongDepth = free.width >= free.depth;  // strip is a column on the left
  double length = alongDepth ? free.depth : free.width;
  double extent = alongDepth ? free.width : free.depth;
  double thickness = lastRow ? extent : std::min(sum / length, extent);

  double cursor = alongDepth ? free.z : free.x;
  double end = cursor + length;
  for (std::size_t i = 0; i < row.size(); ++i) {
    double span = i + 1 == row.size() ? end - cursor : row[i].area / thickness;
    Rect r = alongDepth ? Rect{free.x, cursor, thickness, span} : Rect{cursor, free.z, span, thickness};
    out[row[i].key] = r;
    placed.keys.push_back(row[i].key);
    cursor += span;
  }

  if (alongDepth) {
    placed.strip = {free.x, free.z, thickness, free.depth};
    free = {free.x + thickness, free.z, free.width - thickness, free.depth};
  } else {
    placed.strip = {free.x, free.z, free.width, thickness};
    free = {free.x, free.z + thickness, free.width, free.depth - thickness};
  }
  return placed;
}

}  // namespace

Treemap squarify_rows(std::vector<WeightedKey> weights, const Rect& rect) {
  if (weights.empty()) throw InputError("squarify: no weights");
  if (!(rect.width > 0.0) || !(rect.depth > 0.0)) throw InputError("squarify: rectangle must have positive size");
  std::set<std::string> keys;
  double total = 0.0;
  for (const auto& w : weights) {
    if (!(w.weight > 0.0) || !std::isfinite(w.weight)) {
      throw InputError("squarify: weight for '" + w.key + "' must be positive");
    }
    if (!keys.insert(w.key).second) throw InputError("squarify: duplicate key '" + w.key + "'");
    total += w.weight;
  }
  std::sort(weights.begin(), weights.end(), [](const WeightedKey& a, const WeightedKey& b) {
    return a.weight != b.weight ? a.weight > b.weight : a.key < b.key;
  });

  double scale = rect.area() / total;
  Treemap result;
  Rect free = rect;
  std::vector<Item> row;
  std::vector<double> rowAreas;
  for (const auto& w : weights) {
    double area = w.weight * scale;
    if (!row.empty()) {
      double side = free.shorter_side();
      double current = worst_aspect(rowAreas, side);
      rowAreas.push_back(area);
      // Relative slack so that exact ties (common with integer weights) are not
      // decided by rounding noise.
      if (worst_aspect(rowAreas, side) <= current * (1.0 + 1e-12)) {
        row.push_back({w.key, area});
        continue;
      }
      result.rows.push_back(place_row(row, free, false, result.rects));
      row.clear();
      rowAreas.clear();
    }
    row.push_back({w.key, area});
    rowAreas.push_back(area);
  }
  result.rows.push_back(place_row(row, free, true, result.rects));
  return result;
}

std::map<std::string, Rect> squarify(std::vector<WeightedKey> weights, const Rect& rect) {
  return squarify_rows(std::move(weights), rect).rects;
}

Rect compute_baseplate(long long totalLoc, const LayoutConfig& cfg) {
  if (totalLoc < 1) throw InputError("baseplate: total lines of code must be >= 1");
  double side = std::sqrt(static_cast<double>(totalLoc) * cfg.areaPerLine) * cfg.baseplateSlack;
  side = std::max(side, 2.0 * cfg.minFootprintSide);
  return {-side / 2.0, -side / 2.0, side, side};
}

FloorSlab floor_geometry(const MethodRecord& method, const ClassRecord& cls, const Building& building,
                         const LayoutConfig& cfg) {
  FloorSlab slab;
  slab.rect = building.rect.scaled_about_center(cfg.widenFactor);
  if (!method.startLine || !method.endLine) {
    slab.synthetic = true;
    slab.y0 = building.height;
    slab.y1 = building.height + cfg.heightPerLine;
    return slab;
  }
  auto [minLine, maxLine] = cls.lineSpan;
  double lines = static_cast<double>(maxLine - minLine + 1);
  slab.y0 = building.height * static_cast<double>(*method.startLine - minLine) / lines;
  slab.y1 = building.height * static_cast<double>(*method.endLine + 1 - minLine) / lines;
  return slab;
}

namespace {

class CityLayouter {
 public:
  CityLayouter(const CityModel& model, const LayoutConfig& cfg) : model_(model), cfg_(cfg) {}

  CityLayout run() {
    out_.baseplate = compute_baseplate(model_.root->totalLoc, cfg_);
    place_packages(*model_.root, out_.baseplate, 0, 0.0, false);

    for (const auto& [id, annotation] : model_.annotations) {
      const auto& loc = model_.methods.at(id);
      const auto& building = out_.buildings.at(loc.cls->fqn);
      auto slab = floor_geometry(*loc.method, *loc.cls, building, cfg_);
      if (slab.synthetic) out_.warnings.push_back("layout: " + id.str() + " has no line info; floor placed on roof");
      out_.floors.emplace(id, slab);
    }
    return std::move(out_);
  }

 private:
  Rect safe_inset(const Rect& r, double d, const std::string& what) {
    double limit = r.shorter_side() / 4.0;
    if (d > limit) {
      out_.warnings.push_back("layout: " + what + " too small for inset " + std::to_string(d) + "; reduced to " +
                              std::to_string(limit));
      d = limit;
    }
    return r.inset(d);
  }

  // Squarifies `parent`'s subpackages (and, for a real package that also owns
  // classes, a slot for those classes) into `area` inset by the street width.
  void place_packages(const PackageNode& parent, const Rect& area, int level, double baseY, bool parentIsPackage) {
    std::vector<WeightedKey> items;
    long long ownLoc = 0;
    for (const auto& c : parent.classes) ownLoc += c.loc;
    for (const auto& sub : parent.subpackages) {
      if (sub.totalLoc > 0) {
        items.push_back({sub.fqName, static_cast<double>(sub.totalLoc)});
      } else {
        out_.warnings.push_back("layout: package " + sub.fqName + " has no classes; not drawn");
      }
    }
    bool courtyard = parentIsPackage && ownLoc > 0;
    if (courtyard) items.push_back({parent.fqName, static_cast<double>(ownLoc)});

    Rect inner = safe_inset(area, cfg_.street_width(level), parentIsPackage ? "district " + parent.fqName : "baseplate");
    auto rects = squarify(std::move(items), inner);

    if (courtyard) {
      const Rect& slot = rects.at(parent.fqName);
      out_.districts.at(parent.fqName).classArea = slot;
      place_classes(parent, slot, baseY);
    }
    for (const auto& sub : parent.subpackages) {
      if (sub.totalLoc == 0) continue;
      District d{rects.at(sub.fqName), level, baseY, std::nullopt};
      out_.districts.emplace(sub.fqName, d);
      double top = baseY + cfg_.platformThickness;
      if (!sub.subpackages.empty()) {
        place_packages(sub, d.rect, level + 1, top, true);
      } else if (!sub.classes.empty()) {
        place_classes(sub, d.rect, top);
      }
    }
  }

  void place_classes(const PackageNode& pkg, const Rect& area, double baseY) {
    std::vector<WeightedKey> items;
    for (const auto& c : pkg.classes) items.push_back({c.fqn, static_cast<double>(c.loc)});
    Rect inner = safe_inset(area, cfg_.buildingGap / 2.0, "class area of " + pkg.fqName);
    auto cells = squarify(std::move(items), inner);

    for (const auto& c : pkg.classes) {
      const Rect& cell = cells.at(c.fqn);
      Rect footprint = footprint_in(cell, c.fqn);
      clamp_footprint(footprint, cell, c.fqn);
      out_.buildings.emplace(c.fqn, Building{footprint, c.loc * cfg_.heightPerLine, baseY, pkg.fqName, cell});
    }
  }

  // Half the gap on each side, more on an axis where the widened floor slab
  // would otherwise reach past the cell into a neighbour.
  Rect footprint_in(const Rect& cell, const std::string& fqn) {
    double f = cfg_.widenFactor;
    double dx = std::max(cfg_.buildingGap / 2.0, (f - 1.0) * cell.width / (2.0 * f));
    double dz = std::max(cfg_.buildingGap / 2.0, (f - 1.0) * cell.depth / (2.0 * f));
    double limitX = cell.width / 4.0;
    double limitZ = cell.depth / 4.0;
    if (dx > limitX || dz > limitZ) {
      out_.warnings.push_back("layout: building " + fqn + " too small for its gap; inset reduced");
      dx = std::min(dx, limitX);
      dz = std::min(dz, limitZ);
    }
    return {cell.x + dx, cell.z + dz, cell.width - 2.0 * dx, cell.depth - 2.0 * dz};
  }

  // Grows a sliver footprint up to minFootprintSide, staying inside its cell.
  void clamp_footprint(Rect& footprint, const Rect& cell, const std::string& fqn) {
    bool clamped = false;
    if (footprint.width < cfg_.minFootprintSide) {
      double w = std::min(cfg_.minFootprintSide, cell.width);
      footprint.x = cell.center_x() - w / 2.0;
      footprint.width = w;
      clamped = true;
    }
    if (footprint.depth < cfg_.minFootprintSide) {
      double d = std::min(cfg_.minFootprintSide, cell.depth);
      footprint.z = cell.center_z() - d / 2.0;
      footprint.depth = d;
      clamped = true;
    }
    if (clamped) out_.warnings.push_back("layout: footprint of " + fqn + " clamped to minimum side");
  }

  const CityModel& model_;
  const LayoutConfig& cfg_;
  CityLayout out_;
};

}  // namespace

CityLayout layout_city(const CityModel& model, const LayoutConfig& cfg) {
  cfg.validate();
  return CityLayouter(model, cfg).run();
}

}  // namespace vulncity
