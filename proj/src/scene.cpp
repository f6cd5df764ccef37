#include "vulncity/scene.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

namespace vulncity {

ColorRGBA severity_color(Severity s) {
  switch (s) {
    case Severity::High: return {1.0, 0.0, 0.0, 1.0};
    case Severity::Medium: return {1.0, 0.5, 0.0, 1.0};
    case Severity::Low: return {0.0, 0.8, 0.0, 1.0};
    case Severity::Info: return {0.0, 0.4, 1.0, 1.0};
  }
  return palette::kBuilding;
}

ColorRGBA arc_gradient(double t) {
  t = std::clamp(t, 0.0, 1.0);
  const auto& a = palette::kHighlight;
  const auto& b = palette::kArcCallee;
  return {a.r + (b.r - a.r) * t, a.g + (b.g - a.g) * t, a.b + (b.b - a.b) * t, a.a + (b.a - a.a) * t};
}

std::string_view to_string(NodeKind k) {
  switch (k) {
    case NodeKind::Platform: return "Platform";
    case NodeKind::Building: return "Building";
    case NodeKind::Floor: return "Floor";
    case NodeKind::Arc: return "Arc";
  }
  return "Building";
}

const SceneNode* SceneDocument::find_node(std::string_view id) const {
  auto it = std::lower_bound(nodes.begin(), nodes.end(), id,
                             [](const SceneNode& n, std::string_view key) { return n.id < key; });
  return it != nodes.end() && it->id == id ? &*it : nullptr;
}

std::string platform_node_id(std::string_view packageFq) { return "platform:" + std::string(packageFq); }
std::string building_node_id(std::string_view classFqn) { return "building:" + std::string(classFqn); }
std::string floor_node_id(const MethodId& m) { return "floor:" + m.str(); }
std::string highlight_node_id(const MethodId& m) { return "highlight:" + m.str(); }
std::string arc_node_id(const MethodId& caller, const MethodId& callee) {
  return "arc:" + caller.str() + "->" + callee.str();
}

// ---------------------------------------------------------------------------
// Arcs

double arc_apex_height(double heightA, double heightB, double horizontalDistance) {
  double top = std::max(heightA, heightB);
  return std::max(top + 0.35 * horizontalDistance, top + 2.0);
}

namespace {

constexpr double kSideBulgeMin = 1.0;
constexpr double kLoopRadius = 0.5;

std::vector<Vec3> overhead_arc(const ArcAnchor& from, const ArcAnchor& to) {
  Vec3 p0{from.floor.center_x(), from.floorY1, from.floor.center_z()};
  Vec3 p2{to.floor.center_x(), to.floorY1, to.floor.center_z()};
  double distance = std::hypot(p2.x - p0.x, p2.z - p0.z);
  double apex = arc_apex_height(from.roofY, to.roofY, distance);
  apex = std::max(apex, std::max(p0.y, p2.y) + 2.0);

  // Parabola in t through both endpoints whose maximum is exactly `apex`.
  double ra = std::sqrt(apex - p0.y);
  double rb = std::sqrt(apex - p2.y);
  double tPeak = ra / (ra + rb);
  double k = (ra + rb) * (ra + rb);

  std::vector<Vec3> pts;
  pts.reserve(kArcSamples);
  for (int i = 0; i < kArcSamples; ++i) {
    double t = static_cast<double>(i) / (kArcSamples - 1);
    double y = apex - k * (t - tPeak) * (t - tPeak);
    pts.push_back({p0.x + (p2.x - p0.x) * t, y, p0.z + (p2.z - p0.z) * t});
  }
  pts.front().y = p0.y;
  pts.back().y = p2.y;
  return pts;
}

// Point on the outward face of a floor slab, at the slab's vertical middle.
Vec3 side_anchor(const ArcAnchor& a) {
  return {a.floor.center_x() + a.outwardX * a.floor.width / 2.0, (a.floorY0 + a.floorY1) / 2.0,
          a.floor.center_z() + a.outwardZ * a.floor.depth / 2.0};
}

std::vector<Vec3> side_arc(const ArcAnchor& from, const ArcAnchor& to, bool selfLoop) {
  Vec3 s = side_anchor(from);
  Vec3 e = side_anchor(to);
  double nx = from.outwardX;
  double nz = from.outwardZ;
  double ux = -nz;  // along the face
  double uz = nx;
  double bulge = std::max(kSideBulgeMin, 0.5 * std::abs(e.y - s.y));

  std::vector<Vec3> pts;
  pts.reserve(kArcSamples);
  for (int i = 0; i < kArcSamples; ++i) {
    double t = static_cast<double>(i) / (kArcSamples - 1);
    double out = std::sin(std::numbers::pi * t);
    Vec3 p{s.x + (e.x - s.x) * t, s.y + (e.y - s.y) * t, s.z + (e.z - s.z) * t};
    if (selfLoop) {
      double sweep = kLoopRadius * std::sin(2.0 * std::numbers::pi * t);
      p.x += nx * kLoopRadius * 2.0 * out + ux * sweep;
      p.z += nz * kLoopRadius * 2.0 * out + uz * sweep;
      p.y += kLoopRadius * out;
    } else {
      p.x += nx * bulge * out;
      p.z += nz * bulge * out;
    }
    pts.push_back(p);
  }
  return pts;
}

}  // namespace

std::vector<Vec3> arc_geometry(const ArcAnchor& from, const ArcAnchor& to, bool sameClass) {
  if (!sameClass) return overhead_arc(from, to);
  bool selfLoop = from.floor == to.floor && from.floorY0 == to.floorY0 && from.floorY1 == to.floorY1;
  return side_arc(from, to, selfLoop);
}

// ---------------------------------------------------------------------------
// Composition

namespace {

ArcAnchor anchor_for(const CityModel& model, const CityLayout& layout, const MethodId& id) {
  const auto& loc = model.methods.at(id);
  const auto& building = layout.buildings.at(loc.cls->fqn);
  const auto& slab = layout.floors.at(id);
  const auto& district = layout.districts.at(building.packageFq);

  ArcAnchor a;
  a.building = building.rect;
  a.floor = slab.rect;
  a.floorY0 = building.baseY + slab.y0;
  a.floorY1 = building.baseY + slab.y1;
  a.roofY = building.baseY + building.height;

  const Rect& area = district.classArea ? *district.classArea : district.rect;
  double dx = building.rect.center_x() - area.center_x();
  double dz = building.rect.center_z() - area.center_z();
  if (std::abs(dz) > std::abs(dx)) {
    a.outwardX = 0.0;
    a.outwardZ = dz < 0.0 ? -1.0 : 1.0;
  } else {
    a.outwardX = dx < 0.0 ? -1.0 : 1.0;
    a.outwardZ = 0.0;
  }
  return a;
}

SceneNode floor_node(const CityModel& model, const CityLayout& layout, const MethodId& id) {
  const auto& loc = model.methods.at(id);
  const auto& building = layout.buildings.at(loc.cls->fqn);
  const auto& slab = layout.floors.at(id);
  SceneNode n;
  n.kind = NodeKind::Floor;
  n.box = {slab.rect, building.baseY + slab.y0, building.baseY + slab.y1};
  n.refs.cls = loc.cls->fqn;
  n.refs.method = id.str();
  n.synthetic = slab.synthetic;
  return n;
}

bool has_severity_floor(const CityModel& model, const MethodId& id) {
  const auto* a = model.annotation(id);
  return a != nullptr && a->severity.has_value();
}

}  // namespace

OverlayNodes build_overlay(const CityModel& model, const CityLayout& layout, const LayoutConfig& /*cfg*/,
                           const MethodId& method) {
  OverlayNodes out;
  std::set<MethodId> highlighted;
  auto highlight = [&](const MethodId& id) {
    if (has_severity_floor(model, id) || !highlighted.insert(id).second) return;
    SceneNode n = floor_node(model, layout, id);
    n.id = highlight_node_id(id);
    n.color = palette::kHighlight;
    n.highlight = true;
    n.visibleByDefault = false;
    out.highlightFloors.push_back(std::move(n));
  };

  for (const auto& e : model.edges) {
    if (e.caller != method && e.callee != method) continue;
    bool sameClass = model.methods.at(e.caller).cls == model.methods.at(e.callee).cls;
    SceneNode arc;
    arc.id = arc_node_id(e.caller, e.callee);
    arc.kind = NodeKind::Arc;
    arc.points = arc_geometry(anchor_for(model, layout, e.caller), anchor_for(model, layout, e.callee), sameClass);
    arc.color = arc_gradient(0.0);
    arc.gradient = {{0.0, arc_gradient(0.0)}, {1.0, arc_gradient(1.0)}};
    arc.refs.caller = e.caller.str();
    arc.refs.callee = e.callee.str();
    arc.visibleByDefault = false;
    out.arcNodes.push_back(std::move(arc));
    highlight(e.caller);
    highlight(e.callee);
  }
  return out;
}

double quantize(double v) {
  if (v == 0.0 || !std::isfinite(v)) return 0.0;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  double q = std::strtod(buf, nullptr);
  return q == 0.0 ? 0.0 : q;
}

namespace {

void quantize_rect(Rect& r) {
  r.x = quantize(r.x);
  r.z = quantize(r.z);
  r.width = quantize(r.width);
  r.depth = quantize(r.depth);
}

void quantize_color(ColorRGBA& c) {
  c.r = quantize(c.r);
  c.g = quantize(c.g);
  c.b = quantize(c.b);
  c.a = quantize(c.a);
}

void quantize_node(SceneNode& n) {
  quantize_rect(n.box.rect);
  n.box.y0 = quantize(n.box.y0);
  n.box.y1 = quantize(n.box.y1);
  for (auto& p : n.points) p = {quantize(p.x), quantize(p.y), quantize(p.z)};
  quantize_color(n.color);
  for (auto& s : n.gradient) {
    s.t = quantize(s.t);
    quantize_color(s.color);
  }
}

std::vector<LegendEntry> make_legend() {
  return {
      {"High priority vulnerability", severity_color(Severity::High)},
      {"Medium priority vulnerability", severity_color(Severity::Medium)},
      {"Low priority vulnerability", severity_color(Severity::Low)},
      {"Info / experimental finding", severity_color(Severity::Info)},
      {"Connected method (call graph)", palette::kHighlight},
      {"Call edge, caller end", arc_gradient(0.0)},
      {"Call edge, callee end", arc_gradient(1.0)},
      {"Application package", palette::kApplicationPlatform},
      {"Dependency package", palette::kDependencyPlatform},
      {"Class", palette::kBuilding},
  };
}

std::vector<std::string> make_controls() {
  return {
      "Left-click: select a floor or building and open its info panel",
      "Mouse wheel: scroll the info panel",
      "Render Call Graph button: toggle incoming and outgoing call edges of the selected method",
      "G: switch between ground mode and fly mode",
      "Ground mode: click a street or platform to teleport there",
      "Fly mode: W/A/S/D to move, Q/E down/up, drag to look",
      "Teleport to user: jump next to another participant",
      "Guided review: follow another participant; press again to stop",
      "H: show or hide this help and the color legend",
  };
}

}  // namespace

SceneDocument compose_scene(const CityModel& model, const CityLayout& layout, const LayoutConfig& cfg,
                            const ComposeOptions& options) {
  SceneDocument scene;
  scene.metadata.toolVersions = options.toolVersions;
  scene.metadata.layout = cfg;
  scene.metadata.baseplate = layout.baseplate;
  scene.metadata.arcSamples = kArcSamples;
  scene.metadata.controls = make_controls();
  scene.metadata.generatedAt = options.generatedAt;
  scene.metadata.warnings = model.warnings;
  scene.metadata.warnings.insert(scene.metadata.warnings.end(), layout.warnings.begin(), layout.warnings.end());

  std::map<std::string, SceneNode> nodes;

  for (const auto& [fq, district] : layout.districts) {
    SceneNode n;
    n.id = platform_node_id(fq);
    n.kind = NodeKind::Platform;
    n.box = {district.rect, district.baseY, district.baseY + cfg.platformThickness};
    n.color = model.ownership.at(fq) == Ownership::Application ? palette::kApplicationPlatform
                                                               : palette::kDependencyPlatform;
    n.refs.package = fq;
    nodes.emplace(n.id, std::move(n));
  }

  for (const auto& [fqn, building] : layout.buildings) {
    SceneNode n;
    n.id = building_node_id(fqn);
    n.kind = NodeKind::Building;
    n.box = {building.rect, building.baseY, building.baseY + building.height};
    n.color = palette::kBuilding;
    n.refs.package = building.packageFq;
    n.refs.cls = fqn;
    nodes.emplace(n.id, std::move(n));
  }

  std::set<MethodId> panelMethods;
  for (const auto& [id, annotation] : model.annotations) {
    if (!annotation.severity) continue;
    SceneNode n = floor_node(model, layout, id);
    n.id = floor_node_id(id);
    n.color = severity_color(*annotation.severity);
    n.severity = annotation.severity;
    nodes.emplace(n.id, std::move(n));
    panelMethods.insert(id);
  }

  // Overlays exist for methods with a severity floor: with zero findings the
  // scene has no overlays. Arcs and highlight floors are shared by id.
  for (const auto& [id, annotation] : model.annotations) {
    if (!annotation.severity) continue;
    auto overlay = build_overlay(model, layout, cfg, id);
    Overlay index;
    for (auto& arc : overlay.arcNodes) {
      index.arcNodeIds.push_back(arc.id);
      nodes.try_emplace(arc.id, std::move(arc));
    }
    for (auto& hl : overlay.highlightFloors) {
      index.highlightFloorNodeIds.push_back(hl.id);
      panelMethods.insert(MethodId(hl.refs.method));
      nodes.try_emplace(hl.id, std::move(hl));
    }
    scene.overlays.emplace(id, std::move(index));
  }

  for (const auto& id : panelMethods) {
    const auto& loc = model.methods.at(id);
    PanelContent panel;
    panel.methodId = id;
    panel.title = loc.method->name;
    panel.className = loc.cls->fqn;
    panel.loc = loc.method->loc;
    if (const auto* a = model.annotation(id)) {
      for (const auto& f : a->findings) {
        panel.entries.push_back({f.bugType, severity_of(f), f.shortMessage, f.details});
      }
    }
    scene.panels.emplace(id, std::move(panel));
  }

  scene.legend = make_legend();
  quantize_rect(scene.metadata.baseplate);
  for (auto& entry : scene.legend) quantize_color(entry.color);
  scene.nodes.reserve(nodes.size());
  for (auto& [id, n] : nodes) {
    quantize_node(n);
    scene.nodes.push_back(std::move(n));
  }
  return scene;
}

}  // namespace vulncity
