#pragma once

#include "vulncity/city_model.hpp"
#include "vulncity/layout.hpp"

#include <json.hpp>

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace vulncity {

struct ColorRGBA {
  double r = 0.0;
  double g = 0.0;
  double b = 0.0;
  double a = 1.0;

  bool operator==(const ColorRGBA&) const = default;
};

namespace palette {
inline constexpr ColorRGBA kBuilding{0.6, 0.6, 0.6, 1.0};
inline constexpr ColorRGBA kApplicationPlatform{1.0, 0.0, 1.0, 1.0};  // magenta
inline constexpr ColorRGBA kDependencyPlatform{0.35, 0.35, 0.35, 1.0};
inline constexpr ColorRGBA kHighlight{0.0, 0.4, 1.0, 1.0};  // same blue as Info
inline constexpr ColorRGBA kArcCallee{1.0, 1.0, 1.0, 1.0};
}  // namespace palette

ColorRGBA severity_color(Severity s);

/// Caller end (t = 0) is blue, callee end (t = 1) white; linear in between.
ColorRGBA arc_gradient(double t);

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  bool operator==(const Vec3&) const = default;
};

enum class NodeKind { Platform, Building, Floor, Arc };
std::string_view to_string(NodeKind k);

struct BoxGeometry {
  Rect rect;
  double y0 = 0.0;  // absolute world heights
  double y1 = 0.0;

  bool operator==(const BoxGeometry&) const = default;
};

struct GradientStop {
  double t = 0.0;
  ColorRGBA color;

  bool operator==(const GradientStop&) const = default;
};

struct NodeRefs {
  std::string package;
  std::string cls;
  std::string method;
  std::string caller;
  std::string callee;

  bool operator==(const NodeRefs&) const = default;
};

struct SceneNode {
  std::string id;
  NodeKind kind = NodeKind::Building;
  BoxGeometry box;            // Platform, Building, Floor
  std::vector<Vec3> points;   // Arc
  ColorRGBA color;
  std::vector<GradientStop> gradient;  // Arc
  NodeRefs refs;
  bool visibleByDefault = true;
  // Floors only: severity floor vs call-graph highlight floor.
  std::optional<Severity> severity;
  bool highlight = false;
  bool synthetic = false;

  bool operator==(const SceneNode&) const = default;
};

struct PanelEntry {
  std::string bugType;
  Severity severity = Severity::Low;
  std::string shortMessage;
  std::string details;

  bool operator==(const PanelEntry&) const = default;
};

struct PanelContent {
  MethodId methodId;
  std::string title;
  std::string className;
  int loc = 0;
  std::vector<PanelEntry> entries;  // report order

  bool operator==(const PanelContent&) const = default;
};

struct Overlay {
  std::vector<std::string> arcNodeIds;
  std::vector<std::string> highlightFloorNodeIds;

  bool operator==(const Overlay&) const = default;
};

struct LegendEntry {
  std::string label;
  ColorRGBA color;

  bool operator==(const LegendEntry&) const = default;
};

struct SceneMetadata {
  std::map<std::string, std::string> toolVersions;
  LayoutConfig layout;
  Rect baseplate;
  int arcSamples = 24;
  double arcLift = 0.35;
  double arcMinClearance = 2.0;
  std::vector<std::string> controls;
  std::vector<std::string> warnings;
  // Never part of the scene hash.
  std::optional<std::string> generatedAt;

  bool operator==(const SceneMetadata&) const = default;
};

struct SceneDocument {
  SceneMetadata metadata;
  std::vector<SceneNode> nodes;  // sorted by id
  std::map<MethodId, PanelContent> panels;
  std::map<MethodId, Overlay> overlays;
  std::vector<LegendEntry> legend;

  const SceneNode* find_node(std::string_view id) const;
  bool operator==(const SceneDocument&) const = default;
};

// Node id scheme.
std::string platform_node_id(std::string_view packageFq);
std::string building_node_id(std::string_view classFqn);
std::string floor_node_id(const MethodId& m);
std::string highlight_node_id(const MethodId& m);
std::string arc_node_id(const MethodId& caller, const MethodId& callee);

// --- arcs -----------------------------------------------------------------

inline constexpr int kArcSamples = 24;

/// Where an arc attaches to a method's floor, in absolute world coordinates.
struct ArcAnchor {
  Rect building;       // footprint
  Rect floor;          // widened slab footprint
  double floorY0 = 0.0;
  double floorY1 = 0.0;
  double roofY = 0.0;  // absolute top of the building
  // Unit ground-plane direction of the building's outward face (±x or ±z).
  double outwardX = 1.0;
  double outwardZ = 0.0;
};

/// Peak height of an overhead arc: max(hA, hB) + 0.35 * distance, at least 2 m above the taller end.
double arc_apex_height(double heightA, double heightB, double horizontalDistance);

/// 24 points from caller to callee. Overhead parabola between the floor tops for
/// different classes; for the same class a loop on the building's outward side face.
std::vector<Vec3> arc_geometry(const ArcAnchor& from, const ArcAnchor& to, bool sameClass);

// --- composition ------------------------------------------------------------

struct OverlayNodes {
  std::vector<SceneNode> arcNodes;
  std::vector<SceneNode> highlightFloors;
};

/// Arc nodes for every non-dangling edge touching `method` plus blue highlight
/// floors for connected methods that have no severity floor of their own.
OverlayNodes build_overlay(const CityModel& model, const CityLayout& layout, const LayoutConfig& cfg,
                           const MethodId& method);

struct ComposeOptions {
  std::map<std::string, std::string> toolVersions;
  std::optional<std::string> generatedAt;
};

SceneDocument compose_scene(const CityModel& model, const CityLayout& layout, const LayoutConfig& cfg,
                            const ComposeOptions& options = {});

// --- serialization ----------------------------------------------------------

/// Rounds to 6 significant digits (and folds -0 to 0), the precision of the scene file.
double quantize(double v);

nlohmann::json scene_to_json(const SceneDocument& scene);
/// Canonical text: sorted keys, 6 significant digits, 2-space indent, trailing newline.
std::string serialize_scene(const SceneDocument& scene);
/// Parses and validates a scene file. Throws ParseError / SchemaError.
SceneDocument parse_scene(std::string_view text);
/// SHA-256 (hex) over the canonical serialization without generatedAt.
std::string scene_hash(const SceneDocument& scene);

}  // namespace vulncity
