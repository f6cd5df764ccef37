#include "vulncity/errors.hpp"
#include "vulncity/scene.hpp"

#include <openssl/evp.h>

#include <set>

namespace vulncity {

using nlohmann::json;

namespace {

constexpr const char* kFormat = "vulncity-scene/1";

json color_json(const ColorRGBA& c) { return json::array({quantize(c.r), quantize(c.g), quantize(c.b), quantize(c.a)}); }

json rect_json(const Rect& r) {
  return {{"x", quantize(r.x)}, {"z", quantize(r.z)}, {"width", quantize(r.width)}, {"depth", quantize(r.depth)}};
}

json layout_json(const LayoutConfig& c) {
  return {{"areaPerLine", c.areaPerLine},
          {"heightPerLine", c.heightPerLine},
          {"streetWidth", c.streetWidthBase},
          {"streetWidthDecay", c.streetWidthDecay},
          {"streetWidthMin", c.streetWidthMin},
          {"buildingGap", c.buildingGap},
          {"widenFactor", c.widenFactor},
          {"platformThickness", c.platformThickness},
          {"minFootprintSide", c.minFootprintSide},
          {"baseplateSlack", c.baseplateSlack}};
}

json node_json(const SceneNode& n) {
  json j;
  j["id"] = n.id;
  j["kind"] = std::string(to_string(n.kind));
  j["color"] = color_json(n.color);
  j["visibleByDefault"] = n.visibleByDefault;
  if (n.kind == NodeKind::Arc) {
    json pts = json::array();
    for (const auto& p : n.points) pts.push_back(json::array({quantize(p.x), quantize(p.y), quantize(p.z)}));
    j["points"] = std::move(pts);
    json stops = json::array();
    for (const auto& s : n.gradient) stops.push_back({{"t", quantize(s.t)}, {"color", color_json(s.color)}});
    j["gradient"] = std::move(stops);
  } else {
    json box = rect_json(n.box.rect);
    box["y0"] = quantize(n.box.y0);
    box["y1"] = quantize(n.box.y1);
    j["box"] = std::move(box);
  }
  json refs = json::object();
  auto put = [&](const char* key, const std::string& v) {
    if (!v.empty()) refs[key] = v;
  };
  put("package", n.refs.package);
  put("class", n.refs.cls);
  put("method", n.refs.method);
  put("caller", n.refs.caller);
  put("callee", n.refs.callee);
  j["refs"] = std::move(refs);
  if (n.kind == NodeKind::Floor) {
    if (n.severity) j["severity"] = std::string(to_string(*n.severity));
    j["highlight"] = n.highlight;
    j["synthetic"] = n.synthetic;
  }
  return j;
}

}  // namespace

json scene_to_json(const SceneDocument& scene) {
  const auto& m = scene.metadata;
  json meta;
  meta["format"] = kFormat;
  meta["toolVersions"] = m.toolVersions;
  meta["layout"] = layout_json(m.layout);
  meta["baseplate"] = rect_json(m.baseplate);
  meta["arc"] = {{"samples", m.arcSamples}, {"lift", m.arcLift}, {"minClearance", m.arcMinClearance}};
  meta["controls"] = m.controls;
  meta["warnings"] = m.warnings;
  if (m.generatedAt) meta["generatedAt"] = *m.generatedAt;

  json nodes = json::array();
  for (const auto& n : scene.nodes) nodes.push_back(node_json(n));

  json panels = json::object();
  for (const auto& [id, p] : scene.panels) {
    json entries = json::array();
    for (const auto& e : p.entries) {
      entries.push_back({{"bugType", e.bugType},
                         {"severity", std::string(to_string(e.severity))},
                         {"shortMessage", e.shortMessage},
                         {"details", e.details}});
    }
    panels[id.str()] = {{"methodId", id.str()},
                        {"title", p.title},
                        {"class", p.className},
                        {"loc", p.loc},
                        {"entries", std::move(entries)}};
  }

  json overlays = json::object();
  for (const auto& [id, o] : scene.overlays) {
    overlays[id.str()] = {{"arcNodeIds", o.arcNodeIds}, {"highlightFloorNodeIds", o.highlightFloorNodeIds}};
  }

  json legend = json::array();
  for (const auto& e : scene.legend) legend.push_back({{"label", e.label}, {"color", color_json(e.color)}});

  return {{"metadata", std::move(meta)},
          {"nodes", std::move(nodes)},
          {"panels", std::move(panels)},
          {"overlays", std::move(overlays)},
          {"legend", std::move(legend)}};
}

std::string serialize_scene(const SceneDocument& scene) { return scene_to_json(scene).dump(2) + "\n"; }

// ---------------------------------------------------------------------------
// Parsing

namespace {

class SceneReader {
 public:
  SceneDocument read(const json& doc) {
    if (!doc.is_object()) throw SchemaError("$", "scene must be a JSON object");
    for (const char* key : {"metadata", "nodes", "panels", "overlays", "legend"}) {
      if (!doc.contains(key)) throw SchemaError(std::string("$.") + key, "missing required key");
    }
    SceneDocument scene;
    metadata(doc["metadata"], scene.metadata);

    const auto& nodes = array(doc["nodes"], "$.nodes");
    std::set<std::string> ids;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      std::string path = "$.nodes[" + std::to_string(i) + "]";
      scene.nodes.push_back(node(nodes[i], path));
      const auto& id = scene.nodes.back().id;
      if (!ids.insert(id).second) throw SchemaError(path + ".id", "duplicate node id '" + id + "'");
      if (i > 0 && !(scene.nodes[i - 1].id < id)) throw SchemaError(path + ".id", "nodes are not sorted by id");
    }

    const auto& panels = object(doc["panels"], "$.panels");
    for (const auto& [key, p] : panels.items()) {
      std::string path = "$.panels[\"" + key + "\"]";
      object(p, path);
      PanelContent panel;
      panel.methodId = MethodId(key);
      panel.title = str(p, path, "title");
      panel.className = str(p, path, "class");
      panel.loc = integer(p, path, "loc");
      const auto& entries = array(field(p, path, "entries"), path + ".entries");
      for (std::size_t i = 0; i < entries.size(); ++i) {
        std::string ep = path + ".entries[" + std::to_string(i) + "]";
        PanelEntry e;
        e.bugType = str(entries[i], ep, "bugType");
        e.severity = severity(field(entries[i], ep, "severity"), ep + ".severity");
        e.shortMessage = str(entries[i], ep, "shortMessage");
        e.details = str(entries[i], ep, "details");
        panel.entries.push_back(std::move(e));
      }
      scene.panels.emplace(panel.methodId, std::move(panel));
    }

    const auto& overlays = object(doc["overlays"], "$.overlays");
    for (const auto& [key, o] : overlays.items()) {
      std::string path = "$.overlays[\"" + key + "\"]";
      Overlay overlay;
      overlay.arcNodeIds = strings(field(o, path, "arcNodeIds"), path + ".arcNodeIds");
      overlay.highlightFloorNodeIds = strings(field(o, path, "highlightFloorNodeIds"), path + ".highlightFloorNodeIds");
      for (const auto* list : {&overlay.arcNodeIds, &overlay.highlightFloorNodeIds}) {
        for (const auto& id : *list) {
          if (!ids.contains(id)) throw SchemaError(path, "references unknown node '" + id + "'");
        }
      }
      scene.overlays.emplace(MethodId(key), std::move(overlay));
    }

    const auto& legend = array(doc["legend"], "$.legend");
    for (std::size_t i = 0; i < legend.size(); ++i) {
      std::string path = "$.legend[" + std::to_string(i) + "]";
      scene.legend.push_back({str(legend[i], path, "label"), color(field(legend[i], path, "color"), path + ".color")});
    }
    return scene;
  }

 private:
  static const json& field(const json& obj, const std::string& path, const char* key) {
    if (!obj.is_object() || !obj.contains(key)) throw SchemaError(path + "." + key, "missing required key");
    return obj[key];
  }
  static const json& array(const json& v, const std::string& path) {
    if (!v.is_array()) throw SchemaError(path, "must be an array");
    return v;
  }
  static const json& object(const json& v, const std::string& path) {
    if (!v.is_object()) throw SchemaError(path, "must be an object");
    return v;
  }
  static std::string str(const json& obj, const std::string& path, const char* key) {
    const auto& v = field(obj, path, key);
    if (!v.is_string()) throw SchemaError(path + "." + key, "must be a string");
    return v.get<std::string>();
  }
  static double number(const json& v, const std::string& path) {
    if (!v.is_number()) throw SchemaError(path, "must be a number");
    return v.get<double>();
  }
  static double num(const json& obj, const std::string& path, const char* key) {
    return number(field(obj, path, key), path + "." + key);
  }
  static int integer(const json& obj, const std::string& path, const char* key) {
    const auto& v = field(obj, path, key);
    if (!v.is_number_integer()) throw SchemaError(path + "." + key, "must be an integer");
    return v.get<int>();
  }
  static std::vector<std::string> strings(const json& v, const std::string& path) {
    array(v, path);
    std::vector<std::string> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_string()) throw SchemaError(path + "[" + std::to_string(i) + "]", "must be a string");
      out.push_back(v[i].get<std::string>());
    }
    return out;
  }
  static ColorRGBA color(const json& v, const std::string& path) {
    if (!v.is_array() || v.size() != 4) throw SchemaError(path, "color must be [r, g, b, a]");
    ColorRGBA c{number(v[0], path), number(v[1], path), number(v[2], path), number(v[3], path)};
    for (double x : {c.r, c.g, c.b, c.a}) {
      if (x < 0.0 || x > 1.0) throw SchemaError(path, "color component outside [0, 1]");
    }
    return c;
  }
  static Rect rect(const json& v, const std::string& path) {
    return {num(v, path, "x"), num(v, path, "z"), num(v, path, "width"), num(v, path, "depth")};
  }
  static Severity severity(const json& v, const std::string& path) {
    auto s = v.is_string() ? severity_from_string(v.get<std::string>()) : std::nullopt;
    if (!s) throw SchemaError(path, "must be one of High, Medium, Low, Info");
    return *s;
  }

  static void metadata(const json& m, SceneMetadata& out) {
    const std::string path = "$.metadata";
    object(m, path);
    if (str(m, path, "format") != kFormat) throw SchemaError(path + ".format", std::string("expected ") + kFormat);
    const auto& versions = object(field(m, path, "toolVersions"), path + ".toolVersions");
    for (const auto& [k, v] : versions.items()) {
      if (!v.is_string()) throw SchemaError(path + ".toolVersions." + k, "must be a string");
      out.toolVersions[k] = v.get<std::string>();
    }
    const auto& l = field(m, path, "layout");
    const std::string lp = path + ".layout";
    out.layout.areaPerLine = num(l, lp, "areaPerLine");
    out.layout.heightPerLine = num(l, lp, "heightPerLine");
    out.layout.streetWidthBase = num(l, lp, "streetWidth");
    out.layout.streetWidthDecay = num(l, lp, "streetWidthDecay");
    out.layout.streetWidthMin = num(l, lp, "streetWidthMin");
    out.layout.buildingGap = num(l, lp, "buildingGap");
    out.layout.widenFactor = num(l, lp, "widenFactor");
    out.layout.platformThickness = num(l, lp, "platformThickness");
    out.layout.minFootprintSide = num(l, lp, "minFootprintSide");
    out.layout.baseplateSlack = num(l, lp, "baseplateSlack");
    out.baseplate = rect(field(m, path, "baseplate"), path + ".baseplate");
    const auto& arc = field(m, path, "arc");
    out.arcSamples = integer(arc, path + ".arc", "samples");
    out.arcLift = num(arc, path + ".arc", "lift");
    out.arcMinClearance = num(arc, path + ".arc", "minClearance");
    out.controls = strings(field(m, path, "controls"), path + ".controls");
    out.warnings = strings(field(m, path, "warnings"), path + ".warnings");
    if (m.contains("generatedAt")) out.generatedAt = str(m, path, "generatedAt");
  }

  static SceneNode node(const json& j, const std::string& path) {
    object(j, path);
    SceneNode n;
    n.id = str(j, path, "id");
    if (n.id.empty()) throw SchemaError(path + ".id", "must not be empty");
    std::string kind = str(j, path, "kind");
    if (kind == "Platform") n.kind = NodeKind::Platform;
    else if (kind == "Building") n.kind = NodeKind::Building;
    else if (kind == "Floor") n.kind = NodeKind::Floor;
    else if (kind == "Arc") n.kind = NodeKind::Arc;
    else throw SchemaError(path + ".kind", "unknown node kind '" + kind + "'");
    n.color = color(field(j, path, "color"), path + ".color");
    const auto& visible = field(j, path, "visibleByDefault");
    if (!visible.is_boolean()) throw SchemaError(path + ".visibleByDefault", "must be a boolean");
    n.visibleByDefault = visible.get<bool>();

    if (n.kind == NodeKind::Arc) {
      const auto& pts = array(field(j, path, "points"), path + ".points");
      for (std::size_t i = 0; i < pts.size(); ++i) {
        std::string pp = path + ".points[" + std::to_string(i) + "]";
        if (!pts[i].is_array() || pts[i].size() != 3) throw SchemaError(pp, "point must be [x, y, z]");
        n.points.push_back({number(pts[i][0], pp), number(pts[i][1], pp), number(pts[i][2], pp)});
      }
      const auto& stops = array(field(j, path, "gradient"), path + ".gradient");
      for (std::size_t i = 0; i < stops.size(); ++i) {
        std::string sp = path + ".gradient[" + std::to_string(i) + "]";
        n.gradient.push_back({num(stops[i], sp, "t"), color(field(stops[i], sp, "color"), sp + ".color")});
      }
    } else {
      const auto& box = field(j, path, "box");
      n.box = {rect(box, path + ".box"), num(box, path + ".box", "y0"), num(box, path + ".box", "y1")};
    }

    const auto& refs = object(field(j, path, "refs"), path + ".refs");
    auto ref = [&](const char* key) {
      if (!refs.contains(key)) return std::string();
      if (!refs[key].is_string()) throw SchemaError(path + ".refs." + key, "must be a string");
      return refs[key].get<std::string>();
    };
    n.refs = {ref("package"), ref("class"), ref("method"), ref("caller"), ref("callee")};

    if (n.kind == NodeKind::Floor) {
      if (j.contains("severity")) n.severity = severity(j["severity"], path + ".severity");
      n.highlight = j.value("highlight", false);
      n.synthetic = j.value("synthetic", false);
    }
    return n;
  }
};

}  // namespace

SceneDocument parse_scene(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    int line = 1;
    int column = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        column = 1;
      } else {
        ++column;
      }
    }
    throw ParseError("malformed scene JSON", line, column);
  }
  try {
    return SceneReader{}.read(doc);
  } catch (const json::exception& e) {
    throw SchemaError("$", e.what());
  }
}

std::string scene_hash(const SceneDocument& scene) {
  SceneDocument copy = scene;
  copy.metadata.generatedAt.reset();
  std::string text = serialize_scene(copy);

  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  EVP_Digest(text.data(), text.size(), digest, &length, EVP_sha256(), nullptr);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string hex;
  hex.reserve(length * 2);
  for (unsigned int i = 0; i < length; ++i) {
    hex += kHex[digest[i] >> 4];
    hex += kHex[digest[i] & 0xF];
  }
  return hex;
}

}  // namespace vulncity
