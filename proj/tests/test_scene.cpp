#include <doctest.h>

#include "testkit.hpp"
#include "vulncity/errors.hpp"
#include "vulncity/scene.hpp"

#include <algorithm>
#include <cmath>
#include <set>

using namespace vulncity;
using doctest::Approx;

namespace {

struct Built {
  CityModel model;
  CityLayout layout;
  LayoutConfig cfg;
  SceneDocument scene;
};

Built build(const std::string& dir) {
  Built b;
  b.model = build_city_model(parse_sast_report(testkit::slurp(testkit::fixture(dir + "/report.xml"))),
                             parse_code_model(testkit::slurp(testkit::fixture(dir + "/model.json"))));
  b.layout = layout_city(b.model, b.cfg);
  b.scene = compose_scene(b.model, b.layout, b.cfg, {{{"SpotBugs", "4.8.3"}}, std::nullopt});
  return b;
}

std::size_t count(const SceneDocument& s, NodeKind kind, bool highlight = false) {
  return std::count_if(s.nodes.begin(), s.nodes.end(),
                       [&](const SceneNode& n) { return n.kind == kind && n.highlight == highlight; });
}

bool inside(const Rect& r, double x, double z) { return x > r.x && x < r.max_x() && z > r.z && z < r.max_z(); }

// Independent apex check: the quadratic a t^2 + b t + c through (0, y0) and
// (1, y1) whose maximum equals h, found by bisection on a < 0.
double quadratic_at(double y0, double y1, double h, double t) {
  auto peak = [&](double a) {
    double b = y1 - y0 - a;
    return y0 - b * b / (4.0 * a);
  };
  // The vertex lies in [0, 1] for a <= -|y1 - y0|; on that branch the peak
  // falls monotonically as a rises toward the bound.
  double lo = -1e6;
  double hi = -std::max(std::abs(y1 - y0), 1e-9);
  for (int i = 0; i < 200; ++i) {
    double mid = (lo + hi) / 2.0;
    (peak(mid) > h ? lo : hi) = mid;
  }
  double a = (lo + hi) / 2.0;
  double b = y1 - y0 - a;
  return a * t * t + b * t + y0;
}

ArcAnchor anchor(double cx, double cz, double roof, double y0, double y1, double ox = 1, double oz = 0) {
  ArcAnchor a;
  a.building = {cx - 1, cz - 1, 2, 2};
  a.floor = a.building.scaled_about_center(1.08);
  a.floorY0 = y0;
  a.floorY1 = y1;
  a.roofY = roof;
  a.outwardX = ox;
  a.outwardZ = oz;
  return a;
}

}  // namespace

TEST_CASE("severity colors") {
  CHECK(severity_color(Severity::High) == ColorRGBA{1, 0, 0, 1});
  CHECK(severity_color(Severity::Medium) == ColorRGBA{1, 0.5, 0, 1});
  CHECK(severity_color(Severity::Low) == ColorRGBA{0, 0.8, 0, 1});
  CHECK(severity_color(Severity::Info) == ColorRGBA{0, 0.4, 1, 1});
  CHECK(palette::kHighlight == severity_color(Severity::Info));
}

TEST_CASE("arc gradient runs from blue to white") {
  CHECK(arc_gradient(0.0) == ColorRGBA{0, 0.4, 1, 1});
  CHECK(arc_gradient(1.0) == ColorRGBA{1, 1, 1, 1});
  auto mid = arc_gradient(0.5);
  CHECK(mid.r == Approx(0.5));
  CHECK(mid.g == Approx(0.7));
  CHECK(mid.b == Approx(1.0));
  CHECK(mid.a == Approx(1.0));
}

TEST_CASE("arc apex height") {
  CHECK(arc_apex_height(3, 5, 10) == Approx(8.5));
  CHECK(arc_apex_height(3, 5, 1) == Approx(7.0));  // clearance clamp
  CHECK(arc_apex_height(5, 3, 0) == Approx(7.0));
}

TEST_CASE("overhead arc: endpoints, apex and shape") {
  auto from = anchor(0, 0, 3, 1, 2);
  auto to = anchor(10, 0, 5, 3, 4);
  auto pts = arc_geometry(from, to, false);
  REQUIRE(pts.size() == 24);
  CHECK(pts.front() == Vec3{0, 2, 0});
  CHECK(pts.back() == Vec3{10, 4, 0});
  double top = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    double t = static_cast<double>(i) / 23.0;
    CHECK(pts[i].x == Approx(10.0 * t));
    CHECK(pts[i].y == Approx(quadratic_at(2, 4, 8.5, t)).epsilon(1e-6));
    CHECK(pts[i].y >= 0.0);
    top = std::max(top, pts[i].y);
  }
  CHECK(top <= 8.5 + 1e-12);
  CHECK(top > 8.4);
  CHECK(top > std::max(from.roofY, to.roofY));
}

TEST_CASE("same-class arc stays on the outward side of the building") {
  auto a = anchor(0, 0, 6, 1, 2, 0, -1);
  auto b = anchor(0, 0, 6, 4, 5, 0, -1);
  auto pts = arc_geometry(a, b, true);
  REQUIRE(pts.size() == 24);
  for (const auto& p : pts) {
    CHECK_FALSE(inside(a.building, p.x, p.z));
    CHECK(p.z <= a.floor.z + 1e-12);
  }
  CHECK(pts.front().y == Approx(1.5));
  CHECK(pts.back().y == Approx(4.5));
}

TEST_CASE("self recursion draws a small loop on one face") {
  auto a = anchor(3, 3, 6, 1, 2, 1, 0);
  auto pts = arc_geometry(a, a, true);
  REQUIRE(pts.size() == 24);
  CHECK(pts.front() == pts.back());
  double reach = 0.0;
  for (const auto& p : pts) {
    CHECK_FALSE(inside(a.building, p.x, p.z));
    reach = std::max(reach, p.x - a.floor.max_x());
  }
  CHECK(reach > 0.5);
  CHECK(reach < 2.0);
}

TEST_CASE("small fixture: node inventory") {
  auto b = build("small");
  const auto& s = b.scene;
  // 2 packages, 3 classes, 2 vulnerable methods; non-dangling edges main->run,
  // run->query, query->hash; overlays of query and hash need arcs run->query and
  // query->hash and a highlight floor for run (hash already has a severity floor).
  CHECK(count(s, NodeKind::Platform) == 2);
  CHECK(count(s, NodeKind::Building) == 3);
  CHECK(count(s, NodeKind::Floor) == 2);
  CHECK(count(s, NodeKind::Arc) == 2);
  CHECK(count(s, NodeKind::Floor, true) == 1);
  CHECK(s.nodes.size() == 10);

  CHECK(s.find_node("platform:app")->color == palette::kApplicationPlatform);
  CHECK(s.find_node("platform:lib")->color == palette::kDependencyPlatform);
  CHECK(s.find_node("building:app.Db")->color == palette::kBuilding);

  auto query = method_id("app.Db", "query", "(Ljava/lang/String;)Ljava/sql/ResultSet;");
  auto hash = method_id("lib.Util", "hash", "(Ljava/lang/String;)I");
  auto run = method_id("app.Main", "run", "()V");
  const auto* qf = s.find_node(floor_node_id(query));
  REQUIRE(qf != nullptr);
  CHECK(qf->color == severity_color(Severity::High));
  CHECK(qf->visibleByDefault);
  CHECK(s.find_node(floor_node_id(hash))->color == severity_color(Severity::Medium));

  REQUIRE(s.overlays.size() == 2);
  const auto& oq = s.overlays.at(query);
  CHECK(oq.arcNodeIds == std::vector<std::string>{arc_node_id(run, query), arc_node_id(query, hash)});
  CHECK(oq.highlightFloorNodeIds == std::vector<std::string>{highlight_node_id(run)});
  const auto& oh = s.overlays.at(hash);
  CHECK(oh.arcNodeIds == std::vector<std::string>{arc_node_id(query, hash)});
  CHECK(oh.highlightFloorNodeIds.empty());

  for (const auto& n : s.nodes) {
    if (n.kind == NodeKind::Arc || n.highlight) CHECK_FALSE(n.visibleByDefault);
    if (n.kind == NodeKind::Arc) {
      CHECK(n.points.size() == 24);
      for (const auto& p : n.points) CHECK(p.y >= 0.0);
    }
  }

  const auto& panel = s.panels.at(query);
  CHECK(panel.title == "query");
  CHECK(panel.className == "app.Db");
  CHECK(panel.loc == 21);
  REQUIRE(panel.entries.size() == 1);
  CHECK(panel.entries[0].bugType == "SQL_INJECTION_JDBC");
  CHECK(panel.entries[0].severity == Severity::High);
  CHECK(s.panels.contains(run));
  CHECK(s.panels.at(run).entries.empty());
  CHECK(s.legend.size() == 10);
  CHECK_FALSE(s.metadata.controls.empty());
}

TEST_CASE("overlay closure and idempotence on the corpus") {
  auto b = build("corpus");
  for (const auto& [id, overlay] : b.scene.overlays) {
    const auto* a = b.model.annotation(id);
    REQUIRE(a != nullptr);
    std::set<std::pair<MethodId, MethodId>> edges;
    for (const auto& callee : a->outEdges) edges.emplace(id, callee);
    for (const auto& caller : a->inEdges) edges.emplace(caller, id);
    CHECK(overlay.arcNodeIds.size() == edges.size());
    for (const auto& arc : overlay.arcNodeIds) REQUIRE(b.scene.find_node(arc) != nullptr);
    for (const auto& hl : overlay.highlightFloorNodeIds) {
      const auto* n = b.scene.find_node(hl);
      REQUIRE(n != nullptr);
      CHECK(n->highlight);
      CHECK(n->color == palette::kHighlight);
      CHECK_FALSE(b.model.annotation(MethodId(n->refs.method))->severity.has_value());
    }

    auto once = build_overlay(b.model, b.layout, b.cfg, id);
    auto twice = build_overlay(b.model, b.layout, b.cfg, id);
    REQUIRE(once.arcNodes.size() == twice.arcNodes.size());
    for (std::size_t i = 0; i < once.arcNodes.size(); ++i) CHECK(once.arcNodes[i].id == twice.arcNodes[i].id);
  }
}

TEST_CASE("overhead arcs clear both endpoint buildings") {
  auto b = build("corpus");
  for (const auto& n : b.scene.nodes) {
    if (n.kind != NodeKind::Arc) continue;
    auto caller = MethodId(n.refs.caller);
    auto callee = MethodId(n.refs.callee);
    if (b.model.methods.at(caller).cls == b.model.methods.at(callee).cls) continue;
    const auto& ba = b.layout.buildings.at(std::string(caller.class_fqn()));
    const auto& bb = b.layout.buildings.at(std::string(callee.class_fqn()));
    double roof = std::max(ba.baseY + ba.height, bb.baseY + bb.height);
    double top = 0.0;
    for (const auto& p : n.points) top = std::max(top, p.y);
    CHECK(top > roof);
  }
}

TEST_CASE("method without edges has an empty overlay") {
  auto b = build("small");
  auto close = method_id("app.Db", "close", "()V");
  auto overlay = build_overlay(b.model, b.layout, b.cfg, close);
  CHECK(overlay.arcNodes.empty());
  CHECK(overlay.highlightFloors.empty());
}

TEST_CASE("zero findings: no floors, no overlays, legend intact") {
  auto doc = parse_code_model(testkit::slurp(testkit::fixture("small/model.json")));
  auto model = build_city_model({}, doc);
  LayoutConfig cfg;
  auto scene = compose_scene(model, layout_city(model, cfg), cfg);
  CHECK(count(scene, NodeKind::Floor) == 0);
  CHECK(count(scene, NodeKind::Floor, true) == 0);
  CHECK(count(scene, NodeKind::Arc) == 0);
  CHECK(scene.overlays.empty());
  CHECK(scene.panels.empty());
  CHECK(scene.legend.size() == 10);
  CHECK(count(scene, NodeKind::Building) == 3);
}

TEST_CASE("synthetic floors still get arcs") {
  auto b = build("corpus");
  auto readValue = method_id("com.fasterxml.jackson.databind.ObjectMapper", "readValue",
                             "(Ljava/lang/String;Ljava/lang/Class;)Ljava/lang/Object;");
  const auto* floor = b.scene.find_node(floor_node_id(readValue));
  REQUIRE(floor != nullptr);
  CHECK(floor->synthetic);
  CHECK(b.scene.overlays.at(readValue).arcNodeIds.size() == 1);
}

TEST_CASE("serialization: canonical, round-trips, hash ignores the timestamp") {
  auto b = build("corpus");
  auto text = serialize_scene(b.scene);
  CHECK(text == serialize_scene(build("corpus").scene));
  CHECK(text.back() == '\n');

  auto parsed = parse_scene(text);
  CHECK(parsed == b.scene);
  CHECK(serialize_scene(parsed) == text);

  auto stamped = b.scene;
  stamped.metadata.generatedAt = "2026-01-01T00:00:00Z";
  CHECK(scene_hash(stamped) == scene_hash(b.scene));
  CHECK(serialize_scene(stamped) != text);
  CHECK(scene_hash(b.scene).size() == 64);

  auto changed = b.scene;
  changed.nodes.front().color.r = 0.123;
  CHECK(scene_hash(changed) != scene_hash(b.scene));
}

TEST_CASE("quantization keeps six significant digits") {
  CHECK(quantize(1.23456789) == 1.23457);
  CHECK(quantize(-0.0) == 0.0);
  CHECK_FALSE(std::signbit(quantize(-1e-30 * 0.0)));
  CHECK(quantize(123456789.0) == 123457000.0);
}

TEST_CASE("scene validation rejects inconsistent documents") {
  auto text = serialize_scene(build("small").scene);
  auto j = nlohmann::json::parse(text);

  auto broken = j;
  broken["overlays"].begin().value()["arcNodeIds"].push_back("arc:nowhere");
  CHECK_THROWS_AS(parse_scene(broken.dump()), SchemaError);

  broken = j;
  std::swap(broken["nodes"][0], broken["nodes"][1]);
  CHECK_THROWS_AS(parse_scene(broken.dump()), SchemaError);

  broken = j;
  broken["nodes"][0]["color"][0] = 1.5;
  CHECK_THROWS_AS(parse_scene(broken.dump()), SchemaError);

  broken = j;
  broken.erase("legend");
  CHECK_THROWS_AS(parse_scene(broken.dump()), SchemaError);

  CHECK_THROWS_AS(parse_scene("{\"metadata\": "), ParseError);
}
