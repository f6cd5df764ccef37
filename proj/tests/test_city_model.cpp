#include <doctest.h>

#include "testkit.hpp"
#include "vulncity/city_model.hpp"

#include <random>

using namespace vulncity;

namespace {

Finding finding(int priority, bool experimental = false, std::string cls = "a.b.C", std::string name = "f",
                std::string sig = "()V") {
  Finding f;
  f.bugType = "BUG";
  f.priority = priority;
  f.experimental = experimental;
  f.category = experimental ? "EXPERIMENTAL" : "SECURITY";
  f.classFqn = std::move(cls);
  f.methodName = std::move(name);
  f.methodSignature = std::move(sig);
  return f;
}

CodeModelDocument small_model() {
  return parse_code_model(R"({"applicationPackagePrefixes": ["com.acme"], "packages": [
    {"name": "com", "subpackages": [{"name": "acme", "subpackages": [{"name": "core", "classes": [
      {"fqn": "com.acme.core.C", "loc": 40, "lineSpan": [1, 40], "methods": [
        {"name": "f", "signature": "()V", "startLine": 2, "endLine": 9, "loc": 8},
        {"name": "g", "signature": "()V", "startLine": 10, "endLine": 20, "loc": 11}]}]}]},
      {"name": "acmex", "classes": [{"fqn": "com.acmex.D", "loc": 5, "lineSpan": [1, 5]}]}]},
    {"name": "org", "subpackages": [{"name": "lib", "classes": [{"fqn": "org.lib.E", "loc": 9, "lineSpan": [1, 9]}]}]}
  ], "callEdges": [
    {"caller": "com.acme.core.C#f()V", "callee": "com.acme.core.C#g()V"},
    {"caller": "com.acme.core.C#f()V", "callee": "com.acme.core.C#g()V"},
    {"caller": "com.acme.core.C#g()V", "callee": "ext.X#y()V"}
  ]})");
}

}  // namespace

TEST_CASE("severity of a list of findings") {
  CHECK_FALSE(severity_of(std::vector<Finding>{}).has_value());
  CHECK(severity_of(std::vector{finding(2), finding(3)}) == Severity::Medium);
  CHECK(severity_of(std::vector{finding(3), finding(1, true)}) == Severity::Low);
  CHECK(severity_of(std::vector{finding(1)}) == Severity::High);
  CHECK(severity_of(std::vector{finding(2, true)}) == Severity::Info);
  CHECK(severity_from_string("Medium") == Severity::Medium);
  CHECK_FALSE(severity_from_string("Critical").has_value());
}

TEST_CASE("property: adding a finding never lowers severity") {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> prio(1, 3);
  std::bernoulli_distribution exp(0.25);
  for (int round = 0; round < 500; ++round) {
    std::vector<Finding> fs;
    std::optional<Severity> prev;
    for (int i = 0; i < 8; ++i) {
      fs.push_back(finding(prio(rng), exp(rng)));
      auto now = severity_of(fs);
      REQUIRE(now.has_value());
      if (prev) CHECK(*now >= *prev);
      prev = now;
    }
  }
}

TEST_CASE("a finding on a modelled method is bound with its severity") {
  SastReport report;
  report.findings = {finding(2, false, "com.acme.core.C", "f")};
  auto city = build_city_model(report, small_model());
  auto* a = city.annotation(method_id("com.acme.core.C", "f", "()V"));
  REQUIRE(a != nullptr);
  CHECK(a->severity == Severity::Medium);
  CHECK(a->findings.size() == 1);
  CHECK(city.unboundFindings.empty());
}

TEST_CASE("a finding on an absent method is unbound") {
  auto model = small_model();
  auto before = build_city_model({}, model);
  SastReport report;
  report.findings = {finding(1, false, "ghost.Z", "q")};
  auto city = build_city_model(report, model);
  CHECK(city.unboundFindings.size() == 1);
  CHECK(city.annotations.size() == before.annotations.size());
  for (const auto& [id, a] : city.annotations) CHECK_FALSE(a.severity.has_value());
}

TEST_CASE("ownership follows package prefixes segment by segment") {
  auto city = build_city_model({}, small_model());
  CHECK(city.ownership.at("com.acme.core") == Ownership::Application);
  CHECK(city.ownership.at("com.acme") == Ownership::Application);
  CHECK(city.ownership.at("com") == Ownership::Dependency);
  CHECK(city.ownership.at("com.acmex") == Ownership::Dependency);
  CHECK(city.ownership.at("org.lib") == Ownership::Dependency);
  CHECK(city.ownership.size() == city.packages.size());
  CHECK(matches_package_prefix("com.acme", "com.acme"));
  CHECK_FALSE(matches_package_prefix("com.acmex", "com.acme"));
}

TEST_CASE("edges: dangling dropped, duplicates collapsed with a warning") {
  auto city = build_city_model({}, small_model());
  REQUIRE(city.edges.size() == 1);
  auto f = method_id("com.acme.core.C", "f", "()V");
  auto g = method_id("com.acme.core.C", "g", "()V");
  CHECK(city.annotation(f)->outEdges == std::vector{g});
  CHECK(city.annotation(g)->inEdges == std::vector{f});
  CHECK(city.annotation(g)->outEdges.empty());
  bool warned = false;
  for (const auto& w : city.warnings) warned = warned || w.find("duplicate call edge") != std::string::npos;
  CHECK(warned);
}

TEST_CASE("properties on random models: join completeness, adjacency symmetry, ownership coverage") {
  std::mt19937_64 rng(99);
  for (int round = 0; round < 40; ++round) {
    auto gen = testkit::random_city(rng, {.maxPackages = 20, .maxClasses = 80});
    auto doc = parse_code_model(gen.modelJson);
    auto city = build_city_model(gen.report, doc);

    CHECK(city.bound_finding_count() + city.unboundFindings.size() == gen.report.findings.size());
    for (const auto& [id, a] : city.annotations) {
      CHECK(city.methods.contains(id));
      CHECK(a.severity == severity_of(a.findings));
    }
    for (const auto& e : doc.callEdges) {
      if (e.dangling) continue;
      const auto* from = city.annotation(e.caller);
      const auto* to = city.annotation(e.callee);
      REQUIRE(from != nullptr);
      REQUIRE(to != nullptr);
      CHECK(std::find(from->outEdges.begin(), from->outEdges.end(), e.callee) != from->outEdges.end());
      CHECK(std::find(to->inEdges.begin(), to->inEdges.end(), e.caller) != to->inEdges.end());
    }
    std::size_t packages = 0;
    for_each_package(*city.root, [&](const PackageNode& p) {
      ++packages;
      CHECK(city.ownership.contains(p.fqName));
    });
    CHECK(city.ownership.size() == packages);
  }
}

TEST_CASE("corpus fixture: bound and unbound counts") {
  auto report = parse_sast_report(testkit::slurp(testkit::fixture("corpus/report.xml")));
  auto city = build_city_model(report, parse_code_model(testkit::slurp(testkit::fixture("corpus/model.json"))));
  CHECK(city.unboundFindings.size() == 1);
  CHECK(city.bound_finding_count() == 13);
  auto login = method_id("com.acme.shop.web.LoginController", "login", "(Ljava/lang/String;Ljava/lang/String;)Ljava/lang/String;");
  REQUIRE(city.annotation(login) != nullptr);
  CHECK(city.annotation(login)->findings.size() == 2);
  CHECK(city.annotation(login)->severity == Severity::Medium);
}
