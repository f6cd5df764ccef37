#include "vulncity/city_model.hpp"

#include <algorithm>
#include <set>

namespace vulncity {

std::string_view to_string(Severity s) {
  switch (s) {
    case Severity::High: return "High";
    case Severity::Medium: return "Medium";
    case Severity::Low: return "Low";
    case Severity::Info: return "Info";
  }
  return "Info";
}

std::optional<Severity> severity_from_string(std::string_view s) {
  for (auto v : {Severity::High, Severity::Medium, Severity::Low, Severity::Info}) {
    if (to_string(v) == s) return v;
  }
  return std::nullopt;
}

Severity severity_of(const Finding& f) {
  if (f.experimental) return Severity::Info;
  switch (f.priority) {
    case 1: return Severity::High;
    case 2: return Severity::Medium;
    default: return Severity::Low;
  }
}

std::optional<Severity> severity_of(std::span<const Finding> findings) {
  std::optional<Severity> worst;
  for (const auto& f : findings) {
    auto s = severity_of(f);
    if (!worst || s > *worst) worst = s;
  }
  return worst;
}

std::string_view to_string(Ownership o) { return o == Ownership::Application ? "application" : "dependency"; }

bool matches_package_prefix(std::string_view packageFq, std::string_view prefix) {
  if (prefix.empty() || packageFq.size() < prefix.size()) return false;
  if (packageFq.substr(0, prefix.size()) != prefix) return false;
  return packageFq.size() == prefix.size() || packageFq[prefix.size()] == '.';
}

std::size_t CityModel::bound_finding_count() const {
  std::size_t n = 0;
  for (const auto& [id, a] : annotations) n += a.findings.size();
  return n;
}

const MethodAnnotation* CityModel::annotation(const MethodId& id) const {
  auto it = annotations.find(id);
  return it == annotations.end() ? nullptr : &it->second;
}

namespace {

void index_tree(CityModel& city, const PackageNode& node) {
  for (const auto& pkg : node.subpackages) {
    city.packages.emplace(pkg.fqName, &pkg);
    bool owned = std::any_of(city.applicationPackagePrefixes.begin(), city.applicationPackagePrefixes.end(),
                             [&](const std::string& p) { return matches_package_prefix(pkg.fqName, p); });
    city.ownership.emplace(pkg.fqName, owned ? Ownership::Application : Ownership::Dependency);
    for (const auto& cls : pkg.classes) {
      city.classes.emplace(cls.fqn, &cls);
      city.packageOfClass.emplace(cls.fqn, pkg.fqName);
      for (const auto& m : cls.methods) {
        city.methods.emplace(cls.method_id_of(m), MethodLocation{&pkg, &cls, &m});
      }
    }
    index_tree(city, pkg);
  }
}

MethodAnnotation& annotate(CityModel& city, const MethodId& id) {
  auto [it, inserted] = city.annotations.try_emplace(id);
  if (inserted) it->second.methodId = id;
  return it->second;
}

}  // namespace

CityModel build_city_model(const SastReport& report, const CodeModelDocument& model) {
  CityModel city;
  city.root = std::make_shared<const PackageNode>(model.root);
  city.applicationPackagePrefixes = model.applicationPackagePrefixes;
  city.warnings = model.warnings;
  index_tree(city, *city.root);

  for (const auto& f : report.findings) {
    auto id = f.method();
    if (!city.methods.contains(id)) {
      city.unboundFindings.push_back(f);
      city.warnings.push_back("finding " + f.bugType + " on " + id.str() + " does not match any method");
      continue;
    }
    annotate(city, id).findings.push_back(f);
  }
  for (auto& [id, a] : city.annotations) a.severity = severity_of(a.findings);

  std::set<std::pair<MethodId, MethodId>> seen;
  for (const auto& e : model.callEdges) {
    if (e.dangling || !city.methods.contains(e.caller) || !city.methods.contains(e.callee)) continue;
    if (!seen.emplace(e.caller, e.callee).second) {
      city.warnings.push_back("duplicate call edge " + e.caller.str() + " -> " + e.callee.str() + " ignored");
      continue;
    }
    city.edges.push_back(e);
    annotate(city, e.caller).outEdges.push_back(e.callee);
    annotate(city, e.callee).inEdges.push_back(e.caller);
  }
  return city;
}

}  // namespace vulncity
