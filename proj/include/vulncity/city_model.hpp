#pragma once

#include "vulncity/ingest.hpp"

#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace vulncity {

// Ordered Info < Low < Medium < High so that std::max picks the worst finding.
enum class Severity { Info = 0, Low = 1, Medium = 2, High = 3 };

std::string_view to_string(Severity s);
std::optional<Severity> severity_from_string(std::string_view s);

/// Experimental findings are Info regardless of their numeric priority.
Severity severity_of(const Finding& f);
std::optional<Severity> severity_of(std::span<const Finding> findings);

enum class Ownership { Application, Dependency };

std::string_view to_string(Ownership o);

/// Segment-aware prefix match: "com.acme" owns "com.acme" and "com.acme.x", not "com.acmex".
bool matches_package_prefix(std::string_view packageFq, std::string_view prefix);

struct MethodAnnotation {
  MethodId methodId;
  std::vector<Finding> findings;  // report order
  std::optional<Severity> severity;
  std::vector<MethodId> inEdges;   // callers, document order
  std::vector<MethodId> outEdges;  // callees, document order
};

struct MethodLocation {
  const PackageNode* package = nullptr;
  const ClassRecord* cls = nullptr;
  const MethodRecord* method = nullptr;
};

/// Immutable merge of a SAST report and a code model. The package tree is shared,
/// so copies are cheap and the location pointers stay valid.
struct CityModel {
  std::shared_ptr<const PackageNode> root;
  // Methods with at least one bound finding or non-dangling call edge.
  std::map<MethodId, MethodAnnotation> annotations;
  std::map<std::string, Ownership> ownership;  // every package fqName
  std::vector<Finding> unboundFindings;
  std::vector<CallEdge> edges;  // non-dangling, de-duplicated, document order
  std::vector<std::string> applicationPackagePrefixes;
  std::vector<std::string> warnings;

  std::map<MethodId, MethodLocation> methods;
  std::map<std::string, const ClassRecord*> classes;
  std::map<std::string, const PackageNode*> packages;
  std::map<std::string, std::string> packageOfClass;

  std::size_t bound_finding_count() const;
  const MethodAnnotation* annotation(const MethodId& id) const;
};

CityModel build_city_model(const SastReport& report, const CodeModelDocument& model);

}  // namespace vulncity
