#pragma once

#include <compare>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace vulncity {

/// Canonical join key between SAST findings and the code model:
/// "classFqn#methodName(descriptor)returnType", descriptor taken verbatim.
class MethodId {
 public:
  MethodId() = default;
  explicit MethodId(std::string value) : value_(std::move(value)) {}

  const std::string& str() const noexcept { return value_; }
  bool empty() const noexcept { return value_.empty(); }

  /// Text before '#'.
  std::string_view class_fqn() const;
  /// Text between '#' and the signature.
  std::string_view method_name() const;

  auto operator<=>(const MethodId&) const = default;

 private:
  std::string value_;
};

MethodId method_id(std::string_view classFqn, std::string_view methodName, std::string_view signature);

/// True for strings of the form produced by method_id (non-empty class and name,
/// signature starting with '(' and containing ')').
bool is_valid_method_id(std::string_view text);

struct Finding {
  std::string bugType;
  std::string category;
  int priority = 3;  // 1 = high, 2 = medium, 3 = low
  bool experimental = false;
  std::string classFqn;
  std::string methodName;
  std::string methodSignature;
  std::optional<int> startLine;
  std::optional<int> endLine;
  std::string shortMessage;
  std::string details;

  MethodId method() const { return method_id(classFqn, methodName, methodSignature); }
  bool operator==(const Finding&) const = default;
};

struct SastReport {
  std::string toolName;
  std::string toolVersion;
  std::vector<Finding> findings;  // document order
  std::vector<std::string> warnings;

  bool operator==(const SastReport&) const = default;
};

struct MethodRecord {
  std::string name;
  std::string signature;
  // Absent when the code model carries no line information for the method.
  std::optional<int> startLine;
  std::optional<int> endLine;
  int loc = 1;

  bool operator==(const MethodRecord&) const = default;
};

struct ClassRecord {
  std::string fqn;
  int loc = 1;
  std::pair<int, int> lineSpan{1, 1};
  std::vector<MethodRecord> methods;

  MethodId method_id_of(const MethodRecord& m) const { return vulncity::method_id(fqn, m.name, m.signature); }
  bool operator==(const ClassRecord&) const = default;
};

struct PackageNode {
  std::string name;
  std::string fqName;
  std::vector<PackageNode> subpackages;
  std::vector<ClassRecord> classes;
  long long totalLoc = 0;

  /// Σ class loc + Σ subpackage totalLoc, recomputed from the children as stored.
  long long recompute_total() const;
  bool operator==(const PackageNode&) const = default;
};

struct CallEdge {
  MethodId caller;
  MethodId callee;
  bool dangling = false;  // an endpoint is not present in the package tree

  bool self_recursive() const { return caller == callee; }
  bool operator==(const CallEdge&) const = default;
};

struct CodeModelDocument {
  // Synthetic unnamed root; its subpackages are the top-level packages.
  PackageNode root;
  std::vector<CallEdge> callEdges;  // document order
  std::vector<std::string> applicationPackagePrefixes;
  std::vector<std::string> warnings;

  bool operator==(const CodeModelDocument&) const = default;
};

/// Parses a SpotBugs / find-sec-bugs BugCollection document.
/// Throws ParseError for malformed XML and InputError for a foreign root element;
/// unusable BugInstances are skipped and reported in `warnings`.
SastReport parse_sast_report(std::string_view xmlText);

/// Parses the code-model JSON document. Throws ParseError for malformed JSON and
/// SchemaError (naming the JSON path) for schema violations.
CodeModelDocument parse_code_model(std::string_view jsonText);

/// Visits every package below the synthetic root, parents before children.
template <typename Fn>
void for_each_package(const PackageNode& node, Fn&& fn) {
  for (const auto& sub : node.subpackages) {
    fn(sub);
    for_each_package(sub, fn);
  }
}

}  // namespace vulncity
