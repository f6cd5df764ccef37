#include "vulncity/ingest.hpp"

#include "vulncity/errors.hpp"
#include "vulncity/xml.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <limits>
#include <map>
#include <set>

namespace vulncity {

std::string_view MethodId::class_fqn() const {
  auto hash = value_.find('#');
  return std::string_view(value_).substr(0, hash == std::string::npos ? 0 : hash);
}

std::string_view MethodId::method_name() const {
  auto hash = value_.find('#');
  auto paren = value_.find('(', hash == std::string::npos ? 0 : hash);
  if (hash == std::string::npos || paren == std::string::npos) return {};
  return std::string_view(value_).substr(hash + 1, paren - hash - 1);
}

MethodId method_id(std::string_view classFqn, std::string_view methodName, std::string_view signature) {
  std::string out;
  out.reserve(classFqn.size() + methodName.size() + signature.size() + 1);
  out.append(classFqn).append("#").append(methodName).append(signature);
  return MethodId(std::move(out));
}

bool is_valid_method_id(std::string_view text) {
  auto hash = text.find('#');
  if (hash == std::string_view::npos || hash == 0) return false;
  if (text.find('#', hash + 1) != std::string_view::npos) return false;
  auto paren = text.find('(', hash + 1);
  if (paren == std::string_view::npos || paren == hash + 1) return false;
  return text.find(')', paren) != std::string_view::npos;
}

long long PackageNode::recompute_total() const {
  long long sum = 0;
  for (const auto& c : classes) sum += c.loc;
  for (const auto& p : subpackages) sum += p.recompute_total();
  return sum;
}

// ---------------------------------------------------------------------------
// SAST report

namespace {

std::optional<int> parse_positive(std::string_view s) {
  int value = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size() || value < 1) return std::nullopt;
  return value;
}

std::string trim(std::string_view s) {
  auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::string where(const xml::Element& el, std::size_t index) {
  return "BugInstance #" + std::to_string(index + 1) + " (line " + std::to_string(el.line) + ")";
}

const xml::Element* primary_method(const xml::Element& bug) {
  auto methods = bug.children_named("Method");
  if (methods.empty()) return nullptr;
  for (const auto* m : methods) {
    if (m->attribute("primary").value_or("") == "true") return m;
  }
  return methods.front();
}

}  // namespace

SastReport parse_sast_report(std::string_view xmlText) {
  auto root = xml::parse_document(xmlText);
  if (root->name != "BugCollection") {
    throw InputError("not a SpotBugs report: root element is <" + root->name + ">, expected <BugCollection>");
  }

  SastReport report;
  report.toolName = "SpotBugs";
  report.toolVersion = std::string(root->attribute("version").value_or(""));

  std::map<std::string, std::string, std::less<>> patternDetails;
  for (const auto* pattern : root->children_named("BugPattern")) {
    auto type = pattern->attribute("type");
    if (!type) continue;
    if (const auto* details = pattern->first_child("Details")) {
      patternDetails.emplace(std::string(*type), trim(details->text));
    }
  }

  auto bugs = root->children_named("BugInstance");
  for (std::size_t i = 0; i < bugs.size(); ++i) {
    const auto& bug = *bugs[i];
    auto skip = [&](const std::string& why) { report.warnings.push_back(where(bug, i) + ": " + why + "; skipped"); };

    auto type = bug.attribute("type");
    if (!type || type->empty()) {
      skip("missing type attribute");
      continue;
    }
    auto priority = parse_positive(bug.attribute("priority").value_or(""));
    if (!priority || *priority > 3) {
      skip("priority '" + std::string(bug.attribute("priority").value_or("")) + "' is not 1, 2 or 3");
      continue;
    }
    const auto* cls = bug.first_child("Class");
    const auto* method = primary_method(bug);
    if (cls == nullptr) {
      skip("missing <Class> child");
      continue;
    }
    if (method == nullptr) {
      skip("missing <Method> child (class-level finding)");
      continue;
    }

    Finding f;
    f.bugType = std::string(*type);
    f.category = std::string(bug.attribute("category").value_or(""));
    f.priority = *priority;
    f.experimental = f.category == "EXPERIMENTAL" || bug.attribute("experimental").value_or("") == "true";
    f.classFqn = std::string(method->attribute("classname").value_or(cls->attribute("classname").value_or("")));
    f.methodName = std::string(method->attribute("name").value_or(""));
    f.methodSignature = std::string(method->attribute("signature").value_or(""));
    if (f.classFqn.empty() || f.methodName.empty()) {
      skip("<Method> lacks classname or name");
      continue;
    }

    if (const auto* source = method->first_child("SourceLine")) {
      auto start = parse_positive(source->attribute("start").value_or(""));
      auto end = parse_positive(source->attribute("end").value_or(""));
      if (start && end && *end >= *start) {
        f.startLine = start;
        f.endLine = end;
      } else {
        report.warnings.push_back(where(bug, i) + ": unusable SourceLine start/end; line info dropped");
      }
    }

    std::string longMessage;
    if (const auto* lm = bug.first_child("LongMessage")) longMessage = trim(lm->text);
    if (const auto* sm = bug.first_child("ShortMessage")) f.shortMessage = trim(sm->text);
    if (f.shortMessage.empty()) f.shortMessage = longMessage;
    f.details = longMessage;
    if (auto it = patternDetails.find(f.bugType); it != patternDetails.end() && !it->second.empty()) {
      if (!f.details.empty()) f.details += "\n\n";
      f.details += it->second;
    }
    report.findings.push_back(std::move(f));
  }
  return report;
}

// ---------------------------------------------------------------------------
// Code model

namespace {

using nlohmann::json;

std::pair<int, int> line_column_of(std::string_view text, std::size_t byte) {
  int line = 1;
  int column = 1;
  for (std::size_t i = 0; i + 1 < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      column = 1;
    } else {
      ++column;
    }
  }
  return {line, column};
}

class ModelReader {
 public:
  CodeModelDocument read(const json& doc) {
    if (!doc.is_object()) throw SchemaError("$", "document must be a JSON object");

    CodeModelDocument out;
    if (doc.contains("applicationPackagePrefixes")) {
      const auto& prefixes = doc["applicationPackagePrefixes"];
      if (!prefixes.is_array()) throw SchemaError("$.applicationPackagePrefixes", "must be an array of strings");
      for (std::size_t i = 0; i < prefixes.size(); ++i) {
        out.applicationPackagePrefixes.push_back(
            string_field(prefixes[i], "$.applicationPackagePrefixes[" + std::to_string(i) + "]"));
      }
    }

    if (!doc.contains("packages")) throw SchemaError("$.packages", "missing required key");
    const auto& packages = doc["packages"];
    if (packages.is_object()) {
      out.root.subpackages.push_back(package(packages, "$.packages", ""));
    } else if (packages.is_array()) {
      for (std::size_t i = 0; i < packages.size(); ++i) {
        out.root.subpackages.push_back(package(packages[i], "$.packages[" + std::to_string(i) + "]", ""));
      }
    } else {
      throw SchemaError("$.packages", "must be an object or an array of package objects");
    }
    check_unique_names(out.root.subpackages, "$.packages");
    out.root.totalLoc = out.root.recompute_total();
    if (classCount_ == 0) throw SchemaError("$.packages", "the package tree contains no classes");

    if (doc.contains("callEdges")) {
      const auto& edges = doc["callEdges"];
      if (!edges.is_array()) throw SchemaError("$.callEdges", "must be an array");
      for (std::size_t i = 0; i < edges.size(); ++i) {
        std::string path = "$.callEdges[" + std::to_string(i) + "]";
        if (!edges[i].is_object()) throw SchemaError(path, "must be an object");
        CallEdge e;
        e.caller = method_ref(edges[i], path, "caller");
        e.callee = method_ref(edges[i], path, "callee");
        e.dangling = !methodIds_.contains(e.caller) || !methodIds_.contains(e.callee);
        if (e.dangling) {
          out.warnings.push_back(path + ": dangling edge " + e.caller.str() + " -> " + e.callee.str());
        }
        out.callEdges.push_back(std::move(e));
      }
    }
    out.warnings.insert(out.warnings.begin(), warnings_.begin(), warnings_.end());
    return out;
  }

 private:
  static const json& required(const json& obj, const std::string& path, const char* key) {
    if (!obj.contains(key)) throw SchemaError(path + "." + key, "missing required key");
    return obj[key];
  }

  static std::string string_field(const json& v, const std::string& path) {
    if (!v.is_string()) throw SchemaError(path, "must be a string");
    return v.get<std::string>();
  }

  static int positive_int(const json& v, const std::string& path) {
    if (!v.is_number_integer()) throw SchemaError(path, "must be an integer");
    auto value = v.get<long long>();
    if (value < 1 || value > std::numeric_limits<int>::max()) throw SchemaError(path, "must be a positive integer");
    return static_cast<int>(value);
  }

  static const json* optional_array(const json& obj, const std::string& path, const char* key) {
    if (!obj.contains(key) || obj[key].is_null()) return nullptr;
    if (!obj[key].is_array()) throw SchemaError(path + "." + key, "must be an array");
    return &obj[key];
  }

  template <typename T, typename NameOf>
  static void check_unique(const std::vector<T>& items, const std::string& path, NameOf nameOf, const char* what) {
    std::set<std::string> seen;
    for (std::size_t i = 0; i < items.size(); ++i) {
      if (!seen.insert(nameOf(items[i])).second) {
        throw SchemaError(path + "[" + std::to_string(i) + "]",
                          std::string("duplicate ") + what + " '" + nameOf(items[i]) + "'");
      }
    }
  }

  static void check_unique_names(const std::vector<PackageNode>& siblings, const std::string& path) {
    check_unique(siblings, path, [](const PackageNode& p) { return p.name; }, "sibling package name");
  }

  PackageNode package(const json& obj, const std::string& path, const std::string& parentFq) {
    if (!obj.is_object()) throw SchemaError(path, "package must be an object");
    PackageNode node;
    node.name = string_field(required(obj, path, "name"), path + ".name");
    if (node.name.empty()) throw SchemaError(path + ".name", "must not be empty");
    node.fqName = parentFq.empty() ? node.name : parentFq + "." + node.name;

    if (const auto* subs = optional_array(obj, path, "subpackages")) {
      for (std::size_t i = 0; i < subs->size(); ++i) {
        node.subpackages.push_back(package((*subs)[i], path + ".subpackages[" + std::to_string(i) + "]", node.fqName));
      }
      check_unique_names(node.subpackages, path + ".subpackages");
    }
    if (const auto* classes = optional_array(obj, path, "classes")) {
      for (std::size_t i = 0; i < classes->size(); ++i) {
        node.classes.push_back(class_record((*classes)[i], path + ".classes[" + std::to_string(i) + "]", node.fqName));
      }
    }
    node.totalLoc = node.recompute_total();
    return node;
  }

  ClassRecord class_record(const json& obj, const std::string& path, const std::string& packageFq) {
    if (!obj.is_object()) throw SchemaError(path, "class must be an object");
    ClassRecord c;
    c.fqn = string_field(required(obj, path, "fqn"), path + ".fqn");
    if (c.fqn.empty()) throw SchemaError(path + ".fqn", "must not be empty");
    if (!classFqns_.insert(c.fqn).second) throw SchemaError(path + ".fqn", "duplicate class '" + c.fqn + "'");
    if (c.fqn.rfind(packageFq + ".", 0) != 0) {
      warnings_.push_back(path + ".fqn: class '" + c.fqn + "' is not named under package '" + packageFq + "'");
    }
    c.loc = positive_int(required(obj, path, "loc"), path + ".loc");

    const auto& span = required(obj, path, "lineSpan");
    if (!span.is_array() || span.size() != 2) throw SchemaError(path + ".lineSpan", "must be [minLine, maxLine]");
    c.lineSpan.first = positive_int(span[0], path + ".lineSpan[0]");
    c.lineSpan.second = positive_int(span[1], path + ".lineSpan[1]");
    if (c.lineSpan.second < c.lineSpan.first) throw SchemaError(path + ".lineSpan", "maxLine < minLine");

    if (const auto* methods = optional_array(obj, path, "methods")) {
      for (std::size_t i = 0; i < methods->size(); ++i) {
        c.methods.push_back(method_record((*methods)[i], path + ".methods[" + std::to_string(i) + "]", c));
        auto id = c.method_id_of(c.methods.back());
        if (!methodIds_.insert(id).second) {
          throw SchemaError(path + ".methods[" + std::to_string(i) + "]", "duplicate method '" + id.str() + "'");
        }
      }
    }
    ++classCount_;
    return c;
  }

  static MethodRecord method_record(const json& obj, const std::string& path, const ClassRecord& owner) {
    if (!obj.is_object()) throw SchemaError(path, "method must be an object");
    MethodRecord m;
    m.name = string_field(required(obj, path, "name"), path + ".name");
    if (m.name.empty()) throw SchemaError(path + ".name", "must not be empty");
    m.signature = string_field(required(obj, path, "signature"), path + ".signature");
    if (m.signature.empty() || m.signature.front() != '(' || m.signature.find(')') == std::string::npos) {
      throw SchemaError(path + ".signature", "must be a JVM descriptor such as \"(I)V\"");
    }
    m.loc = positive_int(required(obj, path, "loc"), path + ".loc");

    bool hasStart = obj.contains("startLine") && !obj["startLine"].is_null();
    bool hasEnd = obj.contains("endLine") && !obj["endLine"].is_null();
    if (hasStart != hasEnd) throw SchemaError(path, "startLine and endLine must be given together");
    if (hasStart) {
      m.startLine = positive_int(obj["startLine"], path + ".startLine");
      m.endLine = positive_int(obj["endLine"], path + ".endLine");
      if (*m.endLine < *m.startLine) throw SchemaError(path + ".endLine", "endLine < startLine");
      if (*m.startLine < owner.lineSpan.first || *m.endLine > owner.lineSpan.second) {
        throw SchemaError(path, "method lines " + std::to_string(*m.startLine) + "-" + std::to_string(*m.endLine) +
                                    " fall outside class lineSpan");
      }
    }
    return m;
  }

  static MethodId method_ref(const json& obj, const std::string& path, const char* key) {
    std::string value = string_field(required(obj, path, key), path + "." + key);
    if (!is_valid_method_id(value)) {
      throw SchemaError(path + "." + key, "'" + value + "' is not a method id (expected pkg.Class#name(desc)ret)");
    }
    return MethodId(std::move(value));
  }

  std::set<std::string> classFqns_;
  std::set<MethodId> methodIds_;
  std::vector<std::string> warnings_;
  std::size_t classCount_ = 0;
};

}  // namespace

CodeModelDocument parse_code_model(std::string_view jsonText) {
  json doc;
  try {
    doc = json::parse(jsonText);
  } catch (const json::parse_error& e) {
    auto [line, column] = line_column_of(jsonText, e.byte);
    throw ParseError("malformed JSON", line, column);
  }
  return ModelReader{}.read(doc);
}

}  // namespace vulncity
