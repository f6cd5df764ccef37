#pragma once

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace vulncity::xml {

// Minimal non-validating DOM: elements, attributes, character data (entities and
// CDATA decoded). Comments, processing instructions and DOCTYPE are skipped.
struct Element {
  std::string name;
  std::vector<std::pair<std::string, std::string>> attributes;
  std::vector<std::unique_ptr<Element>> children;
  std::string text;  // concatenated direct character data
  int line = 0;
  int column = 0;

  std::optional<std::string_view> attribute(std::string_view key) const;
  const Element* first_child(std::string_view childName) const;
  std::vector<const Element*> children_named(std::string_view childName) const;
};

/// Parses a complete document. Throws ParseError (with line/column) on malformed input.
std::unique_ptr<Element> parse_document(std::string_view text);

}  // namespace vulncity::xml
