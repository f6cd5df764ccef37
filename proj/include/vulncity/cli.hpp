#pragma once

#include "vulncity/layout.hpp"
#include "vulncity/scene.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace vulncity {

inline constexpr const char* kVersion = "0.3.0";

/// Exit codes are the machine contract of the command line.
enum ExitCode : int { kExitOk = 0, kExitInternal = 1, kExitInput = 2 };

struct BuildManifest {
  std::filesystem::path sastPath;
  std::filesystem::path codeModelPath;
  std::filesystem::path outputPath;
  std::vector<std::string> appPrefixOverride;  // replaces the document's prefixes when non-empty
  LayoutConfig layout;
  std::optional<std::string> timestamp;
  std::vector<std::string> warnings;
};

struct BuildResult {
  SceneDocument scene;
  std::string text;  // canonical serialization
  std::size_t packages = 0;
  std::size_t classes = 0;
  std::size_t boundFindings = 0;
  std::size_t unboundFindings = 0;
  std::vector<std::string> warnings;
};

/// Reads a whole file; throws InputError naming the path when it cannot be read.
std::string read_file(const std::filesystem::path& path);

/// Applies a layout config file (same keys as the scene metadata "layout" block).
void apply_layout_config_file(const std::filesystem::path& path, LayoutConfig& cfg);

/// ingest -> city model -> layout -> compose. Errors carry a module prefix.
BuildResult build_scene(const BuildManifest& manifest);

/// Entry point of the `vulncity` executable.
int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace vulncity
