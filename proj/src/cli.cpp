#include "vulncity/cli.hpp"

#include "vulncity/errors.hpp"
#include "vulncity/ingest.hpp"
#include "vulncity/server.hpp"

#include <CLI11.hpp>
#include <boost/system/system_error.hpp>

#include <algorithm>
#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

namespace vulncity {

using nlohmann::json;

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void apply_layout_config_file(const std::filesystem::path& path, LayoutConfig& cfg) {
  json doc = json::parse(read_file(path), nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) throw InputError("config: '" + path.string() + "' is not a JSON object");
  const std::pair<const char*, double LayoutConfig::*> keys[] = {
      {"areaPerLine", &LayoutConfig::areaPerLine},
      {"heightPerLine", &LayoutConfig::heightPerLine},
      {"streetWidth", &LayoutConfig::streetWidthBase},
      {"streetWidthDecay", &LayoutConfig::streetWidthDecay},
      {"streetWidthMin", &LayoutConfig::streetWidthMin},
      {"buildingGap", &LayoutConfig::buildingGap},
      {"widenFactor", &LayoutConfig::widenFactor},
      {"platformThickness", &LayoutConfig::platformThickness},
      {"minFootprintSide", &LayoutConfig::minFootprintSide},
      {"baseplateSlack", &LayoutConfig::baseplateSlack},
  };
  for (const auto& [key, value] : doc.items()) {
    auto it = std::find_if(std::begin(keys), std::end(keys), [&](const auto& k) { return key == k.first; });
    if (it == std::end(keys)) throw SchemaError("config." + key, "unknown layout key");
    if (!value.is_number()) throw SchemaError("config." + key, "must be a number");
    cfg.*(it->second) = value.get<double>();
  }
}

namespace {

template <typename Fn>
auto in_module(const std::string& module, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const SchemaError& e) {
    throw SchemaError(module + ": " + e.path(), std::string(e.what()).substr(e.path().size() + 2));
  } catch (const InputError& e) {
    throw InputError(module + ": " + e.what());
  }
}

std::size_t count_classes(const PackageNode& node) {
  std::size_t n = node.classes.size();
  for (const auto& p : node.subpackages) n += count_classes(p);
  return n;
}

}  // namespace

BuildResult build_scene(const BuildManifest& manifest) {
  auto sast = in_module("ingest", [&] {
    return parse_sast_report(read_file(manifest.sastPath));
  });
  auto model = in_module("ingest", [&] {
    return parse_code_model(read_file(manifest.codeModelPath));
  });
  if (!manifest.appPrefixOverride.empty()) model.applicationPackagePrefixes = manifest.appPrefixOverride;

  auto city = build_city_model(sast, model);
  auto layout = in_module("layout", [&] { return layout_city(city, manifest.layout); });

  ComposeOptions options;
  options.toolVersions = {{"vulncity", kVersion}, {"sast", sast.toolName + " " + sast.toolVersion}};
  options.generatedAt = manifest.timestamp;

  BuildResult result;
  result.scene = compose_scene(city, layout, manifest.layout, options);
  result.text = serialize_scene(result.scene);
  result.packages = city.packages.size();
  result.classes = count_classes(*city.root);
  result.boundFindings = city.bound_finding_count();
  result.unboundFindings = city.unboundFindings.size();
  result.warnings = sast.warnings;
  result.warnings.insert(result.warnings.end(), result.scene.metadata.warnings.begin(),
                         result.scene.metadata.warnings.end());
  return result;
}

namespace {

struct Streams {
  std::ostream& out;
  std::ostream& err;
};

int cmd_build(const BuildManifest& manifest, Streams io) {
  auto result = build_scene(manifest);

  std::ofstream file(manifest.outputPath, std::ios::binary | std::ios::trunc);
  if (!file) throw InputError("build: cannot write '" + manifest.outputPath.string() + "'");
  file << result.text;
  file.close();
  if (!file) throw InputError("build: failed writing '" + manifest.outputPath.string() + "'");

  for (const auto& w : result.warnings) io.err << "warning: " << w << "\n";
  io.out << "scene written to " << manifest.outputPath.string() << "\n"
         << "  packages:  " << result.packages << "\n"
         << "  classes:   " << result.classes << "\n"
         << "  findings:  " << result.boundFindings << " bound, " << result.unboundFindings << " unbound\n"
         << "  nodes:     " << result.scene.nodes.size() << "\n"
         << "  overlays:  " << result.scene.overlays.size() << "\n"
         << "  warnings:  " << result.warnings.size() << "\n"
         << "  hash:      " << scene_hash(result.scene) << "\n";
  return kExitOk;
}

void inspect_sast(const SastReport& report, std::size_t top, Streams io) {
  std::map<Severity, std::size_t> histogram;
  std::map<std::string, std::size_t> types;
  for (const auto& f : report.findings) {
    ++histogram[severity_of(f)];
    ++types[f.bugType];
  }
  io.out << "SAST report: " << report.toolName << " " << report.toolVersion << "\n"
         << "  findings: " << report.findings.size() << "\n"
         << "  severity: {High: " << histogram[Severity::High] << ", Medium: " << histogram[Severity::Medium]
         << ", Low: " << histogram[Severity::Low] << ", Info: " << histogram[Severity::Info] << "}\n";
  std::vector<std::pair<std::string, std::size_t>> sorted(types.begin(), types.end());
  std::stable_sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  io.out << "  top bug types:\n";
  for (std::size_t i = 0; i < sorted.size() && i < top; ++i) {
    io.out << "    " << sorted[i].first << ": " << sorted[i].second << "\n";
  }
  io.out << "  warnings: " << report.warnings.size() << "\n";
  for (const auto& w : report.warnings) io.out << "    " << w << "\n";
}

void inspect_model(const CodeModelDocument& doc, std::size_t top, Streams io) {
  std::vector<const PackageNode*> all;
  std::size_t methods = 0;
  for_each_package(doc.root, [&](const PackageNode& p) {
    all.push_back(&p);
    for (const auto& c : p.classes) methods += c.methods.size();
  });
  auto dangling = std::count_if(doc.callEdges.begin(), doc.callEdges.end(), [](const CallEdge& e) { return e.dangling; });

  io.out << "code model:\n"
         << "  total LOC: " << doc.root.totalLoc << "\n"
         << "  packages:  " << all.size() << "\n"
         << "  classes:   " << count_classes(doc.root) << "\n"
         << "  methods:   " << methods << "\n"
         << "  callEdges: " << doc.callEdges.size() << " (" << dangling << " dangling)\n"
         << "  top-level packages:\n";
  for (const auto& p : doc.root.subpackages) io.out << "    " << p.fqName << ": " << p.totalLoc << " LOC\n";

  std::stable_sort(all.begin(), all.end(), [](const PackageNode* a, const PackageNode* b) {
    return a->totalLoc != b->totalLoc ? a->totalLoc > b->totalLoc : a->fqName < b->fqName;
  });
  io.out << "  largest packages:\n";
  for (std::size_t i = 0; i < all.size() && i < top; ++i) {
    io.out << "    " << all[i]->fqName << ": " << all[i]->totalLoc << " LOC\n";
  }
  io.out << "  warnings: " << doc.warnings.size() << "\n";
  for (const auto& w : doc.warnings) io.out << "    " << w << "\n";
}

void inspect_scene(const SceneDocument& scene, Streams io) {
  std::map<std::string, std::size_t> kinds;
  std::size_t visible = 0;
  for (const auto& n : scene.nodes) {
    ++kinds[std::string(to_string(n.kind))];
    if (n.visibleByDefault) ++visible;
  }
  io.out << "scene:\n  hash: " << scene_hash(scene) << "\n  nodes: " << scene.nodes.size() << " (" << visible
         << " visible by default)\n";
  for (const auto& [k, n] : kinds) io.out << "    " << k << ": " << n << "\n";
  io.out << "  panels: " << scene.panels.size() << "\n  overlays: " << scene.overlays.size() << "\n";
}

int cmd_inspect(const std::filesystem::path& path, std::size_t top, Streams io) {
  std::string text = read_file(path);
  auto first = text.find_first_not_of(" \t\r\n\xEF\xBB\xBF");
  std::string label = "inspect: " + path.string();
  if (first != std::string::npos && text[first] == '<') {
    inspect_sast(in_module(label, [&] { return parse_sast_report(text); }), top, io);
  } else {
    json probe = json::parse(text, nullptr, false);
    if (!probe.is_discarded() && probe.is_object() && probe.contains("nodes")) {
      inspect_scene(in_module(label, [&] { return parse_scene(text); }), io);
    } else {
      inspect_model(in_module(label, [&] { return parse_code_model(text); }), top, io);
    }
  }
  return kExitOk;
}

struct ServeArgs {
  std::filesystem::path scenePath;
  std::string listen = "127.0.0.1:8080";
  int roomTtl = 300;
  std::filesystem::path assets;
};

int cmd_serve(const ServeArgs& args, Streams io) {
  std::string text = read_file(args.scenePath);
  auto scene = in_module("serve: " + args.scenePath.string(), [&] { return parse_scene(text); });

  auto colon = args.listen.rfind(':');
  if (colon == std::string::npos) throw InputError("serve: --listen must be host:port");
  net::ServerOptions options;
  options.address = args.listen.substr(0, colon);
  try {
    int port = std::stoi(args.listen.substr(colon + 1));
    if (port < 0 || port > 65535) throw std::out_of_range("port");
    options.port = static_cast<unsigned short>(port);
  } catch (const std::exception&) {
    throw InputError("serve: bad port in --listen '" + args.listen + "'");
  }
  if (!args.assets.empty() && !std::filesystem::is_directory(args.assets)) {
    throw InputError("serve: assets directory '" + args.assets.string() + "' does not exist");
  }
  options.sceneText = text;
  options.sceneHash = scene_hash(scene);
  for (const auto& [id, overlay] : scene.overlays) options.overlayKeys.insert(id.str());
  options.assetsDir = args.assets;
  options.hub.roomTtl = std::chrono::seconds(args.roomTtl);

  // Signals are consumed by a dedicated thread so the server can stop cleanly.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  net::CollabServer server(options);
  server.log = [&](const std::string& line) { io.out << line << std::endl; };
  try {
    server.listen();
  } catch (const boost::system::system_error& e) {
    throw InputError("serve: cannot listen on " + args.listen + ": " + e.code().message());
  }
  io.out << "vulncity serving " << args.scenePath.string() << " on http://" << options.address << ":" << server.port()
         << " (ws path /ws, scene " << options.sceneHash.substr(0, 12) << ")" << std::endl;

  std::thread waiter([&] {
    int sig = 0;
    sigwait(&signals, &sig);
    server.stop();
  });
  server.run();
  pthread_kill(waiter.native_handle(), SIGTERM);
  waiter.join();
  io.out << "server stopped" << std::endl;
  return kExitOk;
}

}  // namespace

int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err) {
  Streams io{out, err};
  CLI::App app{"Builds explorable 3D code cities from SAST findings and serves shared review sessions"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  BuildManifest manifest;
  std::filesystem::path configPath;
  bool stamp = false;
  auto* build = app.add_subcommand("build", "Build a scene file from a SAST report and a code model");
  build->add_option("--sast", manifest.sastPath, "SpotBugs / find-sec-bugs XML report")->required();
  build->add_option("--model", manifest.codeModelPath, "Code-model JSON (packages, classes, call edges)")->required();
  build->add_option("-o,--output", manifest.outputPath, "Scene file to write")->required();
  build->add_option("--app-prefix", manifest.appPrefixOverride,
                    "Application package prefix (repeatable; replaces the document's list)");
  build->add_option("--config", configPath, "Layout config JSON; flags override it");
  build->add_flag("--timestamp", stamp, "Record the generation time in the scene metadata (not hashed)");
  struct LayoutFlag {
    const char* name;
    double LayoutConfig::*field;
    const char* help;
  };
  const LayoutFlag layoutFlags[] = {
      {"--area-per-line", &LayoutConfig::areaPerLine, "Ground area per line of code (m^2)"},
      {"--height-per-line", &LayoutConfig::heightPerLine, "Building height per line of code (m)"},
      {"--street-width", &LayoutConfig::streetWidthBase, "Street width at the top level (m)"},
      {"--street-width-decay", &LayoutConfig::streetWidthDecay, "Street width factor per nesting level"},
      {"--street-width-min", &LayoutConfig::streetWidthMin, "Smallest street width (m)"},
      {"--building-gap", &LayoutConfig::buildingGap, "Gap between buildings (m)"},
      {"--widen-factor", &LayoutConfig::widenFactor, "Method floor overhang factor (> 1)"},
      {"--platform-thickness", &LayoutConfig::platformThickness, "Package platform thickness (m)"},
      {"--min-footprint-side", &LayoutConfig::minFootprintSide, "Smallest building side (m)"},
      {"--baseplate-slack", &LayoutConfig::baseplateSlack, "Baseplate headroom factor"},
  };
  std::map<const LayoutFlag*, double> layoutValues;
  std::map<const LayoutFlag*, CLI::Option*> layoutOptions;
  for (const auto& flag : layoutFlags) {
    layoutOptions[&flag] = build->add_option(flag.name, layoutValues[&flag], flag.help);
  }

  std::filesystem::path inspectPath;
  std::size_t top = 10;
  auto* inspect = app.add_subcommand("inspect", "Validate an input or scene file and print statistics");
  inspect->add_option("file", inspectPath, "SAST XML, code-model JSON or scene JSON")->required();
  inspect->add_option("--top", top, "How many packages / bug types to list");

  ServeArgs serveArgs;
  auto* serve = app.add_subcommand("serve", "Serve a scene and the collaborative session protocol");
  serve->add_option("scene", serveArgs.scenePath, "Scene file produced by build")->required();
  serve->add_option("--listen", serveArgs.listen, "host:port to listen on");
  serve->add_option("--room-ttl", serveArgs.roomTtl, "Seconds of silence before a member is dropped")
      ->check(CLI::PositiveNumber);
  serve->add_option("--assets", serveArgs.assets, "Directory with the static viewer files");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitInput;
  }

  try {
    if (*build) {
      if (!configPath.empty()) {
        // Config file first, then explicit flags on top of it.
        apply_layout_config_file(configPath, manifest.layout);
      }
      for (const auto& flag : layoutFlags) {
        if (layoutOptions[&flag]->count() > 0) manifest.layout.*(flag.field) = layoutValues[&flag];
      }
      if (stamp) {
        auto now = std::chrono::system_clock::now();
        manifest.timestamp = std::to_string(std::chrono::duration_cast<std::chrono::seconds>(now.time_since_epoch()).count());
      }
      return cmd_build(manifest, io);
    }
    if (*inspect) return cmd_inspect(inspectPath, top, io);
    return cmd_serve(serveArgs, io);
  } catch (const InputError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
}

}  // namespace vulncity
