#pragma once

#include "vulncity/scene.hpp"

#include <json.hpp>

#include <array>
#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace vulncity::collab {

using Clock = std::chrono::steady_clock;
using TimePoint = Clock::time_point;
using ConnectionId = std::uint64_t;

struct Pose {
  std::array<double, 3> position{0.0, 0.0, 0.0};
  std::array<double, 4> orientation{0.0, 0.0, 0.0, 1.0};  // x, y, z, w

  bool operator==(const Pose&) const = default;
};

/// Unit quaternion in the same direction; nullopt for a (near) zero quaternion.
std::optional<std::array<double, 4>> normalized(const std::array<double, 4>& q);

struct Presence {
  std::string userId;
  std::string displayName;
  ColorRGBA avatarColor;
  Pose head;
  std::array<Pose, 2> hands{};

  bool operator==(const Presence&) const = default;
};

struct RoomState {
  std::string roomId;
  std::string sceneHash;
  std::map<std::string, Presence> presences;
  std::set<std::string> activeOverlays;
  std::map<std::string, std::string> follows;  // follower -> leader

  bool operator==(const RoomState&) const = default;
};

// --- wire format -------------------------------------------------------------

enum class Direction { ClientToServer, ServerToClient, Both };

struct MessageSchema {
  std::string type;
  Direction direction;
  std::vector<std::string> fields;  // allowed top-level keys besides "type"
};

/// Every message type of the session protocol with its allowed top-level fields.
const std::vector<MessageSchema>& wire_schema();
/// True when `msg` has a known type and only that type's fields.
bool conforms_to_schema(const nlohmann::json& msg);

nlohmann::json pose_to_json(const Pose& p);
std::optional<Pose> pose_from_json(const nlohmann::json& j);
nlohmann::json presence_to_json(const Presence& p);
Presence presence_from_json(const nlohmann::json& j);
nlohmann::json room_state_to_json(const RoomState& s);
RoomState room_state_from_json(const nlohmann::json& j);

// --- server-side state machine ---------------------------------------------

struct HubConfig {
  // Presence broadcasts per room are coalesced to at most one flush per interval.
  std::chrono::milliseconds poseInterval{50};
  // Members silent for longer than this are removed.
  std::chrono::seconds roomTtl{300};
};

struct Outgoing {
  ConnectionId to = 0;
  nlohmann::json message;
  bool close = false;  // close the connection after sending
};

/// Authoritative state for all rooms of one served scene. Transport-independent:
/// every entry point returns the messages to deliver, in order. Not thread-safe;
/// the transport serializes calls.
class SessionHub {
 public:
  SessionHub(std::string sceneHash, std::set<std::string> overlayKeys, HubConfig cfg = {});

  std::vector<Outgoing> on_text(ConnectionId conn, std::string_view text, TimePoint now);
  std::vector<Outgoing> on_message(ConnectionId conn, const nlohmann::json& msg, TimePoint now);
  std::vector<Outgoing> on_disconnect(ConnectionId conn, TimePoint now);
  /// Flushes coalesced poses that are due and expires idle members.
  std::vector<Outgoing> tick(TimePoint now);

  const RoomState* room(std::string_view roomId) const;
  std::size_t room_count() const { return rooms_.size(); }
  std::optional<std::string> user_of(ConnectionId conn) const;
  std::uint64_t seq(std::string_view roomId) const;
  const std::string& scene_hash() const { return sceneHash_; }

  /// Called with one human-readable line per join and leave.
  std::function<void(const std::string&)> log;

 private:
  struct Member {
    ConnectionId conn = 0;
    TimePoint lastSeen{};
  };
  struct Room {
    RoomState state;
    std::uint64_t seq = 0;
    std::map<std::string, Member> members;
    std::set<std::string> pendingPoses;
    std::optional<TimePoint> lastFlush;
  };
  struct Binding {
    std::string roomId;
    std::string userId;
  };

  using Out = std::vector<Outgoing>;

  void join(ConnectionId conn, const nlohmann::json& msg, TimePoint now, Out& out);
  void handle_pose(const Binding& who, const nlohmann::json& msg, TimePoint now, Out& out);
  void toggle_overlay(const Binding& who, const nlohmann::json& msg, Out& out);
  void set_follow(const Binding& who, const nlohmann::json& msg, Out& out);
  void leave(ConnectionId conn, Out& out, bool close);

  void flush_poses(Room& room, TimePoint now, Out& out);
  void emit_presence(Room& room, const std::set<std::string>& users, Out& out);
  void broadcast(Room& room, const nlohmann::json& msg, Out& out, const std::string& except = {});
  void broadcast_follows(Room& room, Out& out);
  std::set<std::string> followers_of(const Room& room, const std::set<std::string>& leaders) const;
  std::optional<std::array<double, 3>> resolved_position(const Room& room, const std::string& user) const;
  static void error(ConnectionId conn, std::string_view code, std::string_view message, Out& out, bool close = false);

  std::string sceneHash_;
  std::set<std::string> overlayKeys_;
  HubConfig cfg_;
  std::map<std::string, Room> rooms_;
  std::map<ConnectionId, Binding> bindings_;
  std::uint64_t nextUser_ = 0;
};

// --- client-side mirror -----------------------------------------------------

/// Reconstructs room state from a welcome snapshot plus subsequent broadcasts,
/// the way a viewer does. The client's own pose is applied locally.
class ClientMirror {
 public:
  /// Applies one server message; returns false for a message out of seq order.
  bool apply(const nlohmann::json& msg);
  void apply_own_pose(const Pose& head, const std::array<Pose, 2>& hands);

  const RoomState& state() const { return state_; }
  const std::string& self_id() const { return selfId_; }
  std::uint64_t last_seq() const { return lastSeq_; }
  bool joined() const { return joined_; }
  /// Position a follower is placed at by the server, if the last presence carried one.
  std::optional<std::array<double, 3>> resolved_position(const std::string& user) const;

 private:
  RoomState state_;
  std::string selfId_;
  std::uint64_t lastSeq_ = 0;
  bool joined_ = false;
  std::map<std::string, std::array<double, 3>> resolved_;
};

}  // namespace vulncity::collab
