#include "vulncity/collab.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace vulncity::collab {

using nlohmann::json;

std::optional<std::array<double, 4>> normalized(const std::array<double, 4>& q) {
  double norm = std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]);
  if (!(norm > 1e-9) || !std::isfinite(norm)) return std::nullopt;
  return std::array<double, 4>{q[0] / norm, q[1] / norm, q[2] / norm, q[3] / norm};
}

// ---------------------------------------------------------------------------
// Wire format

const std::vector<MessageSchema>& wire_schema() {
  static const std::vector<MessageSchema> schema = {
      {"join", Direction::ClientToServer, {"room", "name", "sceneHash"}},
      {"welcome", Direction::ServerToClient, {"selfId", "seq", "snapshot"}},
      {"pose", Direction::ClientToServer, {"head", "hands"}},
      {"presence", Direction::ServerToClient,
       {"seq", "userId", "displayName", "color", "head", "hands", "resolvedPosition"}},
      {"toggleOverlay", Direction::ClientToServer, {"methodId"}},
      {"overlayState", Direction::ServerToClient, {"seq", "active"}},
      {"follow", Direction::ClientToServer, {"leaderId"}},
      {"followState", Direction::ServerToClient, {"seq", "follows"}},
      {"leave", Direction::Both, {"seq", "userId"}},
      {"error", Direction::ServerToClient, {"code", "message"}},
  };
  return schema;
}

bool conforms_to_schema(const json& msg) {
  if (!msg.is_object() || !msg.contains("type") || !msg["type"].is_string()) return false;
  const auto type = msg["type"].get<std::string>();
  for (const auto& s : wire_schema()) {
    if (s.type != type) continue;
    for (const auto& [key, value] : msg.items()) {
      if (key != "type" && std::find(s.fields.begin(), s.fields.end(), key) == s.fields.end()) return false;
    }
    return true;
  }
  return false;
}

json pose_to_json(const Pose& p) { return {{"p", p.position}, {"q", p.orientation}}; }

namespace {

std::optional<Pose> read_pose(const json& j, bool normalize) {
  if (!j.is_object() || !j.contains("p") || !j.contains("q")) return std::nullopt;
  const auto& p = j["p"];
  const auto& q = j["q"];
  if (!p.is_array() || p.size() != 3 || !q.is_array() || q.size() != 4) return std::nullopt;
  Pose pose;
  for (std::size_t i = 0; i < 3; ++i) {
    if (!p[i].is_number()) return std::nullopt;
    pose.position[i] = p[i].get<double>();
    if (!std::isfinite(pose.position[i])) return std::nullopt;
  }
  std::array<double, 4> raw{};
  for (std::size_t i = 0; i < 4; ++i) {
    if (!q[i].is_number()) return std::nullopt;
    raw[i] = q[i].get<double>();
  }
  if (!normalize) {
    pose.orientation = raw;
    return pose;
  }
  auto unit = normalized(raw);
  if (!unit) return std::nullopt;
  pose.orientation = *unit;
  return pose;
}

}  // namespace

std::optional<Pose> pose_from_json(const json& j) { return read_pose(j, true); }

json presence_to_json(const Presence& p) {
  return {{"userId", p.userId},
          {"displayName", p.displayName},
          {"color", json::array({p.avatarColor.r, p.avatarColor.g, p.avatarColor.b, p.avatarColor.a})},
          {"head", pose_to_json(p.head)},
          {"hands", json::array({pose_to_json(p.hands[0]), pose_to_json(p.hands[1])})}};
}

Presence presence_from_json(const json& j) {
  Presence p;
  p.userId = j.at("userId").get<std::string>();
  p.displayName = j.at("displayName").get<std::string>();
  const auto& c = j.at("color");
  p.avatarColor = {c.at(0).get<double>(), c.at(1).get<double>(), c.at(2).get<double>(), c.at(3).get<double>()};
  // Broadcast orientations are already unit length; keep them bit-exact.
  p.head = read_pose(j.at("head"), false).value_or(Pose{});
  const auto& hands = j.at("hands");
  for (std::size_t i = 0; i < 2 && i < hands.size(); ++i) p.hands[i] = read_pose(hands[i], false).value_or(Pose{});
  return p;
}

json room_state_to_json(const RoomState& s) {
  json presences = json::array();
  for (const auto& [id, p] : s.presences) presences.push_back(presence_to_json(p));
  return {{"roomId", s.roomId},
          {"sceneHash", s.sceneHash},
          {"presences", std::move(presences)},
          {"activeOverlays", s.activeOverlays},
          {"follows", s.follows}};
}

RoomState room_state_from_json(const json& j) {
  RoomState s;
  s.roomId = j.at("roomId").get<std::string>();
  s.sceneHash = j.at("sceneHash").get<std::string>();
  for (const auto& p : j.at("presences")) {
    auto presence = presence_from_json(p);
    s.presences.emplace(presence.userId, std::move(presence));
  }
  s.activeOverlays = j.at("activeOverlays").get<std::set<std::string>>();
  s.follows = j.at("follows").get<std::map<std::string, std::string>>();
  return s;
}

// ---------------------------------------------------------------------------
// Hub

namespace {

const std::array<ColorRGBA, 8> kAvatarColors = {{
    {0.90, 0.30, 0.25, 1.0},
    {0.20, 0.60, 0.95, 1.0},
    {0.95, 0.80, 0.20, 1.0},
    {0.40, 0.85, 0.45, 1.0},
    {0.75, 0.45, 0.95, 1.0},
    {0.95, 0.55, 0.20, 1.0},
    {0.25, 0.85, 0.85, 1.0},
    {0.95, 0.45, 0.70, 1.0},
}};

bool nonempty_string(const json& msg, const char* key) {
  return msg.contains(key) && msg[key].is_string() && !msg[key].get_ref<const std::string&>().empty();
}

}  // namespace

SessionHub::SessionHub(std::string sceneHash, std::set<std::string> overlayKeys, HubConfig cfg)
    : sceneHash_(std::move(sceneHash)), overlayKeys_(std::move(overlayKeys)), cfg_(cfg) {}

const RoomState* SessionHub::room(std::string_view roomId) const {
  auto it = rooms_.find(std::string(roomId));
  return it == rooms_.end() ? nullptr : &it->second.state;
}

std::optional<std::string> SessionHub::user_of(ConnectionId conn) const {
  auto it = bindings_.find(conn);
  if (it == bindings_.end()) return std::nullopt;
  return it->second.userId;
}

std::uint64_t SessionHub::seq(std::string_view roomId) const {
  auto it = rooms_.find(std::string(roomId));
  return it == rooms_.end() ? 0 : it->second.seq;
}

void SessionHub::error(ConnectionId conn, std::string_view code, std::string_view message, Out& out, bool close) {
  out.push_back({conn, {{"type", "error"}, {"code", code}, {"message", message}}, close});
}

std::vector<Outgoing> SessionHub::on_text(ConnectionId conn, std::string_view text, TimePoint now) {
  json msg = json::parse(text, nullptr, false);
  if (msg.is_discarded()) {
    Out out;
    error(conn, "bad-message", "message is not valid JSON", out);
    return out;
  }
  return on_message(conn, msg, now);
}

std::vector<Outgoing> SessionHub::on_message(ConnectionId conn, const json& msg, TimePoint now) {
  Out out;
  if (!msg.is_object() || !msg.contains("type") || !msg["type"].is_string()) {
    error(conn, "bad-message", "message must be an object with a string type", out);
    return out;
  }
  const auto& type = msg["type"].get_ref<const std::string&>();
  if (type == "join") {
    join(conn, msg, now, out);
    return out;
  }

  auto bound = bindings_.find(conn);
  if (type == "leave") {
    if (bound != bindings_.end()) leave(conn, out, false);
    return out;
  }
  if (type != "pose" && type != "toggleOverlay" && type != "follow") {
    error(conn, "bad-message", "unknown message type '" + type + "'", out);
    return out;
  }
  if (bound == bindings_.end()) {
    error(conn, "not-joined", "join a room first", out);
    return out;
  }
  Binding who = bound->second;
  rooms_.at(who.roomId).members.at(who.userId).lastSeen = now;
  if (type == "pose") handle_pose(who, msg, now, out);
  else if (type == "toggleOverlay") toggle_overlay(who, msg, out);
  else set_follow(who, msg, out);
  return out;
}

std::vector<Outgoing> SessionHub::on_disconnect(ConnectionId conn, TimePoint /*now*/) {
  Out out;
  if (bindings_.contains(conn)) leave(conn, out, false);
  return out;
}

std::vector<Outgoing> SessionHub::tick(TimePoint now) {
  Out out;
  std::vector<ConnectionId> expired;
  for (auto& [id, room] : rooms_) {
    if (!room.pendingPoses.empty() && (!room.lastFlush || now - *room.lastFlush >= cfg_.poseInterval)) {
      flush_poses(room, now, out);
    }
    for (const auto& [user, member] : room.members) {
      if (now - member.lastSeen > cfg_.roomTtl) expired.push_back(member.conn);
    }
  }
  for (auto conn : expired) {
    error(conn, "idle-timeout", "no messages within the room TTL", out);
    leave(conn, out, true);
  }
  return out;
}

void SessionHub::join(ConnectionId conn, const json& msg, TimePoint now, Out& out) {
  if (bindings_.contains(conn)) {
    error(conn, "already-joined", "this connection already joined a room", out);
    return;
  }
  if (!nonempty_string(msg, "room") || !msg.contains("name") || !msg["name"].is_string() ||
      !msg.contains("sceneHash") || !msg["sceneHash"].is_string()) {
    error(conn, "bad-message", "join needs room, name and sceneHash", out);
    return;
  }
  if (msg["sceneHash"].get<std::string>() != sceneHash_) {
    error(conn, "scene-mismatch", "client scene differs from the served scene " + sceneHash_, out, true);
    return;
  }

  std::string roomId = msg["room"].get<std::string>();
  auto [it, created] = rooms_.try_emplace(roomId);
  Room& room = it->second;
  if (created) {
    room.state.roomId = roomId;
    room.state.sceneHash = sceneHash_;
  }

  Presence p;
  p.userId = "u" + std::to_string(++nextUser_);
  p.displayName = msg["name"].get<std::string>();
  p.avatarColor = kAvatarColors[(nextUser_ - 1) % kAvatarColors.size()];
  p.head.position = {0.0, 1.7, 0.0};
  room.state.presences.emplace(p.userId, p);
  room.members.emplace(p.userId, Member{conn, now});
  bindings_.emplace(conn, Binding{roomId, p.userId});

  emit_presence(room, {p.userId}, out);
  out.push_back({conn,
                 {{"type", "welcome"}, {"selfId", p.userId}, {"seq", room.seq}, {"snapshot", room_state_to_json(room.state)}}});
  if (log) log("join room=" + roomId + " user=" + p.userId + " name=" + p.displayName);
}

void SessionHub::handle_pose(const Binding& who, const json& msg, TimePoint now, Out& out) {
  Room& room = rooms_.at(who.roomId);
  auto head = msg.contains("head") ? pose_from_json(msg["head"]) : std::nullopt;
  if (!head) {
    error(room.members.at(who.userId).conn, "bad-pose", "pose needs head {p:[x,y,z], q:[x,y,z,w]} with q != 0", out);
    return;
  }
  std::array<Pose, 2> hands = room.state.presences.at(who.userId).hands;
  if (msg.contains("hands")) {
    const auto& h = msg["hands"];
    if (!h.is_array() || h.size() != 2) {
      error(room.members.at(who.userId).conn, "bad-pose", "hands must hold exactly two poses", out);
      return;
    }
    for (std::size_t i = 0; i < 2; ++i) {
      auto hp = pose_from_json(h[i]);
      if (!hp) {
        error(room.members.at(who.userId).conn, "bad-pose", "malformed hand pose", out);
        return;
      }
      hands[i] = *hp;
    }
  }
  auto& presence = room.state.presences.at(who.userId);
  presence.head = *head;
  presence.hands = hands;
  room.pendingPoses.insert(who.userId);
  if (!room.lastFlush || now - *room.lastFlush >= cfg_.poseInterval) flush_poses(room, now, out);
}

void SessionHub::toggle_overlay(const Binding& who, const json& msg, Out& out) {
  Room& room = rooms_.at(who.roomId);
  if (!nonempty_string(msg, "methodId") || !overlayKeys_.contains(msg["methodId"].get<std::string>())) {
    error(room.members.at(who.userId).conn, "unknown-method", "no call-graph overlay for this method", out);
    return;
  }
  std::string id = msg["methodId"].get<std::string>();
  auto& active = room.state.activeOverlays;
  if (!active.erase(id)) active.insert(id);
  ++room.seq;
  broadcast(room, {{"type", "overlayState"}, {"seq", room.seq}, {"active", active}}, out);
}

void SessionHub::set_follow(const Binding& who, const json& msg, Out& out) {
  Room& room = rooms_.at(who.roomId);
  ConnectionId conn = room.members.at(who.userId).conn;
  if (!msg.contains("leaderId") || msg["leaderId"].is_null()) {
    if (room.state.follows.erase(who.userId)) broadcast_follows(room, out);
    return;
  }
  if (!msg["leaderId"].is_string()) {
    error(conn, "bad-message", "leaderId must be a user id or null", out);
    return;
  }
  std::string leader = msg["leaderId"].get<std::string>();
  if (leader == who.userId) {
    error(conn, "self-follow", "a user cannot follow themself", out);
    return;
  }
  if (!room.members.contains(leader)) {
    error(conn, "unknown-leader", "no user '" + leader + "' in this room", out);
    return;
  }
  for (std::string cur = leader;;) {
    auto next = room.state.follows.find(cur);
    if (next == room.state.follows.end()) break;
    if (next->second == who.userId) {
      error(conn, "follow-cycle", "following '" + leader + "' would create a cycle", out);
      return;
    }
    cur = next->second;
  }
  room.state.follows[who.userId] = leader;
  broadcast_follows(room, out);
  // Pending poses go out with the followers so every resolved position matches a
  // leader position the clients have already seen.
  std::set<std::string> users = std::exchange(room.pendingPoses, {});
  std::set<std::string> moved = users;
  moved.insert(leader);
  auto followers = followers_of(room, moved);
  users.insert(followers.begin(), followers.end());
  emit_presence(room, users, out);
}

void SessionHub::leave(ConnectionId conn, Out& out, bool close) {
  auto bound = bindings_.find(conn);
  if (bound == bindings_.end()) return;
  Binding who = bound->second;
  bindings_.erase(bound);
  Room& room = rooms_.at(who.roomId);

  room.members.erase(who.userId);
  room.state.presences.erase(who.userId);
  room.pendingPoses.erase(who.userId);
  bool followsChanged = room.state.follows.erase(who.userId) > 0;
  for (auto it = room.state.follows.begin(); it != room.state.follows.end();) {
    if (it->second == who.userId) {
      it = room.state.follows.erase(it);
      followsChanged = true;
    } else {
      ++it;
    }
  }

  ++room.seq;
  broadcast(room, {{"type", "leave"}, {"seq", room.seq}, {"userId", who.userId}}, out);
  if (followsChanged) broadcast_follows(room, out);
  if (close) out.push_back({conn, json(), true});
  if (log) log("leave room=" + who.roomId + " user=" + who.userId);
  if (room.members.empty()) rooms_.erase(who.roomId);
}

void SessionHub::flush_poses(Room& room, TimePoint now, Out& out) {
  room.lastFlush = now;
  if (room.pendingPoses.empty()) return;
  std::set<std::string> users = room.pendingPoses;
  room.pendingPoses.clear();
  auto followers = followers_of(room, users);
  users.insert(followers.begin(), followers.end());
  emit_presence(room, users, out);
}

// Leaders are emitted before their followers so a client that applies messages in
// order always sees the leader's latest position first.
void SessionHub::emit_presence(Room& room, const std::set<std::string>& users, Out& out) {
  auto depth = [&](const std::string& u) {
    int d = 0;
    for (auto it = room.state.follows.find(u); it != room.state.follows.end(); it = room.state.follows.find(it->second)) {
      ++d;
    }
    return d;
  };
  std::vector<std::pair<int, std::string>> order;
  for (const auto& u : users) {
    if (room.state.presences.contains(u)) order.emplace_back(depth(u), u);
  }
  std::sort(order.begin(), order.end());

  for (const auto& [d, u] : order) {
    json msg = presence_to_json(room.state.presences.at(u));
    msg["type"] = "presence";
    msg["seq"] = ++room.seq;
    auto resolved = resolved_position(room, u);
    if (resolved) {
      msg["resolvedPosition"] = *resolved;
      broadcast(room, msg, out);  // the follower needs it too
    } else {
      broadcast(room, msg, out, u);
    }
  }
}

void SessionHub::broadcast(Room& room, const json& msg, Out& out, const std::string& except) {
  for (const auto& [user, member] : room.members) {
    if (user != except) out.push_back({member.conn, msg});
  }
}

void SessionHub::broadcast_follows(Room& room, Out& out) {
  ++room.seq;
  broadcast(room, {{"type", "followState"}, {"seq", room.seq}, {"follows", room.state.follows}}, out);
}

std::set<std::string> SessionHub::followers_of(const Room& room, const std::set<std::string>& leaders) const {
  std::set<std::string> result;
  std::set<std::string> frontier = leaders;
  while (!frontier.empty()) {
    std::set<std::string> next;
    for (const auto& [follower, leader] : room.state.follows) {
      if (frontier.contains(leader) && result.insert(follower).second) next.insert(follower);
    }
    frontier = std::move(next);
  }
  return result;
}

std::optional<std::array<double, 3>> SessionHub::resolved_position(const Room& room, const std::string& user) const {
  auto it = room.state.follows.find(user);
  if (it == room.state.follows.end()) return std::nullopt;
  std::string leader = it->second;
  for (auto next = room.state.follows.find(leader); next != room.state.follows.end();
       next = room.state.follows.find(leader)) {
    leader = next->second;
  }
  return room.state.presences.at(leader).head.position;
}

// ---------------------------------------------------------------------------
// Client mirror

bool ClientMirror::apply(const json& msg) {
  const auto type = msg.value("type", std::string());
  if (type == "welcome") {
    state_ = room_state_from_json(msg.at("snapshot"));
    selfId_ = msg.at("selfId").get<std::string>();
    lastSeq_ = msg.at("seq").get<std::uint64_t>();
    resolved_.clear();
    joined_ = true;
    return true;
  }
  if (type == "error" || !msg.contains("seq")) return true;

  auto seq = msg.at("seq").get<std::uint64_t>();
  if (!joined_ || seq <= lastSeq_) return false;
  lastSeq_ = seq;
  if (type == "presence") {
    auto p = presence_from_json(msg);
    if (msg.contains("resolvedPosition")) {
      resolved_[p.userId] = msg["resolvedPosition"].get<std::array<double, 3>>();
    } else {
      resolved_.erase(p.userId);
    }
    state_.presences[p.userId] = std::move(p);
  } else if (type == "overlayState") {
    state_.activeOverlays = msg.at("active").get<std::set<std::string>>();
  } else if (type == "followState") {
    state_.follows = msg.at("follows").get<std::map<std::string, std::string>>();
  } else if (type == "leave") {
    auto user = msg.at("userId").get<std::string>();
    state_.presences.erase(user);
    resolved_.erase(user);
  }
  return true;
}

void ClientMirror::apply_own_pose(const Pose& head, const std::array<Pose, 2>& hands) {
  auto it = state_.presences.find(selfId_);
  if (it == state_.presences.end()) return;
  auto normalize = [](Pose p) {
    if (auto q = normalized(p.orientation)) p.orientation = *q;
    return p;
  };
  it->second.head = normalize(head);
  it->second.hands = {normalize(hands[0]), normalize(hands[1])};
}

std::optional<std::array<double, 3>> ClientMirror::resolved_position(const std::string& user) const {
  auto it = resolved_.find(user);
  if (it == resolved_.end()) return std::nullopt;
  return it->second;
}

}  // namespace vulncity::collab
