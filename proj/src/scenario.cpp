#include "stemnav/scenario.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace stemnav {

using nlohmann::json;
using ojson = nlohmann::ordered_json;

ConvexObstacle ObstacleSpec::build() const {
  switch (kind) {
    case Kind::box:
      return ConvexObstacle::box(lo, hi);
    case Kind::vertices:
      return ConvexObstacle::from_vertices(vertices);
    case Kind::halfspaces: {
      std::vector<HalfSpace> faces;
      for (std::size_t i = 0; i < normals.size(); ++i) faces.push_back({normals[i], offsets[i]});
      return ConvexObstacle::from_halfspaces(std::move(faces));
    }
  }
  throw GeometryError("unknown obstacle kind");
}

Scene ScenarioSpec::scene() const {
  Scene s;
  s.ground = ground;
  for (const auto& o : obstacles) s.obstacles.push_back(o.build());
  return s;
}

void ScenarioSpec::validate() const {
  try {
    if (drones.empty()) throw ConfigError("drones_m: at least one drone is required");
    for (const auto& p : drones)
      if (!p.allFinite()) throw ConfigError("drones_m: non-finite position");
    if (!poi.allFinite()) throw ConfigError("poi_m: non-finite position");
    if (!(physics_step_s > 0.0)) throw ConfigError("physics_step_s must be positive");
    if (!(max_time_s > 0.0)) throw ConfigError("max_time_s must be positive");
    lidar.validate();
    tether.validate();
    vehicle.validate();
    winch.validate();
    planner.validate(drones.size(), lidar.max_range_m);
    table_grid.validate();
    const double ratio = planner.sampling_period_s / physics_step_s;
    if (std::abs(ratio - std::round(ratio)) > 1e-6 * ratio)
      throw ConfigError("physics_step_s must divide planner.sampling_period_s");
    if (tether_count() > 0) {
      const double limit = tether.max_stable_step(winch.min_length_m);
      if (physics_step_s > limit * (1.0 + 1e-12))
        throw ConfigError("physics_step_s " + std::to_string(physics_step_s) + " exceeds the tether stability limit " +
                          std::to_string(limit) + " s at winch.min_length_m");
    }
    for (std::size_t i = 0; i < obstacles.size(); ++i) {
      try {
        (void)obstacles[i].build();
      } catch (const GeometryError& e) {
        throw ConfigError("scene.obstacles." + std::to_string(i) + ": " + e.what());
      }
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

// Reads fields of one JSON object, remembering which keys were consumed so
// that leftovers can be reported as unknown.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError("field '" + path_ + "': expected an object");
  }

  bool has(const char* key) const { return j_.contains(key); }

  const json& raw(const char* key) {
    seen_.insert(key);
    return j_.at(key);
  }

  std::string path(const char* key) const { return join(path_, key); }

  void number(const char* key, double& out) {
    if (!has(key)) return;
    const json& v = raw(key);
    if (!v.is_number()) fail(key, "expected a number");
    out = v.get<double>();
    if (!std::isfinite(out)) fail(key, "expected a finite number");
  }
  void integer(const char* key, int& out) {
    if (!has(key)) return;
    const json& v = raw(key);
    if (!v.is_number_integer()) fail(key, "expected an integer");
    out = v.get<int>();
  }
  void unsigned_integer(const char* key, std::uint64_t& out) {
    if (!has(key)) return;
    const json& v = raw(key);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
      fail(key, "expected a non-negative integer");
    out = v.get<std::uint64_t>();
  }
  void boolean(const char* key, bool& out) {
    if (!has(key)) return;
    const json& v = raw(key);
    if (!v.is_boolean()) fail(key, "expected true or false");
    out = v.get<bool>();
  }
  void string(const char* key, std::string& out) {
    if (!has(key)) return;
    const json& v = raw(key);
    if (!v.is_string()) fail(key, "expected a string");
    out = v.get<std::string>();
  }
  void vec3(const char* key, Vec3& out) {
    if (!has(key)) return;
    out = to_vec3(raw(key), path(key));
  }
  void angle(const char* stem, double& out_rad) {
    const std::string deg = std::string(stem) + "_deg", rad = std::string(stem) + "_rad";
    if (has(deg.c_str()) && has(rad.c_str())) fail(deg.c_str(), "give either " + deg + " or " + rad);
    double v = 0.0;
    if (has(deg.c_str())) {
      number(deg.c_str(), v);
      out_rad = v * kDeg;
    } else if (has(rad.c_str())) {
      number(rad.c_str(), out_rad);
    }
  }

  void finish() const {
    for (const auto& item : j_.items())
      if (!seen_.count(item.key())) throw ConfigError("field '" + join(path_, item.key()) + "': unknown field");
  }

  [[noreturn]] void fail(const char* key, const std::string& what) const {
    throw ConfigError("field '" + path(key) + "': " + what);
  }

  static Vec3 to_vec3(const json& v, const std::string& path) {
    if (!v.is_array() || v.size() != 3) throw ConfigError("field '" + path + "': expected [x, y, z]");
    Vec3 out;
    for (int i = 0; i < 3; ++i) {
      if (!v[static_cast<std::size_t>(i)].is_number()) throw ConfigError("field '" + path + "': expected numbers");
      out[i] = v[static_cast<std::size_t>(i)].get<double>();
    }
    if (!out.allFinite()) throw ConfigError("field '" + path + "': non-finite component");
    return out;
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

std::vector<Vec3> vec3_list(const json& v, const std::string& path) {
  if (!v.is_array()) throw ConfigError("field '" + path + "': expected a list of [x, y, z]");
  std::vector<Vec3> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(Reader::to_vec3(v[i], join(path, std::to_string(i))));
  return out;
}

ObstacleSpec read_obstacle(const json& j, const std::string& path) {
  Reader r(j, path);
  ObstacleSpec o;
  int forms = 0;
  if (r.has("box")) {
    ++forms;
    o.kind = ObstacleSpec::Kind::box;
    Reader b(r.raw("box"), r.path("box"));
    if (!b.has("lo_m") || !b.has("hi_m")) throw ConfigError("field '" + r.path("box") + "': needs lo_m and hi_m");
    b.vec3("lo_m", o.lo);
    b.vec3("hi_m", o.hi);
    b.finish();
  }
  if (r.has("vertices_m")) {
    ++forms;
    o.kind = ObstacleSpec::Kind::vertices;
    o.vertices = vec3_list(r.raw("vertices_m"), r.path("vertices_m"));
  }
  if (r.has("halfspaces")) {
    ++forms;
    o.kind = ObstacleSpec::Kind::halfspaces;
    const json& list = r.raw("halfspaces");
    if (!list.is_array()) throw ConfigError("field '" + r.path("halfspaces") + "': expected a list");
    for (std::size_t i = 0; i < list.size(); ++i) {
      const std::string p = join(r.path("halfspaces"), std::to_string(i));
      Reader h(list[i], p);
      if (!h.has("normal") || !h.has("offset_m")) throw ConfigError("field '" + p + "': needs normal and offset_m");
      Vec3 n;
      double off = 0.0;
      h.vec3("normal", n);
      h.number("offset_m", off);
      h.finish();
      o.normals.push_back(n);
      o.offsets.push_back(off);
    }
  }
  if (forms != 1) throw ConfigError("field '" + path + "': give exactly one of box, vertices_m, halfspaces");
  r.finish();
  return o;
}

ScenarioSpec read_spec(const json& doc) {
  Reader top(doc, "");
  if (!top.has("schema")) throw ConfigError("field 'schema': required (\"" + std::string(kScenarioSchema) + "\")");
  std::string schema;
  top.string("schema", schema);
  if (schema != kScenarioSchema) throw ConfigError("field 'schema': unsupported version '" + schema + "'");

  ScenarioSpec s;
  top.string("name", s.name);
  top.string("note", s.note);
  top.unsigned_integer("seed", s.seed);
  top.number("physics_step_s", s.physics_step_s);
  top.number("max_time_s", s.max_time_s);
  top.boolean("log_scans", s.log_scans);
  if (!top.has("drones_m")) throw ConfigError("field 'drones_m': required");
  s.drones = vec3_list(top.raw("drones_m"), "drones_m");
  if (!top.has("poi_m")) throw ConfigError("field 'poi_m': required");
  top.vec3("poi_m", s.poi);

  if (top.has("ground_station")) {
    Reader g(top.raw("ground_station"), "ground_station");
    g.boolean("enabled", s.ground_station.enabled);
    g.vec3("position_m", s.ground_station.position);
    g.finish();
  }
  if (top.has("scene")) {
    Reader sc(top.raw("scene"), "scene");
    sc.boolean("ground", s.ground);
    if (sc.has("obstacles")) {
      const json& list = sc.raw("obstacles");
      if (!list.is_array()) throw ConfigError("field 'scene.obstacles': expected a list");
      for (std::size_t i = 0; i < list.size(); ++i)
        s.obstacles.push_back(read_obstacle(list[i], "scene.obstacles." + std::to_string(i)));
    }
    sc.finish();
  }
  if (top.has("lidar")) {
    Reader l(top.raw("lidar"), "lidar");
    l.angle("angular_resolution", s.lidar.angular_resolution_rad);
    l.angle("span", s.lidar.span_rad);
    l.number("max_range_m", s.lidar.max_range_m);
    l.number("sample_step_m", s.lidar.sample_step_m);
    l.number("noise_sigma_m", s.lidar.noise_sigma_m);
    l.finish();
  }
  if (top.has("tether")) {
    Reader t(top.raw("tether"), "tether");
    t.number("linear_density_kg_m", s.tether.linear_density_kg_m);
    t.integer("inner_nodes", s.tether.inner_nodes);
    t.number("axial_stiffness_n", s.tether.axial_stiffness_n);
    t.number("damping_ns_m", s.tether.damping_ns_m);
    t.number("gravity_m_s2", s.tether.gravity_m_s2);
    t.finish();
  }
  if (top.has("vehicle")) {
    Reader v(top.raw("vehicle"), "vehicle");
    v.number("mass_kg", s.vehicle.mass_kg);
    v.number("kp_1_s2", s.vehicle.kp_1_s2);
    v.number("kd_1_s", s.vehicle.kd_1_s);
    v.number("max_speed_m_s", s.vehicle.max_speed_m_s);
    v.number("max_thrust_n", s.vehicle.max_thrust_n);
    v.number("gravity_m_s2", s.vehicle.gravity_m_s2);
    v.number("settling_time_s", s.vehicle.settling_time_s);
    v.finish();
  }
  if (top.has("winch")) {
    Reader w(top.raw("winch"), "winch");
    w.number("slack_factor", s.winch.slack_factor);
    w.number("max_rate_m_s", s.winch.max_rate_m_s);
    w.number("min_length_m", s.winch.min_length_m);
    w.finish();
  }
  if (top.has("planner")) {
    Reader p(top.raw("planner"), "planner");
    p.number("goal_offset_m", s.planner.goal_offset_m);
    if (p.has("weights")) {
      const json& w = p.raw("weights");
      if (!w.is_array()) p.fail("weights", "expected a list of numbers");
      for (const auto& x : w) {
        if (!x.is_number()) p.fail("weights", "expected a list of numbers");
        s.planner.weights.push_back(x.get<double>());
      }
    }
    p.number("sampling_period_s", s.planner.sampling_period_s);
    p.number("free_range_m", s.planner.free_range_m);
    p.number("clearance_margin_m", s.planner.clearance_margin_m);
    p.number("confinement_radius_m", s.planner.confinement_radius_m);
    p.number("goal_tolerance_m", s.planner.goal_tolerance_m);
    p.angle("unmask_window", s.planner.unmask_window_rad);
    p.number("unmask_margin_m", s.planner.unmask_margin_m);
    p.number("reference_box_m", s.planner.reference_box_m);
    p.boolean("tether_clearance", s.planner.tether_clearance);
    p.finish();
  }
  if (top.has("catenary_grid")) {
    Reader g(top.raw("catenary_grid"), "catenary_grid");
    g.number("horizontal_max_m", s.table_grid.horizontal_max_m);
    g.number("vertical_max_m", s.table_grid.vertical_max_m);
    g.number("length_max_m", s.table_grid.length_max_m);
    g.number("resolution_m", s.table_grid.resolution_m);
    g.finish();
  }
  if (top.has("relax")) {
    Reader r(top.raw("relax"), "relax");
    r.number("speed_tolerance_m_s", s.relax.speed_tolerance);
    r.number("accel_tolerance_m_s2", s.relax.accel_tolerance);
    r.number("max_time_s", s.relax.max_time_s);
    r.finish();
  }
  top.finish();
  return s;
}

void apply_override(json& doc, const std::string& item) {
  const auto eq = item.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + item + "': expected path=value");
  const std::string path = item.substr(0, eq);
  const std::string text = item.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::parse_error&) {
    value = text;
  }
  json* node = &doc;
  std::stringstream ss(path);
  std::string seg;
  std::vector<std::string> segs;
  while (std::getline(ss, seg, '.')) segs.push_back(seg);
  for (std::size_t i = 0; i < segs.size(); ++i) {
    const std::string& s = segs[i];
    if (node->is_array()) {
      std::size_t idx = 0;
      try {
        idx = std::stoul(s);
      } catch (const std::exception&) {
        throw ConfigError("override '" + path + "': '" + s + "' is not an index");
      }
      if (idx >= node->size()) throw ConfigError("override '" + path + "': index " + s + " out of range");
      node = &(*node)[idx];
    } else {
      if (!node->is_object() && !node->is_null()) throw ConfigError("override '" + path + "': '" + s + "' is not inside an object");
      node = &(*node)[s];
    }
  }
  *node = value;
}

std::string line_context(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

ojson vec(const Vec3& v) { return ojson::array({v.x(), v.y(), v.z()}); }

}  // namespace

ScenarioSpec parse_scenario(const std::string& text, const std::vector<std::string>& overrides) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("scenario is not valid JSON at " + line_context(text, e.byte) + ": " + e.what());
  }
  for (const auto& o : overrides) apply_override(doc, o);
  try {
    ScenarioSpec spec = read_spec(doc);
    spec.validate();
    return spec;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("scenario: ") + e.what());
  }
}

ScenarioSpec load_scenario(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read scenario file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_scenario(ss.str(), overrides);
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string serialize_scenario(const ScenarioSpec& s) {
  ojson doc;
  doc["schema"] = kScenarioSchema;
  doc["name"] = s.name;
  if (!s.note.empty()) doc["note"] = s.note;
  doc["seed"] = s.seed;
  doc["physics_step_s"] = s.physics_step_s;
  doc["max_time_s"] = s.max_time_s;
  doc["log_scans"] = s.log_scans;
  doc["poi_m"] = vec(s.poi);
  doc["drones_m"] = ojson::array();
  for (const auto& p : s.drones) doc["drones_m"].push_back(vec(p));
  doc["ground_station"] = {{"enabled", s.ground_station.enabled}, {"position_m", vec(s.ground_station.position)}};

  ojson obstacles = ojson::array();
  for (const auto& o : s.obstacles) {
    ojson j;
    switch (o.kind) {
      case ObstacleSpec::Kind::box:
        j["box"] = {{"lo_m", vec(o.lo)}, {"hi_m", vec(o.hi)}};
        break;
      case ObstacleSpec::Kind::vertices:
        j["vertices_m"] = ojson::array();
        for (const auto& v : o.vertices) j["vertices_m"].push_back(vec(v));
        break;
      case ObstacleSpec::Kind::halfspaces:
        j["halfspaces"] = ojson::array();
        for (std::size_t i = 0; i < o.normals.size(); ++i)
          j["halfspaces"].push_back({{"normal", vec(o.normals[i])}, {"offset_m", o.offsets[i]}});
        break;
    }
    obstacles.push_back(j);
  }
  doc["scene"] = {{"ground", s.ground}, {"obstacles", obstacles}};

  doc["lidar"] = {{"angular_resolution_rad", s.lidar.angular_resolution_rad},
                  {"span_rad", s.lidar.span_rad},
                  {"max_range_m", s.lidar.max_range_m},
                  {"sample_step_m", s.lidar.sample_step_m},
                  {"noise_sigma_m", s.lidar.noise_sigma_m}};
  doc["tether"] = {{"linear_density_kg_m", s.tether.linear_density_kg_m},
                   {"inner_nodes", s.tether.inner_nodes},
                   {"axial_stiffness_n", s.tether.axial_stiffness_n},
                   {"damping_ns_m", s.tether.damping_ns_m},
                   {"gravity_m_s2", s.tether.gravity_m_s2}};
  doc["vehicle"] = {{"mass_kg", s.vehicle.mass_kg},
                    {"kp_1_s2", s.vehicle.kp_1_s2},
                    {"kd_1_s", s.vehicle.kd_1_s},
                    {"max_speed_m_s", s.vehicle.max_speed_m_s},
                    {"max_thrust_n", s.vehicle.max_thrust_n},
                    {"gravity_m_s2", s.vehicle.gravity_m_s2},
                    {"settling_time_s", s.vehicle.settling_time_s}};
  doc["winch"] = {{"slack_factor", s.winch.slack_factor},
                  {"max_rate_m_s", s.winch.max_rate_m_s},
                  {"min_length_m", s.winch.min_length_m}};
  ojson planner;
  planner["goal_offset_m"] = s.planner.goal_offset_m;
  if (!s.planner.weights.empty()) planner["weights"] = s.planner.weights;
  planner["sampling_period_s"] = s.planner.sampling_period_s;
  planner["free_range_m"] = s.planner.free_range_m;
  planner["clearance_margin_m"] = s.planner.clearance_margin_m;
  planner["confinement_radius_m"] = s.planner.confinement_radius_m;
  planner["goal_tolerance_m"] = s.planner.goal_tolerance_m;
  planner["unmask_window_rad"] = s.planner.unmask_window_rad;
  planner["unmask_margin_m"] = s.planner.unmask_margin_m;
  planner["reference_box_m"] = s.planner.reference_box_m;
  planner["tether_clearance"] = s.planner.tether_clearance;
  doc["planner"] = planner;
  doc["catenary_grid"] = {{"horizontal_max_m", s.table_grid.horizontal_max_m},
                          {"vertical_max_m", s.table_grid.vertical_max_m},
                          {"length_max_m", s.table_grid.length_max_m},
                          {"resolution_m", s.table_grid.resolution_m}};
  doc["relax"] = {{"speed_tolerance_m_s", s.relax.speed_tolerance},
                  {"accel_tolerance_m_s2", s.relax.accel_tolerance},
                  {"max_time_s", s.relax.max_time_s}};
  return doc.dump(2) + "\n";
}

}  // namespace stemnav
