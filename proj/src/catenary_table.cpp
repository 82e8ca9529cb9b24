#include "stemnav/catenary_table.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace stemnav {

namespace {

int node_count(double max, double res) { return static_cast<int>(std::floor(max / res + 1e-9)) + 1; }

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

void CatenaryGrid::validate() const {
  if (!(resolution_m > 0.0)) throw std::invalid_argument("catenary grid resolution must be positive");
  if (!(horizontal_max_m > 0.0) || !(vertical_max_m >= 0.0) || !(length_max_m > 0.0))
    throw std::invalid_argument("catenary grid ranges must be positive");
}

int CatenaryGrid::horizontal_nodes() const { return node_count(horizontal_max_m, resolution_m); }
int CatenaryGrid::vertical_nodes() const { return node_count(vertical_max_m, resolution_m); }
int CatenaryGrid::length_nodes() const { return node_count(length_max_m, resolution_m); }
std::size_t CatenaryGrid::cell_count() const {
  return static_cast<std::size_t>(horizontal_nodes()) * static_cast<std::size_t>(vertical_nodes()) *
         static_cast<std::size_t>(length_nodes());
}

CatenaryTable::CatenaryTable(TetherParams params, CatenaryGrid grid, RelaxOptions relax, std::vector<double> sag,
                             std::vector<std::uint8_t> valid)
    : params_(params), grid_(grid), relax_(relax), sag_(std::move(sag)), valid_(std::move(valid)) {
  if (sag_.size() != grid_.cell_count() || valid_.size() != grid_.cell_count())
    throw std::invalid_argument("catenary table size does not match its grid");
  hash_ = key(params_, grid_, relax_);
}

std::size_t CatenaryTable::index(int i, int j, int k) const {
  return (static_cast<std::size_t>(i) * static_cast<std::size_t>(grid_.vertical_nodes()) +
          static_cast<std::size_t>(j)) *
             static_cast<std::size_t>(grid_.length_nodes()) +
         static_cast<std::size_t>(k);
}

CatenaryTable::Cell CatenaryTable::locate(double horizontal, double vertical, double length) const {
  const double res = grid_.resolution_m;
  auto axis = [&](double x, int nodes, const char* name, int& i0, double& f) {
    const double top = (nodes - 1) * res;
    if (!(x >= -1e-12) || x > top + 1e-9)
      throw TableRangeError(std::string("catenary table query outside grid: ") + name + " = " +
                            std::to_string(x));
    const double u = std::clamp(x / res, 0.0, static_cast<double>(nodes - 1));
    i0 = std::min(static_cast<int>(std::floor(u)), std::max(0, nodes - 2));
    f = nodes > 1 ? u - i0 : 0.0;
  };
  Cell c{};
  axis(horizontal, grid_.horizontal_nodes(), "horizontal", c.i0, c.fi);
  axis(vertical, grid_.vertical_nodes(), "vertical", c.j0, c.fj);
  axis(length, grid_.length_nodes(), "length", c.k0, c.fk);
  return c;
}

double CatenaryTable::sag(double horizontal, double vertical, double length) const {
  const Cell c = locate(horizontal, vertical, length);
  const int ni = grid_.horizontal_nodes() > 1 ? 1 : 0;
  const int nj = grid_.vertical_nodes() > 1 ? 1 : 0;
  const int nk = grid_.length_nodes() > 1 ? 1 : 0;
  double acc = 0.0;
  for (int di = 0; di <= ni; ++di)
    for (int dj = 0; dj <= nj; ++dj)
      for (int dk = 0; dk <= nk; ++dk) {
        const double w = (di ? c.fi : 1.0 - c.fi) * (dj ? c.fj : 1.0 - c.fj) * (dk ? c.fk : 1.0 - c.fk);
        if (w == 0.0) continue;
        const std::size_t idx = index(c.i0 + di, c.j0 + dj, c.k0 + dk);
        if (!valid_[idx]) throw TableRangeError("catenary table query touches an invalid node");
        acc += w * sag_[idx];
      }
  return std::max(0.0, acc);
}

double CatenaryTable::cell_spread(double horizontal, double vertical, double length) const {
  const Cell c = locate(horizontal, vertical, length);
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (int di = 0; di <= 1; ++di)
    for (int dj = 0; dj <= 1; ++dj)
      for (int dk = 0; dk <= 1; ++dk) {
        const int i = std::min(c.i0 + di, grid_.horizontal_nodes() - 1);
        const int j = std::min(c.j0 + dj, grid_.vertical_nodes() - 1);
        const int k = std::min(c.k0 + dk, grid_.length_nodes() - 1);
        lo = std::min(lo, node_sag(i, j, k));
        hi = std::max(hi, node_sag(i, j, k));
      }
  return hi - lo;
}

double CatenaryTable::lowest_point(const Vec3& a, const Vec3& b, double length) const {
  const double h = (a.head<2>() - b.head<2>()).norm();
  const double v = std::abs(a.z() - b.z());
  return std::min(a.z(), b.z()) - sag(h, v, length);
}

std::size_t CatenaryTable::invalid_count() const {
  return static_cast<std::size_t>(std::count(valid_.begin(), valid_.end(), std::uint8_t{0}));
}

std::uint64_t CatenaryTable::key(const TetherParams& p, const CatenaryGrid& g, const RelaxOptions& r) {
  std::ostringstream s;
  s.precision(17);
  s << "stemnav.catenary/1|" << p.linear_density_kg_m << '|' << p.inner_nodes << '|' << p.axial_stiffness_n << '|'
    << p.damping_ns_m << '|' << p.gravity_m_s2 << '|' << g.horizontal_max_m << '|' << g.vertical_max_m << '|'
    << g.length_max_m << '|' << g.resolution_m << '|' << r.speed_tolerance << '|' << r.accel_tolerance << '|'
    << r.max_time_s;
  return fnv1a(s.str());
}

void CatenaryTable::save(const std::filesystem::path& path) const {
  nlohmann::json j;
  j["schema"] = "stemnav.catenary/1";
  j["hash"] = hex(hash_);
  j["tether"] = {{"linear_density_kg_m", params_.linear_density_kg_m},
                 {"inner_nodes", params_.inner_nodes},
                 {"axial_stiffness_n", params_.axial_stiffness_n},
                 {"damping_ns_m", params_.damping_ns_m},
                 {"gravity_m_s2", params_.gravity_m_s2}};
  j["grid"] = {{"horizontal_max_m", grid_.horizontal_max_m},
               {"vertical_max_m", grid_.vertical_max_m},
               {"length_max_m", grid_.length_max_m},
               {"resolution_m", grid_.resolution_m}};
  j["relax"] = {{"speed_tolerance", relax_.speed_tolerance},
                {"accel_tolerance", relax_.accel_tolerance},
                {"max_time_s", relax_.max_time_s}};
  j["sag_m"] = sag_;
  j["valid"] = valid_;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw std::runtime_error("cannot write catenary table: " + tmp);
    out << j.dump() << '\n';
  }
  std::filesystem::rename(tmp, path);
}

CatenaryTable CatenaryTable::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read catenary table: " + path.string());
  try {
    const auto j = nlohmann::json::parse(in);
    if (j.at("schema") != "stemnav.catenary/1") throw std::runtime_error("unknown catenary table schema");
    TetherParams p;
    const auto& t = j.at("tether");
    p.linear_density_kg_m = t.at("linear_density_kg_m");
    p.inner_nodes = t.at("inner_nodes");
    p.axial_stiffness_n = t.at("axial_stiffness_n");
    p.damping_ns_m = t.at("damping_ns_m");
    p.gravity_m_s2 = t.at("gravity_m_s2");
    CatenaryGrid g;
    const auto& gj = j.at("grid");
    g.horizontal_max_m = gj.at("horizontal_max_m");
    g.vertical_max_m = gj.at("vertical_max_m");
    g.length_max_m = gj.at("length_max_m");
    g.resolution_m = gj.at("resolution_m");
    RelaxOptions r;
    const auto& rj = j.at("relax");
    r.speed_tolerance = rj.at("speed_tolerance");
    r.accel_tolerance = rj.at("accel_tolerance");
    r.max_time_s = rj.at("max_time_s");
    CatenaryTable table(p, g, r, j.at("sag_m").get<std::vector<double>>(),
                        j.at("valid").get<std::vector<std::uint8_t>>());
    if (j.at("hash").get<std::string>() != hex(table.hash()))
      throw std::runtime_error("catenary table hash does not match its parameters");
    return table;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("malformed catenary table " + path.string() + ": " + e.what());
  }
}

double relaxed_sag(double horizontal, double vertical, double length, const TetherParams& params,
                   const RelaxOptions& relax) {
  const Vec3 lower = Vec3::Zero();
  const Vec3 upper(horizontal, 0.0, vertical);
  if (length <= 0.0) return 0.0;
  const auto shape = relax_to_steady_state(lower, upper, length, params, relax);
  double z = 0.0;
  for (const auto& p : shape.positions) z = std::min(z, p.z());
  return std::max(0.0, -z);
}

namespace {

// One (horizontal, vertical) column of the grid.
void build_column(const TetherParams& params, const CatenaryGrid& grid, const RelaxOptions& relax, int i, int j,
                  double* sag, std::uint8_t* valid) {
  const double res = grid.resolution_m;
  const double h = i * res, v = j * res;
  const double chord = std::hypot(h, v);
  double taut = 0.0;
  bool taut_ok = true;
  bool taut_done = false;
  for (int k = 0; k < grid.length_nodes(); ++k) {
    const double length = k * res;
    try {
      if (length < chord) {
        if (!taut_done) {
          taut_done = true;
          try {
            taut = relaxed_sag(h, v, chord, params, relax);
          } catch (const RelaxationError&) {
            taut_ok = false;
          }
        }
        sag[k] = taut;
        valid[k] = taut_ok ? 1 : 0;
      } else {
        sag[k] = relaxed_sag(h, v, length, params, relax);
        valid[k] = 1;
      }
    } catch (const RelaxationError&) {
      sag[k] = 0.0;
      valid[k] = 0;
    }
  }
}

CatenaryTable build(const TetherParams& params, const CatenaryGrid& grid, const RelaxOptions& relax,
                    bool parallel) {
  params.validate();
  grid.validate();
  std::vector<double> sag(grid.cell_count(), 0.0);
  std::vector<std::uint8_t> valid(grid.cell_count(), 0);
  const int ni = grid.horizontal_nodes(), nj = grid.vertical_nodes();
  const auto nk = static_cast<std::size_t>(grid.length_nodes());
  const long columns = static_cast<long>(ni) * nj;
  (void)parallel;
#if defined(STEMNAV_HAVE_OPENMP)
#pragma omp parallel for schedule(dynamic, 1) if (parallel)
#endif
  for (long c = 0; c < columns; ++c) {
    const int i = static_cast<int>(c / nj), j = static_cast<int>(c % nj);
    const std::size_t base = static_cast<std::size_t>(c) * nk;
    build_column(params, grid, relax, i, j, sag.data() + base, valid.data() + base);
  }
  return CatenaryTable(params, grid, relax, std::move(sag), std::move(valid));
}

}  // namespace

CatenaryTable build_catenary_table(const TetherParams& params, const CatenaryGrid& grid, const RelaxOptions& relax) {
  return build(params, grid, relax, true);
}

CatenaryTable build_catenary_table_serial(const TetherParams& params, const CatenaryGrid& grid,
                                          const RelaxOptions& relax) {
  return build(params, grid, relax, false);
}

std::filesystem::path catenary_cache_path(const std::filesystem::path& dir, std::uint64_t key) {
  return dir / ("catenary_" + hex(key) + ".json");
}

CatenaryTable load_or_build_catenary_table(const TetherParams& params, const CatenaryGrid& grid,
                                           const RelaxOptions& relax, const std::filesystem::path& dir,
                                           bool* cache_hit) {
  const auto k = CatenaryTable::key(params, grid, relax);
  const auto path = catenary_cache_path(dir, k);
  if (std::filesystem::exists(path)) {
    try {
      auto table = CatenaryTable::load(path);
      if (table.hash() == k) {
        if (cache_hit) *cache_hit = true;
        return table;
      }
    } catch (const std::exception&) {
      // stale or corrupt cache entry: rebuild below
    }
  }
  if (cache_hit) *cache_hit = false;
  auto table = build_catenary_table(params, grid, relax);
  table.save(path);
  return table;
}

}  // namespace stemnav
