#include "stemnav/cli.hpp"

#include <json.hpp>

#include <atomic>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

namespace stemnav {

namespace fs = std::filesystem;

int exit_code(Outcome outcome) {
  switch (outcome) {
    case Outcome::success: return kExitSuccess;
    case Outcome::collision: return kExitCollision;
    case Outcome::timeout: return kExitTimeout;
  }
  return kExitInternal;
}

ScenarioSpec load_with_options(const fs::path& path, const std::vector<std::string>& overrides,
                               std::optional<std::uint64_t> seed) {
  std::vector<std::string> all = overrides;
  if (seed) all.push_back("seed=" + std::to_string(*seed));
  return load_scenario(path, all);
}

std::string format_summary(const RunLog& log) {
  const RunSummary& s = log.summary;
  std::ostringstream o;
  o << std::setprecision(4);
  o << "scenario  " << log.scenario << " (seed " << log.seed << ")\n";
  o << "outcome   " << to_string(s.outcome);
  if (s.time_to_goal_s) o << " at t = " << *s.time_to_goal_s << " s";
  if (!s.collision_detail.empty()) o << ": " << s.collision_detail;
  o << '\n';
  o << "records   " << s.records << ", hold " << s.hold_steps << ", fallback " << s.fallback_steps
    << ", plane switches " << s.plane_switches << '\n';
  o << "clearance min drone " << s.min_drone_distance_m << " m, min tether node " << s.min_tether_distance_m
    << " m\n";
  o << "leader limited by follower: " << (s.leader_limited_by_follower ? "yes" : "no")
    << ", clearance rows active on " << s.clearance_active_steps << " steps\n";
  const auto& inv = s.invariants;
  o << "checks    refs inside obstacles " << inv.references_inside_obstacles << ", residual "
    << inv.residual_violations << ", plane " << inv.plane_fixing_violations << ", line of sight "
    << inv.line_of_sight_violations << ", tether clearance " << inv.clearance_violations << '\n';
  return o.str();
}

namespace {

std::optional<CatenaryTable> table_for(const ScenarioSpec& spec, const fs::path& cache, std::ostream& out,
                                       int verbosity) {
  bool hit = false;
  auto table = prepare_table(spec, cache, &hit);
  if (table && verbosity >= 0)
    out << "catenary table " << catenary_cache_path(cache, table->hash()).string() << (hit ? " (cached)" : " (built)")
        << '\n';
  return table;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << text;
  if (!f) throw std::runtime_error("cannot write " + path.string());
}

void print_steps(const RunLog& log, std::ostream& out) {
  for (const auto& r : log.records) {
    out << std::fixed << std::setprecision(2) << "t=" << r.time_s << " leader=(" << r.positions[0].x() << ", "
        << r.positions[0].y() << ", " << r.positions[0].z() << ") planes=";
    for (const auto& d : r.plan.drones) out << (d.plane == PlaneKind::horizontal ? 'H' : 'V');
    if (!r.plan.fallbacks.empty()) {
      out << " fallback=";
      for (const auto& f : r.plan.fallbacks) out << f << ';';
    }
    out << '\n';
  }
  out.unsetf(std::ios::floatfield);
}

}  // namespace

int cmd_run(const RunOptions& options, std::ostream& out, std::ostream& err) {
  try {
    const ScenarioSpec spec = load_with_options(options.scenario, options.overrides, options.seed);
    spec.validate();
    const auto table = table_for(spec, options.table_cache, out, options.verbosity);
    const RunLog log = run(spec, table ? &*table : nullptr);
    fs::create_directories(options.output_dir);
    write_text(options.output_dir / (spec.name + ".jsonl"), log.to_jsonl());
    const std::string summary = format_summary(log);
    write_text(options.output_dir / (spec.name + ".summary.txt"), summary);
    if (options.verbosity > 0) print_steps(log, out);
    if (options.verbosity >= 0) out << summary;
    return exit_code(log.summary.outcome);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kExitInternal;
  }
}

int cmd_build_table(const BuildTableOptions& options, std::ostream& out, std::ostream& err) {
  try {
    ScenarioSpec spec;
    if (options.scenario) {
      spec = load_scenario(*options.scenario, options.overrides);
    } else if (!options.overrides.empty()) {
      throw ConfigError("overrides need a scenario file");
    }
    spec.tether.validate();
    spec.table_grid.validate();
    bool hit = false;
    const CatenaryTable table =
        load_or_build_catenary_table(spec.tether, spec.table_grid, spec.relax, options.output_dir, &hit);
    const fs::path path = catenary_cache_path(options.output_dir, table.hash());
    out << (hit ? "cache hit, skipped: " : "built: ") << path.string() << '\n';
    if (table.invalid_count() == 0) return kExitSuccess;
    const auto& g = spec.table_grid;
    err << table.invalid_count() << " nodes failed to relax (horizontal, vertical, length in m):\n";
    for (int i = 0; i < g.horizontal_nodes(); ++i)
      for (int j = 0; j < g.vertical_nodes(); ++j)
        for (int k = 0; k < g.length_nodes(); ++k)
          if (!table.node_valid(i, j, k))
            err << "  " << i * g.resolution_m << ' ' << j * g.resolution_m << ' ' << k * g.resolution_m << '\n';
    return kExitInternal;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kExitInternal;
  }
}

int cmd_replay_check(const ReplayOptions& options, std::ostream& out, std::ostream& err) {
  std::vector<std::string> stored;
  {
    std::ifstream f(options.log, std::ios::binary);
    if (!f) {
      err << "cannot read " << options.log.string() << '\n';
      return kExitConfig;
    }
    std::stringstream ss;
    ss << f.rdbuf();
    const std::string text = ss.str();
    std::size_t start = 0;
    while (start < text.size()) {
      const std::size_t end = text.find('\n', start);
      if (end == std::string::npos) {
        stored.push_back(text.substr(start));
        break;
      }
      stored.push_back(text.substr(start, end - start));
      start = end + 1;
    }
    if (!text.empty() && text.back() != '\n') stored.back() += "<no newline>";
  }

  std::string fresh_text;
  try {
    const ScenarioSpec spec = load_with_options(options.scenario, options.overrides, options.seed);
    spec.validate();
    const auto table = table_for(spec, options.table_cache, out, -1);
    fresh_text = run(spec, table ? &*table : nullptr).to_jsonl();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kExitInternal;
  }
  std::vector<std::string> fresh;
  std::istringstream fs_(fresh_text);
  for (std::string line; std::getline(fs_, line);) fresh.push_back(line);

  // Line 0 is the header, lines 1..n the records, the last one the summary.
  auto describe = [&](std::size_t line) {
    if (line == 0) return std::string("header");
    if (line + 1 >= fresh.size()) return std::string("summary");
    return "record " + std::to_string(line - 1);
  };
  const std::size_t common = std::min(stored.size(), fresh.size());
  for (std::size_t i = 0; i < common; ++i) {
    if (stored[i] != fresh[i]) {
      err << "mismatch at " << describe(i) << " (line " << i + 1 << ")";
      if (i == 0) {
        // header differs (seed, settings); still name the first differing record
        std::size_t k = 1;
        while (k < common && stored[k] == fresh[k]) ++k;
        if (k < common) err << "; first differing " << describe(k) << " (line " << k + 1 << ")";
      }
      err << '\n';
      return kExitMismatch;
    }
  }
  if (stored.size() != fresh.size()) {
    err << "structural mismatch: stored log has " << stored.size() << " lines, replay has " << fresh.size()
        << "; first missing: " << describe(common) << '\n';
    return kExitMismatch;
  }
  out << "replay identical: " << fresh.size() - 2 << " records\n";
  return kExitSuccess;
}

int cmd_batch(const BatchOptions& options, std::ostream& out, std::ostream& err) {
  struct Entry {
    std::string name;
    ScenarioSpec spec;
  };
  std::vector<Entry> entries;
  try {
    std::ifstream f(options.manifest);
    if (!f) throw ConfigError("cannot read " + options.manifest.string());
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(f);
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError(options.manifest.string() + ": " + e.what());
    }
    if (!doc.is_object() || !doc.contains("runs") || !doc["runs"].is_array())
      throw ConfigError("manifest: expected {\"runs\": [...]}");
    const fs::path base = options.manifest.parent_path();
    for (std::size_t i = 0; i < doc["runs"].size(); ++i) {
      const auto& r = doc["runs"][i];
      const std::string where = "runs." + std::to_string(i);
      if (!r.is_object() || !r.contains("scenario") || !r["scenario"].is_string())
        throw ConfigError(where + ": missing scenario");
      for (const auto& [key, _] : r.items())
        if (key != "scenario" && key != "seed" && key != "set" && key != "name")
          throw ConfigError(where + "." + key + ": unknown field");
      std::vector<std::string> overrides;
      if (r.contains("set")) overrides = r["set"].get<std::vector<std::string>>();
      std::optional<std::uint64_t> seed;
      if (r.contains("seed")) seed = r["seed"].get<std::uint64_t>();
      fs::path path = r["scenario"].get<std::string>();
      if (path.is_relative()) path = base / path;
      Entry e;
      try {
        e.spec = load_with_options(path, overrides, seed);
        e.spec.validate();
      } catch (const ConfigError& ce) {
        throw ConfigError(where + ": " + ce.what());
      }
      e.name = std::to_string(i) + "_" + (r.contains("name") ? r["name"].get<std::string>() : e.spec.name);
      entries.push_back(std::move(e));
    }
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const nlohmann::json::exception& e) {
    err << "config error: manifest: " << e.what() << '\n';
    return kExitConfig;
  }

  // Tables are prepared up front, one per distinct key, so workers never race
  // on the cache directory.
  std::map<std::uint64_t, CatenaryTable> tables;
  std::vector<const CatenaryTable*> table_of(entries.size(), nullptr);
  try {
    for (std::size_t i = 0; i < entries.size(); ++i) {
      const auto& s = entries[i].spec;
      if (!needs_table(s)) continue;
      const auto key = CatenaryTable::key(s.tether, s.table_grid, s.relax);
      auto it = tables.find(key);
      if (it == tables.end()) it = tables.emplace(key, *table_for(s, options.table_cache, out, options.verbosity)).first;
      table_of[i] = &it->second;
    }
    fs::create_directories(options.output_dir);
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kExitInternal;
  }

  std::vector<int> codes(entries.size(), kExitInternal);
  std::vector<std::string> messages(entries.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < entries.size(); i = next++) {
      try {
        const RunLog log = run(entries[i].spec, table_of[i]);
        write_text(options.output_dir / (entries[i].name + ".jsonl"), log.to_jsonl());
        codes[i] = exit_code(log.summary.outcome);
        messages[i] = to_string(log.summary.outcome);
      } catch (const ConfigError& e) {
        codes[i] = kExitConfig;
        messages[i] = std::string("config error: ") + e.what();
      } catch (const std::exception& e) {
        codes[i] = kExitInternal;
        messages[i] = std::string("internal error: ") + e.what();
      }
    }
  };
  unsigned jobs = options.jobs ? options.jobs : std::max(1u, std::thread::hardware_concurrency());
  jobs = static_cast<unsigned>(std::min<std::size_t>(jobs, std::max<std::size_t>(1, entries.size())));
  std::vector<std::thread> pool;
  for (unsigned j = 0; j < jobs; ++j) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  for (std::size_t i = 0; i < entries.size(); ++i)
    if (options.verbosity >= 0) out << entries[i].name << ": " << messages[i] << '\n';
  if (entries.empty()) return kExitSuccess;
  for (int c : codes)
    if (c != codes.front()) return kExitMismatch;
  return codes.front();
}

}  // namespace stemnav
