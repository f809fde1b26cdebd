#include "pumpshape/export.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace pumpshape::io {
namespace {

std::ofstream open_out(const fs::path& path, std::ios::openmode mode = std::ios::out) {
  std::ofstream out(path, mode | std::ios::trunc);
  if (!out) throw ConfigError("cannot open for writing: " + path.string());
  return out;
}

std::uint32_t to_little(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::big) {
    v = ((v & 0xFF) << 24) | ((v & 0xFF00) << 8) | ((v >> 8) & 0xFF00) | (v >> 24);
  }
  return v;
}

}  // namespace

void write_f32(const fs::path& path, const Grid<double>& grid) {
  std::vector<std::uint32_t> buf(grid.count());
  for (std::size_t i = 0; i < grid.count(); ++i) {
    buf[i] = to_little(std::bit_cast<std::uint32_t>(static_cast<float>(grid[i])));
  }
  auto out = open_out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(std::uint32_t)));
}

Grid<double> read_f32(const fs::path& path, std::size_t n) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open: " + path.string());
  std::vector<std::uint32_t> buf(n * n);
  in.read(reinterpret_cast<char*>(buf.data()),
          static_cast<std::streamsize>(buf.size() * sizeof(std::uint32_t)));
  if (in.gcount() != static_cast<std::streamsize>(buf.size() * sizeof(std::uint32_t))) {
    throw ConfigError("short float32 grid: " + path.string());
  }
  Grid<double> g(n);
  for (std::size_t i = 0; i < g.count(); ++i) g[i] = std::bit_cast<float>(to_little(buf[i]));
  return g;
}

void write_pgm(const fs::path& path, const Grid<double>& grid) {
  const double peak = grid.empty() ? 0.0 : *std::max_element(grid.values().begin(), grid.values().end());
  auto out = open_out(path, std::ios::binary);
  out << "P5\n" << grid.size() << ' ' << grid.size() << "\n255\n";
  std::vector<unsigned char> px(grid.count());
  for (std::size_t i = 0; i < grid.count(); ++i) {
    const double v = peak > 0.0 ? grid[i] / peak : 0.0;
    px[i] = static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
  }
  out.write(reinterpret_cast<const char*>(px.data()), static_cast<std::streamsize>(px.size()));
}

void write_json(const fs::path& path, const json& j) {
  auto out = open_out(path);
  out << j.dump(2) << '\n';
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open: " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("invalid JSON in " + path.string() + ": " + e.what());
  }
}

json to_json(const TurbulenceParams& p) {
  return {{"cn2", p.cn2},
          {"z", p.link_length},
          {"lambda", p.wavelength},
          {"l_o", p.outer_scale},
          {"l_i", p.inner_scale},
          {"scale_down", p.scale_down}};
}

TurbulenceParams turbulence_from_json(const json& j, TurbulenceParams d) {
  d.cn2 = j.value("cn2", d.cn2);
  d.link_length = j.value("z", d.link_length);
  d.wavelength = j.value("lambda", d.wavelength);
  d.outer_scale = j.value("l_o", d.outer_scale);
  d.inner_scale = j.value("l_i", d.inner_scale);
  d.scale_down = j.value("scale_down", d.scale_down);
  return d;
}

json screen_sidecar(const PhaseScreen& s) {
  const auto& p = s.recipe.params;
  json j = {{"n", s.size()},
            {"dx", s.dx},
            {"seed", s.recipe.seed},
            {"cn2", p.cn2},
            {"z", p.link_length},
            {"lambda", p.wavelength},
            {"l_o", p.outer_scale},
            {"l_i", p.inner_scale},
            {"scale_down", p.scale_down},
            {"origin_row", s.origin_row},
            {"origin_col", s.origin_col},
            {"warnings", s.recipe.warnings}};
  std::ostringstream note;
  note << "transverse lengths scaled down by " << p.scale_down
       << "; phase in radians at the pump wavelength, unwrapped";
  j["scaling_note"] = note.str();
  return j;
}

std::vector<std::string> export_screen(const fs::path& dir, const std::string& stem,
                                       const PhaseScreen& screen) {
  write_f32(dir / (stem + ".f32"), screen.phase);
  write_json(dir / (stem + ".json"), screen_sidecar(screen));
  return {stem + ".f32", stem + ".json"};
}

std::vector<std::string> export_map(const fs::path& dir, const std::string& stem,
                                    const FarFieldMap& map, const json& extra) {
  json side = {{"n", map.size()},
               {"pitch", map.pitch},
               {"focal_length", map.focal_length},
               {"wavelength", map.wavelength},
               {"center_x", map.center_x},
               {"center_y", map.center_y}};
  side.update(extra);
  write_f32(dir / (stem + ".f32"), map.intensity);
  write_json(dir / (stem + ".json"), side);
  write_pgm(dir / (stem + ".pgm"), map.intensity);
  return {stem + ".f32", stem + ".json", stem + ".pgm"};
}

std::vector<std::string> export_counts(const fs::path& dir, const std::string& stem,
                                       const CountMap& map, const json& extra) {
  {
    auto out = open_out(dir / (stem + ".csv"));
    out << "row,col,x,y,counts\n" << std::setprecision(10);
    for (std::size_t r = 0; r < map.size(); ++r) {
      for (std::size_t c = 0; c < map.size(); ++c) {
        out << r << ',' << c << ',' << map.x(c) << ',' << map.y(r) << ',' << map.counts(r, c) << '\n';
      }
    }
  }
  json side = {{"n", map.size()},
               {"step", map.step},
               {"center_x", map.center_x},
               {"center_y", map.center_y},
               {"exposure", map.exposure},
               {"seed", map.seed},
               {"accidental_corrected", map.accidental_corrected},
               {"accidental_rate_subtracted", map.accidental_rate}};
  side.update(extra);
  write_f32(dir / (stem + ".f32"), map.counts);
  write_json(dir / (stem + ".json"), side);
  write_pgm(dir / (stem + ".pgm"), map.counts);
  return {stem + ".csv", stem + ".f32", stem + ".json", stem + ".pgm"};
}

std::vector<std::string> export_trace(const fs::path& dir, const std::string& stem,
                                      const std::vector<TraceEntry>& trace) {
  auto out = open_out(dir / (stem + ".csv"));
  out << "measurement,iteration,probe_phase,value\n" << std::setprecision(12);
  for (const auto& t : trace) {
    out << t.measurement << ',' << t.iteration << ',' << t.probe_phase << ',' << t.value << '\n';
  }
  return {stem + ".csv"};
}

}  // namespace pumpshape::io
