#pragma once

// On-disk formats: little-endian float32 row-major grids with a JSON sidecar,
// 8-bit PGM previews, and CSV for count maps and optimisation traces.

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "pumpshape/detection.hpp"
#include "pumpshape/shaper.hpp"
#include "pumpshape/turbulence.hpp"

namespace pumpshape::io {

namespace fs = std::filesystem;
using nlohmann::json;

void write_f32(const fs::path& path, const Grid<double>& grid);
Grid<double> read_f32(const fs::path& path, std::size_t n);

/// P5 graymap, linearly scaled so the maximum maps to 255 (negatives clip to 0).
void write_pgm(const fs::path& path, const Grid<double>& grid);

void write_json(const fs::path& path, const json& j);
json read_json(const fs::path& path);

json to_json(const TurbulenceParams& p);
TurbulenceParams turbulence_from_json(const json& j, TurbulenceParams defaults = {});

/// Sidecar carrying {n, dx, seed, cn2, z, lambda, l_o, l_i, scaling_note, ...}.
json screen_sidecar(const PhaseScreen& s);

/// <stem>.f32 + <stem>.json. Returns the file names written.
std::vector<std::string> export_screen(const fs::path& dir, const std::string& stem,
                                       const PhaseScreen& screen);
/// <stem>.f32 + <stem>.json + <stem>.pgm; `extra` is merged into the sidecar.
std::vector<std::string> export_map(const fs::path& dir, const std::string& stem,
                                    const FarFieldMap& map, const json& extra = json::object());
/// <stem>.csv (row,col,x,y,counts) + <stem>.f32 + <stem>.json + <stem>.pgm.
std::vector<std::string> export_counts(const fs::path& dir, const std::string& stem,
                                       const CountMap& map, const json& extra = json::object());
/// CSV: measurement,iteration,probe_phase,value
std::vector<std::string> export_trace(const fs::path& dir, const std::string& stem,
                                      const std::vector<TraceEntry>& trace);

}  // namespace pumpshape::io
