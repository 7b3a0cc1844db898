#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "windtree/coupling.hpp"
#include "windtree/environment.hpp"
#include "windtree/flight.hpp"

namespace windtree {

using Json = nlohmann::ordered_json;

// Shortest round-trip decimal form; artifacts must not depend on locale.
std::string format_double(double x);

struct TraceRow {
  double t = 0.0;
  Vec3 u{};
  Vec3 x{};
  std::optional<Vec3> beta;
  std::string scatterer_id;
};

std::vector<TraceRow> trace_of(const FlightPath& path);
std::vector<TraceRow> trace_of(const ProcessRecord& process, double horizon);
std::vector<TraceRow> trace_of(const DirectTrajectory& traj);

// Columns t,ux,uy,uz,x,y,z,bx,by,bz (+ scatterer_id for direct runs).
void write_trace_csv(std::ostream& os, const std::vector<TraceRow>& rows, bool with_scatterer_id);

// One JSON object per event: {t, kind, process, situation, cls}.
void write_events_jsonl(std::ostream& os, const CouplingEventLog& log);

Json trace_header(const ProbabilityVector& p, double r, std::uint64_t seed, double horizon,
                  const std::string& process, IntensityMode mode);

std::uint64_t fnv1a64(const std::string& bytes);

void write_text(const std::filesystem::path& path, const std::string& text);
void write_json(const std::filesystem::path& path, const Json& j);

struct PlotSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

// Minimal static SVG line plot; log axes when requested.
std::string svg_plot(const std::vector<PlotSeries>& series, const std::string& title, const std::string& xlabel,
                     const std::string& ylabel, bool log_x, bool log_y);

}  // namespace windtree
