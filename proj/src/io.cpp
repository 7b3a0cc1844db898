#include "windtree/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>

#include <fmt/format.h>

#include "windtree/errors.hpp"

namespace windtree {

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

std::vector<TraceRow> trace_of(const FlightPath& path) {
  std::vector<TraceRow> rows;
  for (std::size_t k = 0; k <= path.collisions(); ++k) {
    rows.push_back({path.tau[k], path.u[k + 1].vec(), path.Y[k], path.beta[k].offset, {}});
  }
  rows.push_back({path.horizon, path.u.back().vec(), path.endpoint(), std::nullopt, {}});
  return rows;
}

std::vector<TraceRow> trace_of(const ProcessRecord& process, double horizon) {
  std::vector<TraceRow> rows;
  std::size_t a = 0;
  const auto& nodes = process.path.nodes();
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    TraceRow row{nodes[i].t, nodes[i].vel.vec(), nodes[i].pos, std::nullopt, {}};
    if (i == 0 && process.scatterers.front()) row.beta = *process.scatterers.front() - nodes[i].pos;
    while (a < process.attempts.size() && process.attempts[a].t < nodes[i].t) ++a;
    if (i > 0 && a < process.attempts.size() && process.attempts[a].t == nodes[i].t &&
        process.attempts[a].accepted) {
      row.beta = process.attempts[a].beta.offset;
    }
    rows.push_back(row);
  }
  rows.push_back({horizon, process.path.velocity_at(horizon).vec(), process.path.position_at(horizon),
                  std::nullopt, {}});
  return rows;
}

std::vector<TraceRow> trace_of(const DirectTrajectory& traj) {
  std::vector<TraceRow> rows;
  rows.push_back({0.0, traj.v0.vec(), Vec3{}, std::nullopt, {}});
  for (const auto& e : traj.events) {
    rows.push_back({e.t, e.velocity_after.vec(), e.position, std::nullopt, e.scatterer.str()});
  }
  const Vec3 u = traj.events.empty() ? traj.v0.vec() : traj.events.back().velocity_after.vec();
  rows.push_back({traj.horizon, u, traj.end, std::nullopt, {}});
  return rows;
}

void write_trace_csv(std::ostream& os, const std::vector<TraceRow>& rows, bool with_scatterer_id) {
  os << "t,ux,uy,uz,x,y,z,bx,by,bz";
  if (with_scatterer_id) os << ",scatterer_id";
  os << '\n';
  for (const auto& row : rows) {
    os << format_double(row.t);
    for (std::size_t i = 0; i < 3; ++i) os << ',' << format_double(row.u[i]);
    for (std::size_t i = 0; i < 3; ++i) os << ',' << format_double(row.x[i]);
    for (std::size_t i = 0; i < 3; ++i) {
      os << ',';
      if (row.beta) os << format_double((*row.beta)[i]);
    }
    if (with_scatterer_id) os << ',' << row.scatterer_id;
    os << '\n';
  }
}

void write_events_jsonl(std::ostream& os, const CouplingEventLog& log) {
  for (const auto& e : log.events) {
    Json j;
    j["t"] = e.t;
    j["kind"] = to_string(e.kind);
    j["process"] = std::string(1, static_cast<char>(e.process));
    j["situation"] = std::string(1, static_cast<char>(e.situation));
    j["cls"] = to_string(e.cls);
    os << j.dump() << '\n';
  }
}

Json trace_header(const ProbabilityVector& p, double r, std::uint64_t seed, double horizon,
                  const std::string& process, IntensityMode mode) {
  const auto cal = calibrate_intensity(p, r);
  Json j;
  j["process"] = process;
  j["p"] = {p[0], p[1], p[2]};
  j["r"] = r;
  j["seed"] = seed;
  j["horizon"] = horizon;
  j["intensity"] = {{"mode", mode == IntensityMode::calibrated ? "calibrated" : "nominal"},
                    {"calibrated", cal.calibrated},
                    {"nominal", cal.nominal},
                    {"used", intensity_for(p, r, mode)}};
  return j;
}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << text;
}

void write_json(const std::filesystem::path& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

std::string svg_plot(const std::vector<PlotSeries>& series, const std::string& title, const std::string& xlabel,
                     const std::string& ylabel, bool log_x, bool log_y) {
  const double W = 640;
  const double H = 420;
  const double L = 70;
  const double R = 20;
  const double T = 40;
  const double B = 50;
  auto tx = [&](double v) { return log_x ? std::log10(v) : v; };
  auto ty = [&](double v) { return log_y ? std::log10(v) : v; };
  double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if ((log_x && s.x[i] <= 0) || (log_y && s.y[i] <= 0)) continue;
      x0 = std::min(x0, tx(s.x[i]));
      x1 = std::max(x1, tx(s.x[i]));
      y0 = std::min(y0, ty(s.y[i]));
      y1 = std::max(y1, ty(s.y[i]));
    }
  if (x0 > x1) x0 = 0, x1 = 1;
  if (y0 > y1) y0 = 0, y1 = 1;
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) y1 = y0 + 1;
  auto px = [&](double v) { return L + (tx(v) - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double v) { return H - B - (ty(v) - y0) / (y1 - y0) * (H - T - B); };
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};
  std::ostringstream os;
  os << fmt::format("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\">\n", W, H);
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << fmt::format("<text x=\"{}\" y=\"24\" font-size=\"15\" text-anchor=\"middle\">{}</text>\n", W / 2, title);
  os << fmt::format("<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n", L, H - B, W - R, H - B);
  os << fmt::format("<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n", L, T, L, H - B);
  os << fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\">{}{}</text>\n", W / 2, H - 12,
                    xlabel, log_x ? " (log)" : "");
  os << fmt::format("<text x=\"16\" y=\"{}\" font-size=\"12\" transform=\"rotate(-90 16 {})\" "
                    "text-anchor=\"middle\">{}{}</text>\n",
                    H / 2, H / 2, ylabel, log_y ? " (log)" : "");
  os << fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"10\">{:.3g}</text>\n", L, H - B + 14,
                    log_x ? std::pow(10, x0) : x0);
  os << fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"10\" text-anchor=\"end\">{:.3g}</text>\n", W - R,
                    H - B + 14, log_x ? std::pow(10, x1) : x1);
  os << fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"10\" text-anchor=\"end\">{:.3g}</text>\n", L - 4, H - B,
                    log_y ? std::pow(10, y0) : y0);
  os << fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"10\" text-anchor=\"end\">{:.3g}</text>\n", L - 4, T + 4,
                    log_y ? std::pow(10, y1) : y1);
  for (std::size_t si = 0; si < series.size(); ++si) {
    const auto& s = series[si];
    const char* color = colors[si % 5];
    std::string pts;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if ((log_x && s.x[i] <= 0) || (log_y && s.y[i] <= 0)) continue;
      pts += fmt::format("{:.2f},{:.2f} ", px(s.x[i]), py(s.y[i]));
      os << fmt::format("<circle cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"3\" fill=\"{}\"/>\n", px(s.x[i]), py(s.y[i]),
                        color);
    }
    os << fmt::format("<polyline points=\"{}\" fill=\"none\" stroke=\"{}\"/>\n", pts, color);
    os << fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"11\" fill=\"{}\">{}</text>\n", L + 10,
                      T + 14 + 14 * static_cast<double>(si), color, s.label);
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace windtree
