#pragma once

#include <algorithm>
#include <array>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "windtree/flight.hpp"
#include "windtree/geometry.hpp"
#include "windtree/trajectory.hpp"

namespace windtree {

inline constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

enum class Situation : char { A = 'A', B = 'B', C = 'C', D = 'D', E = 'E', F = 'F', G = 'G' };
enum class Process : char { X = 'X', Z = 'Z' };
enum class EventKind { recollision, shadowed, parity_insert, parity_delete, recouple };
enum class MismatchClass { none, direct, indirect };
enum class DataSource { y, z, own };

std::string to_string(EventKind k);
std::string to_string(MismatchClass c);
std::string to_string(DataSource s);

/// Parity edit of a Poisson sequence: prepend xi_prime if it precedes
/// the first point, otherwise drop the first point.
std::vector<double> parity_resample(const std::vector<double>& taus, double xi_prime);

/// Parity classes (0 or 1) of U, V, W at the start of an interval.
Situation classify_situation(std::array<int, 3> parity_uvw, double zeta, double xi_next);
Situation classify_situation(const Velocity& U, const Velocity& V, const Velocity& W, double zeta,
                             double xi_next);

struct AttemptSchedule {
  bool at_zeta = false;
  bool at_tau1 = false;
  bool at_tau2 = false;
};
// Attempt times of X and Z on [tau_{2n}, tau_{2n+2}) for a situation.
std::pair<AttemptSchedule, AttemptSchedule> attempt_schedule(Situation s);

struct CouplingEvent {
  double t = 0.0;
  EventKind kind = EventKind::recollision;
  Process process = Process::X;
  Situation situation = Situation::A;
  MismatchClass cls = MismatchClass::none;
  std::size_t scatterer = kNone;
};

struct SituationInterval {
  double t0 = 0.0;
  double t1 = 0.0;
  Situation label = Situation::A;
};

struct CouplingEventLog {
  std::vector<SituationInterval> intervals;
  std::vector<CouplingEvent> events;
  std::size_t near_ties = 0;

  // Time of the first recollision or shadowed event of either process.
  std::optional<double> first_mismatch() const;
  // First event of any kind (mismatch, parity edit or recoupling).
  std::optional<double> first_event() const;
  std::size_t count(EventKind k, std::optional<Process> p = std::nullopt,
                    std::optional<MismatchClass> c = std::nullopt) const;
  std::array<std::size_t, 7> situation_counts() const;
};

struct AttemptRecord {
  double t = 0.0;
  std::size_t tau_index = kNone;  // k when t equals Y's collision time tau_k
  Velocity before{};
  Velocity w{};
  ImpactParameter beta{};
  bool accepted = false;
  DataSource source = DataSource::own;
};

struct RecollisionRecord {
  double t = 0.0;
  std::size_t scatterer = 0;
  MismatchClass cls = MismatchClass::direct;
};

/// Exploration process X: mechanical flight on every placed scatterer and
/// a shadow test against its whole past.
class ExplorationState {
 public:
  ExplorationState(double r, const Velocity& v, const ImpactParameter& beta0, bool detect = true);
  ExplorationState(double r, const Vec3& start, double t0, const Velocity& v,
                   const std::optional<Vec3>& initial_scatterer, bool detect = true);

  double time() const { return time_; }
  Vec3 position() const { return pos_; }
  Velocity velocity() const { return vel_; }
  const Trajectory& trajectory() const { return path_; }
  const std::vector<std::optional<Vec3>>& scatterers() const { return scatterers_; }
  const std::vector<AttemptRecord>& attempts() const { return attempts_; }
  std::size_t ties() const { return ties_; }

  std::vector<RecollisionRecord> fly_to(double t);

  struct Outcome {
    bool accepted = true;
    MismatchClass shadow = MismatchClass::none;
  };
  // Requires time() == t_a. The record's accepted flag is filled in.
  Outcome attempt_fresh_collision(AttemptRecord rec);
  void finish(double horizon);

 private:
  double r_;
  bool detect_;
  double time_;
  Vec3 pos_;
  Velocity vel_;
  Trajectory path_;
  std::vector<std::optional<Vec3>> scatterers_;
  std::vector<CubeObstacle> cubes_;
  std::vector<std::size_t> cube_ids_;
  std::vector<AttemptRecord> attempts_;
  std::size_t ties_ = 0;
};

/// Forgetful process Z: remembers the two latest scatterers and the path of
/// the previous attempt interval only. The full trajectory is recorded for
/// analysis but never read by the construction.
class ForgetfulState {
 public:
  ForgetfulState(double r, const Velocity& v, const ImpactParameter& beta0, bool detect = true);

  double time() const { return time_; }
  Vec3 position() const { return pos_; }
  Velocity velocity() const { return vel_; }
  const std::array<std::optional<Vec3>, 2>& memory() const { return memory_; }
  const Trajectory& record() const { return record_; }
  const std::vector<std::optional<Vec3>>& scatterer_record() const { return scatterer_record_; }
  const std::vector<AttemptRecord>& attempts() const { return attempts_; }
  // Shadow tests that looked at path older than the window (always 0).
  std::size_t window_violations() const { return window_violations_; }
  std::size_t ties() const { return ties_; }

  std::vector<RecollisionRecord> fly_to(double t);
  ExplorationState::Outcome attempt_fresh_collision(AttemptRecord rec);
  void finish(double horizon);

 private:
  double r_;
  bool detect_;
  double time_;
  Vec3 pos_;
  Velocity vel_;
  std::array<std::optional<Vec3>, 2> memory_;  // [0] latest, [1] previous
  std::array<std::size_t, 2> memory_ids_{0, kNone};
  std::vector<PathPiece> window_;   // (tau_{n-2}, tau_{n-1}]
  std::vector<PathPiece> current_;  // (tau_{n-1}, now]
  double window_start_ = 0.0;  // tau_{n-2}
  double piece_t0_ = 0.0;      // start of the current straight piece
  Vec3 piece_start_{};
  Trajectory record_;
  std::vector<std::optional<Vec3>> scatterer_record_;
  std::vector<AttemptRecord> attempts_;
  std::size_t window_violations_ = 0;
  std::size_t ties_ = 0;
};

struct ProcessRecord {
  Trajectory path;
  std::vector<AttemptRecord> attempts;
  std::vector<std::optional<Vec3>> scatterers;  // index 0 is the time-0 scatterer
};

struct CoupledTriple {
  double r = 0.0;
  double horizon = 0.0;
  Velocity v0{};
  FlightPath Y;
  ProcessRecord X;
  ProcessRecord Z;
  std::array<std::optional<Vec3>, 2> z_memory;
  std::size_t z_window_violations = 0;
  CouplingEventLog log;
};

struct CouplingOptions {
  // Diagnostic mode when false: no recollisions, no shadowing.
  bool detect_mismatches = true;
};

CoupledTriple build_coupled(const VelocitySet& set, const Velocity& v0, double r, double horizon, Rng& rng,
                            const CouplingOptions& options = {});

// Consistency predicates; nullopt entries are the fictitious point.
bool r_consistent(const Trajectory& path, const std::vector<std::optional<Vec3>>& scatterers, double r);
bool r_consistent(std::span<const PathPiece> pieces, std::span<const CubeObstacle> cubes);
// Throws DomainError when the time intervals of the two paths overlap.
bool r_compatible(std::span<const PathPiece> a, std::span<const CubeObstacle> cubes_a,
                  std::span<const PathPiece> b, std::span<const CubeObstacle> cubes_b);

std::vector<CubeObstacle> cubes_of(const std::vector<std::optional<Vec3>>& scatterers, double r,
                                   std::size_t from = 0, std::size_t to = kNone);

// Direct mismatch indicators on three consecutive segments j-2, j-1, j.
struct MismatchWindow {
  Vec3 start{};                  // Y_{j-3}
  std::array<Velocity, 3> u{};   // u_{j-2}, u_{j-1}, u_j
  std::array<double, 3> xi{};    // xi_{j-2}, xi_{j-1}, xi_j
  std::array<ImpactParameter, 2> beta{};  // beta_{j-2}, beta_{j-1}
  double r = 0.0;
};

struct DirectMismatch {
  bool eta_hat = false;    // shadowing of collision j-1 by segment j-2
  bool eta_tilde = false;  // segment j re-enters the cube of collision j-2
  bool any() const { return eta_hat || eta_tilde; }
};

DirectMismatch detect_direct_mismatch(const MismatchWindow& w);
// Window ending at segment j of a flight path, 3 <= j <= collisions().
MismatchWindow mismatch_window(const FlightPath& path, std::size_t j);
DirectMismatch detect_direct_mismatch(const FlightPath& path, std::size_t j);

struct IndirectMismatch {
  bool eta_hat = false;    // path on [0, tau_{j-3}] enters the cube of collision j-1
  bool eta_tilde = false;  // segment j enters a cube of collision k <= j-3
  bool any() const { return eta_hat || eta_tilde; }
};

IndirectMismatch detect_indirect_mismatch(const FlightPath& path, std::size_t j);

/// Post-hoc leg decomposition of Z and the stopping indices of the leg
/// argument (1-based leg numbers, kNone when no leg is flagged).
struct LegSplit {
  std::vector<std::size_t> Gamma;  // attempt index closing each leg (Gamma[0] = 0)
  std::vector<double> Theta;       // leg end times (Theta[0] = 0); last entry may be the horizon
  bool partial_tail = false;       // the final leg ends at the horizon, not at a stop
};

LegSplit split_legs(const CoupledTriple& triple);

struct StoppingIndices {
  std::size_t rho = kNone;
  std::size_t sigma = kNone;
  std::vector<bool> intra_flags;  // per leg: replayed exploration disagrees with Z
  std::vector<bool> inter_flags;  // per leg: r-compatibility with the past fails
  LegSplit legs;

  std::size_t min_index() const { return std::min(rho, sigma); }
  // Theta_{min(rho, sigma) - 1}, or the horizon when nothing is flagged.
  double guaranteed_agreement(double horizon) const;
};

StoppingIndices stopping_indices(const CoupledTriple& triple);

}  // namespace windtree
