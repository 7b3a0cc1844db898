#include "windtree/coupling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "windtree/errors.hpp"

namespace windtree {

std::string to_string(EventKind k) {
  switch (k) {
    case EventKind::recollision: return "recollision";
    case EventKind::shadowed: return "shadowed";
    case EventKind::parity_insert: return "parity_insert";
    case EventKind::parity_delete: return "parity_delete";
    case EventKind::recouple: return "recouple";
  }
  return "unknown";
}

std::string to_string(MismatchClass c) {
  switch (c) {
    case MismatchClass::none: return "none";
    case MismatchClass::direct: return "direct";
    case MismatchClass::indirect: return "indirect";
  }
  return "unknown";
}

std::string to_string(DataSource s) {
  switch (s) {
    case DataSource::y: return "Y";
    case DataSource::z: return "Z";
    case DataSource::own: return "own";
  }
  return "unknown";
}

std::vector<double> parity_resample(const std::vector<double>& taus, double xi_prime) {
  if (!(xi_prime > 0.0)) throw DomainError("inserted time must be positive");
  for (std::size_t i = 1; i < taus.size(); ++i) {
    if (!(taus[i] > taus[i - 1])) throw DomainError("times must be strictly increasing");
  }
  std::vector<double> out;
  if (taus.empty() || xi_prime < taus.front()) {
    out.reserve(taus.size() + 1);
    out.push_back(xi_prime);
    out.insert(out.end(), taus.begin(), taus.end());
  } else {
    out.assign(taus.begin() + 1, taus.end());
  }
  return out;
}

Situation classify_situation(std::array<int, 3> parity_uvw, double zeta, double xi_next) {
  const auto [u, v, w] = parity_uvw;
  const bool early = zeta <= xi_next;
  if (u == v && v == w) return Situation::A;
  if (v == w) return early ? Situation::B : Situation::C;
  if (u == v) return early ? Situation::D : Situation::E;
  return early ? Situation::F : Situation::G;
}

Situation classify_situation(const Velocity& U, const Velocity& V, const Velocity& W, double zeta,
                             double xi_next) {
  auto cls = [&](const Velocity& x) { return same_parity(x, U) ? 0 : 1; };
  return classify_situation({0, cls(V), cls(W)}, zeta, xi_next);
}

std::pair<AttemptSchedule, AttemptSchedule> attempt_schedule(Situation s) {
  const AttemptSchedule two{false, true, true};
  const AttemptSchedule three{true, true, true};
  const AttemptSchedule last{false, false, true};
  switch (s) {
    case Situation::A: return {two, two};
    case Situation::B: return {three, three};
    case Situation::C: return {last, last};
    case Situation::D: return {two, three};
    case Situation::E: return {two, last};
    case Situation::F: return {three, two};
    case Situation::G: return {last, two};
  }
  throw ConstructionError("unknown situation");
}

std::optional<double> CouplingEventLog::first_mismatch() const {
  for (const auto& e : events) {
    if (e.kind == EventKind::recollision || e.kind == EventKind::shadowed) return e.t;
  }
  return std::nullopt;
}

std::optional<double> CouplingEventLog::first_event() const {
  std::optional<double> best;
  for (const auto& e : events) {
    if (!best || e.t < *best) best = e.t;
  }
  return best;
}

std::size_t CouplingEventLog::count(EventKind k, std::optional<Process> p, std::optional<MismatchClass> c) const {
  return static_cast<std::size_t>(std::count_if(events.begin(), events.end(), [&](const CouplingEvent& e) {
    return e.kind == k && (!p || e.process == *p) && (!c || e.cls == *c);
  }));
}

std::array<std::size_t, 7> CouplingEventLog::situation_counts() const {
  std::array<std::size_t, 7> out{};
  for (const auto& s : intervals) ++out[static_cast<std::size_t>(static_cast<char>(s.label) - 'A')];
  return out;
}

// ---------------------------------------------------------------------------

ExplorationState::ExplorationState(double r, const Velocity& v, const ImpactParameter& beta0, bool detect)
    : ExplorationState(r, Vec3{}, 0.0, v, beta0.offset, detect) {}

ExplorationState::ExplorationState(double r, const Vec3& start, double t0, const Velocity& v,
                                   const std::optional<Vec3>& initial_scatterer, bool detect)
    : r_(r), detect_(detect), time_(t0), pos_(start), vel_(v), path_(start, v, t0) {
  scatterers_.push_back(initial_scatterer);
  if (initial_scatterer) {
    cubes_.push_back({*initial_scatterer, 0.5 * r_});
    cube_ids_.push_back(0);
  }
}

std::vector<RecollisionRecord> ExplorationState::fly_to(double t) {
  if (t < time_) throw ConstructionError("exploration process cannot fly backwards");
  std::vector<RecollisionRecord> out;
  const double dt = t - time_;
  if (!detect_ || cubes_.empty()) {
    pos_ = advance(pos_, vel_.vec(), dt);
    time_ = t;
    return out;
  }
  const auto flight = mechanical_flight(pos_, vel_, cubes_, dt);
  const std::size_t n = attempts_.size() + 1;
  for (const auto& e : flight.events) {
    const std::size_t k = cube_ids_[e.scatterer];
    path_.append(time_ + e.t, e.position, e.velocity_after);
    const bool direct = k + 2 >= n || n <= 3;
    out.push_back({time_ + e.t, k, direct ? MismatchClass::direct : MismatchClass::indirect});
  }
  ties_ += flight.ties;
  pos_ = flight.end;
  vel_ = flight.end_velocity;
  time_ = t;
  return out;
}

ExplorationState::Outcome ExplorationState::attempt_fresh_collision(AttemptRecord rec) {
  if (rec.t != time_) throw ConstructionError("attempt time does not match the exploration clock");
  if (!flipped_axis(vel_, rec.w)) throw ConstructionError("attempted velocity is not a neighbour");
  Outcome outcome;
  const CubeObstacle candidate{pos_ + rec.beta.offset, 0.5 * r_};
  if (detect_) {
    const std::size_t n = attempts_.size() + 1;
    const double w1 = n >= 2 ? attempts_[n - 2].t : path_.start_time();
    const double w0 = n >= 3 ? attempts_[n - 3].t : path_.start_time();
    for (const auto& piece : path_.pieces(path_.start_time(), time_)) {
      const auto hit = segment_open_cube_overlap(piece.origin, piece.dir, piece.t1 - piece.t0, candidate);
      if (!hit) continue;
      outcome.accepted = false;
      const double a = piece.t0 + hit->first;
      const double b = piece.t0 + hit->second;
      if (b > w0 && a <= w1) {
        outcome.shadow = MismatchClass::direct;
        break;
      }
      outcome.shadow = MismatchClass::indirect;
    }
  }
  rec.accepted = outcome.accepted;
  if (outcome.accepted) {
    cube_ids_.push_back(scatterers_.size());
    scatterers_.push_back(candidate.center);
    cubes_.push_back(candidate);
    vel_ = rec.w;
  } else {
    scatterers_.push_back(std::nullopt);
  }
  path_.append(time_, pos_, vel_);
  attempts_.push_back(rec);
  return outcome;
}

void ExplorationState::finish(double horizon) { path_.set_end(horizon); }

// ---------------------------------------------------------------------------

ForgetfulState::ForgetfulState(double r, const Velocity& v, const ImpactParameter& beta0, bool detect)
    : r_(r), detect_(detect), time_(0.0), pos_(), vel_(v), record_(Vec3{}, v, 0.0) {
  memory_ = {beta0.offset, std::nullopt};
  scatterer_record_.push_back(beta0.offset);
}

std::vector<RecollisionRecord> ForgetfulState::fly_to(double t) {
  if (t < time_) throw ConstructionError("forgetful process cannot fly backwards");
  std::vector<RecollisionRecord> out;
  std::vector<CubeObstacle> cubes;
  std::vector<std::size_t> ids;
  if (detect_) {
    for (std::size_t m = 0; m < 2; ++m) {
      if (memory_[m]) {
        cubes.push_back({*memory_[m], 0.5 * r_});
        ids.push_back(memory_ids_[m]);
      }
    }
  }
  const double dt = t - time_;
  if (cubes.empty()) {
    pos_ = advance(pos_, vel_.vec(), dt);
    time_ = t;
    return out;
  }
  const auto flight = mechanical_flight(pos_, vel_, cubes, dt);
  Velocity piece_vel = vel_;
  for (const auto& e : flight.events) {
    const double te = time_ + e.t;
    current_.push_back({piece_start_, piece_vel.vec(), piece_t0_, te});
    piece_t0_ = te;
    piece_start_ = e.position;
    piece_vel = e.velocity_after;
    record_.append(te, e.position, e.velocity_after);
    out.push_back({te, ids[e.scatterer], MismatchClass::direct});
  }
  ties_ += flight.ties;
  pos_ = flight.end;
  vel_ = flight.end_velocity;
  time_ = t;
  return out;
}

ExplorationState::Outcome ForgetfulState::attempt_fresh_collision(AttemptRecord rec) {
  if (rec.t != time_) throw ConstructionError("attempt time does not match the forgetful clock");
  if (!flipped_axis(vel_, rec.w)) throw ConstructionError("attempted velocity is not a neighbour");
  if (time_ > piece_t0_) current_.push_back({piece_start_, vel_.vec(), piece_t0_, time_});
  ExplorationState::Outcome outcome;
  const CubeObstacle candidate{pos_ + rec.beta.offset, 0.5 * r_};
  if (detect_) {
    for (const auto& piece : window_) {
      if (piece.t0 < window_start_) ++window_violations_;
      if (segment_hits_open_cube(piece.origin, piece.dir, piece.t1 - piece.t0, candidate)) {
        outcome.accepted = false;
        outcome.shadow = MismatchClass::direct;
        break;
      }
    }
  }
  rec.accepted = outcome.accepted;
  memory_[1] = memory_[0];
  memory_ids_[1] = memory_ids_[0];
  if (outcome.accepted) {
    memory_[0] = candidate.center;
    vel_ = rec.w;
  } else {
    memory_[0] = std::nullopt;
  }
  memory_ids_[0] = scatterer_record_.size();
  scatterer_record_.push_back(memory_[0]);
  record_.append(time_, pos_, vel_);
  attempts_.push_back(rec);
  // Slide the window: the interval just closed becomes (tau_{n-1}, tau_n].
  window_ = std::move(current_);
  current_.clear();
  window_start_ = attempts_.size() >= 2 ? attempts_[attempts_.size() - 2].t : 0.0;
  piece_t0_ = time_;
  piece_start_ = pos_;
  return outcome;
}

void ForgetfulState::finish(double horizon) { record_.set_end(horizon); }

// ---------------------------------------------------------------------------

namespace {

struct Slot {
  double t;
  std::size_t tau_index;
  bool x;
  bool z;
};

class Builder {
 public:
  Builder(const VelocitySet& set, const Velocity& v0, double r, double horizon, Rng& rng,
          const CouplingOptions& opt)
      : set_(set), r_(r), horizon_(horizon), rng_(rng) {
    out_.r = r;
    out_.horizon = horizon;
    out_.v0 = v0;
    out_.Y = sample_flight(set, v0, horizon, r, rng);
    x_.emplace(r, v0, out_.Y.beta[0], opt.detect_mismatches);
    z_.emplace(r, v0, out_.Y.beta[0], opt.detect_mismatches);
  }

  CoupledTriple run() {
    const FlightPath& Y = out_.Y;
    const std::size_t N = Y.collisions();
    const double inf = std::numeric_limits<double>::infinity();
    for (std::size_t n = 0; 2 * n <= N; ++n) {
      const double base = Y.tau[2 * n];
      const std::size_t i1 = 2 * n + 1;
      const std::size_t i2 = 2 * n + 2;
      const double t1 = i1 <= N ? Y.tau[i1] : inf;
      const double t2 = i2 <= N ? Y.tau[i2] : inf;
      const double zeta = rng_.exponential();
      situation_ = classify_situation(Y.u[i1], x_->velocity(), z_->velocity(), zeta, t1 - base);
      const auto [sx, sz] = attempt_schedule(situation_);
      const double tz = base + zeta;

      std::vector<Slot> slots;
      if (sx.at_zeta || sz.at_zeta) slots.push_back({tz, kNone, sx.at_zeta, sz.at_zeta});
      slots.push_back({t1, i1, sx.at_tau1, sz.at_tau1});
      slots.push_back({t2, i2, sx.at_tau2, sz.at_tau2});
      for (const auto& slot : slots) {
        if (slot.t > horizon_ || !(slot.x || slot.z)) continue;
        run_slot(slot);
      }
      log_parity_edits(sx, sz, tz, t1);
      out_.log.intervals.push_back({base, std::min(t2, horizon_), situation_});
      if (i2 > N) break;
    }
    log_recollisions(x_->fly_to(horizon_), Process::X);
    log_recollisions(z_->fly_to(horizon_), Process::Z);
    x_->finish(horizon_);
    z_->finish(horizon_);
    out_.X = {x_->trajectory(), x_->attempts(), x_->scatterers()};
    out_.Z = {z_->record(), z_->attempts(), z_->scatterer_record()};
    out_.z_memory = z_->memory();
    out_.z_window_violations = z_->window_violations();
    out_.log.near_ties = x_->ties() + z_->ties();
    std::stable_sort(out_.log.events.begin(), out_.log.events.end(),
                     [](const CouplingEvent& a, const CouplingEvent& b) { return a.t < b.t; });
    return std::move(out_);
  }

 private:
  void run_slot(const Slot& slot) {
    const FlightPath& Y = out_.Y;
    const bool on_clock = slot.tau_index != kNone;
    const Velocity u_minus = on_clock ? Y.u[slot.tau_index] : Velocity{};
    bool z_independent = false;
    Velocity w_minus{};
    AttemptRecord z_rec;
    if (slot.z) {
      log_recollisions(z_->fly_to(slot.t), Process::Z);
      w_minus = z_->velocity();
      z_rec = own_record(slot, w_minus);
      if (on_clock && w_minus == u_minus) {
        use_y(z_rec, slot.tau_index);
      } else {
        z_independent = true;
      }
      const auto outcome = z_->attempt_fresh_collision(z_rec);
      after_attempt(slot.t, Process::Z, z_rec.source, outcome, z_coupled_);
    }
    if (slot.x) {
      log_recollisions(x_->fly_to(slot.t), Process::X);
      const Velocity v_minus = x_->velocity();
      AttemptRecord x_rec = own_record(slot, v_minus);
      if (on_clock && v_minus == u_minus) {
        use_y(x_rec, slot.tau_index);
      } else if (slot.z && z_independent && v_minus == w_minus) {
        x_rec.w = z_rec.w;
        x_rec.beta = z_rec.beta;
        x_rec.source = DataSource::z;
      }
      const auto outcome = x_->attempt_fresh_collision(x_rec);
      after_attempt(slot.t, Process::X, x_rec.source, outcome, x_coupled_);
    }
  }

  AttemptRecord own_record(const Slot& slot, const Velocity& before) {
    AttemptRecord rec;
    rec.t = slot.t;
    rec.tau_index = slot.tau_index;
    rec.before = before;
    rec.w = transition_sample(set_, before, rng_);
    rec.beta = sample_impact(before, rec.w, r_, rng_);
    rec.source = DataSource::own;
    return rec;
  }

  void use_y(AttemptRecord& rec, std::size_t k) const {
    rec.w = out_.Y.u[k + 1];
    rec.beta = out_.Y.beta[k];
    rec.source = DataSource::y;
  }

  void after_attempt(double t, Process p, DataSource src, const ExplorationState::Outcome& outcome,
                     bool& coupled) {
    if (!outcome.accepted) {
      out_.log.events.push_back({t, EventKind::shadowed, p, situation_, outcome.shadow, kNone});
      coupled = false;
      return;
    }
    if (src == DataSource::y) {
      if (!coupled) out_.log.events.push_back({t, EventKind::recouple, p, situation_, MismatchClass::none, kNone});
      coupled = true;
    } else {
      coupled = false;
    }
  }

  void log_recollisions(const std::vector<RecollisionRecord>& recs, Process p) {
    for (const auto& rc : recs) {
      out_.log.events.push_back({rc.t, EventKind::recollision, p, situation_, rc.cls, rc.scatterer});
      (p == Process::X ? x_coupled_ : z_coupled_) = false;
    }
  }

  void log_parity_edits(const AttemptSchedule& sx, const AttemptSchedule& sz, double tz, double t1) {
    auto edit = [&](const AttemptSchedule& s, Process p) {
      if (s.at_zeta && tz <= horizon_) {
        out_.log.events.push_back({tz, EventKind::parity_insert, p, situation_, MismatchClass::none, kNone});
      } else if (!s.at_tau1 && t1 <= horizon_) {
        out_.log.events.push_back({t1, EventKind::parity_delete, p, situation_, MismatchClass::none, kNone});
      }
    };
    edit(sz, Process::Z);
    edit(sx, Process::X);
  }

  const VelocitySet& set_;
  double r_;
  double horizon_;
  Rng& rng_;
  CoupledTriple out_;
  std::optional<ExplorationState> x_;
  std::optional<ForgetfulState> z_;
  Situation situation_ = Situation::A;
  bool x_coupled_ = true;
  bool z_coupled_ = true;
};

}  // namespace

CoupledTriple build_coupled(const VelocitySet& set, const Velocity& v0, double r, double horizon, Rng& rng,
                            const CouplingOptions& options) {
  if (!(horizon > 0.0)) throw DomainError("coupling horizon must be positive");
  return Builder(set, v0, r, horizon, rng, options).run();
}

}  // namespace windtree
