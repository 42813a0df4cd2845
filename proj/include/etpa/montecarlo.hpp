#pragma once

// Stochastic count generation.
//
// Two samplers share one contract: every record is generated from its own
// RNG stream derived from (base_seed, replica, sweep index), so records are
// independent, reproducible, and can be produced in any order or in parallel.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <random>
#include <span>
#include <thread>
#include <vector>

#include "etpa/core.hpp"
#include "etpa/forward_model.hpp"

namespace etpa {

enum class SimulationMode { rate_level, event_level };

struct SimulationPlan {
  ExperimentConfig config;
  SimulationMode mode = SimulationMode::rate_level;
  int replicas = 1;
  std::uint64_t base_seed = 1;
};

/// Event-level simulation refused because a record would need too many pairs.
class TractabilityError : public Error {
 public:
  using Error::Error;
};

inline constexpr double kMaxEventsPerRecord = 1.0e8;

/// SplitMix64 finalizer.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Counter-based per-record seed.
inline std::uint64_t record_seed(std::uint64_t base_seed, std::uint64_t replica, std::uint64_t sweep_index) {
  return mix64(mix64(mix64(base_seed) ^ replica) + sweep_index);
}

/// Sweep points in canonical order: arm, delay, concentration, pump power.
/// The solvent (concentration 0) is prepended when the sweep omits it.
inline std::vector<SweepPoint> sweep_points(const SweepSpec& sweep) {
  std::vector<double> concentrations = sweep.concentrations;
  if (std::find(concentrations.begin(), concentrations.end(), 0.0) == concentrations.end())
    concentrations.insert(concentrations.begin(), 0.0);

  std::vector<SweepPoint> out;
  out.reserve(sweep.arms.size() * sweep.delays.size() * concentrations.size() * sweep.pump_powers.size());
  for (Arm arm : sweep.arms)
    for (double delay : sweep.delays)
      for (double c : concentrations)
        for (double p : sweep.pump_powers) out.push_back({arm, delay, p, c});
  return out;
}

namespace detail {

using Rng = std::mt19937_64;

inline std::uint64_t poisson(Rng& rng, double mean) {
  if (!(mean > 0.0)) return 0;
  std::poisson_distribution<long long> dist(mean);
  return static_cast<std::uint64_t>(dist(rng));
}

inline double uniform(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

/// Perturbed coupling efficiencies for a cuvette exchange; identity when disabled.
inline ChannelParams perturbed_channel(const ExperimentConfig& cfg, const SweepPoint& pt, Rng& rng) {
  ChannelParams ch = pt.arm == Arm::sample ? cfg.channel : cfg.reference_channel;
  if (cfg.knobs.coupling_jitter > 0.0 && pt.arm == Arm::sample && !pt.is_solvent()) {
    std::normal_distribution<double> gauss(0.0, cfg.knobs.coupling_jitter);
    ch.kappa1 = std::clamp(ch.kappa1 * (1.0 + gauss(rng)), 0.0, 1.0);
    ch.kappa2 = std::clamp(ch.kappa2 * (1.0 + gauss(rng)), 0.0, 1.0);
  }
  return ch;
}

/// Arrival times of a homogeneous Poisson process on [0, duration), ascending.
inline std::vector<double> poisson_arrivals(Rng& rng, double rate, double duration) {
  std::vector<double> times;
  if (!(rate > 0.0)) return times;
  times.reserve(static_cast<std::size_t>(rate * duration * 1.01) + 16);
  std::exponential_distribution<double> gap(rate);
  for (double t = gap(rng); t < duration; t += gap(rng)) times.push_back(t);
  return times;
}

template <class Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  const std::size_t workers = std::min<std::size_t>(n, std::max(1u, std::thread::hardware_concurrency()));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
}

}  // namespace detail

/// Greedy coincidence matching on two ascending click streams: the earlier
/// unmatched click is discarded unless its partner lies within +-window/2,
/// and every click is used at most once.
inline std::uint64_t count_coincidences(std::span<const double> t1, std::span<const double> t2, double window) {
  const double half = 0.5 * window;
  std::uint64_t n = 0;
  std::size_t i = 0, j = 0;
  while (i < t1.size() && j < t2.size()) {
    const double dt = t1[i] - t2[j];
    if (dt <= half && dt >= -half) {
      ++n;
      ++i;
      ++j;
    } else if (dt < 0.0) {
      ++i;
    } else {
      ++j;
    }
  }
  return n;
}

/// Poisson-sampled record for one sweep point.
inline CountRecord sample_rate_level(const ExperimentConfig& cfg, const SweepPoint& pt, std::uint64_t seed) {
  detail::Rng rng(seed);
  const ChannelParams ch = detail::perturbed_channel(cfg, pt, rng);
  const RateTriple r = model_point(cfg, pt, &ch).rates;
  const double t = cfg.detector.integration_time;

  CountRecord rec{.arm = pt.arm, .delay_tau = pt.delay_tau, .pump_power = pt.pump_power,
                  .concentration = pt.concentration, .integration_time = t, .seed = seed};
  rec.singles1 = detail::poisson(rng, r.r1 * t);
  rec.singles2 = detail::poisson(rng, r.r2 * t);
  rec.coincidences = std::min({detail::poisson(rng, r.r12 * t), rec.singles1, rec.singles2});
  rec.dark1 = detail::poisson(rng, r.phi1 * t);
  rec.dark2 = detail::poisson(rng, r.phi2 * t);
  return rec;
}

/// Click streams produced by one event-level record, exposed for tests.
struct EventStreams {
  std::vector<double> clicks1;
  std::vector<double> clicks2;
};

/// Per-pair simulation of one record: absorption, routing at the beamsplitter,
/// per-photon losses, dark-count streams, and window matching.
///
/// Routing: split with probability beta12, both photons to detector i with
/// probability beta_i - beta12. A pair routed entirely to one detector yields at
/// most one click (no photon-number resolution), registered with that
/// detector's efficiency.
inline CountRecord sample_event_level(const ExperimentConfig& cfg, const SweepPoint& pt, std::uint64_t seed,
                                      EventStreams* streams_out = nullptr) {
  detail::Rng rng(seed);
  const ChannelParams ch = detail::perturbed_channel(cfg, pt, rng);
  const PointModel m = model_point(cfg, pt, &ch);
  const double t = cfg.detector.integration_time;
  if (m.pair_rate * t > kMaxEventsPerRecord)
    throw TractabilityError("event-level record would need more than 1e8 pairs; use rate-level mode");

  const double eta = m.survival.eta_linear;
  const double p1 = eta * ch.eps1 * ch.kappa1;
  const double p2 = eta * ch.eps2 * ch.kappa2;
  const double split = ch.beta12;
  const double to1 = split + (ch.beta1 - ch.beta12);
  const double to2 = to1 + (ch.beta2 - ch.beta12);

  EventStreams s;
  const std::vector<double> pairs = detail::poisson_arrivals(rng, m.pair_rate, t);
  s.clicks1.reserve(pairs.size());
  s.clicks2.reserve(pairs.size());
  for (double time : pairs) {
    if (detail::uniform(rng) >= m.survival.eps_etpa) continue;  // absorbed
    const double route = detail::uniform(rng);
    if (route < split) {
      if (detail::uniform(rng) < p1) s.clicks1.push_back(time);
      if (detail::uniform(rng) < p2) s.clicks2.push_back(time);
    } else if (route < to1) {
      if (detail::uniform(rng) < p1) s.clicks1.push_back(time);
    } else if (route < to2) {
      if (detail::uniform(rng) < p2) s.clicks2.push_back(time);
    }
  }

  auto add_darks = [&](std::vector<double>& clicks, double rate) {
    const std::vector<double> darks = detail::poisson_arrivals(rng, rate, t);
    if (darks.empty()) return;
    std::vector<double> merged(clicks.size() + darks.size());
    std::merge(clicks.begin(), clicks.end(), darks.begin(), darks.end(), merged.begin());
    clicks = std::move(merged);
  };
  add_darks(s.clicks1, cfg.detector.dark_rate_1);
  add_darks(s.clicks2, cfg.detector.dark_rate_2);

  CountRecord rec{.arm = pt.arm, .delay_tau = pt.delay_tau, .pump_power = pt.pump_power,
                  .concentration = pt.concentration, .integration_time = t, .seed = seed};
  rec.singles1 = s.clicks1.size();
  rec.singles2 = s.clicks2.size();
  rec.coincidences = count_coincidences(s.clicks1, s.clicks2, cfg.detector.window_seconds());
  rec.dark1 = detail::poisson(rng, cfg.detector.dark_rate_1 * t);
  rec.dark2 = detail::poisson(rng, cfg.detector.dark_rate_2 * t);
  if (streams_out) *streams_out = std::move(s);
  return rec;
}

/// All records of a plan, ordered by replica then sweep index.
inline std::vector<CountRecord> simulate(const SimulationPlan& plan) {
  validate_config(plan.config);
  if (plan.replicas < 1) throw ValidationError("replicas", "must be >= 1");
  const std::vector<SweepPoint> points = sweep_points(plan.config.sweep);
  const std::size_t n = points.size() * static_cast<std::size_t>(plan.replicas);

  if (plan.mode == SimulationMode::event_level) {
    const double t = plan.config.detector.integration_time;
    for (const auto& pt : points)
      if (model_point(plan.config, pt).pair_rate * t > kMaxEventsPerRecord)
        throw TractabilityError("event-level record would need more than 1e8 pairs; use rate-level mode");
  }

  std::vector<CountRecord> out(n);
  detail::parallel_for(n, [&](std::size_t k) {
    const std::uint64_t replica = k / points.size();
    const std::uint64_t index = k % points.size();
    const std::uint64_t seed = record_seed(plan.base_seed, replica, index);
    CountRecord rec = plan.mode == SimulationMode::rate_level
                          ? sample_rate_level(plan.config, points[index], seed)
                          : sample_event_level(plan.config, points[index], seed);
    rec.run_id = replica;
    out[k] = rec;
  });
  return out;
}

inline std::vector<CountRecord> simulate_rate_level(SimulationPlan plan) {
  plan.mode = SimulationMode::rate_level;
  return simulate(plan);
}

inline std::vector<CountRecord> simulate_event_level(SimulationPlan plan) {
  plan.mode = SimulationMode::event_level;
  return simulate(plan);
}

}  // namespace etpa
