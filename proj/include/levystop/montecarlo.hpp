#pragma once

// Monte Carlo verification: simulate the process, stop on first entry into a
// candidate stopping region, average the discounted reward.  For bounded
// variation paths (sigma = 0) the jump skeleton is exact: the path drifts up
// at constant speed between jumps, so first entry happens either at a known
// creep time onto a lower boundary or at a jump landing, both computable in
// closed form.  For sigma > 0 an Euler scheme fills in the diffusion between
// jumps and boundary crossings are only checked at step ends, which biases
// stopping times late by O(sqrt(dt)).
//
// Determinism: a tiny counter-mixed generator gives every path its own
// stream derived from (seed, path index), and results are accumulated per
// fixed-size chunk and reduced in chunk order, so estimates are bit-identical
// for any thread count.

#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "levystop/levy_model.hpp"
#include "levystop/reward.hpp"
#include "levystop/scale_functions.hpp"
#include "levystop/solver.hpp"

namespace levystop {

class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1)
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double exponential(double rate) { return -std::log1p(-uniform()) / rate; }

    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform(), u2 = uniform();
        while (u1 == 0.0) u1 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double t = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(t);
        have_spare_ = true;
        return r * std::cos(t);
    }

    // independent stream for one path of one experiment
    static SplitMix64 for_path(std::uint64_t seed, std::uint64_t path) {
        SplitMix64 mixer(seed ^ (path * 0xD1342543DE82EF95ULL + 0x2545F4914F6CDD1DULL));
        mixer.next();
        return SplitMix64(mixer.next());
    }

private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

struct MCConfig {
    std::uint64_t seed = 20240915;
    std::size_t paths = 100000;
    double horizon_factor = 50.0;  // time horizon = factor / psi'(Phi(q))
    double dt = 1e-3;              // Euler step (sigma > 0 only)
    int threads = 0;               // 0 = hardware concurrency (capped by LEVYSTOP_THREADS)
};

struct StoppedSummary {
    double estimate = 0.0;
    double std_error = 0.0;
    std::size_t paths = 0;
    std::size_t timeouts = 0;  // paths that never stopped before the horizon
};

namespace detail {

inline int resolve_threads(int requested) {
    int n = requested > 0 ? requested : static_cast<int>(std::thread::hardware_concurrency());
    if (n < 1) n = 1;
    if (const char* cap = std::getenv("LEVYSTOP_THREADS")) {
        const int c = std::atoi(cap);
        if (c >= 1 && c < n) n = c;
    }
    return n;
}

// run fn(chunk_index, path_begin, path_end) over fixed chunks on a small pool
template <typename Fn>
inline std::size_t run_chunked(std::size_t paths, int threads, Fn&& fn) {
    constexpr std::size_t kChunk = 4096;
    const std::size_t chunks = (paths + kChunk - 1) / kChunk;
    std::atomic<std::size_t> cursor{0};
    auto worker = [&] {
        for (;;) {
            const std::size_t c = cursor.fetch_add(1);
            if (c >= chunks) return;
            const std::size_t lo = c * kChunk;
            const std::size_t hi = std::min(paths, lo + kChunk);
            fn(c, lo, hi);
        }
    };
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(threads));
        for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    return chunks;
}

struct StopRegionIndex {
    // continuation gaps (lo_i, hi_i) sorted; hi_i is either a stopping
    // boundary reachable by upward creep or +inf
    std::vector<std::pair<double, double>> gaps;
    std::vector<Interval> stop;

    explicit StopRegionIndex(const std::vector<Interval>& region) : stop(region) {
        if (region.empty()) throw std::invalid_argument("stop region must be nonempty");
        for (std::size_t i = 1; i < region.size(); ++i)
            if (!(region[i].lo > region[i - 1].hi))
                throw std::invalid_argument("stop region intervals must be ascending");
        if (std::isfinite(region.front().lo))
            gaps.push_back({-kInf, region.front().lo});
        for (std::size_t i = 1; i < region.size(); ++i)
            gaps.push_back({region[i - 1].hi, region[i].lo});
        gaps.push_back({region.back().hi, kInf});
    }

    bool contains(double x) const {
        for (const auto& iv : stop)
            if (iv.contains(x)) return true;
        return false;
    }

    // gap holding x; callers must ensure x is not in the stop region
    std::pair<double, double> gap_around(double x) const {
        for (const auto& g : gaps)
            if (x > g.first && x < g.second) return g;
        throw std::logic_error("gap_around: point not in any continuation gap");
    }
};

struct PathOutcome {
    double payoff = 0.0;  // e^(-q tau) g(X_tau), 0 on timeout
    bool timed_out = false;
};

// exact skeleton, sigma = 0
template <typename Reward>
inline PathOutcome run_path_bv(const LevyModel& m, const Reward& g, double q,
                               const StopRegionIndex& region, double x0, double horizon,
                               SplitMix64& rng) {
    const double lam = m.total_jump_rate();
    double x = x0, t = 0.0;
    for (;;) {
        if (region.contains(x)) return {std::exp(-q * t) * g.eval(x), false};
        const auto [glo, ghi] = region.gap_around(x);
        double jump_wait = lam > 0.0 ? rng.exponential(lam) : kInf;
        const double creep_wait = std::isfinite(ghi) ? (ghi - x) / m.drift : kInf;
        if (creep_wait <= jump_wait) {
            t += creep_wait;
            if (t > horizon) return {0.0, true};
            x = ghi;
            continue;  // lands exactly on the boundary, stops next round
        }
        t += jump_wait;
        if (t > horizon) return {0.0, true};
        x += m.drift * jump_wait;
        // pick the jump component, then its exponential size
        double pick = rng.uniform() * lam;
        std::size_t idx = 0;
        while (idx + 1 < m.jumps.size() && pick > m.jumps[idx].rate) {
            pick -= m.jumps[idx].rate;
            ++idx;
        }
        x -= rng.exponential(m.jumps[idx].decay);
    }
}

// Euler between jumps, sigma > 0
template <typename Reward>
inline PathOutcome run_path_euler(const LevyModel& m, const Reward& g, double q,
                                  const StopRegionIndex& region, double x0, double horizon,
                                  double dt, SplitMix64& rng) {
    const double lam = m.total_jump_rate();
    double x = x0, t = 0.0;
    double next_jump = lam > 0.0 ? rng.exponential(lam) : kInf;
    const double sdt = m.sigma * std::sqrt(dt);
    while (t <= horizon) {
        if (region.contains(x)) return {std::exp(-q * t) * g.eval(x), false};
        if (next_jump <= dt) {
            x += m.drift * next_jump + m.sigma * std::sqrt(next_jump) * rng.normal();
            t += next_jump;
            double pick = rng.uniform() * lam;
            std::size_t idx = 0;
            while (idx + 1 < m.jumps.size() && pick > m.jumps[idx].rate) {
                pick -= m.jumps[idx].rate;
                ++idx;
            }
            x -= rng.exponential(m.jumps[idx].decay);
            next_jump = rng.exponential(lam);
        } else {
            x += m.drift * dt + sdt * rng.normal();
            t += dt;
            next_jump -= dt;
        }
    }
    return {0.0, true};
}

template <typename Reward>
inline PathOutcome run_path(const LevyModel& m, const Reward& g, double q,
                            const StopRegionIndex& region, double x0, double horizon,
                            double dt, SplitMix64& rng) {
    if (m.sigma == 0.0) return run_path_bv(m, g, q, region, x0, horizon, rng);
    return run_path_euler(m, g, q, region, x0, horizon, dt, rng);
}

inline double mc_horizon(const LevyModel& m, double q, double factor) {
    const double speed = psi_prime(m, phi(m, q));
    return factor / speed;
}

struct ChunkSums {
    double sum = 0.0, sum_sq = 0.0;
    std::size_t timeouts = 0;
};

inline StoppedSummary reduce_chunks(const std::vector<ChunkSums>& chunks, std::size_t paths) {
    double sum = 0.0, sum_sq = 0.0;
    std::size_t timeouts = 0;
    for (const auto& c : chunks) {
        sum += c.sum;
        sum_sq += c.sum_sq;
        timeouts += c.timeouts;
    }
    StoppedSummary out;
    out.paths = paths;
    out.timeouts = timeouts;
    const double n = static_cast<double>(paths);
    out.estimate = sum / n;
    const double var = std::max(0.0, sum_sq / n - out.estimate * out.estimate);
    out.std_error = std::sqrt(var / n);
    return out;
}

}  // namespace detail

// Mean discounted reward of "stop on first entry into stop_region" from x0.
inline StoppedSummary simulate_stopped(const LevyModel& m, const RewardFunction& g, double q,
                                       const std::vector<Interval>& stop_region, double x0,
                                       const MCConfig& cfg = {}) {
    m.validate();
    const detail::StopRegionIndex region(stop_region);
    const double horizon = detail::mc_horizon(m, q, cfg.horizon_factor);
    const int threads = detail::resolve_threads(cfg.threads);

    std::vector<detail::ChunkSums> chunks((cfg.paths + 4095) / 4096);
    detail::run_chunked(cfg.paths, threads, [&](std::size_t c, std::size_t lo, std::size_t hi) {
        detail::ChunkSums acc;
        for (std::size_t p = lo; p < hi; ++p) {
            SplitMix64 rng = SplitMix64::for_path(cfg.seed, p);
            const auto out = detail::run_path(m, g, q, region, x0, horizon, cfg.dt, rng);
            acc.sum += out.payoff;
            acc.sum_sq += out.payoff * out.payoff;
            if (out.timed_out) ++acc.timeouts;
        }
        chunks[c] = acc;
    });
    return detail::reduce_chunks(chunks, cfg.paths);
}

// ---- two-sided exit identities ----

struct FluctuationCheck {
    double up_estimate = 0.0, up_exact = 0.0, up_std_error = 0.0, up_z = 0.0;
    double down_estimate = 0.0, down_exact = 0.0, down_std_error = 0.0, down_z = 0.0;
    std::size_t paths = 0;
};

// Exit of [0, c] from x0: E[e^(-q T_up); up before down] = W(x0)/W(c) and
// E[e^(-q T_down); down before up] = Z(x0) - Z(c) W(x0)/W(c), both under the
// q-scale functions.  Simulated with the exact skeleton (sigma = 0) or Euler.
inline FluctuationCheck validate_fluctuation(const LevyModel& m, double q, double x0, double c,
                                             const MCConfig& cfg = {}) {
    m.validate();
    if (!(x0 > 0.0 && x0 < c))
        throw std::invalid_argument("validate_fluctuation: need 0 < x0 < c");
    const ScaleEvaluator scale = build_scale(m, q);
    const double horizon = detail::mc_horizon(m, q, cfg.horizon_factor);
    const int threads = detail::resolve_threads(cfg.threads);
    const double lam = m.total_jump_rate();

    struct Sums {
        double up = 0.0, up_sq = 0.0, down = 0.0, down_sq = 0.0;
    };
    std::vector<Sums> chunks((cfg.paths + 4095) / 4096);

    auto one_path = [&](SplitMix64& rng, double& up, double& down) {
        double x = x0, t = 0.0;
        if (m.sigma == 0.0) {
            for (;;) {
                const double jump_wait = lam > 0.0 ? rng.exponential(lam) : kInf;
                const double creep_wait = (c - x) / m.drift;
                if (creep_wait <= jump_wait) {
                    t += creep_wait;
                    up = std::exp(-q * t);
                    return;
                }
                t += jump_wait;
                if (t > horizon) return;
                x += m.drift * jump_wait;
                double pick = rng.uniform() * lam;
                std::size_t idx = 0;
                while (idx + 1 < m.jumps.size() && pick > m.jumps[idx].rate) {
                    pick -= m.jumps[idx].rate;
                    ++idx;
                }
                x -= rng.exponential(m.jumps[idx].decay);
                if (x < 0.0) {
                    down = std::exp(-q * t);
                    return;
                }
            }
        }
        double next_jump = lam > 0.0 ? rng.exponential(lam) : kInf;
        const double sdt = m.sigma * std::sqrt(cfg.dt);
        while (t <= horizon) {
            if (x >= c) { up = std::exp(-q * t); return; }
            if (x < 0.0) { down = std::exp(-q * t); return; }
            if (next_jump <= cfg.dt) {
                x += m.drift * next_jump + m.sigma * std::sqrt(next_jump) * rng.normal();
                t += next_jump;
                double pick = rng.uniform() * lam;
                std::size_t idx = 0;
                while (idx + 1 < m.jumps.size() && pick > m.jumps[idx].rate) {
                    pick -= m.jumps[idx].rate;
                    ++idx;
                }
                x -= rng.exponential(m.jumps[idx].decay);
                next_jump = rng.exponential(lam);
            } else {
                x += m.drift * cfg.dt + sdt * rng.normal();
                t += cfg.dt;
                next_jump -= cfg.dt;
            }
        }
    };

    detail::run_chunked(cfg.paths, threads, [&](std::size_t ci, std::size_t lo, std::size_t hi) {
        Sums acc;
        for (std::size_t p = lo; p < hi; ++p) {
            SplitMix64 rng = SplitMix64::for_path(cfg.seed, p);
            double up = 0.0, down = 0.0;
            one_path(rng, up, down);
            acc.up += up;
            acc.up_sq += up * up;
            acc.down += down;
            acc.down_sq += down * down;
        }
        chunks[ci] = acc;
    });

    double up = 0.0, up_sq = 0.0, down = 0.0, down_sq = 0.0;
    for (const auto& s : chunks) {
        up += s.up;
        up_sq += s.up_sq;
        down += s.down;
        down_sq += s.down_sq;
    }
    const double n = static_cast<double>(cfg.paths);

    FluctuationCheck out;
    out.paths = cfg.paths;
    out.up_estimate = up / n;
    out.down_estimate = down / n;
    out.up_std_error = std::sqrt(std::max(0.0, up_sq / n - out.up_estimate * out.up_estimate) / n);
    out.down_std_error =
        std::sqrt(std::max(0.0, down_sq / n - out.down_estimate * out.down_estimate) / n);
    out.up_exact = scale.W(x0) / scale.W(c);
    out.down_exact = scale.Z(x0) - scale.Z(c) * scale.W(x0) / scale.W(c);
    out.up_z = (out.up_estimate - out.up_exact) / std::max(out.up_std_error, 1e-300);
    out.down_z = (out.down_estimate - out.down_exact) / std::max(out.down_std_error, 1e-300);
    return out;
}

// ---- paired comparison of candidate stopping regions ----

struct BenchmarkRow {
    std::vector<Interval> region;
    double estimate = 0.0;
    double std_error = 0.0;
    double diff_mean = 0.0;      // reference minus this candidate
    double diff_std_error = 0.0;
    std::size_t timeouts = 0;
};

// Every path re-runs with the same per-path stream for each candidate, so the
// skeletons coincide and the difference of rewards has far smaller variance
// than either estimate (common random numbers).  Row 0 is the reference.
inline std::vector<BenchmarkRow> benchmark_thresholds(
    const LevyModel& m, const RewardFunction& g, double q,
    const std::vector<std::vector<Interval>>& candidates, double x0, const MCConfig& cfg = {}) {
    m.validate();
    if (candidates.empty())
        throw std::invalid_argument("benchmark_thresholds: need at least one candidate");
    std::vector<detail::StopRegionIndex> regions;
    regions.reserve(candidates.size());
    for (const auto& c : candidates) regions.emplace_back(c);
    const double horizon = detail::mc_horizon(m, q, cfg.horizon_factor);
    const int threads = detail::resolve_threads(cfg.threads);
    const std::size_t k = candidates.size();

    struct Sums {
        std::vector<double> sum, sum_sq, dsum, dsum_sq;
        std::vector<std::size_t> timeouts;
        explicit Sums(std::size_t k)
            : sum(k), sum_sq(k), dsum(k), dsum_sq(k), timeouts(k) {}
        Sums() = default;
    };
    std::vector<Sums> chunks((cfg.paths + 4095) / 4096);

    detail::run_chunked(cfg.paths, threads, [&](std::size_t ci, std::size_t lo, std::size_t hi) {
        Sums acc(k);
        std::vector<double> payoff(k);
        for (std::size_t p = lo; p < hi; ++p) {
            for (std::size_t c = 0; c < k; ++c) {
                SplitMix64 rng = SplitMix64::for_path(cfg.seed, p);
                const auto out =
                    detail::run_path(m, g, q, regions[c], x0, horizon, cfg.dt, rng);
                payoff[c] = out.payoff;
                acc.sum[c] += out.payoff;
                acc.sum_sq[c] += out.payoff * out.payoff;
                if (out.timed_out) ++acc.timeouts[c];
            }
            for (std::size_t c = 0; c < k; ++c) {
                const double d = payoff[0] - payoff[c];
                acc.dsum[c] += d;
                acc.dsum_sq[c] += d * d;
            }
        }
        chunks[ci] = std::move(acc);
    });

    const double n = static_cast<double>(cfg.paths);
    std::vector<BenchmarkRow> rows(k);
    for (std::size_t c = 0; c < k; ++c) {
        double sum = 0.0, sum_sq = 0.0, dsum = 0.0, dsum_sq = 0.0;
        std::size_t timeouts = 0;
        for (const auto& ch : chunks) {
            if (ch.sum.empty()) continue;  // padding chunk beyond path range
            sum += ch.sum[c];
            sum_sq += ch.sum_sq[c];
            dsum += ch.dsum[c];
            dsum_sq += ch.dsum_sq[c];
            timeouts += ch.timeouts[c];
        }
        BenchmarkRow& r = rows[c];
        r.region = candidates[c];
        r.estimate = sum / n;
        r.std_error = std::sqrt(std::max(0.0, sum_sq / n - r.estimate * r.estimate) / n);
        r.diff_mean = dsum / n;
        r.diff_std_error =
            std::sqrt(std::max(0.0, dsum_sq / n - r.diff_mean * r.diff_mean) / n);
        r.timeouts = timeouts;
    }
    return rows;
}

}  // namespace levystop
