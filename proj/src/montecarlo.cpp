#include "tbsim/montecarlo.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <condition_variable>
#include <mutex>
#include <sstream>
#include <thread>

namespace tbsim::mc {

namespace {
constexpr uint64_t kStreamPair = 1;
constexpr uint64_t kStreamOutcome = 2;
constexpr uint64_t kStreamAlice = 3;
constexpr uint64_t kStreamAliceDarkS1 = 4;
constexpr uint64_t kStreamAliceDarkS2 = 5;
constexpr uint64_t kStreamBob = 6;
constexpr uint64_t kStreamMisalign = 7;
constexpr uint64_t kStreamPhase = 8;
} // namespace

const char* channel_name(Channel c) {
    switch (c) {
        case Channel::S1: return "S1";
        case Channel::S2: return "S2";
        case Channel::I1: return "I1";
        case Channel::I2: return "I2";
        case Channel::Ready: return "ready";
        case Channel::Trigger: return "trigger";
    }
    return "?";
}

std::optional<Channel> channel_from_name(std::string_view name) {
    for (Channel c : {Channel::S1, Channel::S2, Channel::I1, Channel::I2,
                      Channel::Ready, Channel::Trigger})
        if (name == channel_name(c)) return c;
    return std::nullopt;
}

double db_to_transmittance(double loss_db) {
    if (!(loss_db >= 0.0)) throw std::domain_error("loss in dB must be non-negative");
    return std::pow(10.0, -loss_db / 10.0);
}

qstate::TwoQubitState RunConfig::source_state() const {
    if (state_override) return qstate::TwoQubitState(*state_override);
    return qstate::white_noise_mix(qstate::phi_plus(), source_visibility);
}

void RunConfig::validate() const {
    std::ostringstream err;
    auto fail = [&](const std::string& m) { err << (err.tellp() > 0 ? "; " : "") << m; };

    if (!(source.rep_rate_hz > 0)) fail("source.rep_rate_hz must be positive");
    if (!(source.pair_prob_per_pulse >= 0 && source.pair_prob_per_pulse < 1))
        fail("source.pair_prob_per_pulse must lie in [0, 1)");
    if (!(source_visibility >= 0 && source_visibility <= 1))
        fail("source visibility must lie in [0, 1]");
    if (!(duration_s > 0)) fail("duration must be positive");
    if (!(alice.tau_ns > 0) || !(bob.tau_ns > 0)) fail("analyzer tau must be positive");
    if (alice.insertion_loss_db < 0 || bob.insertion_loss_db < 0 ||
        alice_coupling_loss_db < 0 || bob_coupling_loss_db < 0 || link.loss_db < 0)
        fail("losses must be non-negative");
    if (!(link.duty_cycle >= 0 && link.duty_cycle <= 1))
        fail("duty cycle must lie in [0, 1]");
    if (!(link.stabilization_period_s > 0)) fail("stabilization period must be positive");
    if (link.misalignment_drift_rad_per_s < 0) fail("misalignment drift must be non-negative");
    if (threads < 1) fail("thread count must be at least 1");
    if (timing.jitter_sigma_ns < 0) fail("timestamp jitter must be non-negative");

    const double period = pulse_period_ns();
    for (const auto* d : {&detectors.s1, &detectors.s2, &detectors.i1, &detectors.i2}) {
        if (!(d->efficiency >= 0 && d->efficiency <= 1)) fail("detector efficiency must lie in [0, 1]");
        if (d->dead_time_ns < 0) fail("dead time must be non-negative");
        if (d->dark_rate_hz < 0 || d->dark_prob_per_gate < 0) fail("dark rates must be non-negative");
        if (d->kind == DetectorKind::Gated && !(d->gate_width_ns < period))
            fail("gate width must be smaller than the pulse period");
    }
    if (detectors.i1.gate_width_ns != detectors.i2.gate_width_ns)
        fail("gated detectors must share one gate width");
    if (std::abs(timing.trigger_latency_ns + timing.gate_offset_ns) >= period / 2)
        fail("gate start must stay within half a pulse period of the pulse");

    if (err.tellp() > 0) throw ConfigError(err.str());
}

MisalignmentWalk::MisalignmentWalk(const ChannelConfig& chan, Rng rng)
    : drift_(chan.misalignment_drift_rad_per_s), period_s_(chan.stabilization_period_s),
      rng_(rng) {}

double MisalignmentWalk::at(double t_s) {
    if (t_s < 0) throw std::domain_error("misalignment query time must be non-negative");
    if (drift_ <= 0) return 0.0;
    // Reset at each stabilization boundary.
    if (std::floor(t_s / period_s_) != std::floor(last_t_ / period_s_)) {
        angle_ = 0.0;
        last_t_ = std::floor(t_s / period_s_) * period_s_;
    }
    const double dt = t_s - last_t_;
    if (dt > 0) {
        angle_ += drift_ * std::sqrt(dt) * rng_.normal();
        last_t_ = t_s;
    }
    return angle_;
}

void CoincidenceConfig::validate() const {
    if (!(window_ns > 0) || !(window_ns < tau_ns))
        throw ConfigError("coincidence window must satisfy 0 < window < tau (slots would overlap)");
    if (!(period_ns > 0)) throw ConfigError("pulse period must be positive");
    if (std::abs(slot_offset_ns) >= period_ns / 2)
        throw ConfigError("slot offset must stay within half a pulse period");
}

CoincidenceAccumulator::CoincidenceAccumulator(const CoincidenceConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    inv_period_ = 1.0 / cfg_.period_ns;
}

void CoincidenceAccumulator::ingest(const DetectionRecord& r) {
    int64_t p;
    int side = -1; // 0 = Alice, 1 = Bob, -1 = ready
    int outcome = 0;
    switch (r.channel) {
        case Channel::S1: side = 0; outcome = cfg_.s1_is_plus ? +1 : -1; break;
        case Channel::S2: side = 0; outcome = cfg_.s1_is_plus ? -1 : +1; break;
        case Channel::I1: side = 1; outcome = cfg_.i1_is_plus ? +1 : -1; break;
        case Channel::I2: side = 1; outcome = cfg_.i1_is_plus ? -1 : +1; break;
        case Channel::Ready:
            p = static_cast<int64_t>(r.timestamp_ns * inv_period_ + 0.5);
            break;
        case Channel::Trigger:
        default:
            return;
    }

    if (side >= 0) {
        p = static_cast<int64_t>((r.timestamp_ns - cfg_.slot_offset_ns) * inv_period_ + 0.5);
        const double center = static_cast<double>(p) * cfg_.period_ns + cfg_.slot_offset_ns;
        if (std::abs(r.timestamp_ns - center) > cfg_.window_ns / 2) return; // outside middle slot
    }

    // Two periods stay in flight: a ready signal is timestamped ahead of the
    // pulse it gates, so records of adjacent periods can interleave slightly.
    if (base_period_ == INT64_MIN) base_period_ = p;
    if (p < base_period_) return; // behind the reorder horizon; never in-window
    if (p > base_period_ + 2) {
        flush(0);
        flush(1);
        base_period_ = p;
    }
    while (p > base_period_ + 1) {
        flush(0);
        state_[0] = state_[1];
        state_[1] = PeriodState{};
        ++base_period_;
    }
    PeriodState& st = state_[p - base_period_];
    if (side == 0) {
        if (st.alice_outcome == 0) st.alice_outcome = outcome;
    } else if (side == 1) {
        if (st.bob_outcome == 0) st.bob_outcome = outcome;
    } else {
        st.ready = true;
    }
}

void CoincidenceAccumulator::flush(int slot) {
    PeriodState& st = state_[slot];
    if (st.alice_outcome != 0 && st.bob_outcome != 0 && (st.ready || !cfg_.require_ready)) {
        if (st.alice_outcome > 0)
            (st.bob_outcome > 0 ? counts_.n_pp : counts_.n_pm) += 1;
        else
            (st.bob_outcome > 0 ? counts_.n_mp : counts_.n_mm) += 1;
    }
    st = PeriodState{};
}

CoincidenceCounts CoincidenceAccumulator::counts() {
    flush(0);
    flush(1);
    base_period_ = INT64_MIN;
    return counts_;
}

CoincidenceCounts extract_coincidences(std::span<const DetectionRecord> records,
                                       const CoincidenceConfig& cfg) {
    CoincidenceAccumulator acc(cfg);
    for (const auto& r : records) acc.on_record(r);
    return acc.counts();
}

namespace {

// Flattened per-cycle sampling tables; everything the pulse loop touches.
struct CycleContext {
    // outcome CDF over the 36 joint (slot, port) results, plus decode tables
    std::array<double, 36> cdf;
    std::array<int8_t, 36> slot_a, slot_b;
    std::array<int8_t, 36> det_a, det_b; // 0 = plus-port detector, 1 = minus

    double p_pair = 0;
    double p_alice = 0;       // path (and efficiency when foldable)
    // The pulse loop walks only pairs whose Alice photon reaches a detector
    // (probability p_pair * p_alice per pulse). Pairs lost on Alice's side
    // matter only in the rare dark-gated periods and are recovered there
    // from the conditional probability p_lost_pair.
    double p_thinned = 0;
    double p_lost_pair = 0;
    double p_bob_base = 0;    // path without the misalignment factor
    bool alice_eff_folded = true, bob_eff_folded = true;
    double eff_a[2] = {1, 1}, eff_i[2] = {1, 1};
    double dark_gate_prob[2] = {0, 0};
    // Joint per-gate dark outcome as one draw: [0, t1) I1 only,
    // [t1, t2) I2 only, [t2, t3) both, [t3, 1) none.
    double dark_t1 = 0, dark_t2 = 0, dark_t3 = 0;
    double dead_ns[4] = {0, 0, 0, 0}; // S1, S2, I1, I2
    double tau_a = 1.4, tau_b = 1.4;
    double jitter = 0.1;
    double period_ns = 50;
    double trigger_latency = 0, gate_offset = -2.1, gate_width = 7;
    bool misalign_active = false;
};

struct PendingClick {
    double t;
    int det;        // 0/1 within the side
    bool is_photon; // false = dark
};

CycleContext build_cycle_context(const RunConfig& rc, double delta_a, double delta_b) {
    CycleContext cx;
    cx.p_pair = rc.source.pair_prob_per_pulse;
    cx.period_ns = rc.pulse_period_ns();
    cx.tau_a = rc.alice.tau_ns;
    cx.tau_b = rc.bob.tau_ns;
    cx.jitter = rc.timing.jitter_sigma_ns;
    cx.trigger_latency = rc.timing.trigger_latency_ns;
    cx.gate_offset = rc.timing.gate_offset_ns;
    cx.gate_width = rc.detectors.i1.gate_width_ns;
    cx.dead_ns[0] = rc.detectors.s1.dead_time_ns;
    cx.dead_ns[1] = rc.detectors.s2.dead_time_ns;
    cx.dead_ns[2] = rc.detectors.i1.dead_time_ns;
    cx.dead_ns[3] = rc.detectors.i2.dead_time_ns;
    cx.dark_gate_prob[0] = rc.detectors.i1.dark_prob_per_gate;
    cx.dark_gate_prob[1] = rc.detectors.i2.dark_prob_per_gate;
    const double d1 = cx.dark_gate_prob[0], d2 = cx.dark_gate_prob[1];
    cx.dark_t1 = d1 * (1 - d2);
    cx.dark_t2 = cx.dark_t1 + d2 * (1 - d1);
    cx.dark_t3 = cx.dark_t2 + d1 * d2;
    cx.misalign_active = rc.link.misalignment_drift_rad_per_s > 0;

    const double t_alice_path = db_to_transmittance(rc.alice_coupling_loss_db) *
                                db_to_transmittance(rc.alice.insertion_loss_db);
    const double t_bob_path = db_to_transmittance(rc.bob_coupling_loss_db) *
                              db_to_transmittance(rc.link.loss_db) *
                              db_to_transmittance(rc.bob.insertion_loss_db);
    cx.eff_a[0] = rc.detectors.s1.efficiency;
    cx.eff_a[1] = rc.detectors.s2.efficiency;
    cx.eff_i[0] = rc.detectors.i1.efficiency;
    cx.eff_i[1] = rc.detectors.i2.efficiency;
    cx.alice_eff_folded = cx.eff_a[0] == cx.eff_a[1];
    cx.bob_eff_folded = cx.eff_i[0] == cx.eff_i[1];
    cx.p_alice = t_alice_path * (cx.alice_eff_folded ? cx.eff_a[0] : 1.0);
    cx.p_bob_base = t_bob_path * (cx.bob_eff_folded ? cx.eff_i[0] : 1.0);
    cx.p_thinned = cx.p_pair * cx.p_alice;
    cx.p_lost_pair = cx.p_thinned < 1.0
                         ? cx.p_pair * (1.0 - cx.p_alice) / (1.0 - cx.p_thinned)
                         : 0.0;

    // Joint outcome distribution over (slot, port) pairs from the analyzer
    // POVMs at the jittered interferometer phases.
    const auto povm_a = optics::analyzer_povm(rc.alice.projection, rc.alice.phase_rad + delta_a);
    const auto povm_b = optics::analyzer_povm(rc.bob.projection, rc.bob.phase_rad + delta_b);
    const qstate::Mat4 rho = rc.source_state().rho();

    double cum = 0;
    for (int ia = 0; ia < 6; ++ia) {
        for (int ib = 0; ib < 6; ++ib) {
            qstate::Mat4 joint;
            for (int r = 0; r < 2; ++r)
                for (int c = 0; c < 2; ++c)
                    joint.block<2, 2>(2 * r, 2 * c) = povm_a.element[ia](r, c) * povm_b.element[ib];
            double p = (rho * joint).trace().real();
            if (p < 0) p = 0;
            const int idx = 6 * ia + ib;
            cum += p;
            cx.cdf[idx] = cum;
            cx.slot_a[idx] = static_cast<int8_t>(ia / 2);
            cx.det_a[idx] = static_cast<int8_t>(ia % 2);
            cx.slot_b[idx] = static_cast<int8_t>(ib / 2);
            cx.det_b[idx] = static_cast<int8_t>(ib % 2);
        }
    }
    // Normalize away rounding; the POVM elements sum to identity.
    for (auto& c : cx.cdf) c /= cum;
    cx.cdf[35] = 1.0;
    return cx;
}

class CycleSimulator {
public:
    CycleSimulator(const RunConfig& rc, uint64_t cycle_idx)
        : rc_(rc),
          rng_outcome_(derive_stream_key(rc.source.seed, cycle_idx, kStreamOutcome)),
          rng_pair_(derive_stream_key(rc.source.seed, cycle_idx, kStreamPair)),
          rng_alice_(derive_stream_key(rc.source.seed, cycle_idx, kStreamAlice)),
          rng_bob_(derive_stream_key(rc.source.seed, cycle_idx, kStreamBob)),
          walk_(rc.link, Rng(derive_stream_key(rc.source.seed, cycle_idx, kStreamMisalign))) {
        Rng phase(derive_stream_key(rc.source.seed, cycle_idx, kStreamPhase));
        const double da = rc.alice_phase_noise_sigma_rad * phase.normal();
        const double db = rc.bob_phase_noise_sigma_rad * phase.normal();
        cx_ = build_cycle_context(rc, da, db);

        const double cycle_ns = rc.link.stabilization_period_s * 1e9;
        t_begin_ = static_cast<double>(cycle_idx) * cycle_ns;
        t_end_ = std::min(t_begin_ + cycle_ns, rc.duration_s * 1e9);
        const double dead_ns = (1.0 - rc.link.duty_cycle) * cycle_ns;
        k_end_ = static_cast<int64_t>(std::ceil(t_end_ / cx_.period_ns));
        k_live_ = std::min(
            k_end_, static_cast<int64_t>(std::ceil((t_begin_ + dead_ns) / cx_.period_ns)));

        // Free-running dark clicks for the whole cycle, merged and sorted.
        Rng dark1(derive_stream_key(rc.source.seed, cycle_idx, kStreamAliceDarkS1));
        Rng dark2(derive_stream_key(rc.source.seed, cycle_idx, kStreamAliceDarkS2));
        collect_darks(dark1, rc.detectors.s1.dark_rate_hz, 0);
        collect_darks(dark2, rc.detectors.s2.dark_rate_hz, 1);
        std::sort(darks_.begin(), darks_.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        std::fill(std::begin(last_fire_), std::end(last_fire_), -1e30);

        const double expected_gates =
            cx_.p_thinned * static_cast<double>(k_end_ - k_live_) + static_cast<double>(darks_.size());
        expected_records_ =
            std::min<size_t>(static_cast<size_t>(3.5 * expected_gates) + 64, 1 << 22);
    }

    /// Fill and return the (recycled) buffer; capacity is kept across cycles.
    std::vector<DetectionRecord> run(std::vector<DetectionRecord> buffer) {
        records_ = std::move(buffer);
        records_.clear();
        records_.reserve(expected_records_);
        // Hoisted geometric-skip constant for the thinned pair stream.
        const double p_thin = cx_.p_thinned;
        const double inv_log_q =
            (p_thin > 1e-300 && p_thin < 1.0) ? 1.0 / std::log1p(-p_thin) : 0.0;
        const double horizon = static_cast<double>(k_end_ - k_live_) + 1.0;

        size_t di = 0;
        int64_t k = k_live_ - 1;
        while (true) {
            double skip = horizon;
            if (p_thin >= 1.0) skip = 0.0;
            else if (inv_log_q != 0.0)
                skip = std::floor(std::log(rng_pair_.uniform_pos()) * inv_log_q);
            if (skip >= static_cast<double>(k_end_ - k)) k = k_end_;
            else k += 1 + static_cast<int64_t>(skip);
            // Dark-only periods before this pair pulse.
            while (di < darks_.size() && period_of(darks_[di].first) < k)
                di = process_period(period_of(darks_[di].first), false, di);
            if (k >= k_end_) break;
            di = process_period(k, true, di);
        }
        return std::move(records_);
    }

private:
    void collect_darks(Rng& rng, double rate_hz, int det) {
        if (rate_hz <= 0) return;
        double t = t_begin_;
        while (true) {
            t += rng.exponential(rate_hz) * 1e9;
            if (t >= t_end_) break;
            darks_.emplace_back(t, det);
        }
    }

    int64_t period_of(double t_ns) const {
        return static_cast<int64_t>(std::floor(t_ns / cx_.period_ns));
    }

    bool live(int det, double t) const { return t - last_fire_[det] >= cx_.dead_ns[det]; }

    // The paddle walk drifts on the seconds scale; sample-and-hold on a 10 ms
    // grid instead of advancing the diffusion at every pulse.
    double misalign_cos2(double t_s) {
        const double bucket = std::floor(t_s * 100.0);
        if (bucket != misalign_bucket_) {
            misalign_bucket_ = bucket;
            const double theta = walk_.at(bucket * 0.01);
            misalign_cos2_ = std::cos(theta) * std::cos(theta);
        }
        return misalign_cos2_;
    }

    // Append keeping the stream time-ordered. Periods arrive pre-sorted, so
    // the walk-back only triggers on the rare overlap with the previous
    // period's tail and is O(1) amortized.
    void emit(Channel ch, double t) {
        records_.push_back({ch, t});
        for (size_t i = records_.size() - 1; i > 0; --i) {
            const auto& prev = records_[i - 1];
            if (prev.timestamp_ns < t || (prev.timestamp_ns == t && prev.channel <= ch)) break;
            std::swap(records_[i - 1], records_[i]);
        }
    }

    int sample_outcome() {
        const double u = rng_outcome_.uniform();
        const auto it = std::upper_bound(cx_.cdf.begin(), cx_.cdf.end(), u);
        return static_cast<int>(std::min<std::ptrdiff_t>(it - cx_.cdf.begin(), 35));
    }

    // Simulate one pulse period; returns the dark index after consuming this
    // period's dark clicks. `pair` marks a pulse whose Alice photon reached a
    // detector face; dark-only periods can still hide a pair that lost its
    // Alice photon, sampled at the conditional probability below.
    size_t process_period(int64_t k, bool pair, size_t di) {
        const double t0 = static_cast<double>(k) * cx_.period_ns;

        int outcome = -1;
        PendingClick alice[4];
        int n_alice = 0;

        if (pair) {
            outcome = sample_outcome();
            const double t = t0 + cx_.slot_a[outcome] * cx_.tau_a + cx_.jitter * rng_alice_.normal();
            alice[n_alice++] = {t, cx_.det_a[outcome], true};
        }
        while (di < darks_.size() && period_of(darks_[di].first) == k && n_alice < 4) {
            alice[n_alice++] = {darks_[di].first, darks_[di].second, false};
            ++di;
        }
        if (n_alice > 1)
            std::sort(alice, alice + n_alice, [](const PendingClick& a, const PendingClick& b) {
                return a.t < b.t;
            });

        DetectionRecord out[10];
        int n_out = 0;
        for (int i = 0; i < n_alice; ++i) {
            const auto& c = alice[i];
            if (!live(c.det, c.t)) continue;
            if (c.is_photon && !cx_.alice_eff_folded && !rng_alice_.bernoulli(cx_.eff_a[c.det]))
                continue;
            last_fire_[c.det] = c.t;
            out[n_out++] = {static_cast<Channel>(c.det), c.t};
        }
        if (n_out == 0) return di;

        const double t_trig = t0 + cx_.trigger_latency;
        out[n_out++] = {Channel::Trigger, t_trig};
        const double gate0 = t_trig + cx_.gate_offset;
        const double gate1 = gate0 + cx_.gate_width;
        if (live(2, gate0) && live(3, gate0)) out[n_out++] = {Channel::Ready, gate0};

        bool bob_photon_present = pair;
        if (!pair && k >= k_live_ && rng_bob_.bernoulli(cx_.p_lost_pair)) {
            outcome = sample_outcome(); // only Bob's marginal is used
            bob_photon_present = true;
        }

        PendingClick bob[3];
        int n_bob = 0;
        if (bob_photon_present) {
            double p_bob = cx_.p_bob_base;
            if (cx_.misalign_active) p_bob *= misalign_cos2((t0 - t_begin_) * 1e-9);
            if (rng_bob_.bernoulli(p_bob)) {
                const double t = t0 + cx_.slot_b[outcome] * cx_.tau_b + cx_.jitter * rng_bob_.normal();
                bob[n_bob++] = {t, cx_.det_b[outcome], true};
            }
        }
        if (cx_.dark_t3 > 0) {
            const double u = rng_bob_.uniform();
            if (u < cx_.dark_t3) {
                if (u < cx_.dark_t1 || u >= cx_.dark_t2)
                    bob[n_bob++] = {gate0 + rng_bob_.uniform() * cx_.gate_width, 0, false};
                if (u >= cx_.dark_t1)
                    bob[n_bob++] = {gate0 + rng_bob_.uniform() * cx_.gate_width, 1, false};
            }
        }

        if (n_bob > 1)
            std::sort(bob, bob + n_bob, [](const PendingClick& a, const PendingClick& b) {
                return a.t < b.t;
            });
        for (int i = 0; i < n_bob; ++i) {
            const auto& c = bob[i];
            if (c.t < gate0 || c.t > gate1) continue;
            if (!live(2 + c.det, c.t)) continue;
            if (c.is_photon && !cx_.bob_eff_folded && !rng_bob_.bernoulli(cx_.eff_i[c.det]))
                continue;
            last_fire_[2 + c.det] = c.t;
            out[n_out++] = {static_cast<Channel>(2 + c.det), c.t};
        }

        // Insertion sort the period's handful of records, then append.
        for (int i = 1; i < n_out; ++i) {
            const DetectionRecord r = out[i];
            int j = i - 1;
            while (j >= 0 && (out[j].timestamp_ns > r.timestamp_ns ||
                              (out[j].timestamp_ns == r.timestamp_ns && out[j].channel > r.channel))) {
                out[j + 1] = out[j];
                --j;
            }
            out[j + 1] = r;
        }
        for (int i = 0; i < n_out; ++i) emit(out[i].channel, out[i].timestamp_ns);
        return di;
    }

    const RunConfig& rc_;
    CycleContext cx_;
    Rng rng_outcome_, rng_pair_, rng_alice_, rng_bob_;
    MisalignmentWalk walk_;
    double t_begin_ = 0, t_end_ = 0;
    int64_t k_live_ = 0, k_end_ = 0;
    std::vector<std::pair<double, int>> darks_;
    double last_fire_[4];
    double misalign_bucket_ = -1.0;
    double misalign_cos2_ = 1.0;
    size_t expected_records_ = 0;
    std::vector<DetectionRecord> records_;
};

} // namespace

void simulate_run(const RunConfig& cfg, RecordSink& sink) {
    cfg.validate();
    const double cycle_s = cfg.link.stabilization_period_s;
    const uint64_t n_cycles = static_cast<uint64_t>(std::ceil(cfg.duration_s / cycle_s));

    auto run_cycle = [&cfg](uint64_t c, std::vector<DetectionRecord> buffer) {
        return CycleSimulator(cfg, c).run(std::move(buffer));
    };

    if (cfg.threads <= 1 || n_cycles <= 1) {
        std::vector<DetectionRecord> buffer;
        for (uint64_t c = 0; c < n_cycles; ++c) {
            buffer = run_cycle(c, std::move(buffer));
            sink.on_records(buffer);
        }
        return;
    }

    // Pipelined workers: cycles are claimed from an atomic counter, finished
    // buffers parked in a bounded ring, and the consumer delivers them to the
    // sink strictly in cycle order, so any thread count yields one stream.
    // Consumed buffers return to a freelist so steady state allocates nothing.
    struct Pipeline {
        std::mutex m;
        std::condition_variable cv;
        std::vector<std::optional<std::vector<DetectionRecord>>> slots;
        std::vector<std::vector<DetectionRecord>> freelist;
        std::atomic<uint64_t> next_claim{0};
        uint64_t next_deliver = 0;
        uint64_t window = 0;
        std::exception_ptr error;
    } pipe;
    pipe.window = static_cast<uint64_t>(cfg.threads) + 2;
    pipe.slots.resize(pipe.window);

    auto worker = [&]() {
        try {
            while (true) {
                const uint64_t c = pipe.next_claim.fetch_add(1);
                if (c >= n_cycles) return;
                std::vector<DetectionRecord> buffer;
                {
                    std::unique_lock lock(pipe.m);
                    if (!pipe.freelist.empty()) {
                        buffer = std::move(pipe.freelist.back());
                        pipe.freelist.pop_back();
                    }
                }
                auto records = run_cycle(c, std::move(buffer));
                std::unique_lock lock(pipe.m);
                pipe.cv.wait(lock, [&] {
                    return pipe.error || c < pipe.next_deliver + pipe.window;
                });
                if (pipe.error) return;
                pipe.slots[c % pipe.window] = std::move(records);
                pipe.cv.notify_all();
            }
        } catch (...) {
            std::unique_lock lock(pipe.m);
            pipe.error = std::current_exception();
            pipe.cv.notify_all();
        }
    };

    std::vector<std::thread> threads;
    threads.reserve(static_cast<size_t>(cfg.threads));
    for (int t = 0; t < cfg.threads; ++t) threads.emplace_back(worker);

    while (pipe.next_deliver < n_cycles) {
        std::vector<DetectionRecord> batch;
        {
            std::unique_lock lock(pipe.m);
            pipe.cv.wait(lock, [&] {
                return pipe.error || pipe.slots[pipe.next_deliver % pipe.window].has_value();
            });
            if (pipe.error) break;
            batch = std::move(*pipe.slots[pipe.next_deliver % pipe.window]);
            pipe.slots[pipe.next_deliver % pipe.window].reset();
            ++pipe.next_deliver;
            pipe.cv.notify_all();
        }
        sink.on_records(batch);
        std::unique_lock lock(pipe.m);
        if (pipe.freelist.size() < pipe.window) pipe.freelist.push_back(std::move(batch));
    }

    for (auto& t : threads) t.join();
    if (pipe.error) std::rethrow_exception(pipe.error);
}

std::vector<DetectionRecord> simulate_run_collect(const RunConfig& cfg) {
    struct Collector : RecordSink {
        std::vector<DetectionRecord> out;
        void on_record(const DetectionRecord& r) override { out.push_back(r); }
    } collector;
    simulate_run(cfg, collector);
    return std::move(collector.out);
}

} // namespace tbsim::mc
