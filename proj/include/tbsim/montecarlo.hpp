// montecarlo.hpp
// Event-level simulation of the full apparatus: pulsed pair source, lossy
// transmission with duty-cycled polarization stabilization, free-running and
// gated detectors, trigger/ready logic and the TDC record stream, plus the
// coincidence extraction that feeds the correlation estimators.
//
// Reproducibility contract: one root seed; the run is partitioned at
// stabilization-cycle boundaries into independent tasks, each drawing from
// its own counter-based stream. Any thread count produces bit-identical
// record streams. Detector dead-time state does not cross cycle boundaries
// (a 10 us memory against a 10 s cycle).

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "tbsim/optics.hpp"
#include "tbsim/rng.hpp"

namespace tbsim::mc {

enum class Channel : uint8_t { S1 = 0, S2 = 1, I1 = 2, I2 = 3, Ready = 4, Trigger = 5 };

const char* channel_name(Channel c);
std::optional<Channel> channel_from_name(std::string_view name);

struct DetectionRecord {
    Channel channel;
    double timestamp_ns;
};

/// Consumer of a time-ordered record stream. Batches arrive in time order;
/// the default batch handler just loops over on_record.
class RecordSink {
public:
    virtual ~RecordSink() = default;
    virtual void on_record(const DetectionRecord& r) = 0;
    virtual void on_records(std::span<const DetectionRecord> records) {
        for (const auto& r : records) on_record(r);
    }
};

struct SourceConfig {
    double rep_rate_hz = 2.0e7;
    double pair_prob_per_pulse = 0.001;
    uint64_t seed = 1;
};

struct ChannelConfig {
    double loss_db = 0.0;                      ///< link loss (Bob's fiber)
    double duty_cycle = 0.96;                  ///< live fraction of each stabilization period
    double misalignment_drift_rad_per_s = 0.0; ///< diffusion scale of the paddle walk
    double stabilization_period_s = 10.0;
};

enum class DetectorKind { FreeRunning, Gated };

struct DetectorConfig {
    DetectorKind kind = DetectorKind::FreeRunning;
    double efficiency = 1.0;
    double dark_rate_hz = 0.0;        ///< free-running darks
    double dark_prob_per_gate = 0.0;  ///< gated darks
    double dead_time_ns = 0.0;
    double gate_width_ns = 7.0;       ///< gated only
};

struct DetectorBank {
    DetectorConfig s1, s2, i1, i2;
};

struct TimingConfig {
    double jitter_sigma_ns = 0.1;     ///< Gaussian timestamp jitter per click
    double gate_offset_ns = -2.1;     ///< gate start relative to the trigger
    double trigger_latency_ns = 0.0;
};

struct RunConfig {
    SourceConfig source;
    double source_visibility = 1.0;   ///< Werner visibility of the emitted state
    optics::AnalyzerConfig alice;     ///< phase, tau, insertion loss, projection
    optics::AnalyzerConfig bob;
    double alice_coupling_loss_db = 0.0;
    double bob_coupling_loss_db = 0.0;
    ChannelConfig link;               ///< Bob's transmission link
    DetectorBank detectors;
    TimingConfig timing;
    double alice_phase_noise_sigma_rad = 0.0; ///< per-cycle phase jitter
    double bob_phase_noise_sigma_rad = 0.0;
    double duration_s = 1.0;
    int threads = 1;
    /// Optional replacement for the Werner source state (tests).
    std::optional<qstate::Mat4> state_override;

    double pulse_period_ns() const { return 1e9 / source.rep_rate_hz; }
    qstate::TwoQubitState source_state() const;
    /// Throws ConfigError listing every violated precondition.
    void validate() const;
};

/// 10^(-loss_db/10); negative input is a domain error.
double db_to_transmittance(double loss_db);

/// Paddle misalignment angle as a Brownian walk that resets to zero at each
/// stabilization boundary. Query times must be non-decreasing within a cycle.
class MisalignmentWalk {
public:
    MisalignmentWalk(const ChannelConfig& chan, Rng rng);
    /// Angle at time t (seconds since the cycle start).
    double at(double t_s);

private:
    double drift_;
    double period_s_;
    Rng rng_;
    double angle_ = 0.0;
    double last_t_ = 0.0;
};

/// Run the event-level simulation, streaming records in time order.
void simulate_run(const RunConfig& cfg, RecordSink& sink);

/// Convenience wrapper collecting the full stream (short runs only).
std::vector<DetectionRecord> simulate_run_collect(const RunConfig& cfg);

struct CoincidenceCounts {
    uint64_t n_pp = 0, n_pm = 0, n_mp = 0, n_mm = 0;
    uint64_t total() const { return n_pp + n_pm + n_mp + n_mm; }
    bool operator==(const CoincidenceCounts&) const = default;
};

struct CoincidenceConfig {
    double window_ns = 0.6;       ///< middle-slot acceptance width (per side)
    double slot_offset_ns = 1.4;  ///< middle-slot center relative to the pulse
    double period_ns = 50.0;
    double tau_ns = 1.4;          ///< slot spacing, for window validation
    bool require_ready = true;    ///< condition on the ready signal
    bool s1_is_plus = true;       ///< channel-to-outcome mapping
    bool i1_is_plus = true;

    void validate() const;
};

/// Streaming coincidence counter: pairs one Alice and one Bob record per
/// pulse period when both fall inside the middle-slot window, optionally
/// conditioned on the period's ready signal. Each record is used at most once.
class CoincidenceAccumulator final : public RecordSink {
public:
    explicit CoincidenceAccumulator(const CoincidenceConfig& cfg);
    void on_record(const DetectionRecord& r) override { ingest(r); }
    void on_records(std::span<const DetectionRecord> records) override {
        for (const auto& r : records) ingest(r);
    }
    /// Counts accumulated so far (flushes the pending periods).
    CoincidenceCounts counts();

private:
    struct PeriodState {
        int alice_outcome = 0;
        int bob_outcome = 0;
        bool ready = false;
    };
    void ingest(const DetectionRecord& r);
    void flush(int slot);

    CoincidenceConfig cfg_;
    double inv_period_ = 0.0;
    CoincidenceCounts counts_;
    int64_t base_period_ = INT64_MIN;
    PeriodState state_[2];
};

/// Offline variant over a materialized stream (e.g. a re-read event file).
CoincidenceCounts extract_coincidences(std::span<const DetectionRecord> records,
                                       const CoincidenceConfig& cfg);

/// Fan-out sink, e.g. to feed ready-conditioned and naive accumulators from
/// one simulation pass.
class TeeSink : public RecordSink {
public:
    void add(RecordSink* s) { sinks_.push_back(s); }
    void on_record(const DetectionRecord& r) override {
        for (auto* s : sinks_) s->on_record(r);
    }

private:
    std::vector<RecordSink*> sinks_;
};

} // namespace tbsim::mc
