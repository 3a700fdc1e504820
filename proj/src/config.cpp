#include "tbsim/config.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

#include <json.hpp>

#include "tbsim/io.hpp"

namespace tbsim::cfg {

namespace {

struct KeySpec {
    std::string name;
    std::function<void(ExperimentConfig&, const std::string&)> set;
    std::function<std::string(const ExperimentConfig&)> get;
};

double parse_double(const std::string& s) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0') throw std::invalid_argument("expected a number");
    return v;
}

int parse_int(const std::string& s) {
    char* end = nullptr;
    const long v = std::strtol(s.c_str(), &end, 10);
    if (end == s.c_str() || *end != '\0') throw std::invalid_argument("expected an integer");
    return static_cast<int>(v);
}

uint64_t parse_u64(const std::string& s) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(s.c_str(), &end, 10);
    if (end == s.c_str() || *end != '\0') throw std::invalid_argument("expected an unsigned integer");
    return v;
}

bool parse_bool(const std::string& s) {
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw std::invalid_argument("expected true/false");
}

const std::vector<KeySpec>& registry() {
    static const std::vector<KeySpec> reg = [] {
        std::vector<KeySpec> r;
        auto dbl = [&r](const char* name, auto ref) {
            r.push_back({name,
                         [ref](ExperimentConfig& c, const std::string& v) { *ref(c) = parse_double(v); },
                         [ref](const ExperimentConfig& c) {
                             return io::format_double(*ref(const_cast<ExperimentConfig&>(c)));
                         }});
        };
        auto integer = [&r](const char* name, auto ref) {
            r.push_back({name,
                         [ref](ExperimentConfig& c, const std::string& v) { *ref(c) = parse_int(v); },
                         [ref](const ExperimentConfig& c) {
                             return std::to_string(*ref(const_cast<ExperimentConfig&>(c)));
                         }});
        };
        auto boolean = [&r](const char* name, auto ref) {
            r.push_back({name,
                         [ref](ExperimentConfig& c, const std::string& v) { *ref(c) = parse_bool(v); },
                         [ref](const ExperimentConfig& c) {
                             return std::string(*ref(const_cast<ExperimentConfig&>(c)) ? "true" : "false");
                         }});
        };

        r.push_back({"run.scenario",
                     [](ExperimentConfig& c, const std::string& v) { c.scenario = v; },
                     [](const ExperimentConfig& c) { return c.scenario; }});
        r.push_back({"run.seed",
                     [](ExperimentConfig& c, const std::string& v) { c.run.source.seed = parse_u64(v); },
                     [](const ExperimentConfig& c) { return std::to_string(c.run.source.seed); }});
        dbl("run.duration_s", [](ExperimentConfig& c) { return &c.run.duration_s; });
        integer("run.threads", [](ExperimentConfig& c) { return &c.run.threads; });

        dbl("source.rep_rate_hz", [](ExperimentConfig& c) { return &c.run.source.rep_rate_hz; });
        dbl("source.pair_prob_per_pulse",
            [](ExperimentConfig& c) { return &c.run.source.pair_prob_per_pulse; });
        dbl("source.visibility", [](ExperimentConfig& c) { return &c.run.source_visibility; });

        dbl("alice.phase_rad", [](ExperimentConfig& c) { return &c.run.alice.phase_rad; });
        dbl("alice.tau_ns", [](ExperimentConfig& c) { return &c.run.alice.tau_ns; });
        dbl("alice.insertion_loss_db",
            [](ExperimentConfig& c) { return &c.run.alice.insertion_loss_db; });
        dbl("alice.coupling_loss_db",
            [](ExperimentConfig& c) { return &c.run.alice_coupling_loss_db; });
        dbl("alice.phase_noise_sigma_rad",
            [](ExperimentConfig& c) { return &c.run.alice_phase_noise_sigma_rad; });

        dbl("bob.phase_rad", [](ExperimentConfig& c) { return &c.run.bob.phase_rad; });
        dbl("bob.tau_ns", [](ExperimentConfig& c) { return &c.run.bob.tau_ns; });
        dbl("bob.insertion_loss_db",
            [](ExperimentConfig& c) { return &c.run.bob.insertion_loss_db; });
        dbl("bob.coupling_loss_db", [](ExperimentConfig& c) { return &c.run.bob_coupling_loss_db; });
        dbl("bob.phase_noise_sigma_rad",
            [](ExperimentConfig& c) { return &c.run.bob_phase_noise_sigma_rad; });

        dbl("link.loss_db", [](ExperimentConfig& c) { return &c.run.link.loss_db; });
        dbl("link.duty_cycle", [](ExperimentConfig& c) { return &c.run.link.duty_cycle; });
        dbl("link.stabilization_period_s",
            [](ExperimentConfig& c) { return &c.run.link.stabilization_period_s; });
        dbl("link.misalignment_drift_rad_per_s",
            [](ExperimentConfig& c) { return &c.run.link.misalignment_drift_rad_per_s; });

        r.push_back({"det_alice.efficiency",
                     [](ExperimentConfig& c, const std::string& v) {
                         c.run.detectors.s1.efficiency = c.run.detectors.s2.efficiency = parse_double(v);
                     },
                     [](const ExperimentConfig& c) {
                         return io::format_double(c.run.detectors.s1.efficiency);
                     }});
        r.push_back({"det_alice.dark_rate_hz",
                     [](ExperimentConfig& c, const std::string& v) {
                         c.run.detectors.s1.dark_rate_hz = c.run.detectors.s2.dark_rate_hz = parse_double(v);
                     },
                     [](const ExperimentConfig& c) {
                         return io::format_double(c.run.detectors.s1.dark_rate_hz);
                     }});
        r.push_back({"det_alice.dead_time_ns",
                     [](ExperimentConfig& c, const std::string& v) {
                         c.run.detectors.s1.dead_time_ns = c.run.detectors.s2.dead_time_ns = parse_double(v);
                     },
                     [](const ExperimentConfig& c) {
                         return io::format_double(c.run.detectors.s1.dead_time_ns);
                     }});
        r.push_back({"det_bob.efficiency",
                     [](ExperimentConfig& c, const std::string& v) {
                         c.run.detectors.i1.efficiency = c.run.detectors.i2.efficiency = parse_double(v);
                     },
                     [](const ExperimentConfig& c) {
                         return io::format_double(c.run.detectors.i1.efficiency);
                     }});
        r.push_back({"det_bob.dark_prob_per_gate",
                     [](ExperimentConfig& c, const std::string& v) {
                         c.run.detectors.i1.dark_prob_per_gate = c.run.detectors.i2.dark_prob_per_gate =
                             parse_double(v);
                     },
                     [](const ExperimentConfig& c) {
                         return io::format_double(c.run.detectors.i1.dark_prob_per_gate);
                     }});
        r.push_back({"det_bob.dead_time_ns",
                     [](ExperimentConfig& c, const std::string& v) {
                         c.run.detectors.i1.dead_time_ns = c.run.detectors.i2.dead_time_ns = parse_double(v);
                     },
                     [](const ExperimentConfig& c) {
                         return io::format_double(c.run.detectors.i1.dead_time_ns);
                     }});
        r.push_back({"det_bob.gate_width_ns",
                     [](ExperimentConfig& c, const std::string& v) {
                         c.run.detectors.i1.gate_width_ns = c.run.detectors.i2.gate_width_ns = parse_double(v);
                     },
                     [](const ExperimentConfig& c) {
                         return io::format_double(c.run.detectors.i1.gate_width_ns);
                     }});

        dbl("timing.jitter_sigma_ns", [](ExperimentConfig& c) { return &c.run.timing.jitter_sigma_ns; });
        dbl("timing.gate_offset_ns", [](ExperimentConfig& c) { return &c.run.timing.gate_offset_ns; });
        dbl("timing.trigger_latency_ns",
            [](ExperimentConfig& c) { return &c.run.timing.trigger_latency_ns; });

        dbl("coincidence.window_ns", [](ExperimentConfig& c) { return &c.coincidence.window_ns; });
        dbl("coincidence.slot_offset_ns",
            [](ExperimentConfig& c) { return &c.coincidence.slot_offset_ns; });
        boolean("coincidence.require_ready",
                [](ExperimentConfig& c) { return &c.coincidence.require_ready; });

        integer("scan.points", [](ExperimentConfig& c) { return &c.scan.points; });
        dbl("scan.seconds_per_point", [](ExperimentConfig& c) { return &c.scan.seconds_per_point; });

        dbl("calib.target_visibility", [](ExperimentConfig& c) { return &c.calib.target_visibility; });
        dbl("calib.tolerance", [](ExperimentConfig& c) { return &c.calib.tolerance; });
        integer("calib.max_iterations", [](ExperimentConfig& c) { return &c.calib.max_iterations; });
        dbl("calib.seconds_per_probe", [](ExperimentConfig& c) { return &c.calib.seconds_per_probe; });
        return r;
    }();
    return reg;
}

const KeySpec* find_key(const std::string& name) {
    for (const auto& k : registry())
        if (k.name == name) return &k;
    return nullptr;
}

std::string trim(const std::string& s) {
    size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

void apply_key(ExperimentConfig& cfg, const std::string& key, const std::string& value,
               const std::string& context) {
    const KeySpec* spec = find_key(key);
    if (!spec) throw ConfigError(context + ": unknown key '" + key + "'");
    try {
        spec->set(cfg, value);
    } catch (const std::exception& e) {
        throw ConfigError(context + ": invalid value '" + value + "' for '" + key + "' (" +
                          e.what() + ")");
    }
}

void finish_derived(ExperimentConfig& cfg) {
    cfg.coincidence.period_ns = cfg.run.pulse_period_ns();
    cfg.coincidence.tau_ns = std::min(cfg.run.alice.tau_ns, cfg.run.bob.tau_ns);
}

} // namespace

std::vector<std::string> known_keys() {
    std::vector<std::string> out;
    for (const auto& k : registry()) out.push_back(k.name);
    return out;
}

ExperimentConfig load(const std::optional<std::filesystem::path>& file,
                      const std::vector<std::string>& overrides) {
    ExperimentConfig cfg;
    // Apparatus structure is fixed: Alice's pair free-running, Bob's gated.
    cfg.run.detectors.s1.kind = mc::DetectorKind::FreeRunning;
    cfg.run.detectors.s2.kind = mc::DetectorKind::FreeRunning;
    cfg.run.detectors.i1.kind = mc::DetectorKind::Gated;
    cfg.run.detectors.i2.kind = mc::DetectorKind::Gated;

    if (file) {
        std::ifstream in(*file);
        if (!in) throw ConfigError("cannot open config file " + file->string());
        std::string line, section;
        int line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            const std::string context = file->filename().string() + ":" + std::to_string(line_no);
            if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
            line = trim(line);
            if (line.empty()) continue;
            if (line.front() == '[') {
                if (line.back() != ']') throw ConfigError(context + ": malformed section header");
                section = trim(line.substr(1, line.size() - 2));
                if (section.empty()) throw ConfigError(context + ": empty section name");
                continue;
            }
            const auto eq = line.find('=');
            if (eq == std::string::npos) throw ConfigError(context + ": expected 'key = value'");
            const std::string key = trim(line.substr(0, eq));
            const std::string value = trim(line.substr(eq + 1));
            if (key.empty()) throw ConfigError(context + ": empty key");
            const std::string full = section.empty() ? key : section + "." + key;
            apply_key(cfg, full, value, context);
        }
    }

    for (const auto& ov : overrides) {
        const auto eq = ov.find('=');
        if (eq == std::string::npos)
            throw ConfigError("--set expects section.key=value, got '" + ov + "'");
        apply_key(cfg, trim(ov.substr(0, eq)), trim(ov.substr(eq + 1)), "--set " + ov);
    }

    finish_derived(cfg);
    return cfg;
}

std::string ExperimentConfig::canonical() const {
    std::ostringstream out;
    for (const auto& k : registry()) out << k.name << " = " << k.get(*this) << "\n";
    return out.str();
}

std::string ExperimentConfig::hash() const {
    uint64_t h = 0xCBF29CE484222325ULL;
    for (const char c : canonical()) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001B3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void ExperimentConfig::validate(std::vector<std::string>* warnings) const {
    std::vector<std::string> errors;
    try {
        run.validate();
    } catch (const std::exception& e) {
        errors.emplace_back(e.what());
    }
    mc::CoincidenceConfig coinc = coincidence;
    coinc.period_ns = run.pulse_period_ns();
    coinc.tau_ns = std::min(run.alice.tau_ns, run.bob.tau_ns);
    try {
        coinc.validate();
    } catch (const std::exception& e) {
        errors.emplace_back(e.what());
    }
    if (scan.points < 5) errors.emplace_back("scan.points must be at least 5");
    if (!(scan.seconds_per_point > 0)) errors.emplace_back("scan.seconds_per_point must be positive");
    if (!(calib.target_visibility > 0 && calib.target_visibility <= 1))
        errors.emplace_back("calib.target_visibility must lie in (0, 1]");
    if (!(calib.tolerance > 0)) errors.emplace_back("calib.tolerance must be positive");
    if (calib.max_iterations < 1) errors.emplace_back("calib.max_iterations must be at least 1");
    if (!(calib.seconds_per_probe > 0)) errors.emplace_back("calib.seconds_per_probe must be positive");

    if (warnings && run.source.pair_prob_per_pulse > 0.1)
        warnings->push_back("source.pair_prob_per_pulse above 0.1: the single-pair-per-pulse "
                            "approximation degrades in this regime");

    if (!errors.empty()) {
        std::ostringstream all;
        for (size_t i = 0; i < errors.size(); ++i) all << (i ? "\n" : "") << errors[i];
        throw ConfigError(all.str());
    }
}

void write_manifest(const std::filesystem::path& path, const ExperimentConfig& config,
                    const std::vector<std::string>& outputs, double wall_clock_s) {
    nlohmann::json j;
    j["artifact_version"] = kVersion;
    j["scenario"] = config.scenario;
    j["config_hash"] = config.hash();
    j["seed"] = config.run.source.seed;
    j["wall_clock_s"] = wall_clock_s;
    j["outputs"] = outputs;
    io::write_text_atomic(path, j.dump(2) + "\n");
}

} // namespace tbsim::cfg
