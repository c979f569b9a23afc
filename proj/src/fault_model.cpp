#include "mjlab/fault_model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace mjlab {

namespace {

void require_probability(double p, const char* name) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument(std::string(name) + " must lie in [0, 1]");
}

}  // namespace

void HazardCurve::validate() const {
    require_probability(base, "hazard.base");
    require_probability(excess, "hazard.excess");
    if (base + excess > 1.0 + 1e-12) throw std::invalid_argument("hazard.base + hazard.excess must not exceed 1");
    if (!(onset_t0 > 0.0)) throw std::invalid_argument("hazard.onset_t0 must be positive");
    if (!(width_tau > 0.0)) throw std::invalid_argument("hazard.width_tau must be positive");
}

void FaultConfig::validate() const {
    require_probability(misdetection_rate, "misdetection_rate");
    require_probability(execution_base_failure, "execution_base_failure");
    require_probability(relocalize_success, "relocalize_success");
    require_probability(interaction.out_of_turn, "interaction.out_of_turn");
    require_probability(interaction.inspection, "interaction.inspection");
    if (interaction.out_of_turn + interaction.inspection > 1.0 + 1e-12) {
        throw std::invalid_argument("interaction rates must sum to at most 1");
    }
    require_probability(sensor.false_negative, "sensor.false_negative");
    require_probability(sensor.false_positive, "sensor.false_positive");
    hazard.validate();
}

FaultConfig FaultConfig::fault_free() {
    FaultConfig cfg;
    cfg.relocalize_success = 1.0;
    return cfg;
}

std::string_view fault_kind_name(FaultKind k) {
    switch (k) {
        case FaultKind::Misdetection: return "Misdetection";
        case FaultKind::ExecutionFailure: return "ExecutionFailure";
        case FaultKind::OutOfTurn: return "OutOfTurn";
        case FaultKind::Inspection: return "Inspection";
        case FaultKind::HardwareDegradation: return "HardwareDegradation";
    }
    return "?";
}

std::optional<FaultKind> parse_fault_kind(std::string_view text) {
    for (auto k : {FaultKind::Misdetection, FaultKind::ExecutionFailure, FaultKind::OutOfTurn, FaultKind::Inspection,
                   FaultKind::HardwareDegradation}) {
        if (fault_kind_name(k) == text) return k;
    }
    return std::nullopt;
}

double logistic(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double hazard(double t, const HazardCurve& curve) {
    return curve.base + curve.excess * logistic((t - curve.onset_t0) / curve.width_tau);
}

double execution_failure_probability(double t, const FaultConfig& cfg) {
    return std::max(cfg.execution_base_failure, hazard(t, cfg.hazard));
}

bool sample_execution_failure(double t, const FaultConfig& cfg, Rng& rng) {
    return rng.bernoulli(execution_failure_probability(t, cfg));
}

Tile sample_misdetection(Tile true_tile, const FaultConfig& cfg, Rng& rng) {
    if (!rng.bernoulli(cfg.misdetection_rate)) return true_tile;
    int k = static_cast<int>(rng.below(kNumKinds - 1));
    if (k >= true_tile.index()) ++k;
    return Tile::from_index(k);
}

std::optional<FaultEvent> sample_interaction_event(const GameState& state, Seat robot_seat, const FaultConfig& cfg,
                                                   Rng& rng) {
    const double u = rng.uniform();
    const double p_oot = cfg.interaction.out_of_turn;
    const double p_insp = cfg.interaction.inspection;
    if (u >= p_oot + p_insp) return std::nullopt;

    std::vector<Seat> humans;
    for (Seat s = 0; s < kNumSeats; ++s)
        if (s != robot_seat) humans.push_back(s);

    FaultEvent ev;
    if (u < p_oot) {
        ev.kind = FaultKind::OutOfTurn;
        std::vector<Seat> off_turn;
        for (Seat s : humans)
            if (s != state.current_seat) off_turn.push_back(s);
        ev.actor = off_turn[rng.below(off_turn.size())];
        ev.detail = "play while seat " + std::to_string(state.current_seat) + " is on turn";
    } else {
        ev.kind = FaultKind::Inspection;
        ev.actor = humans[rng.below(humans.size())];
        Seat victim = static_cast<Seat>(rng.below(kNumSeats - 1));
        if (victim >= *ev.actor) ++victim;
        ev.victim = victim;
        ev.detail = "hidden tiles of seat " + std::to_string(victim) + " inspected";
    }
    return ev;
}

double misdetection_rate_from_counts(double misdetections, double games, double recognitions_per_game) {
    if (!(games > 0 && recognitions_per_game > 0)) throw std::invalid_argument("counts must be positive");
    return misdetections / (games * recognitions_per_game);
}

}  // namespace mjlab
