#pragma once

#include <optional>
#include <string>

#include "mjlab/game.hpp"
#include "mjlab/rng.hpp"

namespace mjlab {

// Per-attempt hardware degradation as a function of continuous operation
// time: base + excess * logistic((t - onset) / width).
struct HazardCurve {
    double base = 0.0;
    double excess = 0.0;
    double onset_t0 = 20000.0;  // seconds
    double width_tau = 2000.0;  // seconds

    void validate() const;
};

struct InteractionRates {
    double out_of_turn = 0.0;  // per turn
    double inspection = 0.0;   // per turn
};

struct SensorConfusion {
    double false_negative = 0.0;  // true success reported as failure
    double false_positive = 0.0;  // true failure reported as success
};

struct FaultConfig {
    double misdetection_rate = 0.0;       // per recognition event
    double execution_base_failure = 0.0;  // per grasp attempt
    double relocalize_success = 0.9;
    InteractionRates interaction;
    SensorConfusion sensor;
    HazardCurve hazard;

    // Throws std::invalid_argument when a probability leaves [0, 1] or the
    // hazard curve is malformed.
    void validate() const;

    static FaultConfig fault_free();
};

enum class FaultKind : std::uint8_t { Misdetection, ExecutionFailure, OutOfTurn, Inspection, HardwareDegradation };

std::string_view fault_kind_name(FaultKind k);
std::optional<FaultKind> parse_fault_kind(std::string_view text);

struct FaultEvent {
    FaultKind kind = FaultKind::OutOfTurn;
    double sim_time = 0.0;
    int turn_index = 0;
    std::optional<Seat> actor;
    std::optional<Seat> victim;
    std::string detail;

    friend bool operator==(const FaultEvent&, const FaultEvent&) = default;
};

double logistic(double x);

// Monotone nondecreasing in t.
double hazard(double t, const HazardCurve& curve);

// Failure probability of one grasp attempt at operation time t: the larger
// of the floor rate and the degradation hazard.
double execution_failure_probability(double t, const FaultConfig& cfg);
bool sample_execution_failure(double t, const FaultConfig& cfg, Rng& rng);

// The true tile with probability 1 - misdetection_rate, otherwise one of the
// other 26 kinds chosen uniformly.
Tile sample_misdetection(Tile true_tile, const FaultConfig& cfg, Rng& rng);

// At most one interaction violation per turn, raised by a human seat (any
// seat other than `robot_seat`). One uniform draw splits the two kinds so
// each occurs with exactly its configured rate.
std::optional<FaultEvent> sample_interaction_event(const GameState& state, Seat robot_seat, const FaultConfig& cfg,
                                                   Rng& rng);

// Converts an observed misdetection count into a per-recognition rate.
double misdetection_rate_from_counts(double misdetections, double games, double recognitions_per_game);

}  // namespace mjlab
