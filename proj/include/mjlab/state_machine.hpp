#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mjlab/fault_model.hpp"
#include "mjlab/game.hpp"
#include "mjlab/rng.hpp"

namespace mjlab {

struct HistoryEntry {
    EventKind kind;
    Seat seat = 0;
    std::optional<Tile> tile;  // as perceived
    friend bool operator==(const HistoryEntry&, const HistoryEntry&) = default;
};

struct PerceptualState {
    TileCounts believed_hand;
    std::array<std::vector<Tile>, kNumSeats> believed_discards;
    std::array<std::optional<Suit>, kNumSeats> believed_missing_suits;
    int believed_wall_count = 0;
    std::vector<HistoryEntry> history;  // append-only
};

enum class PrimitiveKind : std::uint8_t { Draw, Place, Discard, Meld };
std::string_view primitive_kind_name(PrimitiveKind k);

struct PrimitiveSpec {
    PrimitiveKind kind = PrimitiveKind::Draw;
    // Draw: the physical tile being drawn. Discard: the tile to discard.
    std::optional<Tile> target;
    std::optional<Meld> meld_detail;
    // Only for Meld: how the meld is formed.
    std::optional<KongVariant> kong_variant;
    // Rule-level transition realized by this primitive, if the table has not
    // already resolved it (claimed melds and kong replacement draws have).
    std::optional<Action> engine_action;

    bool requires_grasp() const { return kind != PrimitiveKind::Place; }
    friend bool operator==(const PrimitiveSpec&, const PrimitiveSpec&) = default;
};

enum class PrimitiveOutcome : std::uint8_t { Committed, RecoveredThenCommitted, Unrecovered, Rejected };
std::string_view primitive_outcome_name(PrimitiveOutcome o);

struct CompletedPrimitive {
    PrimitiveSpec primitive;
    PrimitiveOutcome outcome;
    int attempts = 0;
};

struct ExecutionState {
    std::optional<PrimitiveSpec> pending;
    std::vector<CompletedPrimitive> completed_log;  // append-only
    std::vector<Meld> own_melds;
};

enum class ExpectedEvent : std::uint8_t { OpponentDiscard, OwnDraw, ClaimWindow, Declaration };
std::string_view expected_event_name(ExpectedEvent e);

struct InteractionState {
    Seat current_turn = 0;
    ExpectedEvent expected_event = ExpectedEvent::Declaration;
};

struct InternalState {
    Seat own_seat = 0;
    PerceptualState perceptual;
    ExecutionState execution;
    InteractionState interaction;
    std::uint64_t version = 0;
};

enum class CommitMode : std::uint8_t { VerifyThenCommit, CommitBeforeVerify };

struct RecoveryPolicy {
    int max_retries = 3;
    bool relocalize = true;
    CommitMode commit_mode = CommitMode::VerifyThenCommit;

    void validate() const;
};

enum class InconsistencyClass : std::uint8_t { Perceptual, Execution, Interaction };
std::string_view inconsistency_class_name(InconsistencyClass c);

struct ConsistencyEntry {
    InconsistencyClass cls;
    std::string field;
    std::string believed;
    std::string actual;
    friend bool operator==(const ConsistencyEntry&, const ConsistencyEntry&) = default;
};

struct ConsistencyReport {
    std::vector<ConsistencyEntry> entries;

    bool empty() const { return entries.empty(); }
    bool has_field(std::string_view field) const;
    // Entries whose field name starts with one of `prefixes`.
    ConsistencyReport restricted_to(std::initializer_list<std::string_view> prefixes) const;
};

// Internal state that matches `truth` exactly from `seat`'s point of view.
InternalState synchronize(const GameState& truth, Seat seat);

// Replaces every audited field with ground truth, keeping the version and
// the execution log. Models a human correcting the table.
InternalState resynchronize(const InternalState& internal, const GameState& truth);

// Audits hand, discards, wall count, melds, missing suits, current turn and
// pending primitive against ground truth.
ConsistencyReport check_consistency(const InternalState& internal, const GameState& truth);

// Step (i): validation against the maintained execution and interaction state.
std::optional<Violation> check_precondition(const InternalState& internal, const PrimitiveSpec& spec);

enum class Verification : std::uint8_t { Verified, FailedDetected, FalseNegative, FalsePositive };
std::string_view verification_name(Verification v);

Verification verify_postcondition(bool attempt_succeeded, const SensorConfusion& sensor, Rng& rng);

// Step (v). `internal.execution.pending` must equal `spec`; committing
// without a matching pending primitive throws std::logic_error.
InternalState commit(const InternalState& internal, const PrimitiveSpec& spec);

struct RecoveryDecision {
    bool retry = false;
    bool relocalized = false;
};

// Called after a failed, detected attempt. `attempts_made` counts attempts
// so far. A failed re-localization leaves the primitive unrecovered.
RecoveryDecision recover(int attempts_made, const RecoveryPolicy& policy, const FaultConfig& faults, Rng& rng);

struct SimClock {
    double now = 0.0;
    double attempt_seconds = 12.0;
    double relocalize_seconds = 4.0;
    double place_seconds = 3.0;
};

struct AttemptRecord {
    double sim_time = 0.0;
    double failure_probability = 0.0;
    bool grounded = true;
    bool succeeded = false;
    Verification verification = Verification::Verified;
};

struct PrimitiveResult {
    PrimitiveOutcome outcome = PrimitiveOutcome::Committed;
    int attempts = 0;
    std::optional<Violation> violation;
    InternalState internal;
    GameState truth;
    std::vector<EngineEvent> events;       // from the realized engine action
    std::vector<AttemptRecord> attempt_log;
    std::vector<FaultEvent> faults;
    std::optional<Tile> recognized;        // perceived identity for draws
    bool assisted = false;                 // table completed the action for the robot
};

// The guarded transition: validate, ground, execute, verify, commit.
// Under VerifyThenCommit the internal state changes only at the commit step;
// an unrecovered primitive returns the input internal state unchanged while
// the table still completes the rule-level action.
PrimitiveResult execute_primitive(const InternalState& internal, const GameState& truth, const PrimitiveSpec& spec,
                                  const FaultConfig& faults, const RecoveryPolicy& policy, SimClock& clock, Rng& rng);

struct ObservationOptions {
    // Record every declared missing suit as Characters.
    bool forced_characters = false;
};

// Updates perception from engine events produced by any seat. Deltas of the
// robot's own hand are left to primitive commits.
void observe_events(InternalState& internal, const std::vector<EngineEvent>& events, const GameState& after,
                    const ObservationOptions& options, const FaultConfig& faults, Rng& rng,
                    std::vector<FaultEvent>* fault_log = nullptr, double sim_time = 0.0, int turn_index = 0);

// The game as the robot believes it: own hand, melds, discards and missing
// suits replaced by their maintained values.
GameState belief_state(const InternalState& internal, const GameState& truth);

}  // namespace mjlab
