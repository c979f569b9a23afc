#include "mjlab/state_machine.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

namespace mjlab {

std::string_view primitive_kind_name(PrimitiveKind k) {
    switch (k) {
        case PrimitiveKind::Draw: return "Draw";
        case PrimitiveKind::Place: return "Place";
        case PrimitiveKind::Discard: return "Discard";
        case PrimitiveKind::Meld: return "Meld";
    }
    return "?";
}

std::string_view primitive_outcome_name(PrimitiveOutcome o) {
    switch (o) {
        case PrimitiveOutcome::Committed: return "Committed";
        case PrimitiveOutcome::RecoveredThenCommitted: return "RecoveredThenCommitted";
        case PrimitiveOutcome::Unrecovered: return "Unrecovered";
        case PrimitiveOutcome::Rejected: return "Rejected";
    }
    return "?";
}

std::string_view expected_event_name(ExpectedEvent e) {
    switch (e) {
        case ExpectedEvent::OpponentDiscard: return "OpponentDiscard";
        case ExpectedEvent::OwnDraw: return "OwnDraw";
        case ExpectedEvent::ClaimWindow: return "ClaimWindow";
        case ExpectedEvent::Declaration: return "Declaration";
    }
    return "?";
}

std::string_view inconsistency_class_name(InconsistencyClass c) {
    switch (c) {
        case InconsistencyClass::Perceptual: return "Perceptual";
        case InconsistencyClass::Execution: return "Execution";
        case InconsistencyClass::Interaction: return "Interaction";
    }
    return "?";
}

std::string_view verification_name(Verification v) {
    switch (v) {
        case Verification::Verified: return "Verified";
        case Verification::FailedDetected: return "FailedDetected";
        case Verification::FalseNegative: return "FalseNegative";
        case Verification::FalsePositive: return "FalsePositive";
    }
    return "?";
}

void RecoveryPolicy::validate() const {
    if (max_retries < 0) throw std::invalid_argument("max_retries must be non-negative");
}

bool ConsistencyReport::has_field(std::string_view field) const {
    return std::any_of(entries.begin(), entries.end(), [&](const ConsistencyEntry& e) { return e.field == field; });
}

ConsistencyReport ConsistencyReport::restricted_to(std::initializer_list<std::string_view> prefixes) const {
    ConsistencyReport out;
    for (const auto& e : entries) {
        for (auto p : prefixes) {
            if (std::string_view(e.field).substr(0, p.size()) == p) {
                out.entries.push_back(e);
                break;
            }
        }
    }
    return out;
}

namespace {

ExpectedEvent expected_from(const GameState& g, Seat own) {
    switch (g.phase) {
        case Phase::Declaring: return ExpectedEvent::Declaration;
        case Phase::AwaitingClaims: return ExpectedEvent::ClaimWindow;
        case Phase::AwaitingDiscard:
        case Phase::Terminal: break;
    }
    return g.current_seat == own ? ExpectedEvent::OwnDraw : ExpectedEvent::OpponentDiscard;
}

std::string tiles_text(const std::vector<Tile>& tiles) {
    std::string out;
    for (Tile t : tiles) {
        if (!out.empty()) out += ' ';
        out += to_string(t);
    }
    return out;
}

std::string melds_text(const std::vector<Meld>& melds) {
    std::string out;
    for (const Meld& m : melds) {
        if (!out.empty()) out += ' ';
        out += m.kind == MeldKind::Pung ? "P" : (m.kind == MeldKind::ExposedKong ? "K" : "C");
        out += to_string(m.tile);
    }
    return out;
}

std::string suit_text(const std::optional<Suit>& s) { return s ? std::string(suit_name(*s)) : "-"; }

void remove_up_to(TileCounts& c, Tile t, int n) { c.remove(t, std::min(n, c.count(t))); }

void drop_last_discard(PerceptualState& p, Seat source) {
    auto& pile = p.believed_discards[source];
    if (!pile.empty()) pile.pop_back();
}

int copies_needed(const Meld& m, const std::optional<KongVariant>& variant) {
    if (m.kind == MeldKind::Pung) return 2;
    if (m.kind == MeldKind::ConcealedKong) return 4;
    if (variant == KongVariant::Added || !m.source_seat) return 1;
    return 3;
}

bool is_added_kong(const PrimitiveSpec& spec) {
    return spec.meld_detail && spec.meld_detail->kind == MeldKind::ExposedKong &&
           (spec.kong_variant == KongVariant::Added || !spec.meld_detail->source_seat);
}

}  // namespace

InternalState synchronize(const GameState& truth, Seat seat) {
    InternalState s;
    s.own_seat = seat;
    s.perceptual.believed_hand = truth.hands[seat].concealed;
    s.perceptual.believed_discards = truth.discards;
    for (Seat i = 0; i < kNumSeats; ++i) s.perceptual.believed_missing_suits[i] = truth.hands[i].missing_suit;
    s.perceptual.believed_wall_count = truth.wall.remaining();
    s.execution.own_melds = truth.hands[seat].melds;
    s.interaction.current_turn = truth.current_seat;
    s.interaction.expected_event = expected_from(truth, seat);
    return s;
}

InternalState resynchronize(const InternalState& internal, const GameState& truth) {
    InternalState s = synchronize(truth, internal.own_seat);
    s.version = internal.version;
    s.perceptual.history = internal.perceptual.history;
    s.execution.completed_log = internal.execution.completed_log;
    return s;
}

ConsistencyReport check_consistency(const InternalState& internal, const GameState& truth) {
    ConsistencyReport r;
    const Seat own = internal.own_seat;
    const PerceptualState& p = internal.perceptual;
    auto add = [&](InconsistencyClass c, std::string field, std::string believed, std::string actual) {
        r.entries.push_back({c, std::move(field), std::move(believed), std::move(actual)});
    };
    if (p.believed_hand != truth.hands[own].concealed) {
        add(InconsistencyClass::Perceptual, "hand", to_string(p.believed_hand), to_string(truth.hands[own].concealed));
    }
    for (Seat s = 0; s < kNumSeats; ++s) {
        if (p.believed_discards[s] != truth.discards[s]) {
            add(InconsistencyClass::Perceptual, "discards." + std::to_string(s), tiles_text(p.believed_discards[s]),
                tiles_text(truth.discards[s]));
        }
    }
    if (p.believed_wall_count != truth.wall.remaining()) {
        add(InconsistencyClass::Perceptual, "wall_count", std::to_string(p.believed_wall_count),
            std::to_string(truth.wall.remaining()));
    }
    if (internal.execution.own_melds != truth.hands[own].melds) {
        add(InconsistencyClass::Execution, "melds", melds_text(internal.execution.own_melds),
            melds_text(truth.hands[own].melds));
    }
    if (internal.execution.pending) {
        add(InconsistencyClass::Execution, "pending", std::string(primitive_kind_name(internal.execution.pending->kind)),
            "none");
    }
    for (Seat s = 0; s < kNumSeats; ++s) {
        if (p.believed_missing_suits[s] != truth.hands[s].missing_suit) {
            add(InconsistencyClass::Interaction, "missing_suit." + std::to_string(s),
                suit_text(p.believed_missing_suits[s]), suit_text(truth.hands[s].missing_suit));
        }
    }
    if (!truth.terminal() && internal.interaction.current_turn != truth.current_seat) {
        add(InconsistencyClass::Interaction, "current_turn", std::to_string(internal.interaction.current_turn),
            std::to_string(truth.current_seat));
    }
    return r;
}

std::optional<Violation> check_precondition(const InternalState& internal, const PrimitiveSpec& spec) {
    if (internal.execution.pending) return Violation{"pending-primitive", "a primitive is still pending"};
    if (internal.interaction.current_turn != internal.own_seat) {
        return Violation{"turn", "seat " + std::to_string(internal.interaction.current_turn) + " is believed on turn"};
    }
    const PerceptualState& p = internal.perceptual;
    switch (spec.kind) {
        case PrimitiveKind::Draw:
            if (!spec.target) return Violation{"target", "draw needs the physical tile"};
            if (p.believed_wall_count <= 0) return Violation{"wall-empty", "wall believed empty"};
            break;
        case PrimitiveKind::Place: break;
        case PrimitiveKind::Discard:
            if (!spec.target) return Violation{"target", "discard needs a tile"};
            if (p.believed_hand.count(*spec.target) == 0) {
                return Violation{"tile-not-held", to_string(*spec.target) + " not in believed hand"};
            }
            break;
        case PrimitiveKind::Meld: {
            if (!spec.meld_detail) return Violation{"target", "meld needs a description"};
            const Meld& m = *spec.meld_detail;
            const int need = copies_needed(m, spec.kong_variant);
            if (p.believed_hand.count(m.tile) < need) {
                return Violation{"tile-not-held", "meld of " + to_string(m.tile) + " needs " + std::to_string(need) +
                                                      " held copies"};
            }
            if (is_added_kong(spec)) {
                const auto& melds = internal.execution.own_melds;
                const bool has_pung = std::any_of(melds.begin(), melds.end(), [&](const Meld& x) {
                    return x.kind == MeldKind::Pung && x.tile == m.tile;
                });
                if (!has_pung) return Violation{"kong-variant", "no believed pung of " + to_string(m.tile)};
            }
            break;
        }
    }
    return std::nullopt;
}

Verification verify_postcondition(bool attempt_succeeded, const SensorConfusion& sensor, Rng& rng) {
    if (attempt_succeeded) return rng.bernoulli(sensor.false_negative) ? Verification::FalseNegative : Verification::Verified;
    return rng.bernoulli(sensor.false_positive) ? Verification::FalsePositive : Verification::FailedDetected;
}

InternalState commit(const InternalState& internal, const PrimitiveSpec& spec) {
    if (!internal.execution.pending || !(*internal.execution.pending == spec)) {
        throw std::logic_error("commit without a matching pending primitive");
    }
    InternalState s = internal;
    PerceptualState& p = s.perceptual;
    const Seat own = s.own_seat;
    switch (spec.kind) {
        case PrimitiveKind::Draw:
            p.believed_hand.add(*spec.target);
            p.believed_wall_count -= 1;
            p.history.push_back({EventKind::TileDrawn, own, spec.target});
            s.interaction.expected_event = ExpectedEvent::OwnDraw;
            break;
        case PrimitiveKind::Place: break;
        case PrimitiveKind::Discard:
            remove_up_to(p.believed_hand, *spec.target, 1);
            p.believed_discards[own].push_back(*spec.target);
            p.history.push_back({EventKind::TileDiscarded, own, spec.target});
            s.interaction.expected_event = ExpectedEvent::ClaimWindow;
            break;
        case PrimitiveKind::Meld: {
            const Meld& m = *spec.meld_detail;
            auto& melds = s.execution.own_melds;
            remove_up_to(p.believed_hand, m.tile, copies_needed(m, spec.kong_variant));
            if (is_added_kong(spec)) {
                auto it = std::find_if(melds.begin(), melds.end(), [&](const Meld& x) {
                    return x.kind == MeldKind::Pung && x.tile == m.tile;
                });
                if (it != melds.end()) {
                    it->kind = MeldKind::ExposedKong;
                    it->source_seat.reset();
                } else {
                    melds.push_back(Meld{MeldKind::ExposedKong, m.tile, std::nullopt});
                }
            } else {
                if (m.source_seat) drop_last_discard(p, *m.source_seat);
                melds.push_back(m);
            }
            p.history.push_back({EventKind::MeldFormed, own, m.tile});
            s.interaction.current_turn = own;
            break;
        }
    }
    s.execution.pending.reset();
    s.version += 1;
    return s;
}

RecoveryDecision recover(int attempts_made, const RecoveryPolicy& policy, const FaultConfig& faults, Rng& rng) {
    if (attempts_made > policy.max_retries) return {false, false};
    if (!policy.relocalize) return {true, false};
    if (!rng.bernoulli(faults.relocalize_success)) return {false, false};
    return {true, true};
}

PrimitiveResult execute_primitive(const InternalState& internal, const GameState& truth, const PrimitiveSpec& spec,
                                  const FaultConfig& faults, const RecoveryPolicy& policy, SimClock& clock, Rng& rng) {
    policy.validate();
    PrimitiveResult r;
    r.internal = internal;
    r.truth = truth;

    if (auto v = check_precondition(internal, spec)) {
        r.outcome = PrimitiveOutcome::Rejected;
        r.violation = v;
        return r;
    }
    if (spec.engine_action) {
        if (auto v = check_action(truth, *spec.engine_action)) {
            r.outcome = PrimitiveOutcome::Rejected;
            r.violation = v;
            return r;
        }
    }

    bool truth_applied = false;
    auto apply_truth = [&] {
        if (truth_applied) return;
        truth_applied = true;
        if (!spec.engine_action) return;
        Transition tr = apply_action(r.truth, *spec.engine_action);
        r.truth = std::move(tr.state);
        r.events = std::move(tr.events);
    };
    auto record_done = [&](InternalState& s, PrimitiveOutcome o, const PrimitiveSpec& done) {
        s.execution.completed_log.push_back({done, o, r.attempts});
    };

    if (!spec.requires_grasp()) {
        clock.now += clock.place_seconds;
        InternalState s = internal;
        s.execution.pending = spec;
        s = commit(s, spec);
        apply_truth();
        r.attempts = 1;
        r.outcome = PrimitiveOutcome::Committed;
        record_done(s, r.outcome, spec);
        r.internal = std::move(s);
        return r;
    }

    const Seat own = internal.own_seat;
    auto ground = [&]() -> bool {
        const Tile truth_tile = spec.target ? *spec.target : spec.meld_detail->tile;
        const Tile seen = sample_misdetection(truth_tile, faults, rng);
        if (seen != truth_tile) {
            r.faults.push_back({FaultKind::Misdetection, clock.now, 0, own, std::nullopt,
                                to_string(truth_tile) + " seen as " + to_string(seen)});
        }
        if (spec.kind == PrimitiveKind::Draw) {
            r.recognized = seen;
            return true;
        }
        return seen == truth_tile;
    };
    auto committed_spec = [&] {
        PrimitiveSpec c = spec;
        if (spec.kind == PrimitiveKind::Draw) c.target = r.recognized;
        return c;
    };

    InternalState work = internal;
    bool grounded = ground();
    for (;;) {
        ++r.attempts;
        AttemptRecord rec;
        rec.sim_time = clock.now;
        rec.grounded = grounded;
        rec.failure_probability = execution_failure_probability(clock.now, faults);
        const bool failed = rng.bernoulli(rec.failure_probability);
        if (failed) {
            const bool degraded = hazard(clock.now, faults.hazard) > faults.execution_base_failure;
            r.faults.push_back({degraded ? FaultKind::HardwareDegradation : FaultKind::ExecutionFailure, clock.now, 0,
                                own, std::nullopt, std::string(primitive_kind_name(spec.kind)) + " grasp failed"});
        }
        rec.succeeded = grounded && !failed;
        clock.now += clock.attempt_seconds;
        if (rec.succeeded) apply_truth();

        const PrimitiveSpec c = committed_spec();
        if (policy.commit_mode == CommitMode::CommitBeforeVerify) {
            work.execution.pending = c;
            work = commit(work, c);
        }
        rec.verification = verify_postcondition(rec.succeeded, faults.sensor, rng);
        r.attempt_log.push_back(rec);

        if (rec.verification == Verification::Verified || rec.verification == Verification::FalsePositive) {
            if (!rec.succeeded) {
                apply_truth();
                r.assisted = true;
            }
            if (policy.commit_mode == CommitMode::VerifyThenCommit) {
                work.execution.pending = c;
                work = commit(work, c);
            }
            r.outcome = r.attempts == 1 ? PrimitiveOutcome::Committed : PrimitiveOutcome::RecoveredThenCommitted;
            record_done(work, r.outcome, c);
            r.internal = std::move(work);
            return r;
        }

        const RecoveryDecision d = recover(r.attempts, policy, faults, rng);
        if (policy.relocalize && r.attempts <= policy.max_retries) clock.now += clock.relocalize_seconds;
        if (!d.retry) {
            apply_truth();
            r.assisted = true;
            r.outcome = PrimitiveOutcome::Unrecovered;
            r.internal = policy.commit_mode == CommitMode::VerifyThenCommit ? internal : std::move(work);
            return r;
        }
        if (d.relocalized) grounded = ground();
    }
}

void observe_events(InternalState& internal, const std::vector<EngineEvent>& events, const GameState& after,
                    const ObservationOptions& options, const FaultConfig& faults, Rng& rng,
                    std::vector<FaultEvent>* fault_log, double sim_time, int turn_index) {
    PerceptualState& p = internal.perceptual;
    const Seat own = internal.own_seat;
    for (const EngineEvent& ev : events) {
        const bool mine = ev.seat == own;
        switch (ev.kind) {
            case EventKind::MissingDeclared: {
                auto suit = parse_suit(ev.detail);
                p.believed_missing_suits[ev.seat] = options.forced_characters ? std::optional<Suit>(Suit::Characters) : suit;
                p.history.push_back({ev.kind, ev.seat, std::nullopt});
                break;
            }
            case EventKind::TileDrawn:
            case EventKind::ReplacementDrawn:
                if (mine) break;
                p.believed_wall_count -= 1;
                p.history.push_back({ev.kind, ev.seat, std::nullopt});
                break;
            case EventKind::TileDiscarded: {
                if (mine) break;
                const Tile seen = sample_misdetection(*ev.tile, faults, rng);
                if (seen != *ev.tile && fault_log) {
                    fault_log->push_back({FaultKind::Misdetection, sim_time, turn_index, ev.seat, std::nullopt,
                                          to_string(*ev.tile) + " seen as " + to_string(seen)});
                }
                p.believed_discards[ev.seat].push_back(seen);
                p.history.push_back({ev.kind, ev.seat, seen});
                break;
            }
            case EventKind::MeldFormed: {
                if (mine) break;
                const auto pos = ev.detail.find(" from ");
                if (pos != std::string::npos) drop_last_discard(p, std::stoi(ev.detail.substr(pos + 6)));
                p.history.push_back({ev.kind, ev.seat, ev.tile});
                break;
            }
            case EventKind::TurnAdvanced:
            case EventKind::ClaimWindowOpened:
            case EventKind::GameEnded:
                if (mine && ev.kind == EventKind::ClaimWindowOpened) break;
                p.history.push_back({ev.kind, ev.seat, std::nullopt});
                break;
        }
    }
    internal.interaction.current_turn = after.current_seat;
    internal.interaction.expected_event = expected_from(after, own);
}

GameState belief_state(const InternalState& internal, const GameState& truth) {
    GameState g = truth;
    const Seat own = internal.own_seat;
    g.hands[own].concealed = internal.perceptual.believed_hand;
    g.hands[own].melds = internal.execution.own_melds;
    for (Seat s = 0; s < kNumSeats; ++s) g.hands[s].missing_suit = internal.perceptual.believed_missing_suits[s];
    g.discards = internal.perceptual.believed_discards;
    if (g.last_discard && !g.discards[g.last_discard->seat].empty()) {
        g.last_discard->tile = g.discards[g.last_discard->seat].back();
    }
    return g;
}

}  // namespace mjlab
