#pragma once

#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "mjlab/hand.hpp"

namespace mjlab {

struct Wall {
    std::vector<Tile> tiles;
    int draw_index = 0;

    int remaining() const { return static_cast<int>(tiles.size()) - draw_index; }
    friend bool operator==(const Wall&, const Wall&) = default;
};

// A shuffled 108-tile wall from `seed`.
Wall shuffled_wall(std::uint64_t seed);
// Throws std::invalid_argument unless `tiles` is a permutation of the full set.
void validate_wall(const Wall& wall);

enum class Phase : std::uint8_t { Declaring, AwaitingDiscard, AwaitingClaims, Terminal };
enum class TerminalCause : std::uint8_t { WinByDiscard, WinBySelfDraw, WallExhausted };

std::string_view phase_name(Phase p);
std::string_view terminal_cause_name(TerminalCause c);

enum class ActionKind : std::uint8_t { DeclareMissing, Draw, Discard, Pung, Kong, Win, Pass };
// Claimed: fourth copy taken from a discard. Concealed: four held copies.
// Added: own pung promoted with the fourth copy.
enum class KongVariant : std::uint8_t { Claimed, Concealed, Added };

std::string_view action_kind_name(ActionKind k);
std::string_view kong_variant_name(KongVariant v);

struct Action {
    ActionKind kind = ActionKind::Pass;
    Seat actor = 0;
    Tile tile;                  // Discard, Pung, Kong
    Suit suit = Suit::Characters;  // DeclareMissing
    KongVariant variant = KongVariant::Claimed;

    static Action declare(Seat s, Suit suit);
    static Action draw(Seat s);
    static Action discard(Seat s, Tile t);
    static Action pung(Seat s, Tile t);
    static Action kong(Seat s, Tile t, KongVariant v);
    static Action win(Seat s);
    static Action pass(Seat s);

    // Canonical total order; legal action lists are sorted by it.
    friend bool operator<(const Action& a, const Action& b);
    friend bool operator==(const Action& a, const Action& b);
};

std::string to_string(const Action& a);

struct LastDiscard {
    Seat seat = 0;
    Tile tile;
    friend bool operator==(const LastDiscard&, const LastDiscard&) = default;
};

struct GameState {
    Wall wall;
    std::array<Hand, kNumSeats> hands;
    std::array<std::vector<Tile>, kNumSeats> discards;
    Seat current_seat = 0;
    Phase phase = Phase::Declaring;
    std::set<Seat> winners;
    std::optional<TerminalCause> terminal_cause;
    std::optional<LastDiscard> last_discard;
    std::uint64_t rng_seed = 0;

    bool terminal() const { return phase == Phase::Terminal; }
    friend bool operator==(const GameState&, const GameState&) = default;
};

struct GameOutcome {
    std::set<Seat> winners;
    TerminalCause terminal_cause = TerminalCause::WallExhausted;
};

GameOutcome outcome_of(const GameState& state);

enum class EventKind : std::uint8_t {
    MissingDeclared,
    TileDrawn,
    TileDiscarded,
    MeldFormed,
    ReplacementDrawn,
    TurnAdvanced,
    ClaimWindowOpened,
    GameEnded,
};

std::string_view event_kind_name(EventKind k);

// A state delta produced by a transition.
struct EngineEvent {
    EventKind kind;
    Seat seat = 0;
    std::optional<Tile> tile;
    std::string detail;
    friend bool operator==(const EngineEvent&, const EngineEvent&) = default;
};

struct Violation {
    std::string rule;
    std::string message;
};

class RuleViolation : public std::runtime_error {
public:
    explicit RuleViolation(Violation v)
        : std::runtime_error(v.rule + ": " + v.message), violation_(std::move(v)) {}
    const Violation& violation() const { return violation_; }

private:
    Violation violation_;
};

struct Transition {
    GameState state;
    std::vector<EngineEvent> events;
};

// Deals 13 tiles to each seat from the forced wall, or a wall shuffled from
// `seed`. Seat 0 deals and declares first.
GameState new_game(std::uint64_t seed, const std::optional<Wall>& forced_wall = std::nullopt);

std::vector<Action> legal_actions(const GameState& state, Seat seat);

// nullopt when `action` is legal; otherwise the rule it breaks.
std::optional<Violation> check_action(const GameState& state, const Action& action);

// Throws RuleViolation for illegal actions. A claim in the claim window
// resolves immediately with every other seat passing.
Transition apply_action(const GameState& state, const Action& action);

// Resolves one claim window. Seats not present in `claims` pass.
Transition resolve_claims(const GameState& state, const std::map<Seat, Action>& claims);

// Seats other than the discarder with more than a Pass available.
std::vector<Seat> claim_candidates(const GameState& state);

// Every tile of wall remainder, hands, melds and discards.
TileCounts all_zones(const GameState& state);
bool conserves_tiles(const GameState& state);

// Stable textual form used for byte-level comparisons.
std::string serialize_state(const GameState& state);

}  // namespace mjlab
