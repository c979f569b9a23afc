#include "mjlab/game.hpp"

#include <algorithm>
#include <sstream>
#include <tuple>

#include "mjlab/rng.hpp"

namespace mjlab {

std::string_view phase_name(Phase p) {
    switch (p) {
        case Phase::Declaring: return "Declaring";
        case Phase::AwaitingDiscard: return "AwaitingDiscard";
        case Phase::AwaitingClaims: return "AwaitingClaims";
        case Phase::Terminal: return "Terminal";
    }
    return "?";
}

std::string_view terminal_cause_name(TerminalCause c) {
    switch (c) {
        case TerminalCause::WinByDiscard: return "WinByDiscard";
        case TerminalCause::WinBySelfDraw: return "WinBySelfDraw";
        case TerminalCause::WallExhausted: return "WallExhausted";
    }
    return "?";
}

std::string_view action_kind_name(ActionKind k) {
    switch (k) {
        case ActionKind::DeclareMissing: return "DeclareMissing";
        case ActionKind::Draw: return "Draw";
        case ActionKind::Discard: return "Discard";
        case ActionKind::Pung: return "Pung";
        case ActionKind::Kong: return "Kong";
        case ActionKind::Win: return "Win";
        case ActionKind::Pass: return "Pass";
    }
    return "?";
}

std::string_view kong_variant_name(KongVariant v) {
    switch (v) {
        case KongVariant::Claimed: return "Claimed";
        case KongVariant::Concealed: return "Concealed";
        case KongVariant::Added: return "Added";
    }
    return "?";
}

std::string_view event_kind_name(EventKind k) {
    switch (k) {
        case EventKind::MissingDeclared: return "MissingDeclared";
        case EventKind::TileDrawn: return "TileDrawn";
        case EventKind::TileDiscarded: return "TileDiscarded";
        case EventKind::MeldFormed: return "MeldFormed";
        case EventKind::ReplacementDrawn: return "ReplacementDrawn";
        case EventKind::TurnAdvanced: return "TurnAdvanced";
        case EventKind::ClaimWindowOpened: return "ClaimWindowOpened";
        case EventKind::GameEnded: return "GameEnded";
    }
    return "?";
}

Action Action::declare(Seat s, Suit suit) {
    Action a;
    a.kind = ActionKind::DeclareMissing;
    a.actor = s;
    a.suit = suit;
    return a;
}
Action Action::draw(Seat s) {
    Action a;
    a.kind = ActionKind::Draw;
    a.actor = s;
    return a;
}
Action Action::discard(Seat s, Tile t) {
    Action a;
    a.kind = ActionKind::Discard;
    a.actor = s;
    a.tile = t;
    return a;
}
Action Action::pung(Seat s, Tile t) {
    Action a;
    a.kind = ActionKind::Pung;
    a.actor = s;
    a.tile = t;
    return a;
}
Action Action::kong(Seat s, Tile t, KongVariant v) {
    Action a;
    a.kind = ActionKind::Kong;
    a.actor = s;
    a.tile = t;
    a.variant = v;
    return a;
}
Action Action::win(Seat s) {
    Action a;
    a.kind = ActionKind::Win;
    a.actor = s;
    return a;
}
Action Action::pass(Seat s) {
    Action a;
    a.kind = ActionKind::Pass;
    a.actor = s;
    return a;
}

namespace {

// Fields that carry meaning for each kind; unused fields never affect identity.
auto action_key(const Action& a) {
    const bool has_tile = a.kind == ActionKind::Discard || a.kind == ActionKind::Pung || a.kind == ActionKind::Kong;
    return std::make_tuple(a.actor, static_cast<int>(a.kind), has_tile ? a.tile.index() : -1,
                           a.kind == ActionKind::Kong ? static_cast<int>(a.variant) : -1,
                           a.kind == ActionKind::DeclareMissing ? static_cast<int>(a.suit) : -1);
}

}  // namespace

bool operator<(const Action& a, const Action& b) { return action_key(a) < action_key(b); }
bool operator==(const Action& a, const Action& b) { return action_key(a) == action_key(b); }

std::string to_string(const Action& a) {
    std::string out = std::string(action_kind_name(a.kind)) + "@" + std::to_string(a.actor);
    switch (a.kind) {
        case ActionKind::DeclareMissing: out += ":" + std::string(suit_name(a.suit)); break;
        case ActionKind::Discard:
        case ActionKind::Pung: out += ":" + to_string(a.tile); break;
        case ActionKind::Kong: out += ":" + to_string(a.tile) + ":" + std::string(kong_variant_name(a.variant)); break;
        default: break;
    }
    return out;
}

Wall shuffled_wall(std::uint64_t seed) {
    Wall w;
    w.tiles = TileCounts::full_set().tiles();
    Rng rng(derive_seed(seed, 0x3a11));
    for (std::size_t i = w.tiles.size() - 1; i > 0; --i) {
        std::swap(w.tiles[i], w.tiles[rng.below(i + 1)]);
    }
    return w;
}

void validate_wall(const Wall& wall) {
    if (wall.tiles.size() != static_cast<std::size_t>(kWallSize)) {
        throw std::invalid_argument("wall must hold 108 tiles");
    }
    for (Tile t : wall.tiles) {
        if (!t.valid()) throw std::invalid_argument("wall holds an invalid tile");
    }
    if (TileCounts::from_tiles(wall.tiles) != TileCounts::full_set()) {
        throw std::invalid_argument("wall is not a permutation of the full tile set");
    }
    if (wall.draw_index != 0) throw std::invalid_argument("forced wall must be undrawn");
}

GameOutcome outcome_of(const GameState& state) {
    if (!state.terminal() || !state.terminal_cause) throw std::logic_error("game is not terminal");
    return GameOutcome{state.winners, *state.terminal_cause};
}

GameState new_game(std::uint64_t seed, const std::optional<Wall>& forced_wall) {
    GameState g;
    g.rng_seed = seed;
    if (forced_wall) {
        validate_wall(*forced_wall);
        g.wall = *forced_wall;
    } else {
        g.wall = shuffled_wall(seed);
    }
    for (Seat s = 0; s < kNumSeats; ++s) {
        for (int i = 0; i < 13; ++i) g.hands[s].concealed.add(g.wall.tiles[g.wall.draw_index++]);
    }
    g.current_seat = 0;
    g.phase = Phase::Declaring;
    return g;
}

namespace {

std::optional<Violation> fail(std::string rule, std::string message) {
    return Violation{std::move(rule), std::move(message)};
}

bool has_pung_of(const Hand& h, Tile t) {
    return std::any_of(h.melds.begin(), h.melds.end(),
                       [t](const Meld& m) { return m.kind == MeldKind::Pung && m.tile == t; });
}

std::optional<Violation> check_claim(const GameState& g, const Action& a) {
    if (g.phase != Phase::AwaitingClaims || !g.last_discard) {
        return fail("phase", "claims are only accepted in the claim window");
    }
    if (a.actor == g.last_discard->seat) return fail("claim-by-discarder", "the discarder cannot claim its own tile");
    const Hand& h = g.hands[a.actor];
    const Tile d = g.last_discard->tile;
    switch (a.kind) {
        case ActionKind::Pass: return std::nullopt;
        case ActionKind::Win: {
            TileCounts with = h.concealed;
            with.add(d);
            if (!is_winning_shape(with, h.melds, h.missing_suit)) {
                return fail("not-winning", "hand plus " + to_string(d) + " is not a winning hand");
            }
            return std::nullopt;
        }
        case ActionKind::Pung:
        case ActionKind::Kong: {
            if (a.tile != d) return fail("claim-tile-mismatch", "claimed tile differs from the discard");
            if (h.missing_suit && d.suit == *h.missing_suit) {
                return fail("missing-suit-claim", "cannot claim a tile of the declared missing suit");
            }
            if (a.kind == ActionKind::Pung) {
                if (h.concealed.count(d) < 2) return fail("pung-copies", "pung needs two held copies");
            } else {
                if (a.variant != KongVariant::Claimed) return fail("kong-variant", "only claimed kongs use a discard");
                if (h.concealed.count(d) < 3) return fail("kong-copies", "claimed kong needs three held copies");
                if (g.wall.remaining() == 0) return fail("wall-empty", "no replacement tile for a kong");
            }
            return std::nullopt;
        }
        default: return fail("phase", "action is not a claim");
    }
}

}  // namespace

std::optional<Violation> check_action(const GameState& g, const Action& a) {
    if (g.terminal()) return fail("game-over", "the game has ended");
    if (a.actor < 0 || a.actor >= kNumSeats) return fail("seat", "actor seat out of range");
    const Hand& h = g.hands[a.actor];

    if (g.phase == Phase::AwaitingClaims) return check_claim(g, a);

    if (a.actor != g.current_seat) return fail("turn", "seat " + std::to_string(a.actor) + " is not on turn");

    if (g.phase == Phase::Declaring) {
        if (a.kind != ActionKind::DeclareMissing) return fail("phase", "missing suits are being declared");
        return std::nullopt;
    }

    // AwaitingDiscard
    const int equiv = h.set_equivalent_count();
    switch (a.kind) {
        case ActionKind::Draw:
            if (equiv != 13) return fail("hand-size", "draw requires a 13-tile hand");
            return std::nullopt;
        case ActionKind::Discard:
            if (equiv != 14) return fail("hand-size", "discard requires a 14-tile hand");
            if (h.concealed.count(a.tile) == 0) return fail("tile-not-held", to_string(a.tile) + " is not held");
            return std::nullopt;
        case ActionKind::Win:
            if (equiv != 14) return fail("hand-size", "self-drawn win requires a 14-tile hand");
            if (!is_winning_shape(h.concealed, h.melds, h.missing_suit)) return fail("not-winning", "hand is not winning");
            return std::nullopt;
        case ActionKind::Kong: {
            if (equiv != 14) return fail("hand-size", "kong on own turn requires a 14-tile hand");
            if (h.missing_suit && a.tile.suit == *h.missing_suit) {
                return fail("missing-suit-claim", "cannot kong a tile of the declared missing suit");
            }
            if (g.wall.remaining() == 0) return fail("wall-empty", "no replacement tile for a kong");
            if (a.variant == KongVariant::Concealed) {
                if (h.concealed.count(a.tile) < 4) return fail("kong-copies", "concealed kong needs four held copies");
            } else if (a.variant == KongVariant::Added) {
                if (!has_pung_of(h, a.tile) || h.concealed.count(a.tile) < 1) {
                    return fail("kong-copies", "added kong needs an own pung and the fourth copy");
                }
            } else {
                return fail("kong-variant", "claimed kong outside the claim window");
            }
            return std::nullopt;
        }
        case ActionKind::Pung:
        case ActionKind::Pass: return fail("phase", "no claim window is open");
        case ActionKind::DeclareMissing: return fail("phase", "missing suits are already declared");
    }
    return fail("phase", "unknown action");
}

std::vector<Action> legal_actions(const GameState& g, Seat seat) {
    std::vector<Action> out;
    if (g.terminal() || seat < 0 || seat >= kNumSeats) return out;
    const Hand& h = g.hands[seat];
    std::vector<Action> candidates;
    switch (g.phase) {
        case Phase::Declaring:
            for (Suit s : kAllSuits) candidates.push_back(Action::declare(seat, s));
            break;
        case Phase::AwaitingDiscard:
            candidates.push_back(Action::draw(seat));
            candidates.push_back(Action::win(seat));
            for (Tile t : h.concealed.distinct()) {
                candidates.push_back(Action::discard(seat, t));
                candidates.push_back(Action::kong(seat, t, KongVariant::Concealed));
                candidates.push_back(Action::kong(seat, t, KongVariant::Added));
            }
            break;
        case Phase::AwaitingClaims:
            if (g.last_discard) {
                candidates.push_back(Action::pass(seat));
                candidates.push_back(Action::win(seat));
                candidates.push_back(Action::pung(seat, g.last_discard->tile));
                candidates.push_back(Action::kong(seat, g.last_discard->tile, KongVariant::Claimed));
            }
            break;
        case Phase::Terminal: break;
    }
    for (const Action& a : candidates) {
        if (!check_action(g, a)) out.push_back(a);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

std::vector<Seat> claim_candidates(const GameState& g) {
    std::vector<Seat> out;
    if (g.phase != Phase::AwaitingClaims || !g.last_discard) return out;
    for (int i = 1; i < kNumSeats; ++i) {
        const Seat s = (g.last_discard->seat + i) % kNumSeats;
        if (legal_actions(g, s).size() > 1) out.push_back(s);
    }
    return out;
}

namespace {

void end_game(GameState& g, std::vector<EngineEvent>& ev, TerminalCause cause) {
    g.phase = Phase::Terminal;
    g.terminal_cause = cause;
    std::string detail(terminal_cause_name(cause));
    for (Seat w : g.winners) detail += " " + std::to_string(w);
    ev.push_back({EventKind::GameEnded, g.current_seat, std::nullopt, detail});
}

void replacement_draw(GameState& g, Seat s, std::vector<EngineEvent>& ev) {
    const Tile t = g.wall.tiles[g.wall.draw_index++];
    g.hands[s].concealed.add(t);
    ev.push_back({EventKind::ReplacementDrawn, s, t, ""});
}

void form_meld(GameState& g, Seat s, Meld m, std::vector<EngineEvent>& ev) {
    std::string detail = m.kind == MeldKind::Pung ? "Pung" : (m.kind == MeldKind::ExposedKong ? "ExposedKong" : "ConcealedKong");
    if (m.source_seat) detail += " from " + std::to_string(*m.source_seat);
    g.hands[s].melds.push_back(m);
    ev.push_back({EventKind::MeldFormed, s, m.tile, detail});
}

Tile take_last_discard(GameState& g) {
    auto& pile = g.discards[g.last_discard->seat];
    const Tile t = pile.back();
    pile.pop_back();
    return t;
}

}  // namespace

Transition resolve_claims(const GameState& state, const std::map<Seat, Action>& claims) {
    if (state.phase != Phase::AwaitingClaims || !state.last_discard) {
        throw RuleViolation({"phase", "resolve_claims outside the claim window"});
    }
    for (const auto& [seat, a] : claims) {
        if (a.actor != seat) throw RuleViolation({"claim-actor", "claim keyed under a different seat"});
        if (auto v = check_action(state, a)) throw RuleViolation(*v);
    }
    Transition out{state, {}};
    GameState& g = out.state;
    const Seat discarder = g.last_discard->seat;
    const Tile tile = g.last_discard->tile;

    auto downstream = [&](ActionKind kind) -> std::optional<Seat> {
        for (int i = 1; i < kNumSeats; ++i) {
            const Seat s = (discarder + i) % kNumSeats;
            auto it = claims.find(s);
            if (it != claims.end() && it->second.kind == kind) return s;
        }
        return std::nullopt;
    };

    for (const auto& [seat, a] : claims) {
        if (a.kind == ActionKind::Win) g.winners.insert(seat);
    }
    if (!g.winners.empty()) {
        end_game(g, out.events, TerminalCause::WinByDiscard);
        return out;
    }
    if (auto s = downstream(ActionKind::Kong)) {
        take_last_discard(g);
        g.hands[*s].concealed.remove(tile, 3);
        form_meld(g, *s, Meld{MeldKind::ExposedKong, tile, discarder}, out.events);
        g.last_discard.reset();
        g.current_seat = *s;
        g.phase = Phase::AwaitingDiscard;
        replacement_draw(g, *s, out.events);
        return out;
    }
    if (auto s = downstream(ActionKind::Pung)) {
        take_last_discard(g);
        g.hands[*s].concealed.remove(tile, 2);
        form_meld(g, *s, Meld{MeldKind::Pung, tile, discarder}, out.events);
        g.last_discard.reset();
        g.current_seat = *s;
        g.phase = Phase::AwaitingDiscard;
        return out;
    }
    g.last_discard.reset();
    g.current_seat = (discarder + 1) % kNumSeats;
    g.phase = Phase::AwaitingDiscard;
    out.events.push_back({EventKind::TurnAdvanced, g.current_seat, std::nullopt, ""});
    return out;
}

Transition apply_action(const GameState& state, const Action& a) {
    if (auto v = check_action(state, a)) throw RuleViolation(*v);
    if (state.phase == Phase::AwaitingClaims) return resolve_claims(state, {{a.actor, a}});

    Transition out{state, {}};
    GameState& g = out.state;
    Hand& h = g.hands[a.actor];
    switch (a.kind) {
        case ActionKind::DeclareMissing:
            h.missing_suit = a.suit;
            out.events.push_back({EventKind::MissingDeclared, a.actor, std::nullopt, std::string(suit_name(a.suit))});
            if (a.actor == kNumSeats - 1) {
                g.current_seat = 0;
                g.phase = Phase::AwaitingDiscard;
            } else {
                g.current_seat = a.actor + 1;
            }
            out.events.push_back({EventKind::TurnAdvanced, g.current_seat, std::nullopt, ""});
            break;
        case ActionKind::Draw:
            if (g.wall.remaining() == 0) {
                end_game(g, out.events, TerminalCause::WallExhausted);
                break;
            }
            {
                const Tile t = g.wall.tiles[g.wall.draw_index++];
                h.concealed.add(t);
                out.events.push_back({EventKind::TileDrawn, a.actor, t, ""});
            }
            break;
        case ActionKind::Discard:
            h.concealed.remove(a.tile);
            g.discards[a.actor].push_back(a.tile);
            g.last_discard = LastDiscard{a.actor, a.tile};
            g.phase = Phase::AwaitingClaims;
            out.events.push_back({EventKind::TileDiscarded, a.actor, a.tile, ""});
            out.events.push_back({EventKind::ClaimWindowOpened, a.actor, a.tile, ""});
            break;
        case ActionKind::Kong:
            if (a.variant == KongVariant::Concealed) {
                h.concealed.remove(a.tile, 4);
                form_meld(g, a.actor, Meld{MeldKind::ConcealedKong, a.tile, std::nullopt}, out.events);
            } else {
                h.concealed.remove(a.tile, 1);
                auto it = std::find_if(h.melds.begin(), h.melds.end(), [&](const Meld& m) {
                    return m.kind == MeldKind::Pung && m.tile == a.tile;
                });
                it->kind = MeldKind::ExposedKong;
                it->source_seat.reset();
                out.events.push_back({EventKind::MeldFormed, a.actor, a.tile, "AddedKong"});
            }
            replacement_draw(g, a.actor, out.events);
            break;
        case ActionKind::Win:
            g.winners.insert(a.actor);
            end_game(g, out.events, TerminalCause::WinBySelfDraw);
            break;
        case ActionKind::Pung:
        case ActionKind::Pass: throw std::logic_error("claim outside claim window passed validation");
    }
    return out;
}

TileCounts all_zones(const GameState& g) {
    TileCounts all;
    for (int i = g.wall.draw_index; i < static_cast<int>(g.wall.tiles.size()); ++i) all.add(g.wall.tiles[i]);
    for (const Hand& h : g.hands) all += h.all_tiles();
    for (const auto& pile : g.discards) all += TileCounts::from_tiles(pile);
    return all;
}

bool conserves_tiles(const GameState& g) { return all_zones(g) == TileCounts::full_set(); }

std::string serialize_state(const GameState& g) {
    std::ostringstream out;
    out << "seed=" << g.rng_seed << ";draw=" << g.wall.draw_index << ";wall=";
    for (Tile t : g.wall.tiles) out << to_string(t);
    for (Seat s = 0; s < kNumSeats; ++s) {
        const Hand& h = g.hands[s];
        out << ";h" << s << "=" << to_string(h.concealed) << "|";
        for (const Meld& m : h.melds) {
            out << static_cast<int>(m.kind) << to_string(m.tile) << (m.source_seat ? std::to_string(*m.source_seat) : "-") << ",";
        }
        out << "|" << (h.missing_suit ? suit_letter(*h.missing_suit) : '-');
        out << ";d" << s << "=";
        for (Tile t : g.discards[s]) out << to_string(t);
    }
    out << ";cur=" << g.current_seat << ";phase=" << phase_name(g.phase) << ";win=";
    for (Seat w : g.winners) out << w;
    out << ";cause=" << (g.terminal_cause ? terminal_cause_name(*g.terminal_cause) : "-");
    if (g.last_discard) out << ";last=" << g.last_discard->seat << to_string(g.last_discard->tile);
    return out.str();
}

}  // namespace mjlab
