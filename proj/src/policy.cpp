#include "mjlab/policy.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace mjlab {

StateView make_view(const GameState& state, Seat seat) {
    StateView v;
    v.seat = seat;
    v.own = state.hands[seat];
    v.discards = state.discards;
    for (Seat s = 0; s < kNumSeats; ++s) {
        v.exposed_melds[s] = state.hands[s].melds;
        v.missing_suits[s] = state.hands[s].missing_suit;
    }
    v.wall_count = state.wall.remaining();
    v.current_seat = state.current_seat;
    v.phase = state.phase;
    v.claim_tile = state.last_discard;
    v.legal = legal_actions(state, seat);
    return v;
}

std::string summarize(const StateView& v) {
    std::ostringstream out;
    out << "seat=" << v.seat << " phase=" << phase_name(v.phase) << " hand=" << to_string(v.own.concealed);
    if (!v.own.melds.empty()) {
        out << " melds=";
        for (const Meld& m : v.own.melds) out << to_string(m.tile) << (m.is_kong() ? "x4" : "x3") << ' ';
    }
    out << " missing=" << (v.own.missing_suit ? suit_letter(*v.own.missing_suit) : '-') << " wall=" << v.wall_count;
    if (v.claim_tile) out << " claim=" << to_string(v.claim_tile->tile) << "@" << v.claim_tile->seat;
    return out.str();
}

double ActionDistribution::probability(const Action& a) const {
    for (std::size_t i = 0; i < actions.size(); ++i)
        if (actions[i] == a) return probabilities[i];
    return 0.0;
}

std::size_t ActionDistribution::argmax() const {
    return static_cast<std::size_t>(std::max_element(probabilities.begin(), probabilities.end()) - probabilities.begin());
}

const std::array<std::string_view, kNumFeatures>& feature_names() {
    static const std::array<std::string_view, kNumFeatures> names = {
        "win",           "pass",          "pung",         "kong",           "discard",    "neg_distance",
        "discard_missing", "discard_copies", "discard_isolated", "discard_safety", "discard_terminal",
        "discard_suit_share", "claim_late", "declare", "declare_suit_share", "draw"};
    return names;
}

namespace {

// Distance of the own hand after taking `a`.
int distance_after(const StateView& v, const Action& a) {
    Hand h = v.own;
    switch (a.kind) {
        case ActionKind::Win: return 0;
        case ActionKind::Discard: h.concealed.remove(a.tile); break;
        case ActionKind::Pung:
            h.concealed.remove(a.tile, 2);
            h.melds.push_back(Meld{MeldKind::Pung, a.tile, v.claim_tile ? std::optional<Seat>(v.claim_tile->seat) : std::nullopt});
            break;
        case ActionKind::Kong:
            if (a.variant == KongVariant::Claimed) {
                h.concealed.remove(a.tile, 3);
                h.melds.push_back(Meld{MeldKind::ExposedKong, a.tile, std::nullopt});
            } else if (a.variant == KongVariant::Concealed) {
                h.concealed.remove(a.tile, 4);
                h.melds.push_back(Meld{MeldKind::ConcealedKong, a.tile, std::nullopt});
            } else {
                h.concealed.remove(a.tile, 1);
                for (Meld& m : h.melds)
                    if (m.kind == MeldKind::Pung && m.tile == a.tile) m.kind = MeldKind::ExposedKong;
            }
            break;
        case ActionKind::DeclareMissing:
        case ActionKind::Draw:
        case ActionKind::Pass: break;
    }
    return distance_to_win(h);
}

int visible_copies(const StateView& v, Tile t) {
    int n = 0;
    for (const auto& pile : v.discards) n += static_cast<int>(std::count(pile.begin(), pile.end(), t));
    for (Seat s = 0; s < kNumSeats; ++s) {
        if (s == v.seat) continue;
        for (const Meld& m : v.exposed_melds[s])
            if (m.tile == t && m.kind != MeldKind::ConcealedKong) n += m.copies();
    }
    return n;
}

bool isolated(const TileCounts& c, Tile t) {
    if (c.count(t) != 1) return false;
    for (int d : {-2, -1, 1, 2}) {
        const int r = t.rank + d;
        if (r >= 1 && r <= 9 && c.count(Tile{t.suit, r}) > 0) return false;
    }
    return true;
}

}  // namespace

FeatureVector action_features(const StateView& v, const Action& a) {
    FeatureVector f{};
    switch (a.kind) {
        case ActionKind::Win: f[0] = 1; break;
        case ActionKind::Pass: f[1] = 1; break;
        case ActionKind::Pung: f[2] = 1; break;
        case ActionKind::Kong: f[3] = 1; break;
        case ActionKind::Discard: f[4] = 1; break;
        case ActionKind::DeclareMissing: f[13] = 1; break;
        case ActionKind::Draw: f[15] = 1; break;
    }
    if (a.kind != ActionKind::DeclareMissing && a.kind != ActionKind::Draw) f[5] = -distance_after(v, a) / 4.0;
    if (a.kind == ActionKind::Discard) {
        const TileCounts& c = v.own.concealed;
        f[6] = v.own.missing_suit == a.tile.suit ? 1.0 : 0.0;
        f[7] = c.count(a.tile) / 4.0;
        f[8] = isolated(c, a.tile) ? 1.0 : 0.0;
        f[9] = visible_copies(v, a.tile) / 4.0;
        f[10] = (a.tile.rank == 1 || a.tile.rank == 9) ? 1.0 : 0.0;
        f[11] = c.total() > 0 ? static_cast<double>(c.suit_total(a.tile.suit)) / c.total() : 0.0;
    }
    if (a.kind == ActionKind::Pung || a.kind == ActionKind::Kong) f[12] = 1.0 - v.wall_count / static_cast<double>(kWallSize);
    if (a.kind == ActionKind::DeclareMissing) f[14] = v.own.concealed.suit_total(a.suit) / 13.0;
    return f;
}

void PolicyParams::validate() const {
    if (theta.size() != static_cast<std::size_t>(kNumFeatures)) throw std::invalid_argument("theta has the wrong dimension");
    for (double x : theta)
        if (!std::isfinite(x)) throw std::invalid_argument("theta must be finite");
    if (!(temperature > 0.0) || !std::isfinite(temperature)) throw std::invalid_argument("temperature must be positive");
}

PolicyParams initial_params() {
    PolicyParams p;
    p.theta[0] = 2.0;    // win
    p.theta[1] = 0.5;    // pass
    p.theta[5] = 2.0;    // neg_distance
    p.theta[6] = 1.0;    // discard_missing
    p.theta[14] = -3.0;  // declare_suit_share
    p.temperature = 1.0;
    return p;
}

std::vector<double> UniformPolicy::scores(const StateView& view) const { return std::vector<double>(view.legal.size(), 0.0); }

std::vector<double> TeacherPolicy::scores(const StateView& v) const {
    std::vector<double> out;
    out.reserve(v.legal.size());
    const bool own_turn = v.phase == Phase::AwaitingDiscard;
    const int here = distance_to_win(v.own);
    int best_discard = 99;
    if (own_turn) {
        for (const Action& a : v.legal)
            if (a.kind == ActionKind::Discard) best_discard = std::min(best_discard, distance_after(v, a));
    }
    const Suit declared = choose_missing_suit(v.own);
    for (const Action& a : v.legal) {
        double s = 0.0;
        switch (a.kind) {
            case ActionKind::Win: s = 1000.0; break;
            case ActionKind::DeclareMissing: s = a.suit == declared ? 100.0 : 0.0; break;
            case ActionKind::Draw:
            case ActionKind::Pass: s = 0.0; break;
            case ActionKind::Pung:
            case ActionKind::Kong: {
                const int d = distance_after(v, a);
                const int reference = own_turn ? best_discard : here;
                s = d < reference ? 500.0 - d : -100.0;
                break;
            }
            case ActionKind::Discard:
                if (v.own.missing_suit == a.tile.suit) {
                    s = 200.0 + v.own.concealed.count(a.tile);
                } else {
                    s = 100.0 - distance_after(v, a);
                }
                break;
        }
        out.push_back(s);
    }
    return out;
}

SoftmaxPolicy::SoftmaxPolicy(PolicyParams params, std::string id) : params_(std::move(params)), id_(std::move(id)) {
    params_.validate();
}

std::vector<double> SoftmaxPolicy::scores(const StateView& view) const {
    std::vector<double> out;
    out.reserve(view.legal.size());
    for (const Action& a : view.legal) {
        const FeatureVector f = action_features(view, a);
        double s = 0.0;
        for (int i = 0; i < kNumFeatures; ++i) s += params_.theta[i] * f[i];
        out.push_back(s);
    }
    return out;
}

ActionDistribution action_distribution(const Policy& policy, const StateView& view) {
    if (view.legal.empty()) throw std::invalid_argument("no legal actions in view");
    const std::vector<double> s = policy.scores(view);
    const double t = policy.temperature();
    const double top = *std::max_element(s.begin(), s.end());
    ActionDistribution d;
    d.actions = view.legal;
    d.probabilities.resize(s.size());
    double z = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) z += d.probabilities[i] = std::exp((s[i] - top) / t);
    for (double& p : d.probabilities) p /= z;
    return d;
}

Decision decide(const Policy& policy, const StateView& view, Rng& rng, double timestamp) {
    const ActionDistribution d = action_distribution(policy, view);
    const std::vector<double> s = policy.scores(view);
    std::size_t pick = d.argmax();
    if (!policy.greedy && d.actions.size() > 1) {
        double u = rng.uniform();
        pick = d.actions.size() - 1;
        for (std::size_t i = 0; i < d.actions.size(); ++i) {
            if (u < d.probabilities[i]) {
                pick = i;
                break;
            }
            u -= d.probabilities[i];
        }
    }
    Decision out;
    out.action = d.actions[pick];
    DecisionTrace& tr = out.trace;
    tr.state_summary = summarize(view);
    for (std::size_t i = 0; i < d.actions.size(); ++i) tr.scored.push_back({d.actions[i], s[i], d.probabilities[i]});
    tr.chosen = out.action;
    tr.timestamp = timestamp;
    tr.policy_id = policy.id();
    const FeatureVector f = action_features(view, out.action);
    const auto* soft = dynamic_cast<const SoftmaxPolicy*>(&policy);
    for (int i = 0; i < kNumFeatures; ++i) {
        if (f[i] == 0.0) continue;
        tr.rationale.emplace_back(std::string(feature_names()[i]), soft ? soft->params().theta[i] * f[i] : f[i]);
    }
    return out;
}

Suit choose_missing_suit(const Hand& hand) {
    Suit best = Suit::Characters;
    for (Suit s : kAllSuits)
        if (hand.concealed.suit_total(s) < hand.concealed.suit_total(best)) best = s;
    return best;
}

double log_probability(const Policy& policy, const StateView& view, const Action& action) {
    const auto it = std::find(view.legal.begin(), view.legal.end(), action);
    if (it == view.legal.end()) throw std::invalid_argument("action not legal in view: " + to_string(action));
    const std::vector<double> s = policy.scores(view);
    const double t = policy.temperature();
    const double top = *std::max_element(s.begin(), s.end());
    double z = 0.0;
    for (double x : s) z += std::exp((x - top) / t);
    return (s[it - view.legal.begin()] - top) / t - std::log(z);
}

std::vector<double> grad_log_probability(const SoftmaxPolicy& policy, const StateView& view, const Action& action) {
    const auto it = std::find(view.legal.begin(), view.legal.end(), action);
    if (it == view.legal.end()) throw std::invalid_argument("action not legal in view: " + to_string(action));
    const ActionDistribution d = action_distribution(policy, view);
    const double t = policy.temperature();
    std::vector<double> g(kNumFeatures, 0.0);
    for (std::size_t i = 0; i < d.actions.size(); ++i) {
        const FeatureVector f = action_features(view, d.actions[i]);
        const double w = (d.actions[i] == action ? 1.0 : 0.0) - d.probabilities[i];
        for (int k = 0; k < kNumFeatures; ++k) g[k] += w * f[k] / t;
    }
    return g;
}

}  // namespace mjlab
