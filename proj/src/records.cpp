#include "mjlab/records.hpp"

#include <stdexcept>

namespace mjlab {

using nlohmann::json;

namespace {

ActionKind parse_action_kind(const std::string& s) {
    for (auto k : {ActionKind::DeclareMissing, ActionKind::Draw, ActionKind::Discard, ActionKind::Pung, ActionKind::Kong,
                   ActionKind::Win, ActionKind::Pass}) {
        if (action_kind_name(k) == s) return k;
    }
    throw std::invalid_argument("unknown action kind: " + s);
}

KongVariant parse_kong_variant(const std::string& s) {
    for (auto v : {KongVariant::Claimed, KongVariant::Concealed, KongVariant::Added}) {
        if (kong_variant_name(v) == s) return v;
    }
    throw std::invalid_argument("unknown kong variant: " + s);
}

}  // namespace

json action_to_json(const Action& a) {
    json j{{"kind", action_kind_name(a.kind)}, {"actor", a.actor}};
    switch (a.kind) {
        case ActionKind::DeclareMissing: j["suit"] = suit_name(a.suit); break;
        case ActionKind::Discard:
        case ActionKind::Pung: j["tile"] = to_string(a.tile); break;
        case ActionKind::Kong:
            j["tile"] = to_string(a.tile);
            j["variant"] = kong_variant_name(a.variant);
            break;
        case ActionKind::Draw:
        case ActionKind::Win:
        case ActionKind::Pass: break;
    }
    return j;
}

Action action_from_json(const json& j) {
    const ActionKind kind = parse_action_kind(j.at("kind").get<std::string>());
    const Seat actor = j.at("actor").get<int>();
    switch (kind) {
        case ActionKind::DeclareMissing: {
            auto suit = parse_suit(j.at("suit").get<std::string>());
            if (!suit) throw std::invalid_argument("unknown suit");
            return Action::declare(actor, *suit);
        }
        case ActionKind::Draw: return Action::draw(actor);
        case ActionKind::Discard: return Action::discard(actor, parse_tile(j.at("tile").get<std::string>()));
        case ActionKind::Pung: return Action::pung(actor, parse_tile(j.at("tile").get<std::string>()));
        case ActionKind::Kong:
            return Action::kong(actor, parse_tile(j.at("tile").get<std::string>()),
                                parse_kong_variant(j.at("variant").get<std::string>()));
        case ActionKind::Win: return Action::win(actor);
        case ActionKind::Pass: return Action::pass(actor);
    }
    throw std::invalid_argument("unreachable action kind");
}

json fault_event_to_json(const FaultEvent& f) {
    json j{{"kind", fault_kind_name(f.kind)}, {"sim_time", f.sim_time}, {"turn_index", f.turn_index}, {"detail", f.detail}};
    j["actor"] = f.actor ? json(*f.actor) : json(nullptr);
    j["victim"] = f.victim ? json(*f.victim) : json(nullptr);
    return j;
}

FaultEvent fault_event_from_json(const json& j) {
    FaultEvent f;
    auto kind = parse_fault_kind(j.at("kind").get<std::string>());
    if (!kind) throw std::invalid_argument("unknown fault kind");
    f.kind = *kind;
    f.sim_time = j.at("sim_time").get<double>();
    f.turn_index = j.at("turn_index").get<int>();
    f.detail = j.at("detail").get<std::string>();
    if (!j.at("actor").is_null()) f.actor = j.at("actor").get<int>();
    if (!j.at("victim").is_null()) f.victim = j.at("victim").get<int>();
    return f;
}

json trace_to_json(const DecisionTrace& t) {
    json scored = json::array();
    for (const ScoredAction& s : t.scored) {
        scored.push_back({{"action", action_to_json(s.action)}, {"score", s.score}, {"probability", s.probability}});
    }
    json rationale = json::object();
    for (const auto& [name, value] : t.rationale) rationale[name] = value;
    return {{"state", t.state_summary}, {"scored", scored},        {"chosen", action_to_json(t.chosen)},
            {"rationale", rationale},  {"timestamp", t.timestamp}, {"policy", t.policy_id}};
}

json params_to_json(const PolicyParams& p) {
    json theta = json::object();
    for (int i = 0; i < kNumFeatures; ++i) theta[std::string(feature_names()[i])] = p.theta[i];
    return {{"theta", theta}, {"temperature", p.temperature}};
}

PolicyParams params_from_json(const json& j) {
    PolicyParams p;
    const json& theta = j.at("theta");
    for (int i = 0; i < kNumFeatures; ++i) p.theta[i] = theta.value(std::string(feature_names()[i]), 0.0);
    p.temperature = j.value("temperature", 1.0);
    p.validate();
    return p;
}

}  // namespace mjlab
