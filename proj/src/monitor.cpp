#include "mjlab/monitor.hpp"

#include <json.hpp>
#include <set>
#include <sstream>
#include <stdexcept>

#include "mjlab/records.hpp"

namespace mjlab {

using nlohmann::json;

std::string_view detector_task_name(DetectorTask t) {
    return t == DetectorTask::TurnViolation ? "TurnViolation" : "Inspection";
}

std::optional<DetectorTask> parse_detector_task(std::string_view text) {
    if (text == "TurnViolation") return DetectorTask::TurnViolation;
    if (text == "Inspection") return DetectorTask::Inspection;
    return std::nullopt;
}

FaultKind watched_fault(DetectorTask t) {
    return t == DetectorTask::TurnViolation ? FaultKind::OutOfTurn : FaultKind::Inspection;
}

void DetectorSpec::validate() const {
    for (double p : {true_positive_rate, false_positive_rate, identity_error_rate}) {
        if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("detector rates must lie in [0, 1]");
    }
}

DetectorSpec DetectorSpec::from_precision_recall(DetectorTask task, double precision, double recall, double base_rate,
                                                 double identity_error_rate) {
    if (!(precision > 0.0 && precision <= 1.0) || !(base_rate > 0.0 && base_rate < 1.0)) {
        throw std::invalid_argument("precision must lie in (0, 1] and base rate in (0, 1)");
    }
    DetectorSpec s;
    s.task = task;
    s.true_positive_rate = recall;
    s.false_positive_rate = recall * base_rate * (1.0 - precision) / (precision * (1.0 - base_rate));
    s.identity_error_rate = identity_error_rate;
    s.validate();
    return s;
}

void MonitorLog::append(DetectionEvent e) {
    if (!entries_.empty() && e.sim_time < entries_.back().sim_time) {
        throw std::invalid_argument("monitor log entries must be ordered by sim_time");
    }
    entries_.push_back(std::move(e));
}

namespace {

Seat other_human(Seat exclude_a, Seat exclude_b, Rng& rng) {
    std::vector<Seat> choices;
    for (Seat s = 0; s < kNumSeats; ++s)
        if (s != exclude_a && s != exclude_b) choices.push_back(s);
    return choices[rng.below(choices.size())];
}

}  // namespace

MonitorLog observe(const std::vector<FaultEvent>& truth_events, const std::vector<TurnContext>& turns,
                   const DetectorSpec& spec, Rng& rng) {
    spec.validate();
    const FaultKind watched = watched_fault(spec.task);
    MonitorLog log;
    std::size_t next = 0;
    for (const TurnContext& turn : turns) {
        bool positive = false;
        while (next < truth_events.size() && truth_events[next].turn_index < turn.turn_index) ++next;
        for (; next < truth_events.size() && truth_events[next].turn_index == turn.turn_index; ++next) {
            const FaultEvent& ev = truth_events[next];
            if (ev.kind != watched) continue;
            positive = true;
            if (!rng.bernoulli(spec.true_positive_rate)) continue;
            const Seat actor = ev.actor.value_or(turn.current_seat);
            Seat predicted = actor;
            if (rng.bernoulli(spec.identity_error_rate)) predicted = other_human(actor, turn.robot_seat, rng);
            log.append({spec.task, predicted, turn.sim_time, turn.turn_index, ev, true});
        }
        if (!positive && rng.bernoulli(spec.false_positive_rate)) {
            const Seat predicted = other_human(turn.robot_seat, turn.robot_seat, rng);
            log.append({spec.task, predicted, turn.sim_time, turn.turn_index, std::nullopt, true});
        }
    }
    return log;
}

DetectionScores score_detections(const MonitorLog& log, const std::vector<FaultEvent>& truth_events, int total_turns,
                                 std::optional<DetectorTask> task) {
    std::set<int> truly, predicted;
    for (const FaultEvent& ev : truth_events) {
        const bool watched = task ? ev.kind == watched_fault(*task)
                                  : (ev.kind == FaultKind::OutOfTurn || ev.kind == FaultKind::Inspection);
        if (watched) truly.insert(ev.turn_index);
    }
    for (const DetectionEvent& d : log.entries()) {
        if (!task || d.task == *task) predicted.insert(d.turn_index);
    }
    if (static_cast<long>(truly.size()) > total_turns) throw std::invalid_argument("more positive turns than turns");

    DetectionScores s;
    for (int t : predicted) (truly.count(t) ? s.true_positive : s.false_positive)++;
    for (int t : truly)
        if (!predicted.count(t)) ++s.false_negative;
    s.true_negative = total_turns - s.true_positive - s.false_positive - s.false_negative;
    auto ratio = [](long num, long den) -> std::optional<double> {
        if (den == 0) return std::nullopt;
        return static_cast<double>(num) / static_cast<double>(den);
    };
    s.precision = ratio(s.true_positive, s.true_positive + s.false_positive);
    s.recall = ratio(s.true_positive, s.true_positive + s.false_negative);
    s.specificity = ratio(s.true_negative, s.true_negative + s.false_positive);
    s.negative_predictive_value = ratio(s.true_negative, s.true_negative + s.false_negative);
    return s;
}

SyntheticStream synthetic_stream(int n_turns, double base_rate, DetectorTask task, Rng& rng, double turn_seconds) {
    SyntheticStream out;
    out.turns.reserve(static_cast<std::size_t>(n_turns));
    for (int t = 0; t < n_turns; ++t) {
        const double time = t * turn_seconds;
        const Seat current = t % kNumSeats;
        out.turns.push_back({t, time, current, 0});
        if (!rng.bernoulli(base_rate)) continue;
        FaultEvent ev;
        ev.kind = watched_fault(task);
        ev.sim_time = time;
        ev.turn_index = t;
        ev.actor = static_cast<Seat>(1 + rng.below(kNumSeats - 1));
        if (task == DetectorTask::Inspection) ev.victim = ev.actor == 1 ? 2 : 1;
        out.truth.push_back(ev);
    }
    return out;
}

std::string export_log(const MonitorLog& log) {
    std::string out;
    for (const DetectionEvent& e : log.entries()) {
        json j{{"task", detector_task_name(e.task)},
               {"predicted_actor", e.predicted_actor},
               {"sim_time", e.sim_time},
               {"turn_index", e.turn_index},
               {"linked", e.linked_truth.has_value()},
               {"surfaced", e.surfaced}};
        if (e.linked_truth) j["truth"] = fault_event_to_json(*e.linked_truth);
        out += j.dump();
        out += '\n';
    }
    return out;
}

MonitorLog parse_log(std::string_view text) {
    MonitorLog log;
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const json j = json::parse(line);
        DetectionEvent e;
        auto task = parse_detector_task(j.at("task").get<std::string>());
        if (!task) throw std::invalid_argument("unknown detector task");
        e.task = *task;
        e.predicted_actor = j.at("predicted_actor").get<int>();
        e.sim_time = j.at("sim_time").get<double>();
        e.turn_index = j.at("turn_index").get<int>();
        e.surfaced = j.value("surfaced", true);
        if (j.at("linked").get<bool>()) e.linked_truth = fault_event_from_json(j.at("truth"));
        log.append(std::move(e));
    }
    return log;
}

}  // namespace mjlab
