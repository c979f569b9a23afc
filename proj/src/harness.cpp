#include "mjlab/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "mjlab/records.hpp"

namespace mjlab {

using nlohmann::json;

std::string_view missing_suit_info_name(MissingSuitInfo m) {
    return m == MissingSuitInfo::Normal ? "normal" : "forced-characters";
}

std::optional<MissingSuitInfo> parse_missing_suit_info(std::string_view text) {
    if (text == "normal") return MissingSuitInfo::Normal;
    if (text == "forced-characters") return MissingSuitInfo::ForcedCharacters;
    return std::nullopt;
}

void SeatAssignment::validate() const {
    if (kind != "teacher" && kind != "uniform" && kind != "softmax") {
        throw std::invalid_argument("unknown seat policy: " + kind);
    }
    if (!(temperature > 0.0) || !std::isfinite(temperature)) throw std::invalid_argument("seat temperature must be positive");
    params.validate();
}

std::unique_ptr<Policy> make_policy(const SeatAssignment& seat) {
    seat.validate();
    std::unique_ptr<Policy> p;
    if (seat.kind == "teacher") {
        p = std::make_unique<TeacherPolicy>(seat.temperature);
    } else if (seat.kind == "uniform") {
        p = std::make_unique<UniformPolicy>();
    } else {
        p = std::make_unique<SoftmaxPolicy>(seat.params);
    }
    p->greedy = seat.greedy;
    return p;
}

std::vector<std::uint64_t> ExperimentConfig::seed_list() const {
    if (!seeds.empty()) return seeds;
    std::vector<std::uint64_t> out;
    for (int i = 0; i < games; ++i) out.push_back(base_seed + static_cast<std::uint64_t>(i));
    return out;
}

void ExperimentConfig::validate() const {
    if (seeds.empty() && games < 0) throw std::invalid_argument("game count must be non-negative");
    const auto list = seed_list();
    if (std::set<std::uint64_t>(list.begin(), list.end()).size() != list.size()) {
        throw std::invalid_argument("seeds must be unique per game");
    }
    if (robot_seat < 0 || robot_seat >= kNumSeats) throw std::invalid_argument("robot seat out of range");
    for (const SeatAssignment& s : seats) s.validate();
    faults.validate();
    recovery.validate();
    for (const DetectorSpec& d : detectors) d.validate();
    if (intervention_probability < 0.0 || intervention_probability > 1.0) {
        throw std::invalid_argument("intervention probability outside [0, 1]");
    }
    if (session_length < 1) throw std::invalid_argument("session length must be positive");
    if (game_seconds < 0.0 || human_action_seconds < 0.0) throw std::invalid_argument("durations must be non-negative");
    if (max_steps < 1) throw std::invalid_argument("max steps must be positive");
    if (parallelism < 1) throw std::invalid_argument("parallelism must be positive");
}

ExperimentConfig ExperimentConfig::paper_deployment() {
    ExperimentConfig c;
    c.profile = "paper-2025-deployment";
    c.games = 122;
    FaultConfig& f = c.faults;
    // Raw single-attempt grasp success of 99.2%.
    f.execution_base_failure = 0.008;
    f.relocalize_success = 0.9;
    // Five misdetections over 122 games at about 80 recognitions per game.
    f.misdetection_rate = misdetection_rate_from_counts(5, 122, 80);
    f.interaction = {0.01, 0.005};
    // Tactile verification treated as exact.
    f.sensor = {0.0, 0.0};
    // Hardware error frequency rises after about 20000 s of operation.
    f.hazard = {0.008, 0.01, 20000.0, 2000.0};
    c.detectors = {
        DetectorSpec::from_precision_recall(DetectorTask::TurnViolation, 0.872, 0.867, f.interaction.out_of_turn),
        DetectorSpec::from_precision_recall(DetectorTask::Inspection, 0.724, 0.945, f.interaction.inspection),
    };
    return c;
}

std::optional<ExperimentConfig> named_profile(std::string_view name) {
    if (name == "default") return ExperimentConfig{};
    if (name == "paper-2025-deployment") return ExperimentConfig::paper_deployment();
    return std::nullopt;
}

namespace {

std::string_view commit_mode_name(CommitMode m) {
    return m == CommitMode::VerifyThenCommit ? "verify-then-commit" : "commit-before-verify";
}

CommitMode parse_commit_mode(const std::string& s) {
    if (s == "verify-then-commit") return CommitMode::VerifyThenCommit;
    if (s == "commit-before-verify") return CommitMode::CommitBeforeVerify;
    throw std::invalid_argument("unknown commit mode: " + s);
}

json seat_to_json(const SeatAssignment& s) {
    json j{{"kind", s.kind}, {"greedy", s.greedy}};
    if (s.kind == "teacher") j["temperature"] = s.temperature;
    if (s.kind == "softmax") j["params"] = params_to_json(s.params);
    return j;
}

SeatAssignment seat_from_json(const json& j, SeatAssignment s) {
    if (j.is_string()) {
        s.kind = j.get<std::string>();
        return s;
    }
    s.kind = j.value("kind", s.kind);
    s.greedy = j.value("greedy", s.greedy);
    s.temperature = j.value("temperature", s.temperature);
    if (j.contains("params")) s.params = params_from_json(j.at("params"));
    return s;
}

json faults_to_json(const FaultConfig& f) {
    return {{"misdetection_rate", f.misdetection_rate},
            {"execution_base_failure", f.execution_base_failure},
            {"relocalize_success", f.relocalize_success},
            {"interaction", {{"out_of_turn", f.interaction.out_of_turn}, {"inspection", f.interaction.inspection}}},
            {"sensor", {{"false_negative", f.sensor.false_negative}, {"false_positive", f.sensor.false_positive}}},
            {"hazard",
             {{"base", f.hazard.base},
              {"excess", f.hazard.excess},
              {"onset_t0", f.hazard.onset_t0},
              {"width_tau", f.hazard.width_tau}}}};
}

void faults_from_json(const json& j, FaultConfig& f) {
    f.misdetection_rate = j.value("misdetection_rate", f.misdetection_rate);
    f.execution_base_failure = j.value("execution_base_failure", f.execution_base_failure);
    f.relocalize_success = j.value("relocalize_success", f.relocalize_success);
    if (j.contains("interaction")) {
        const json& i = j.at("interaction");
        f.interaction.out_of_turn = i.value("out_of_turn", f.interaction.out_of_turn);
        f.interaction.inspection = i.value("inspection", f.interaction.inspection);
    }
    if (j.contains("sensor")) {
        const json& s = j.at("sensor");
        f.sensor.false_negative = s.value("false_negative", f.sensor.false_negative);
        f.sensor.false_positive = s.value("false_positive", f.sensor.false_positive);
    }
    if (j.contains("hazard")) {
        const json& h = j.at("hazard");
        f.hazard.base = h.value("base", f.hazard.base);
        f.hazard.excess = h.value("excess", f.hazard.excess);
        f.hazard.onset_t0 = h.value("onset_t0", f.hazard.onset_t0);
        f.hazard.width_tau = h.value("width_tau", f.hazard.width_tau);
    }
}

json detector_to_json(const DetectorSpec& d) {
    return {{"task", detector_task_name(d.task)},
            {"true_positive_rate", d.true_positive_rate},
            {"false_positive_rate", d.false_positive_rate},
            {"identity_error_rate", d.identity_error_rate}};
}

DetectorSpec detector_from_json(const json& j) {
    auto task = parse_detector_task(j.at("task").get<std::string>());
    if (!task) throw std::invalid_argument("unknown detector task");
    if (j.contains("precision")) {
        return DetectorSpec::from_precision_recall(*task, j.at("precision").get<double>(), j.at("recall").get<double>(),
                                                   j.at("base_rate").get<double>(), j.value("identity_error_rate", 0.0));
    }
    DetectorSpec d;
    d.task = *task;
    d.true_positive_rate = j.value("true_positive_rate", d.true_positive_rate);
    d.false_positive_rate = j.value("false_positive_rate", d.false_positive_rate);
    d.identity_error_rate = j.value("identity_error_rate", d.identity_error_rate);
    return d;
}

}  // namespace

json config_to_json(const ExperimentConfig& c) {
    json seats = json::array();
    for (const SeatAssignment& s : c.seats) seats.push_back(seat_to_json(s));
    json detectors = json::array();
    for (const DetectorSpec& d : c.detectors) detectors.push_back(detector_to_json(d));
    return {{"profile", c.profile},
            {"games", c.games},
            {"base_seed", c.base_seed},
            {"seeds", c.seeds},
            {"seats", seats},
            {"robot_seat", c.robot_seat},
            {"rotate_dealer", c.rotate_dealer},
            {"faults", faults_to_json(c.faults)},
            {"recovery",
             {{"max_retries", c.recovery.max_retries},
              {"relocalize", c.recovery.relocalize},
              {"commit_mode", commit_mode_name(c.recovery.commit_mode)}}},
            {"detectors", detectors},
            {"missing_suit_info", missing_suit_info_name(c.missing_suit_info)},
            {"intervention_probability", c.intervention_probability},
            {"session_length", c.session_length},
            {"game_seconds", c.game_seconds},
            {"human_action_seconds", c.human_action_seconds},
            {"max_steps", c.max_steps},
            {"parallelism", c.parallelism},
            {"output_dir", c.output_dir},
            {"write_transcripts", c.write_transcripts},
            {"all_traces", c.all_traces}};
}

ExperimentConfig config_from_json(const json& j) {
    const std::string profile = j.value("profile", std::string("default"));
    auto base = named_profile(profile);
    if (!base) throw std::invalid_argument("unknown profile: " + profile);
    ExperimentConfig c = *base;
    c.games = j.value("games", c.games);
    c.base_seed = j.value("base_seed", c.base_seed);
    if (j.contains("seeds")) c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    if (j.contains("seats")) {
        const json& seats = j.at("seats");
        if (!seats.is_array() || seats.size() != kNumSeats) throw std::invalid_argument("exactly 4 seat assignments");
        for (int s = 0; s < kNumSeats; ++s) c.seats[s] = seat_from_json(seats[s], c.seats[s]);
    }
    c.robot_seat = j.value("robot_seat", c.robot_seat);
    c.rotate_dealer = j.value("rotate_dealer", c.rotate_dealer);
    if (j.contains("faults")) faults_from_json(j.at("faults"), c.faults);
    if (j.contains("recovery")) {
        const json& r = j.at("recovery");
        c.recovery.max_retries = r.value("max_retries", c.recovery.max_retries);
        c.recovery.relocalize = r.value("relocalize", c.recovery.relocalize);
        if (r.contains("commit_mode")) c.recovery.commit_mode = parse_commit_mode(r.at("commit_mode").get<std::string>());
    }
    if (j.contains("detectors")) {
        c.detectors.clear();
        for (const json& d : j.at("detectors")) c.detectors.push_back(detector_from_json(d));
    }
    if (j.contains("missing_suit_info")) {
        auto m = parse_missing_suit_info(j.at("missing_suit_info").get<std::string>());
        if (!m) throw std::invalid_argument("unknown missing suit info mode");
        c.missing_suit_info = *m;
    }
    c.intervention_probability = j.value("intervention_probability", c.intervention_probability);
    c.session_length = j.value("session_length", c.session_length);
    c.game_seconds = j.value("game_seconds", c.game_seconds);
    c.human_action_seconds = j.value("human_action_seconds", c.human_action_seconds);
    c.max_steps = j.value("max_steps", c.max_steps);
    c.parallelism = j.value("parallelism", c.parallelism);
    c.output_dir = j.value("output_dir", c.output_dir);
    c.write_transcripts = j.value("write_transcripts", c.write_transcripts);
    c.all_traces = j.value("all_traces", c.all_traces);
    c.validate();
    return c;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read config " + path);
    return config_from_json(json::parse(in));
}

std::string resolve_output_dir(const std::string& configured) {
    if (const char* env = std::getenv("MJLAB_OUTPUT_DIR"); env && *env) return env;
    return configured;
}

json summary_to_json(const GameSummary& s) {
    json attempts = json::array();
    for (const auto& [t, failed] : s.attempts) attempts.push_back({t, failed});
    json monitor = json::object();
    for (const auto& [task, m] : s.monitor) monitor[task] = m;
    return {{"seed", s.seed},
            {"start_time", s.start_time},
            {"robot_seat", s.robot_seat},
            {"winners", s.outcome.winners},
            {"terminal_cause", terminal_cause_name(s.outcome.terminal_cause)},
            {"completed", s.completed},
            {"autonomous", s.autonomous},
            {"steps", s.steps},
            {"turns", s.turns},
            {"primitives", s.primitives},
            {"grasp_primitives", s.grasp_primitives},
            {"grasp_attempts", s.grasp_attempts},
            {"successful_attempts", s.successful_attempts},
            {"grasp_successes", s.grasp_successes},
            {"unrecovered", s.unrecovered},
            {"rejected", s.rejected},
            {"assisted", s.assisted},
            {"interventions", s.interventions},
            {"takeovers", s.takeovers},
            {"fallbacks", s.fallbacks},
            {"faults", s.faults},
            {"detections", s.detections},
            {"monitor", monitor},
            {"attempts", attempts},
            {"error", s.error ? json(*s.error) : json(nullptr)}};
}

namespace {

TerminalCause parse_terminal_cause(const std::string& s) {
    for (auto c : {TerminalCause::WinByDiscard, TerminalCause::WinBySelfDraw, TerminalCause::WallExhausted}) {
        if (terminal_cause_name(c) == s) return c;
    }
    throw std::invalid_argument("unknown terminal cause: " + s);
}

}  // namespace

GameSummary summary_from_json(const json& j) {
    GameSummary s;
    s.seed = j.at("seed").get<std::uint64_t>();
    s.start_time = j.at("start_time").get<double>();
    s.robot_seat = j.at("robot_seat").get<Seat>();
    s.outcome.winners = j.at("winners").get<std::set<Seat>>();
    s.outcome.terminal_cause = parse_terminal_cause(j.at("terminal_cause").get<std::string>());
    s.completed = j.at("completed").get<bool>();
    s.autonomous = j.at("autonomous").get<bool>();
    s.steps = j.at("steps").get<int>();
    s.turns = j.at("turns").get<int>();
    s.primitives = j.at("primitives").get<int>();
    s.grasp_primitives = j.at("grasp_primitives").get<int>();
    s.grasp_attempts = j.at("grasp_attempts").get<int>();
    s.successful_attempts = j.at("successful_attempts").get<int>();
    s.grasp_successes = j.at("grasp_successes").get<int>();
    s.unrecovered = j.at("unrecovered").get<int>();
    s.rejected = j.at("rejected").get<int>();
    s.assisted = j.at("assisted").get<int>();
    s.interventions = j.at("interventions").get<int>();
    s.takeovers = j.at("takeovers").get<int>();
    s.fallbacks = j.at("fallbacks").get<int>();
    s.faults = j.at("faults").get<std::map<std::string, int>>();
    s.detections = j.at("detections").get<std::map<std::string, int>>();
    for (const auto& [task, m] : j.at("monitor").items()) s.monitor[task] = m.get<std::array<long, 4>>();
    for (const json& a : j.at("attempts")) s.attempts.emplace_back(a[0].get<double>(), a[1].get<bool>());
    if (!j.at("error").is_null()) s.error = j.at("error").get<std::string>();
    return s;
}

std::string Transcript::to_jsonl() const {
    std::string out;
    for (const json& r : records) {
        out += r.dump();
        out += '\n';
    }
    return out;
}

namespace {

json tile_list(const std::vector<Tile>& tiles) {
    json out = json::array();
    for (Tile t : tiles) out.push_back(to_string(t));
    return out;
}

json consistency_to_json(const ConsistencyReport& r) {
    json entries = json::array();
    for (const ConsistencyEntry& e : r.entries) {
        entries.push_back({{"class", inconsistency_class_name(e.cls)},
                           {"field", e.field},
                           {"believed", e.believed},
                           {"actual", e.actual}});
    }
    return entries;
}

bool contains(const std::vector<Action>& actions, const Action& a) {
    return std::find(actions.begin(), actions.end(), a) != actions.end();
}

// One game with the robot seat acting through guarded primitives on its
// belief and every other seat acting directly on the table.
class GameLoop {
public:
    GameLoop(const ExperimentConfig& cfg, std::uint64_t seed, double start_time, const std::optional<Wall>& wall)
        : cfg_(cfg),
          robot_(cfg.robot_seat),
          g_(new_game(seed, wall)),
          decide_rng_(derive_seed(seed, 11)),
          fault_rng_(derive_seed(seed, 12)),
          monitor_rng_(derive_seed(seed, 13)),
          interaction_rng_(derive_seed(seed, 14)),
          intervention_rng_(derive_seed(seed, 15)) {
        for (Seat s = 0; s < kNumSeats; ++s) policies_[s] = make_policy(cfg.seats[s]);
        internal_ = synchronize(g_, robot_);
        clock_.now = start_time;
        obs_.forced_characters = cfg.missing_suit_info == MissingSuitInfo::ForcedCharacters;
        s_.seed = seed;
        s_.robot_seat = robot_;
        s_.start_time = start_time;
        json wall_tiles = tile_list(g_.wall.tiles);
        record({{"type", "config"},
                {"schema", "mjlab-transcript/1"},
                {"seed", seed},
                {"start_time", start_time},
                {"robot_seat", robot_},
                {"profile", cfg.profile},
                {"seats", {cfg.seats[0].kind, cfg.seats[1].kind, cfg.seats[2].kind, cfg.seats[3].kind}},
                {"wall", wall_tiles}});
    }

    GameRun run() {
        try {
            while (!g_.terminal()) {
                if (s_.steps >= cfg_.max_steps) throw std::runtime_error("step limit reached");
                ++s_.steps;
                if (g_.phase == Phase::AwaitingClaims) {
                    claim_window();
                } else {
                    turn();
                }
            }
            s_.completed = true;
        } catch (const std::exception& e) {
            s_.error = e.what();
        }
        if (g_.terminal()) s_.outcome = outcome_of(g_);
        s_.turns = static_cast<int>(turns_.size());
        s_.autonomous = s_.completed && s_.assisted == 0 && s_.interventions == 0 && s_.takeovers == 0;
        run_monitors();
        for (const FaultEvent& f : faults_) s_.faults[std::string(fault_kind_name(f.kind))] += 1;
        GameRun out;
        out.summary = s_;
        record({{"type", "end"}, {"summary", summary_to_json(s_)}});
        out.transcript = std::move(transcript_);
        return out;
    }

private:
    void record(json j) { transcript_.records.push_back(std::move(j)); }

    void log_fault(FaultEvent f) {
        f.turn_index = static_cast<int>(turns_.size());
        json j = fault_event_to_json(f);
        j["type"] = "fault";
        record(std::move(j));
        faults_.push_back(std::move(f));
    }

    Action decide_for(Seat s, const StateView& view) {
        Decision d = decide(*policies_[s], view, decide_rng_, clock_.now);
        if (s == robot_ || cfg_.all_traces) {
            record({{"type", "decision"}, {"step", s_.steps}, {"seat", s}, {"trace", trace_to_json(d.trace)}});
        }
        return d.action;
    }

    void log_action(const Action& a, bool table) {
        record({{"type", "action"}, {"step", s_.steps}, {"time", clock_.now}, {"action", action_to_json(a)},
                {"table", table}});
    }

    void sample_turn_events() {
        TurnContext t{static_cast<int>(turns_.size()), clock_.now, g_.current_seat, robot_};
        if (auto ev = sample_interaction_event(g_, robot_, cfg_.faults, interaction_rng_)) {
            ev->sim_time = clock_.now;
            log_fault(*ev);
            interaction_truth_.push_back(faults_.back());
        }
        turns_.push_back(t);
    }

    void turn() {
        sample_turn_events();
        const Seat s = g_.current_seat;
        if (s != robot_) {
            const Action a = decide_for(s, make_view(g_, s));
            human_step(a);
            return;
        }
        robot_turn();
    }

    void human_step(const Action& a) {
        log_action(a, false);
        Transition tr = apply_action(g_, a);
        clock_.now += cfg_.human_action_seconds;
        g_ = std::move(tr.state);
        observe(tr.events);
    }

    void observe(const std::vector<EngineEvent>& events) {
        for (const EngineEvent& ev : events) {
            const bool drawn = ev.kind == EventKind::TileDrawn || ev.kind == EventKind::ReplacementDrawn;
            if (drawn && ev.seat == robot_) last_drawn_ = ev.tile;
        }
        std::vector<FaultEvent> seen;
        observe_events(internal_, events, g_, obs_, cfg_.faults, fault_rng_, &seen, clock_.now,
                       static_cast<int>(turns_.size()));
        for (FaultEvent& f : seen) log_fault(std::move(f));
    }

    StateView robot_view() const { return make_view(belief_state(internal_, g_), robot_); }

    // The nearest action the table accepts: the robot's choice, a pass or a
    // draw, or a discard of a tile both believed and actually held.
    std::optional<Action> fallback(const Action& wanted) const {
        const auto legal = legal_actions(g_, robot_);
        if (contains(legal, wanted)) return wanted;
        for (const Action& a : legal) {
            if (a.kind == ActionKind::Pass || a.kind == ActionKind::Draw) return a;
        }
        for (const Action& a : legal) {
            if (a.kind == ActionKind::Discard && internal_.perceptual.believed_hand.count(a.tile) > 0) return a;
        }
        return std::nullopt;
    }

    // The robot cannot act on its belief. The table makes the minimal legal
    // move for it and leaves the robot's state as it was.
    void table_takes_over(const Action& wanted) {
        const auto legal = legal_actions(g_, robot_);
        Action a = wanted;
        if (!contains(legal, wanted)) a = minimal_action(legal);
        log_action(a, true);
        Transition tr = apply_action(g_, a);
        clock_.now += cfg_.human_action_seconds;
        g_ = std::move(tr.state);
        observe(tr.events);
        ++s_.takeovers;
        record({{"type", "takeover"}, {"step", s_.steps}, {"time", clock_.now}, {"action", action_to_json(a)}});
    }

    // Draw or pass, else discard the tile just drawn.
    Action minimal_action(const std::vector<Action>& legal) const {
        for (const Action& a : legal) {
            if (a.kind == ActionKind::Pass || a.kind == ActionKind::Draw) return a;
        }
        if (last_drawn_ && contains(legal, Action::discard(robot_, *last_drawn_))) return Action::discard(robot_, *last_drawn_);
        for (const Action& a : legal) {
            if (a.kind == ActionKind::Discard) return a;
        }
        return legal.at(0);
    }

    PrimitiveSpec spec_for(const Action& a) const {
        PrimitiveSpec p;
        p.kind = PrimitiveKind::Place;
        p.engine_action = a;
        switch (a.kind) {
            case ActionKind::Draw:
                // An empty wall ends the game; nothing is grasped.
                if (g_.wall.remaining() == 0) break;
                p.kind = PrimitiveKind::Draw;
                p.target = g_.wall.tiles.at(g_.wall.draw_index);
                break;
            case ActionKind::Discard:
                p.kind = PrimitiveKind::Discard;
                p.target = a.tile;
                break;
            case ActionKind::Kong:
                p.kind = PrimitiveKind::Meld;
                p.kong_variant = a.variant;
                p.meld_detail = Meld{a.variant == KongVariant::Concealed ? MeldKind::ConcealedKong : MeldKind::ExposedKong,
                                     a.tile, std::nullopt};
                break;
            default: break;
        }
        return p;
    }

    // Runs one guarded primitive. Returns the realized engine events, or
    // nullopt when the primitive was rejected.
    std::optional<std::vector<EngineEvent>> primitive(const PrimitiveSpec& spec) {
        PrimitiveResult r = execute_primitive(internal_, g_, spec, cfg_.faults, cfg_.recovery, clock_, fault_rng_);
        ++s_.primitives;
        json j{{"type", "primitive"},
               {"step", s_.steps},
               {"time", clock_.now},
               {"kind", primitive_kind_name(spec.kind)},
               {"outcome", primitive_outcome_name(r.outcome)},
               {"attempts", r.attempts},
               {"assisted", r.assisted}};
        if (spec.target) j["target"] = to_string(*spec.target);
        if (spec.meld_detail) j["meld"] = to_string(spec.meld_detail->tile);
        if (r.recognized) j["recognized"] = to_string(*r.recognized);
        if (r.violation) j["violation"] = r.violation->rule + ": " + r.violation->message;
        record(std::move(j));
        for (const FaultEvent& f : r.faults) log_fault(f);
        if (r.outcome == PrimitiveOutcome::Rejected) {
            ++s_.rejected;
            return std::nullopt;
        }
        if (spec.requires_grasp()) {
            ++s_.grasp_primitives;
            s_.grasp_attempts += r.attempts;
            for (const AttemptRecord& a : r.attempt_log) {
                s_.successful_attempts += a.succeeded ? 1 : 0;
                s_.attempts.emplace_back(a.sim_time, !a.succeeded);
            }
            if (r.outcome != PrimitiveOutcome::Unrecovered) ++s_.grasp_successes;
        }
        if (r.assisted) ++s_.assisted;
        g_ = std::move(r.truth);
        internal_ = std::move(r.internal);
        observe(r.events);
        if (r.outcome == PrimitiveOutcome::Unrecovered) {
            ++s_.unrecovered;
            if (intervention_rng_.bernoulli(cfg_.intervention_probability)) {
                internal_ = resynchronize(internal_, g_);
                ++s_.interventions;
                record({{"type", "intervention"}, {"step", s_.steps}, {"time", clock_.now}});
            }
        }
        record({{"type", "consistency"},
                {"step", s_.steps},
                {"entries", consistency_to_json(check_consistency(internal_, g_))}});
        return std::move(r.events);
    }

    void replacement_draws(const std::vector<EngineEvent>& events) {
        for (const EngineEvent& ev : events) {
            if (ev.kind != EventKind::ReplacementDrawn || ev.seat != robot_ || g_.terminal()) continue;
            PrimitiveSpec draw;
            draw.kind = PrimitiveKind::Draw;
            draw.target = ev.tile;
            if (!primitive(draw)) internal_ = resynchronize(internal_, g_), ++s_.interventions;
        }
    }

    void robot_turn() {
        const StateView view = robot_view();
        std::optional<Action> chosen;
        if (!view.legal.empty()) chosen = decide_for(robot_, view);
        std::optional<Action> a = chosen ? fallback(*chosen) : std::nullopt;
        if (chosen && a && !(*a == *chosen)) {
            ++s_.fallbacks;
            record({{"type", "fallback"}, {"step", s_.steps}, {"wanted", action_to_json(*chosen)},
                    {"taken", action_to_json(*a)}});
        }
        if (!a) {
            table_takes_over(chosen.value_or(Action::pass(robot_)));
            return;
        }
        log_action(*a, false);
        auto events = primitive(spec_for(*a));
        if (!events) {
            table_takes_over(*a);
            return;
        }
        replacement_draws(*events);
    }

    void claim_window() {
        std::map<Seat, Action> claims;
        for (Seat s : claim_candidates(g_)) {
            if (s != robot_) {
                claims[s] = decide_for(s, make_view(g_, s));
                continue;
            }
            const StateView view = robot_view();
            Action want = Action::pass(robot_);
            if (!view.legal.empty()) want = decide_for(robot_, view);
            if (check_action(g_, want)) {
                ++s_.fallbacks;
                record({{"type", "fallback"}, {"step", s_.steps}, {"wanted", action_to_json(want)},
                        {"taken", action_to_json(Action::pass(robot_))}});
                want = Action::pass(robot_);
            }
            claims[s] = want;
        }
        for (const auto& [s, a] : claims) {
            if (a.kind != ActionKind::Pass) log_action(a, false);
        }
        const LastDiscard source = *g_.last_discard;
        Transition tr = resolve_claims(g_, claims);
        clock_.now += cfg_.human_action_seconds;
        g_ = std::move(tr.state);
        observe(tr.events);

        const bool robot_melded = std::any_of(tr.events.begin(), tr.events.end(), [&](const EngineEvent& ev) {
            return ev.kind == EventKind::MeldFormed && ev.seat == robot_;
        });
        if (!robot_melded) return;
        const Action& a = claims.at(robot_);
        PrimitiveSpec meld;
        meld.kind = PrimitiveKind::Meld;
        if (a.kind == ActionKind::Pung) {
            meld.meld_detail = Meld{MeldKind::Pung, a.tile, source.seat};
        } else {
            meld.meld_detail = Meld{MeldKind::ExposedKong, a.tile, source.seat};
            meld.kong_variant = KongVariant::Claimed;
        }
        if (!primitive(meld)) {
            internal_ = resynchronize(internal_, g_);
            ++s_.interventions;
            return;
        }
        replacement_draws(tr.events);
    }

    void run_monitors() {
        for (const DetectorSpec& spec : cfg_.detectors) {
            std::vector<FaultEvent> watched;
            for (const FaultEvent& f : interaction_truth_) {
                if (f.kind == watched_fault(spec.task)) watched.push_back(f);
            }
            const MonitorLog log = mjlab::observe(watched, turns_, spec, monitor_rng_);
            const std::string task(detector_task_name(spec.task));
            s_.detections[task] += static_cast<int>(log.size());
            const DetectionScores sc = score_detections(log, watched, static_cast<int>(turns_.size()), spec.task);
            auto& m = s_.monitor[task];
            m = {sc.true_positive, sc.false_positive, sc.false_negative, sc.true_negative};
            std::istringstream lines(export_log(log));
            for (std::string line; std::getline(lines, line);) {
                json j = json::parse(line);
                j["type"] = "detection";
                record(std::move(j));
            }
        }
    }

    const ExperimentConfig& cfg_;
    Seat robot_;
    GameState g_;
    InternalState internal_;
    SimClock clock_;
    Rng decide_rng_;
    Rng fault_rng_;
    Rng monitor_rng_;
    Rng interaction_rng_;
    Rng intervention_rng_;
    ObservationOptions obs_;
    std::array<std::unique_ptr<Policy>, kNumSeats> policies_;
    std::vector<FaultEvent> faults_;
    std::vector<FaultEvent> interaction_truth_;
    std::vector<TurnContext> turns_;
    std::optional<Tile> last_drawn_;
    GameSummary s_;
    Transcript transcript_;
};

GameRun run_game_on(const ExperimentConfig& cfg, std::uint64_t seed, double start_time, const std::optional<Wall>& wall) {
    return GameLoop(cfg, seed, start_time, wall).run();
}

}  // namespace

GameRun run_game(const ExperimentConfig& cfg, std::uint64_t seed, double start_time) {
    cfg.validate();
    return run_game_on(cfg, seed, start_time, std::nullopt);
}

GameSummary summary_from_transcript(std::string_view jsonl) {
    std::istringstream lines{std::string(jsonl)};
    std::optional<GameSummary> found;
    for (std::string line; std::getline(lines, line);) {
        if (line.empty()) continue;
        const json j = json::parse(line);
        if (j.value("type", std::string()) == "end") found = summary_from_json(j.at("summary"));
    }
    if (!found) throw std::invalid_argument("transcript has no end record");
    return *found;
}

std::string_view pair_verdict_name(PairVerdict v) {
    switch (v) {
        case PairVerdict::WinA: return "win-a";
        case PairVerdict::WinB: return "win-b";
        case PairVerdict::Draw: return "draw";
    }
    return "?";
}

PairVerdict pair_verdict(bool a_won_first, bool a_won_second, bool b_won_first, bool b_won_second) {
    const bool a = a_won_first && a_won_second;
    const bool b = b_won_first && b_won_second;
    if (a && !b) return PairVerdict::WinA;
    if (b && !a) return PairVerdict::WinB;
    return PairVerdict::Draw;
}

PairedMatchResult run_paired_match(const SeatAssignment& a, const SeatAssignment& b, std::uint64_t deal_seed,
                                   const ExperimentConfig& cfg) {
    PairedMatchResult r;
    r.deal_seed = deal_seed;
    r.seat_a = 0;
    r.seat_b = 2;
    const Wall wall = shuffled_wall(deal_seed);
    ExperimentConfig first = cfg;
    first.seats[r.seat_a] = a;
    first.seats[r.seat_b] = b;
    ExperimentConfig second = cfg;
    second.seats[r.seat_a] = b;
    second.seats[r.seat_b] = a;
    first.validate();
    second.validate();
    const GameRun g1 = run_game_on(first, deal_seed, 0.0, wall);
    const GameRun g2 = run_game_on(second, deal_seed, 0.0, wall);
    if (g1.summary.error) throw std::runtime_error("paired game failed: " + *g1.summary.error);
    if (g2.summary.error) throw std::runtime_error("paired game failed: " + *g2.summary.error);
    r.game_a = g1.summary.outcome;
    r.game_b = g2.summary.outcome;
    r.wall_a = new_game(deal_seed, wall).wall;
    r.wall_b = new_game(deal_seed, wall).wall;
    r.verdict = pair_verdict(r.game_a.winners.count(r.seat_a) > 0, r.game_b.winners.count(r.seat_b) > 0,
                             r.game_a.winners.count(r.seat_b) > 0, r.game_b.winners.count(r.seat_a) > 0);
    return r;
}

namespace {

// Runs `work(i)` for i in [0, n) on `threads` workers.
template <typename F>
void parallel_for(std::size_t n, int threads, F&& work) {
    const int workers = std::max(1, std::min<int>(threads, static_cast<int>(n)));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) work(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (std::size_t i = next++; i < n; i = next++) work(i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

}  // namespace

PairedSummary run_paired_matches(const SeatAssignment& a, const SeatAssignment& b,
                                 const std::vector<std::uint64_t>& deal_seeds, const ExperimentConfig& cfg) {
    std::vector<PairVerdict> verdicts(deal_seeds.size());
    parallel_for(deal_seeds.size(), cfg.parallelism,
                 [&](std::size_t i) { verdicts[i] = run_paired_match(a, b, deal_seeds[i], cfg).verdict; });
    PairedSummary s;
    for (PairVerdict v : verdicts) {
        if (v == PairVerdict::WinA) ++s.win_a;
        if (v == PairVerdict::WinB) ++s.win_b;
        if (v == PairVerdict::Draw) ++s.draws;
    }
    return s;
}

double CampaignReport::robot_win_rate() const { return games ? static_cast<double>(position_wins[0]) / games : 0.0; }
double CampaignReport::autonomous_rate() const { return games ? static_cast<double>(autonomous) / games : 0.0; }
double CampaignReport::raw_success_rate() const {
    return grasp_attempts ? static_cast<double>(successful_attempts) / grasp_attempts : 0.0;
}
double CampaignReport::post_recovery_success_rate() const {
    return grasp_primitives ? static_cast<double>(grasp_successes) / grasp_primitives : 0.0;
}
double CampaignReport::unrecovered_win_rate() const {
    return unrecovered_games ? static_cast<double>(unrecovered_game_robot_wins) / unrecovered_games : 0.0;
}

CampaignReport aggregate(const std::vector<GameSummary>& games, const std::string& profile) {
    CampaignReport r;
    r.profile = profile;
    r.games = static_cast<int>(games.size());
    for (const GameSummary& g : games) {
        if (g.error) r.failures.push_back(std::to_string(g.seed) + ": " + *g.error);
        if (g.outcome.winners.empty()) ++r.draws;
        for (Seat w : g.outcome.winners) ++r.position_wins[(w - g.robot_seat + kNumSeats) % kNumSeats];
        r.completed += g.completed;
        r.autonomous += g.autonomous;
        r.primitives += g.primitives;
        r.grasp_primitives += g.grasp_primitives;
        r.grasp_attempts += g.grasp_attempts;
        r.successful_attempts += g.successful_attempts;
        r.grasp_successes += g.grasp_successes;
        r.unrecovered_primitives += g.unrecovered;
        if (g.unrecovered > 0) {
            ++r.unrecovered_games;
            r.unrecovered_game_robot_wins += g.robot_won();
        }
        r.rejected += g.rejected;
        r.interventions += g.interventions;
        r.takeovers += g.takeovers;
        r.fallbacks += g.fallbacks;
        for (const auto& [k, v] : g.faults) r.faults[k] += v;
        for (const auto& [k, v] : g.detections) r.detections[k] += v;
        for (const auto& [k, v] : g.monitor) {
            auto& m = r.monitor[k];
            for (int i = 0; i < 4; ++i) m[i] += v[i];
        }
    }
    r.per_game = games;
    return r;
}

ExperimentConfig seating_for_game(const ExperimentConfig& cfg, std::size_t i) {
    const int shift = static_cast<int>(i % kNumSeats);
    ExperimentConfig c = cfg;
    c.robot_seat = static_cast<Seat>((cfg.robot_seat + shift) % kNumSeats);
    for (int s = 0; s < kNumSeats; ++s) c.seats[(s + shift) % kNumSeats] = cfg.seats[s];
    return c;
}

CampaignResult run_campaign(const ExperimentConfig& cfg, bool keep_transcripts) {
    cfg.validate();
    const auto seeds = cfg.seed_list();
    std::filesystem::path dir;
    if (cfg.write_transcripts) {
        dir = std::filesystem::path(resolve_output_dir(cfg.output_dir)) / "transcripts";
        std::error_code ec;
        std::filesystem::create_directories(dir, ec);
        if (ec) throw std::runtime_error("cannot create " + dir.string() + ": " + ec.message());
    }
    std::vector<GameSummary> summaries(seeds.size());
    std::vector<std::string> transcripts(keep_transcripts ? seeds.size() : 0);
    parallel_for(seeds.size(), cfg.parallelism, [&](std::size_t i) {
        const double start = static_cast<double>(i % static_cast<std::size_t>(cfg.session_length)) * cfg.game_seconds;
        GameRun run = run_game_on(cfg.rotate_dealer ? seating_for_game(cfg, i) : cfg, seeds[i], start, std::nullopt);
        summaries[i] = std::move(run.summary);
        if (!cfg.write_transcripts && !keep_transcripts) return;
        std::string text = run.transcript.to_jsonl();
        if (cfg.write_transcripts) {
            std::ofstream out(dir / ("game_" + std::to_string(seeds[i]) + ".jsonl"), std::ios::binary);
            out << text;
            if (!out) throw std::runtime_error("cannot write transcript for seed " + std::to_string(seeds[i]));
        }
        if (keep_transcripts) transcripts[i] = std::move(text);
    });
    CampaignResult result;
    result.report = aggregate(summaries, cfg.profile);
    result.transcripts = std::move(transcripts);
    return result;
}

SignificanceTest one_sided_two_proportion(long successes_a, long n_a, long successes_b, long n_b) {
    if (n_a <= 0 || n_b <= 0) throw std::invalid_argument("two-proportion test needs non-empty samples");
    SignificanceTest t;
    t.rate_a = static_cast<double>(successes_a) / n_a;
    t.rate_b = static_cast<double>(successes_b) / n_b;
    const double pooled = static_cast<double>(successes_a + successes_b) / (n_a + n_b);
    const double se = std::sqrt(pooled * (1.0 - pooled) * (1.0 / n_a + 1.0 / n_b));
    t.z = se > 0.0 ? (t.rate_a - t.rate_b) / se : 0.0;
    t.p_value = 0.5 * std::erfc(t.z / std::sqrt(2.0));
    return t;
}

std::string_view ablation_name(AblationKind k) {
    switch (k) {
        case AblationKind::RecoveryOff: return "recovery-off";
        case AblationKind::CommitBeforeVerify: return "commit-before-verify";
        case AblationKind::ForcedCharacters: return "forced-characters";
    }
    return "?";
}

std::optional<AblationKind> parse_ablation(std::string_view text) {
    for (auto k : {AblationKind::RecoveryOff, AblationKind::CommitBeforeVerify, AblationKind::ForcedCharacters}) {
        if (ablation_name(k) == text) return k;
    }
    return std::nullopt;
}

ExperimentConfig ablated(const ExperimentConfig& base, AblationKind kind) {
    ExperimentConfig c = base;
    switch (kind) {
        case AblationKind::RecoveryOff:
            c.recovery.max_retries = 0;
            c.recovery.relocalize = false;
            break;
        case AblationKind::CommitBeforeVerify: c.recovery.commit_mode = CommitMode::CommitBeforeVerify; break;
        case AblationKind::ForcedCharacters: c.missing_suit_info = MissingSuitInfo::ForcedCharacters; break;
    }
    return c;
}

AblationReport run_ablation(AblationKind kind, const ExperimentConfig& base, int games) {
    if (games < 2) throw std::invalid_argument("an ablation needs at least 2 games");
    ExperimentConfig b = base;
    b.games = games;
    b.seeds.clear();
    b.write_transcripts = false;
    AblationReport r;
    r.kind = kind;
    r.baseline = run_campaign(b).report;
    r.ablation = run_campaign(ablated(b, kind)).report;
    r.delta = r.ablation.robot_win_rate() - r.baseline.robot_win_rate();
    r.test = one_sided_two_proportion(r.baseline.position_wins[0], r.baseline.games, r.ablation.position_wins[0],
                                      r.ablation.games);
    return r;
}

SelfPlayReport selfplay_round(const PolicyParams& policy, const SeatAssignment& teacher, const SelfPlayConfig& cfg) {
    if (cfg.rounds < 1) throw std::invalid_argument("self-play needs at least one round");
    if (cfg.eval_matches < 1) throw std::invalid_argument("self-play evaluation needs at least one match");
    cfg.loss.validate();
    SelfPlayReport rep;
    rep.initial = policy;

    ExperimentConfig eval;
    eval.profile = "selfplay-eval";
    for (SeatAssignment& s : eval.seats) s = teacher;
    std::vector<std::uint64_t> deals;
    for (int k = 0; k < cfg.eval_matches; ++k) deals.push_back(derive_seed(cfg.seed, 1'000'000 + k));
    auto as_seat = [](const PolicyParams& p) {
        SeatAssignment s;
        s.kind = "softmax";
        s.params = p;
        return s;
    };
    rep.pre = run_paired_matches(as_seat(policy), teacher, deals, eval);

    PolicyParams params = policy;
    for (int round = 0; round < cfg.rounds; ++round) {
        const PolicyParams ref = params;
        SelfPlayRound info;
        info.round = round + 1;
        std::vector<PreferencePair> pairs;
        for (int k = 0; k < cfg.groups_per_round; ++k) {
            const std::uint64_t seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(round) * 100'000 + k + 1);
            SoftmaxPolicy focal(params, "focal");
            focal.greedy = cfg.greedy_focal;
            const GameGroup group = play_group(focal, cfg.group_size, seed);
            Rng pick(derive_seed(seed, 7));
            auto mined = extract_preference_pairs(build_trie(group), group, pick);
            pairs.insert(pairs.end(), std::make_move_iterator(mined.begin()), std::make_move_iterator(mined.end()));
            ++info.groups;
        }
        info.pairs = static_cast<int>(pairs.size());
        if (pairs.empty()) {
            info.skipped = true;
            rep.rounds.push_back(info);
            continue;
        }
        auto mean_loss = [&](const PolicyParams& p) {
            double sum = 0.0;
            for (const PreferencePair& pr : pairs) sum += dpo_loss(p, ref, pr, cfg.train.beta_sp);
            return sum / static_cast<double>(pairs.size());
        };
        info.mean_loss_before = mean_loss(params);
        params = train_dpo(params, ref, pairs, cfg.train);
        info.mean_loss_after = mean_loss(params);
        rep.rounds.push_back(info);
    }
    rep.final = params;
    rep.post = run_paired_matches(as_seat(params), teacher, deals, eval);
    rep.test = one_sided_two_proportion(rep.post.win_a, rep.post.total(), rep.pre.win_a, rep.pre.total());
    return rep;
}

json report_to_json(const CampaignReport& r) {
    json wins = json::object();
    for (int i = 0; i < 4; ++i) wins[std::string(kPositionNames[i])] = r.position_wins[i];
    json monitor = json::object();
    for (const auto& [k, v] : r.monitor) monitor[k] = v;
    json games = json::array();
    for (const GameSummary& g : r.per_game) games.push_back(summary_to_json(g));
    return {{"schema", "mjlab-report/1"},
            {"profile", r.profile},
            {"games", r.games},
            {"wins", wins},
            {"draws", r.draws},
            {"completed", r.completed},
            {"autonomous", r.autonomous},
            {"autonomous_rate", r.autonomous_rate()},
            {"primitives", r.primitives},
            {"grasp_primitives", r.grasp_primitives},
            {"grasp_attempts", r.grasp_attempts},
            {"successful_attempts", r.successful_attempts},
            {"grasp_successes", r.grasp_successes},
            {"raw_success_rate", r.raw_success_rate()},
            {"post_recovery_success_rate", r.post_recovery_success_rate()},
            {"unrecovered_primitives", r.unrecovered_primitives},
            {"unrecovered_games", r.unrecovered_games},
            {"unrecovered_game_robot_wins", r.unrecovered_game_robot_wins},
            {"unrecovered_win_rate", r.unrecovered_win_rate()},
            {"rejected", r.rejected},
            {"interventions", r.interventions},
            {"takeovers", r.takeovers},
            {"fallbacks", r.fallbacks},
            {"faults", r.faults},
            {"detections", r.detections},
            {"monitor", monitor},
            {"failures", r.failures},
            {"per_game", games}};
}

CampaignReport report_from_json(const json& j) {
    std::vector<GameSummary> games;
    for (const json& g : j.at("per_game")) games.push_back(summary_from_json(g));
    CampaignReport r;
    r.profile = j.at("profile").get<std::string>();
    r.games = j.at("games").get<int>();
    for (int i = 0; i < 4; ++i) r.position_wins[i] = j.at("wins").at(std::string(kPositionNames[i])).get<long>();
    r.draws = j.at("draws").get<long>();
    r.completed = j.at("completed").get<long>();
    r.autonomous = j.at("autonomous").get<long>();
    r.primitives = j.at("primitives").get<long>();
    r.grasp_primitives = j.at("grasp_primitives").get<long>();
    r.grasp_attempts = j.at("grasp_attempts").get<long>();
    r.successful_attempts = j.at("successful_attempts").get<long>();
    r.grasp_successes = j.at("grasp_successes").get<long>();
    r.unrecovered_primitives = j.at("unrecovered_primitives").get<long>();
    r.unrecovered_games = j.at("unrecovered_games").get<long>();
    r.unrecovered_game_robot_wins = j.at("unrecovered_game_robot_wins").get<long>();
    r.rejected = j.at("rejected").get<long>();
    r.interventions = j.at("interventions").get<long>();
    r.takeovers = j.at("takeovers").get<long>();
    r.fallbacks = j.at("fallbacks").get<long>();
    r.faults = j.at("faults").get<std::map<std::string, long>>();
    r.detections = j.at("detections").get<std::map<std::string, long>>();
    for (const auto& [k, v] : j.at("monitor").items()) r.monitor[k] = v.get<std::array<long, 4>>();
    r.failures = j.at("failures").get<std::vector<std::string>>();
    r.per_game = std::move(games);
    return r;
}

namespace {

constexpr std::string_view kGamesHeader =
    "seed,start_time,robot_seat,winners,terminal_cause,completed,autonomous,steps,turns,primitives,grasp_primitives,"
    "grasp_attempts,successful_attempts,grasp_successes,unrecovered,rejected,assisted,interventions,takeovers,fallbacks,error";

std::string csv_safe(std::string s) {
    std::replace_if(s.begin(), s.end(), [](char c) { return c == ',' || c == '\n' || c == '\r'; }, ' ');
    return s;
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, sep)) out.push_back(cell);
    if (!line.empty() && line.back() == sep) out.emplace_back();
    return out;
}

std::string format_double(double x) {
    std::ostringstream o;
    o.precision(17);
    o << x;
    return o.str();
}

}  // namespace

std::string export_report(const CampaignReport& r, ReportFormat format) {
    if (format == ReportFormat::Records) return report_to_json(r).dump(2) + "\n";
    std::ostringstream out;
    out << kGamesHeader << '\n';
    for (const GameSummary& g : r.per_game) {
        std::string winners;
        for (Seat w : g.outcome.winners) winners += (winners.empty() ? "" : ";") + std::to_string(w);
        out << g.seed << ',' << format_double(g.start_time) << ',' << g.robot_seat << ',' << winners << ','
            << terminal_cause_name(g.outcome.terminal_cause) << ',' << g.completed << ',' << g.autonomous << ','
            << g.steps << ',' << g.turns << ',' << g.primitives << ',' << g.grasp_primitives << ',' << g.grasp_attempts
            << ',' << g.successful_attempts << ',' << g.grasp_successes << ',' << g.unrecovered << ',' << g.rejected
            << ',' << g.assisted << ',' << g.interventions << ',' << g.takeovers << ',' << g.fallbacks << ','
            << (g.error ? csv_safe(*g.error) : "") << '\n';
    }
    return out.str();
}

std::vector<GameSummary> parse_games_csv(std::string_view csv) {
    std::istringstream in{std::string(csv)};
    std::string line;
    if (!std::getline(in, line) || line != kGamesHeader) throw std::invalid_argument("unexpected games table header");
    std::vector<GameSummary> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto c = split(line, ',');
        if (c.size() != 21) throw std::invalid_argument("games table row has " + std::to_string(c.size()) + " cells");
        GameSummary g;
        g.seed = std::stoull(c[0]);
        g.start_time = std::stod(c[1]);
        g.robot_seat = std::stoi(c[2]);
        for (const std::string& w : split(c[3], ';')) {
            if (!w.empty()) g.outcome.winners.insert(std::stoi(w));
        }
        g.outcome.terminal_cause = parse_terminal_cause(c[4]);
        g.completed = c[5] == "1";
        g.autonomous = c[6] == "1";
        int* ints[] = {&g.steps,           &g.turns,       &g.primitives, &g.grasp_primitives,
                       &g.grasp_attempts,  &g.successful_attempts,        &g.grasp_successes,
                       &g.unrecovered,     &g.rejected,    &g.assisted,   &g.interventions,
                       &g.takeovers,       &g.fallbacks};
        for (int i = 0; i < 13; ++i) *ints[i] = std::stoi(c[7 + i]);
        if (!c[20].empty()) g.error = c[20];
        out.push_back(std::move(g));
    }
    return out;
}

std::string export_win_table(const CampaignReport& r) {
    std::ostringstream out;
    out << "robot,right,opposite,left,draw\n";
    out << r.position_wins[0] << ',' << r.position_wins[1] << ',' << r.position_wins[2] << ',' << r.position_wins[3]
        << ',' << r.draws << '\n';
    return out.str();
}

std::array<long, 5> parse_win_table(std::string_view csv) {
    std::istringstream in{std::string(csv)};
    std::string header, row;
    if (!std::getline(in, header) || header != "robot,right,opposite,left,draw") {
        throw std::invalid_argument("unexpected win table header");
    }
    if (!std::getline(in, row)) throw std::invalid_argument("win table has no counts");
    const auto c = split(row, ',');
    if (c.size() != 5) throw std::invalid_argument("win table row needs 5 counts");
    std::array<long, 5> out{};
    for (int i = 0; i < 5; ++i) out[i] = std::stol(c[i]);
    return out;
}

void write_report(const CampaignReport& r, const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw std::runtime_error("cannot create " + dir + ": " + ec.message());
    auto write = [&](const std::string& name, const std::string& text) {
        const auto path = std::filesystem::path(dir) / name;
        std::ofstream out(path, std::ios::binary);
        out << text;
        if (!out) throw std::runtime_error("cannot write " + path.string());
    };
    write("report.json", export_report(r, ReportFormat::Records));
    write("games.csv", export_report(r, ReportFormat::Csv));
    write("win_table.csv", export_win_table(r));
}

std::string render_report(const CampaignReport& r) {
    std::ostringstream o;
    o.setf(std::ios::fixed);
    o.precision(1);
    o << "profile " << r.profile << ", " << r.games << " games\n";
    o << "  Robot  Right   Opp.   Left   Draw\n";
    for (long w : r.position_wins) o << ' ' << std::string(6 - std::min<std::size_t>(6, std::to_string(w).size()), ' ') << w;
    o << ' ' << std::string(6 - std::min<std::size_t>(6, std::to_string(r.draws).size()), ' ') << r.draws << '\n';
    o << "robot win rate " << 100.0 * r.robot_win_rate() << "%\n";
    o << "autonomous completion " << r.autonomous << "/" << r.games << " (" << 100.0 * r.autonomous_rate() << "%)\n";
    o << "primitives " << r.primitives << ", grasp primitives " << r.grasp_primitives << ", grasp attempts "
      << r.grasp_attempts << "\n";
    o.precision(2);
    o << "grasp success raw " << 100.0 * r.raw_success_rate() << "%, after recovery "
      << 100.0 * r.post_recovery_success_rate() << "%\n";
    o << "games with unrecovered primitives " << r.unrecovered_games << ", robot won " << r.unrecovered_game_robot_wins
      << "\n";
    o << "interventions " << r.interventions << ", takeovers " << r.takeovers << ", fallbacks " << r.fallbacks << ", rejected " << r.rejected << "\n";
    for (const auto& [k, v] : r.faults) o << "fault " << k << ' ' << v << "\n";
    for (const auto& [k, m] : r.monitor) {
        o << "monitor " << k << " tp " << m[0] << " fp " << m[1] << " fn " << m[2] << " tn " << m[3] << "\n";
    }
    for (const std::string& f : r.failures) o << "failed game " << f << "\n";
    return o.str();
}

json ablation_to_json(const AblationReport& r) {
    return {{"ablation", ablation_name(r.kind)},
            {"games", r.baseline.games},
            {"baseline_robot_wins", r.baseline.position_wins[0]},
            {"ablation_robot_wins", r.ablation.position_wins[0]},
            {"baseline_win_rate", r.baseline.robot_win_rate()},
            {"ablation_win_rate", r.ablation.robot_win_rate()},
            {"delta", r.delta},
            {"z", r.test.z},
            {"p_value", r.test.p_value}};
}

json selfplay_to_json(const SelfPlayReport& r) {
    json rounds = json::array();
    for (const SelfPlayRound& s : r.rounds) {
        rounds.push_back({{"round", s.round},
                          {"groups", s.groups},
                          {"pairs", s.pairs},
                          {"skipped", s.skipped},
                          {"mean_loss_before", s.mean_loss_before},
                          {"mean_loss_after", s.mean_loss_after}});
    }
    auto paired = [](const PairedSummary& p) {
        return json{{"win_a", p.win_a}, {"win_b", p.win_b}, {"draws", p.draws}, {"rate", p.rate_a()}};
    };
    return {{"initial", params_to_json(r.initial)},
            {"final", params_to_json(r.final)},
            {"rounds", rounds},
            {"pre", paired(r.pre)},
            {"post", paired(r.post)},
            {"z", r.test.z},
            {"p_value", r.test.p_value}};
}

}  // namespace mjlab
