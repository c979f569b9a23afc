#pragma once

#include <array>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mjlab/fault_model.hpp"
#include "mjlab/game.hpp"
#include "mjlab/monitor.hpp"
#include "mjlab/policy.hpp"
#include "mjlab/selfplay.hpp"
#include "mjlab/state_machine.hpp"

namespace mjlab {

enum class MissingSuitInfo : std::uint8_t { Normal, ForcedCharacters };
std::string_view missing_suit_info_name(MissingSuitInfo m);
std::optional<MissingSuitInfo> parse_missing_suit_info(std::string_view text);

// How one seat chooses actions. `kind` is one of teacher, uniform, softmax.
struct SeatAssignment {
    std::string kind = "teacher";
    double temperature = 0.5;  // teacher only
    PolicyParams params;       // softmax only
    bool greedy = false;

    void validate() const;
};

std::unique_ptr<Policy> make_policy(const SeatAssignment& seat);

struct ExperimentConfig {
    std::string profile = "default";
    int games = 100;
    std::uint64_t base_seed = 1;
    std::vector<std::uint64_t> seeds;  // overrides games and base_seed when set
    std::array<SeatAssignment, kNumSeats> seats;
    Seat robot_seat = 0;
    FaultConfig faults = FaultConfig::fault_free();
    RecoveryPolicy recovery;
    std::vector<DetectorSpec> detectors;
    MissingSuitInfo missing_suit_info = MissingSuitInfo::Normal;
    // Chance that a human corrects the robot's internal state after an
    // unrecovered primitive. The table always completes the action.
    double intervention_probability = 0.0;
    // Game i of a campaign rotates the seating by i mod 4, so the dealer
    // (seat 0) moves around the robot.
    bool rotate_dealer = true;
    int session_length = 30;            // games per continuous operation session
    double game_seconds = 1200.0;       // spacing of game starts within a session
    double human_action_seconds = 6.0;  // table time of one human action
    int max_steps = 2000;
    int parallelism = 1;
    std::string output_dir = "out";
    bool write_transcripts = false;
    bool all_traces = false;  // decision traces for every seat, not only the robot

    std::vector<std::uint64_t> seed_list() const;
    // Throws std::invalid_argument on duplicate seeds, bad seats or rates.
    void validate() const;

    // Calibrated deployment profile.
    static ExperimentConfig paper_deployment();
};

nlohmann::json config_to_json(const ExperimentConfig& cfg);
// Fields absent from `j` keep the defaults of its named profile.
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);
std::optional<ExperimentConfig> named_profile(std::string_view name);

// The directory named by MJLAB_OUTPUT_DIR when set, else `configured`.
std::string resolve_output_dir(const std::string& configured);

struct GameSummary {
    std::uint64_t seed = 0;
    double start_time = 0.0;
    Seat robot_seat = 0;
    GameOutcome outcome;
    bool completed = false;    // reached the terminal phase
    bool autonomous = false;   // completed with no table assistance or correction
    int steps = 0;
    int turns = 0;
    int primitives = 0;
    int grasp_primitives = 0;
    int grasp_attempts = 0;
    int successful_attempts = 0;
    int grasp_successes = 0;  // grasp primitives that ended committed
    int unrecovered = 0;
    int rejected = 0;
    int assisted = 0;
    int interventions = 0;  // human corrections of the robot's state
    int takeovers = 0;      // table moves made for a robot that could not act
    int fallbacks = 0;      // robot choices replaced because the table forbids them
    std::map<std::string, int> faults;
    std::map<std::string, int> detections;
    std::map<std::string, std::array<long, 4>> monitor;  // tp, fp, fn, tn per task
    std::vector<std::pair<double, bool>> attempts;       // (operation time, failed)
    std::optional<std::string> error;

    bool robot_won() const { return outcome.winners.count(robot_seat) > 0; }
};

nlohmann::json summary_to_json(const GameSummary& s);
GameSummary summary_from_json(const nlohmann::json& j);

// One JSON object per line, each with a "type" field: config, decision,
// action, primitive, fault, detection, consistency, end.
struct Transcript {
    std::vector<nlohmann::json> records;
    std::string to_jsonl() const;
};

struct GameRun {
    Transcript transcript;
    GameSummary summary;
};

// Closed loop per turn: decision, guarded primitive execution for the robot
// seat, fault and monitor sampling, engine transition.
GameRun run_game(const ExperimentConfig& cfg, std::uint64_t seed, double start_time = 0.0);

// Rebuilds the summary stored in a transcript's end record.
GameSummary summary_from_transcript(std::string_view jsonl);

enum class PairVerdict : std::uint8_t { WinA, WinB, Draw };
std::string_view pair_verdict_name(PairVerdict v);

struct PairedMatchResult {
    std::uint64_t deal_seed = 0;
    Seat seat_a = 0;  // seat of A in game 1; B sits opposite and they swap in game 2
    Seat seat_b = 2;
    GameOutcome game_a;
    GameOutcome game_b;
    Wall wall_a;
    Wall wall_b;
    PairVerdict verdict = PairVerdict::Draw;
};

// Verdict WinX iff X won both games.
PairVerdict pair_verdict(bool a_won_first, bool a_won_second, bool b_won_first, bool b_won_second);

// Two games from one forced wall with A and B swapping seats; the other
// seats and the robot pipeline come from `cfg`.
PairedMatchResult run_paired_match(const SeatAssignment& a, const SeatAssignment& b, std::uint64_t deal_seed,
                                   const ExperimentConfig& cfg);

struct PairedSummary {
    long win_a = 0;
    long win_b = 0;
    long draws = 0;
    long total() const { return win_a + win_b + draws; }
    double rate_a() const { return total() ? static_cast<double>(win_a) / total() : 0.0; }
};

PairedSummary run_paired_matches(const SeatAssignment& a, const SeatAssignment& b,
                                 const std::vector<std::uint64_t>& deal_seeds, const ExperimentConfig& cfg);

// Relative positions as seen from the robot.
inline constexpr std::array<std::string_view, 4> kPositionNames = {"robot", "right", "opposite", "left"};

struct CampaignReport {
    std::string profile;
    int games = 0;
    std::array<long, 4> position_wins{};  // robot, right, opposite, left
    long draws = 0;
    long completed = 0;
    long autonomous = 0;
    long primitives = 0;
    long grasp_primitives = 0;
    long grasp_attempts = 0;
    long successful_attempts = 0;
    long grasp_successes = 0;
    long unrecovered_primitives = 0;
    long unrecovered_games = 0;
    long unrecovered_game_robot_wins = 0;
    long rejected = 0;
    long interventions = 0;
    long takeovers = 0;
    long fallbacks = 0;
    std::map<std::string, long> faults;
    std::map<std::string, long> detections;
    std::map<std::string, std::array<long, 4>> monitor;
    std::vector<GameSummary> per_game;  // seed order
    std::vector<std::string> failures;  // "seed: message"

    double robot_win_rate() const;
    double autonomous_rate() const;
    double raw_success_rate() const;
    double post_recovery_success_rate() const;
    double unrecovered_win_rate() const;
};

// Positions are relative to each game's robot seat.
CampaignReport aggregate(const std::vector<GameSummary>& games, const std::string& profile);

// Games in a worker pool of cfg.parallelism threads. Game i of the seed list
// starts at (i mod session_length) * game_seconds of operation time and, with
// rotate_dealer, runs on `seating_for_game(cfg, i)`.
// Transcripts are written under output_dir/transcripts when enabled and also
// returned when `keep_transcripts` is set.
struct CampaignResult {
    CampaignReport report;
    std::vector<std::string> transcripts;
};
// The seating rotated by i mod 4 with each assignment moving with its seat.
ExperimentConfig seating_for_game(const ExperimentConfig& cfg, std::size_t i);
CampaignResult run_campaign(const ExperimentConfig& cfg, bool keep_transcripts = false);

struct SignificanceTest {
    double rate_a = 0.0;
    double rate_b = 0.0;
    double z = 0.0;
    double p_value = 1.0;  // H1: rate_a > rate_b
};

SignificanceTest one_sided_two_proportion(long successes_a, long n_a, long successes_b, long n_b);

enum class AblationKind : std::uint8_t { RecoveryOff, CommitBeforeVerify, ForcedCharacters };
std::string_view ablation_name(AblationKind k);
std::optional<AblationKind> parse_ablation(std::string_view text);
ExperimentConfig ablated(const ExperimentConfig& base, AblationKind kind);

struct AblationReport {
    AblationKind kind = AblationKind::RecoveryOff;
    CampaignReport baseline;
    CampaignReport ablation;
    double delta = 0.0;  // ablation minus baseline robot win rate
    SignificanceTest test;  // baseline above ablation
};

AblationReport run_ablation(AblationKind kind, const ExperimentConfig& base, int games);

struct SelfPlayConfig {
    int rounds = 6;
    int groups_per_round = 400;
    int group_size = 8;
    int eval_matches = 1000;
    std::uint64_t seed = 1;
    bool greedy_focal = false;  // argmax play, so groups never diverge
    LossConfig loss;
    DpoTrainConfig train{5.0, 40, 1.0};
};

struct SelfPlayRound {
    int round = 0;
    int groups = 0;
    int pairs = 0;
    bool skipped = false;
    double mean_loss_before = 0.0;
    double mean_loss_after = 0.0;
};

struct SelfPlayReport {
    PolicyParams initial;
    PolicyParams final;
    std::vector<SelfPlayRound> rounds;
    PairedSummary pre;
    PairedSummary post;
    SignificanceTest test;  // post above pre
};

// Per round: play groups, build tries, mine pairs, DPO steps against the
// round's starting policy. Win rates are paired matches against `teacher`
// on fault-free tables.
SelfPlayReport selfplay_round(const PolicyParams& policy, const SeatAssignment& teacher, const SelfPlayConfig& cfg);

nlohmann::json report_to_json(const CampaignReport& r);
CampaignReport report_from_json(const nlohmann::json& j);

enum class ReportFormat : std::uint8_t { Records, Csv };

// Records: the full report as one JSON document. Csv: one row per game.
std::string export_report(const CampaignReport& r, ReportFormat format);
// Header plus one row of robot, right, opposite, left and draw counts.
std::string export_win_table(const CampaignReport& r);
std::array<long, 5> parse_win_table(std::string_view csv);
std::vector<GameSummary> parse_games_csv(std::string_view csv);
// Writes report.json, games.csv and win_table.csv; throws std::runtime_error
// when the directory cannot be written.
void write_report(const CampaignReport& r, const std::string& dir);

std::string render_report(const CampaignReport& r);

nlohmann::json ablation_to_json(const AblationReport& r);
nlohmann::json selfplay_to_json(const SelfPlayReport& r);

}  // namespace mjlab
