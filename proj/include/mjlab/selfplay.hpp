#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mjlab/game.hpp"
#include "mjlab/policy.hpp"
#include "mjlab/rng.hpp"

namespace mjlab {

enum class KlMode : std::uint8_t {
    ExactReverse,  // KL(pi_theta || pi_ref) over the full action distribution
    ExactForward,  // KL(pi_ref || pi_theta)
    SampledK3,     // r - 1 - log r at the sampled action, r = pi_ref / pi_theta
};

std::string_view kl_mode_name(KlMode m);
std::optional<KlMode> parse_kl_mode(std::string_view text);

struct LossConfig {
    double clip_epsilon = 0.2;
    double kl_beta = 0.04;
    double dpo_beta = 1.0;
    int group_size = 8;
    double sigma_floor = 1e-8;
    KlMode kl_mode = KlMode::ExactReverse;

    void validate() const;
};

struct TrajectoryStep {
    Seat seat = 0;
    StateView view;
    DecisionTrace trace;
    Action action;
};

struct GameRecord {
    std::vector<TrajectoryStep> steps;
    GameOutcome outcome;
};

struct GameGroup {
    std::uint64_t seed = 0;
    Wall wall;
    Seat focal_seat = 0;
    std::vector<GameRecord> games;

    int size() const { return static_cast<int>(games.size()); }
};

// Plays one game from `wall` with a policy per seat; claim windows record
// one decision per claim candidate in seat order.
GameRecord play_recorded_game(const std::array<const Policy*, kNumSeats>& seats, const Wall& wall, std::uint64_t seed,
                              Rng& rng);

// Replays a decision sequence from the forced wall. Throws RuleViolation on
// an illegal step and std::invalid_argument if decisions run out early.
GameState replay(const Wall& wall, std::uint64_t seed, const std::vector<Action>& decisions);

// G games from one forced deal. The focal seat 0 samples from `policy`; the
// other seats use `opponent`, a greedy teacher when null. Each game has its
// own sampling stream.
GameGroup play_group(const PolicyParams& policy, int group_size, std::uint64_t seed, const Policy* opponent = nullptr);
GameGroup play_group(const Policy& focal, int group_size, std::uint64_t seed, const Policy* opponent = nullptr);

struct TrieNode {
    int parent = -1;
    int depth = 0;
    std::optional<Action> action;  // empty at the root
    int visits = 0;
    int focal_wins = 0;
    std::vector<int> children;  // insertion order
    std::vector<int> games;     // indices of games through this node

    double win_rate() const { return visits > 0 ? static_cast<double>(focal_wins) / visits : 0.0; }
};

struct TrajectoryTrie {
    std::vector<TrieNode> nodes;  // nodes[0] is the root

    int leaf_count() const;
    // Actions from the root to `node`.
    std::vector<Action> path(int node) const;
};

TrajectoryTrie build_trie(const GameGroup& group);

struct PreferencePair {
    int node = 0;  // the shared parent
    StateView view;
    DecisionTrace preferred_trace;
    Action preferred;
    DecisionTrace dispreferred_trace;
    Action dispreferred;
    double win_rate_gap = 0.0;
};

// For every node with two or more children, one pair per (higher, lower)
// child combination with a strictly positive win-rate gap. One trace is
// sampled per child from the games passing through it.
std::vector<PreferencePair> extract_preference_pairs(const TrajectoryTrie& trie, const GameGroup& group, Rng& rng);

struct SftExample {
    StateView view;
    Action action;
};

double sft_nll(const PolicyParams& params, const std::vector<SftExample>& data);
std::vector<double> sft_nll_gradient(const PolicyParams& params, const std::vector<SftExample>& data);

double composite_reward(bool format_ok, double teacher_prob);

struct GroupStats {
    double mu = 0.0;
    double sigma = 0.0;  // population standard deviation
};

GroupStats group_stats(const std::vector<double>& rewards);
// (R - mu) / sigma, or all zeros when sigma falls below the floor.
std::vector<double> group_advantage(const std::vector<double>& rewards, const LossConfig& cfg);

struct GrpoItem {
    StateView view;
    Action action;
    double advantage = 0.0;
};

double grpo_loss(const PolicyParams& params, const PolicyParams& ref, const std::vector<GrpoItem>& group,
                 const LossConfig& cfg);
std::vector<double> grpo_loss_gradient(const PolicyParams& params, const PolicyParams& ref,
                                       const std::vector<GrpoItem>& group, const LossConfig& cfg);

double dpo_loss(const PolicyParams& params, const PolicyParams& ref, const PreferencePair& pair, double beta_sp);
std::vector<double> dpo_loss_gradient(const PolicyParams& params, const PolicyParams& ref, const PreferencePair& pair,
                                      double beta_sp);

struct DifferentiableLoss {
    std::function<double(const PolicyParams&)> value;
    std::function<std::vector<double>(const PolicyParams&)> gradient;
};

struct FiniteDifferenceReport {
    double max_relative_error = 0.0;
    int worst_coordinate = -1;
    bool finite = true;
};

// Central differences per coordinate of theta. Relative error is
// |g - fd| / max(|g|, |fd|, 1e-6).
FiniteDifferenceReport finite_difference_check(const DifferentiableLoss& loss, const PolicyParams& point,
                                               double step = 1e-5);

struct DpoTrainConfig {
    double learning_rate = 0.5;
    int steps = 20;
    double beta_sp = 1.0;
};

// Gradient descent on the mean DPO loss over `pairs` against `ref`.
PolicyParams train_dpo(const PolicyParams& start, const PolicyParams& ref, const std::vector<PreferencePair>& pairs,
                       const DpoTrainConfig& cfg);

// Line-delimited records for offline inspection.
std::string group_to_jsonl(const GameGroup& group);
std::string trie_to_jsonl(const TrajectoryTrie& trie);
std::string pairs_to_jsonl(const std::vector<PreferencePair>& pairs);

}  // namespace mjlab
