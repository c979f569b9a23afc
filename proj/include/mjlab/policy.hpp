#pragma once

#include <array>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mjlab/game.hpp"
#include "mjlab/rng.hpp"

namespace mjlab {

// What a seat may see: its own hand, public information and the legal
// actions. Opponent concealed tiles are not part of the view.
struct StateView {
    Seat seat = 0;
    Hand own;
    std::array<std::vector<Tile>, kNumSeats> discards;
    std::array<std::vector<Meld>, kNumSeats> exposed_melds;
    std::array<std::optional<Suit>, kNumSeats> missing_suits;
    int wall_count = 0;
    Seat current_seat = 0;
    Phase phase = Phase::Declaring;
    std::optional<LastDiscard> claim_tile;
    std::vector<Action> legal;  // sorted canonical order

    friend bool operator==(const StateView&, const StateView&) = default;
};

StateView make_view(const GameState& state, Seat seat);
std::string summarize(const StateView& view);

struct ActionDistribution {
    std::vector<Action> actions;  // same order as the view's legal actions
    std::vector<double> probabilities;

    double probability(const Action& a) const;
    std::size_t argmax() const;  // first index of the largest mass
};

inline constexpr int kNumFeatures = 16;
using FeatureVector = std::array<double, kNumFeatures>;

const std::array<std::string_view, kNumFeatures>& feature_names();

// Hand features of taking `action` from `view`.
FeatureVector action_features(const StateView& view, const Action& action);

struct PolicyParams {
    std::vector<double> theta = std::vector<double>(kNumFeatures, 0.0);
    double temperature = 1.0;

    // Throws std::invalid_argument for non-finite parameters, a wrong
    // dimension or a non-positive temperature.
    void validate() const;
    friend bool operator==(const PolicyParams&, const PolicyParams&) = default;
};

// A weak hand-set starting point for self-play training.
PolicyParams initial_params();

class Policy {
public:
    virtual ~Policy() = default;
    // Pre-temperature scores, one per legal action.
    virtual std::vector<double> scores(const StateView& view) const = 0;
    virtual double temperature() const = 0;
    virtual std::string id() const = 0;

    // Argmax instead of sampling in decide().
    bool greedy = false;
};

class UniformPolicy final : public Policy {
public:
    std::vector<double> scores(const StateView& view) const override;
    double temperature() const override { return 1.0; }
    std::string id() const override { return "uniform"; }
};

// Lexicographic rules softened at temperature 0.5: win; claim or kong only
// when it strictly reduces distance_to_win; discard the missing-suit tile with
// most copies; otherwise the discard leaving the smallest distance.
class TeacherPolicy final : public Policy {
public:
    explicit TeacherPolicy(double temperature = 0.5) : temperature_(temperature) {}
    std::vector<double> scores(const StateView& view) const override;
    double temperature() const override { return temperature_; }
    std::string id() const override { return "teacher"; }

private:
    double temperature_;
};

class SoftmaxPolicy final : public Policy {
public:
    explicit SoftmaxPolicy(PolicyParams params, std::string id = "softmax");
    std::vector<double> scores(const StateView& view) const override;
    double temperature() const override { return params_.temperature; }
    std::string id() const override { return id_; }
    const PolicyParams& params() const { return params_; }

private:
    PolicyParams params_;
    std::string id_;
};

// Softmax of scores / temperature over the legal actions. Throws
// std::invalid_argument when the view has no legal action.
ActionDistribution action_distribution(const Policy& policy, const StateView& view);

struct ScoredAction {
    Action action;
    double score = 0.0;
    double probability = 0.0;
};

struct DecisionTrace {
    std::string state_summary;
    std::vector<ScoredAction> scored;
    Action chosen;
    std::vector<std::pair<std::string, double>> rationale;  // feature contributions of the choice
    double timestamp = 0.0;
    std::string policy_id;
};

struct Decision {
    Action action;
    DecisionTrace trace;
};

Decision decide(const Policy& policy, const StateView& view, Rng& rng, double timestamp = 0.0);

// Suit with the fewest held tiles; ties go Characters, Bamboo, Dots.
Suit choose_missing_suit(const Hand& hand);

// Throws std::invalid_argument if `action` is not legal in `view`.
double log_probability(const Policy& policy, const StateView& view, const Action& action);

// d/dtheta log pi(action | view) for a softmax policy.
std::vector<double> grad_log_probability(const SoftmaxPolicy& policy, const StateView& view, const Action& action);

}  // namespace mjlab
