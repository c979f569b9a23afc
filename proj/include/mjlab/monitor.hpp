#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mjlab/fault_model.hpp"
#include "mjlab/rng.hpp"

namespace mjlab {

enum class DetectorTask : std::uint8_t { TurnViolation, Inspection };

std::string_view detector_task_name(DetectorTask t);
std::optional<DetectorTask> parse_detector_task(std::string_view text);
// The ground-truth fault kind a detector task watches for.
FaultKind watched_fault(DetectorTask t);

struct DetectorSpec {
    DetectorTask task = DetectorTask::TurnViolation;
    double true_positive_rate = 1.0;
    double false_positive_rate = 0.0;
    double identity_error_rate = 0.0;  // detected event names the wrong actor

    void validate() const;

    // TPR = recall and FPR = recall * b (1 - precision) / (precision (1 - b)),
    // so that the detector reproduces (precision, recall) at base rate b.
    static DetectorSpec from_precision_recall(DetectorTask task, double precision, double recall, double base_rate,
                                              double identity_error_rate = 0.0);
};

// What the monitor sees of one turn.
struct TurnContext {
    int turn_index = 0;
    double sim_time = 0.0;
    Seat current_seat = 0;
    Seat robot_seat = 0;
};

struct DetectionEvent {
    DetectorTask task = DetectorTask::TurnViolation;
    Seat predicted_actor = 0;
    double sim_time = 0.0;
    int turn_index = 0;
    std::optional<FaultEvent> linked_truth;  // absent for false alarms
    bool surfaced = true;                    // shown to players, never blocking

    friend bool operator==(const DetectionEvent&, const DetectionEvent&) = default;
};

class MonitorLog {
public:
    // Throws std::invalid_argument if `e` precedes the last entry in time.
    void append(DetectionEvent e);
    const std::vector<DetectionEvent>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }
    friend bool operator==(const MonitorLog&, const MonitorLog&) = default;

private:
    std::vector<DetectionEvent> entries_;
};

// Detects every ground-truth event of the watched kind with probability TPR
// and raises a false alarm on each clean turn with probability FPR. Truth
// events are matched to turns by turn_index; both streams must be ordered.
MonitorLog observe(const std::vector<FaultEvent>& truth_events, const std::vector<TurnContext>& turns,
                   const DetectorSpec& spec, Rng& rng);

struct DetectionScores {
    long true_positive = 0;
    long false_positive = 0;
    long false_negative = 0;
    long true_negative = 0;
    // Undefined (nullopt) when the denominator is zero.
    std::optional<double> precision;
    std::optional<double> recall;
    std::optional<double> specificity;
    std::optional<double> negative_predictive_value;
};

// Turn-level confusion matrix over turns [0, total_turns). A turn is truly
// positive if it carries a truth event of the watched kind and predicted
// positive if the log has any entry for it. When `task` is given only that
// task is scored; otherwise every task counts.
DetectionScores score_detections(const MonitorLog& log, const std::vector<FaultEvent>& truth_events, int total_turns,
                                 std::optional<DetectorTask> task = std::nullopt);

struct SyntheticStream {
    std::vector<TurnContext> turns;
    std::vector<FaultEvent> truth;
};

// `n_turns` turns with seat 0 as the robot; each turn independently carries
// one violation of the watched kind with probability `base_rate`.
SyntheticStream synthetic_stream(int n_turns, double base_rate, DetectorTask task, Rng& rng,
                                 double turn_seconds = 20.0);

// One JSON object per line with fields task, predicted_actor, sim_time,
// turn_index, linked, surfaced and, when linked, truth.
std::string export_log(const MonitorLog& log);
MonitorLog parse_log(std::string_view text);

}  // namespace mjlab
