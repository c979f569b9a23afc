#include <doctest.h>

#include <cmath>

#include "mjlab/monitor.hpp"
#include "oracles.hpp"

using namespace mjlab;

TEST_CASE("a perfect detector reproduces the truth stream") {
    Rng rng(1);
    const auto stream = synthetic_stream(5000, 0.05, DetectorTask::TurnViolation, rng);
    DetectorSpec perfect;
    const MonitorLog log = observe(stream.truth, stream.turns, perfect, rng);
    REQUIRE(log.size() == stream.truth.size());
    for (std::size_t i = 0; i < log.size(); ++i) {
        const auto& e = log.entries()[i];
        CHECK(e.linked_truth == stream.truth[i]);
        CHECK(e.predicted_actor == *stream.truth[i].actor);
        CHECK(e.turn_index == stream.truth[i].turn_index);
        CHECK(e.surfaced);
    }
    const auto s = score_detections(log, stream.truth, 5000);
    CHECK(*s.precision == 1.0);
    CHECK(*s.recall == 1.0);
    CHECK(*s.specificity == 1.0);
    CHECK(*s.negative_predictive_value == 1.0);
}

TEST_CASE("undefined metrics are reported as such") {
    const MonitorLog empty;
    const auto s = score_detections(empty, {}, 100);
    CHECK_FALSE(s.precision.has_value());
    CHECK_FALSE(s.recall.has_value());
    CHECK(*s.specificity == 1.0);
    CHECK(*s.negative_predictive_value == 1.0);
    const auto none = score_detections(empty, {}, 0);
    CHECK_FALSE(none.specificity.has_value());
    CHECK_FALSE(none.negative_predictive_value.has_value());
}

TEST_CASE("identity errors misattribute at the configured rate") {
    SUBCASE("rate 0.03") {
        Rng rng(7);
        const auto stream = synthetic_stream(20000, 0.5, DetectorTask::TurnViolation, rng);
        DetectorSpec spec;
        spec.identity_error_rate = 0.03;
        const MonitorLog log = observe(stream.truth, stream.turns, spec, rng);
        long wrong = 0;
        for (const auto& e : log.entries()) {
            CHECK(e.predicted_actor != 0);
            wrong += e.predicted_actor != *e.linked_truth->actor;
        }
        const long n = static_cast<long>(log.size());
        CHECK(n >= 9000);
        INFO("wrong=" << wrong << " n=" << n);
        CHECK(oracle::within_3sigma(static_cast<double>(wrong) / n, 0.03, n));
    }
    SUBCASE("rate 0") {
        Rng rng(3);
        const auto stream = synthetic_stream(20000, 0.5, DetectorTask::Inspection, rng);
        DetectorSpec spec;
        spec.task = DetectorTask::Inspection;
        spec.true_positive_rate = 0.9;
        const MonitorLog log = observe(stream.truth, stream.turns, spec, rng);
        for (const auto& e : log.entries()) CHECK(e.predicted_actor == *e.linked_truth->actor);
    }
}

TEST_CASE("derived rates reproduce precision and recall") {
    const auto spec = DetectorSpec::from_precision_recall(DetectorTask::TurnViolation, 0.872, 0.867, 0.01);
    CHECK(spec.true_positive_rate == doctest::Approx(0.867));
    CHECK(spec.false_positive_rate == doctest::Approx(0.0012855157075340562));
    Rng rng(1);
    const int n = 100000;
    const auto stream = synthetic_stream(n, 0.01, DetectorTask::TurnViolation, rng);
    const MonitorLog log = observe(stream.truth, stream.turns, spec, rng);
    const auto s = score_detections(log, stream.truth, n, DetectorTask::TurnViolation);
    CHECK(std::abs(*s.precision - 0.872) <= 0.02);
    CHECK(std::abs(*s.recall - 0.867) <= 0.02);
    // Implied by the same rates: about 0.99871 and 0.99866.
    CHECK(*s.specificity == doctest::Approx(0.99871).epsilon(5e-4));
    CHECK(*s.negative_predictive_value == doctest::Approx(0.99866).epsilon(5e-4));
}

TEST_CASE("false alarms only on clean turns") {
    Rng rng(4);
    const auto stream = synthetic_stream(10000, 0.2, DetectorTask::TurnViolation, rng);
    DetectorSpec spec;
    spec.true_positive_rate = 0.0;
    spec.false_positive_rate = 1.0;
    const MonitorLog log = observe(stream.truth, stream.turns, spec, rng);
    CHECK(log.size() == stream.turns.size() - stream.truth.size());
    for (const auto& e : log.entries()) CHECK_FALSE(e.linked_truth.has_value());
}

TEST_CASE("monitor log export round-trips") {
    CHECK(export_log(MonitorLog{}).empty());
    Rng rng(5);
    const auto stream = synthetic_stream(10000, 0.5, DetectorTask::Inspection, rng);
    DetectorSpec spec;
    spec.task = DetectorTask::Inspection;
    spec.false_positive_rate = 0.5;
    spec.identity_error_rate = 0.1;
    const MonitorLog log = observe(stream.truth, stream.turns, spec, rng);
    REQUIRE(log.size() >= 7000);
    const std::string text = export_log(log);
    CHECK(parse_log(text) == log);
    CHECK(text.find("\"predicted_actor\"") != std::string::npos);
    CHECK(text.find("\"linked\"") != std::string::npos);

    MonitorLog one;
    one.append({DetectorTask::TurnViolation, 2, 12.5, 3, std::nullopt, true});
    CHECK(parse_log(export_log(one)) == one);
}

TEST_CASE("monitor log is append-only in time order") {
    MonitorLog log;
    log.append({DetectorTask::TurnViolation, 1, 10.0, 1, std::nullopt, true});
    CHECK_THROWS_AS(log.append({DetectorTask::TurnViolation, 1, 5.0, 0, std::nullopt, true}), std::invalid_argument);
}
