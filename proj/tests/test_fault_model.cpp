#include <doctest.h>

#include "mjlab/fault_model.hpp"
#include "oracles.hpp"

using namespace mjlab;

namespace {

FaultConfig with_base(double p) {
    FaultConfig cfg;
    cfg.execution_base_failure = p;
    return cfg;
}

double failure_rate(const FaultConfig& cfg, double t, long n, std::uint64_t seed) {
    Rng rng(seed);
    long fails = 0;
    for (long i = 0; i < n; ++i) fails += sample_execution_failure(t, cfg, rng);
    return static_cast<double>(fails) / static_cast<double>(n);
}

}  // namespace

TEST_CASE("hazard curve asymptotes, midpoint and monotonicity") {
    HazardCurve h{0.008, 0.05, 20000.0, 2000.0};
    CHECK(hazard(20000.0, h) == doctest::Approx(0.033));
    CHECK(hazard(20000.0 - 10 * 2000.0, h) == doctest::Approx(0.008).epsilon(1e-3));
    CHECK(hazard(20000.0 + 10 * 2000.0, h) == doctest::Approx(0.058).epsilon(1e-3));
    CHECK(hazard(-1e9, h) >= 0.008);
    CHECK(hazard(1e9, h) <= 0.058 + 1e-12);
    double prev = hazard(0.0, h);
    for (double t = 0; t <= 60000; t += 250) {
        const double cur = hazard(t, h);
        CHECK(cur >= prev);
        prev = cur;
    }
}

TEST_CASE("execution failure rate matches the base rate") {
    SUBCASE("p = 0.008 over 1e5 attempts") {
        const long n = 100000;
        CHECK(oracle::within_3sigma(failure_rate(with_base(0.008), 0.0, n, 11), 0.008, n));
    }
    SUBCASE("degenerate rates") {
        CHECK(failure_rate(with_base(0.0), 0.0, 10000, 3) == 0.0);
        CHECK(failure_rate(with_base(1.0), 0.0, 10000, 3) == 1.0);
    }
    SUBCASE("hazard dominates late in the session") {
        FaultConfig cfg = with_base(0.008);
        cfg.hazard = {0.0, 0.05, 20000.0, 2000.0};
        CHECK(execution_failure_probability(0.0, cfg) == doctest::Approx(0.008));
        CHECK(execution_failure_probability(40000.0, cfg) == doctest::Approx(0.05).epsilon(1e-3));
        const long n = 100000;
        CHECK(oracle::within_3sigma(failure_rate(cfg, 40000.0, n, 5), execution_failure_probability(40000.0, cfg), n));
    }
}

TEST_CASE("misdetection returns the true tile or a different valid tile") {
    const Tile t{Suit::Bamboo, 5};
    SUBCASE("rate 0") {
        FaultConfig cfg;
        Rng rng(1);
        for (int i = 0; i < 5000; ++i) CHECK(sample_misdetection(t, cfg, rng) == t);
    }
    SUBCASE("rate 1") {
        FaultConfig cfg;
        cfg.misdetection_rate = 1.0;
        Rng rng(2);
        std::array<int, kNumKinds> seen{};
        for (int i = 0; i < 27000; ++i) {
            const Tile m = sample_misdetection(t, cfg, rng);
            REQUIRE(m.valid());
            REQUIRE(m != t);
            ++seen[m.index()];
        }
        CHECK(seen[t.index()] == 0);
        for (int k = 0; k < kNumKinds; ++k) {
            if (k != t.index()) CHECK(oracle::within_3sigma(seen[k] / 27000.0, 1.0 / 26.0, 27000));
        }
    }
    SUBCASE("intermediate rate") {
        FaultConfig cfg;
        cfg.misdetection_rate = 0.05;
        Rng rng(3);
        const long n = 100000;
        long wrong = 0;
        for (long i = 0; i < n; ++i) wrong += sample_misdetection(t, cfg, rng) != t;
        CHECK(oracle::within_3sigma(static_cast<double>(wrong) / n, 0.05, n));
    }
}

TEST_CASE("interaction events come from humans at the configured rates") {
    GameState g = new_game(4);
    g.phase = Phase::AwaitingDiscard;
    g.current_seat = 2;
    const Seat robot = 0;

    SUBCASE("zero rates never fire") {
        FaultConfig cfg;
        Rng rng(9);
        for (int i = 0; i < 10000; ++i) CHECK_FALSE(sample_interaction_event(g, robot, cfg, rng).has_value());
    }
    SUBCASE("rate 1 fires every turn with a human actor off turn") {
        FaultConfig cfg;
        cfg.interaction.out_of_turn = 1.0;
        Rng rng(9);
        for (int i = 0; i < 2000; ++i) {
            auto ev = sample_interaction_event(g, robot, cfg, rng);
            REQUIRE(ev.has_value());
            CHECK(ev->kind == FaultKind::OutOfTurn);
            CHECK(*ev->actor != robot);
            CHECK(*ev->actor != g.current_seat);
        }
    }
    SUBCASE("inspection rate 1 names a victim other than the actor") {
        FaultConfig cfg;
        cfg.interaction.inspection = 1.0;
        Rng rng(10);
        for (int i = 0; i < 2000; ++i) {
            auto ev = sample_interaction_event(g, robot, cfg, rng);
            REQUIRE(ev.has_value());
            CHECK(ev->kind == FaultKind::Inspection);
            CHECK(*ev->actor != robot);
            REQUIRE(ev->victim.has_value());
            CHECK(*ev->victim != *ev->actor);
        }
    }
    SUBCASE("0.01 each over 1e5 turns") {
        FaultConfig cfg;
        cfg.interaction = {0.01, 0.01};
        Rng rng(12);
        const long n = 100000;
        long oot = 0, insp = 0;
        for (long i = 0; i < n; ++i) {
            if (auto ev = sample_interaction_event(g, robot, cfg, rng)) (ev->kind == FaultKind::OutOfTurn ? oot : insp)++;
        }
        CHECK(oracle::within_3sigma(static_cast<double>(oot) / n, 0.01, n));
        CHECK(oracle::within_3sigma(static_cast<double>(insp) / n, 0.01, n));
    }
}

TEST_CASE("fault sampling is reproducible from a seed") {
    FaultConfig cfg = with_base(0.2);
    cfg.misdetection_rate = 0.3;
    cfg.interaction = {0.1, 0.1};
    GameState g = new_game(1);
    auto run = [&](std::uint64_t seed) {
        Rng rng(seed);
        std::vector<int> out;
        for (int i = 0; i < 500; ++i) {
            out.push_back(sample_execution_failure(100.0 * i, cfg, rng));
            out.push_back(sample_misdetection(Tile{Suit::Dots, 3}, cfg, rng).index());
            auto ev = sample_interaction_event(g, 1, cfg, rng);
            out.push_back(ev ? static_cast<int>(ev->kind) * 10 + *ev->actor : -1);
        }
        return out;
    };
    CHECK(run(77) == run(77));
    CHECK(run(77) != run(78));
}

TEST_CASE("fault configuration validation") {
    CHECK_NOTHROW(FaultConfig{}.validate());
    FaultConfig bad;
    bad.misdetection_rate = 1.5;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = FaultConfig{};
    bad.interaction = {0.7, 0.7};
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = FaultConfig{};
    bad.hazard.width_tau = 0.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    CHECK(misdetection_rate_from_counts(5, 122, 40) == doctest::Approx(5.0 / (122 * 40)));
}
