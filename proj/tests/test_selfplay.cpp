#include <doctest.h>

#include <cmath>
#include <set>

#include "instances.hpp"
#include "mjlab/selfplay.hpp"
#include "oracles.hpp"

using namespace mjlab;

namespace {

using TokenGames = std::vector<std::pair<std::vector<std::string>, bool>>;

Action token_action(const std::string& token) {
    return Action::discard(0, Tile::from_index(static_cast<int>(token[0] - 'a')));
}

std::string action_token(const Action& a) { return std::string(1, static_cast<char>('a' + a.tile.index())); }

GameGroup hand_built(const TokenGames& games) {
    GameGroup g;
    g.seed = 1;
    for (const auto& [tokens, win] : games) {
        GameRecord rec;
        for (const auto& t : tokens) {
            TrajectoryStep s;
            s.action = token_action(t);
            s.trace.chosen = s.action;
            s.trace.policy_id = t;
            rec.steps.push_back(s);
        }
        rec.outcome.winners = win ? std::set<Seat>{0} : std::set<Seat>{1};
        rec.outcome.terminal_cause = TerminalCause::WinBySelfDraw;
        g.games.push_back(rec);
    }
    return g;
}

std::vector<std::string> tokens_of(const std::vector<Action>& path) {
    std::vector<std::string> out;
    for (const Action& a : path) out.push_back(action_token(a));
    return out;
}

void check_against_enumeration(const TokenGames& games) {
    const GameGroup group = hand_built(games);
    const TrajectoryTrie trie = build_trie(group);
    const auto stats = oracle::enumerate_prefixes(games);
    REQUIRE(trie.nodes.size() == stats.size());
    for (std::size_t n = 0; n < trie.nodes.size(); ++n) {
        const auto key = tokens_of(trie.path(static_cast<int>(n)));
        REQUIRE(stats.count(key) == 1);
        CHECK(trie.nodes[n].visits == stats.at(key).visits);
        CHECK(trie.nodes[n].focal_wins == stats.at(key).wins);
    }
    Rng rng(3);
    const auto pairs = extract_preference_pairs(trie, group, rng);
    std::set<oracle::EnumeratedPair> got;
    for (const auto& p : pairs) {
        got.insert({tokens_of(trie.path(p.node)), action_token(p.preferred), action_token(p.dispreferred), p.win_rate_gap});
        CHECK(p.preferred_trace.chosen == p.preferred);
        CHECK(p.dispreferred_trace.chosen == p.dispreferred);
    }
    const auto expected = oracle::enumerate_pairs(games);
    CHECK(got.size() == pairs.size());
    REQUIRE(got.size() == expected.size());
    auto a = got.begin();
    for (auto b = expected.begin(); b != expected.end(); ++a, ++b) {
        CHECK(a->prefix == b->prefix);
        CHECK(a->preferred == b->preferred);
        CHECK(a->dispreferred == b->dispreferred);
        CHECK(a->gap == doctest::Approx(b->gap));
    }
}

}  // namespace

TEST_CASE("three-game trie diverging once") {
    const TokenGames games = {{{"s", "a", "t"}, true}, {{"s", "a", "t"}, false}, {{"s", "b", "t"}, false}};
    const GameGroup group = hand_built(games);
    const TrajectoryTrie trie = build_trie(group);
    CHECK(trie.nodes[0].visits == 3);
    const TrieNode& s = trie.nodes[trie.nodes[0].children.at(0)];
    REQUIRE(s.children.size() == 2);
    CHECK(trie.nodes[s.children[0]].win_rate() == doctest::Approx(0.5));
    CHECK(trie.nodes[s.children[1]].win_rate() == 0.0);
    Rng rng(1);
    const auto pairs = extract_preference_pairs(trie, group, rng);
    REQUIRE(pairs.size() == 1);
    CHECK(action_token(pairs[0].preferred) == "a");
    CHECK(action_token(pairs[0].dispreferred) == "b");
    CHECK(pairs[0].win_rate_gap == doctest::Approx(0.5));
    check_against_enumeration(games);
}

TEST_CASE("five-game trie matches enumeration") {
    const TokenGames games = {{{"s", "a", "c"}, true},
                              {{"s", "a", "d"}, false},
                              {{"s", "b", "c"}, true},
                              {{"s", "b", "c"}, true},
                              {{"s", "e"}, false}};
    check_against_enumeration(games);
    Rng rng(2);
    const GameGroup group = hand_built(games);
    CHECK(extract_preference_pairs(build_trie(group), group, rng).size() == 4);
}

TEST_CASE("tries without unequal siblings yield no pairs") {
    const TokenGames single = {{{"s", "a"}, true}, {{"s", "a"}, false}};
    const GameGroup one = hand_built(single);
    Rng rng(1);
    CHECK(extract_preference_pairs(build_trie(one), one, rng).empty());
    CHECK(build_trie(one).leaf_count() == 1);
    const TokenGames ties = {{{"s", "a"}, true}, {{"s", "b"}, true}, {{"s", "c"}, false}, {{"s", "d"}, false}};
    check_against_enumeration(ties);
    const GameGroup tied = hand_built(ties);
    CHECK(extract_preference_pairs(build_trie(tied), tied, rng).size() == 4);
}

TEST_CASE("play_group shares the deal and is reproducible") {
    const PolicyParams p = initial_params();
    const GameGroup a = play_group(p, 4, 11);
    const GameGroup b = play_group(p, 4, 11);
    CHECK(group_to_jsonl(a) == group_to_jsonl(b));
    for (const GameRecord& g : a.games) CHECK(g.steps.front().view == a.games[0].steps.front().view);

    SoftmaxPolicy greedy(p);
    greedy.greedy = true;
    const GameGroup same = play_group(greedy, 4, 11);
    const TrajectoryTrie trie = build_trie(same);
    CHECK(trie.leaf_count() == 1);
    for (const TrieNode& n : trie.nodes) CHECK(n.visits == 4);
    Rng rng(1);
    CHECK(extract_preference_pairs(trie, same, rng).empty());
}

TEST_CASE("trie paths replay to the recorded games") {
    for (std::uint64_t seed = 1; seed <= 6; ++seed) {
        const GameGroup group = play_group(initial_params(), 6, seed);
        const TrajectoryTrie trie = build_trie(group);
        CHECK(trie.nodes[0].visits == group.size());
        std::set<std::vector<Action>> distinct;
        for (const GameRecord& g : group.games) {
            std::vector<Action> actions;
            for (const auto& s : g.steps) actions.push_back(s.action);
            distinct.insert(actions);
        }
        CHECK(trie.leaf_count() == static_cast<int>(distinct.size()));
        for (std::size_t n = 0; n < trie.nodes.size(); ++n) {
            const TrieNode& node = trie.nodes[n];
            CHECK(node.focal_wins <= node.visits);
            int through_children = 0;
            for (int c : node.children) through_children += trie.nodes[c].visits;
            CHECK(through_children <= node.visits);
            if (!node.children.empty()) continue;
            const GameState end = replay(group.wall, group.seed, trie.path(static_cast<int>(n)));
            const GameOutcome& recorded = group.games[node.games.front()].outcome;
            CHECK(end.winners == recorded.winners);
            CHECK(end.terminal_cause == recorded.terminal_cause);
        }
        Rng rng(seed);
        for (const auto& p : extract_preference_pairs(trie, group, rng)) {
            CHECK(trie.nodes[p.node].children.size() >= 2);
            CHECK(p.preferred != p.dispreferred);
            CHECK(p.win_rate_gap > 0.0);
            CHECK(p.preferred.actor == 0);
        }
    }
}

TEST_CASE("loss examples") {
    SUBCASE("SFT NLL") {
        GameState g = new_game(1);
        for (Seat s = 0; s < kNumSeats; ++s) g.hands[s].missing_suit = Suit::Characters;
        g.hands[0].concealed = TileCounts::parse("1B 2B 3B 4B 5B 6B 7B 8B 9B 1D 2D 3D 4D 5D");
        g.phase = Phase::AwaitingDiscard;
        StateView v = make_view(g, 0);
        v.legal.resize(10);
        PolicyParams flat;
        CHECK(sft_nll(flat, {{v, v.legal[3]}}) == doctest::Approx(std::log(10.0)).epsilon(1e-12));
        StateView forced = v;
        forced.legal.resize(1);
        CHECK(sft_nll(initial_params(), {{forced, forced.legal[0]}}) == 0.0);
        CHECK_THROWS_AS(sft_nll(flat, {{forced, v.legal[5]}}), std::invalid_argument);
    }
    SUBCASE("composite reward") {
        CHECK(composite_reward(true, 0.7) == doctest::Approx(1.7));
        CHECK(composite_reward(false, 0.0) == 0.0);
        CHECK(composite_reward(true, 1.0) == 2.0);
    }
    SUBCASE("group advantage") {
        const LossConfig cfg;
        const auto a = group_advantage({1, 2, 3}, cfg);
        CHECK(a[0] == doctest::Approx(-1.224744871391589));
        CHECK(a[1] == doctest::Approx(0.0));
        CHECK(a[2] == doctest::Approx(1.224744871391589));
        for (double x : group_advantage({2, 2, 2, 2}, cfg)) CHECK(x == 0.0);
        Rng rng(4);
        for (int t = 0; t < 100; ++t) {
            std::vector<double> r;
            for (int i = 0; i < 8; ++i) r.push_back(rng.normal());
            const auto adv = group_advantage(r, cfg);
            const auto st = group_stats(adv);
            CHECK(std::abs(st.mu) < 1e-9);
            CHECK(std::abs(st.sigma - 1.0) < 1e-9);
        }
    }
}

TEST_CASE("GRPO and DPO fixed points and clip arithmetic") {
    testutil::InstanceFactory factory(5);
    for (int i = 0; i < 20; ++i) {
        auto in = factory.grpo();
        CHECK(std::abs(grpo_loss(in.params, in.params, in.items, in.cfg)) < 1e-10);
        auto d = factory.dpo();
        CHECK(std::abs(dpo_loss(d.params, d.params, d.pair, d.beta) - std::log(2.0)) < 1e-12);
    }
    auto in = factory.grpo();
    in.items.resize(1);
    in.items[0].advantage = 1.0;
    const double lp = log_probability(SoftmaxPolicy(in.params), in.items[0].view, in.items[0].action);
    const double lr = log_probability(SoftmaxPolicy(in.ref), in.items[0].view, in.items[0].action);
    const double r = std::exp(lp - lr);
    if (r < 1.0) std::swap(in.params, in.ref);
    const double ratio = std::max(r, 1.0 / r);
    REQUIRE(ratio > 1.0);
    in.cfg.kl_beta = 0.0;
    in.cfg.clip_epsilon = (ratio - 1.0) / 2.0;
    CHECK(grpo_loss(in.params, in.ref, in.items, in.cfg) == doctest::Approx(-(1.0 + in.cfg.clip_epsilon)));
    for (double g : grpo_loss_gradient(in.params, in.ref, in.items, in.cfg)) CHECK(g == 0.0);

    auto d = factory.dpo();
    PolicyParams flat;
    PolicyParams sharp = flat;
    const FeatureVector fw = action_features(d.pair.view, d.pair.preferred);
    const FeatureVector fl = action_features(d.pair.view, d.pair.dispreferred);
    for (int k = 0; k < kNumFeatures; ++k) sharp.theta[k] = 5.0 * (fw[k] - fl[k]);
    CHECK(dpo_loss(sharp, flat, d.pair, 1.0) < std::log(2.0));
}

TEST_CASE("GRPO surrogate bound") {
    testutil::InstanceFactory factory(6);
    for (int i = 0; i < 50; ++i) {
        const auto in = factory.grpo();
        for (const GrpoItem& item : in.items) {
            const double r = std::exp(log_probability(SoftmaxPolicy(in.params), item.view, item.action) -
                                      log_probability(SoftmaxPolicy(in.ref), item.view, item.action));
            const double c = std::clamp(r, 1 - in.cfg.clip_epsilon, 1 + in.cfg.clip_epsilon);
            const double m = std::min(r * item.advantage, c * item.advantage);
            if (item.advantage >= 0) CHECK(m <= r * item.advantage);
            if (item.advantage <= 0) CHECK(m <= c * item.advantage);
        }
    }
}

TEST_CASE("finite-difference checker") {
    PolicyParams point;
    for (int k = 0; k < kNumFeatures; ++k) point.theta[k] = 0.1 * k - 0.5;
    DifferentiableLoss quad{[](const PolicyParams& p) {
                                double s = 0;
                                for (int k = 0; k < kNumFeatures; ++k) s += (k + 1) * p.theta[k] * p.theta[k] + p.theta[k];
                                return s;
                            },
                            [](const PolicyParams& p) {
                                std::vector<double> g(kNumFeatures);
                                for (int k = 0; k < kNumFeatures; ++k) g[k] = 2.0 * (k + 1) * p.theta[k] + 1.0;
                                return g;
                            }};
    CHECK(finite_difference_check(quad, point, 1e-4).max_relative_error < 1e-8);
    DifferentiableLoss corrupted = quad;
    corrupted.gradient = [&](const PolicyParams& p) {
        auto g = quad.gradient(p);
        g[3] *= 1.01;
        return g;
    };
    const auto rep = finite_difference_check(corrupted, point, 1e-4);
    CHECK(rep.max_relative_error > 1e-3);
    CHECK(rep.worst_coordinate == 3);
    DifferentiableLoss broken{[](const PolicyParams&) { return std::nan(""); },
                              [](const PolicyParams&) { return std::vector<double>(kNumFeatures, 0.0); }};
    CHECK_FALSE(finite_difference_check(broken, point).finite);
}

TEST_CASE("analytic gradients match finite differences") {
    testutil::InstanceFactory factory(7);
    double worst_sft = 0, worst_dpo = 0;
    std::array<double, 3> worst_grpo{};
    for (int i = 0; i < 100; ++i) {
        const auto s = factory.sft();
        worst_sft = std::max(worst_sft, finite_difference_check({[&](const PolicyParams& p) { return sft_nll(p, s.data); },
                                                                 [&](const PolicyParams& p) { return sft_nll_gradient(p, s.data); }},
                                                                s.params).max_relative_error);
        const auto d = factory.dpo();
        worst_dpo = std::max(worst_dpo, finite_difference_check(
                                            {[&](const PolicyParams& p) { return dpo_loss(p, d.ref, d.pair, d.beta); },
                                             [&](const PolicyParams& p) { return dpo_loss_gradient(p, d.ref, d.pair, d.beta); }},
                                            d.params).max_relative_error);
        int m = 0;
        for (KlMode mode : {KlMode::ExactReverse, KlMode::ExactForward, KlMode::SampledK3}) {
            const auto g = factory.grpo(mode);
            worst_grpo[m] = std::max(worst_grpo[m], finite_difference_check(
                                                        {[&](const PolicyParams& p) { return grpo_loss(p, g.ref, g.items, g.cfg); },
                                                         [&](const PolicyParams& p) {
                                                             return grpo_loss_gradient(p, g.ref, g.items, g.cfg);
                                                         }},
                                                        g.params).max_relative_error);
            ++m;
        }
    }
    CHECK(worst_sft < 1e-4);
    CHECK(worst_dpo < 1e-4);
    for (double w : worst_grpo) CHECK(w < 1e-4);
}

TEST_CASE("DPO training") {
    testutil::InstanceFactory factory(8);
    std::vector<PreferencePair> pairs;
    for (int i = 0; i < 10; ++i) pairs.push_back(factory.dpo().pair);
    const PolicyParams start = initial_params();
    DpoTrainConfig cfg;
    cfg.steps = 0;
    CHECK(train_dpo(start, start, pairs, cfg) == start);
    cfg.steps = 30;
    CHECK(train_dpo(start, start, {}, cfg) == start);
    const PolicyParams trained = train_dpo(start, start, pairs, cfg);
    double before = 0, after = 0;
    for (const auto& p : pairs) {
        before += dpo_loss(start, start, p, cfg.beta_sp);
        after += dpo_loss(trained, start, p, cfg.beta_sp);
    }
    CHECK(after < before);
}

TEST_CASE("self-play records serialize one line per item") {
    const GameGroup group = play_group(initial_params(), 3, 2);
    const TrajectoryTrie trie = build_trie(group);
    Rng rng(1);
    const auto pairs = extract_preference_pairs(trie, group, rng);
    auto lines = [](const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); };
    CHECK(lines(group_to_jsonl(group)) == 3);
    CHECK(lines(trie_to_jsonl(trie)) == trie.nodes.size());
    CHECK(lines(pairs_to_jsonl(pairs)) == pairs.size());
}
