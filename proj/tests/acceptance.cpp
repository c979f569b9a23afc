// Runs every acceptance criterion and prints one PASS/FAIL line each. The
// exit status ignores criteria listed in kUnattainable, which are reported
// but cannot hold for the configured rates.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "mjlab/gradcheck.hpp"
#include "mjlab/harness.hpp"
#include "oracles.hpp"

using namespace mjlab;

namespace {

struct Verdict {
    bool pass = false;
    std::string detail;
};

// Specificity and NPV above 0.999 contradict precision 0.872 and recall 0.867
// at a 1% base rate, which imply 0.99871 and 0.99866.
const std::set<std::string> kUnattainable = {"9b"};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

Verdict engine_oracle() {
    std::vector<int> kinds;
    for (Suit s : {Suit::Bamboo, Suit::Dots})
        for (int r = 1; r <= 5; ++r) kinds.push_back(Tile(s, r).index());
    TileCounts c;
    long checked = 0, agree = 0, winners = 0;
    std::function<void(int, int)> rec = [&](int i, int left) {
        if (i == static_cast<int>(kinds.size())) {
            if (left != 0) return;
            const bool got = is_winning_hand(c, {}, Suit::Characters);
            agree += got == oracle::brute_force_winning(c, {}, Suit::Characters);
            winners += got;
            ++checked;
            return;
        }
        for (int n = 0; n <= std::min(4, left); ++n) {
            c.add(Tile::from_index(kinds[i]), n);
            rec(i + 1, left - n);
            c.remove(Tile::from_index(kinds[i]), n);
        }
    };
    rec(0, 14);
    return {checked > 0 && agree == checked,
            fmt("%ld multisets, %ld agree, %ld winning", checked, agree, winners)};
}

GameState after_declarations(std::uint64_t seed) {
    GameState g = new_game(seed);
    for (Seat s = 0; s < kNumSeats; ++s) g = apply_action(g, Action::declare(s, Suit::Characters)).state;
    return g;
}

// Committed primitives whose internal state disagrees with the table, over
// draw-then-discard pairs until `total` primitives ran.
long divergences(CommitMode mode, long total, long& ran) {
    FaultConfig cfg;
    cfg.execution_base_failure = 0.05;
    RecoveryPolicy policy;
    policy.commit_mode = mode;
    long bad = 0;
    ran = 0;
    for (std::uint64_t seed = 1; ran < total; ++seed) {
        const GameState g = after_declarations(seed);
        const InternalState st = synchronize(g, 0);
        SimClock clock;
        Rng rng(seed);
        PrimitiveSpec draw;
        draw.kind = PrimitiveKind::Draw;
        draw.target = g.wall.tiles[g.wall.draw_index];
        draw.engine_action = Action::draw(0);
        auto r = execute_primitive(st, g, draw, cfg, policy, clock, rng);
        ++ran;
        const auto committed = [](PrimitiveOutcome o) {
            return o == PrimitiveOutcome::Committed || o == PrimitiveOutcome::RecoveredThenCommitted;
        };
        if (!committed(r.outcome)) continue;
        bad += !check_consistency(r.internal, r.truth).empty();
        if (ran >= total) break;
        const Tile t = r.truth.hands[0].concealed.tiles().front();
        PrimitiveSpec discard;
        discard.kind = PrimitiveKind::Discard;
        discard.target = t;
        discard.engine_action = Action::discard(0, t);
        r = execute_primitive(r.internal, r.truth, discard, cfg, policy, clock, rng);
        ++ran;
        if (committed(r.outcome)) bad += !check_consistency(r.internal, r.truth).empty();
    }
    return bad;
}

Verdict guarded_commit() {
    long ran_vtc = 0, ran_cbv = 0;
    const long vtc = divergences(CommitMode::VerifyThenCommit, 10000, ran_vtc);
    const long cbv = divergences(CommitMode::CommitBeforeVerify, 10000, ran_cbv);
    return {vtc == 0 && cbv >= 1, fmt("%ld primitives: verify-then-commit %ld divergences, commit-before-verify %ld",
                                      ran_vtc, vtc, cbv)};
}

Verdict recovery_arithmetic() {
    const double p = 0.008, rho = 0.9;
    RecoveryPolicy policy;
    FaultConfig cfg;
    cfg.execution_base_failure = p;
    cfg.relocalize_success = rho;
    const double closed = 1.0 - oracle::unrecovered_probability(p, rho, policy.max_retries);
    const GameState g = after_declarations(1);
    const InternalState st = synchronize(g, 0);
    PrimitiveSpec spec;
    spec.kind = PrimitiveKind::Draw;
    spec.target = g.wall.tiles[g.wall.draw_index];
    spec.engine_action = Action::draw(0);
    const long n = 100000;
    long fails = 0;
    Rng rng(2024);
    for (long i = 0; i < n; ++i) {
        SimClock clock;
        fails += execute_primitive(st, g, spec, cfg, policy, clock, rng).outcome == PrimitiveOutcome::Unrecovered;
    }
    const double mc = 1.0 - static_cast<double>(fails) / n;
    const bool ok = closed >= 0.998 && oracle::within_3sigma(1.0 - mc, 1.0 - closed, n);
    return {ok, fmt("closed form %.9f, Monte Carlo %.6f over %ld grasps", closed, mc, n)};
}

Verdict fixed_points() {
    InstanceFactory factory(4);
    double worst_grpo = 0.0, worst_dpo = 0.0;
    for (int i = 0; i < 100; ++i) {
        const auto in = factory.grpo();
        worst_grpo = std::max(worst_grpo, std::abs(grpo_loss(in.params, in.params, in.items, in.cfg)));
        const auto d = factory.dpo();
        worst_dpo = std::max(worst_dpo, std::abs(dpo_loss(d.params, d.params, d.pair, d.beta) - std::log(2.0)));
    }
    GameState g = new_game(1);
    for (Seat s = 0; s < kNumSeats; ++s) g.hands[s].missing_suit = Suit::Characters;
    g.hands[0].concealed = TileCounts::parse("1B 2B 3B 4B 5B 6B 7B 8B 9B 1D 2D 3D 4D 5D");
    g.phase = Phase::AwaitingDiscard;
    StateView v = make_view(g, 0);
    v.legal.resize(10);
    const double sft = std::abs(sft_nll(PolicyParams{}, {{v, v.legal[3]}}) - std::log(10.0));
    return {worst_grpo < 1e-10 && worst_dpo < 1e-12 && sft < 1e-12,
            fmt("GRPO %.2e, DPO - ln 2 %.2e, SFT - ln 10 %.2e", worst_grpo, worst_dpo, sft)};
}

Verdict gradients() {
    const GradcheckReport r = run_gradcheck(1, 100);
    std::string grpo;
    for (const auto& [m, e] : r.worst_grpo) grpo += fmt(" %s %.2e", std::string(kl_mode_name(m)).c_str(), e);
    return {r.all_finite && r.worst() < 1e-4,
            fmt("%d instances each: SFT %.2e, DPO %.2e, GRPO%s", r.instances, r.worst_sft, r.worst_dpo, grpo.c_str())};
}

using TokenGames = std::vector<std::pair<std::vector<std::string>, bool>>;

std::string token(const Action& a) { return std::string(1, static_cast<char>('a' + a.tile.index())); }

bool trie_matches(const TokenGames& games) {
    GameGroup group;
    group.seed = 1;
    for (const auto& [tokens, win] : games) {
        GameRecord rec;
        for (const auto& t : tokens) {
            TrajectoryStep s;
            s.action = Action::discard(0, Tile::from_index(t[0] - 'a'));
            s.trace.chosen = s.action;
            rec.steps.push_back(s);
        }
        rec.outcome.winners = win ? std::set<Seat>{0} : std::set<Seat>{1};
        rec.outcome.terminal_cause = TerminalCause::WinBySelfDraw;
        group.games.push_back(rec);
    }
    const TrajectoryTrie trie = build_trie(group);
    const auto path_tokens = [&](int node) {
        std::vector<std::string> out;
        for (const Action& a : trie.path(node)) out.push_back(token(a));
        return out;
    };
    const auto stats = oracle::enumerate_prefixes(games);
    if (trie.nodes.size() != stats.size()) return false;
    for (std::size_t n = 0; n < trie.nodes.size(); ++n) {
        const auto it = stats.find(path_tokens(static_cast<int>(n)));
        if (it == stats.end() || trie.nodes[n].visits != it->second.visits ||
            trie.nodes[n].focal_wins != it->second.wins)
            return false;
    }
    Rng rng(3);
    std::set<std::tuple<std::vector<std::string>, std::string, std::string>> got, want;
    for (const auto& p : extract_preference_pairs(trie, group, rng))
        got.insert({path_tokens(p.node), token(p.preferred), token(p.dispreferred)});
    for (const auto& e : oracle::enumerate_pairs(games)) want.insert({e.prefix, e.preferred, e.dispreferred});
    return got == want;
}

Verdict trie_oracle() {
    const bool three = trie_matches({{{"s", "a", "t"}, true}, {{"s", "a", "t"}, false}, {{"s", "b", "t"}, false}});
    const bool five = trie_matches({{{"s", "a", "c"}, true},
                                    {{"s", "a", "d"}, false},
                                    {{"s", "b", "c"}, true},
                                    {{"s", "b", "c"}, true},
                                    {{"s", "e"}, false}});
    return {three && five, fmt("3-game %s, 5-game %s", three ? "match" : "differ", five ? "match" : "differ")};
}

Verdict determinism() {
    ExperimentConfig c = ExperimentConfig::paper_deployment();
    c.games = 60;
    c.base_seed = 500;
    c.parallelism = 1;
    const CampaignResult a = run_campaign(c, true);
    const CampaignResult b = run_campaign(c, true);
    c.parallelism = 4;
    const CampaignResult d = run_campaign(c, true);
    const auto same = [](const CampaignResult& x, const CampaignResult& y) {
        return x.transcripts == y.transcripts &&
               export_report(x.report, ReportFormat::Records) == export_report(y.report, ReportFormat::Records) &&
               export_report(x.report, ReportFormat::Csv) == export_report(y.report, ReportFormat::Csv);
    };
    const bool rerun = same(a, b), threads = same(a, d);
    SeatAssignment pa;
    pa.kind = "softmax";
    pa.params = initial_params();
    long shared = 0;
    const int deals = 50;
    for (int k = 1; k <= deals; ++k) {
        const auto r = run_paired_match(pa, SeatAssignment{}, static_cast<std::uint64_t>(k), c);
        shared += r.wall_a == r.wall_b;
    }
    return {rerun && threads && shared == deals,
            fmt("re-run %s, 1 vs 4 threads %s, %ld/%d paired walls shared", rerun ? "identical" : "differs",
                threads ? "identical" : "differs", shared, deals)};
}

ExperimentConfig deployment(int games) {
    ExperimentConfig c = ExperimentConfig::paper_deployment();
    c.games = games;
    c.base_seed = 1;
    return c;
}

CampaignReport g_baseline;

Verdict ablation(AblationKind kind, int games) {
    const AblationReport r = run_ablation(kind, deployment(games), games);
    if (g_baseline.games == 0) g_baseline = r.baseline;
    return {r.test.p_value < 0.01 && r.delta < 0.0,
            fmt("%d games: baseline %.4f, ablated %.4f, p = %.2e", games, r.baseline.robot_win_rate(),
                r.ablation.robot_win_rate(), r.test.p_value)};
}

Verdict monitor_precision_recall(DetectionScores& s) {
    const auto spec = DetectorSpec::from_precision_recall(DetectorTask::TurnViolation, 0.872, 0.867, 0.01);
    Rng rng(1);
    const int n = 100000;
    const auto stream = synthetic_stream(n, 0.01, DetectorTask::TurnViolation, rng);
    const MonitorLog log = observe(stream.truth, stream.turns, spec, rng);
    s = score_detections(log, stream.truth, n, DetectorTask::TurnViolation);
    const bool ok = s.precision && s.recall && std::abs(*s.precision - 0.872) <= 0.02 && std::abs(*s.recall - 0.867) <= 0.02;
    return {ok, fmt("precision %.4f, recall %.4f over %d turns", s.precision.value_or(NAN), s.recall.value_or(NAN), n)};
}

Verdict monitor_specificity(const DetectionScores& s) {
    const double spec = s.specificity.value_or(NAN), npv = s.negative_predictive_value.value_or(NAN);
    return {spec > 0.999 && npv > 0.999,
            fmt("specificity %.6f, NPV %.6f; the configured rates imply 0.998714 and 0.998657", spec, npv)};
}

Verdict hazard_shape() {
    if (g_baseline.games == 0) g_baseline = run_campaign(deployment(2000)).report;
    long before = 0, before_fail = 0, after = 0, after_fail = 0;
    for (const GameSummary& g : g_baseline.per_game) {
        for (const auto& [t, failed] : g.attempts) {
            if (t >= 20000.0) {
                ++after;
                after_fail += failed;
            } else {
                ++before;
                before_fail += failed;
            }
        }
    }
    if (before == 0 || after == 0) return {false, "no attempts on one side of 20000 s"};
    const SignificanceTest t = one_sided_two_proportion(after_fail, after, before_fail, before);
    return {t.p_value < 0.01, fmt("failure rate %.4f before, %.4f after 20000 s (%ld and %ld attempts), p = %.2e",
                                  t.rate_b, t.rate_a, before, after, t.p_value)};
}

Verdict selfplay_improvement() {
    const SelfPlayConfig cfg;
    const SelfPlayReport r = selfplay_round(initial_params(), SeatAssignment{}, cfg);
    int pairs = 0;
    for (const auto& round : r.rounds) pairs += round.pairs;
    return {static_cast<int>(r.rounds.size()) >= 5 && r.post.total() >= 1000 && r.test.p_value < 0.05,
            fmt("%zu rounds, %d pairs: win rate %.3f -> %.3f over %ld matches, p = %.2e", r.rounds.size(), pairs,
                r.pre.rate_a(), r.post.rate_a(), r.post.total(), r.test.p_value)};
}

}  // namespace

int main() {
    int unexpected = 0;
    const auto run = [&](const std::string& id, const std::string& name, const std::function<Verdict()>& fn) {
        const auto start = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = fn();
        } catch (const std::exception& e) {
            v = {false, std::string("threw: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const bool known = kUnattainable.count(id) > 0;
        if (!v.pass && !known) ++unexpected;
        std::printf("%s %-3s %s: %s (%.1f s)%s\n", v.pass ? "PASS" : "FAIL", id.c_str(), name.c_str(),
                    v.detail.c_str(), secs, !v.pass && known ? " [unattainable with the configured rates]" : "");
        std::fflush(stdout);
    };

    run("1", "engine oracle", engine_oracle);
    run("2", "guarded commit", guarded_commit);
    run("3", "recovery arithmetic", recovery_arithmetic);
    run("4", "loss fixed points", fixed_points);
    run("5", "gradient checks", gradients);
    run("6", "trie oracle", trie_oracle);
    run("7", "determinism", determinism);
    run("8a", "recovery-off ablation", [] { return ablation(AblationKind::RecoveryOff, 4000); });
    run("8b", "forced-characters ablation", [] { return ablation(AblationKind::ForcedCharacters, 4000); });
    DetectionScores scores;
    run("9a", "monitor precision and recall", [&] { return monitor_precision_recall(scores); });
    run("9b", "monitor specificity and NPV", [&] { return monitor_specificity(scores); });
    run("10", "hazard shape", hazard_shape);
    run("11", "self-play improvement", selfplay_improvement);
    return unexpected == 0 ? 0 : 1;
}
