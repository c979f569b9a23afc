#include "mjlab/selfplay.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "mjlab/records.hpp"

namespace mjlab {

using nlohmann::json;

std::string_view kl_mode_name(KlMode m) {
    switch (m) {
        case KlMode::ExactReverse: return "exact-reverse";
        case KlMode::ExactForward: return "exact-forward";
        case KlMode::SampledK3: return "sampled-k3";
    }
    return "?";
}

std::optional<KlMode> parse_kl_mode(std::string_view text) {
    for (auto m : {KlMode::ExactReverse, KlMode::ExactForward, KlMode::SampledK3})
        if (kl_mode_name(m) == text) return m;
    return std::nullopt;
}

void LossConfig::validate() const {
    if (!(clip_epsilon > 0.0)) throw std::invalid_argument("clip_epsilon must be positive");
    if (!(kl_beta >= 0.0)) throw std::invalid_argument("kl_beta must be non-negative");
    if (!(dpo_beta > 0.0)) throw std::invalid_argument("dpo_beta must be positive");
    if (group_size < 2) throw std::invalid_argument("group_size must be at least 2");
    if (!(sigma_floor > 0.0)) throw std::invalid_argument("sigma_floor must be positive");
}

GameRecord play_recorded_game(const std::array<const Policy*, kNumSeats>& seats, const Wall& wall, std::uint64_t seed,
                              Rng& rng) {
    GameRecord rec;
    GameState g = new_game(seed, wall);
    auto step = [&](Seat s, const GameState& state) {
        const StateView view = make_view(state, s);
        Decision d = decide(*seats[s], view, rng, static_cast<double>(rec.steps.size()));
        rec.steps.push_back({s, view, std::move(d.trace), d.action});
        return d.action;
    };
    while (!g.terminal()) {
        if (g.phase == Phase::AwaitingClaims) {
            std::map<Seat, Action> claims;
            for (Seat s : claim_candidates(g)) claims[s] = step(s, g);
            g = resolve_claims(g, claims).state;
        } else {
            const Action a = step(g.current_seat, g);
            g = apply_action(g, a).state;
        }
    }
    rec.outcome = outcome_of(g);
    return rec;
}

GameState replay(const Wall& wall, std::uint64_t seed, const std::vector<Action>& decisions) {
    GameState g = new_game(seed, wall);
    std::size_t i = 0;
    auto next = [&](Seat expected) {
        if (i >= decisions.size()) throw std::invalid_argument("decision sequence ended before the game");
        const Action& a = decisions[i++];
        if (a.actor != expected) throw RuleViolation({"turn", "decision by seat " + std::to_string(a.actor)});
        return a;
    };
    while (!g.terminal()) {
        if (g.phase == Phase::AwaitingClaims) {
            std::map<Seat, Action> claims;
            for (Seat s : claim_candidates(g)) claims[s] = next(s);
            g = resolve_claims(g, claims).state;
        } else {
            g = apply_action(g, next(g.current_seat)).state;
        }
    }
    if (i != decisions.size()) throw std::invalid_argument("decisions remain after the game ended");
    return g;
}

GameGroup play_group(const PolicyParams& policy, int group_size, std::uint64_t seed, const Policy* opponent) {
    return play_group(SoftmaxPolicy(policy, "focal"), group_size, seed, opponent);
}

GameGroup play_group(const Policy& focal, int group_size, std::uint64_t seed, const Policy* opponent) {
    if (group_size < 2) throw std::invalid_argument("group size must be at least 2");
    TeacherPolicy default_opponent;
    default_opponent.greedy = true;
    const Policy* opp = opponent ? opponent : &default_opponent;

    GameGroup group;
    group.seed = seed;
    group.wall = shuffled_wall(seed);
    group.focal_seat = 0;
    const std::array<const Policy*, kNumSeats> seats = {&focal, opp, opp, opp};
    for (int i = 0; i < group_size; ++i) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i) + 1));
        group.games.push_back(play_recorded_game(seats, group.wall, seed, rng));
    }
    return group;
}

int TrajectoryTrie::leaf_count() const {
    return static_cast<int>(std::count_if(nodes.begin(), nodes.end(), [](const TrieNode& n) { return n.children.empty(); }));
}

std::vector<Action> TrajectoryTrie::path(int node) const {
    std::vector<Action> out;
    for (int n = node; n > 0; n = nodes[n].parent) out.push_back(*nodes[n].action);
    std::reverse(out.begin(), out.end());
    return out;
}

TrajectoryTrie build_trie(const GameGroup& group) {
    TrajectoryTrie trie;
    trie.nodes.emplace_back();
    for (int gi = 0; gi < group.size(); ++gi) {
        const GameRecord& game = group.games[gi];
        const int win = game.outcome.winners.count(group.focal_seat) ? 1 : 0;
        int node = 0;
        auto visit = [&](int n) {
            trie.nodes[n].visits += 1;
            trie.nodes[n].focal_wins += win;
            trie.nodes[n].games.push_back(gi);
        };
        visit(0);
        for (const TrajectoryStep& step : game.steps) {
            int child = -1;
            for (int c : trie.nodes[node].children) {
                if (*trie.nodes[c].action == step.action) {
                    child = c;
                    break;
                }
            }
            if (child < 0) {
                child = static_cast<int>(trie.nodes.size());
                TrieNode n;
                n.parent = node;
                n.depth = trie.nodes[node].depth + 1;
                n.action = step.action;
                trie.nodes.push_back(std::move(n));
                trie.nodes[node].children.push_back(child);
            }
            visit(child);
            node = child;
        }
    }
    return trie;
}

std::vector<PreferencePair> extract_preference_pairs(const TrajectoryTrie& trie, const GameGroup& group, Rng& rng) {
    std::vector<PreferencePair> pairs;
    for (int n = 0; n < static_cast<int>(trie.nodes.size()); ++n) {
        const TrieNode& node = trie.nodes[n];
        if (node.children.size() < 2) continue;
        std::vector<const TrajectoryStep*> sampled;
        for (int c : node.children) {
            const TrieNode& child = trie.nodes[c];
            const int game = child.games[rng.below(child.games.size())];
            sampled.push_back(&group.games[game].steps[child.depth - 1]);
        }
        for (std::size_t i = 0; i < node.children.size(); ++i) {
            for (std::size_t j = i + 1; j < node.children.size(); ++j) {
                const double ri = trie.nodes[node.children[i]].win_rate();
                const double rj = trie.nodes[node.children[j]].win_rate();
                if (ri == rj) continue;
                const TrajectoryStep* hi = ri > rj ? sampled[i] : sampled[j];
                const TrajectoryStep* lo = ri > rj ? sampled[j] : sampled[i];
                pairs.push_back({n, hi->view, hi->trace, hi->action, lo->trace, lo->action, std::abs(ri - rj)});
            }
        }
    }
    return pairs;
}

namespace {

// Log-probability of every legal action and grad log pi per action.
struct ViewEval {
    std::vector<double> logp;
    std::vector<std::vector<double>> grad;  // only filled on request
    std::size_t index_of(const StateView& v, const Action& a) const {
        const auto it = std::find(v.legal.begin(), v.legal.end(), a);
        if (it == v.legal.end()) throw std::invalid_argument("action not legal in view: " + to_string(a));
        return static_cast<std::size_t>(it - v.legal.begin());
    }
};

ViewEval evaluate(const PolicyParams& params, const StateView& v, bool with_grad) {
    if (v.legal.empty()) throw std::invalid_argument("no legal actions in view");
    ViewEval e;
    const std::size_t n = v.legal.size();
    std::vector<FeatureVector> phi(n);
    std::vector<double> s(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        phi[i] = action_features(v, v.legal[i]);
        for (int k = 0; k < kNumFeatures; ++k) s[i] += params.theta[k] * phi[i][k];
    }
    const double t = params.temperature;
    const double top = *std::max_element(s.begin(), s.end());
    double z = 0.0;
    for (double x : s) z += std::exp((x - top) / t);
    const double logz = std::log(z);
    e.logp.resize(n);
    for (std::size_t i = 0; i < n; ++i) e.logp[i] = (s[i] - top) / t - logz;
    if (with_grad) {
        std::vector<double> mean(kNumFeatures, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double p = std::exp(e.logp[i]);
            for (int k = 0; k < kNumFeatures; ++k) mean[k] += p * phi[i][k];
        }
        e.grad.assign(n, std::vector<double>(kNumFeatures));
        for (std::size_t i = 0; i < n; ++i)
            for (int k = 0; k < kNumFeatures; ++k) e.grad[i][k] = (phi[i][k] - mean[k]) / t;
    }
    return e;
}

void axpy(std::vector<double>& y, double a, const std::vector<double>& x) {
    for (std::size_t k = 0; k < y.size(); ++k) y[k] += a * x[k];
}

}  // namespace

double sft_nll(const PolicyParams& params, const std::vector<SftExample>& data) {
    if (data.empty()) throw std::invalid_argument("empty SFT dataset");
    double total = 0.0;
    for (const SftExample& ex : data) {
        const ViewEval e = evaluate(params, ex.view, false);
        total -= e.logp[e.index_of(ex.view, ex.action)];
    }
    return total / static_cast<double>(data.size());
}

std::vector<double> sft_nll_gradient(const PolicyParams& params, const std::vector<SftExample>& data) {
    if (data.empty()) throw std::invalid_argument("empty SFT dataset");
    std::vector<double> g(kNumFeatures, 0.0);
    for (const SftExample& ex : data) {
        const ViewEval e = evaluate(params, ex.view, true);
        axpy(g, -1.0 / static_cast<double>(data.size()), e.grad[e.index_of(ex.view, ex.action)]);
    }
    return g;
}

double composite_reward(bool format_ok, double teacher_prob) {
    if (!(teacher_prob >= 0.0 && teacher_prob <= 1.0)) throw std::invalid_argument("teacher_prob must lie in [0, 1]");
    return (format_ok ? 1.0 : 0.0) + teacher_prob;
}

GroupStats group_stats(const std::vector<double>& rewards) {
    GroupStats s;
    if (rewards.empty()) return s;
    for (double r : rewards) s.mu += r;
    s.mu /= static_cast<double>(rewards.size());
    double var = 0.0;
    for (double r : rewards) var += (r - s.mu) * (r - s.mu);
    s.sigma = std::sqrt(var / static_cast<double>(rewards.size()));
    return s;
}

std::vector<double> group_advantage(const std::vector<double>& rewards, const LossConfig& cfg) {
    if (rewards.size() < 2) throw std::invalid_argument("group advantage needs at least two rewards");
    const GroupStats s = group_stats(rewards);
    std::vector<double> a(rewards.size(), 0.0);
    if (s.sigma < cfg.sigma_floor) return a;
    for (std::size_t i = 0; i < rewards.size(); ++i) a[i] = (rewards[i] - s.mu) / s.sigma;
    return a;
}

namespace {

struct GrpoTerms {
    double loss = 0.0;
    std::vector<double> grad = std::vector<double>(kNumFeatures, 0.0);
};

GrpoTerms grpo_eval(const PolicyParams& params, const PolicyParams& ref, const std::vector<GrpoItem>& group,
                    const LossConfig& cfg, bool with_grad) {
    cfg.validate();
    if (group.empty()) throw std::invalid_argument("empty GRPO group");
    GrpoTerms out;
    const double inv_g = 1.0 / static_cast<double>(group.size());
    for (const GrpoItem& item : group) {
        const ViewEval cur = evaluate(params, item.view, with_grad);
        const ViewEval base = evaluate(ref, item.view, false);
        const std::size_t i = cur.index_of(item.view, item.action);
        if (std::exp(base.logp[i]) <= 0.0) throw std::invalid_argument("reference assigns zero probability");
        const double r = std::exp(cur.logp[i] - base.logp[i]);
        const double clipped = std::clamp(r, 1.0 - cfg.clip_epsilon, 1.0 + cfg.clip_epsilon);
        const double unclipped_term = r * item.advantage;
        const double clipped_term = clipped * item.advantage;
        out.loss -= inv_g * std::min(unclipped_term, clipped_term);
        if (with_grad && unclipped_term <= clipped_term) axpy(out.grad, -inv_g * item.advantage * r, cur.grad[i]);

        if (cfg.kl_beta == 0.0) continue;
        const double w = cfg.kl_beta * inv_g;
        switch (cfg.kl_mode) {
            case KlMode::ExactReverse:
                for (std::size_t a = 0; a < cur.logp.size(); ++a) {
                    const double p = std::exp(cur.logp[a]);
                    const double d = cur.logp[a] - base.logp[a];
                    out.loss += w * p * d;
                    if (with_grad) axpy(out.grad, w * p * d, cur.grad[a]);
                }
                break;
            case KlMode::ExactForward:
                for (std::size_t a = 0; a < cur.logp.size(); ++a) {
                    const double q = std::exp(base.logp[a]);
                    out.loss += w * q * (base.logp[a] - cur.logp[a]);
                    if (with_grad) axpy(out.grad, -w * q, cur.grad[a]);
                }
                break;
            case KlMode::SampledK3: {
                const double x = base.logp[i] - cur.logp[i];
                out.loss += w * (std::exp(x) - 1.0 - x);
                if (with_grad) axpy(out.grad, -w * (std::exp(x) - 1.0), cur.grad[i]);
                break;
            }
        }
    }
    return out;
}

struct DpoTerms {
    double loss = 0.0;
    std::vector<double> grad = std::vector<double>(kNumFeatures, 0.0);
};

double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

DpoTerms dpo_eval(const PolicyParams& params, const PolicyParams& ref, const PreferencePair& pair, double beta,
                  bool with_grad) {
    if (!(beta > 0.0)) throw std::invalid_argument("dpo beta must be positive");
    if (pair.preferred == pair.dispreferred) throw std::invalid_argument("preference pair actions must differ");
    const ViewEval cur = evaluate(params, pair.view, with_grad);
    const ViewEval base = evaluate(ref, pair.view, false);
    const std::size_t w = cur.index_of(pair.view, pair.preferred);
    const std::size_t l = cur.index_of(pair.view, pair.dispreferred);
    const double z = beta * ((cur.logp[w] - base.logp[w]) - (cur.logp[l] - base.logp[l]));
    DpoTerms out;
    out.loss = softplus(-z);
    if (with_grad) {
        const double s = 1.0 / (1.0 + std::exp(z));  // sigma(-z)
        axpy(out.grad, -s * beta, cur.grad[w]);
        axpy(out.grad, s * beta, cur.grad[l]);
    }
    return out;
}

}  // namespace

double grpo_loss(const PolicyParams& params, const PolicyParams& ref, const std::vector<GrpoItem>& group,
                 const LossConfig& cfg) {
    return grpo_eval(params, ref, group, cfg, false).loss;
}

std::vector<double> grpo_loss_gradient(const PolicyParams& params, const PolicyParams& ref,
                                       const std::vector<GrpoItem>& group, const LossConfig& cfg) {
    return grpo_eval(params, ref, group, cfg, true).grad;
}

double dpo_loss(const PolicyParams& params, const PolicyParams& ref, const PreferencePair& pair, double beta_sp) {
    return dpo_eval(params, ref, pair, beta_sp, false).loss;
}

std::vector<double> dpo_loss_gradient(const PolicyParams& params, const PolicyParams& ref, const PreferencePair& pair,
                                      double beta_sp) {
    return dpo_eval(params, ref, pair, beta_sp, true).grad;
}

FiniteDifferenceReport finite_difference_check(const DifferentiableLoss& loss, const PolicyParams& point, double step) {
    if (!(step > 0.0)) throw std::invalid_argument("step must be positive");
    FiniteDifferenceReport rep;
    const std::vector<double> g = loss.gradient(point);
    for (int k = 0; k < static_cast<int>(point.theta.size()); ++k) {
        PolicyParams up = point, down = point;
        up.theta[k] += step;
        down.theta[k] -= step;
        const double fu = loss.value(up), fdn = loss.value(down);
        if (!std::isfinite(fu) || !std::isfinite(fdn) || !std::isfinite(g[k])) {
            rep.finite = false;
            rep.max_relative_error = std::numeric_limits<double>::infinity();
            rep.worst_coordinate = k;
            return rep;
        }
        const double fd = (fu - fdn) / (2.0 * step);
        const double err = std::abs(g[k] - fd) / std::max({std::abs(g[k]), std::abs(fd), 1e-6});
        if (err > rep.max_relative_error || rep.worst_coordinate < 0) {
            rep.max_relative_error = err;
            rep.worst_coordinate = k;
        }
    }
    return rep;
}

PolicyParams train_dpo(const PolicyParams& start, const PolicyParams& ref, const std::vector<PreferencePair>& pairs,
                       const DpoTrainConfig& cfg) {
    PolicyParams p = start;
    if (pairs.empty()) return p;
    for (int it = 0; it < cfg.steps; ++it) {
        std::vector<double> g(kNumFeatures, 0.0);
        for (const PreferencePair& pair : pairs) axpy(g, 1.0 / static_cast<double>(pairs.size()), dpo_eval(p, ref, pair, cfg.beta_sp, true).grad);
        for (int k = 0; k < kNumFeatures; ++k) p.theta[k] -= cfg.learning_rate * g[k];
    }
    p.validate();
    return p;
}

std::string group_to_jsonl(const GameGroup& group) {
    std::string out;
    for (int i = 0; i < group.size(); ++i) {
        const GameRecord& g = group.games[i];
        json actions = json::array();
        for (const TrajectoryStep& s : g.steps) actions.push_back(action_to_json(s.action));
        json winners = json::array();
        for (Seat w : g.outcome.winners) winners.push_back(w);
        json rec{{"record", "game"},      {"seed", group.seed},  {"game", i},
                 {"focal_seat", group.focal_seat}, {"winners", winners},
                 {"cause", terminal_cause_name(g.outcome.terminal_cause)}, {"actions", actions}};
        out += rec.dump() + "\n";
    }
    return out;
}

std::string trie_to_jsonl(const TrajectoryTrie& trie) {
    std::string out;
    for (std::size_t i = 0; i < trie.nodes.size(); ++i) {
        const TrieNode& n = trie.nodes[i];
        json rec{{"record", "node"},        {"id", i},
                 {"parent", n.parent},      {"depth", n.depth},
                 {"visits", n.visits},      {"focal_wins", n.focal_wins},
                 {"win_rate", n.win_rate()}, {"children", n.children}};
        rec["action"] = n.action ? action_to_json(*n.action) : json(nullptr);
        out += rec.dump() + "\n";
    }
    return out;
}

std::string pairs_to_jsonl(const std::vector<PreferencePair>& pairs) {
    std::string out;
    for (const PreferencePair& p : pairs) {
        json rec{{"record", "pair"},
                 {"node", p.node},
                 {"view", summarize(p.view)},
                 {"preferred", action_to_json(p.preferred)},
                 {"dispreferred", action_to_json(p.dispreferred)},
                 {"win_rate_gap", p.win_rate_gap},
                 {"preferred_trace", trace_to_json(p.preferred_trace)},
                 {"dispreferred_trace", trace_to_json(p.dispreferred_trace)}};
        out += rec.dump() + "\n";
    }
    return out;
}

}  // namespace mjlab
