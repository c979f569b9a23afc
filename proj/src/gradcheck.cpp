#include "mjlab/gradcheck.hpp"

#include <algorithm>
#include <map>

namespace mjlab {

std::vector<StateView> sample_views(std::uint64_t seed, std::size_t count) {
    std::vector<StateView> out;
    Rng pick(seed);
    for (std::uint64_t game = seed * 1000 + 1; out.size() < count; ++game) {
        Rng rng(game * 7919 + 1);
        GameState g = new_game(game);
        while (!g.terminal() && out.size() < count) {
            const Seat s = g.phase == Phase::AwaitingClaims ? static_cast<Seat>(pick.below(kNumSeats)) : g.current_seat;
            StateView v = make_view(g, s);
            if (v.legal.size() >= 2 && pick.bernoulli(0.2)) out.push_back(std::move(v));
            if (g.phase == Phase::AwaitingClaims) {
                std::map<Seat, Action> claims;
                for (Seat c : claim_candidates(g)) {
                    auto legal = legal_actions(g, c);
                    claims[c] = legal[rng.below(legal.size())];
                }
                g = resolve_claims(g, claims).state;
            } else {
                auto legal = legal_actions(g, g.current_seat);
                g = apply_action(g, legal[rng.below(legal.size())]).state;
            }
        }
    }
    return out;
}

PolicyParams random_params(Rng& rng, double scale) {
    PolicyParams p;
    for (double& x : p.theta) x = scale * rng.normal();
    p.temperature = 0.5 + 1.5 * rng.uniform();
    return p;
}

PolicyParams perturbed(const PolicyParams& p, Rng& rng, double scale) {
    PolicyParams q = p;
    for (double& x : q.theta) x += scale * rng.normal();
    return q;
}

InstanceFactory::InstanceFactory(std::uint64_t seed) : rng_(seed), views_(sample_views(seed, 300)) {}

const StateView& InstanceFactory::view() { return views_[rng_.below(views_.size())]; }

Action InstanceFactory::random_legal(const StateView& v) { return v.legal[rng_.below(v.legal.size())]; }

SftInstance InstanceFactory::sft() {
    SftInstance in{random_params(rng_), {}};
    for (int i = 0; i < 6; ++i) {
        const StateView& v = view();
        in.data.push_back({v, random_legal(v)});
    }
    return in;
}

GrpoInstance InstanceFactory::grpo(KlMode mode) {
    GrpoInstance in;
    in.params = random_params(rng_);
    in.ref = perturbed(in.params, rng_);
    in.cfg.group_size = 4;
    in.cfg.kl_beta = 0.1;
    in.cfg.kl_mode = mode;
    std::vector<double> rewards;
    for (int i = 0; i < 4; ++i) rewards.push_back(composite_reward(rng_.bernoulli(0.8), rng_.uniform()));
    const auto adv = group_advantage(rewards, in.cfg);
    for (int i = 0; i < 4; ++i) {
        const StateView& v = view();
        in.items.push_back({v, random_legal(v), adv[i]});
    }
    return in;
}

DpoInstance InstanceFactory::dpo() {
    DpoInstance in;
    in.params = random_params(rng_);
    in.ref = perturbed(in.params, rng_);
    in.beta = 0.5 + rng_.uniform();
    const StateView& v = view();
    in.pair.view = v;
    const std::size_t a = rng_.below(v.legal.size());
    std::size_t b = rng_.below(v.legal.size() - 1);
    if (b >= a) ++b;
    in.pair.preferred = v.legal[a];
    in.pair.dispreferred = v.legal[b];
    in.pair.win_rate_gap = 0.5;
    return in;
}

DifferentiableLoss as_loss(const SftInstance& in) {
    return {[in](const PolicyParams& p) { return sft_nll(p, in.data); },
            [in](const PolicyParams& p) { return sft_nll_gradient(p, in.data); }};
}

DifferentiableLoss as_loss(const GrpoInstance& in) {
    return {[in](const PolicyParams& p) { return grpo_loss(p, in.ref, in.items, in.cfg); },
            [in](const PolicyParams& p) { return grpo_loss_gradient(p, in.ref, in.items, in.cfg); }};
}

DifferentiableLoss as_loss(const DpoInstance& in) {
    return {[in](const PolicyParams& p) { return dpo_loss(p, in.ref, in.pair, in.beta); },
            [in](const PolicyParams& p) { return dpo_loss_gradient(p, in.ref, in.pair, in.beta); }};
}

double GradcheckReport::worst() const {
    double w = std::max(worst_sft, worst_dpo);
    for (const auto& [mode, e] : worst_grpo) w = std::max(w, e);
    return w;
}

GradcheckReport run_gradcheck(std::uint64_t seed, int instances, double step) {
    InstanceFactory factory(seed);
    GradcheckReport rep;
    rep.instances = instances;
    const KlMode modes[] = {KlMode::ExactReverse, KlMode::ExactForward, KlMode::SampledK3};
    for (KlMode m : modes) rep.worst_grpo.emplace_back(m, 0.0);
    auto check = [&](const DifferentiableLoss& loss, const PolicyParams& at, double& worst) {
        const FiniteDifferenceReport r = finite_difference_check(loss, at, step);
        rep.all_finite = rep.all_finite && r.finite;
        worst = std::max(worst, r.max_relative_error);
    };
    for (int i = 0; i < instances; ++i) {
        const SftInstance s = factory.sft();
        check(as_loss(s), s.params, rep.worst_sft);
        const DpoInstance d = factory.dpo();
        check(as_loss(d), d.params, rep.worst_dpo);
        for (auto& [mode, worst] : rep.worst_grpo) {
            const GrpoInstance g = factory.grpo(mode);
            check(as_loss(g), g.params, worst);
        }
    }
    return rep;
}

}  // namespace mjlab
