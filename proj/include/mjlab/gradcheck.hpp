#pragma once

#include <vector>

#include "mjlab/selfplay.hpp"

namespace mjlab {

// Views with at least two legal actions, gathered from random playouts.
std::vector<StateView> sample_views(std::uint64_t seed, std::size_t count);

PolicyParams random_params(Rng& rng, double scale = 0.7);
PolicyParams perturbed(const PolicyParams& p, Rng& rng, double scale = 0.3);

struct SftInstance {
    PolicyParams params;
    std::vector<SftExample> data;
};

struct GrpoInstance {
    PolicyParams params;
    PolicyParams ref;
    std::vector<GrpoItem> items;
    LossConfig cfg;
};

struct DpoInstance {
    PolicyParams params;
    PolicyParams ref;
    PreferencePair pair;
    double beta = 1.0;
};

// Random loss instances over real game views: random parameters, a nearby
// reference, G = 4 groups with composite-reward advantages.
class InstanceFactory {
public:
    explicit InstanceFactory(std::uint64_t seed);

    SftInstance sft();
    GrpoInstance grpo(KlMode mode = KlMode::ExactReverse);
    DpoInstance dpo();

private:
    const StateView& view();
    Action random_legal(const StateView& v);

    Rng rng_;
    std::vector<StateView> views_;
};

DifferentiableLoss as_loss(const SftInstance& in);
DifferentiableLoss as_loss(const GrpoInstance& in);
DifferentiableLoss as_loss(const DpoInstance& in);

struct GradcheckReport {
    int instances = 0;
    double worst_sft = 0.0;
    double worst_dpo = 0.0;
    std::vector<std::pair<KlMode, double>> worst_grpo;
    bool all_finite = true;

    double worst() const;
};

// Central-difference checks of every loss on `instances` random instances
// each, GRPO once per KL mode.
GradcheckReport run_gradcheck(std::uint64_t seed, int instances, double step = 1e-5);

}  // namespace mjlab
