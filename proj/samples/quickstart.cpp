// Generates a small synthetic dataset, runs majority vote and a short ART
// fit, and prints both accuracies.

#include <iostream>

#include "art/art.hpp"

int main() {
  auto spec = art::datagen::default_spec();
  spec.N = 40;
  spec.J = 60;

  art::Rng rng(7);
  auto ds = art::datagen::generate(spec, rng);
  const auto obs = art::datagen::apply_sparsity(ds.obs, 0.5, rng);

  auto hyper = art::HyperParams::synthetic();
  hyper.iterations = 50;
  hyper.seed = 7;
  const auto result = art::fit(obs, ds.graph, hyper);

  std::cout << "agents " << obs.n_agents() << ", events " << obs.n_events() << ", observations " << obs.n_observed()
            << ", edges " << ds.graph.n_edges() << '\n'
            << "majority vote accuracy " << art::harness::accuracy(art::majority_vote(obs), ds.truths) << '\n'
            << "ART accuracy after " << hyper.iterations << " iterations "
            << art::harness::accuracy(result.estimate, ds.truths) << '\n';
}
