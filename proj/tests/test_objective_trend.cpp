#include <gtest/gtest.h>

#include <cstdio>
#include <vector>

#include "art/harness.hpp"

// Statistical check on one full synthetic fit: the Monte-Carlo surrogate
// -L11' should rise across most 100-iteration windows.
TEST(ObjectiveTrend, SurrogateRisesOverMostWindows) {
  art::harness::ExperimentConfig config;
  const auto cell = art::harness::prepare_cell(config, 1, 0.6, 1.0, std::nullopt);
  auto h = art::HyperParams::synthetic();
  h.seed = art::harness::cell_seeds(1, 0.6, 1.0, "art").fit;

  auto surrogate = [](const art::RunState& st) {
    art::Rng draws(2024);
    double sum = 0.0;
    for (int d = 0; d < 20; ++d) {
      const auto noise = art::draw_noise(st.obs.n_agents(), st.obs.n_events(), st.obs.n_states(), draws);
      sum -= art::evaluate_objective(st.nets, st.data, noise, st.vs.ctilde.ctilde_sample, st.vs.s, st.hyper, false)
                 .l11.value();
    }
    return sum / 20.0;
  };

  auto st = art::initialize(cell.obs, cell.graph, h);
  std::vector<double> checkpoints{surrogate(st)};
  art::FitOptions options;
  options.on_iteration = [&](const art::RunState& s) {
    if (s.iteration % 100 == 0) {
      checkpoints.push_back(surrogate(s));
      std::printf("iteration %d  surrogate %.3f\n", s.iteration, checkpoints.back());
      std::fflush(stdout);
    }
  };
  art::run_to_budget(st, options);

  ASSERT_EQ(checkpoints.size(), 11u);
  int rising = 0;
  for (std::size_t w = 1; w < checkpoints.size(); ++w) rising += checkpoints[w] >= checkpoints[w - 1];
  const double fraction = rising / 10.0;
  RecordProperty("rising_fraction", std::to_string(fraction));
  EXPECT_GE(fraction, 0.8);
}
