#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "art/core_model.hpp"
#include "art/error.hpp"
#include "art/rng.hpp"

// Synthetic benchmark: agents in four index blocks with mixed memberships,
// a blockmodel social graph, per-community confusion bases perturbed per
// agent, and deterministic argmax reporting.
namespace art::datagen {

struct SyntheticSpec {
  std::size_t N = 80;
  std::size_t J = 200;
  int R = 4;
  int K_true = 4;
  Eigen::MatrixXd pi_blocks;                   // K_true x K_true, row b is the membership of block b
  std::vector<Eigen::MatrixXd> confusion_bases;  // K_true matrices, R x R
  double confusion_noise_std = 0.05;
  double beta_gen = 0.8;
  double epsilon = 0.05;
  double sparsity = 0.0;

  std::vector<std::string> violations() const {
    std::vector<std::string> out;
    if (N < 1 || J < 1) out.push_back("N and J must be >= 1");
    if (R < 2) out.push_back("R must be >= 2");
    if (K_true < 1) out.push_back("K_true must be >= 1");
    if (pi_blocks.cols() != K_true || pi_blocks.rows() < 1) out.push_back("pi_blocks must have K_true columns");
    for (Eigen::Index b = 0; b < pi_blocks.rows(); ++b)
      if ((pi_blocks.row(b).array() < 0.0).any() || std::abs(pi_blocks.row(b).sum() - 1.0) > 1e-9)
        out.push_back("pi_blocks row " + std::to_string(b + 1) + " is not on the simplex");
    if (confusion_bases.size() != static_cast<std::size_t>(K_true))
      out.push_back("need one confusion base per community");
    for (const auto& F : confusion_bases)
      if (F.rows() != R || F.cols() != R) out.push_back("confusion bases must be R x R");
    if (!(confusion_noise_std >= 0.0)) out.push_back("confusion_noise_std must be >= 0");
    if (!(beta_gen > 0.0 && beta_gen < 1.0)) out.push_back("beta_gen must lie in (0, 1)");
    if (!(epsilon > 0.0 && epsilon < 1.0)) out.push_back("epsilon must lie in (0, 1)");
    if (!(sparsity >= 0.0 && sparsity < 1.0)) out.push_back("sparsity must lie in [0, 1)");
    return out;
  }

  void check() const {
    const auto v = violations();
    if (!v.empty()) throw Error("synthetic spec: " + v.front());
  }

  // Block of agent n: agents are split into pi_blocks.rows() contiguous
  // index ranges of (nearly) equal size.
  std::size_t block_of(std::size_t n) const {
    const auto B = static_cast<std::size_t>(pi_blocks.rows());
    return std::min(B - 1, n * B / N);
  }
};

inline SyntheticSpec default_spec() {
  SyntheticSpec s;
  const int K = s.K_true;
  s.pi_blocks = Eigen::MatrixXd::Constant(K, K, 1.0 / 30.0);
  for (int b = 0; b < K; ++b) s.pi_blocks(b, b) = 0.9;
  const Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(s.R, s.R);
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(s.R, s.R);
  s.confusion_bases = {ones - 0.4 * I, ones - 0.3 * I, ones + 0.1 * I, ones + 0.01 * I};
  return s;
}

struct SyntheticDataset {
  ObservationMatrix obs;
  SocialGraph graph;
  std::vector<int> truths;       // 0-based states
  std::vector<int> communities;  // 0-based
  std::vector<Eigen::MatrixXd> agent_confusions;
};

// Lowest index among the maxima.
inline int idxmax(const Eigen::RowVectorXd& row) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < row.size(); ++i)
    if (row(i) > row(best)) best = i;
  return static_cast<int>(best);
}

inline int draw_index(const Eigen::RowVectorXd& p, Rng& rng) {
  return static_cast<int>(rng.categorical(std::span<const double>(p.data(), static_cast<std::size_t>(p.size()))));
}

// Draw order: community indices, graph (pairs n < m in lexicographic
// order), agent confusions, event truths.
inline SyntheticDataset generate(const SyntheticSpec& spec, Rng& rng) {
  spec.check();
  SyntheticDataset ds;
  const auto N = spec.N;
  const auto J = spec.J;
  const int R = spec.R;

  auto membership = [&](std::size_t n) -> Eigen::RowVectorXd {
    return spec.pi_blocks.row(static_cast<Eigen::Index>(spec.block_of(n)));
  };

  ds.communities.resize(N);
  for (std::size_t n = 0; n < N; ++n) ds.communities[n] = draw_index(membership(n), rng);

  std::vector<SocialGraph::Edge> edges;
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t m = n + 1; m < N; ++m) {
      const int z_nm = draw_index(membership(n), rng);
      const int z_mn = draw_index(membership(m), rng);
      if (rng.bernoulli(z_nm == z_mn ? spec.beta_gen : spec.epsilon)) edges.emplace_back(n, m);
    }
  ds.graph = SocialGraph(N, std::move(edges));

  ds.agent_confusions.reserve(N);
  for (std::size_t n = 0; n < N; ++n) {
    Eigen::MatrixXd C = spec.confusion_bases[static_cast<std::size_t>(ds.communities[n])];
    for (Eigen::Index c = 0; c < C.cols(); ++c)
      for (Eigen::Index r = 0; r < C.rows(); ++r) C(r, c) += spec.confusion_noise_std * rng.normal();
    ds.agent_confusions.push_back(std::move(C));
  }

  ds.truths.resize(J);
  for (auto& t : ds.truths) t = static_cast<int>(rng.uniform_index(static_cast<std::size_t>(R)));

  std::vector<Observation> entries;
  entries.reserve(N * J);
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t j = 0; j < J; ++j)
      entries.push_back({n, j, idxmax(ds.agent_confusions[n].row(ds.truths[j]))});
  ds.obs = ObservationMatrix(N, J, R, entries);
  return ds;
}

inline std::size_t floor_count(double x) { return static_cast<std::size_t>(std::floor(x + 1e-9)); }
inline std::size_t ceil_count(double x) { return static_cast<std::size_t>(std::ceil(x - 1e-9)); }

// Nulls exactly floor(sparsity * N * J) of the observed cells, chosen
// uniformly; masks that leave an event without observers are redrawn.
inline ObservationMatrix apply_sparsity(const ObservationMatrix& obs, double sparsity, Rng& rng,
                                        int max_attempts = 1000) {
  if (!(sparsity >= 0.0 && sparsity < 1.0)) throw Error("apply_sparsity: sparsity must lie in [0, 1)");
  const auto entries = obs.entries();
  const std::size_t target = floor_count(sparsity * static_cast<double>(obs.n_agents() * obs.n_events()));
  if (target == 0) return obs;
  if (target > entries.size())
    throw Error("apply_sparsity: cannot null " + std::to_string(target) + " cells, only " +
                std::to_string(entries.size()) + " are observed");
  if (entries.size() - target < obs.n_events())
    throw Error("apply_sparsity: too few observations would remain to cover every event");

  std::vector<std::size_t> order(entries.size());
  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng.engine());
    std::vector<Observation> kept;
    kept.reserve(entries.size() - target);
    std::vector<std::size_t> coverage(obs.n_events(), 0);
    for (std::size_t i = target; i < order.size(); ++i) {
      kept.push_back(entries[order[i]]);
      ++coverage[entries[order[i]].event];
    }
    if (std::find(coverage.begin(), coverage.end(), 0) != coverage.end()) continue;
    std::sort(kept.begin(), kept.end(), [](const Observation& a, const Observation& b) {
      return a.agent != b.agent ? a.agent < b.agent : a.event < b.event;
    });
    return ObservationMatrix(obs.n_agents(), obs.n_events(), obs.n_states(), kept);
  }
  throw Error("apply_sparsity: every sampled mask left an event unobserved after " + std::to_string(max_attempts) +
              " attempts");
}

// Keeps a uniform random subset of ceil(density * |E|) edges.
inline SocialGraph thin_edges(const SocialGraph& graph, double density, Rng& rng) {
  if (!(density > 0.0 && density <= 1.0)) throw Error("thin_edges: density must lie in (0, 1]");
  const auto keep = std::min(graph.n_edges(), ceil_count(density * static_cast<double>(graph.n_edges())));
  if (keep == graph.n_edges()) return graph;
  auto edges = graph.edges();
  std::shuffle(edges.begin(), edges.end(), rng.engine());
  edges.resize(keep);
  return SocialGraph(graph.n_agents(), std::move(edges));
}

}  // namespace art::datagen
