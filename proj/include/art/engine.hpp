#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "art/autoencoder.hpp"
#include "art/checkpoint.hpp"
#include "art/community.hpp"
#include "art/core_model.hpp"
#include "art/error.hpp"
#include "art/hyper_params.hpp"
#include "art/rng.hpp"

namespace art {

// Variational parameters plus the most recent Monte-Carlo samples.
struct VariationalState {
  community::MembershipField phi;
  Eigen::MatrixXd psi;    // N x K
  Eigen::MatrixXd gamma;  // N x K
  community::BetaParams lambda;
  community::CommunityReliability ctilde;
  Eigen::MatrixXd C;  // D x N
  std::vector<int> s;
  Eigen::MatrixXd theta_relaxed;  // R x J
  std::vector<int> theta_hard;

  bool operator==(const VariationalState&) const = default;
};

struct RunState {
  int iteration = 0;
  HyperParams hyper;  // priors resolved
  ObservationMatrix obs;
  SocialGraph graph;
  TrainingData data;
  VariationalState vs;
  AutoencoderNets nets;
  AutoencoderOptimizer opt;
  Rng rng;
  double last_loss = 0.0;
};

// Receives (step name, agent, other agent) for every sub-update; -1 marks an
// unused slot. Used by tests to check the schedule.
using TraceHook = std::function<void(std::string_view, long, long)>;

inline RunState initialize(const ObservationMatrix& obs, const SocialGraph& graph, const HyperParams& hyper_in) {
  const auto report = validate(obs, graph);
  if (!report.ok()) throw Error("invalid dataset: " + report.violations.front().message);
  hyper_in.check();
  RunState st;
  st.hyper = resolve_priors(hyper_in);
  st.hyper.check();
  st.obs = obs;
  st.graph = graph;
  st.rng = Rng(st.hyper.seed);
  const auto& h = st.hyper;
  const auto N = static_cast<Eigen::Index>(obs.n_agents());
  const int K = h.K;

  st.nets = make_nets(obs.n_agents(), obs.n_events(), obs.n_states(), h, st.rng);
  st.opt = make_optimizer(st.nets, h);
  st.data = make_training_data(obs, h.epsilon);

  auto& vs = st.vs;
  vs.phi = community::MembershipField::uniform(obs.n_agents(), K);
  vs.psi = Eigen::MatrixXd::Constant(N, K, 1.0 / K);
  vs.gamma = Eigen::MatrixXd::Constant(N, K, (h.alpha + static_cast<double>(2 * N - 1)) / K);
  vs.lambda = {Eigen::VectorXd::Constant(K, h.g0), Eigen::VectorXd::Constant(K, h.h0)};
  vs.ctilde.mu_tilde = h.U;
  vs.ctilde.sigma_tilde = h.V;
  vs.ctilde.ctilde_sample = community::sample_ctilde(h.U, h.V, st.rng);

  const auto o = mlp::forward_batch(st.nets.reliability, st.data.agent_inputs).output;
  vs.C = sample_reliability(o, h.b, st.rng).C;
  vs.s = community::sample_assignments(vs.psi, st.rng);
  const auto u = mlp::forward_batch(st.nets.event, st.data.event_inputs).output;
  auto ev = sample_event(u, h.tau, h.epsilon, st.rng);
  vs.theta_relaxed = std::move(ev.theta_relaxed);
  vs.theta_hard = std::move(ev.theta_hard);
  return st;
}

// One pass of the schedule:
//   for each agent n:
//     for each m != n: update phi_{n->m} and phi_{m->n}
//     update psi_n, update gamma_n, sample C_n, sample s_n
//   update lambda (beta), update Ct posterior, sample Ct and theta,
//   one autoencoder step.
// psi_n uses the most recent C_n sample, i.e. the one drawn in the previous
// pass (or at initialization).
inline void iterate(RunState& st, const TraceHook& trace = {}) {
  auto note = [&](std::string_view step, long a = -1, long b = -1) {
    if (trace) trace(step, a, b);
  };
  const int i = ++st.iteration;
  const auto& h = st.hyper;
  auto& vs = st.vs;
  const double rho = h.rho(i);
  const auto N = st.obs.n_agents();
  const auto K = h.K;

  try {
    const Eigen::MatrixXd o = mlp::forward_batch(st.nets.reliability, st.data.agent_inputs).output;
    const auto elog_beta = community::expected_log_beta(vs.lambda);
    Eigen::MatrixXd elog_pi(static_cast<Eigen::Index>(N), K);
    for (std::size_t n = 0; n < N; ++n)
      elog_pi.row(static_cast<Eigen::Index>(n)) =
          community::expected_log_pi_row(vs.gamma, static_cast<Eigen::Index>(n)).transpose();

    for (std::size_t n = 0; n < N; ++n) {
      const auto ni = static_cast<Eigen::Index>(n);
      for (std::size_t m = 0; m < N; ++m) {
        if (m == n) continue;
        const bool linked = st.graph.connected(n, m);
        const Eigen::VectorXd prev_nm = vs.phi.row(n, m);
        const Eigen::VectorXd prev_mn = vs.phi.row(m, n);
        vs.phi.row(n, m) = community::update_phi_pair(linked, prev_mn, elog_beta, elog_pi.row(ni).transpose(), h.epsilon);
        vs.phi.row(m, n) = community::update_phi_pair(linked, prev_nm, elog_beta,
                                                      elog_pi.row(static_cast<Eigen::Index>(m)).transpose(), h.epsilon);
        note("phi", static_cast<long>(n), static_cast<long>(m));
      }
      vs.psi.row(ni) = community::update_psi_row(vs.psi.row(ni).transpose(), vs.C.col(ni), vs.ctilde.mu_tilde,
                                                 vs.ctilde.sigma_tilde, elog_pi.row(ni).transpose(), h.b_prime, rho)
                           .transpose();
      note("psi", static_cast<long>(n));
      vs.gamma.row(ni) = community::update_gamma_row(vs.phi, vs.psi, h.alpha, n).transpose();
      elog_pi.row(ni) = community::expected_log_pi_row(vs.gamma, ni).transpose();
      note("gamma", static_cast<long>(n));
      vs.C.col(ni) = o.col(ni).array() + st.rng.normal() * h.b;
      note("sample_C", static_cast<long>(n));
      vs.s[n] = community::sample_assignment(vs.psi.row(ni).transpose(), st.rng);
      note("sample_s", static_cast<long>(n));
    }

    vs.lambda = community::update_beta(vs.phi, st.graph, h.g0, h.h0);
    note("beta");
    vs.ctilde = community::update_ctilde(vs.ctilde, vs.C, vs.psi, h.U, h.V, h.b_prime, rho);
    note("ctilde");
    vs.ctilde.ctilde_sample = community::sample_ctilde(vs.ctilde.mu_tilde, vs.ctilde.sigma_tilde, st.rng);
    note("sample_ctilde");
    const Eigen::MatrixXd u = mlp::forward_batch(st.nets.event, st.data.event_inputs).output;
    auto ev = sample_event(u, h.tau, h.epsilon, st.rng);
    vs.theta_relaxed = std::move(ev.theta_relaxed);
    vs.theta_hard = std::move(ev.theta_hard);
    note("sample_theta");
    const auto value = autoencoder_step(st.nets, st.opt, st.data, vs.ctilde.ctilde_sample, vs.s, h, st.rng, i);
    st.last_loss = value.total;
    note("autoencoder");
  } catch (const Error& e) {
    const std::string what = e.what();
    if (what.find("iteration") != std::string::npos) throw;
    throw Error(what + " (iteration " + std::to_string(i) + ")");
  }
}

// Confidence row j is the event encoder output u_j; the state is its argmax
// with ties to the lowest index.
inline TruthEstimate estimate_truths(const RunState& st) {
  const Eigen::MatrixXd u = mlp::forward_batch(st.nets.event, st.data.event_inputs).output;
  return TruthEstimate::from_confidence(u.transpose());
}

// --- checkpoints -----------------------------------------------------------

inline TensorArchive to_archive(const RunState& st) {
  TensorArchive ar;
  ar.put_text("meta.iteration", std::to_string(st.iteration));
  ar.put_text("meta.hyper", to_config_string(st.hyper));
  ar.put_text("meta.shape", std::to_string(st.obs.n_agents()) + " " + std::to_string(st.obs.n_events()) + " " +
                                std::to_string(st.obs.n_states()));
  ar.put_text("rng", st.rng.save_state());
  mlp::save(st.nets.reliability, ar, "net.reliability");
  mlp::save(st.nets.event, ar, "net.event");
  mlp::save(st.nets.decoder, ar, "net.decoder");
  mlp::save(st.opt.reliability, ar, "adam.reliability");
  mlp::save(st.opt.event, ar, "adam.event");
  mlp::save(st.opt.decoder, ar, "adam.decoder");
  const auto& vs = st.vs;
  ar.put("prior.U", st.hyper.U);
  ar.put("prior.V", st.hyper.V);
  ar.put("vi.phi", vs.phi.as_matrix());
  ar.put("vi.psi", vs.psi);
  ar.put("vi.gamma", vs.gamma);
  ar.put("vi.G", as_column(vs.lambda.G));
  ar.put("vi.H", as_column(vs.lambda.H));
  ar.put("vi.mu_tilde", vs.ctilde.mu_tilde);
  ar.put("vi.sigma_tilde", vs.ctilde.sigma_tilde);
  ar.put("sample.ctilde", vs.ctilde.ctilde_sample);
  ar.put("sample.C", vs.C);
  auto ints = [](const std::vector<int>& v) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(v.size()), 1);
    for (std::size_t i = 0; i < v.size(); ++i) m(static_cast<Eigen::Index>(i), 0) = v[i];
    return m;
  };
  ar.put("sample.s", ints(vs.s));
  ar.put("sample.theta_relaxed", vs.theta_relaxed);
  ar.put("sample.theta_hard", ints(vs.theta_hard));
  ar.put("meta.last_loss", Eigen::MatrixXd::Constant(1, 1, st.last_loss));
  return ar;
}

inline void save_checkpoint(const RunState& st, const std::filesystem::path& path) { to_archive(st).write(path); }

// Restores a run. The dataset is not stored in the checkpoint and must be
// the one the run was started with (dimensions are checked).
inline RunState from_archive(const TensorArchive& ar, const ObservationMatrix& obs, const SocialGraph& graph) {
  RunState st;
  st.obs = obs;
  st.graph = graph;
  const std::string shape = std::to_string(obs.n_agents()) + " " + std::to_string(obs.n_events()) + " " +
                            std::to_string(obs.n_states());
  if (ar.text("meta.shape") != shape)
    throw Error("checkpoint: dataset shape " + shape + " does not match checkpoint " + ar.text("meta.shape"));
  st.iteration = std::stoi(ar.text("meta.iteration"));
  st.hyper = parse_hyper_params(ar.text("meta.hyper"));
  st.hyper.U = ar.tensor("prior.U");
  st.hyper.V = ar.tensor("prior.V");
  st.rng.load_state(ar.text("rng"));
  st.nets.reliability = mlp::load_net(ar, "net.reliability");
  st.nets.event = mlp::load_net(ar, "net.event");
  st.nets.decoder = mlp::load_net(ar, "net.decoder");
  st.opt.reliability = mlp::load_optimizer(ar, "adam.reliability", st.nets.reliability.layers.size());
  st.opt.event = mlp::load_optimizer(ar, "adam.event", st.nets.event.layers.size());
  st.opt.decoder = mlp::load_optimizer(ar, "adam.decoder", st.nets.decoder.layers.size());
  st.data = make_training_data(obs, st.hyper.epsilon);

  auto& vs = st.vs;
  vs.phi = community::MembershipField::from_matrix(ar.tensor("vi.phi"), obs.n_agents());
  vs.psi = ar.tensor("vi.psi");
  vs.gamma = ar.tensor("vi.gamma");
  vs.lambda = {ar.tensor("vi.G").col(0), ar.tensor("vi.H").col(0)};
  vs.ctilde = {ar.tensor("vi.mu_tilde"), ar.tensor("vi.sigma_tilde"), ar.tensor("sample.ctilde")};
  vs.C = ar.tensor("sample.C");
  auto ints = [](const Eigen::MatrixXd& m) {
    std::vector<int> v(static_cast<std::size_t>(m.rows()));
    for (Eigen::Index i = 0; i < m.rows(); ++i) v[static_cast<std::size_t>(i)] = static_cast<int>(m(i, 0));
    return v;
  };
  vs.s = ints(ar.tensor("sample.s"));
  vs.theta_relaxed = ar.tensor("sample.theta_relaxed");
  vs.theta_hard = ints(ar.tensor("sample.theta_hard"));
  st.last_loss = ar.tensor("meta.last_loss")(0, 0);
  return st;
}

inline RunState load_checkpoint(const std::filesystem::path& path, const ObservationMatrix& obs,
                                const SocialGraph& graph) {
  return from_archive(TensorArchive::read(path), obs, graph);
}

// --- driver ----------------------------------------------------------------

struct FitOptions {
  // Rolling checkpoint, rewritten every hyper.checkpoint_every iterations.
  std::filesystem::path checkpoint_path;
  // Final snapshot written after the last iteration.
  std::filesystem::path final_checkpoint_path;
  TraceHook trace;
  // Called after every iteration.
  std::function<void(const RunState&)> on_iteration;
};

struct FitResult {
  TruthEstimate estimate;
  RunState state;
};

// Runs iterations until the configured budget is reached.
inline void run_to_budget(RunState& st, const FitOptions& options = {}) {
  while (st.iteration < st.hyper.iterations) {
    iterate(st, options.trace);
    if (options.on_iteration) options.on_iteration(st);
    if (!options.checkpoint_path.empty() && st.hyper.checkpoint_every > 0 &&
        st.iteration % st.hyper.checkpoint_every == 0)
      save_checkpoint(st, options.checkpoint_path);
  }
  if (!options.final_checkpoint_path.empty()) save_checkpoint(st, options.final_checkpoint_path);
}

inline FitResult fit(const ObservationMatrix& obs, const SocialGraph& graph, const HyperParams& hyper,
                     const FitOptions& options = {}) {
  FitResult r{{}, initialize(obs, graph, hyper)};
  run_to_budget(r.state, options);
  r.estimate = estimate_truths(r.state);
  return r;
}

}  // namespace art
