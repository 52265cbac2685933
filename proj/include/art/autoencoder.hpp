#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "art/core_model.hpp"
#include "art/error.hpp"
#include "art/hyper_params.hpp"
#include "art/mlp.hpp"
#include "art/rng.hpp"

// The autoencoder: a reliability encoder q(C; w_R) reading an agent's row of
// M, an event encoder q(theta; w_E) reading an event's column, and a decoder
// p(M | C, theta; w_D) producing independent Bernoulli parameters for each
// observed (agent, event) pair.
//
// Agent-indexed quantities are D x N matrices (one column per agent, D =
// R1 * R2); event-indexed ones are R x J.
namespace art {

struct AutoencoderNets {
  mlp::DenseNet reliability;
  mlp::DenseNet event;
  mlp::DenseNet decoder;

  bool operator==(const AutoencoderNets&) const = default;
};

struct AutoencoderOptimizer {
  mlp::OptimizerState reliability;
  mlp::OptimizerState event;
  mlp::OptimizerState decoder;

  bool operator==(const AutoencoderOptimizer&) const = default;
};

inline std::vector<std::size_t> with_ends(std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out) {
  std::vector<std::size_t> dims{in};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(out);
  return dims;
}

inline AutoencoderNets make_nets(std::size_t n_agents, std::size_t n_events, int n_states, const HyperParams& h,
                                 Rng& rng) {
  const auto R = static_cast<std::size_t>(n_states);
  const auto D = static_cast<std::size_t>(h.D());
  AutoencoderNets nets;
  nets.reliability =
      mlp::init_net(with_ends(n_events * R, h.layer_sizes.reliability, D), mlp::Head::kSimplex, rng);
  nets.event = mlp::init_net(with_ends(n_agents * R, h.layer_sizes.event, R), mlp::Head::kSimplex, rng);
  nets.decoder = mlp::init_net(with_ends(D + R, h.layer_sizes.decoder, R), mlp::Head::kSquash, rng);
  return nets;
}

inline AutoencoderOptimizer make_optimizer(const AutoencoderNets& nets, const HyperParams& h) {
  return {mlp::make_optimizer(nets.reliability, h.learning_rate, h.adam_beta1, h.adam_beta2, h.adam_epsilon),
          mlp::make_optimizer(nets.event, h.learning_rate, h.adam_beta1, h.adam_beta2, h.adam_epsilon),
          mlp::make_optimizer(nets.decoder, h.learning_rate, h.adam_beta1, h.adam_beta2, h.adam_epsilon)};
}

// Non-null entries of M in row-major order with one-hot targets (R x P).
struct ObservedPairs {
  std::vector<Eigen::Index> agent;
  std::vector<Eigen::Index> event;
  Eigen::MatrixXd targets;

  std::size_t size() const { return agent.size(); }
};

inline ObservedPairs observed_pairs(const ObservationMatrix& obs) {
  ObservedPairs p;
  const auto entries = obs.entries();
  p.targets = Eigen::MatrixXd::Zero(obs.n_states(), static_cast<Eigen::Index>(entries.size()));
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    if (e.state < 0 || e.state >= obs.n_states()) throw Error("observed_pairs: state out of range");
    p.agent.push_back(static_cast<Eigen::Index>(e.agent));
    p.event.push_back(static_cast<Eigen::Index>(e.event));
    p.targets(e.state, static_cast<Eigen::Index>(i)) = 1.0;
  }
  return p;
}

// Everything the autoencoder reads from the data, computed once per fit.
struct TrainingData {
  std::size_t n_agents = 0;
  std::size_t n_events = 0;
  int n_states = 0;
  Eigen::MatrixXd agent_inputs;  // (J*R) x N, column n = onehot_row(n)
  Eigen::MatrixXd event_inputs;  // (N*R) x J, column j = onehot_col(j)
  ObservedPairs pairs;
  Eigen::MatrixXd log_prior;  // R x J, log of the epsilon-floored majority-vote prior
};

inline TrainingData make_training_data(const ObservationMatrix& obs, double epsilon) {
  TrainingData d;
  d.n_agents = obs.n_agents();
  d.n_events = obs.n_events();
  d.n_states = obs.n_states();
  const auto N = static_cast<Eigen::Index>(obs.n_agents());
  const auto J = static_cast<Eigen::Index>(obs.n_events());
  d.agent_inputs.resize(J * obs.n_states(), N);
  for (Eigen::Index n = 0; n < N; ++n) d.agent_inputs.col(n) = onehot_row(obs, static_cast<std::size_t>(n));
  d.event_inputs.resize(N * obs.n_states(), J);
  for (Eigen::Index j = 0; j < J; ++j) d.event_inputs.col(j) = onehot_col(obs, static_cast<std::size_t>(j));
  d.pairs = observed_pairs(obs);
  d.log_prior = mv_prior(obs).transpose().cwiseMax(epsilon).array().log().matrix();
  return d;
}

inline Eigen::VectorXd encode_reliability(const mlp::DenseNet& net, const ObservationMatrix& obs, std::size_t agent) {
  return mlp::forward(net, onehot_row(obs, agent)).output.col(0);
}

inline Eigen::VectorXd encode_event(const mlp::DenseNet& net, const ObservationMatrix& obs, std::size_t event) {
  return mlp::forward(net, onehot_col(obs, event)).output.col(0);
}

struct ReliabilitySample {
  Eigen::MatrixXd o;     // D x N encoder means
  Eigen::VectorXd zeta;  // one standard normal per agent
  Eigen::MatrixXd C;     // D x N, C = o + zeta * b column-wise
};

inline ReliabilitySample reparameterize_reliability(const Eigen::MatrixXd& o, const Eigen::VectorXd& zeta, double b) {
  if (zeta.size() != o.cols()) throw Error("reliability sample: need one noise draw per agent");
  ReliabilitySample s{o, zeta, o};
  for (Eigen::Index n = 0; n < o.cols(); ++n) s.C.col(n).array() += zeta(n) * b;
  return s;
}

inline ReliabilitySample sample_reliability(const Eigen::MatrixXd& o, double b, Rng& rng) {
  if (!(b > 0.0)) throw Error("sample_reliability: b must be positive");
  Eigen::VectorXd zeta(o.cols());
  for (Eigen::Index n = 0; n < o.cols(); ++n) zeta(n) = rng.normal();
  return reparameterize_reliability(o, zeta, b);
}

struct EventSample {
  Eigen::MatrixXd u;              // R x J encoder output
  Eigen::MatrixXd chi;            // R x J Gumbel draws
  Eigen::MatrixXd theta_relaxed;  // R x J temperature-relaxed one-hot
  std::vector<int> theta_hard;    // argmax of chi + log u
};

// Gumbel-softmax relaxation softmax((chi + log u) / tau) and the matching
// Gumbel-max hard sample. u is floored at epsilon before the log.
inline EventSample relax_event(const Eigen::MatrixXd& u, const Eigen::MatrixXd& chi, double tau, double epsilon) {
  if (chi.rows() != u.rows() || chi.cols() != u.cols()) throw Error("relax_event: noise shape mismatch");
  if (!(tau > 0.0)) throw Error("relax_event: tau must be positive");
  EventSample s{u, chi, Eigen::MatrixXd(u.rows(), u.cols()), std::vector<int>(static_cast<std::size_t>(u.cols()))};
  for (Eigen::Index j = 0; j < u.cols(); ++j) {
    Eigen::VectorXd score = chi.col(j).array() + u.col(j).cwiseMax(epsilon).array().log();
    Eigen::Index best = 0;
    for (Eigen::Index r = 1; r < score.size(); ++r)
      if (score(r) > score(best)) best = r;
    s.theta_hard[static_cast<std::size_t>(j)] = static_cast<int>(best);
    Eigen::VectorXd a = score / tau;
    a.array() -= a.maxCoeff();
    a = a.array().exp();
    s.theta_relaxed.col(j) = a / a.sum();
  }
  return s;
}

inline Eigen::MatrixXd draw_gumbel(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  Eigen::MatrixXd chi(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index r = 0; r < rows; ++r) chi(r, j) = rng.gumbel();
  return chi;
}

inline EventSample sample_event(const Eigen::MatrixXd& u, double tau, double epsilon, Rng& rng) {
  return relax_event(u, draw_gumbel(u.rows(), u.cols(), rng), tau, epsilon);
}

// Decoder output for one (C_n, theta_j) pair, clamped to [eps, 1 - eps].
inline Eigen::VectorXd decode(const mlp::DenseNet& net, const Eigen::VectorXd& c, const Eigen::VectorXd& theta,
                              double epsilon) {
  Eigen::VectorXd x(c.size() + theta.size());
  x << c, theta;
  return mlp::forward(net, x).output.col(0).cwiseMax(epsilon).cwiseMin(1.0 - epsilon);
}

// Terms of the single-draw estimate of L11. value() is the cost
// -(log p(C | Ct, s) + log p(M | C, theta) - log q(C)).
struct L11Terms {
  double community_log_density = 0.0;
  double observation_log_likelihood = 0.0;
  double log_q = 0.0;

  double value() const { return -(community_log_density + observation_log_likelihood - log_q); }
};

namespace detail {

inline Eigen::MatrixXd decoder_inputs(const ObservedPairs& pairs, const Eigen::MatrixXd& C,
                                      const Eigen::MatrixXd& theta) {
  const auto D = C.rows();
  Eigen::MatrixXd x(D + theta.rows(), static_cast<Eigen::Index>(pairs.size()));
  for (Eigen::Index p = 0; p < x.cols(); ++p) {
    x.col(p).head(D) = C.col(pairs.agent[static_cast<std::size_t>(p)]);
    x.col(p).tail(theta.rows()) = theta.col(pairs.event[static_cast<std::size_t>(p)]);
  }
  return x;
}

inline double gaussian_log_density_sum(const Eigen::MatrixXd& x, const Eigen::MatrixXd& mean, double variance) {
  return -(x - mean).squaredNorm() / (2.0 * variance) -
         0.5 * static_cast<double>(x.size()) * std::log(2.0 * std::numbers::pi * variance);
}

inline Eigen::MatrixXd community_means(const Eigen::MatrixXd& ctilde, std::span<const int> s, Eigen::Index n_agents) {
  if (static_cast<Eigen::Index>(s.size()) != n_agents) throw Error("community assignments: need one per agent");
  Eigen::MatrixXd m(ctilde.rows(), n_agents);
  for (Eigen::Index n = 0; n < n_agents; ++n) {
    const int k = s[static_cast<std::size_t>(n)];
    if (k < 0 || k >= ctilde.cols()) throw Error("community assignment out of range");
    m.col(n) = ctilde.col(k);
  }
  return m;
}

inline double bernoulli_log_likelihood(const Eigen::MatrixXd& d, const Eigen::MatrixXd& y) {
  return (y.array() * d.array().log() + (1.0 - y.array()) * (1.0 - d.array()).log()).sum();
}

}  // namespace detail

// L11 for one Monte-Carlo draw. d is evaluated on the relaxed theta; only
// non-null entries of M enter the observation term.
inline L11Terms loss_L11(const mlp::DenseNet& decoder, const ObservedPairs& pairs, const ReliabilitySample& rel,
                         const Eigen::MatrixXd& theta_relaxed, const Eigen::MatrixXd& ctilde, std::span<const int> s,
                         const HyperParams& h) {
  L11Terms t;
  const auto N = rel.C.cols();
  t.community_log_density =
      detail::gaussian_log_density_sum(rel.C, detail::community_means(ctilde, s, N), h.b_prime);
  t.log_q = detail::gaussian_log_density_sum(rel.C, rel.o, h.b);
  if (pairs.size() > 0) {
    const auto cache = mlp::forward_batch(decoder, detail::decoder_inputs(pairs, rel.C, theta_relaxed));
    const Eigen::MatrixXd d = cache.output.cwiseMax(h.epsilon).cwiseMin(1.0 - h.epsilon);
    t.observation_log_likelihood = detail::bernoulli_log_likelihood(d, pairs.targets);
  }
  return t;
}

// Cost of the theta part, -(sum_j sum_r theta_j(r) (log p_MV_j(r) - log u_j(r))),
// evaluated on the relaxed sample.
inline double loss_L12(const Eigen::MatrixXd& theta_relaxed, const Eigen::MatrixXd& u, const Eigen::MatrixXd& log_prior,
                       double epsilon) {
  const Eigen::MatrixXd log_u = u.cwiseMax(epsilon).array().log().matrix();
  return -(theta_relaxed.array() * (log_prior - log_u).array()).sum();
}

// Parameter-free noise for one Monte-Carlo draw.
struct NoiseDraw {
  Eigen::VectorXd zeta;  // N
  Eigen::MatrixXd chi;   // R x J
};

inline NoiseDraw draw_noise(std::size_t n_agents, std::size_t n_events, int n_states, Rng& rng) {
  NoiseDraw z;
  z.zeta.resize(static_cast<Eigen::Index>(n_agents));
  for (Eigen::Index n = 0; n < z.zeta.size(); ++n) z.zeta(n) = rng.normal();
  z.chi = draw_gumbel(n_states, static_cast<Eigen::Index>(n_events), rng);
  return z;
}

struct AutoencoderGradients {
  mlp::Gradients reliability;
  mlp::Gradients event;
  mlp::Gradients decoder;
};

struct ObjectiveValue {
  L11Terms l11;
  double l12 = 0.0;
  double total = 0.0;  // l11.value() + l12, the quantity minimized
  ReliabilitySample reliability;
  EventSample event;
  AutoencoderGradients grads;  // empty unless requested
};

// Evaluates L11' + L12 with C and theta written as deterministic functions of
// the frozen noise and the encoder weights, and optionally its exact
// gradient with respect to all three networks.
//
// The log q(C) term is constant along the reparameterization (C - o = zeta b
// does not depend on w_R), so it contributes a value but no gradient.
inline ObjectiveValue evaluate_objective(const AutoencoderNets& nets, const TrainingData& data, const NoiseDraw& noise,
                                         const Eigen::MatrixXd& ctilde, std::span<const int> s, const HyperParams& h,
                                         bool with_gradients) {
  const double eps = h.epsilon;
  const auto rel_cache = mlp::forward_batch(nets.reliability, data.agent_inputs);
  const auto event_cache = mlp::forward_batch(nets.event, data.event_inputs);

  ObjectiveValue out;
  out.reliability = reparameterize_reliability(rel_cache.output, noise.zeta, h.b);
  out.event = relax_event(event_cache.output, noise.chi, h.tau, eps);
  const auto& C = out.reliability.C;
  const auto& u = out.event.u;
  const auto& theta = out.event.theta_relaxed;
  const auto N = C.cols();
  const auto D = C.rows();

  const Eigen::MatrixXd mean_c = detail::community_means(ctilde, s, N);
  out.l11.community_log_density = detail::gaussian_log_density_sum(C, mean_c, h.b_prime);
  out.l11.log_q = detail::gaussian_log_density_sum(C, out.reliability.o, h.b);

  const auto& pairs = data.pairs;
  mlp::ForwardCache dec_cache;
  Eigen::MatrixXd d;
  if (pairs.size() > 0) {
    dec_cache = mlp::forward_batch(nets.decoder, detail::decoder_inputs(pairs, C, theta));
    d = dec_cache.output.cwiseMax(eps).cwiseMin(1.0 - eps);
    out.l11.observation_log_likelihood = detail::bernoulli_log_likelihood(d, pairs.targets);
  }
  out.l12 = loss_L12(theta, u, data.log_prior, eps);
  out.total = out.l11.value() + out.l12;
  if (!with_gradients) return out;

  // d total / d C from the community Gaussian.
  Eigen::MatrixXd grad_c = (C - mean_c) / h.b_prime;
  // d total / d theta_relaxed from L12.
  const Eigen::MatrixXd log_u = u.cwiseMax(eps).array().log().matrix();
  Eigen::MatrixXd grad_theta = -(data.log_prior - log_u);

  if (pairs.size() > 0) {
    const auto& y = pairs.targets;
    const auto& raw = dec_cache.output;
    // Bernoulli cost derivative; zero where the clamp is active.
    Eigen::MatrixXd up(raw.rows(), raw.cols());
    for (Eigen::Index p = 0; p < raw.cols(); ++p)
      for (Eigen::Index r = 0; r < raw.rows(); ++r) {
        const double v = raw(r, p);
        up(r, p) = (v < eps || v > 1.0 - eps) ? 0.0 : (y(r, p) > 0.5 ? -1.0 / v : 1.0 / (1.0 - v));
      }
    out.grads.decoder = mlp::backward(nets.decoder, dec_cache, up);
    const auto& gin = out.grads.decoder.input;
    for (Eigen::Index p = 0; p < gin.cols(); ++p) {
      grad_c.col(pairs.agent[static_cast<std::size_t>(p)]) += gin.col(p).head(D);
      grad_theta.col(pairs.event[static_cast<std::size_t>(p)]) += gin.col(p).tail(theta.rows());
    }
  } else {
    out.grads.decoder = mlp::zero_gradients(nets.decoder);
  }

  // Through theta = softmax((chi + log u) / tau) into u.
  Eigen::MatrixXd grad_u(u.rows(), u.cols());
  for (Eigen::Index j = 0; j < u.cols(); ++j) {
    const auto th = theta.col(j);
    const double dot = th.dot(grad_theta.col(j));
    Eigen::VectorXd grad_logu = (th.array() * (grad_theta.col(j).array() - dot)).matrix() / h.tau;
    grad_logu += th;  // from the +sum theta log u term of L12
    for (Eigen::Index r = 0; r < u.rows(); ++r)
      grad_u(r, j) = u(r, j) > eps ? grad_logu(r) / u(r, j) : 0.0;
  }
  out.grads.event = mlp::backward(nets.event, event_cache, grad_u);
  // C = o + zeta b, so dC/do is the identity.
  out.grads.reliability = mlp::backward(nets.reliability, rel_cache, grad_c);
  return out;
}

// One stochastic step on w_R, w_E and w_D: fresh noise, pathwise gradient,
// Adam update. Returns the objective evaluated before the update.
inline ObjectiveValue autoencoder_step(AutoencoderNets& nets, AutoencoderOptimizer& opt, const TrainingData& data,
                                       const Eigen::MatrixXd& ctilde, std::span<const int> s, const HyperParams& h,
                                       Rng& rng, int iteration = 0) {
  const auto noise = draw_noise(data.n_agents, data.n_events, data.n_states, rng);
  auto value = evaluate_objective(nets, data, noise, ctilde, s, h, true);
  if (!std::isfinite(value.total))
    throw Error("autoencoder_step: non-finite loss at iteration " + std::to_string(iteration));
  try {
    mlp::adam_step(opt.reliability, nets.reliability, value.grads.reliability);
    mlp::adam_step(opt.event, nets.event, value.grads.event);
    mlp::adam_step(opt.decoder, nets.decoder, value.grads.decoder);
  } catch (const Error& e) {
    throw Error(std::string(e.what()) + " (iteration " + std::to_string(iteration) + ")");
  }
  return value;
}

}  // namespace art
