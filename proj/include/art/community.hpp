#pragma once

#include <Eigen/Dense>
#include <boost/math/special_functions/digamma.hpp>

#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <tuple>
#include <utility>
#include <vector>

#include "art/core_model.hpp"
#include "art/error.hpp"
#include "art/rng.hpp"

// Variational updates for the community side of the model: the edge
// parameters beta (Beta), pair memberships z (phi), community indices s
// (psi), community reliability matrices Ct (Gaussian) and mixture weights
// pi (Dirichlet, gamma).
namespace art::community {

inline double digamma(double x) { return boost::math::digamma(x); }

// Normalizes exp(logits) with max subtraction.
inline Eigen::VectorXd normalize_log(const Eigen::VectorXd& logits) {
  Eigen::VectorXd p = (logits.array() - logits.maxCoeff()).exp();
  return p / p.sum();
}

struct BetaParams {
  Eigen::VectorXd G;
  Eigen::VectorXd H;

  bool operator==(const BetaParams&) const = default;
};

// phi_{n->m} for every ordered pair n != m, stored densely (N * N * K; the
// diagonal is unused and kept at zero).
class MembershipField {
 public:
  MembershipField() = default;
  MembershipField(std::size_t n_agents, int K, double fill)
      : n_(n_agents), k_(K), data_(n_agents * n_agents * static_cast<std::size_t>(K), fill) {
    for (std::size_t n = 0; n < n_; ++n) row(n, n).setZero();
  }

  static MembershipField uniform(std::size_t n_agents, int K) { return {n_agents, K, 1.0 / K}; }

  std::size_t n_agents() const { return n_; }
  int K() const { return k_; }

  Eigen::Map<Eigen::VectorXd> row(std::size_t n, std::size_t m) {
    return Eigen::Map<Eigen::VectorXd>(data_.data() + (n * n_ + m) * static_cast<std::size_t>(k_), k_);
  }
  Eigen::Map<const Eigen::VectorXd> row(std::size_t n, std::size_t m) const {
    return Eigen::Map<const Eigen::VectorXd>(data_.data() + (n * n_ + m) * static_cast<std::size_t>(k_), k_);
  }

  // sum_{m != n} phi_{n->m}
  Eigen::VectorXd outgoing_sum(std::size_t n) const {
    Eigen::VectorXd s = Eigen::VectorXd::Zero(k_);
    for (std::size_t m = 0; m < n_; ++m)
      if (m != n) s += row(n, m);
    return s;
  }

  // N*N x K view, row index n*N + m.
  Eigen::MatrixXd as_matrix() const {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(n_ * n_), k_);
    for (std::size_t i = 0; i < n_ * n_; ++i)
      for (int k = 0; k < k_; ++k) out(static_cast<Eigen::Index>(i), k) = data_[i * static_cast<std::size_t>(k_) + k];
    return out;
  }

  static MembershipField from_matrix(const Eigen::MatrixXd& m, std::size_t n_agents) {
    if (m.rows() != static_cast<Eigen::Index>(n_agents * n_agents)) throw Error("membership field: shape mismatch");
    MembershipField f(n_agents, static_cast<int>(m.cols()), 0.0);
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index k = 0; k < m.cols(); ++k) f.data_[static_cast<std::size_t>(i * m.cols() + k)] = m(i, k);
    return f;
  }

  bool operator==(const MembershipField&) const = default;

 private:
  std::size_t n_ = 0;
  int k_ = 0;
  std::vector<double> data_;
};

// G_k = g0 + sum_{n<m} A(n,m) phi_{n->m,k} phi_{m->n,k}, H_k likewise with
// 1 - A(n,m); each unordered pair is counted once.
inline BetaParams update_beta(const MembershipField& phi, const SocialGraph& graph, double g0, double h0) {
  const int K = phi.K();
  BetaParams p{Eigen::VectorXd::Constant(K, g0), Eigen::VectorXd::Constant(K, h0)};
  for (std::size_t n = 0; n < phi.n_agents(); ++n)
    for (std::size_t m = n + 1; m < phi.n_agents(); ++m) {
      const Eigen::VectorXd prod = phi.row(n, m).cwiseProduct(phi.row(m, n));
      if (graph.connected(n, m))
        p.G += prod;
      else
        p.H += prod;
    }
  return p;
}

// (E[log beta_k], E[log(1 - beta_k)]) under Beta(G_k, H_k).
inline std::pair<double, double> expected_log_beta(const BetaParams& params, int k) {
  const double G = params.G(k);
  const double H = params.H(k);
  if (!(G > 0.0) || !(H > 0.0)) throw Error("expected_log_beta: parameters must be positive");
  const double total = digamma(G + H);
  return {digamma(G) - total, digamma(H) - total};
}

struct ExpectedLogBeta {
  Eigen::VectorXd log_beta;
  Eigen::VectorXd log_one_minus_beta;
};

inline ExpectedLogBeta expected_log_beta(const BetaParams& params) {
  const auto K = static_cast<int>(params.G.size());
  ExpectedLogBeta e{Eigen::VectorXd(K), Eigen::VectorXd(K)};
  for (int k = 0; k < K; ++k) std::tie(e.log_beta(k), e.log_one_minus_beta(k)) = expected_log_beta(params, k);
  return e;
}

// Coordinate update of phi_{n->m} given the reverse membership phi_{m->n}.
// Connected pairs compare E[log beta] against the cross-community rate
// epsilon; unconnected pairs compare E[log(1 - beta)] against 1 - epsilon.
inline Eigen::VectorXd update_phi_pair(bool connected, const Eigen::VectorXd& phi_rev, const ExpectedLogBeta& elog_beta,
                                       const Eigen::VectorXd& elog_pi_n, double epsilon) {
  const Eigen::VectorXd coupling = connected ? (elog_beta.log_beta.array() - std::log(epsilon)).matrix()
                                             : (elog_beta.log_one_minus_beta.array() - std::log1p(-epsilon)).matrix();
  return normalize_log(phi_rev.cwiseProduct(coupling) + elog_pi_n);
}

// E[log pi_{n,k}] = psi(gamma_{n,k}) - psi(sum_k gamma_{n,k}).
inline double expected_log_pi(const Eigen::MatrixXd& gamma, Eigen::Index n, Eigen::Index k) {
  if (!(gamma.row(n).array() > 0.0).all()) throw Error("expected_log_pi: gamma must be positive");
  return digamma(gamma(n, k)) - digamma(gamma.row(n).sum());
}

inline Eigen::VectorXd expected_log_pi_row(const Eigen::MatrixXd& gamma, Eigen::Index n) {
  if (!(gamma.row(n).array() > 0.0).all()) throw Error("expected_log_pi: gamma must be positive");
  const double total = digamma(gamma.row(n).sum());
  Eigen::VectorXd out(gamma.cols());
  for (Eigen::Index k = 0; k < gamma.cols(); ++k) out(k) = digamma(gamma(n, k)) - total;
  return out;
}

// Xi_{n,k} = -sum_entries E_q[log N(C_n; Ct_k, b')] - E[log pi_{n,k}], with
// E_q[log N(c; Ct, b')] = -(sigma^2 + (mu - c)^2) / (2 b') - log(2 pi b') / 2.
inline Eigen::VectorXd community_energy(const Eigen::VectorXd& c, const Eigen::MatrixXd& mu_tilde,
                                        const Eigen::MatrixXd& sigma_tilde, const Eigen::VectorXd& elog_pi,
                                        double b_prime) {
  const auto K = mu_tilde.cols();
  const double log_norm = 0.5 * static_cast<double>(c.size()) * std::log(2.0 * std::numbers::pi * b_prime);
  Eigen::VectorXd xi(K);
  for (Eigen::Index k = 0; k < K; ++k) {
    const double quad =
        (sigma_tilde.col(k).array().square() + (mu_tilde.col(k) - c).array().square()).sum() / (2.0 * b_prime);
    xi(k) = quad + log_norm - elog_pi(k);
  }
  return xi;
}

// psi_n <- psi_n^{prev} * exp(-rho Xi_n), renormalized (log domain).
inline Eigen::VectorXd update_psi_row(const Eigen::VectorXd& psi_prev, const Eigen::VectorXd& c,
                                      const Eigen::MatrixXd& mu_tilde, const Eigen::MatrixXd& sigma_tilde,
                                      const Eigen::VectorXd& elog_pi, double b_prime, double rho) {
  const Eigen::VectorXd xi = community_energy(c, mu_tilde, sigma_tilde, elog_pi, b_prime);
  Eigen::VectorXd logits(psi_prev.size());
  for (Eigen::Index k = 0; k < psi_prev.size(); ++k)
    logits(k) = (psi_prev(k) > 0.0 ? std::log(psi_prev(k)) : -std::numeric_limits<double>::infinity()) - rho * xi(k);
  if (!std::isfinite(logits.maxCoeff())) throw Error("update_psi: previous row has no positive mass");
  return normalize_log(logits);
}

// Full-matrix form: psi_prev is N x K, C is D x N, elog_pi is N x K.
inline Eigen::MatrixXd update_psi(const Eigen::MatrixXd& psi_prev, const Eigen::MatrixXd& C,
                                  const Eigen::MatrixXd& mu_tilde, const Eigen::MatrixXd& sigma_tilde,
                                  const Eigen::MatrixXd& elog_pi, double b_prime, double rho) {
  if (!(rho >= 0.0 && rho <= 1.0)) throw Error("update_psi: rho must lie in [0, 1]");
  Eigen::MatrixXd psi(psi_prev.rows(), psi_prev.cols());
  for (Eigen::Index n = 0; n < psi.rows(); ++n)
    psi.row(n) = update_psi_row(psi_prev.row(n).transpose(), C.col(n), mu_tilde, sigma_tilde,
                                elog_pi.row(n).transpose(), b_prime, rho)
                     .transpose();
  return psi;
}

// Community reliability posterior, stored per entry as mean and standard
// deviation (D x K each), plus the current sample.
struct CommunityReliability {
  Eigen::MatrixXd mu_tilde;
  Eigen::MatrixXd sigma_tilde;
  Eigen::MatrixXd ctilde_sample;

  // Natural parameters mu / sigma^2 and -1 / (2 sigma^2).
  Eigen::MatrixXd natural_mean() const { return mu_tilde.array() / sigma_tilde.array().square(); }
  Eigen::MatrixXd natural_precision() const { return -0.5 / sigma_tilde.array().square(); }

  bool operator==(const CommunityReliability&) const = default;
};

// Natural-gradient step of size rho toward the conditional posterior of Ct_k
// given the current C samples and soft assignments psi:
//   precision  V^-2 + (1/b') sum_n psi_{n,k}
//   mean*prec  U / V^2 + (1/b') sum_n psi_{n,k} C_n
inline CommunityReliability update_ctilde(const CommunityReliability& current, const Eigen::MatrixXd& C,
                                          const Eigen::MatrixXd& psi, const Eigen::MatrixXd& U,
                                          const Eigen::MatrixXd& V, double b_prime, double rho) {
  const Eigen::MatrixXd mu_hat = current.natural_mean();
  const Eigen::MatrixXd sigma_hat = current.natural_precision();
  if (!mu_hat.allFinite() || !(sigma_hat.array() < 0.0).all())
    throw Error("update_ctilde: natural parameters must be finite with negative precision term");

  const Eigen::MatrixXd v_inv2 = V.array().square().inverse();
  const Eigen::MatrixXd weighted = C * psi / b_prime;                                     // D x K
  const Eigen::RowVectorXd mass = psi.colwise().sum() / b_prime;                          // K
  const Eigen::MatrixXd target_mu = (U.array() * v_inv2.array()).matrix() + weighted;    // D x K
  const Eigen::MatrixXd target_sigma = -0.5 * (v_inv2.rowwise() + mass);                 // D x K

  const Eigen::MatrixXd new_mu_hat = mu_hat - rho * (mu_hat - target_mu);
  const Eigen::MatrixXd new_sigma_hat = sigma_hat - rho * (sigma_hat - target_sigma);
  if (!(new_sigma_hat.array() < 0.0).all()) throw Error("update_ctilde: non-positive variance after step");

  CommunityReliability out;
  const Eigen::MatrixXd var = -0.5 / new_sigma_hat.array();
  out.sigma_tilde = var.array().sqrt();
  out.mu_tilde = new_mu_hat.cwiseProduct(var);
  out.ctilde_sample = current.ctilde_sample;
  return out;
}

// gamma_{n,k} = alpha/K + sum_{m != n} phi_{n->m,k} + sum_i psi_{i,k}.
inline Eigen::VectorXd update_gamma_row(const MembershipField& phi, const Eigen::MatrixXd& psi, double alpha,
                                        std::size_t n) {
  const int K = phi.K();
  return Eigen::VectorXd::Constant(K, alpha / K) + phi.outgoing_sum(n) + psi.colwise().sum().transpose();
}

inline Eigen::MatrixXd update_gamma(const MembershipField& phi, const Eigen::MatrixXd& psi, double alpha) {
  Eigen::MatrixXd gamma(static_cast<Eigen::Index>(phi.n_agents()), phi.K());
  for (std::size_t n = 0; n < phi.n_agents(); ++n)
    gamma.row(static_cast<Eigen::Index>(n)) = update_gamma_row(phi, psi, alpha, n).transpose();
  return gamma;
}

inline int sample_assignment(const Eigen::VectorXd& psi_row, Rng& rng) {
  return static_cast<int>(rng.categorical(std::span<const double>(psi_row.data(), static_cast<std::size_t>(psi_row.size()))));
}

inline std::vector<int> sample_assignments(const Eigen::MatrixXd& psi, Rng& rng) {
  std::vector<int> s(static_cast<std::size_t>(psi.rows()));
  for (Eigen::Index n = 0; n < psi.rows(); ++n) s[static_cast<std::size_t>(n)] = sample_assignment(psi.row(n).transpose(), rng);
  return s;
}

inline Eigen::MatrixXd sample_ctilde(const Eigen::MatrixXd& mu_tilde, const Eigen::MatrixXd& sigma_tilde, Rng& rng) {
  Eigen::MatrixXd out(mu_tilde.rows(), mu_tilde.cols());
  for (Eigen::Index k = 0; k < out.cols(); ++k)
    for (Eigen::Index i = 0; i < out.rows(); ++i) out(i, k) = mu_tilde(i, k) + sigma_tilde(i, k) * rng.normal();
  return out;
}

}  // namespace art::community
