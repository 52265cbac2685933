#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <climits>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "art/error.hpp"

// Shared data model: agent opinions, the social graph, truth estimates and
// the majority-vote prior. Indices are 0-based here; the CSV layer converts
// to and from the 1-based external convention.
namespace art {

inline constexpr int kNull = INT_MIN;

struct Observation {
  std::size_t agent;
  std::size_t event;
  int state;
};

// N x J opinion matrix with explicit nulls. Stored states are not range
// checked on construction so that validate() can report bad input files.
class ObservationMatrix {
 public:
  ObservationMatrix() = default;

  ObservationMatrix(std::size_t n_agents, std::size_t n_events, int n_states,
                    const std::vector<Observation>& entries = {})
      : n_agents_(n_agents), n_events_(n_events), n_states_(n_states), cells_(n_agents * n_events, kNull) {
    for (const auto& e : entries) {
      if (e.agent >= n_agents_ || e.event >= n_events_)
        throw Error("observation (" + std::to_string(e.agent + 1) + ", " + std::to_string(e.event + 1) +
                    ") outside the " + std::to_string(n_agents_) + "x" + std::to_string(n_events_) + " matrix");
      if (e.state == kNull) continue;
      auto& cell = cells_[e.agent * n_events_ + e.event];
      if (cell != kNull)
        throw Error("duplicate observation for agent " + std::to_string(e.agent + 1) + ", event " +
                    std::to_string(e.event + 1));
      cell = e.state;
    }
  }

  std::size_t n_agents() const { return n_agents_; }
  std::size_t n_events() const { return n_events_; }
  int n_states() const { return n_states_; }

  // Raw cell value, kNull when unobserved.
  int raw(std::size_t agent, std::size_t event) const { return cells_[agent * n_events_ + event]; }

  std::optional<int> at(std::size_t agent, std::size_t event) const {
    const int v = raw(agent, event);
    if (v == kNull) return std::nullopt;
    return v;
  }

  bool observed(std::size_t agent, std::size_t event) const { return raw(agent, event) != kNull; }

  // Non-null entries in (agent, event) row-major order.
  std::vector<Observation> entries() const {
    std::vector<Observation> out;
    for (std::size_t n = 0; n < n_agents_; ++n)
      for (std::size_t j = 0; j < n_events_; ++j)
        if (int v = raw(n, j); v != kNull) out.push_back({n, j, v});
    return out;
  }

  std::size_t n_observed() const {
    return static_cast<std::size_t>(std::count_if(cells_.begin(), cells_.end(), [](int v) { return v != kNull; }));
  }

  std::size_t observers_of(std::size_t event) const {
    std::size_t c = 0;
    for (std::size_t n = 0; n < n_agents_; ++n) c += observed(n, event) ? 1 : 0;
    return c;
  }

  std::size_t events_of(std::size_t agent) const {
    std::size_t c = 0;
    for (std::size_t j = 0; j < n_events_; ++j) c += observed(agent, j) ? 1 : 0;
    return c;
  }

  bool operator==(const ObservationMatrix&) const = default;

 private:
  std::size_t n_agents_ = 0;
  std::size_t n_events_ = 0;
  int n_states_ = 0;
  std::vector<int> cells_;
};

// Undirected, unweighted graph. Edges are kept as given (normalized to
// u <= v, deduplicated) so validate() can flag self-loops and bad endpoints;
// only well-formed edges enter the adjacency lookup.
class SocialGraph {
 public:
  using Edge = std::pair<std::size_t, std::size_t>;

  SocialGraph() = default;

  SocialGraph(std::size_t n_agents, std::vector<Edge> edges) : n_agents_(n_agents), adjacency_(n_agents * n_agents, 0) {
    for (auto& [u, v] : edges)
      if (u > v) std::swap(u, v);
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    edges_ = std::move(edges);
    for (const auto& [u, v] : edges_) {
      if (u == v || v >= n_agents_) continue;
      adjacency_[u * n_agents_ + v] = 1;
      adjacency_[v * n_agents_ + u] = 1;
    }
  }

  std::size_t n_agents() const { return n_agents_; }
  const std::vector<Edge>& edges() const { return edges_; }
  std::size_t n_edges() const { return edges_.size(); }

  bool connected(std::size_t n, std::size_t m) const { return adjacency_[n * n_agents_ + m] != 0; }

  bool operator==(const SocialGraph&) const = default;

 private:
  std::size_t n_agents_ = 0;
  std::vector<Edge> edges_;
  std::vector<unsigned char> adjacency_;
};

// Per-event state estimate with a confidence distribution over states.
struct TruthEstimate {
  std::vector<int> states;     // 0-based state per event
  Eigen::MatrixXd confidence;  // J x R, rows on the simplex

  // Builds an estimate whose states are the row-wise argmax, ties to the
  // lowest index.
  static TruthEstimate from_confidence(Eigen::MatrixXd confidence) {
    TruthEstimate est;
    est.states.resize(static_cast<std::size_t>(confidence.rows()));
    for (Eigen::Index j = 0; j < confidence.rows(); ++j) {
      Eigen::Index best = 0;
      for (Eigen::Index r = 1; r < confidence.cols(); ++r)
        if (confidence(j, r) > confidence(j, best)) best = r;
      est.states[static_cast<std::size_t>(j)] = static_cast<int>(best);
    }
    est.confidence = std::move(confidence);
    return est;
  }
};

enum class ViolationKind {
  kDimensionMismatch,
  kStateOutOfRange,
  kUnobservedEvent,
  kSelfLoop,
  kEndpointOutOfRange,
  kBadShape,
  kIdleAgent,
};

struct Violation {
  ViolationKind kind;
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;
  // Non-fatal findings (agents that observe nothing).
  std::vector<Violation> warnings;

  bool ok() const { return violations.empty(); }
  bool has(ViolationKind kind) const {
    return std::any_of(violations.begin(), violations.end(), [kind](const Violation& v) { return v.kind == kind; });
  }
  bool warns(ViolationKind kind) const {
    return std::any_of(warnings.begin(), warnings.end(), [kind](const Violation& v) { return v.kind == kind; });
  }
};

inline ValidationReport validate(const ObservationMatrix& obs, const SocialGraph& graph) {
  ValidationReport report;
  auto add = [&](ViolationKind k, std::string msg) { report.violations.push_back({k, std::move(msg)}); };

  if (obs.n_agents() < 1 || obs.n_events() < 1 || obs.n_states() < 2)
    add(ViolationKind::kBadShape, "need N >= 1, J >= 1, R >= 2 (got N=" + std::to_string(obs.n_agents()) +
                                      ", J=" + std::to_string(obs.n_events()) +
                                      ", R=" + std::to_string(obs.n_states()) + ")");
  if (graph.n_agents() != obs.n_agents())
    add(ViolationKind::kDimensionMismatch, "dimension mismatch: graph has " + std::to_string(graph.n_agents()) +
                                               " agents, observations have " + std::to_string(obs.n_agents()));

  for (const auto& e : obs.entries())
    if (e.state < 0 || e.state >= obs.n_states())
      add(ViolationKind::kStateOutOfRange, "state out of range: agent " + std::to_string(e.agent + 1) + ", event " +
                                               std::to_string(e.event + 1) + " has state " +
                                               std::to_string(e.state + 1));

  for (std::size_t j = 0; j < obs.n_events(); ++j)
    if (obs.observers_of(j) == 0) add(ViolationKind::kUnobservedEvent, "unobserved event " + std::to_string(j + 1));

  for (const auto& [u, v] : graph.edges()) {
    if (u == v) add(ViolationKind::kSelfLoop, "self-loop at agent " + std::to_string(u + 1));
    if (v >= graph.n_agents())
      add(ViolationKind::kEndpointOutOfRange,
          "edge endpoint out of range: (" + std::to_string(u + 1) + ", " + std::to_string(v + 1) + ")");
  }

  for (std::size_t n = 0; n < obs.n_agents(); ++n)
    if (obs.events_of(n) == 0)
      report.warnings.push_back({ViolationKind::kIdleAgent, "agent " + std::to_string(n + 1) + " observes no events"});
  return report;
}

// Majority-vote prior: row j holds the fraction of event j's observers that
// reported each state.
inline Eigen::MatrixXd mv_prior(const ObservationMatrix& obs) {
  const auto J = static_cast<Eigen::Index>(obs.n_events());
  Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(J, obs.n_states());
  for (const auto& e : obs.entries()) {
    if (e.state < 0 || e.state >= obs.n_states()) throw Error("mv_prior: state out of range");
    counts(static_cast<Eigen::Index>(e.event), e.state) += 1.0;
  }
  for (Eigen::Index j = 0; j < J; ++j) {
    const double total = counts.row(j).sum();
    if (total == 0.0) throw Error("mv_prior: event " + std::to_string(j + 1) + " has no observers");
    counts.row(j) /= total;
  }
  return counts;
}

// One-hot encoding of M(agent, .): J blocks of R, null -> zero block.
inline Eigen::VectorXd onehot_row(const ObservationMatrix& obs, std::size_t agent) {
  const int R = obs.n_states();
  Eigen::VectorXd x = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(obs.n_events()) * R);
  for (std::size_t j = 0; j < obs.n_events(); ++j)
    if (int v = obs.raw(agent, j); v != kNull) {
      if (v < 0 || v >= R) throw Error("onehot_row: state out of range");
      x(static_cast<Eigen::Index>(j) * R + v) = 1.0;
    }
  return x;
}

// One-hot encoding of M(., event): N blocks of R, null -> zero block.
inline Eigen::VectorXd onehot_col(const ObservationMatrix& obs, std::size_t event) {
  const int R = obs.n_states();
  Eigen::VectorXd x = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(obs.n_agents()) * R);
  for (std::size_t n = 0; n < obs.n_agents(); ++n)
    if (int v = obs.raw(n, event); v != kNull) {
      if (v < 0 || v >= R) throw Error("onehot_col: state out of range");
      x(static_cast<Eigen::Index>(n) * R + v) = 1.0;
    }
  return x;
}

}  // namespace art
