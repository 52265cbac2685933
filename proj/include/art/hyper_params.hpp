#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "art/error.hpp"
#include "art/rng.hpp"

namespace art {

struct LayerSizes {
  std::vector<std::size_t> reliability{256, 128, 64};
  std::vector<std::size_t> event{256, 128, 64};
  std::vector<std::size_t> decoder{64, 128, 256};
};

// All model and optimizer settings. Defaults are the synthetic-benchmark
// configuration; imdb() returns the real-data configuration.
//
// Reliability matrices are handled as column-stacked vectors of length
// D = R1 * R2, so U and V are D x K (one column per community). V holds the
// per-entry prior scale that enters the community posterior as V^-2. An
// empty U or V means "derive from the seed" (see resolve_priors).
struct HyperParams {
  double epsilon = 1e-10;
  double b = 0.01;
  double b_prime = 0.01;
  Eigen::MatrixXd U;
  Eigen::MatrixXd V;
  double V_scale = 0.01;  // fill value used when V is derived
  double tau = 1.0;
  int K = 6;
  double alpha = 1.0;
  double g0 = 1.0;
  double h0 = 1.0;
  int R1 = 5;
  int R2 = 5;
  LayerSizes layer_sizes;
  double learning_rate = 1e-4;
  int iterations = 1000;
  double rho_offset = 10.0;
  double rho_power = 0.5;
  std::uint64_t seed = 1;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  int checkpoint_every = 100;

  static HyperParams synthetic() { return {}; }

  static HyperParams imdb() {
    HyperParams h;
    h.b = 0.1;
    h.b_prime = 0.1;
    h.V_scale = 0.1;
    h.tau = 0.1;
    h.R1 = 6;
    h.R2 = 6;
    h.iterations = 3000;
    return h;
  }

  int D() const { return R1 * R2; }

  // Natural-gradient step size for 1-based iteration i.
  double rho(int i) const { return std::pow(static_cast<double>(i) + rho_offset, -rho_power); }

  std::vector<std::string> violations() const {
    std::vector<std::string> out;
    if (!(epsilon > 0.0 && epsilon < 1.0)) out.emplace_back("epsilon must lie in (0, 1)");
    if (!(b > 0.0)) out.emplace_back("b must be positive");
    if (!(b_prime > 0.0)) out.emplace_back("b_prime must be positive");
    if (!(tau > 0.0)) out.emplace_back("tau must be positive");
    if (!(alpha > 0.0)) out.emplace_back("alpha must be positive");
    if (!(g0 > 0.0) || !(h0 > 0.0)) out.emplace_back("g0 and h0 must be positive");
    if (K < 1) out.emplace_back("K must be at least 1");
    if (R1 < 1 || R2 < 1) out.emplace_back("R1 and R2 must be at least 1");
    if (!(learning_rate >= 0.0)) out.emplace_back("learning_rate must be non-negative");
    if (iterations < 0) out.emplace_back("iterations must be non-negative");
    if (U.size() != 0 && (U.rows() != D() || U.cols() != K)) out.emplace_back("U must hold K matrices of R1 x R2");
    if (V.size() != 0) {
      if (V.rows() != D() || V.cols() != K) out.emplace_back("V must hold K matrices of R1 x R2");
      else if (!(V.array() > 0.0).all()) out.emplace_back("every entry of V must be strictly positive");
    } else if (!(V_scale > 0.0)) {
      out.emplace_back("V must be strictly positive");
    }
    for (const auto* widths : {&layer_sizes.reliability, &layer_sizes.event, &layer_sizes.decoder})
      for (std::size_t w : *widths)
        if (w == 0) out.emplace_back("layer widths must be at least 1");
    return out;
  }

  void check() const {
    const auto v = violations();
    if (!v.empty()) throw Error("invalid hyperparameters: " + v.front());
  }
};

// Prior means softmax(I - Rt) with Rt entries uniform on [0.1, 0.2], one
// draw of Rt per community, softmax taken over all D entries of the matrix.
inline Eigen::MatrixXd default_prior_means(int K, int R1, int R2, Rng& rng) {
  const int D = R1 * R2;
  Eigen::MatrixXd U(D, K);
  for (int k = 0; k < K; ++k) {
    Eigen::VectorXd logits(D);
    for (int c = 0; c < R2; ++c)
      for (int r = 0; r < R1; ++r) logits(c * R1 + r) = (r == c ? 1.0 : 0.0) - rng.uniform(0.1, 0.2);
    logits.array() -= logits.maxCoeff();
    logits = logits.array().exp();
    U.col(k) = logits / logits.sum();
  }
  return U;
}

// Fills U and V when they were left empty. Uses a stream derived from the
// seed so the priors do not consume draws from the training generator.
inline HyperParams resolve_priors(HyperParams h) {
  if (h.U.size() == 0) {
    Rng prior_rng(fnv1a("prior-means", h.seed));
    h.U = default_prior_means(h.K, h.R1, h.R2, prior_rng);
  }
  if (h.V.size() == 0) h.V = Eigen::MatrixXd::Constant(h.D(), h.K, h.V_scale);
  return h;
}

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(s);
  while (std::getline(is, item, sep)) out.push_back(trim(item));
  return out;
}

inline double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw Error("config key '" + key + "': expected a number, got '" + v + "'");
  }
}

inline long long to_int(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const long long d = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw Error("config key '" + key + "': expected an integer, got '" + v + "'");
  }
}

inline std::vector<std::size_t> to_widths(const std::string& key, const std::string& v) {
  std::vector<std::size_t> out;
  for (const auto& part : split(v, ',')) {
    const auto w = to_int(key, part);
    if (w < 1) throw Error("config key '" + key + "': widths must be positive");
    out.push_back(static_cast<std::size_t>(w));
  }
  return out;
}

inline std::string join_widths(const std::vector<std::size_t>& w) {
  std::string s;
  for (std::size_t i = 0; i < w.size(); ++i) s += (i ? "," : "") + std::to_string(w[i]);
  return s;
}

// Reads K stacked R1 x R2 matrices listed row by row, matrix by matrix.
inline Eigen::MatrixXd to_stacked(const std::string& key, const std::string& v, int K, int R1, int R2) {
  const auto parts = split(v, ',');
  const auto D = static_cast<std::size_t>(R1 * R2);
  if (parts.size() != D * static_cast<std::size_t>(K))
    throw Error("config key '" + key + "': expected " + std::to_string(D * K) + " values (K*R1*R2), got " +
                std::to_string(parts.size()));
  Eigen::MatrixXd m(R1 * R2, K);
  std::size_t i = 0;
  for (int k = 0; k < K; ++k)
    for (int r = 0; r < R1; ++r)
      for (int c = 0; c < R2; ++c) m(c * R1 + r, k) = to_double(key, parts[i++]);
  return m;
}

inline std::string from_stacked(const Eigen::MatrixXd& m, int R1, int R2) {
  std::ostringstream os;
  os << std::setprecision(17);
  bool first = true;
  for (Eigen::Index k = 0; k < m.cols(); ++k)
    for (int r = 0; r < R1; ++r)
      for (int c = 0; c < R2; ++c) {
        os << (first ? "" : ",") << m(c * R1 + r, k);
        first = false;
      }
  return os.str();
}

}  // namespace detail

// Flat "key = value" config. Keys mirror the HyperParams field names;
// layer_sizes takes three width lists separated by '/', rho takes
// "offset,power" for the schedule (i + offset)^(-power), U takes "auto" or
// K*R1*R2 numbers, V takes "auto", a single positive number, or K*R1*R2
// numbers. Unknown keys are rejected.
inline HyperParams parse_hyper_params(const std::string& text, HyperParams base = {}) {
  std::map<std::string, std::string> kv;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error("config line " + std::to_string(lineno) + ": expected key = value");
    kv[detail::trim(line.substr(0, eq))] = detail::trim(line.substr(eq + 1));
  }

  HyperParams h = std::move(base);
  auto take = [&](const char* key) -> const std::string* {
    auto it = kv.find(key);
    return it == kv.end() ? nullptr : &it->second;
  };
  // Dimensions first: U and V depend on them.
  if (auto v = take("K")) h.K = static_cast<int>(detail::to_int("K", *v));
  if (auto v = take("R1")) h.R1 = static_cast<int>(detail::to_int("R1", *v));
  if (auto v = take("R2")) h.R2 = static_cast<int>(detail::to_int("R2", *v));

  for (const auto& [key, value] : kv) {
    if (key == "K" || key == "R1" || key == "R2") continue;
    if (key == "epsilon") h.epsilon = detail::to_double(key, value);
    else if (key == "b") h.b = detail::to_double(key, value);
    else if (key == "b_prime") h.b_prime = detail::to_double(key, value);
    else if (key == "tau") h.tau = detail::to_double(key, value);
    else if (key == "alpha") h.alpha = detail::to_double(key, value);
    else if (key == "g0") h.g0 = detail::to_double(key, value);
    else if (key == "h0") h.h0 = detail::to_double(key, value);
    else if (key == "learning_rate") h.learning_rate = detail::to_double(key, value);
    else if (key == "iterations") h.iterations = static_cast<int>(detail::to_int(key, value));
    else if (key == "seed") h.seed = static_cast<std::uint64_t>(detail::to_int(key, value));
    else if (key == "adam_beta1") h.adam_beta1 = detail::to_double(key, value);
    else if (key == "adam_beta2") h.adam_beta2 = detail::to_double(key, value);
    else if (key == "adam_epsilon") h.adam_epsilon = detail::to_double(key, value);
    else if (key == "checkpoint_every") h.checkpoint_every = static_cast<int>(detail::to_int(key, value));
    else if (key == "rho") {
      const auto parts = detail::split(value, ',');
      if (parts.size() != 2) throw Error("config key 'rho': expected 'offset,power'");
      h.rho_offset = detail::to_double(key, parts[0]);
      h.rho_power = detail::to_double(key, parts[1]);
    } else if (key == "layer_sizes") {
      const auto groups = detail::split(value, '/');
      if (groups.size() != 3) throw Error("config key 'layer_sizes': expected three '/'-separated width lists");
      h.layer_sizes.reliability = detail::to_widths(key, groups[0]);
      h.layer_sizes.event = detail::to_widths(key, groups[1]);
      h.layer_sizes.decoder = detail::to_widths(key, groups[2]);
    } else if (key == "U") {
      h.U = value == "auto" ? Eigen::MatrixXd() : detail::to_stacked(key, value, h.K, h.R1, h.R2);
    } else if (key == "V") {
      if (value == "auto") {
        h.V = Eigen::MatrixXd();
      } else if (value.find(',') == std::string::npos) {
        h.V = Eigen::MatrixXd();
        h.V_scale = detail::to_double(key, value);
      } else {
        h.V = detail::to_stacked(key, value, h.K, h.R1, h.R2);
      }
    } else {
      throw Error("unknown config key '" + key + "'");
    }
  }
  h.check();
  return h;
}

inline HyperParams load_hyper_params(const std::string& path, HyperParams base = {}) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_hyper_params(ss.str(), std::move(base));
}

inline std::string to_config_string(const HyperParams& h) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "epsilon = " << h.epsilon << "\n"
     << "b = " << h.b << "\n"
     << "b_prime = " << h.b_prime << "\n"
     << "tau = " << h.tau << "\n"
     << "K = " << h.K << "\n"
     << "alpha = " << h.alpha << "\n"
     << "g0 = " << h.g0 << "\n"
     << "h0 = " << h.h0 << "\n"
     << "R1 = " << h.R1 << "\n"
     << "R2 = " << h.R2 << "\n"
     << "layer_sizes = " << detail::join_widths(h.layer_sizes.reliability) << " / "
     << detail::join_widths(h.layer_sizes.event) << " / " << detail::join_widths(h.layer_sizes.decoder) << "\n"
     << "learning_rate = " << h.learning_rate << "\n"
     << "iterations = " << h.iterations << "\n"
     << "rho = " << h.rho_offset << "," << h.rho_power << "\n"
     << "seed = " << h.seed << "\n"
     << "adam_beta1 = " << h.adam_beta1 << "\n"
     << "adam_beta2 = " << h.adam_beta2 << "\n"
     << "adam_epsilon = " << h.adam_epsilon << "\n"
     << "checkpoint_every = " << h.checkpoint_every << "\n";
  os << "U = " << (h.U.size() ? detail::from_stacked(h.U, h.R1, h.R2) : std::string("auto")) << "\n";
  if (h.V.size())
    os << "V = " << detail::from_stacked(h.V, h.R1, h.R2) << "\n";
  else
    os << "V = " << h.V_scale << "\n";
  return os.str();
}

}  // namespace art
