#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "art/baselines.hpp"
#include "art/core_model.hpp"
#include "art/datagen.hpp"
#include "art/engine.hpp"
#include "art/error.hpp"
#include "art/hyper_params.hpp"
#include "art/io.hpp"
#include "art/rng.hpp"

namespace art::harness {

inline double accuracy(const std::vector<int>& states, const std::vector<int>& truths) {
  if (states.size() != truths.size())
    throw Error("accuracy: " + std::to_string(states.size()) + " estimates for " + std::to_string(truths.size()) +
                " truths");
  if (truths.empty()) throw Error("accuracy: no events");
  std::size_t hits = 0;
  for (std::size_t j = 0; j < truths.size(); ++j) hits += states[j] == truths[j];
  return static_cast<double>(hits) / static_cast<double>(truths.size());
}

inline double accuracy(const TruthEstimate& est, const std::vector<int>& truths) { return accuracy(est.states, truths); }

// Tuning subset: the first `count` events (all observers kept).
struct ValidationSplit {
  ObservationMatrix obs;
  std::vector<int> truths;
};

inline ValidationSplit validation_split(const ObservationMatrix& obs, const std::vector<int>& truths,
                                        std::size_t count = 30) {
  count = std::min(count, obs.n_events());
  std::vector<Observation> kept;
  for (const auto& e : obs.entries())
    if (e.event < count) kept.push_back(e);
  return {ObservationMatrix(obs.n_agents(), count, obs.n_states(), kept),
          std::vector<int>(truths.begin(), truths.begin() + static_cast<std::ptrdiff_t>(count))};
}

enum class Mode { kSynthetic, kFile };

struct ExperimentConfig {
  Mode mode = Mode::kSynthetic;
  std::filesystem::path observations;
  std::filesystem::path graph;
  std::filesystem::path truths;
  std::string hyper_overrides;  // key = value lines for HyperParams
  HyperParams hyper_base = HyperParams::synthetic();
  datagen::SyntheticSpec spec = datagen::default_spec();
  std::vector<double> sparsities{0.6};
  std::vector<double> densities{1.0};
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  std::vector<std::string> methods{"art", "mv"};
  std::filesystem::path output;

  std::vector<std::string> violations() const {
    std::vector<std::string> out;
    if (seeds.empty()) out.push_back("at least one seed is required");
    if (sparsities.empty() || densities.empty()) out.push_back("sweep axes must not be empty");
    for (double s : sparsities)
      if (!(s >= 0.0 && s < 1.0)) out.push_back("sparsity values must lie in [0, 1)");
    for (double d : densities)
      if (!(d > 0.0 && d <= 1.0)) out.push_back("density values must lie in (0, 1]");
    if (methods.empty()) out.push_back("at least one method is required");
    for (const auto& m : methods)
      if (m != "art" && m != "mv") out.push_back("unknown method '" + m + "'");
    if (mode == Mode::kFile && (observations.empty() || graph.empty() || truths.empty()))
      out.push_back("file mode needs observations, graph and truths paths");
    return out;
  }

  void check() const {
    const auto v = violations();
    if (!v.empty()) throw Error("experiment config: " + v.front());
  }
};

namespace detail {

inline std::vector<double> to_doubles(const std::string& key, const std::string& v) {
  std::vector<double> out;
  for (const auto& part : art::detail::split(v, ',')) out.push_back(art::detail::to_double(key, part));
  return out;
}

// "1,2,7" or ranges such as "1-5".
inline std::vector<std::uint64_t> to_seeds(const std::string& v) {
  std::vector<std::uint64_t> out;
  for (const auto& part : art::detail::split(v, ',')) {
    const auto dash = part.find('-', 1);
    if (dash == std::string::npos) {
      out.push_back(static_cast<std::uint64_t>(art::detail::to_int("seeds", part)));
      continue;
    }
    const auto lo = art::detail::to_int("seeds", art::detail::trim(part.substr(0, dash)));
    const auto hi = art::detail::to_int("seeds", art::detail::trim(part.substr(dash + 1)));
    if (hi < lo) throw Error("config key 'seeds': empty range '" + part + "'");
    for (auto s = lo; s <= hi; ++s) out.push_back(static_cast<std::uint64_t>(s));
  }
  return out;
}

inline std::string format_double(double x) {
  std::ostringstream os;
  os.precision(17);
  os << x;
  return os.str();
}

}  // namespace detail

// Experiment keys: mode, observations, graph, truths, sparsity, density,
// seeds, methods, output, beta_gen, epsilon_gen, noise_std. Any other key is
// passed through to the hyperparameter parser.
inline ExperimentConfig parse_experiment_config(const std::string& text, ExperimentConfig base = {}) {
  ExperimentConfig c = std::move(base);
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  std::string hyper;
  while (std::getline(is, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = art::detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error("config line " + std::to_string(lineno) + ": expected key = value");
    const auto key = art::detail::trim(line.substr(0, eq));
    const auto value = art::detail::trim(line.substr(eq + 1));
    if (key == "mode") {
      if (value == "synthetic") c.mode = Mode::kSynthetic;
      else if (value == "file") c.mode = Mode::kFile;
      else throw Error("config key 'mode': expected synthetic or file");
    } else if (key == "observations") c.observations = value;
    else if (key == "graph") c.graph = value;
    else if (key == "truths") c.truths = value;
    else if (key == "output") c.output = value;
    else if (key == "sparsity") c.sparsities = detail::to_doubles(key, value);
    else if (key == "density") c.densities = detail::to_doubles(key, value);
    else if (key == "seeds") c.seeds = detail::to_seeds(value);
    else if (key == "methods") {
      c.methods.clear();
      for (const auto& m : art::detail::split(value, ',')) c.methods.push_back(art::detail::trim(m));
    } else if (key == "beta_gen") c.spec.beta_gen = art::detail::to_double(key, value);
    else if (key == "epsilon_gen") c.spec.epsilon = art::detail::to_double(key, value);
    else if (key == "noise_std") c.spec.confusion_noise_std = art::detail::to_double(key, value);
    else hyper += key + " = " + value + "\n";
  }
  c.hyper_overrides += hyper;
  parse_hyper_params(c.hyper_overrides, c.hyper_base);  // reject bad keys early
  c.check();
  return c;
}

inline ExperimentConfig load_experiment_config(const std::filesystem::path& path, ExperimentConfig base = {}) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_experiment_config(ss.str(), std::move(base));
}

struct ResultRow {
  std::string method;
  double sparsity = 0.0;
  double density = 1.0;
  std::uint64_t seed = 0;
  double accuracy = std::numeric_limits<double>::quiet_NaN();
  double wall_time_s = 0.0;
  std::string error;  // empty on success

  bool failed() const { return !error.empty() || std::isnan(accuracy); }
};

using ResultTable = std::vector<ResultRow>;

// Seeds of each stage of a cell. Each is a hash of the values that define
// it, so a cell can be recomputed alone.
struct CellSeeds {
  std::uint64_t dataset;
  std::uint64_t mask;
  std::uint64_t thinning;
  std::uint64_t fit;
};

inline CellSeeds cell_seeds(std::uint64_t seed, double sparsity, double density, const std::string& method) {
  const auto s = std::to_string(seed);
  const auto sp = detail::format_double(sparsity);
  const auto de = detail::format_double(density);
  return {fnv1a("dataset|" + s), fnv1a("mask|" + s + "|" + sp), fnv1a("thin|" + s + "|" + de),
          fnv1a("fit|" + method + "|" + s + "|" + sp + "|" + de)};
}

struct CellData {
  ObservationMatrix obs;
  SocialGraph graph;
  std::vector<int> truths;
  std::vector<int> communities;  // synthetic mode only
};

struct SweepHooks {
  std::function<void(const ResultRow&)> on_row;
  // Observes each ART fit (for example to record diagnostics).
  std::function<void(const ResultRow&, const FitResult&)> on_fit;
};

inline CellData prepare_cell(const ExperimentConfig& config, std::uint64_t seed, double sparsity, double density,
                             const std::optional<CellData>& file_data) {
  const auto seeds = cell_seeds(seed, sparsity, density, "");
  CellData cell;
  if (config.mode == Mode::kSynthetic) {
    Rng rng(seeds.dataset);
    auto ds = datagen::generate(config.spec, rng);
    cell = {std::move(ds.obs), std::move(ds.graph), std::move(ds.truths), std::move(ds.communities)};
  } else {
    cell = *file_data;
  }
  Rng mask_rng(seeds.mask);
  cell.obs = datagen::apply_sparsity(cell.obs, sparsity, mask_rng);
  Rng thin_rng(seeds.thinning);
  cell.graph = datagen::thin_edges(cell.graph, density, thin_rng);
  return cell;
}

inline ResultRow run_cell(const ExperimentConfig& config, const CellData& cell, const std::string& method,
                          std::uint64_t seed, double sparsity, double density, const SweepHooks& hooks = {}) {
  ResultRow row{method, sparsity, density, seed};
  const auto start = std::chrono::steady_clock::now();
  try {
    if (method == "mv") {
      row.accuracy = accuracy(majority_vote(cell.obs), cell.truths);
    } else {
      auto h = parse_hyper_params(config.hyper_overrides, config.hyper_base);
      h.seed = cell_seeds(seed, sparsity, density, method).fit;
      const auto result = fit(cell.obs, cell.graph, h);
      row.accuracy = accuracy(result.estimate, cell.truths);
      row.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      if (hooks.on_fit) hooks.on_fit(row, result);
    }
  } catch (const std::exception& e) {
    row.error = e.what();
    row.accuracy = std::numeric_limits<double>::quiet_NaN();
  }
  row.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return row;
}

// Runs every (sparsity, density, seed, method) cell. Failures are recorded
// in the row and the sweep continues. Rows come out sorted by sparsity,
// density, seed, then method.
inline ResultTable run_sweep(const ExperimentConfig& config, const SweepHooks& hooks = {}) {
  config.check();
  std::optional<CellData> file_data;
  if (config.mode == Mode::kFile) {
    auto obs = io::read_observations(config.observations);
    auto graph = io::read_graph(config.graph, obs.n_agents());
    file_data = CellData{std::move(obs), std::move(graph), io::read_truths(config.truths), {}};
  }
  auto sparsities = config.sparsities;
  auto densities = config.densities;
  auto seeds = config.seeds;
  auto methods = config.methods;
  std::sort(sparsities.begin(), sparsities.end());
  std::sort(densities.begin(), densities.end());
  std::sort(seeds.begin(), seeds.end());
  std::sort(methods.begin(), methods.end());

  ResultTable table;
  for (double sp : sparsities)
    for (double de : densities)
      for (auto seed : seeds) {
        std::optional<CellData> cell;
        std::string prep_error;
        try {
          cell = prepare_cell(config, seed, sp, de, file_data);
        } catch (const std::exception& e) {
          prep_error = e.what();
        }
        for (const auto& method : methods) {
          ResultRow row = cell ? run_cell(config, *cell, method, seed, sp, de, hooks) : ResultRow{method, sp, de, seed};
          if (!cell) row.error = prep_error;
          if (hooks.on_row) hooks.on_row(row);
          table.push_back(std::move(row));
        }
      }
  return table;
}

// --- reports -----------------------------------------------------------------

inline constexpr const char* kReportHeader = "method,sparsity,density,seed,accuracy,wall_time_s";

inline void write_report(const ResultTable& table, std::ostream& out) {
  out << kReportHeader << '\n';
  for (const auto& r : table)
    out << r.method << ',' << detail::format_double(r.sparsity) << ',' << detail::format_double(r.density) << ','
        << r.seed << ',' << (r.failed() ? std::string("nan") : detail::format_double(r.accuracy)) << ','
        << detail::format_double(r.wall_time_s) << '\n';
}

struct SummaryRow {
  std::string method;
  double sparsity;
  double density;
  std::size_t n;
  std::size_t failures;
  double mean;
  double std;  // sample standard deviation, 0 for a single value
};

inline std::vector<SummaryRow> summarize(const ResultTable& table) {
  std::map<std::tuple<std::string, double, double>, std::vector<const ResultRow*>> groups;
  for (const auto& r : table) groups[{r.method, r.sparsity, r.density}].push_back(&r);
  std::vector<SummaryRow> out;
  for (const auto& [key, rows] : groups) {
    SummaryRow s{std::get<0>(key), std::get<1>(key), std::get<2>(key), 0, 0, 0.0, 0.0};
    for (const auto* r : rows) {
      if (r->failed()) {
        ++s.failures;
        continue;
      }
      ++s.n;
      s.mean += r->accuracy;
    }
    if (s.n == 0) {
      s.mean = s.std = std::numeric_limits<double>::quiet_NaN();
    } else {
      s.mean /= static_cast<double>(s.n);
      double ss = 0.0;
      for (const auto* r : rows)
        if (!r->failed()) ss += (r->accuracy - s.mean) * (r->accuracy - s.mean);
      s.std = s.n > 1 ? std::sqrt(ss / static_cast<double>(s.n - 1)) : 0.0;
    }
    out.push_back(s);
  }
  return out;
}

inline void write_summary(const std::vector<SummaryRow>& rows, std::ostream& out) {
  out << "method,sparsity,density,n,failures,mean_accuracy,std_accuracy\n";
  for (const auto& s : rows)
    out << s.method << ',' << detail::format_double(s.sparsity) << ',' << detail::format_double(s.density) << ','
        << s.n << ',' << s.failures << ',' << detail::format_double(s.mean) << ',' << detail::format_double(s.std)
        << '\n';
}

inline std::filesystem::path summary_path(const std::filesystem::path& report) {
  auto p = report;
  p.replace_extension();
  return p.string() + ".summary.csv";
}

// Writes the CSV table at `path` and the per-cell summary next to it.
inline void emit_report(const ResultTable& table, const std::filesystem::path& path) {
  {
    auto out = io::detail::open_out(path);
    write_report(table, out);
    if (!out) throw Error("cannot write " + path.string());
  }
  auto out = io::detail::open_out(summary_path(path));
  write_summary(summarize(table), out);
  if (!out) throw Error("cannot write " + summary_path(path).string());
}

inline ResultTable read_report(const std::filesystem::path& path) {
  auto in = io::detail::open_in(path);
  std::string line;
  if (!std::getline(in, line) || line != kReportHeader)
    throw Error(path.string() + ":1: expected header '" + std::string(kReportHeader) + "'");
  ResultTable table;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(lineno);
    const auto f = io::detail::split_fields(line);
    if (f.size() != 6) throw Error(where + ": expected 6 fields");
    ResultRow r;
    r.method = f[0];
    try {
      r.sparsity = std::stod(f[1]);
      r.density = std::stod(f[2]);
      r.seed = std::stoull(f[3]);
      r.accuracy = f[4] == "nan" ? std::numeric_limits<double>::quiet_NaN() : std::stod(f[4]);
      r.wall_time_s = std::stod(f[5]);
    } catch (const std::exception&) {
      throw Error(where + ": malformed number");
    }
    if (std::isnan(r.accuracy)) r.error = "failed";
    table.push_back(std::move(r));
  }
  return table;
}

}  // namespace art::harness
