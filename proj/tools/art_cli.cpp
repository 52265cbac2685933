// art: command-line front end.
//
//   art generate --out DIR [--seed S] [--sparsity X] [--density Y] [--config FILE]
//   art fit      --observations FILE --graph FILE --out DIR [--seed S] [--config FILE]
//   art fit      --ratings FILE --edges FILE --out DIR ...        (IMDB-format input)
//   art sweep    --config FILE --out REPORT.csv [--seed S]
//   art score    --estimate FILE --truths FILE [--out FILE]
//
// Failures print one JSON object on stderr and exit nonzero.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "art/art.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void emit_error(const std::string& verb, const std::string& message, int code) {
  std::cerr << json{{"status", "error"}, {"verb", verb}, {"code", code}, {"message", message}}.dump() << std::endl;
}

struct CommonOptions {
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string config;
};

void add_common(CLI::App* cmd, CommonOptions& o, bool out_required) {
  cmd->add_option("--seed", o.seed, "Random seed");
  auto* out = cmd->add_option("--out", o.out, "Output path");
  if (out_required) out->required();
  cmd->add_option("--config", o.config, "Configuration file (key = value lines)")->check(CLI::ExistingFile);
}

int run_generate(const CommonOptions& common, double sparsity, double density) {
  art::harness::ExperimentConfig config;
  if (!common.config.empty()) config = art::harness::load_experiment_config(common.config);
  const auto seed = common.seed.value_or(1);
  const auto cell = art::harness::prepare_cell(config, seed, sparsity, density, std::nullopt);
  const fs::path dir(common.out);
  art::io::write_observations(cell.obs, dir / "observations.csv");
  art::io::write_graph(cell.graph, dir / "graph.csv");
  art::io::write_truths(cell.truths, dir / "truths.csv");
  art::io::write_labels(cell.communities, dir / "communities.csv", "agent", "true_community");
  std::cout << json{{"status", "ok"},
                    {"agents", cell.obs.n_agents()},
                    {"events", cell.obs.n_events()},
                    {"observations", cell.obs.n_observed()},
                    {"edges", cell.graph.n_edges()},
                    {"mv_accuracy", art::harness::accuracy(art::majority_vote(cell.obs), cell.truths)}}
                   .dump()
            << std::endl;
  return 0;
}

struct FitInputs {
  std::string observations, graph, ratings, edges, resume, method = "art";
  std::optional<int> states;
  std::optional<int> iterations;
};

int run_fit(const CommonOptions& common, const FitInputs& in) {
  art::ObservationMatrix obs;
  art::SocialGraph graph;
  art::HyperParams base = art::HyperParams::synthetic();
  if (!in.ratings.empty() || !in.edges.empty()) {
    if (in.ratings.empty() || in.edges.empty()) throw art::Error("--ratings and --edges must be given together");
    auto ds = art::io::load_imdb(in.ratings, in.edges);
    std::cerr << json{{"agents", ds.obs.n_agents()},
                      {"events", ds.obs.n_events()},
                      {"evaluations", ds.n_ratings},
                      {"edges", ds.graph.n_edges()}}
                     .dump()
              << std::endl;
    obs = std::move(ds.obs);
    graph = std::move(ds.graph);
    base = art::HyperParams::imdb();
  } else {
    if (in.observations.empty() || in.graph.empty())
      throw art::Error("fit needs --observations and --graph (or --ratings and --edges)");
    art::io::Dimensions dims;
    dims.n_states = in.states;
    obs = art::io::read_observations(in.observations, dims);
    graph = art::io::read_graph(in.graph, obs.n_agents());
  }
  const fs::path dir(common.out);
  fs::create_directories(dir);

  if (in.method == "mv") {
    art::io::write_estimate(art::majority_vote(obs), dir / "estimate.csv");
    std::cout << json{{"status", "ok"}, {"method", "mv"}}.dump() << std::endl;
    return 0;
  }
  if (in.method != "art") throw art::Error("unknown method '" + in.method + "'");

  auto hyper = common.config.empty() ? base : art::load_hyper_params(common.config, base);
  if (common.seed) hyper.seed = *common.seed;
  if (in.iterations) hyper.iterations = *in.iterations;

  art::FitOptions options;
  options.checkpoint_path = dir / "checkpoint.rolling";
  options.final_checkpoint_path = dir / "checkpoint.final";
  art::RunState state = in.resume.empty() ? art::initialize(obs, graph, hyper) : art::load_checkpoint(in.resume, obs, graph);
  if (!in.resume.empty() && in.iterations) state.hyper.iterations = *in.iterations;
  art::run_to_budget(state, options);
  const auto estimate = art::estimate_truths(state);
  art::io::write_estimate(estimate, dir / "estimate.csv");
  std::cout << json{{"status", "ok"}, {"method", "art"}, {"iterations", state.iteration}, {"loss", state.last_loss}}.dump()
            << std::endl;
  return 0;
}

int run_sweep(const CommonOptions& common, const std::string& seeds) {
  if (common.config.empty()) throw art::Error("sweep needs --config");
  auto config = art::harness::load_experiment_config(common.config);
  if (!seeds.empty()) config = art::harness::parse_experiment_config("seeds = " + seeds, config);
  if (common.seed) config.seeds = {*common.seed};
  const fs::path out = common.out.empty() ? config.output : fs::path(common.out);
  if (out.empty()) throw art::Error("sweep needs --out or an output key in the config");
  art::harness::SweepHooks hooks;
  hooks.on_row = [](const art::harness::ResultRow& r) {
    json line{{"method", r.method}, {"sparsity", r.sparsity}, {"density", r.density}, {"seed", r.seed},
              {"wall_time_s", r.wall_time_s}};
    if (r.failed()) line["error"] = r.error;
    else line["accuracy"] = r.accuracy;
    std::cerr << line.dump() << std::endl;
  };
  const auto table = art::harness::run_sweep(config, hooks);
  art::harness::emit_report(table, out);
  std::size_t failures = 0;
  for (const auto& r : table) failures += r.failed();
  std::cout << json{{"status", "ok"}, {"rows", table.size()}, {"failures", failures}, {"report", out.string()}}.dump()
            << std::endl;
  return 0;
}

int run_score(const CommonOptions& common, const std::string& estimate_path, const std::string& truths_path,
              std::size_t validation_events) {
  const auto est = art::io::read_estimate(estimate_path);
  const auto truths = art::io::read_truths(truths_path);
  json result{{"status", "ok"}, {"events", truths.size()}, {"accuracy", art::harness::accuracy(est, truths)}};
  if (validation_events > 0) {
    const auto n = std::min(validation_events, truths.size());
    std::vector<int> head(est.states.begin(), est.states.begin() + static_cast<std::ptrdiff_t>(std::min(n, est.states.size())));
    result["validation_accuracy"] =
        art::harness::accuracy(head, std::vector<int>(truths.begin(), truths.begin() + static_cast<std::ptrdiff_t>(n)));
  }
  if (!common.out.empty()) {
    std::ofstream out(common.out);
    if (!out) throw art::Error("cannot write " + common.out);
    out << result.dump(2) << '\n';
  }
  std::cout << result.dump() << std::endl;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ART truth discovery"};
  app.require_subcommand(1);

  CommonOptions gen_common, fit_common, sweep_common, score_common;
  double sparsity = 0.6, density = 1.0;
  auto* gen = app.add_subcommand("generate", "Write a synthetic dataset");
  add_common(gen, gen_common, true);
  gen->add_option("--sparsity", sparsity, "Fraction of null observations")->check(CLI::Range(0.0, 0.999999));
  gen->add_option("--density", density, "Fraction of edges kept")->check(CLI::Range(1e-9, 1.0));

  FitInputs fit_in;
  auto* fitc = app.add_subcommand("fit", "Fit ART (or majority vote) to a dataset");
  add_common(fitc, fit_common, true);
  fitc->add_option("--observations", fit_in.observations, "Observation CSV")->check(CLI::ExistingFile);
  fitc->add_option("--graph", fit_in.graph, "Graph CSV")->check(CLI::ExistingFile);
  fitc->add_option("--ratings", fit_in.ratings, "IMDB-format ratings file")->check(CLI::ExistingFile);
  fitc->add_option("--edges", fit_in.edges, "IMDB-format follower edges")->check(CLI::ExistingFile);
  fitc->add_option("--states", fit_in.states, "Number of states (default: largest value seen)");
  fitc->add_option("--iterations", fit_in.iterations, "Iteration budget override");
  fitc->add_option("--resume", fit_in.resume, "Continue from a checkpoint")->check(CLI::ExistingFile);
  fitc->add_option("--method", fit_in.method, "art or mv");

  std::string seeds;
  auto* sweep = app.add_subcommand("sweep", "Run an experiment grid and write a report");
  add_common(sweep, sweep_common, false);
  sweep->add_option("--seeds", seeds, "Seed list, e.g. 1-5 or 1,3,7");

  std::string estimate_path, truths_path;
  std::size_t validation_events = 0;
  auto* score = app.add_subcommand("score", "Accuracy of an estimate against truths");
  add_common(score, score_common, false);
  score->add_option("--estimate", estimate_path, "Estimate CSV")->required()->check(CLI::ExistingFile);
  score->add_option("--truths", truths_path, "Truth CSV")->required()->check(CLI::ExistingFile);
  score->add_option("--validation-events", validation_events, "Also report accuracy on the first N events");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    emit_error(app.get_subcommands().empty() ? "" : app.get_subcommands().front()->get_name(), e.what(), 2);
    return 2;
  }

  const auto* cmd = app.get_subcommands().front();
  const std::string verb = cmd->get_name();
  try {
    if (verb == "generate") return run_generate(gen_common, sparsity, density);
    if (verb == "fit") return run_fit(fit_common, fit_in);
    if (verb == "sweep") return run_sweep(sweep_common, seeds);
    return run_score(score_common, estimate_path, truths_path, validation_events);
  } catch (const std::exception& e) {
    emit_error(verb, e.what(), 1);
    return 1;
  }
}
