// Command-line front end: fit, predict, split-eval and validate.
// Exit codes: 0 success, 1 a validation check failed, 2 bad input.

#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <sstream>

#include "epy/ebayes.hpp"
#include "epy/error.hpp"
#include "epy/oracles.hpp"
#include "epy/params_io.hpp"
#include "epy/species.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kValidationFailed = 1;
constexpr int kInputError = 2;

template <class Write>
void write_output(const std::string& path, Write&& write) {
  if (path == "-") {
    write(std::cout);
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw epy::ParseError("cannot write '" + path + "'", 0);
  write(out);
}

epy::SpeciesDataset load_dataset(const std::string& path) {
  auto data = epy::load_csv(path);
  for (const auto& w : data.warnings) std::cerr << "warning: " << w << '\n';
  return data;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Enriched Pitman-Yor species discovery"};
  app.require_subcommand(1);

  std::string input, out = "-", prior_path, model = "epy", params_path, suite = "all";
  std::int64_t m_max = 0, n_train = 0;
  std::vector<std::int64_t> grid;
  std::vector<double> quantiles{0.05, 0.95};
  int reps = 1000, threads = 0;
  std::uint64_t seed = 1;

  auto* fit = app.add_subcommand("fit", "Empirical-Bayes fit of a model to a count table");
  fit->add_option("--input", input, "CSV with header family,species,count")->required();
  fit->add_option("--model", model, "dp, edp or epy")->check(CLI::IsMember({"dp", "edp", "epy"}));
  fit->add_option("--prior", prior_path, "Prior JSON (defaults otherwise)");
  fit->add_option("--out", out, "Parameter JSON output ('-' for stdout)");
  fit->add_option("--threads", threads, "Worker threads (0: all)")->check(CLI::NonNegativeNumber);

  auto* predict = app.add_subcommand("predict", "Monte Carlo discovery curve from fitted parameters");
  predict->add_option("--params", params_path, "Parameter JSON from fit")->required();
  predict->add_option("--input", input, "Training CSV")->required();
  auto* m_max_opt = predict->add_option("--m-max", m_max, "Prediction horizon")->check(CLI::NonNegativeNumber);
  auto* grid_opt =
      predict->add_option("--grid", grid, "Comma-separated m values (overrides the default grid)")->delimiter(',');
  predict->callback([&] {
    if (!*m_max_opt && !*grid_opt) throw CLI::RequiredError("--m-max or --grid");
  });
  predict->add_option("--reps", reps, "Monte Carlo replicates")->check(CLI::PositiveNumber);
  predict->add_option("--quantiles", quantiles, "Quantile levels")->delimiter(',');
  predict->add_option("--seed", seed, "Random seed");
  predict->add_option("--threads", threads, "Worker threads (0: all)")->check(CLI::NonNegativeNumber);
  predict->add_option("--out", out, "Curve CSV output ('-' for stdout)");

  auto* split = app.add_subcommand("split-eval", "Fit DP, EDP and EPY on a training split and score them");
  split->add_option("--input", input, "CSV with header family,species,count")->required();
  split->add_option("--n-train", n_train, "Training sample size (default: half)")->check(CLI::NonNegativeNumber);
  split->add_option("--seed", seed, "Seed for the split and the replicates");
  split->add_option("--grid", grid, "Comma-separated m values")->delimiter(',');
  split->add_option("--reps", reps, "Monte Carlo replicates")->check(CLI::PositiveNumber);
  split->add_option("--quantiles", quantiles, "Quantile levels")->delimiter(',');
  split->add_option("--prior", prior_path, "Prior JSON (defaults otherwise)");
  split->add_option("--threads", threads, "Worker threads (0: all)")->check(CLI::NonNegativeNumber);
  split->add_option("--out", out, "Comparison CSV output ('-' for stdout)");

  auto* validate = app.add_subcommand("validate", "Run the identity and calibration checks");
  validate->add_option("--suite", suite, "all, eppf, identities or coverage")
      ->check(CLI::IsMember({"all", "eppf", "identities", "coverage"}));
  validate->add_option("--seed", seed, "Random seed");
  validate->add_option("--out", out, "JSON-lines output ('-' for stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInputError;
  }

  try {
    if (*fit) {
      const auto prior = prior_path.empty() ? epy::PriorDensities{} : epy::load_priors(prior_path);
      const auto data = load_dataset(input);
      epy::FitOptions options;
      options.threads = threads;
      const auto result = epy::fit_model(data.state(), prior, epy::parse_variant(model), options);
      for (const auto& w : result.warnings) std::cerr << "warning: " << w << '\n';
      const auto text = epy::params_to_json(epy::fitted_model(result), &result);
      write_output(out, [&](std::ostream& os) { os << text; });
      return kOk;
    }
    if (*predict) {
      const auto params = epy::load_params(params_path);
      const auto data = load_dataset(input);
      epy::RunConfig config;
      config.variant = params.variant;
      config.grid = grid.empty() ? epy::default_grid(m_max) : grid;
      config.reps = reps;
      config.quantiles = quantiles;
      config.seed = seed;
      config.threads = threads;
      const auto curve = epy::predict_curve(data.state(), params, config);
      write_output(out, [&](std::ostream& os) { epy::write_curve_csv(os, curve); });
      return kOk;
    }
    if (*split) {
      epy::RunConfig config;
      if (!prior_path.empty()) config.prior = epy::load_priors(prior_path);
      config.grid = grid;
      config.reps = reps;
      config.quantiles = quantiles;
      config.seed = seed;
      config.n_train = n_train;
      config.threads = threads;
      const auto report = epy::compare_models(load_dataset(input), config);
      for (const auto& mc : report.models)
        std::cerr << epy::to_string(mc.variant) << " mae " << epy::format_number(mc.mae) << '\n';
      write_output(out, [&](std::ostream& os) { epy::write_comparison_csv(os, report); });
      return kOk;
    }
    if (*validate) {
      const auto reports = epy::run_suite(suite, seed);
      bool ok = true;
      write_output(out, [&](std::ostream& os) {
        for (const auto& r : reports) {
          os << epy::to_json_line(r) << '\n';
          ok = ok && r.pass;
        }
      });
      return ok ? kOk : kValidationFailed;
    }
  } catch (const epy::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInputError;
  } catch (const epy::DomainError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInputError;
  } catch (const epy::ConvergenceError& e) {
    std::cerr << "error: fit did not converge: " << e.what() << '\n';
    return kInputError;
  }
  return kOk;
}
