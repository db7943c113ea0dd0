// zips: fit, compare and simulate zero-inflated power series count models.

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <iterator>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "zips/bayes.hpp"
#include "zips/mle.hpp"
#include "zips/portfolio.hpp"
#include "zips/report.hpp"

namespace {

using namespace zips;
using ojson = nlohmann::ordered_json;

constexpr int kExitOk = 0;
constexpr int kExitNotConverged = 1;
constexpr int kExitError = 2;

struct FitRequest {
  std::string family = "poisson";
  bool inflated = false;
  std::string estimator = "mle";
  std::optional<double> nb_r;
  std::optional<int> binomial_n;
  bool profile_r = false;
  std::string link;
  std::vector<std::string> x_cols{kCovariateColumns.begin(), kCovariateColumns.end()};
  std::vector<std::string> z_cols{kCovariateColumns.begin(), kCovariateColumns.end()};
  int chains = 3;
  int iters = 10000;
  int burnin = 5000;
  int thin = 1;
  std::vector<double> omega_prior;
  std::vector<double> theta_prior;
  std::string draws_path;
};

struct Output {
  std::string format = "text";
  std::string path;
  std::string timestamp;
};

struct LoadedData {
  std::string path;
  std::string fingerprint;
  std::vector<PolicyRecord> records;
};

std::uint64_t default_seed() {
  if (const char* env = std::getenv("ZIPS_SEED")) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      std::cerr << "warning: ignoring non-numeric ZIPS_SEED\n";
    }
  }
  return 1;
}

LoadedData load_data(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::istringstream stream(bytes);
  return {path, fnv1a_hex(bytes), read_policy_csv(stream)};
}

// Maps model aliases (zip, zinb, bzigps, ...) onto a request.
void apply_model_alias(const std::string& alias, FitRequest& req) {
  struct Alias {
    const char* name;
    const char* family;
    bool inflated;
    const char* estimator;
  };
  static constexpr Alias kAliases[] = {
      {"poisson", "poisson", false, "mle"},   {"nb", "nb", false, "mle"},
      {"zip", "poisson", true, "mle"},        {"zinb", "nb", true, "mle"},
      {"geometric", "geometric", false, "mle"}, {"zig", "geometric", true, "mle"},
      {"bzips", "poisson", true, "bayes"},    {"bzigps", "geometric", true, "bayes"},
  };
  for (const auto& a : kAliases) {
    if (alias == a.name) {
      req.family = a.family;
      req.inflated = a.inflated;
      req.estimator = a.estimator;
      return;
    }
  }
  throw CLI::ValidationError("--model", "unknown model '" + alias + "'");
}

std::optional<ThetaLink> parse_link(const std::string& s) {
  if (s.empty()) return std::nullopt;
  if (s == "log") return ThetaLink::Log;
  return ThetaLink::Logit;
}

PriorSpec prior_from(const FitRequest& req) {
  PriorSpec prior;
  if (req.omega_prior.size() == 2) prior.omega_prior = BetaPrior{req.omega_prior[0], req.omega_prior[1]};
  if (req.theta_prior.size() == 2) {
    prior.theta_prior = ConjugateThetaPrior{req.theta_prior[0], req.theta_prior[1]};
  }
  prior.validate();
  return prior;
}

ojson settings_json(const FitRequest& req, std::optional<double> nb_r) {
  ojson s;
  s["x_cols"] = req.x_cols;
  s["z_cols"] = req.inflated ? ojson(req.z_cols) : ojson::array();
  s["link"] = req.link.empty() ? ojson(nullptr) : ojson(req.link);
  s["nb_r"] = nb_r ? ojson(*nb_r) : ojson(nullptr);
  s["profile_r"] = req.profile_r;
  if (req.binomial_n) s["binomial_n"] = *req.binomial_n;
  if (req.estimator == "bayes") {
    s["chains"] = req.chains;
    s["iterations"] = req.iters;
    s["burn_in"] = req.burnin;
    s["thin"] = req.thin;
    s["omega_prior"] = req.omega_prior.empty() ? ojson(nullptr) : ojson(req.omega_prior);
    s["theta_prior"] = req.theta_prior.empty() ? ojson(nullptr) : ojson(req.theta_prior);
  }
  return s;
}

FitReport run_fit(const FitRequest& req, const LoadedData& data, std::uint64_t seed,
                  const std::string& timestamp) {
  const auto kind = family_kind_from_string(req.family);
  if (!kind) throw CLI::ValidationError("--family", "unknown family '" + req.family + "'");
  if (req.estimator != "mle" && req.estimator != "bayes") {
    throw CLI::ValidationError("--estimator", "must be mle or bayes");
  }
  const DesignData design = design_from_records(data.records, req.x_cols, req.z_cols);
  MleOptions options;
  options.link = parse_link(req.link);

  // Negative binomial r: fixed by --nb-r, otherwise profiled.
  std::optional<double> nuisance;
  std::optional<MleResult> profiled;
  if (*kind == FamilyKind::NegativeBinomial) {
    if (req.nb_r && !req.profile_r) {
      nuisance = *req.nb_r;
    } else {
      profiled = mle_regression_profile_r(design, req.inflated, options);
      nuisance = profiled->profiled_r;
    }
  } else if (*kind == FamilyKind::Binomial) {
    if (!req.binomial_n) throw CLI::ValidationError("--binomial-n", "binomial family needs n");
    nuisance = *req.binomial_n;
  }
  const PowerSeriesFamily family = make_family(*kind, nuisance);

  RunManifest manifest;
  manifest.command = "fit";
  manifest.inputs = {data.path};
  manifest.data_fingerprint = data.fingerprint;
  manifest.family = family.name();
  manifest.inflated = req.inflated;
  manifest.estimator = req.estimator;
  manifest.settings = settings_json(req, nuisance);
  manifest.timestamp = timestamp;

  if (req.estimator == "mle") {
    const MleResult fit = profiled ? *profiled : mle_regression(design, family, req.inflated, options);
    return fit_report_from_mle(fit, family, req.inflated, std::move(manifest));
  }

  McmcConfig config;
  config.chains = req.chains;
  config.iterations = req.iters;
  config.burn_in = req.burnin;
  config.thin = req.thin;
  config.seed = seed;
  manifest.seed = seed;
  const ThetaLink link = options.link.value_or(default_theta_link(family));
  const ChainSet chains = run_mcmc(design, family, prior_from(req), config, req.inflated, link);
  if (!req.draws_path.empty()) {
    std::ofstream out(req.draws_path);
    if (!out) throw std::runtime_error("cannot write " + req.draws_path);
    write_chains_csv(chains, out);
  }
  FitReport report = fit_report_from_bayes(chains, config, family, req.inflated, link, design.n(),
                                           std::move(manifest));
  if (profiled) {
    report.nb_r = profiled->profiled_r;
    report.warnings.push_back("r fixed at its profile-likelihood estimate");
  }
  return report;
}

template <typename Report>
void emit(const Report& report, const Output& out) {
  std::ostringstream text;
  if (out.format == "json") {
    text << to_json(report).dump(2) << '\n';
  } else {
    write_text(text, report);
  }
  if (out.path.empty()) {
    std::cout << text.str() << std::flush;
    return;
  }
  std::ofstream file(out.path, std::ios::binary);
  if (!file) throw std::runtime_error("cannot write " + out.path);
  file << text.str();
  file.flush();
  if (!file) throw std::runtime_error("error while writing " + out.path);
}

void add_fit_options(CLI::App& cmd, FitRequest& req) {
  cmd.add_option("--family", req.family, "poisson, geometric, nb, binomial or logarithmic")
      ->check(CLI::IsMember({"poisson", "geometric", "nb", "negative_binomial", "binomial",
                             "logarithmic"}));
  cmd.add_flag("--inflated", req.inflated, "Zero-inflated model");
  cmd.add_option("--estimator", req.estimator)->check(CLI::IsMember({"mle", "bayes"}));
  cmd.add_option("--nb-r", req.nb_r, "Fixed negative binomial size r")
      ->check(CLI::PositiveNumber);
  cmd.add_flag("--profile-r", req.profile_r, "Profile r even when --nb-r is given");
  cmd.add_option("--binomial-n", req.binomial_n)->check(CLI::PositiveNumber);
  cmd.add_option("--link", req.link, "Theta link (default: log for Poisson/binomial, else logit)")
      ->check(CLI::IsMember({"log", "logit"}));
  cmd.add_option("--x-cols", req.x_cols, "Covariates for theta (comma list, 'none' for intercept)")
      ->delimiter(',');
  cmd.add_option("--z-cols", req.z_cols, "Covariates for omega (comma list, 'none' for intercept)")
      ->delimiter(',');
  cmd.add_option("--chains", req.chains)->check(CLI::PositiveNumber);
  cmd.add_option("--iters", req.iters, "Iterations per chain, burn-in included")
      ->check(CLI::PositiveNumber);
  cmd.add_option("--burnin", req.burnin)->check(CLI::NonNegativeNumber);
  cmd.add_option("--thin", req.thin)->check(CLI::PositiveNumber);
  cmd.add_option("--omega-prior", req.omega_prior, "Beta(b1,b2) prior for a constant omega")
      ->expected(2)
      ->delimiter(',');
  cmd.add_option("--theta-prior", req.theta_prior, "theta^a1/f^a2 prior for a constant theta")
      ->expected(2)
      ->delimiter(',');
  cmd.add_option("--draws", req.draws_path, "Write posterior draws to this CSV");
}

void add_output_options(CLI::App& cmd, Output& out) {
  cmd.add_option("--format", out.format)->check(CLI::IsMember({"text", "json"}));
  cmd.add_option("--output,-o", out.path, "Report path (default: stdout)");
  cmd.add_option("--timestamp", out.timestamp, "Manifest timestamp (default: now, UTC)");
}

void normalize_columns(std::vector<std::string>& cols) {
  if (cols.size() == 1 && cols.front() == "none") cols.clear();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Zero-inflated power series models for claim counts"};
  app.require_subcommand(1);
  std::uint64_t seed = default_seed();
  app.add_option("--seed", seed, "Random seed (default: $ZIPS_SEED or 1)");

  FitRequest fit_req;
  Output fit_out;
  std::string fit_data;
  auto* fit = app.add_subcommand("fit", "Fit one model and print its coefficient table");
  fit->add_option("data", fit_data, "Portfolio CSV")->required()->check(CLI::ExistingFile);
  std::string fit_model;
  fit->add_option("--model", fit_model, "Alias: poisson, nb, zip, zinb, geometric, zig, bzips, bzigps");
  add_fit_options(*fit, fit_req);
  add_output_options(*fit, fit_out);
  fit->add_option("--seed", seed);

  FitRequest cmp_req;
  Output cmp_out;
  std::vector<std::string> cmp_reports;
  std::vector<std::string> cmp_models;
  std::string cmp_data;
  auto* compare = app.add_subcommand("compare", "Compare models by DIC, AIC and BIC");
  compare->add_option("reports", cmp_reports, "Saved JSON fit reports")->check(CLI::ExistingFile);
  compare->add_option("--data", cmp_data, "Portfolio CSV to fit --model specs on")
      ->check(CLI::ExistingFile);
  compare->add_option("--model", cmp_models, "Model alias; repeat or comma-separate")
      ->delimiter(',');
  add_fit_options(*compare, cmp_req);
  add_output_options(*compare, cmp_out);
  compare->add_option("--seed", seed);

  std::string sim_config;
  std::size_t sim_n = 0;
  std::string sim_out;
  auto* simulate = app.add_subcommand("simulate", "Write a synthetic portfolio CSV");
  simulate->add_option("--config", sim_config, "Generator config (key = value)")
      ->required()
      ->check(CLI::ExistingFile);
  simulate->add_option("--n", sim_n, "Number of policies")->required()->check(CLI::PositiveNumber);
  simulate->add_option("output", sim_out, "CSV path; the truth sidecar goes to <output>.truth.json")
      ->required();
  simulate->add_option("--seed", seed);
  std::string sim_timestamp;
  simulate->add_option("--timestamp", sim_timestamp);

  std::string idx_data;
  std::vector<double> idx_summaries;
  std::optional<double> idx_kappa3;
  Output idx_out;
  auto* indices = app.add_subcommand("indices", "Inflation measures with Poisson/geometric fits");
  auto* idx_data_opt = indices->add_option("data", idx_data, "Portfolio CSV")->check(CLI::ExistingFile);
  indices->add_option("--summaries", idx_summaries, "n,n0,mean")
      ->expected(3)
      ->delimiter(',')
      ->excludes(idx_data_opt);
  indices->add_option("--kappa3", idx_kappa3, "Sample third central moment, with --summaries");
  add_output_options(*indices, idx_out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*fit) {
      if (!fit_model.empty()) apply_model_alias(fit_model, fit_req);
      normalize_columns(fit_req.x_cols);
      normalize_columns(fit_req.z_cols);
      const std::string ts = fit_out.timestamp.empty() ? utc_timestamp_now() : fit_out.timestamp;
      const FitReport report = run_fit(fit_req, load_data(fit_data), seed, ts);
      emit(report, fit_out);
      return report.converged ? kExitOk : kExitNotConverged;
    }

    if (*compare) {
      const std::string ts = cmp_out.timestamp.empty() ? utc_timestamp_now() : cmp_out.timestamp;
      std::vector<ComparisonRow> rows;
      bool all_converged = true;
      RunManifest manifest;
      manifest.command = "compare";
      manifest.timestamp = ts;
      for (const auto& path : cmp_reports) {
        std::ifstream in(path);
        const auto j = nlohmann::json::parse(in);
        rows.push_back(comparison_row(j));
        all_converged = all_converged && j.value("converged", false);
        manifest.inputs.push_back(path);
      }
      if (!cmp_models.empty()) {
        if (cmp_data.empty()) throw CLI::ValidationError("--data", "required with --model");
        const LoadedData data = load_data(cmp_data);
        manifest.inputs.push_back(cmp_data);
        manifest.seed = seed;
        manifest.settings["models"] = cmp_models;
        normalize_columns(cmp_req.x_cols);
        normalize_columns(cmp_req.z_cols);
        for (const auto& alias : cmp_models) {
          FitRequest req = cmp_req;
          apply_model_alias(alias, req);
          const FitReport report = run_fit(req, data, seed, ts);
          all_converged = all_converged && report.converged;
          rows.push_back(comparison_row(report));
        }
      }
      if (!rows.empty()) manifest.data_fingerprint = rows.front().data_fingerprint;
      const ComparisonTable table = compare_models(std::move(rows), std::move(manifest));
      emit(table, cmp_out);
      return all_converged ? kExitOk : kExitNotConverged;
    }

    if (*simulate) {
      const GeneratorConfig config = GeneratorConfig::load(sim_config);
      const auto records = generate_portfolio(config, sim_n, seed);
      write_policy_csv(std::filesystem::path(sim_out), records);
      ojson truth;
      RunManifest manifest;
      manifest.command = "simulate";
      manifest.inputs = {sim_config};
      manifest.family = config.power_series().name();
      manifest.inflated = !config.gamma.empty();
      manifest.seed = seed;
      manifest.timestamp = sim_timestamp.empty() ? utc_timestamp_now() : sim_timestamp;
      manifest.settings["n"] = sim_n;
      truth["manifest"] = to_json(manifest);
      truth["family"] = config.power_series().name();
      truth["link"] = to_string(config.theta_link());
      truth["beta"] = config.beta;
      truth["gamma"] = config.gamma;
      truth["covariates"] = {{"vehicle_value_mean", config.vehicle_value_mean},
                             {"vehicle_value_variance", config.vehicle_value_variance},
                             {"gender_share", config.gender_share},
                             {"age_young_share", config.age_young_share},
                             {"age_old_share", config.age_old_share},
                             {"veh_age_young_share", config.vehicle_age_young_share}};
      const std::string sidecar = sim_out + ".truth.json";
      std::ofstream out(sidecar);
      if (!out) throw std::runtime_error("cannot write " + sidecar);
      out << truth.dump(2) << '\n';
      out.flush();
      if (!out) throw std::runtime_error("error while writing " + sidecar);
      return kExitOk;
    }

    if (*indices) {
      RunManifest manifest;
      manifest.command = "indices";
      manifest.timestamp = idx_out.timestamp.empty() ? utc_timestamp_now() : idx_out.timestamp;
      CountSummary sample;
      if (!idx_summaries.empty()) {
        const double n = idx_summaries[0];
        const double n0 = idx_summaries[1];
        if (n < 1 || n0 < 0 || n != std::floor(n) || n0 != std::floor(n0)) {
          throw CLI::ValidationError("--summaries", "n and n0 must be nonnegative integers");
        }
        if (n0 > n) throw CLI::ValidationError("--summaries", "n0 exceeds n");
        sample = CountSummary::from_summaries(static_cast<std::size_t>(n),
                                              static_cast<std::size_t>(n0), idx_summaries[2]);
        std::ostringstream key;
        key.precision(17);
        key << idx_summaries[0] << ',' << idx_summaries[1] << ',' << idx_summaries[2];
        manifest.inputs = {"summaries:" + key.str()};
        manifest.data_fingerprint = fnv1a_hex(key.str());
      } else if (!idx_data.empty()) {
        const LoadedData data = load_data(idx_data);
        std::vector<std::int64_t> counts;
        for (const auto& r : data.records) counts.push_back(r.num_claims);
        sample = CountSummary::from_counts(counts);
        manifest.inputs = {data.path};
        manifest.data_fingerprint = data.fingerprint;
      } else {
        throw CLI::ValidationError("indices", "give a CSV path or --summaries n,n0,mean");
      }
      emit(indices_report(sample, idx_kappa3, std::move(manifest)), idx_out);
      return kExitOk;
    }
  } catch (const CLI::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  }
  return kExitError;
}
