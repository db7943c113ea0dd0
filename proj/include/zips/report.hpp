#ifndef ZIPS_REPORT_HPP
#define ZIPS_REPORT_HPP

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "zips/bayes.hpp"
#include "zips/diagnostics.hpp"
#include "zips/indices.hpp"
#include "zips/mle.hpp"

namespace zips {

inline constexpr std::string_view kToolVersion = "0.1.0";

// 64-bit FNV-1a, rendered as 16 hex digits.
std::string fnv1a_hex(std::string_view bytes);

// ISO 8601 UTC, seconds resolution.
std::string utc_timestamp_now();

// Enough to rerun the command that produced a report.
struct RunManifest {
  std::string command;
  std::vector<std::string> inputs;
  std::string data_fingerprint;
  std::string family;
  bool inflated = false;
  std::string estimator;  // "mle", "bayes" or empty
  nlohmann::ordered_json settings = nlohmann::ordered_json::object();
  std::optional<std::uint64_t> seed;
  std::string tool_version{kToolVersion};
  std::string timestamp;
};

nlohmann::ordered_json to_json(const RunManifest& manifest);

struct CoefficientRow {
  std::string name;
  double estimate = 0.0;
  // Standard error (mle) or posterior standard deviation (bayes).
  std::optional<double> spread;
  std::optional<double> p_value;
  std::string stars;
  std::optional<Interval> ci95;
  std::optional<double> rhat;
  std::optional<double> ess;
};

struct McmcSummary {
  int chains = 0;
  int iterations = 0;
  int burn_in = 0;
  int thin = 1;
  std::optional<double> max_rhat;
  double min_ess = 0.0;
  std::vector<std::vector<double>> acceptance_rates;
  bool warm_start_fallback = false;
};

struct FitReport {
  RunManifest manifest;
  std::string model;  // row label, e.g. "ZIP" or "BZIGPS"
  std::string estimator;
  std::string family;
  bool inflated = false;
  std::string link;
  std::size_t n = 0;
  std::size_t parameters = 0;
  // At the maximum (mle) or at the posterior mean (bayes).
  double loglik = 0.0;
  double aic = 0.0;
  double bic = 0.0;
  std::optional<double> dic;
  std::optional<double> p_d;
  std::optional<double> nb_r;
  bool converged = false;
  std::vector<CoefficientRow> coefficients;
  std::optional<McmcSummary> mcmc;
  std::vector<std::string> warnings;
};

// Table label for a model: Poisson, Negative Binomial, Geometric, ZIP,
// ZINB, ZIG; Bayesian inflated fits are BZIPS (Poisson) and BZIGPS
// (geometric), other Bayesian fits get a "Bayes " prefix.
std::string model_label(FamilyKind family, bool inflated, std::string_view estimator);

FitReport fit_report_from_mle(const MleResult& fit, const PowerSeriesFamily& family, bool inflated,
                              RunManifest manifest);

// Converged when every split R-hat is below rhat_threshold.
FitReport fit_report_from_bayes(const ChainSet& chains, const McmcConfig& config,
                                const PowerSeriesFamily& family, bool inflated, ThetaLink link,
                                std::size_t n, RunManifest manifest, double rhat_threshold = 1.1);

nlohmann::ordered_json to_json(const FitReport& report);
void write_text(std::ostream& out, const FitReport& report);

struct ComparisonRow {
  std::string model;
  std::string estimator;
  std::string data_fingerprint;
  std::size_t n = 0;
  std::size_t parameters = 0;
  double loglik = 0.0;
  std::optional<double> dic;
  double aic = 0.0;
  double bic = 0.0;
};

ComparisonRow comparison_row(const FitReport& report);
// Reads the fields of a saved JSON fit report; throws std::invalid_argument
// when a required field is missing.
ComparisonRow comparison_row(const nlohmann::json& report);

struct ComparisonTable {
  RunManifest manifest;
  std::vector<ComparisonRow> rows;
  // Index of the smallest value per column; ties go to the first row.
  std::optional<std::size_t> best_dic;
  std::size_t best_aic = 0;
  std::size_t best_bic = 0;
};

// Throws std::invalid_argument for fewer than two rows or rows fitted to
// different data.
ComparisonTable compare_models(std::vector<ComparisonRow> rows, RunManifest manifest);

nlohmann::ordered_json to_json(const ComparisonTable& table);
void write_text(std::ostream& out, const ComparisonTable& table);

struct IndicesColumn {
  std::string label;
  InflationIndices indices;
  std::optional<double> theta;
  std::optional<double> omega;
};

struct IndicesReport {
  RunManifest manifest;
  std::size_t n = 0;
  std::size_t n0 = 0;
  double mean = 0.0;
  std::vector<IndicesColumn> columns;  // Sample, Poisson, Geometric, ZIP, ZIG
};

// Sample indices come from the raw counts when the summary has a histogram;
// otherwise kappa3 is taken from sample_kappa3 if given and left empty if not.
IndicesReport indices_report(const CountSummary& sample, std::optional<double> sample_kappa3,
                             RunManifest manifest);

nlohmann::ordered_json to_json(const IndicesReport& report);
void write_text(std::ostream& out, const IndicesReport& report);

}  // namespace zips

#endif  // ZIPS_REPORT_HPP
