#include "zips/report.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <ostream>
#include <stdexcept>

namespace zips {
namespace {

using ojson = nlohmann::ordered_json;

constexpr const char* kMissing = "—";

ojson number(double v) { return std::isfinite(v) ? ojson(v) : ojson(nullptr); }

ojson number(const std::optional<double>& v) { return v ? number(*v) : ojson(nullptr); }

std::string fixed(double v, int digits = 5) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::abs(v) < 0.5 * std::pow(10.0, -digits)) v = 0.0;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string fixed(const std::optional<double>& v, int digits = 5) {
  return v ? fixed(*v, digits) : kMissing;
}

std::string pad(const std::string& s, std::size_t width, bool right = false) {
  // Display width counts UTF-8 code points.
  std::size_t shown = 0;
  for (unsigned char c : s) shown += (c & 0xC0) != 0x80;
  if (shown >= width) return s;
  const std::string fill(width - shown, ' ');
  return right ? fill + s : s + fill;
}

std::optional<double> optional_number(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

template <typename T>
T required(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) {
    throw std::invalid_argument(std::string("fit report is missing '") + key + "'");
  }
  return j.at(key).get<T>();
}

void write_manifest_footer(std::ostream& out, const RunManifest& m) {
  out << "Run: zips " << m.command;
  if (!m.family.empty()) out << ", family " << m.family << (m.inflated ? " (inflated)" : "");
  if (!m.estimator.empty()) out << ", estimator " << m.estimator;
  if (m.seed) out << ", seed " << *m.seed;
  out << "\n     version " << m.tool_version << ", " << m.timestamp << '\n';
}

}  // namespace

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string utc_timestamp_now() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

ojson to_json(const RunManifest& m) {
  ojson j;
  j["command"] = m.command;
  j["inputs"] = m.inputs;
  j["data_fingerprint"] = m.data_fingerprint;
  j["family"] = m.family;
  j["inflated"] = m.inflated;
  j["estimator"] = m.estimator;
  j["settings"] = m.settings;
  j["seed"] = m.seed ? ojson(*m.seed) : ojson(nullptr);
  j["tool_version"] = m.tool_version;
  j["timestamp"] = m.timestamp;
  return j;
}

std::string model_label(FamilyKind family, bool inflated, std::string_view estimator) {
  const bool bayes = estimator == "bayes";
  if (bayes && inflated && family == FamilyKind::Poisson) return "BZIPS";
  if (bayes && inflated && family == FamilyKind::Geometric) return "BZIGPS";
  std::string label;
  switch (family) {
    case FamilyKind::Poisson: label = inflated ? "ZIP" : "Poisson"; break;
    case FamilyKind::NegativeBinomial: label = inflated ? "ZINB" : "Negative Binomial"; break;
    case FamilyKind::Geometric: label = inflated ? "ZIG" : "Geometric"; break;
    case FamilyKind::Binomial: label = inflated ? "ZIB" : "Binomial"; break;
    case FamilyKind::Logarithmic: label = inflated ? "ZILS" : "Logarithmic"; break;
  }
  return bayes ? "Bayes " + label : label;
}

FitReport fit_report_from_mle(const MleResult& fit, const PowerSeriesFamily& family, bool inflated,
                              RunManifest manifest) {
  FitReport r;
  r.manifest = std::move(manifest);
  r.model = model_label(family.kind(), inflated, "mle");
  r.estimator = "mle";
  r.family = family.name();
  r.inflated = inflated;
  r.link = to_string(fit.link);
  r.n = fit.n;
  r.parameters = fit.parameter_count() + (fit.profiled_r ? 1 : 0);
  r.loglik = fit.loglik_at_max;
  const auto ic = aic_bic(r.loglik, r.parameters, std::max<std::size_t>(r.n, 1));
  r.aic = ic.aic;
  r.bic = ic.bic;
  r.nb_r = fit.profiled_r;
  r.converged = fit.converged;
  r.warnings = fit.warnings;
  for (std::size_t i = 0; i < fit.parameter_count(); ++i) {
    CoefficientRow row;
    row.name = fit.parameter_names[i];
    row.estimate = fit.estimates[static_cast<Eigen::Index>(i)];
    if (fit.std_errors) {
      row.spread = (*fit.std_errors)[static_cast<Eigen::Index>(i)];
      row.p_value = wald_p_value(row.estimate, *row.spread);
      row.stars = stars_from_p_value(*row.p_value);
    }
    r.coefficients.push_back(std::move(row));
  }
  return r;
}

FitReport fit_report_from_bayes(const ChainSet& chains, const McmcConfig& config,
                                const PowerSeriesFamily& family, bool inflated, ThetaLink link,
                                std::size_t n, RunManifest manifest, double rhat_threshold) {
  FitReport r;
  r.manifest = std::move(manifest);
  r.model = model_label(family.kind(), inflated, "bayes");
  r.estimator = "bayes";
  r.family = family.name();
  r.inflated = inflated;
  r.link = to_string(link);
  r.n = n;
  r.parameters = chains.dim;

  const PosteriorSummary summary = diagnostics(chains);
  for (const auto& p : summary.parameters) {
    CoefficientRow row;
    row.name = p.name;
    row.estimate = p.mean;
    row.spread = p.sd;
    row.stars = p.stars;
    row.ci95 = p.ci95;
    row.rhat = p.rhat;
    row.ess = p.ess;
    r.coefficients.push_back(std::move(row));
  }
  const DicResult d = dic(chains);
  r.loglik = -0.5 * d.deviance_at_mean;
  const auto ic = aic_bic(r.loglik, r.parameters, std::max<std::size_t>(n, 1));
  r.aic = ic.aic;
  r.bic = ic.bic;
  if (d.valid) {
    r.dic = d.dic;
    r.p_d = d.p_d;
  } else {
    r.warnings.push_back(d.warning);
  }

  McmcSummary mc;
  mc.chains = config.chains;
  mc.iterations = config.iterations;
  mc.burn_in = config.burn_in;
  mc.thin = config.thin;
  mc.max_rhat = summary.max_rhat();
  mc.min_ess = summary.min_ess();
  mc.acceptance_rates = chains.acceptance_rates;
  mc.warm_start_fallback = chains.warm_start_fallback;
  if (chains.warm_start_fallback) {
    r.warnings.push_back("maximum likelihood warm start failed; chains started from zero");
  }
  if (mc.max_rhat) {
    r.converged = *mc.max_rhat < rhat_threshold;
    if (!r.converged) r.warnings.push_back("split R-hat at or above " + fixed(rhat_threshold, 2));
  } else {
    r.converged = true;
    r.warnings.push_back("single chain: R-hat not available");
  }
  r.mcmc = std::move(mc);
  return r;
}

ojson to_json(const FitReport& r) {
  ojson j;
  j["report"] = "fit";
  j["manifest"] = to_json(r.manifest);
  j["model"] = r.model;
  j["estimator"] = r.estimator;
  j["family"] = r.family;
  j["inflated"] = r.inflated;
  j["link"] = r.link;
  j["n"] = r.n;
  j["parameters"] = r.parameters;
  j["loglik"] = number(r.loglik);
  j["aic"] = number(r.aic);
  j["bic"] = number(r.bic);
  j["dic"] = number(r.dic);
  j["p_d"] = number(r.p_d);
  j["nb_r"] = number(r.nb_r);
  j["converged"] = r.converged;
  ojson rows = ojson::array();
  for (const auto& c : r.coefficients) {
    ojson row;
    row["name"] = c.name;
    row["estimate"] = number(c.estimate);
    row[r.estimator == "bayes" ? "posterior_sd" : "std_error"] = number(c.spread);
    row["p_value"] = number(c.p_value);
    row["stars"] = c.stars;
    row["ci95"] = c.ci95 ? ojson::array({number(c.ci95->lower), number(c.ci95->upper)})
                         : ojson(nullptr);
    row["rhat"] = number(c.rhat);
    row["ess"] = number(c.ess);
    rows.push_back(std::move(row));
  }
  j["coefficients"] = std::move(rows);
  if (r.mcmc) {
    ojson m;
    m["chains"] = r.mcmc->chains;
    m["iterations"] = r.mcmc->iterations;
    m["burn_in"] = r.mcmc->burn_in;
    m["thin"] = r.mcmc->thin;
    m["max_rhat"] = number(r.mcmc->max_rhat);
    m["min_ess"] = number(r.mcmc->min_ess);
    m["acceptance_rates"] = r.mcmc->acceptance_rates;
    m["warm_start_fallback"] = r.mcmc->warm_start_fallback;
    j["mcmc"] = std::move(m);
  } else {
    j["mcmc"] = nullptr;
  }
  j["warnings"] = r.warnings;
  return j;
}

void write_text(std::ostream& out, const FitReport& r) {
  const bool bayes = r.estimator == "bayes";
  out << r.model << " (" << (bayes ? "Bayesian, posterior mean and sd" : "maximum likelihood")
      << ")\n";
  out << "family " << r.family << ", link " << r.link << ", inflated "
      << (r.inflated ? "yes" : "no") << ", n = " << r.n << '\n';
  if (!r.manifest.inputs.empty()) {
    out << "data " << r.manifest.inputs.front() << " [" << r.manifest.data_fingerprint << "]\n";
  }
  out << '\n';

  std::size_t name_width = 12;
  for (const auto& c : r.coefficients) name_width = std::max(name_width, c.name.size() + 2);
  out << pad("", name_width) << pad("Estimate", 14, true);
  if (bayes) out << pad("95% interval", 28, true) << pad("R-hat", 9, true) << pad("ESS", 10, true);
  out << '\n';
  for (const auto& c : r.coefficients) {
    out << pad(c.name, name_width) << pad(fixed(c.estimate), 14, true) << c.stars;
    if (bayes) {
      out << std::string(3 - c.stars.size(), ' ');
      const std::string ci =
          c.ci95 ? "[" + fixed(c.ci95->lower) + ", " + fixed(c.ci95->upper) + "]" : kMissing;
      out << pad(ci, 25, true) << pad(fixed(c.rhat, 3), 9, true) << pad(fixed(c.ess, 0), 10, true);
    }
    out << '\n';
    out << pad("", name_width) << pad("(" + fixed(c.spread) + ")", 14, true) << '\n';
  }
  out << '\n';
  out << "log-likelihood " << fixed(r.loglik) << (bayes ? " (at the posterior mean)" : "")
      << ", parameters " << r.parameters << '\n';
  out << "AIC " << fixed(r.aic) << "   BIC " << fixed(r.bic) << "   DIC " << fixed(r.dic);
  if (r.p_d) out << " (pD " << fixed(*r.p_d) << ")";
  out << '\n';
  if (r.nb_r) out << "negative binomial r (profiled) " << fixed(*r.nb_r) << '\n';
  if (r.mcmc) {
    out << "chains " << r.mcmc->chains << ", iterations " << r.mcmc->iterations << " (burn-in "
        << r.mcmc->burn_in << ", thin " << r.mcmc->thin << "), max R-hat "
        << fixed(r.mcmc->max_rhat, 3) << ", min ESS " << fixed(r.mcmc->min_ess, 0) << '\n';
  }
  out << "converged " << (r.converged ? "yes" : "no") << '\n';
  for (const auto& w : r.warnings) out << "warning: " << w << '\n';
  out << '\n';
  if (bayes) {
    out << "*** / ** / *: the 99% / 95% / 90% equal-tailed credible interval excludes 0.\n";
  } else {
    out << "*** / ** / *: two-sided Wald p-value below 0.01 / 0.05 / 0.10."
           " Standard errors in parentheses.\n";
  }
  write_manifest_footer(out, r.manifest);
}

ComparisonRow comparison_row(const FitReport& r) {
  return {r.model, r.estimator, r.manifest.data_fingerprint, r.n, r.parameters,
          r.loglik,  r.dic,       r.aic,                         r.bic};
}

ComparisonRow comparison_row(const nlohmann::json& j) {
  ComparisonRow row;
  row.model = required<std::string>(j, "model");
  row.estimator = required<std::string>(j, "estimator");
  if (!j.contains("manifest")) throw std::invalid_argument("fit report is missing 'manifest'");
  row.data_fingerprint = required<std::string>(j.at("manifest"), "data_fingerprint");
  row.n = required<std::size_t>(j, "n");
  row.parameters = required<std::size_t>(j, "parameters");
  row.loglik = required<double>(j, "loglik");
  row.dic = optional_number(j, "dic");
  row.aic = required<double>(j, "aic");
  row.bic = required<double>(j, "bic");
  return row;
}

ComparisonTable compare_models(std::vector<ComparisonRow> rows, RunManifest manifest) {
  if (rows.size() < 2) throw std::invalid_argument("compare needs at least two models");
  for (const auto& r : rows) {
    if (r.data_fingerprint != rows.front().data_fingerprint || r.n != rows.front().n) {
      throw std::invalid_argument("refusing to compare models fitted to different data (" +
                                  rows.front().model + " vs " + r.model + ")");
    }
  }
  ComparisonTable t;
  t.manifest = std::move(manifest);
  t.rows = std::move(rows);
  for (std::size_t i = 1; i < t.rows.size(); ++i) {
    if (t.rows[i].aic < t.rows[t.best_aic].aic) t.best_aic = i;
    if (t.rows[i].bic < t.rows[t.best_bic].bic) t.best_bic = i;
  }
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    if (!t.rows[i].dic) continue;
    if (!t.best_dic || *t.rows[i].dic < *t.rows[*t.best_dic].dic) t.best_dic = i;
  }
  return t;
}

ojson to_json(const ComparisonTable& t) {
  ojson j;
  j["report"] = "compare";
  j["manifest"] = to_json(t.manifest);
  ojson rows = ojson::array();
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& r = t.rows[i];
    ojson row;
    row["model"] = r.model;
    row["estimator"] = r.estimator;
    row["n"] = r.n;
    row["parameters"] = r.parameters;
    row["loglik"] = number(r.loglik);
    row["dic"] = number(r.dic);
    row["aic"] = number(r.aic);
    row["bic"] = number(r.bic);
    row["lowest"] = {{"dic", t.best_dic == i}, {"aic", t.best_aic == i}, {"bic", t.best_bic == i}};
    rows.push_back(std::move(row));
  }
  j["rows"] = std::move(rows);
  return j;
}

void write_text(std::ostream& out, const ComparisonTable& t) {
  std::size_t width = 8;
  for (const auto& r : t.rows) width = std::max(width, r.model.size() + 2);
  auto cell = [](const std::optional<double>& v, bool best) {
    return pad(fixed(v, 3) + (best ? " <" : "  "), 17, true);
  };
  out << pad("Model", width) << pad("DIC  ", 17, true) << pad("AIC  ", 17, true)
      << pad("BIC  ", 17, true) << '\n';
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& r = t.rows[i];
    out << pad(r.model, width) << cell(r.dic, t.best_dic == i) << cell(r.aic, t.best_aic == i)
        << cell(r.bic, t.best_bic == i) << '\n';
  }
  out << "\n< marks the smallest value in each column (the preferred model).\n";
  out << "DIC is only defined for Bayesian fits; Bayesian AIC/BIC use the log-likelihood at the"
         " posterior mean.\n";
  write_manifest_footer(out, t.manifest);
}

IndicesReport indices_report(const CountSummary& sample, std::optional<double> sample_kappa3,
                             RunManifest manifest) {
  IndicesReport r;
  r.manifest = std::move(manifest);
  r.n = sample.n;
  r.n0 = sample.n0;
  r.mean = sample.mean();

  IndicesColumn sample_col{"Sample", {}, std::nullopt, std::nullopt};
  if (sample.has_histogram()) {
    std::vector<std::int64_t> counts;
    counts.reserve(sample.n);
    for (std::size_t y = 0; y < sample.histogram.size(); ++y) {
      counts.insert(counts.end(), sample.histogram[y], static_cast<std::int64_t>(y));
    }
    sample_col.indices = inflation_indices_sample(counts);
  } else {
    sample_col.indices = inflation_indices_summaries(sample.n, sample.n0, r.mean, sample_kappa3);
  }
  r.columns.push_back(std::move(sample_col));

  const std::vector<std::pair<PowerSeriesFamily, bool>> models{
      {PowerSeriesFamily::poisson(), false},
      {PowerSeriesFamily::geometric(), false},
      {PowerSeriesFamily::poisson(), true},
      {PowerSeriesFamily::geometric(), true}};
  for (const auto& [family, inflated] : models) {
    const MleResult fit = mle_nocov(sample, family, inflated);
    const double theta = *fit.theta_hat;
    const double omega = fit.omega_hat.value_or(0.0);
    IndicesColumn col;
    col.label = model_label(family.kind(), inflated, "mle");
    col.indices = inflation_indices_model(ZeroInflatedModel(family, theta, omega));
    col.theta = theta;
    if (inflated) col.omega = omega;
    r.columns.push_back(std::move(col));
  }
  return r;
}

ojson to_json(const IndicesReport& r) {
  ojson j;
  j["report"] = "indices";
  j["manifest"] = to_json(r.manifest);
  j["n"] = r.n;
  j["n0"] = r.n0;
  j["mean"] = number(r.mean);
  ojson cols = ojson::array();
  for (const auto& c : r.columns) {
    ojson col;
    col["label"] = c.label;
    col["p0"] = number(c.indices.p0);
    col["kappa3"] = number(c.indices.kappa3);
    col["z_index"] = number(c.indices.z_index);
    col["kappa_index"] = number(c.indices.kappa_index);
    col["mean"] = number(c.indices.mean);
    col["theta"] = number(c.theta);
    col["omega"] = number(c.omega);
    col["no_zeros"] = c.indices.no_zeros;
    cols.push_back(std::move(col));
  }
  j["columns"] = std::move(cols);
  return j;
}

void write_text(std::ostream& out, const IndicesReport& r) {
  out << "Inflation measures, n = " << r.n << ", zeros = " << r.n0
      << ", mean = " << fixed(r.mean) << "\n\n";
  out << pad("", 10);
  for (const auto& c : r.columns) out << pad(c.label, 12, true);
  out << '\n';
  auto line = [&](const char* label, auto get) {
    out << pad(label, 10);
    for (const auto& c : r.columns) out << pad(fixed(get(c)), 12, true);
    out << '\n';
  };
  line("p0", [](const IndicesColumn& c) { return std::optional<double>(c.indices.p0); });
  line("kappa3", [](const IndicesColumn& c) { return c.indices.kappa3; });
  line("z", [](const IndicesColumn& c) { return std::optional<double>(c.indices.z_index); });
  line("kappa", [](const IndicesColumn& c) { return c.indices.kappa_index; });
  out << '\n';
  line("theta", [](const IndicesColumn& c) { return c.theta; });
  line("omega", [](const IndicesColumn& c) { return c.omega; });
  out << "\nz = 1 + log(p0)/mean and kappa = kappa3/mean - 1; both are 0 under a Poisson"
         " model.\nFitted columns are maximum likelihood fits without covariates.\n";
  write_manifest_footer(out, r.manifest);
}

}  // namespace zips
