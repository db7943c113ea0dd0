#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "zips/report.hpp"

namespace zips {
namespace {

using nlohmann::json;

RunManifest manifest_for(const std::string& fingerprint) {
  RunManifest m;
  m.command = "fit --data claims.csv";
  m.inputs = {"claims.csv"};
  m.data_fingerprint = fingerprint;
  m.family = "poisson";
  m.inflated = true;
  m.estimator = "mle";
  m.seed = 7;
  m.timestamp = "2024-01-01T00:00:00Z";
  return m;
}

ComparisonRow row(std::string model, double aic, double bic, std::optional<double> dic = {}) {
  ComparisonRow r;
  r.model = std::move(model);
  r.estimator = dic ? "bayes" : "mle";
  r.data_fingerprint = "abc";
  r.n = 100;
  r.parameters = 2;
  r.loglik = -50.0;
  r.aic = aic;
  r.bic = bic;
  r.dic = dic;
  return r;
}

std::string text_of(const auto& report) {
  std::ostringstream out;
  write_text(out, report);
  return out.str();
}

TEST(Fingerprint, KnownVectors) {
  EXPECT_EQ(fnv1a_hex(""), "cbf29ce484222325");
  EXPECT_EQ(fnv1a_hex("a"), "af63dc4c8601ec8c");
  EXPECT_EQ(fnv1a_hex("foobar"), "85944171f73967e8");
  EXPECT_NE(fnv1a_hex("ab"), fnv1a_hex("ba"));
}

TEST(ModelLabel, AllCases) {
  EXPECT_EQ(model_label(FamilyKind::Poisson, false, "mle"), "Poisson");
  EXPECT_EQ(model_label(FamilyKind::Poisson, true, "mle"), "ZIP");
  EXPECT_EQ(model_label(FamilyKind::Geometric, true, "mle"), "ZIG");
  EXPECT_EQ(model_label(FamilyKind::NegativeBinomial, false, "mle"), "Negative Binomial");
  EXPECT_EQ(model_label(FamilyKind::NegativeBinomial, true, "mle"), "ZINB");
  EXPECT_EQ(model_label(FamilyKind::Binomial, true, "mle"), "ZIB");
  EXPECT_EQ(model_label(FamilyKind::Logarithmic, true, "mle"), "ZILS");
  EXPECT_EQ(model_label(FamilyKind::Poisson, true, "bayes"), "BZIPS");
  EXPECT_EQ(model_label(FamilyKind::Geometric, true, "bayes"), "BZIGPS");
  EXPECT_EQ(model_label(FamilyKind::Poisson, false, "bayes"), "Bayes Poisson");
}

TEST(FitReportMle, FieldsAndJson) {
  const auto summary = CountSummary::from_summaries(67856, 63232, 0.07275);
  const auto family = PowerSeriesFamily::poisson();
  const auto fit = mle_nocov(summary, family, true);
  const auto r = fit_report_from_mle(fit, family, true, manifest_for("abc"));
  EXPECT_EQ(r.model, "ZIP");
  EXPECT_EQ(r.parameters, 2u);
  EXPECT_EQ(r.n, 67856u);
  EXPECT_NEAR(r.aic, -2.0 * r.loglik + 4.0, 1e-9);
  EXPECT_NEAR(r.bic, -2.0 * r.loglik + 2.0 * std::log(67856.0), 1e-9);
  EXPECT_FALSE(r.dic.has_value());

  const auto j = to_json(r);
  std::vector<std::string> keys;
  for (const auto& [k, v] : j.items()) keys.push_back(k);
  const std::vector<std::string> expected{"report", "manifest", "model", "estimator", "family",
                                          "inflated", "link", "n", "parameters", "loglik",
                                          "aic", "bic", "dic", "p_d", "nb_r", "converged",
                                          "coefficients", "mcmc", "warnings"};
  EXPECT_EQ(keys, expected);
  EXPECT_TRUE(j["dic"].is_null());
  EXPECT_TRUE(j["mcmc"].is_null());
  ASSERT_EQ(j["coefficients"].size(), r.coefficients.size());
  EXPECT_TRUE(j["coefficients"][0].contains("std_error"));
  EXPECT_FALSE(j["coefficients"][0].contains("posterior_sd"));
}

TEST(FitReportMle, JsonRoundTripsEveryNumberExactly) {
  const auto summary = CountSummary::from_summaries(67856, 63232, 0.07275);
  const auto family = PowerSeriesFamily::geometric();
  const auto r = fit_report_from_mle(mle_nocov(summary, family, true), family, true, manifest_for("abc"));
  const auto parsed = json::parse(to_json(r).dump());
  EXPECT_EQ(parsed["loglik"].get<double>(), r.loglik);
  EXPECT_EQ(parsed["aic"].get<double>(), r.aic);
  for (std::size_t i = 0; i < r.coefficients.size(); ++i) {
    EXPECT_EQ(parsed["coefficients"][i]["estimate"].get<double>(), r.coefficients[i].estimate);
  }
  const std::string text = text_of(r);
  EXPECT_NE(text.find("Wald"), std::string::npos);
  EXPECT_NE(text.find("Run: zips fit --data claims.csv"), std::string::npos);
  EXPECT_NE(text.find("seed 7"), std::string::npos);
}

TEST(FitReportJson, NonFiniteBecomesNull) {
  FitReport r;
  r.estimator = "mle";
  r.loglik = -INFINITY;
  r.aic = std::numeric_limits<double>::quiet_NaN();
  r.coefficients.push_back({"x", INFINITY, std::nullopt, std::nullopt, "", std::nullopt,
                            std::nullopt, std::nullopt});
  const auto j = to_json(r);
  EXPECT_TRUE(j["loglik"].is_null());
  EXPECT_TRUE(j["aic"].is_null());
  EXPECT_TRUE(j["coefficients"][0]["estimate"].is_null());
  EXPECT_NO_THROW(json::parse(j.dump()));
}

TEST(FitReportBayes, SummaryAndFooter) {
  std::vector<std::int64_t> y;
  RandomStream rng(3);
  const ZeroInflatedModel truth(PowerSeriesFamily::poisson(), 1.2, 0.3);
  for (int i = 0; i < 300; ++i) y.push_back(zi_sample(truth, rng));
  const auto d = DesignData::intercept_only(y);
  McmcConfig config;
  config.chains = 2;
  config.iterations = 2000;
  config.burn_in = 1000;
  config.seed = 11;
  const auto chains = run_mcmc(d, PowerSeriesFamily::poisson(), PriorSpec{}, config);
  auto m = manifest_for("abc");
  m.estimator = "bayes";
  const auto r = fit_report_from_bayes(chains, config, PowerSeriesFamily::poisson(), true,
                                       ThetaLink::Log, y.size(), m);
  EXPECT_EQ(r.model, "BZIPS");
  ASSERT_TRUE(r.mcmc.has_value());
  ASSERT_TRUE(r.dic.has_value());
  EXPECT_EQ(r.coefficients.size(), 2u);
  for (const auto& c : r.coefficients) {
    EXPECT_TRUE(c.ci95.has_value());
    EXPECT_TRUE(c.rhat.has_value());
  }
  EXPECT_EQ(r.converged, *r.mcmc->max_rhat < 1.1);
  const auto j = to_json(r);
  EXPECT_TRUE(j["coefficients"][0].contains("posterior_sd"));
  EXPECT_EQ(j["mcmc"]["chains"], 2);
  EXPECT_NE(text_of(r).find("credible interval"), std::string::npos);

  config.chains = 1;
  const auto single = run_mcmc(d, PowerSeriesFamily::poisson(), PriorSpec{}, config);
  const auto rs = fit_report_from_bayes(single, config, PowerSeriesFamily::poisson(), true,
                                        ThetaLink::Log, y.size(), m);
  EXPECT_TRUE(rs.converged);
  EXPECT_FALSE(rs.warnings.empty());
}

TEST(Compare, PicksSmallestWithFirstOnTies) {
  const auto t = compare_models({row("A", 10.0, 12.0), row("B", 10.0, 11.0), row("C", 11.0, 11.0)},
                                manifest_for("abc"));
  EXPECT_EQ(t.best_aic, 0u);
  EXPECT_EQ(t.best_bic, 1u);
  EXPECT_FALSE(t.best_dic.has_value());
  const auto j = to_json(t);
  EXPECT_TRUE(j["rows"][0]["lowest"]["aic"].get<bool>());
  EXPECT_FALSE(j["rows"][1]["lowest"]["aic"].get<bool>());
  EXPECT_TRUE(j["rows"][0]["dic"].is_null());
}

TEST(Compare, DicSkipsRowsWithoutIt) {
  const auto t = compare_models({row("ZIP", 5.0, 5.0), row("BZIPS", 6.0, 6.0, 9.0),
                                 row("BZIGPS", 7.0, 7.0, 8.5)},
                                manifest_for("abc"));
  ASSERT_TRUE(t.best_dic.has_value());
  EXPECT_EQ(*t.best_dic, 2u);
  const std::string text = text_of(t);
  EXPECT_NE(text.find("8.500 <"), std::string::npos) << text;
  EXPECT_NE(text.find("—"), std::string::npos);
}

TEST(Compare, RefusesBadInput) {
  EXPECT_THROW(compare_models({row("A", 1, 1)}, {}), std::invalid_argument);
  auto other = row("B", 1, 1);
  other.data_fingerprint = "xyz";
  EXPECT_THROW(compare_models({row("A", 1, 1), other}, {}), std::invalid_argument);
  auto bigger = row("B", 1, 1);
  bigger.n = 101;
  EXPECT_THROW(compare_models({row("A", 1, 1), bigger}, {}), std::invalid_argument);
}

TEST(Compare, RowFromSavedJson) {
  const auto summary = CountSummary::from_summaries(1000, 900, 0.15);
  const auto family = PowerSeriesFamily::poisson();
  const auto r = fit_report_from_mle(mle_nocov(summary, family, true), family, true, manifest_for("abc"));
  const auto j = json::parse(to_json(r).dump());
  const auto from_json = comparison_row(j);
  const auto direct = comparison_row(r);
  EXPECT_EQ(from_json.model, direct.model);
  EXPECT_EQ(from_json.data_fingerprint, "abc");
  EXPECT_EQ(from_json.aic, direct.aic);
  EXPECT_EQ(from_json.n, 1000u);
  EXPECT_FALSE(from_json.dic.has_value());

  for (const char* key : {"model", "aic", "n"}) {
    auto broken = j;
    broken.erase(key);
    try {
      comparison_row(broken);
      ADD_FAILURE() << key;
    } catch (const std::invalid_argument& e) {
      EXPECT_NE(std::string(e.what()).find(key), std::string::npos);
    }
  }
  auto no_manifest = j;
  no_manifest.erase("manifest");
  EXPECT_THROW(comparison_row(no_manifest), std::invalid_argument);
}

TEST(Indices, SummariesWithoutKappa3) {
  const auto summary = CountSummary::from_summaries(67856, 63232, 0.07275);
  const auto r = indices_report(summary, std::nullopt, manifest_for("abc"));
  ASSERT_EQ(r.columns.size(), 5u);
  const std::vector<std::string> labels{"Sample", "Poisson", "Geometric", "ZIP", "ZIG"};
  for (std::size_t i = 0; i < labels.size(); ++i) EXPECT_EQ(r.columns[i].label, labels[i]);
  EXPECT_FALSE(r.columns[0].indices.kappa3.has_value());
  EXPECT_FALSE(r.columns[1].omega.has_value());
  ASSERT_TRUE(r.columns[4].omega.has_value());
  EXPECT_LT(*r.columns[4].omega, 0.0);
  const auto j = to_json(r);
  EXPECT_TRUE(j["columns"][0]["kappa3"].is_null());
  EXPECT_EQ(j["n0"], 63232);
  const std::string text = text_of(r);
  EXPECT_NE(text.find("—"), std::string::npos);
  EXPECT_NE(text.find("ZIG"), std::string::npos);
}

TEST(Indices, HistogramMatchesSummaries) {
  std::vector<std::int64_t> y;
  RandomStream rng(5);
  const ZeroInflatedModel truth(PowerSeriesFamily::poisson(), 0.8, 0.4);
  for (int i = 0; i < 5000; ++i) y.push_back(zi_sample(truth, rng));
  const auto counts = CountSummary::from_counts(y);
  const auto summaries = CountSummary::from_summaries(counts.n, counts.n0, counts.mean());
  const auto a = indices_report(counts, std::nullopt, {});
  const auto b = indices_report(summaries, std::nullopt, {});
  ASSERT_TRUE(a.columns[0].indices.kappa3.has_value());
  for (std::size_t i = 0; i < a.columns.size(); ++i) {
    EXPECT_NEAR(a.columns[i].indices.p0, b.columns[i].indices.p0, 1e-12) << i;
    EXPECT_NEAR(a.columns[i].indices.z_index, b.columns[i].indices.z_index, 1e-10) << i;
  }
}

}  // namespace
}  // namespace zips
