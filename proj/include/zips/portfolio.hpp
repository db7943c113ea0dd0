#ifndef ZIPS_PORTFOLIO_HPP
#define ZIPS_PORTFOLIO_HPP

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "zips/regression.hpp"

namespace zips {

// One motor policy. Vehicle value is in units of 10,000 AUD. Medium age is
// the baseline, so age_young and age_old are never both set.
struct PolicyRecord {
  std::int64_t num_claims = 0;
  double vehicle_value = 0.0;
  int gender = 0;
  int age_young = 0;
  int age_old = 0;
  int vehicle_age_young = 0;

  bool operator==(const PolicyRecord&) const = default;
};

inline constexpr std::array<std::string_view, 6> kPolicyColumns{
    "numclaims", "veh_value", "gender", "age_young", "age_old", "veh_age_young"};

// Covariate columns usable in a design matrix, in CSV order.
inline constexpr std::array<std::string_view, 5> kCovariateColumns{
    "veh_value", "gender", "age_young", "age_old", "veh_age_young"};

class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Columns are matched by header name; a missing or unknown column is a
// SchemaError naming all of them. Bad cell values report line and column.
std::vector<PolicyRecord> read_policy_csv(std::istream& in);
std::vector<PolicyRecord> read_policy_csv(const std::filesystem::path& path);

// Header in kPolicyColumns order; reals with 17 significant digits so a
// read-back reproduces every record exactly.
void write_policy_csv(std::ostream& out, std::span<const PolicyRecord> records);
void write_policy_csv(const std::filesystem::path& path, std::span<const PolicyRecord> records);

double covariate_value(const PolicyRecord& record, std::string_view column);

struct VariableSummary {
  std::string name;
  double mean = 0.0;
  double variance = 0.0;  // population convention (divide by n)
  double min = 0.0;
  double max = 0.0;
};

// Number of claims, vehicle value, gender, young/medium/old age, vehicle age.
std::vector<VariableSummary> summarize_dataset(std::span<const PolicyRecord> records);

// Intercept followed by the named covariate columns, for X and Z.
DesignData design_from_records(std::span<const PolicyRecord> records,
                               const std::vector<std::string>& x_columns,
                               const std::vector<std::string>& z_columns);

// Synthetic portfolio settings. Covariates are independent: a lognormal
// vehicle value matched to the given mean and variance, and Bernoulli
// binaries (age drawn as one categorical young/medium/old). Claims follow a
// ZIPS regression whose coefficients are keyed by column name plus
// "intercept"; an empty gamma means no inflation.
struct GeneratorConfig {
  double vehicle_value_mean = 1.77702;
  double vehicle_value_variance = 1.45258;
  double gender_share = 0.43110;
  double age_young_share = 0.27436;
  double age_old_share = 0.15072;
  double vehicle_age_young_share = 0.57492;

  FamilyKind family = FamilyKind::Poisson;
  std::optional<double> nuisance;  // r or n
  std::optional<ThetaLink> link;
  std::map<std::string, double> beta{{"intercept", 0.0}};
  std::map<std::string, double> gamma;
  std::size_t block_size = 8192;

  PowerSeriesFamily power_series() const;
  ThetaLink theta_link() const;
  // Throws std::invalid_argument on infeasible marginals or unknown
  // coefficient names.
  void validate() const;

  // key = value lines; '#' starts a comment. Keys: vehicle_value.mean,
  // vehicle_value.variance, share.gender, share.age_young, share.age_old,
  // share.veh_age_young, family, family.r, family.n, link, block_size,
  // beta.<column>, gamma.<column>.
  static GeneratorConfig parse(std::istream& in);
  static GeneratorConfig load(const std::filesystem::path& path);
};

// Deterministic in (config, n, seed): block b of block_size records draws
// from its own substream, so blocks may be filled concurrently.
std::vector<PolicyRecord> generate_portfolio(const GeneratorConfig& config, std::size_t n,
                                             std::uint64_t seed);

}  // namespace zips

#endif  // ZIPS_PORTFOLIO_HPP
