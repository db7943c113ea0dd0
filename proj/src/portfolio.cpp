#include "zips/portfolio.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <thread>

#include "zips/numeric.hpp"
#include "zips/random.hpp"
#include "zips/zero_inflated.hpp"

namespace zips {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string cell_error(std::size_t line, std::string_view column, std::string_view cell,
                       std::string_view what) {
  std::ostringstream msg;
  msg << "line " << line << ", column " << column << ": " << what << " (got '" << cell << "')";
  return msg.str();
}

template <typename T>
bool parse_number(std::string_view cell, T& value) {
  const auto* end = cell.data() + cell.size();
  const auto [ptr, ec] = std::from_chars(cell.data(), end, value);
  return ec == std::errc() && ptr == end;
}

bool is_covariate(std::string_view name) {
  return std::find(kCovariateColumns.begin(), kCovariateColumns.end(), name) !=
         kCovariateColumns.end();
}

double parse_real(const std::string& key, std::string_view value) {
  double v = 0.0;
  if (!parse_number(value, v) || !std::isfinite(v)) {
    throw std::invalid_argument("generator config: " + key + " is not a finite number");
  }
  return v;
}

}  // namespace

std::vector<PolicyRecord> read_policy_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw SchemaError("empty CSV: no header line");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const auto header = split_commas(line);

  std::array<int, kPolicyColumns.size()> index;
  index.fill(-1);
  std::vector<std::string> unknown;
  for (std::size_t i = 0; i < header.size(); ++i) {
    const auto it = std::find(kPolicyColumns.begin(), kPolicyColumns.end(), header[i]);
    if (it == kPolicyColumns.end()) {
      unknown.emplace_back(header[i]);
      continue;
    }
    const auto slot = static_cast<std::size_t>(it - kPolicyColumns.begin());
    if (index[slot] >= 0) throw SchemaError("duplicate column: " + std::string(header[i]));
    index[slot] = static_cast<int>(i);
  }
  std::vector<std::string> missing;
  for (std::size_t k = 0; k < kPolicyColumns.size(); ++k) {
    if (index[k] < 0) missing.emplace_back(kPolicyColumns[k]);
  }
  if (!missing.empty() || !unknown.empty()) {
    std::string msg = "CSV schema mismatch.";
    if (!missing.empty()) {
      msg += " Missing columns:";
      for (const auto& m : missing) msg += " " + m;
      msg += ".";
    }
    if (!unknown.empty()) {
      msg += " Unknown columns:";
      for (const auto& u : unknown) msg += " '" + u + "'";
      msg += ".";
    }
    throw SchemaError(msg);
  }

  std::vector<PolicyRecord> records;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_commas(line);
    if (cells.size() != header.size()) {
      throw SchemaError("line " + std::to_string(line_no) + ": expected " +
                        std::to_string(header.size()) + " fields, found " +
                        std::to_string(cells.size()));
    }
    auto cell = [&](std::size_t k) { return cells[static_cast<std::size_t>(index[k])]; };
    auto binary = [&](std::size_t k) {
      int v = 0;
      if (!parse_number(cell(k), v) || (v != 0 && v != 1)) {
        throw SchemaError(cell_error(line_no, kPolicyColumns[k], cell(k), "expected 0 or 1"));
      }
      return v;
    };
    PolicyRecord r;
    if (!parse_number(cell(0), r.num_claims) || r.num_claims < 0) {
      throw SchemaError(
          cell_error(line_no, kPolicyColumns[0], cell(0), "expected a nonnegative integer"));
    }
    if (!parse_number(cell(1), r.vehicle_value) || !std::isfinite(r.vehicle_value) ||
        r.vehicle_value < 0.0) {
      throw SchemaError(
          cell_error(line_no, kPolicyColumns[1], cell(1), "expected a nonnegative real"));
    }
    r.gender = binary(2);
    r.age_young = binary(3);
    r.age_old = binary(4);
    r.vehicle_age_young = binary(5);
    if (r.age_young == 1 && r.age_old == 1) {
      throw SchemaError("line " + std::to_string(line_no) +
                        ": age_young and age_old are both 1");
    }
    records.push_back(r);
  }
  return records;
}

std::vector<PolicyRecord> read_policy_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return read_policy_csv(in);
}

void write_policy_csv(std::ostream& out, std::span<const PolicyRecord> records) {
  for (std::size_t k = 0; k < kPolicyColumns.size(); ++k) {
    out << (k ? "," : "") << kPolicyColumns[k];
  }
  out << '\n';
  const auto old_precision = out.precision(17);
  for (const auto& r : records) {
    out << r.num_claims << ',' << r.vehicle_value << ',' << r.gender << ',' << r.age_young << ','
        << r.age_old << ',' << r.vehicle_age_young << '\n';
  }
  out.precision(old_precision);
}

void write_policy_csv(const std::filesystem::path& path, std::span<const PolicyRecord> records) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_policy_csv(out, records);
  out.flush();
  if (!out) throw std::runtime_error("error while writing " + path.string());
}

double covariate_value(const PolicyRecord& record, std::string_view column) {
  if (column == "veh_value") return record.vehicle_value;
  if (column == "gender") return record.gender;
  if (column == "age_young") return record.age_young;
  if (column == "age_old") return record.age_old;
  if (column == "veh_age_young") return record.vehicle_age_young;
  throw std::invalid_argument("unknown covariate column: " + std::string(column));
}

std::vector<VariableSummary> summarize_dataset(std::span<const PolicyRecord> records) {
  if (records.empty()) throw std::invalid_argument("summarize_dataset needs at least one record");
  using Getter = double (*)(const PolicyRecord&);
  const std::vector<std::pair<std::string, Getter>> columns{
      {"Number of claims", [](const PolicyRecord& r) { return static_cast<double>(r.num_claims); }},
      {"Vehicle value", [](const PolicyRecord& r) { return r.vehicle_value; }},
      {"Gender", [](const PolicyRecord& r) { return static_cast<double>(r.gender); }},
      {"Young age", [](const PolicyRecord& r) { return static_cast<double>(r.age_young); }},
      {"Medium age",
       [](const PolicyRecord& r) { return static_cast<double>(1 - r.age_young - r.age_old); }},
      {"Old age", [](const PolicyRecord& r) { return static_cast<double>(r.age_old); }},
      {"Vehicle age", [](const PolicyRecord& r) { return static_cast<double>(r.vehicle_age_young); }},
  };
  const double n = static_cast<double>(records.size());
  std::vector<VariableSummary> out;
  std::vector<double> values(records.size());
  for (const auto& [name, get] : columns) {
    VariableSummary s;
    s.name = name;
    for (std::size_t i = 0; i < records.size(); ++i) values[i] = get(records[i]);
    s.mean = pairwise_sum(values) / n;
    s.min = *std::min_element(values.begin(), values.end());
    s.max = *std::max_element(values.begin(), values.end());
    for (double& v : values) v = (v - s.mean) * (v - s.mean);
    s.variance = pairwise_sum(values) / n;
    out.push_back(std::move(s));
  }
  return out;
}

DesignData design_from_records(std::span<const PolicyRecord> records,
                               const std::vector<std::string>& x_columns,
                               const std::vector<std::string>& z_columns) {
  auto build = [&](const std::vector<std::string>& cols, std::vector<std::string>& names) {
    Matrix m(static_cast<Eigen::Index>(records.size()), static_cast<Eigen::Index>(cols.size() + 1));
    names = {"intercept"};
    for (const auto& c : cols) {
      if (!is_covariate(c)) throw std::invalid_argument("unknown covariate column: " + c);
      names.push_back(c);
    }
    for (std::size_t i = 0; i < records.size(); ++i) {
      const auto row = static_cast<Eigen::Index>(i);
      m(row, 0) = 1.0;
      for (std::size_t j = 0; j < cols.size(); ++j) {
        m(row, static_cast<Eigen::Index>(j + 1)) = covariate_value(records[i], cols[j]);
      }
    }
    return m;
  };
  std::vector<std::int64_t> y;
  y.reserve(records.size());
  for (const auto& r : records) y.push_back(r.num_claims);
  std::vector<std::string> x_names;
  std::vector<std::string> z_names;
  Matrix x = build(x_columns, x_names);
  Matrix z = build(z_columns, z_names);
  return DesignData(std::move(y), std::move(x), std::move(z), std::move(x_names),
                    std::move(z_names));
}

PowerSeriesFamily GeneratorConfig::power_series() const { return make_family(family, nuisance); }

ThetaLink GeneratorConfig::theta_link() const {
  return link.value_or(default_theta_link(power_series()));
}

void GeneratorConfig::validate() const {
  if (!(vehicle_value_mean > 0.0) || !(vehicle_value_variance > 0.0)) {
    throw std::invalid_argument("vehicle value mean and variance must be positive");
  }
  for (double share : {gender_share, age_young_share, age_old_share, vehicle_age_young_share}) {
    if (!(share >= 0.0 && share <= 1.0)) {
      throw std::invalid_argument("marginal shares must lie in [0, 1]");
    }
  }
  if (age_young_share + age_old_share > 1.0) {
    throw std::invalid_argument("young and old age shares sum above 1");
  }
  if (block_size == 0) throw std::invalid_argument("block_size must be positive");
  if (!beta.contains("intercept")) throw std::invalid_argument("beta.intercept is required");
  if (!gamma.empty() && !gamma.contains("intercept")) {
    throw std::invalid_argument("gamma.intercept is required when gamma is given");
  }
  for (const auto* block : {&beta, &gamma}) {
    for (const auto& [name, value] : *block) {
      if (name != "intercept" && !is_covariate(name)) {
        throw std::invalid_argument("unknown coefficient column: " + name);
      }
      if (!std::isfinite(value)) throw std::invalid_argument("coefficient " + name + " not finite");
    }
  }
  (void)power_series();
}

GeneratorConfig GeneratorConfig::parse(std::istream& in) {
  GeneratorConfig cfg;
  cfg.beta.clear();
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view(line);
    if (const auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
    view = trim(view);
    if (view.empty()) continue;
    const auto eq = view.find('=');
    if (eq == std::string_view::npos) {
      throw std::invalid_argument("generator config line " + std::to_string(line_no) +
                                  ": expected key = value");
    }
    const std::string key(trim(view.substr(0, eq)));
    const std::string_view value = trim(view.substr(eq + 1));
    if (key == "vehicle_value.mean") {
      cfg.vehicle_value_mean = parse_real(key, value);
    } else if (key == "vehicle_value.variance") {
      cfg.vehicle_value_variance = parse_real(key, value);
    } else if (key == "share.gender") {
      cfg.gender_share = parse_real(key, value);
    } else if (key == "share.age_young") {
      cfg.age_young_share = parse_real(key, value);
    } else if (key == "share.age_old") {
      cfg.age_old_share = parse_real(key, value);
    } else if (key == "share.veh_age_young") {
      cfg.vehicle_age_young_share = parse_real(key, value);
    } else if (key == "family") {
      const auto kind = family_kind_from_string(value);
      if (!kind) throw std::invalid_argument("generator config: unknown family " + std::string(value));
      cfg.family = *kind;
    } else if (key == "family.r" || key == "family.n") {
      cfg.nuisance = parse_real(key, value);
    } else if (key == "link") {
      if (value == "log") {
        cfg.link = ThetaLink::Log;
      } else if (value == "logit") {
        cfg.link = ThetaLink::Logit;
      } else {
        throw std::invalid_argument("generator config: link must be log or logit");
      }
    } else if (key == "block_size") {
      const double b = parse_real(key, value);
      if (!(b >= 1.0) || b != std::floor(b)) {
        throw std::invalid_argument("generator config: block_size must be a positive integer");
      }
      cfg.block_size = static_cast<std::size_t>(b);
    } else if (key.starts_with("beta.")) {
      cfg.beta[key.substr(5)] = parse_real(key, value);
    } else if (key.starts_with("gamma.")) {
      cfg.gamma[key.substr(6)] = parse_real(key, value);
    } else {
      throw std::invalid_argument("generator config: unknown key " + key);
    }
  }
  cfg.validate();
  return cfg;
}

GeneratorConfig GeneratorConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return parse(in);
}

std::vector<PolicyRecord> generate_portfolio(const GeneratorConfig& config, std::size_t n,
                                             std::uint64_t seed) {
  config.validate();
  const PowerSeriesFamily family = config.power_series();
  const ThetaLink link = config.theta_link();
  const double sigma2 =
      std::log1p(config.vehicle_value_variance /
                 (config.vehicle_value_mean * config.vehicle_value_mean));
  const double mu = std::log(config.vehicle_value_mean) - 0.5 * sigma2;
  const double sigma = std::sqrt(sigma2);

  auto predictor = [](const std::map<std::string, double>& coeffs, const PolicyRecord& r) {
    double eta = 0.0;
    for (const auto& [name, value] : coeffs) {
      eta += value * (name == "intercept" ? 1.0 : covariate_value(r, name));
    }
    return eta;
  };

  std::vector<PolicyRecord> records(n);
  const std::size_t blocks = (n + config.block_size - 1) / config.block_size;
  auto fill_block = [&](std::size_t b) {
    RandomStream rng(seed, b);
    const std::size_t end = std::min(n, (b + 1) * config.block_size);
    for (std::size_t i = b * config.block_size; i < end; ++i) {
      PolicyRecord& r = records[i];
      r.vehicle_value = std::exp(mu + sigma * rng.normal());
      r.gender = rng.bernoulli(config.gender_share) ? 1 : 0;
      const double u = rng.uniform();
      r.age_young = u < config.age_young_share ? 1 : 0;
      r.age_old = !r.age_young && u < config.age_young_share + config.age_old_share ? 1 : 0;
      r.vehicle_age_young = rng.bernoulli(config.vehicle_age_young_share) ? 1 : 0;
      const double eta = predictor(config.beta, r);
      if (std::abs(eta) > kMaxLinearPredictor) {
        throw LinkError("generator: linear predictor out of range at record " + std::to_string(i));
      }
      const double theta = link == ThetaLink::Log ? std::exp(eta) : logistic(eta);
      const double omega = config.gamma.empty() ? 0.0 : logistic(predictor(config.gamma, r));
      r.num_claims = zi_sample(ZeroInflatedModel(family, theta, omega), rng);
    }
  };

  const std::size_t workers =
      std::min<std::size_t>(blocks, std::max(1u, std::thread::hardware_concurrency()));
  if (workers <= 1) {
    for (std::size_t b = 0; b < blocks; ++b) fill_block(b);
    return records;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(workers);
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t b = next++; b < blocks; b = next++) fill_block(b);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return records;
}

}  // namespace zips
