#include "adaptive_alloc/experiment_io.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace adaptive_alloc {

using nlohmann::json;

namespace {

constexpr const char* kTrialsHeader = "policy,B,p0,trial,errors,type1,type2,spent";
constexpr const char* kSummaryHeader = "policy,B,p0,mean_errors,std_err,trials";

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw std::invalid_argument(where + ": expected a JSON object");
  for (const auto& item : j.items())
    if (!allowed.count(item.key()))
      throw std::invalid_argument(where + ": unknown field '" + item.key() + "'");
}

template <class T>
void read_field(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config field '") + key + "': " + e.what());
  }
}

void check_schema(const json& j, const std::string& where) {
  if (!j.contains("schema_version")) return;
  const json& v = j.at("schema_version");
  if (!v.is_number_integer() || v.get<int>() != kSchemaVersion)
    throw std::invalid_argument(where + ": unsupported schema_version " + v.dump());
}

json prior_to_json(const TestPrior& p) {
  return {{"p0", p.p0}, {"mu0", p.mu0}, {"mu1", p.mu1}, {"var0", p.var0}, {"var1", p.var1}};
}

TestPrior prior_from_json(const json& j) {
  check_keys(j, {"p0", "mu0", "mu1", "var0", "var1"}, "prior");
  TestPrior p;
  read_field(j, "p0", p.p0);
  read_field(j, "mu0", p.mu0);
  read_field(j, "mu1", p.mu1);
  read_field(j, "var0", p.var0);
  read_field(j, "var1", p.var1);
  return p;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw std::runtime_error("malformed number '" + s + "'");
  return v;
}

int parse_int(const std::string& s) {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw std::runtime_error("malformed integer '" + s + "'");
  return v;
}

// Reads the schema line and header; returns the data lines.
std::vector<std::vector<std::string>> read_csv(std::istream& is, const char* header,
                                               std::size_t columns) {
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("csv: empty file");
  const std::string prefix = "#schema_version=";
  if (line.rfind(prefix, 0) != 0) throw std::runtime_error("csv: missing schema version line");
  if (parse_int(line.substr(prefix.size())) != kSchemaVersion)
    throw std::runtime_error("csv: unsupported schema version " + line.substr(prefix.size()));
  if (!std::getline(is, line) || line != header)
    throw std::runtime_error(std::string("csv: expected header '") + header + "'");
  std::vector<std::vector<std::string>> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    auto fields = split(line);
    if (fields.size() != columns)
      throw std::runtime_error("csv: wrong column count in line '" + line + "'");
    rows.push_back(std::move(fields));
  }
  return rows;
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string pad(const std::string& s, std::size_t width) {
  // Width counts code points so the >= sign does not skew columns.
  std::size_t len = 0;
  for (unsigned char ch : s)
    if ((ch & 0xC0) != 0x80) ++len;
  return s + std::string(width > len ? width - len : 0, ' ');
}

}  // namespace

std::string format_double(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

ExperimentConfig config_from_json(const json& j) {
  check_keys(j,
             {"schema_version", "n", "T_list", "rho_grid", "ds_rho", "bayesian_cull", "B_grid",
              "p0_grid", "prior", "nu2", "c", "trials", "seed", "policies", "solver",
              "calibration", "workers"},
             "config");
  check_schema(j, "config");
  ExperimentConfig cfg;
  read_field(j, "n", cfg.n);
  read_field(j, "T_list", cfg.T_list);
  read_field(j, "rho_grid", cfg.rho_grid);
  read_field(j, "ds_rho", cfg.ds_rho);
  if (j.contains("bayesian_cull")) {
    const std::string s = j.at("bayesian_cull").get<std::string>();
    if (s == "observation")
      cfg.bayesian_cull = CullStatistic::Observation;
    else if (s == "posterior")
      cfg.bayesian_cull = CullStatistic::Posterior;
    else
      throw std::invalid_argument("config: bayesian_cull must be 'observation' or 'posterior'");
  }
  read_field(j, "B_grid", cfg.B_grid);
  read_field(j, "p0_grid", cfg.p0_grid);
  if (j.contains("prior")) cfg.prior = prior_from_json(j.at("prior"));
  read_field(j, "nu2", cfg.nu2);
  read_field(j, "c", cfg.c);
  read_field(j, "trials", cfg.trials);
  read_field(j, "seed", cfg.seed);
  read_field(j, "policies", cfg.policies);
  read_field(j, "workers", cfg.workers);
  if (j.contains("solver")) {
    const json& s = j.at("solver");
    check_keys(s,
               {"grid_points", "refine_iters", "lambda_tol", "max_bisect", "bracket_rtol",
                "u_floor"},
               "solver");
    read_field(s, "grid_points", cfg.solver.grid_points);
    read_field(s, "refine_iters", cfg.solver.refine_iters);
    read_field(s, "lambda_tol", cfg.solver.lambda_tol);
    read_field(s, "max_bisect", cfg.solver.max_bisect);
    read_field(s, "bracket_rtol", cfg.solver.bracket_rtol);
    read_field(s, "u_floor", cfg.solver.u_floor);
  }
  if (j.contains("calibration")) {
    const json& s = j.at("calibration");
    check_keys(s,
               {"mc_samples", "beta_grid", "inner_reps", "golden_iters", "seed",
                "calibration_n"},
               "calibration");
    read_field(s, "mc_samples", cfg.calibration.mc_samples);
    read_field(s, "beta_grid", cfg.calibration.beta_grid);
    read_field(s, "inner_reps", cfg.calibration.inner_reps);
    read_field(s, "golden_iters", cfg.calibration.golden_iters);
    read_field(s, "seed", cfg.calibration.seed);
    read_field(s, "calibration_n", cfg.calibration.calibration_n);
  }
  cfg.validate();
  return cfg;
}

json config_to_json(const ExperimentConfig& cfg) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["n"] = cfg.n;
  j["T_list"] = cfg.T_list;
  j["rho_grid"] = cfg.rho_grid;
  j["ds_rho"] = cfg.ds_rho;
  j["bayesian_cull"] =
      cfg.bayesian_cull == CullStatistic::Observation ? "observation" : "posterior";
  j["B_grid"] = cfg.B_grid;
  j["p0_grid"] = cfg.p0_grid;
  j["prior"] = prior_to_json(cfg.prior);
  j["nu2"] = cfg.nu2;
  j["c"] = cfg.c;
  j["trials"] = cfg.trials;
  j["seed"] = cfg.seed;
  j["policies"] = cfg.policies;
  j["solver"] = {{"grid_points", cfg.solver.grid_points},
                 {"refine_iters", cfg.solver.refine_iters},
                 {"lambda_tol", cfg.solver.lambda_tol},
                 {"max_bisect", cfg.solver.max_bisect},
                 {"bracket_rtol", cfg.solver.bracket_rtol},
                 {"u_floor", cfg.solver.u_floor}};
  j["calibration"] = {{"mc_samples", cfg.calibration.mc_samples},
                      {"beta_grid", cfg.calibration.beta_grid},
                      {"inner_reps", cfg.calibration.inner_reps},
                      {"golden_iters", cfg.calibration.golden_iters},
                      {"seed", cfg.calibration.seed},
                      {"calibration_n", cfg.calibration.calibration_n}};
  return j;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config '" + path.string() + "'");
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw std::invalid_argument("config '" + path.string() + "': " + e.what());
  }
  return config_from_json(j);
}

std::string config_hash(const ExperimentConfig& cfg) {
  return hex64(fnv1a(config_to_json(cfg).dump()));
}

CalibrationKey CalibrationKey::make(const ExperimentConfig& cfg, int stages, double B,
                                    double p0) {
  const CalibrationConfig cal = calibration_for(cfg, stages, B, p0);
  CalibrationKey key;
  key.prior = cfg.prior;
  key.prior.p0 = p0;
  key.stages = stages;
  key.B = B;
  key.c = cfg.c;
  key.nu2 = cfg.nu2;
  key.n = cfg.n;
  key.seed = cal.seed;
  key.mc_samples = cal.mc_samples;
  key.calibration_n = cal.calibration_n;
  key.beta_grid = cal.beta_grid;
  key.golden_iters = cal.golden_iters;
  key.inner_reps = cal.inner_reps;
  return key;
}

json CalibrationKey::to_json() const {
  return {{"prior", prior_to_json(prior)},
          {"T", stages},
          {"B", B},
          {"c", c},
          {"nu2", nu2},
          {"n", n},
          {"seed", seed},
          {"mc_samples", mc_samples},
          {"calibration_n", calibration_n},
          {"beta_grid", beta_grid},
          {"golden_iters", golden_iters},
          {"inner_reps", inner_reps}};
}

std::string CalibrationKey::file_name() const {
  return "beta_T" + std::to_string(stages) + "_" + hex64(fnv1a(to_json().dump())) + ".json";
}

json calibration_to_json(const CachedCalibration& entry) {
  json j = entry.key.to_json();
  j["schema_version"] = kSchemaVersion;
  j["beta"] = entry.table.beta;
  j["u0"] = entry.u0;
  return j;
}

CachedCalibration calibration_from_json(const json& j) {
  if (!j.contains("schema_version"))
    throw std::runtime_error("calibration file: missing schema_version");
  check_schema(j, "calibration file");
  check_keys(j,
             {"schema_version", "prior", "T", "B", "c", "nu2", "n", "seed", "mc_samples",
              "calibration_n", "beta_grid", "golden_iters", "inner_reps", "beta", "u0"},
             "calibration file");
  CachedCalibration e;
  try {
    e.key.prior = prior_from_json(j.at("prior"));
    e.key.stages = j.at("T").get<int>();
    e.key.B = j.at("B").get<double>();
    e.key.c = j.at("c").get<double>();
    e.key.nu2 = j.at("nu2").get<double>();
    e.key.n = j.at("n").get<std::size_t>();
    e.key.seed = j.at("seed").get<std::uint64_t>();
    e.key.mc_samples = j.at("mc_samples").get<int>();
    e.key.calibration_n = j.at("calibration_n").get<int>();
    e.key.beta_grid = j.at("beta_grid").get<int>();
    e.key.golden_iters = j.at("golden_iters").get<int>();
    e.key.inner_reps = j.at("inner_reps").get<int>();
    e.table.beta = j.at("beta").get<std::vector<double>>();
    e.u0 = j.at("u0").get<double>();
  } catch (const json::exception& ex) {
    throw std::runtime_error(std::string("calibration file: ") + ex.what());
  }
  e.table.stages = static_cast<int>(e.table.beta.size());
  if (e.table.stages != e.key.stages)
    throw std::runtime_error("calibration file: beta length differs from T");
  e.table.validate();
  return e;
}

void write_calibration(const std::filesystem::path& path, const CachedCalibration& entry) {
  std::filesystem::create_directories(path.parent_path());
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write calibration file '" + tmp + "'");
    out << calibration_to_json(entry).dump(2) << '\n';
    if (!out) throw std::runtime_error("cannot write calibration file '" + tmp + "'");
  }
  std::filesystem::rename(tmp, path);
}

std::optional<CachedCalibration> read_calibration(const std::filesystem::path& path,
                                                  const CalibrationKey& expected) {
  std::ifstream in(path);
  if (!in) return std::nullopt;
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw std::runtime_error("corrupt calibration file '" + path.string() + "': " + e.what());
  }
  CachedCalibration e = calibration_from_json(j);
  if (e.key.to_json() != expected.to_json()) return std::nullopt;
  return e;
}

std::filesystem::path default_cache_dir() {
  if (const char* env = std::getenv("ADAPTIVE_ALLOC_CACHE"); env && *env) return env;
  if (const char* xdg = std::getenv("XDG_CACHE_HOME"); xdg && *xdg)
    return std::filesystem::path(xdg) / "adaptive-alloc";
  if (const char* home = std::getenv("HOME"); home && *home)
    return std::filesystem::path(home) / ".cache" / "adaptive-alloc";
  return ".adaptive-alloc-cache";
}

void write_trials_csv(std::ostream& os, const std::vector<TrialRecord>& records) {
  os << "#schema_version=" << kSchemaVersion << '\n' << kTrialsHeader << '\n';
  for (const auto& r : records)
    os << r.policy << ',' << format_double(r.B) << ',' << format_double(r.p0) << ',' << r.trial
       << ',' << r.errors << ',' << r.type1 << ',' << r.type2 << ',' << format_double(r.spent)
       << '\n';
}

std::vector<TrialRecord> read_trials_csv(std::istream& is) {
  std::vector<TrialRecord> out;
  for (const auto& f : read_csv(is, kTrialsHeader, 8)) {
    TrialRecord r;
    r.policy = f[0];
    r.B = parse_double(f[1]);
    r.p0 = parse_double(f[2]);
    r.trial = parse_int(f[3]);
    r.errors = parse_int(f[4]);
    r.type1 = parse_int(f[5]);
    r.type2 = parse_int(f[6]);
    r.spent = parse_double(f[7]);
    if (r.errors != r.type1 + r.type2)
      throw std::runtime_error("trials csv: errors differ from type1 + type2");
    out.push_back(std::move(r));
  }
  return out;
}

void write_summary_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
  os << "#schema_version=" << kSchemaVersion << '\n' << kSummaryHeader << '\n';
  for (const auto& r : rows)
    os << r.policy << ',' << format_double(r.B) << ',' << format_double(r.p0) << ','
       << format_double(r.mean_errors) << ',' << format_double(r.std_err) << ',' << r.trials
       << '\n';
}

std::vector<SweepRow> read_summary_csv(std::istream& is) {
  std::vector<SweepRow> out;
  for (const auto& f : read_csv(is, kSummaryHeader, 6)) {
    SweepRow r;
    r.policy = f[0];
    r.B = parse_double(f[1]);
    r.p0 = parse_double(f[2]);
    r.mean_errors = parse_double(f[3]);
    r.std_err = parse_double(f[4]);
    r.trials = parse_int(f[5]);
    if (r.policy.empty() || r.trials < 1 || !std::isfinite(r.mean_errors) ||
        !std::isfinite(r.std_err))
      throw std::runtime_error("summary csv: invalid row for policy '" + r.policy + "'");
    out.push_back(std::move(r));
  }
  return out;
}

json RunManifest::to_json() const {
  json sel = json::array();
  for (const auto& s : selections)
    sel.push_back({{"policy", s.policy},
                   {"B", s.B},
                   {"p0", s.p0},
                   {"T", s.stages},
                   {"rho", s.rho},
                   {"mean_errors", s.mean_errors}});
  return {{"schema_version", schema_version},
          {"tool_version", tool_version},
          {"config_hash", config_hash},
          {"config", config},
          {"seed", seed},
          {"started_at", started_at},
          {"finished_at", finished_at},
          {"outputs", outputs},
          {"calibration_files", calibration_files},
          {"selections", sel}};
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

Improvement improvement_factor(double na_mean, double olfc_mean) {
  if (na_mean == olfc_mean) return {1.0, false};
  if (olfc_mean == 0.0) return {na_mean / 0.5, true};
  return {na_mean / olfc_mean, false};
}

std::string render_report(const std::vector<SweepRow>& rows, ReportFormat format) {
  if (rows.empty()) throw std::runtime_error("report: no summary rows");
  std::vector<double> p0s;
  std::vector<double> Bs;
  std::vector<std::string> policies;
  std::map<std::tuple<double, double, std::string>, const SweepRow*> at;
  for (const auto& r : rows) {
    if (std::find(p0s.begin(), p0s.end(), r.p0) == p0s.end()) p0s.push_back(r.p0);
    if (std::find(Bs.begin(), Bs.end(), r.B) == Bs.end()) Bs.push_back(r.B);
    if (std::find(policies.begin(), policies.end(), r.policy) == policies.end())
      policies.push_back(r.policy);
    at[{r.p0, r.B, r.policy}] = &r;
  }
  auto find = [&](double p0, double B, const std::string& pol) -> const SweepRow* {
    auto it = at.find({p0, B, pol});
    return it == at.end() ? nullptr : it->second;
  };
  auto best_mean = [&](double p0, double B) {
    double best = INFINITY;
    for (const auto& pol : policies)
      if (const SweepRow* r = find(p0, B, pol)) best = std::min(best, r->mean_errors);
    return best;
  };
  auto is_olfc = [](const std::string& p) { return p.rfind("OLFC-", 0) == 0; };

  std::ostringstream os;
  if (format == ReportFormat::Csv) {
    os << "p0,B,policy,mean_errors,std_err,trials,best,improvement_vs_na,improvement_lower_bound\n";
    for (double p0 : p0s)
      for (double B : Bs)
        for (const auto& pol : policies) {
          const SweepRow* r = find(p0, B, pol);
          if (!r) continue;
          os << format_double(p0) << ',' << format_double(B) << ',' << pol << ','
             << format_double(r->mean_errors) << ',' << format_double(r->std_err) << ','
             << r->trials << ',' << (r->mean_errors == best_mean(p0, B) ? 1 : 0) << ',';
          const SweepRow* na = find(p0, B, "NA");
          if (is_olfc(pol) && na) {
            const Improvement f = improvement_factor(na->mean_errors, r->mean_errors);
            os << format_double(f.factor) << ',' << (f.lower_bound ? 1 : 0);
          } else {
            os << ',';
          }
          os << '\n';
        }
    return os.str();
  }

  constexpr std::size_t kFirst = 10;
  constexpr std::size_t kCol = 20;
  for (std::size_t k = 0; k < p0s.size(); ++k) {
    const double p0 = p0s[k];
    if (k > 0) os << '\n';
    os << "p0 = " << format_double(p0) << "  (mean errors +/- std err, * = best)\n";
    os << pad("policy", kFirst);
    for (double B : Bs) os << pad("B=" + format_double(B), kCol);
    os << '\n';
    for (const auto& pol : policies) {
      bool any = false;
      for (double B : Bs) any = any || find(p0, B, pol);
      if (!any) continue;
      os << pad(pol, kFirst);
      for (double B : Bs) {
        const SweepRow* r = find(p0, B, pol);
        std::string cell = "-";
        if (r) {
          cell = (r->mean_errors == best_mean(p0, B) ? "*" : "") + fixed(r->mean_errors, 2) +
                 " +/- " + fixed(r->std_err, 2);
        }
        os << pad(cell, kCol);
      }
      os << '\n';
    }
    bool header = false;
    for (const auto& pol : policies) {
      if (!is_olfc(pol)) continue;
      std::string line = pad(pol, kFirst);
      bool any = false;
      for (double B : Bs) {
        const SweepRow* r = find(p0, B, pol);
        const SweepRow* na = find(p0, B, "NA");
        std::string cell = "-";
        if (r && na) {
          const Improvement f = improvement_factor(na->mean_errors, r->mean_errors);
          cell = (f.lower_bound ? "≥" : "") + fixed(f.factor, 2);
          any = true;
        }
        line += pad(cell, kCol);
      }
      if (!any) continue;
      if (!header) {
        os << "improvement over NA (NA mean / OLFC mean)\n";
        header = true;
      }
      os << line << '\n';
    }
  }
  return os.str();
}

}  // namespace adaptive_alloc
