#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "adaptive_alloc/commands.hpp"
#include "adaptive_alloc/experiment_io.hpp"

using namespace adaptive_alloc;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = fs::temp_directory_path() / ("adaptive-alloc-test-" + std::to_string(rd()));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

json tiny_config_json() {
  return json{{"schema_version", 1},
              {"n", 40},
              {"B_grid", {1.0, 3.0}},
              {"p0_grid", {0.5, 0.2}},
              {"T_list", {2, 3}},
              {"rho_grid", {0.5, 0.75}},
              {"policies", {"NA", "OLFC-2", "OLFC-3", "DS", "STB"}},
              {"trials", 4},
              {"seed", 11},
              {"calibration", {{"mc_samples", 6}, {"calibration_n", 40}, {"beta_grid", 5},
                               {"golden_iters", 2}}}};
}

fs::path write_config(const fs::path& dir, const json& j, const std::string& name = "cfg.json") {
  const fs::path p = dir / name;
  std::ofstream(p) << j.dump(2);
  return p;
}

SweepRow row(const std::string& policy, double B, double p0, double mean, double se = 0.5) {
  return SweepRow{policy, B, p0, mean, se, 10};
}

}  // namespace

TEST_SUITE("experiment_io") {
  TEST_CASE("number formatting round trips") {
    for (double v : {0.0, 0.1, 1.0 / 3.0, 1e-300, 123456.789, -2.5})
      CHECK(std::stod(format_double(v)) == v);
    CHECK(format_double(0.5) == "0.5");
    CHECK(format_double(4.0) == "4");
  }

  TEST_CASE("config round trip and hash") {
    const ExperimentConfig cfg = config_from_json(tiny_config_json());
    CHECK(cfg.n == 40);
    CHECK(cfg.policies.size() == 5);
    const ExperimentConfig again = config_from_json(config_to_json(cfg));
    CHECK(config_to_json(again) == config_to_json(cfg));
    CHECK(config_hash(again) == config_hash(cfg));
    CHECK(config_hash(cfg).size() == 16);
    ExperimentConfig other = cfg;
    other.seed = 12;
    CHECK(config_hash(other) != config_hash(cfg));

    const ExperimentConfig defaults = config_from_json(json::object());
    CHECK(defaults.n == ExperimentConfig{}.n);
  }

  TEST_CASE("config rejects unknown keys, bad schema and bad values") {
    json j = tiny_config_json();
    j["budgett"] = 3;
    CHECK_THROWS_AS(config_from_json(j), std::invalid_argument);
    j = tiny_config_json();
    j["schema_version"] = 2;
    CHECK_THROWS_AS(config_from_json(j), std::invalid_argument);
    j = tiny_config_json();
    j["calibration"]["mystery"] = 1;
    CHECK_THROWS_AS(config_from_json(j), std::invalid_argument);
    j = tiny_config_json();
    j["n"] = "many";
    CHECK_THROWS_AS(config_from_json(j), std::invalid_argument);
    j = tiny_config_json();
    j["bayesian_cull"] = "sometimes";
    CHECK_THROWS_AS(config_from_json(j), std::invalid_argument);

    TempDir tmp;
    std::ofstream(tmp.path() / "broken.json") << "{ not json";
    CHECK_THROWS(load_config(tmp.path() / "broken.json"));
    CHECK_THROWS(load_config(tmp.path() / "missing.json"));
  }

  TEST_CASE("trials and summary csv round trip") {
    std::vector<TrialRecord> records;
    for (int t = 0; t < 3; ++t) {
      TrialRecord r;
      r.policy = "OLFC-2";
      r.B = 0.25;
      r.p0 = 0.1;
      r.trial = t;
      r.type1 = t;
      r.type2 = 2 * t + 1;
      r.errors = r.type1 + r.type2;
      r.spent = 1000.0 / 3.0 + t;
      records.push_back(r);
    }
    std::stringstream ss;
    write_trials_csv(ss, records);
    CHECK(ss.str().rfind("#schema_version=1\npolicy,B,p0,trial,errors,type1,type2,spent\n", 0) == 0);
    const auto back = read_trials_csv(ss);
    REQUIRE(back.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(back[i].policy == records[i].policy);
      CHECK(back[i].spent == records[i].spent);
      CHECK(back[i].errors == records[i].errors);
    }

    const auto rows = summarize(records);
    std::stringstream sum;
    write_summary_csv(sum, rows);
    const auto rows_back = read_summary_csv(sum);
    REQUIRE(rows_back.size() == 1);
    CHECK(rows_back[0].mean_errors == rows[0].mean_errors);
    CHECK(rows_back[0].std_err == rows[0].std_err);
    CHECK(rows_back[0].trials == 3);
  }

  TEST_CASE("csv readers reject foreign files") {
    std::stringstream v2("#schema_version=2\npolicy,B,p0,trial,errors,type1,type2,spent\n");
    CHECK_THROWS(read_trials_csv(v2));
    std::stringstream bare("policy,B,p0,trial,errors,type1,type2,spent\nNA,1,0.5,0,1,1,0,10\n");
    CHECK_THROWS(read_trials_csv(bare));
    std::stringstream cols("#schema_version=1\npolicy,B,p0,trial,errors,type1,type2,spent\nNA,1\n");
    CHECK_THROWS(read_trials_csv(cols));
    std::stringstream sum("#schema_version=1\npolicy,B,p0,mean_errors,trials\n");
    CHECK_THROWS(read_summary_csv(sum));
  }

  TEST_CASE("calibration entries") {
    const ExperimentConfig cfg = config_from_json(tiny_config_json());
    const CalibrationKey k2 = CalibrationKey::make(cfg, 2, 1.0, 0.2);
    CHECK(k2.prior.p0 == 0.2);
    CHECK(k2.file_name() == CalibrationKey::make(cfg, 2, 1.0, 0.2).file_name());
    CHECK(k2.file_name() != CalibrationKey::make(cfg, 2, 1.0, 0.5).file_name());
    CHECK(k2.file_name() != CalibrationKey::make(cfg, 3, 1.0, 0.2).file_name());
    CHECK(k2.file_name().rfind("beta_T2_", 0) == 0);

    TempDir tmp;
    const CachedCalibration entry{k2, BetaTable{2, {0.4, 1.0}}, 0.4};
    const fs::path p = tmp.path() / k2.file_name();
    write_calibration(p, entry);
    const auto back = read_calibration(p, k2);
    REQUIRE(back.has_value());
    CHECK(back->table == entry.table);
    CHECK(back->u0 == 0.4);
    CHECK_FALSE(read_calibration(p, CalibrationKey::make(cfg, 2, 3.0, 0.2)).has_value());
    CHECK_FALSE(read_calibration(tmp.path() / "absent.json", k2).has_value());

    json j = calibration_to_json(entry);
    j["schema_version"] = 99;
    CHECK_THROWS(calibration_from_json(j));
    std::ofstream(tmp.path() / "bad.json") << "garbage";
    CHECK_THROWS(read_calibration(tmp.path() / "bad.json", k2));
  }

  TEST_CASE("cache directory override") {
    const char* old = std::getenv("ADAPTIVE_ALLOC_CACHE");
    const std::string saved = old ? old : "";
    setenv("ADAPTIVE_ALLOC_CACHE", "/tmp/somewhere-else", 1);
    CHECK(default_cache_dir() == fs::path("/tmp/somewhere-else"));
    if (old)
      setenv("ADAPTIVE_ALLOC_CACHE", saved.c_str(), 1);
    else
      unsetenv("ADAPTIVE_ALLOC_CACHE");
  }

  TEST_CASE("calibrate builds tables in order and reuses the cache") {
    TempDir tmp;
    json j = tiny_config_json();
    j["policies"] = {"OLFC-1"};
    const fs::path cfg1 = write_config(tmp.path(), j, "one.json");
    const fs::path cache = tmp.path() / "cache";
    std::ostringstream log;
    const auto files1 = cmd_calibrate({cfg1, false, cache, std::nullopt}, log);
    CHECK(files1.size() == 4);
    CHECK(log.str().empty());

    j["policies"] = {"OLFC-3"};
    j["B_grid"] = {1.0};
    j["p0_grid"] = {0.5};
    const fs::path cfg3 = write_config(tmp.path(), j, "three.json");
    log.str("");
    const auto files3 = cmd_calibrate({cfg3, false, cache, std::nullopt}, log);
    REQUIRE(files3.size() == 3);
    CHECK(log.str().find("T=2") < log.str().find("T=3"));
    std::vector<std::string> bytes;
    for (const auto& f : files3) bytes.push_back(slurp(f));

    log.str("");
    const auto again = cmd_calibrate({cfg3, false, cache, std::nullopt}, log);
    CHECK(again == files3);
    CHECK(log.str().empty());

    log.str("");
    cmd_calibrate({cfg3, true, cache, std::nullopt}, log);
    CHECK(log.str().find("T=2") != std::string::npos);
    for (std::size_t i = 0; i < files3.size(); ++i) CHECK(slurp(files3[i]) == bytes[i]);
  }

  TEST_CASE("run writes reproducible outputs") {
    TempDir tmp;
    const fs::path cfg = write_config(tmp.path(), tiny_config_json());
    const fs::path cache = tmp.path() / "cache";
    std::ostringstream log;
    const RunManifest m = cmd_run({cfg, tmp.path() / "a", 1, std::nullopt, std::nullopt, cache}, log);
    cmd_run({cfg, tmp.path() / "b", 2, std::nullopt, std::nullopt, cache}, log);
    CHECK(slurp(tmp.path() / "a" / "trials.csv") == slurp(tmp.path() / "b" / "trials.csv"));
    CHECK(slurp(tmp.path() / "a" / "summary.csv") == slurp(tmp.path() / "b" / "summary.csv"));

    std::ifstream sum(tmp.path() / "a" / "summary.csv");
    const auto rows = read_summary_csv(sum);
    CHECK(rows.size() == 5 * 2 * 2);
    std::ifstream tr(tmp.path() / "a" / "trials.csv");
    CHECK(read_trials_csv(tr).size() == 5 * 2 * 2 * 4);

    const json manifest = json::parse(slurp(tmp.path() / "a" / "manifest.json"));
    CHECK(manifest.at("config_hash") == m.config_hash);
    CHECK(manifest.at("seed") == 11);
    CHECK(manifest.at("schema_version") == kSchemaVersion);
    CHECK(manifest.at("outputs").size() == 3);
    CHECK(manifest.at("calibration_files").size() == 2 * 2 * 3);
    CHECK(manifest.at("selections").size() == 2 * 2 * 2);

    cmd_run({cfg, tmp.path() / "c", 1, 99, std::nullopt, cache}, log);
    CHECK(slurp(tmp.path() / "a" / "trials.csv") != slurp(tmp.path() / "c" / "trials.csv"));
  }

  TEST_CASE("run validates before writing anything") {
    TempDir tmp;
    json j = tiny_config_json();
    j["policies"] = json::array();
    const fs::path cfg = write_config(tmp.path(), j);
    std::ostringstream log;
    CHECK_THROWS(cmd_run({cfg, tmp.path() / "out", std::nullopt, std::nullopt, std::nullopt,
                          tmp.path() / "cache"},
                         log));
    CHECK_FALSE(fs::exists(tmp.path() / "out"));
    CHECK_THROWS(cmd_run({write_config(tmp.path(), tiny_config_json(), "ok.json"),
                          tmp.path() / "out", 0, std::nullopt, std::nullopt, tmp.path() / "cache"},
                         log));
    CHECK_FALSE(fs::exists(tmp.path() / "out"));
    CHECK_THROWS(cmd_report(tmp.path() / "nowhere", ReportFormat::Table, log));
  }

  TEST_CASE("improvement factors") {
    CHECK(improvement_factor(10.0, 5.0).factor == 2.0);
    CHECK(improvement_factor(3.0, 3.0).factor == 1.0);
    CHECK(improvement_factor(0.0, 0.0).factor == 1.0);
    const Improvement zero = improvement_factor(4.0, 0.0);
    CHECK(zero.lower_bound);
    CHECK(zero.factor == 8.0);
  }

  TEST_CASE("report rendering") {
    const std::string one = render_report({row("NA", 1.0, 0.5, 12.0)}, ReportFormat::Table);
    CHECK(one.find("p0 = 0.5") != std::string::npos);
    CHECK(one.find("*12.00 +/- 0.50") != std::string::npos);

    const std::vector<SweepRow> rows{row("NA", 1.0, 0.5, 12.0), row("OLFC-2", 1.0, 0.5, 12.0),
                                     row("NA", 4.0, 0.5, 6.0), row("OLFC-2", 4.0, 0.5, 0.0),
                                     row("NA", 1.0, 0.1, 3.0), row("OLFC-2", 1.0, 0.1, 2.0)};
    const std::string table = render_report(rows, ReportFormat::Table);
    CHECK(table.find("p0 = 0.1") != std::string::npos);
    CHECK(table.find("1.00") != std::string::npos);
    CHECK(table.find("≥12.00") != std::string::npos);
    CHECK(table.find("1.50") != std::string::npos);

    const std::string csv = render_report(rows, ReportFormat::Csv);
    CHECK(csv.find("0.5,1,OLFC-2,12,0.5,10,1,1,0\n") != std::string::npos);
    CHECK(csv.find("0.5,4,OLFC-2,0,0.5,10,1,12,1\n") != std::string::npos);
    CHECK(csv.find("0.5,4,NA,6,0.5,10,0,,\n") != std::string::npos);
    CHECK_THROWS(render_report({}, ReportFormat::Table));
  }

  TEST_CASE("report reads what run wrote") {
    TempDir tmp;
    json j = tiny_config_json();
    j["policies"] = {"NA", "DS"};
    const fs::path cfg = write_config(tmp.path(), j);
    std::ostringstream log;
    cmd_run({cfg, tmp.path() / "out", std::nullopt, std::nullopt, std::nullopt, tmp.path()}, log);
    for (ReportFormat f : {ReportFormat::Table, ReportFormat::Csv}) {
      std::ostringstream out;
      CHECK_NOTHROW(cmd_report(tmp.path() / "out", f, out));
      CHECK(out.str().find("DS") != std::string::npos);
    }
  }
}
