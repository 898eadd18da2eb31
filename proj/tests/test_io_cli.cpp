#include <gtest/gtest.h>

#include <unistd.h>

#include <fstream>
#include <functional>
#include <sstream>

#include "oracles.hpp"
#include "sbc/cli.hpp"

using namespace sbc;
namespace fs = std::filesystem;

namespace {

class ScratchDir {
 public:
  explicit ScratchDir(const std::string& name)
      : path_(fs::temp_directory_path() / ("sbc_test_" + name + "_" + std::to_string(::getpid()))) {
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~ScratchDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no sbc::Error thrown";
  return ErrorCode::InvalidConfig;
}

PanelData parse(const std::string& text, const std::string& treated, int t0) {
  std::istringstream in(text);
  return io::parse_panel_csv(in, treated, t0);
}

// 17 units over 1960..2003; the treated unit is listed last in the file.
std::string country_panel_csv() {
  std::string csv = "unit,period,value\n";
  for (int u = 0; u < 17; ++u) {
    const auto rw = oracle::random_walk(44, static_cast<unsigned>(500 + u), 0.2);
    const std::string label = u == 16 ? "West Germany" : "country_" + std::to_string(u);
    for (int k = 0; k < 44; ++k) {
      csv += label + "," + std::to_string(1960 + k) + "," + io::format_exact(100.0 + rw[static_cast<std::size_t>(k)]) + "\n";
    }
  }
  return csv;
}

// Treated unit equals donor B exactly; donor C is unrelated.
std::string duplicated_donor_csv() {
  const auto a = oracle::random_walk(40, 1);
  const auto c = oracle::random_walk(40, 2);
  std::string csv = "unit,period,value\n";
  for (int k = 0; k < 40; ++k) {
    const auto t = std::to_string(2000 + k);
    csv += "T," + t + "," + io::format_exact(a[static_cast<std::size_t>(k)]) + "\n";
    csv += "B," + t + "," + io::format_exact(a[static_cast<std::size_t>(k)]) + "\n";
    csv += "C," + t + "," + io::format_exact(c[static_cast<std::size_t>(k)]) + "\n";
  }
  return csv;
}

std::vector<std::vector<std::string>> read_csv_text(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> row;
    std::string field;
    std::istringstream ls(line);
    while (std::getline(ls, field, ',')) row.push_back(field);
    if (!line.empty() && line.back() == ',') row.emplace_back();
    rows.push_back(row);
  }
  return rows;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) { return read_csv_text(slurp(p)); }

}  // namespace

TEST(PanelCsv, LoadsSmallPanelAndMovesTreatedFirst) {
  std::string csv = "unit,period,value\n";
  for (const char* u : {"a", "b", "c"}) {
    for (int t = 1; t <= 5; ++t) csv += std::string(u) + "," + std::to_string(t) + "," + std::to_string(t * (u[0] - 'a' + 1)) + "\n";
  }
  const auto panel = parse(csv, "b", 3);
  EXPECT_EQ(panel.units(), 3);
  EXPECT_EQ(panel.periods(), 5);
  EXPECT_EQ(panel.t0(), 3);
  EXPECT_EQ(panel.unit_labels(), (std::vector<std::string>{"b", "a", "c"}));
  EXPECT_DOUBLE_EQ(panel.outcomes()(0, 4), 10.0);
  EXPECT_DOUBLE_EQ(panel.outcomes()(2, 1), 6.0);
}

TEST(PanelCsv, CountryShapedPanel) {
  const auto panel = parse(country_panel_csv(), "West Germany", 1990);
  EXPECT_EQ(panel.units(), 17);
  EXPECT_EQ(panel.donors(), 16);
  EXPECT_EQ(panel.periods(), 44);
  EXPECT_EQ(panel.t0(), 31);
  EXPECT_EQ(panel.period_labels().front(), 1960);
  EXPECT_EQ(panel.unit_labels().front(), "West Germany");
}

TEST(PanelCsv, RoundTripsThroughWriter) {
  const auto panel = parse(country_panel_csv(), "West Germany", 1990);
  const auto again = parse(io::panel_to_csv(panel), "West Germany", 1990);
  EXPECT_EQ(panel.outcomes(), again.outcomes());
  EXPECT_EQ(panel.unit_labels(), again.unit_labels());
}

TEST(PanelCsv, MissingCellIsNamed) {
  const std::string csv = "unit,period,value\na,1,1\na,2,2\nb,1,3\n";
  try {
    parse(csv, "a", 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnbalancedPanel);
    EXPECT_NE(std::string(e.what()).find("(b, 2)"), std::string::npos);
  }
}

TEST(PanelCsv, StructuralErrors) {
  EXPECT_EQ(code_of([] { parse("unit,period,value\na,1,1\na,1,2\n", "a", 1); }), ErrorCode::DuplicateCell);
  EXPECT_EQ(code_of([] { parse("unit,period,value\na,1,1\na,3,2\n", "a", 1); }), ErrorCode::NonContiguousPeriods);
  EXPECT_EQ(code_of([] { parse("unit,period,value\na,1,1\nb,1,2\n", "z", 1); }), ErrorCode::UnknownTreatedLabel);
  EXPECT_EQ(code_of([] { parse("unit,period,value\na,1,1\nb,1,2\n", "a", 7); }), ErrorCode::UnknownPeriodLabel);
  EXPECT_EQ(code_of([] { parse("unit,time,value\na,1,1\n", "a", 1); }), ErrorCode::MalformedCsv);
  EXPECT_EQ(code_of([] { parse("unit,period,value\na,1,x\n", "a", 1); }), ErrorCode::MalformedCsv);
  EXPECT_EQ(code_of([] { parse("unit,period,value\na,1\n", "a", 1); }), ErrorCode::MalformedCsv);
  EXPECT_EQ(code_of([] { parse("", "a", 1); }), ErrorCode::MalformedCsv);
}

TEST(PanelCsv, ToleratesByteOrderMarkAndCrlf) {
  const auto panel = parse("\xEF\xBB\xBFunit,period,value\r\na,1,1\r\na,2,2\r\nb,1,3\r\nb,2,4\r\n", "b", 2);
  EXPECT_EQ(panel.units(), 2);
  EXPECT_DOUBLE_EQ(panel.outcomes()(0, 1), 4.0);
}

TEST(Decomposition, CsvMatchesFilterFits) {
  const auto panel = parse(country_panel_csv(), "West Germany", 1990);
  const FilterSpec spec{2, 2};
  const auto rows = read_csv_text(io::decomposition_csv(panel, spec));
  ASSERT_EQ(rows.size(), 1U + 17U * 44U);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"unit", "period", "observed", "trend", "cycle"}));
  // Period 1963 is t = 4 = h + p: first filled row; 1962 is blank.
  EXPECT_EQ(rows[3][3], "");
  const auto fits = decompose_panel(panel, spec);
  EXPECT_EQ(std::stod(rows[4][4]), fits[0].cycle(0));
  EXPECT_EQ(std::stod(rows[31][3]), fits[0].trend(27));
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r][3].empty()) continue;
    EXPECT_NEAR(std::stod(rows[r][2]), std::stod(rows[r][3]) + std::stod(rows[r][4]), 1e-9);
  }
}

TEST(Io, FormattingHelpers) {
  EXPECT_EQ(io::format_exact(0.1), "0.1");
  EXPECT_EQ(std::stod(io::format_exact(1.0 / 3.0)), 1.0 / 3.0);
  EXPECT_EQ(io::format_ratio(0.41449), "0.4145");
  EXPECT_EQ(io::round12(0.1 + 0.2), 0.3);
}

TEST(Io, AtomicWriteLeavesNoTemporary) {
  ScratchDir dir("atomic");
  io::write_atomic(dir.path() / "nested" / "out.txt", "hello\n");
  io::write_atomic(dir.path() / "nested" / "out.txt", "again\n");
  EXPECT_EQ(slurp(dir.path() / "nested" / "out.txt"), "again\n");
  for (const auto& entry : fs::recursive_directory_iterator(dir.path())) {
    EXPECT_NE(entry.path().extension(), ".tmp");
  }
}

TEST(Cli, EstimateOnDuplicatedDonorHasZeroEffects) {
  ScratchDir dir("dup");
  io::write_atomic(dir.path() / "panel.csv", duplicated_donor_csv());
  cli::RunConfig config;
  config.command = cli::Command::Estimate;
  config.input_path = dir.path() / "panel.csv";
  config.treated_label = "T";
  config.t0_label = 2030;
  config.filter = {2, 2};
  config.full_horizon = true;
  config.output_dir = dir.path() / "out";
  const auto result = cli::run(config);
  EXPECT_EQ(result.exit_code, 0);
  EXPECT_EQ(result.written.size(), 3U);

  const auto rows = read_csv(dir.path() / "out" / "series.csv");
  ASSERT_EQ(rows.back()[0], "2039");
  int post_rows = 0;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (std::stoi(rows[r][0]) <= 2030) continue;
    ++post_rows;
    EXPECT_NEAR(std::stod(rows[r][4]), 0.0, 1e-9);
    EXPECT_NEAR(std::stod(rows[r][5]), 0.0, 1e-9);
  }
  EXPECT_EQ(post_rows, 9);

  const auto report = nlohmann::json::parse(slurp(dir.path() / "out" / "report.json"));
  EXPECT_EQ(report["treated"], "T");
  EXPECT_EQ(report["reports"][1]["method"], "SBC");
  EXPECT_NEAR(report["reports"][1]["weights"]["B"].get<double>(), 1.0, 1e-9);
  EXPECT_EQ(report["reports"][1]["effects"].size(), 9U);
}

TEST(Cli, OutputsAreByteIdenticalAcrossRuns) {
  ScratchDir dir("bytes");
  io::write_atomic(dir.path() / "panel.csv", country_panel_csv());
  cli::RunConfig config;
  config.command = cli::Command::Estimate;
  config.input_path = dir.path() / "panel.csv";
  config.treated_label = "West Germany";
  config.t0_label = 1990;
  config.output_dir = dir.path() / "a";
  cli::run(config);
  config.output_dir = dir.path() / "b";
  cli::run(config);
  for (const char* f : {"report.json", "series.csv", "weights.csv"}) {
    EXPECT_EQ(slurp(dir.path() / "a" / f), slurp(dir.path() / "b" / f)) << f;
  }
}

TEST(Cli, PlaceboMustPrecedeTreatment) {
  cli::RunConfig config;
  config.command = cli::Command::Placebo;
  config.input_path = "unused.csv";
  config.treated_label = "T";
  config.t0_label = 1990;
  config.placebo_label = 1990;
  EXPECT_EQ(code_of([&] { cli::run(config); }), ErrorCode::InvalidConfig);
  config.placebo_label = 1995;
  EXPECT_EQ(code_of([&] { cli::run(config); }), ErrorCode::InvalidConfig);
}

TEST(Cli, PlaceboWritesShiftedReport) {
  ScratchDir dir("placebo");
  io::write_atomic(dir.path() / "panel.csv", country_panel_csv());
  cli::RunConfig config;
  config.command = cli::Command::Placebo;
  config.input_path = dir.path() / "panel.csv";
  config.treated_label = "West Germany";
  config.t0_label = 1990;
  config.placebo_label = 1975;
  config.output_dir = dir.path();
  cli::run(config);
  const auto report = nlohmann::json::parse(slurp(dir.path() / "report.json"));
  EXPECT_EQ(report["kind"], "placebo");
  EXPECT_EQ(report["reports"][0]["t0_period"], 1975);
}

TEST(Cli, MissingInputsAreConfigErrors) {
  cli::RunConfig config;
  config.command = cli::Command::Estimate;
  EXPECT_EQ(code_of([&] { cli::run(config); }), ErrorCode::InvalidConfig);
  config.input_path = "/nonexistent/panel.csv";
  config.treated_label = "x";
  config.t0_label = 3;
  EXPECT_EQ(code_of([&] { cli::run(config); }), ErrorCode::IoFailure);
}

TEST(Cli, ConfigDocumentOverlay) {
  cli::RunConfig config;
  cli::apply_json(config, nlohmann::json::parse(R"({
    "command": "simulate", "regime": "unrestricted", "h": 3,
    "simulation": {"model": "model2", "phi": 0.8, "t0": 50, "replications": 10, "seed": 7}
  })"));
  EXPECT_EQ(config.command, cli::Command::Simulate);
  EXPECT_EQ(config.regime.variant, WeightVariant::Unrestricted);
  EXPECT_TRUE(config.regime.include_intercept);
  EXPECT_EQ(config.filter.h, 3);
  ASSERT_TRUE(config.sim);
  EXPECT_EQ(config.sim->model, sim::Model::Model2);
  EXPECT_EQ(config.sim->phi, 0.8);
  EXPECT_EQ(config.sim->master_seed, 7U);

  // A later document overrides only the keys it names.
  cli::apply_json(config, nlohmann::json::parse(R"({"intercept": false, "simulation": {"phi": 0.5}})"));
  EXPECT_FALSE(config.regime.include_intercept);
  EXPECT_EQ(config.sim->phi, 0.5);
  EXPECT_EQ(config.sim->t0, 50);

  EXPECT_EQ(code_of([&] { cli::apply_json(config, nlohmann::json::parse(R"({"hh": 1})")); }),
            ErrorCode::InvalidConfig);
  EXPECT_EQ(code_of([&] { cli::apply_json(config, nlohmann::json::parse(R"({"h": "two"})")); }),
            ErrorCode::InvalidConfig);
}

TEST(Cli, SimulateWritesTableAndManifest) {
  ScratchDir dir("simulate");
  cli::RunConfig config;
  config.command = cli::Command::Simulate;
  sim::SimulationSpec spec;
  spec.replications = 20;
  spec.t0 = 50;
  config.sim = spec;
  config.threads = 2;
  config.output_dir = dir.path();
  cli::run(config);
  const auto table = read_csv(dir.path() / "table.csv");
  ASSERT_EQ(table.size(), 2U);
  EXPECT_EQ(table[0], (std::vector<std::string>{"model", "regime", "parameter", "t0", "pre", "post"}));
  EXPECT_EQ(table[1][0], "model1");
  EXPECT_EQ(table[1][2], "mu=0");
  EXPECT_EQ(table[1][3], "50");
  const auto manifest = nlohmann::json::parse(slurp(dir.path() / "manifest.json"));
  EXPECT_EQ(manifest["completed"], 20);
  EXPECT_EQ(manifest["failures"], 0);
  EXPECT_EQ(manifest["seed"], spec.master_seed);
  EXPECT_TRUE(manifest.contains("wall_time_seconds"));
}

TEST(Cli, ErrorJsonShape) {
  const auto j = nlohmann::json::parse(cli::error_json(ErrorCode::WindowTooShort, "too short"));
  EXPECT_EQ(j["error"]["code"], "WindowTooShort");
  EXPECT_EQ(j["error"]["message"], "too short");
}
