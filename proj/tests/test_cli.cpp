#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "jpcg/report_io.hpp"
#include "test_support.hpp"

using namespace jpcg;

namespace {

std::string write_temp(const std::string& name, const std::string& content) {
  std::string path = "/tmp/jpcg_test_" + name;
  std::ofstream f(path);
  f << content;
  return path;
}

int run_solve(const std::string& args) {
  std::string cmd = std::string(JPCG_SOLVE_BIN) + " " + args + " >/dev/null 2>&1";
  int rc = std::system(cmd.c_str());
  return WEXITSTATUS(rc);
}

std::string slurp(const std::string& path) {
  std::ifstream f(path);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("trace csv renders and round-trips fp64 exactly") {
  std::vector<std::pair<std::int64_t, double>> trace{
      {-1, 5.0}, {0, 0.16195389624028556}};
  std::string csv = trace_to_csv(trace);
  // header + 2 rows
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
  CHECK(csv.rfind("iteration,rr\n", 0) == 0);

  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  std::size_t i = 0;
  while (std::getline(in, line)) {
    auto comma = line.find(',');
    double rr = std::strtod(line.c_str() + comma + 1, nullptr);
    CHECK(testsupport::bits_equal(rr, trace[i].second));
    ++i;
  }
  CHECK(i == trace.size());
}

TEST_CASE("report json marks counters null for reference runs") {
  SolverReport rep;
  rep.converged = true;
  rep.iterations = 2;
  nlohmann::json j = nlohmann::json::parse(report_to_json(rep, false));
  CHECK(j["reads_per_iteration"].is_null());
  CHECK(j["counters"].is_null());
  nlohmann::json j2 = nlohmann::json::parse(report_to_json(rep, true));
  CHECK(j2["reads_per_iteration"].is_number());
}

TEST_CASE("solve CLI end to end") {
  std::string mtx = write_temp("tiny.mtx", testsupport::kTiny2x2);
  std::string bfile = write_temp("b.txt", "1\n2\n");

  SUBCASE("converged run exits 0 and writes report and trace") {
    std::string report = "/tmp/jpcg_test_report.json";
    std::string trace = "/tmp/jpcg_test_trace.csv";
    int rc = run_solve("--matrix " + mtx + " --b " + bfile + " --report " +
                       report + " --trace " + trace);
    CHECK(rc == 0);
    nlohmann::json j = nlohmann::json::parse(slurp(report));
    CHECK(j["converged"] == true);
    CHECK(j["writes_per_iteration"] == 4);
    CHECK(j["reads_per_iteration"] == 10);
    std::string csv = slurp(trace);
    CHECK(csv.rfind("iteration,rr\n", 0) == 0);
  }

  SUBCASE("naive schedule reports 14 reads and 5 writes") {
    std::string report = "/tmp/jpcg_test_report_naive.json";
    // several steady iterations so the peak is a steady trip
    std::string big = write_temp("spd8.mtx", [] {
      std::ostringstream os;
      os << "%%MatrixMarket matrix coordinate real general\n";
      os << "8 8 22\n";
      for (int i = 1; i <= 8; ++i) os << i << " " << i << " " << (10 + i)
                                      << "\n";
      for (int i = 1; i <= 7; ++i) {
        os << (i + 1) << " " << i << " 1.0\n";
        os << i << " " << (i + 1) << " 1.0\n";
      }
      return os.str();
    }());
    int rc = run_solve("--matrix " + big + " --schedule naive --report " +
                       report);
    CHECK(rc == 0);
    nlohmann::json j = nlohmann::json::parse(slurp(report));
    CHECK(j["reads_per_iteration"] == 14);
    CHECK(j["writes_per_iteration"] == 5);
  }

  SUBCASE("budget exhaustion exits 2") {
    int rc = run_solve("--matrix " + mtx + " --b " + bfile +
                       " --max-iters 1 --tol 1e-30");
    CHECK(rc == 2);
  }

  SUBCASE("unreadable matrix exits 1") {
    CHECK(run_solve("--matrix /nonexistent.mtx") == 1);
  }

  SUBCASE("compare mode embeds the divergence summary") {
    std::string report = "/tmp/jpcg_test_cmp.json";
    int rc = run_solve("--matrix " + mtx + " --b " + bfile +
                       " --mode compare --report " + report);
    CHECK(rc == 0);
    nlohmann::json j = nlohmann::json::parse(slurp(report));
    CHECK(j.contains("compare"));
    CHECK(j["compare"].contains("iteration_delta"));
    CHECK(j["compare"].contains("first_divergence"));
  }

  SUBCASE("reference mode exits per convergence") {
    CHECK(run_solve("--matrix " + mtx + " --b " + bfile +
                    " --mode reference") == 0);
  }

  SUBCASE("deterministic runs produce byte-identical traces") {
    std::string t1 = "/tmp/jpcg_test_t1.csv";
    std::string t2 = "/tmp/jpcg_test_t2.csv";
    REQUIRE(run_solve("--matrix " + mtx + " --b " + bfile + " --trace " + t1) ==
            0);
    REQUIRE(run_solve("--matrix " + mtx + " --b " + bfile + " --trace " + t2) ==
            0);
    CHECK(slurp(t1) == slurp(t2));
  }
}
