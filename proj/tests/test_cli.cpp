#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include "json.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string err;
};

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "zeno_cli_test" / name;
  fs::remove_all(dir);
  fs::create_directories(dir.parent_path());
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Run run(const std::string& args) {
  const fs::path err = fs::temp_directory_path() / "zeno_cli_test" / "stderr.txt";
  fs::create_directories(err.parent_path());
  const std::string cmd = std::string(ZENO_CLI_PATH) + " " + args + " >/dev/null 2>" + err.string();
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(err)};
}

std::vector<std::string> csv_files(const fs::path& dir) {
  std::vector<std::string> names;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().extension() == ".csv") names.push_back(e.path().filename().string());
  }
  std::sort(names.begin(), names.end());
  return names;
}

// Column `name` of a CSV written by the CLI.
std::vector<double> column(const fs::path& file, const std::string& name) {
  std::ifstream in(file);
  std::string line;
  int index = -1;
  std::vector<double> out;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
    if (index < 0) {
      for (std::size_t i = 0; i < cells.size(); ++i) {
        if (cells[i] == name) index = static_cast<int>(i);
      }
      REQUIRE(index >= 0);
      continue;
    }
    out.push_back(std::stod(cells.at(index)));
  }
  return out;
}

}  // namespace

TEST_CASE("spectrum writes the re/im files of both panels") {
  const fs::path out = scratch("spectrum");
  REQUIRE(run("spectrum --omega-ratio 0.1 -o " + out.string()).code == 0);
  const std::vector<std::string> expected{"spectrum_strong_im.csv", "spectrum_strong_re.csv", "spectrum_zeno_im.csv",
                                          "spectrum_zeno_re.csv"};
  CHECK(csv_files(out) == expected);
  CHECK(fs::exists(out / "spectrum_summary.json"));

  SUBCASE("identical runs give identical bytes") {
    const fs::path again = scratch("spectrum_again");
    REQUIRE(run("spectrum --omega-ratio 0.1 -o " + again.string()).code == 0);
    for (const std::string& f : expected) {
      // The output directory is part of the recorded configuration.
      std::string a = slurp(out / f), b = slurp(again / f);
      const auto strip = [](std::string s, const std::string& dir) {
        const auto pos = s.find(dir);
        if (pos != std::string::npos) s.erase(pos, dir.size());
        return s;
      };
      CHECK(strip(a, out.string()) == strip(b, again.string()));
    }
  }
}

TEST_CASE("usage errors exit 1") {
  const fs::path out = scratch("usage");
  CHECK(run("spectrum --set numerics.grid_step_hz=0 -o " + out.string()).code == 1);
  CHECK(run("spectrum --set numerics.grid_lo_hz=100 --set numerics.grid_hi_hz=0 -o " + out.string()).code == 1);
  const Run bad = run("evolve --method rk4 -o " + out.string());
  CHECK(bad.code == 1);
  CHECK(bad.err.find("nh") != std::string::npos);
  CHECK(bad.err.find("lindblad") != std::string::npos);
  CHECK(bad.err.find("mc") != std::string::npos);
  CHECK(run("--set physical.nope=1 spectrum -o " + out.string()).code == 1);
  CHECK(run("").code == 1);
  CHECK(run("lifetime -o " + out.string()).code == 1);  // no hold configured
}

TEST_CASE("output directory handling") {
  const fs::path out = scratch("nested") / "deeper" / "still";
  CHECK(run("spectrum -o " + out.string()).code == 0);
  CHECK(fs::exists(out / "spectrum_zeno_re.csv"));

  const fs::path blocker = scratch("blocker");
  fs::create_directories(blocker);
  std::ofstream(blocker / "file") << "x";
  const Run r = run("spectrum -o " + (blocker / "file" / "sub").string());
  CHECK(r.code == 1);
  CHECK(r.err.find("output") != std::string::npos);
}

TEST_CASE("config file, overrides and dump") {
  const fs::path dir = scratch("config");
  fs::create_directories(dir);
  std::ofstream(dir / "run.ini") << "[physical]\nomega_hz = 120\n[numerics]\nseed = 3\n";
  const std::string dump = (dir / "dump.ini").string();
  REQUIRE(std::system((std::string(ZENO_CLI_PATH) + " -c " + (dir / "run.ini").string() +
                       " --set numerics.seed=4 --dump-config > " + dump)
                          .c_str()) == 0);
  const std::string text = slurp(dump);
  CHECK(text.find("omega_hz = 120\n") != std::string::npos);
  CHECK(text.find("seed = 4\n") != std::string::npos);
  std::ofstream(dir / "bad.ini") << "[physical]\nomega_hz = 120\nmystery = 1\n";
  CHECK(run("-c " + (dir / "bad.ini").string() + " spectrum -o " + dir.string()).code == 1);
}

TEST_CASE("evolve methods") {
  const fs::path nh = scratch("nh"), lb = scratch("lindblad");
  REQUIRE(run("evolve --method nh -o " + nh.string()).code == 0);
  REQUIRE(run("evolve --method lindblad -o " + lb.string()).code == 0);
  const auto a = column(nh / "evolve_nh.csv", "norm2");
  const auto b = column(lb / "evolve_lindblad.csv", "norm2");
  REQUIRE(a.size() == b.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  CHECK(worst <= 1e-7);

  const fs::path m1 = scratch("mc1"), m2 = scratch("mc2");
  REQUIRE(run("evolve --method mc --n-traj 10000 --seed 7 -o " + m1.string()).code == 0);
  REQUIRE(run("evolve --method mc --n-traj 10000 --seed 7 -j 2 -o " + m2.string()).code == 0);
  CHECK(column(m1 / "evolve_mc.csv", "survival") == column(m2 / "evolve_mc.csv", "survival"));
}

TEST_CASE("figures") {
  SUBCASE("fig3 check passes and reports the enhancement") {
    const fs::path out = scratch("fig3");
    CHECK(run("figures fig3 --check -o " + out.string()).code == 0);
    const auto j = nlohmann::json::parse(slurp(out / "fig3_summary.json"));
    CHECK(j["metrics"]["max_enhancement"].get<double>() >= 100.0);
    CHECK(j["checks"][0]["name"] == "max_enhancement");
  }
  SUBCASE("fig4 writes four curves") {
    const fs::path out = scratch("fig4");
    CHECK(run("figures fig4 --check -o " + out.string()).code == 0);
    const std::vector<std::string> expected{"fig4_n1.csv", "fig4_n2.csv", "fig4_ng.csv", "fig4_ntotal.csv"};
    CHECK(csv_files(out) == expected);
  }
  SUBCASE("a failing check exits 3") {
    const fs::path out = scratch("fig3_weak");
    // Without strong loss there is no Zeno suppression to enhance the lifetime.
    CHECK(run("figures fig3 --check --set physical.gamma_ratio=0.05 --set figures.fig3_step_hz=250 -o " + out.string())
              .code == 3);
  }
  SUBCASE("fit of a written file") {
    const fs::path out = scratch("fit");
    fs::create_directories(out);
    std::ofstream data(out / "data.csv");
    data << "t_s,counts\n";
    for (int i = 0; i < 20; ++i) {
      const double t = 0.4 * i / 19;
      data << t << ',' << 500 + 1500 * std::exp(-8 * t) << '\n';
    }
    data.close();
    REQUIRE(run("fit --input " + (out / "data.csv").string() + " -o " + out.string()).code == 0);
    const auto j = nlohmann::json::parse(slurp(out / "fit_summary.json"));
    CHECK(j["metrics"]["gamma_per_s"].get<double>() == doctest::Approx(8.0).epsilon(1e-5));
  }
}
