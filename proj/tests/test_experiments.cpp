#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <string>
#include <sys/wait.h>
#include <unistd.h>

#include "rml/csv.hpp"
#include "rml/error.hpp"
#include "rml/experiment.hpp"

using namespace rml;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("rml_test_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

json density_config(const fs::path& out) {
  return {{"schema_version", 1},
          {"model", {{"variant", "semicircle"}, {"params", {{"radius", 2.0}}}}},
          {"dynamics", "additive"},
          {"N", 50},
          {"beta", 1},
          {"times", {0.5, 1.0}},
          {"n_samples", 1},
          {"seed", 3},
          {"experiment", "density"},
          {"output_dir", out.string()},
          {"params", {{"nodes", 48}, {"x_points", 11}}}};
}

std::string config_error_message(const json& j) {
  try {
    exp::parse_config(j);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

int run_cli(const std::string& args) {
  const char* cli = std::getenv("RML_CLI");
  REQUIRE(cli != nullptr);
  std::string cmd = std::string(cli) + " " + args + " > /dev/null 2>&1";
  int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void write_text(const fs::path& p, const std::string& s) { std::ofstream(p) << s; }

}  // namespace

TEST_CASE("config errors name the offending field") {
  auto base = density_config("/tmp/unused");
  CHECK(config_error_message(base).empty());

  auto j = base;
  j["N"] = 0;
  CHECK(config_error_message(j).find("'N'") != std::string::npos);
  j = base;
  j["beta"] = 4;
  CHECK(config_error_message(j).find("'beta'") != std::string::npos);
  j = base;
  j["times"] = {1.0, 0.5};
  CHECK(config_error_message(j).find("'times'") != std::string::npos);
  j = base;
  j["times"] = {-1.0};
  CHECK(config_error_message(j).find("'times'") != std::string::npos);
  j = base;
  j["schema_version"] = 2;
  CHECK(config_error_message(j).find("'schema_version'") != std::string::npos);
  j = base;
  j["model"]["variant"] = "cauchy";
  CHECK(config_error_message(j).find("'model.variant'") != std::string::npos);
  j = base;
  j["model"] = {{"variant", "uniform"}, {"params", {{"lo", 1.0}, {"hi", -1.0}}}};
  CHECK(config_error_message(j).find("'model'") != std::string::npos);
  j = base;
  j["extra"] = true;
  CHECK(config_error_message(j).find("'extra'") != std::string::npos);
  j = base;
  j.erase("seed");
  CHECK(config_error_message(j).find("'seed'") != std::string::npos);
  j = base;
  j["experiment"] = "nothing";
  CHECK(config_error_message(j).find("'experiment'") != std::string::npos);
  j = base;
  j["dynamics"] = "brownian";
  CHECK(config_error_message(j).find("'dynamics'") != std::string::npos);
}

TEST_CASE("config hash is deterministic and ignores output_dir") {
  auto a = exp::parse_config(density_config("/tmp/a"));
  auto b = exp::parse_config(density_config("/tmp/b"));
  CHECK(a.hash() == b.hash());
  CHECK(a.hash().size() == 64);
  auto j = density_config("/tmp/a");
  j["seed"] = 4;
  CHECK(exp::parse_config(j).hash() != a.hash());
  // Round trip through to_json.
  CHECK(exp::parse_config(a.to_json()).hash() == a.hash());
}

TEST_CASE("sha256 known answers") {
  CHECK(exp::sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(exp::sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("CSV round trip") {
  io::CsvTable t;
  t.comments = {"config_hash=abc", "seed=7"};
  t.columns = {"t", "value"};
  t.add_row({io::fmt(0.1), io::fmt(1.0 / 3.0)});
  t.add_row({io::fmt(2.0), io::fmt(std::nan(""))});
  auto back = io::parse_csv(io::to_string(t));
  CHECK(back.columns == t.columns);
  CHECK(back.rows == t.rows);
  CHECK(back.comment_value("seed") == "7");
  CHECK(back.number(0, "value") == 1.0 / 3.0);
  CHECK(back.number(0, "t") == 0.1);
  CHECK(std::isnan(back.number(1, "value")));
  CHECK_THROWS_AS(back.column("missing"), InputError);
  CHECK_THROWS_AS(io::parse_csv("a,b\n1\n"), InputError);
  CHECK_THROWS_AS(io::read_csv("/nonexistent/file.csv"), InputError);
}

TEST_CASE("density run: provenance, replay and manifest") {
  auto dir = scratch("density");
  auto cfg = exp::parse_config(density_config(dir / "first"));
  auto rec = exp::run(cfg);
  REQUIRE(rec.manifest.size() == 2);
  auto table = io::read_csv(dir / "first" / "density.csv");
  CHECK(table.columns == std::vector<std::string>{"t", "lambda", "rho", "v"});
  CHECK(table.comment_value("config_hash") == cfg.hash());
  CHECK(table.comment_value("experiment") == "density");
  CHECK(table.comment_value("seed") == "3");
  for (std::size_t r = 0; r < table.rows.size(); ++r) CHECK(table.number(r, "rho") >= 0.0);

  auto stored = exp::RunRecord::from_json(json::parse(io::read_file(dir / "first" / "run_record.json")));
  CHECK(stored.config_hash == cfg.hash());
  CHECK(exp::verify_manifest(stored, dir / "first").empty());

  auto replay = exp::run(exp::parse_config(density_config(dir / "second")));
  for (const auto& m : rec.manifest)
    CHECK(io::read_file(dir / "first" / m.file) == io::read_file(dir / "second" / m.file));

  write_text(dir / "first" / "quantiles.csv", io::read_file(dir / "first" / "quantiles.csv") + "0,0,0\n");
  auto bad = exp::verify_manifest(stored, dir / "first");
  REQUIRE(bad.size() == 1);
  CHECK(bad[0] == "quantiles.csv");
  fs::remove_all(dir);
}

TEST_CASE("tolerance parsing") {
  CHECK(exp::Tolerance::parse("3").z == 3.0);
  auto t = exp::Tolerance::parse("z=2.5,frac=0.9");
  CHECK(t.z == 2.5);
  CHECK(t.min_pass_fraction == 0.9);
  CHECK_THROWS_AS(exp::Tolerance::parse("z=abc"), ConfigError);
  CHECK_THROWS_AS(exp::Tolerance::parse("q=1"), ConfigError);
  CHECK_THROWS_AS(exp::Tolerance::parse("frac=1.5"), ConfigError);
}

TEST_CASE("compare") {
  io::CsvTable th, mc;
  th.columns = {"t", "value"};
  mc.columns = {"t", "mean", "std_err"};
  for (int k = 0; k < 5; ++k) {
    th.add_row({io::fmt(k * 0.5), io::fmt(1.0 - 0.1 * k)});
    mc.add_row({io::fmt(k * 0.5), io::fmt(1.0 - 0.1 * k + 0.01), io::fmt(0.01)});
  }
  auto rep = exp::compare(th, mc, exp::Tolerance::parse("3"));
  CHECK(rep.pass);
  CHECK(std::abs(rep.max_abs_z - 1.0) < 1e-9);

  auto off = mc;
  off.rows[2][1] = io::fmt(0.5);
  rep = exp::compare(th, off, exp::Tolerance::parse("3"));
  CHECK(!rep.pass);
  CHECK(rep.failures == 1);
  CHECK(exp::compare(th, off, exp::Tolerance::parse("z=3,frac=0.8")).pass);

  auto shifted = mc;
  shifted.rows[1][0] = io::fmt(0.75);
  CHECK_THROWS_AS(exp::compare(th, shifted, exp::Tolerance::parse("3")), InputError);
  io::CsvTable wrong;
  wrong.columns = {"t", "avg"};
  CHECK_THROWS_AS(exp::compare(th, wrong, exp::Tolerance::parse("3")), InputError);

  auto with_nan = th;
  with_nan.rows[4][1] = "nan";
  rep = exp::compare(with_nan, mc, exp::Tolerance::parse("3"));
  CHECK(rep.pass);
  CHECK(rep.rows.size() == 5);
}

TEST_CASE("spike experiment on a small factor model") {
  auto dir = scratch("spike");
  json j = {{"schema_version", 1},
            {"model", {{"variant", "zero"}, {"spikes", {5.0}}}},
            {"dynamics", "additive"},
            {"N", 100},
            {"beta", 1},
            {"times", {0.0, 5.0, 10.0}},
            {"n_samples", 40},
            {"seed", 9},
            {"experiment", "spike"},
            {"output_dir", dir.string()},
            {"params", {{"h_source", "resolvent"}}}};
  auto rec = exp::run(exp::parse_config(j));
  auto th = io::read_csv(dir / "spike_theory.csv");
  CHECK(std::abs(th.number(1, "value") - std::sqrt(0.8)) < 1e-4);
  CHECK(std::abs(th.number(2, "position") - 7.0) < 1e-4);
  CHECK(io::read_file(dir / "report.txt").find("max_abs_z") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("CLI exit codes") {
  auto dir = scratch("cli");
  write_text(dir / "bad.json", R"({"schema_version": 1, "N": -3})");
  CHECK(run_cli("run --config " + (dir / "bad.json").string()) == 2);
  CHECK(run_cli("run --config " + (dir / "missing.json").string()) == 2);
  CHECK(run_cli("bogus") == 2);

  io::CsvTable th, mc;
  th.columns = {"t", "value"};
  mc.columns = {"t", "mean", "std_err"};
  th.add_row({"1", "0.5"});
  mc.add_row({"1", "0.51", "0.01"});
  io::write_csv(dir / "th.csv", th);
  io::write_csv(dir / "mc.csv", mc);
  CHECK(run_cli("compare --theory " + (dir / "th.csv").string() + " --mc " + (dir / "mc.csv").string()) == 0);
  CHECK(run_cli("compare --theory " + (dir / "th.csv").string() + " --mc " + (dir / "mc.csv").string() +
                " --tol 0.5") == 1);

  // A spike that dies before the requested time: the CLT run fails numerically.
  json clt = {{"schema_version", 1},
              {"model", {{"variant", "zero"}, {"spikes", {2.0}}}},
              {"dynamics", "additive"},
              {"N", 20},
              {"beta", 1},
              {"times", {10.0}},
              {"n_samples", 4},
              {"seed", 1},
              {"experiment", "clt"},
              {"output_dir", (dir / "clt").string()}};
  write_text(dir / "clt.json", clt.dump());
  CHECK(run_cli("run --config " + (dir / "clt.json").string()) == 3);

  CHECK(run_cli("figure 2 --n 40 --seed 2 --out " + (dir / "fig2").string()) <= 1);
  CHECK(fs::exists(dir / "fig2" / "figure2.svg"));
  CHECK(fs::exists(dir / "fig2" / "run_record.json"));
  fs::remove_all(dir);
}
