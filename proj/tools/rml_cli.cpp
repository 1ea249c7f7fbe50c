#include <CLI11.hpp>
#include <cstdio>
#include <iostream>
#include <json.hpp>

#include "rml/csv.hpp"
#include "rml/error.hpp"
#include "rml/experiment.hpp"

namespace {

nlohmann::json figure_config(int which, std::size_t n, std::uint64_t seed, std::size_t samples,
                             const std::string& out) {
  nlohmann::json j;
  j["schema_version"] = rml::exp::kSchemaVersion;
  j["N"] = n;
  j["beta"] = 1;
  j["seed"] = seed;
  j["output_dir"] = out;
  j["experiment"] = "figure" + std::to_string(which);
  switch (which) {
    case 2:
      j["model"] = {{"variant", "zero"}, {"spikes", {5.0}}};
      j["dynamics"] = "additive";
      j["times"] = {20.0};
      j["n_samples"] = 1;
      break;
    case 3:
      j["model"] = {{"variant", "semicircle"}, {"params", {{"radius", 2.0}}}};
      j["dynamics"] = "ou";
      j["times"] = {0.125};
      j["n_samples"] = samples ? samples : 200;
      break;
    default: {
      j["model"] = {{"variant", "zero"}, {"spikes", {5.0}}};
      j["dynamics"] = "additive";
      nlohmann::json ts = nlohmann::json::array();
      for (int k = 0; k <= 60; ++k) ts.push_back(0.5 * k);
      j["times"] = ts;
      j["n_samples"] = samples ? samples : 100;
    }
  }
  return j;
}

int run_config(const rml::exp::ExperimentConfig& cfg) {
  auto rec = rml::exp::run(cfg);
  std::cout << "experiment " << rml::exp::kind_name(cfg.experiment) << " -> " << cfg.output_dir.string() << "\n";
  std::cout << "config_hash " << rec.config_hash << "\n";
  for (const auto& m : rec.manifest) std::cout << "  " << m.file << " " << m.sha256 << "\n";
  std::cout << "verdict " << (rec.passed ? "PASS" : "FAIL") << "\n";
  return rec.passed ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rmlab: eigenvector overlap dynamics for deformed random matrices"};
  app.require_subcommand(1);

  std::string config_path;
  auto* run = app.add_subcommand("run", "run an experiment from a JSON config");
  run->add_option("--config", config_path, "config file")->required();

  std::string theory, mc, tol = "3";
  auto* cmp = app.add_subcommand("compare", "z-score comparison of a theory CSV against an MC CSV");
  cmp->add_option("--theory", theory, "theory CSV (value column)")->required();
  cmp->add_option("--mc", mc, "MC CSV (mean, std_err columns)")->required();
  cmp->add_option("--tol", tol, "tolerance: '3', 'z=3' or 'z=3,frac=0.9'");

  int which = 2;
  std::size_t n = 200, samples = 0;
  std::uint64_t seed = 1;
  std::string out;
  auto* fig = app.add_subcommand("figure", "reproduce figure 2, 3 or 4");
  fig->add_option("which", which, "figure number")->required()->check(CLI::IsMember({2, 3, 4}));
  fig->add_option("--n", n, "matrix size")->check(CLI::PositiveNumber);
  fig->add_option("--seed", seed, "run seed");
  fig->add_option("--samples", samples, "Monte Carlo samples (figures 3 and 4)");
  fig->add_option("--out", out, "output directory (default figureK)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*run) return run_config(rml::exp::load_config(config_path));
    if (*cmp) {
      auto rep = rml::exp::compare(rml::io::read_csv(theory), rml::io::read_csv(mc), rml::exp::Tolerance::parse(tol));
      std::cout << rep.to_text();
      return rep.pass ? 0 : 1;
    }
    if (*fig) {
      if (out.empty()) out = "figure" + std::to_string(which);
      return run_config(rml::exp::parse_config(figure_config(which, n, seed, samples, out)));
    }
  } catch (const rml::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const rml::InputError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 2;
  } catch (const rml::Error& e) {
    std::cerr << "numeric failure in " << e.where() << ": " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
