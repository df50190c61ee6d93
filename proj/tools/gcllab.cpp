#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gcllab/cli.hpp"
#include "gcllab/numkit/alloc.hpp"

namespace {

unsigned workers_from_env() {
  const char* w = std::getenv("GCLLAB_WORKERS");
  if (!w || !*w) return 1;
  char* end = nullptr;
  long v = std::strtol(w, &end, 10);
  if (*end != '\0' || v < 1) {
    std::cerr << "ignoring GCLLAB_WORKERS='" << w << "' (want a positive integer)\n";
    return 1;
  }
  return static_cast<unsigned>(v);
}

}  // namespace

int main(int argc, char** argv) {
  gcl::prefer_heap_reuse();
  namespace cli = gcl::cli;

  CLI::App app{"gcllab: graph contrastive learning experiments"};
  app.require_subcommand(1);

  cli::GenDataOptions gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic dataset file");
  gen_cmd->add_option("--kind", gen.kind, "sbm or graph_set")->check(CLI::IsMember({"sbm", "graph_set"}));
  gen_cmd->add_option("--n", gen.n, "SBM node count");
  gen_cmd->add_option("--classes", gen.classes, "SBM class count");
  gen_cmd->add_option("--p-in", gen.p_in, "SBM within-class edge probability");
  gen_cmd->add_option("--p-out", gen.p_out, "SBM between-class edge probability");
  gen_cmd->add_option("--noise", gen.noise, "SBM feature noise std");
  gen_cmd->add_option("--feature-dim", gen.feature_dim, "SBM feature dimension");
  gen_cmd->add_option("--num-graphs", gen.num_graphs, "graph_set size");
  gen_cmd->add_option("--seed", gen.seed, "RNG seed");
  gen_cmd->add_option("--out", gen.out, "output dataset path")->required();

  std::string config_path;
  auto* train_cmd = app.add_subcommand("train", "Train every loss variant of an experiment config over its seeds");
  train_cmd->add_option("config", config_path, "experiment JSON")->required();

  cli::VerifyOptions ver;
  auto* verify_cmd = app.add_subcommand("verify", "Check the loss/ContraNorm equivalences on random instances");
  verify_cmd->add_option("--theorem", ver.theorem, "1, 2, 3 or all");
  verify_cmd->add_option("--trials", ver.trials, "random instances per check");
  verify_cmd->add_option("--n-max", ver.n_max, "largest node count drawn");
  verify_cmd->add_option("--seed", ver.seed, "RNG seed");
  verify_cmd->add_option("--out", ver.out, "JSON report path (default stdout)");

  cli::DiagnoseOptions diag;
  auto* diag_cmd = app.add_subcommand("diagnose", "Similarity, rank and spectra of a trained checkpoint");
  diag_cmd->add_option("--checkpoint", diag.checkpoint)->required();
  diag_cmd->add_option("--dataset", diag.dataset)->required();
  diag_cmd->add_option("--out", diag.out, "output directory")->required();

  cli::TableOptions tab;
  auto* table_cmd = app.add_subcommand("table", "Ablation table with Wilcoxon p-values from run directories");
  table_cmd->add_option("runs", tab.run_dirs, "run directories or glob patterns")->required();
  table_cmd->add_option("--reference", tab.reference, "row the p-values compare against");
  table_cmd->add_option("--out", tab.out, "directory for table.csv and table.md");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return cli::kExitUsage;
  }

  if (*gen_cmd) return cli::cmd_gen_data(gen, std::cout, std::cerr);
  if (*train_cmd) return cli::cmd_train(config_path, workers_from_env(), std::cout, std::cerr);
  if (*verify_cmd) return cli::cmd_verify(ver, std::cout, std::cerr);
  if (*diag_cmd) return cli::cmd_diagnose(diag, std::cout, std::cerr);
  if (*table_cmd) return cli::cmd_table(tab, std::cout, std::cerr);
  return cli::kExitUsage;
}
