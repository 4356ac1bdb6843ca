// Command-line front end: preprocess, train, evaluate, crossval, gridsearch,
// report, synth.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ursa/commands.hpp"

namespace {

struct CommonFlags {
  std::string config, data, embeddings, arch, out, grid, checkpoint;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> jobs;
  std::vector<std::string> sets;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "JSON run configuration");
  cmd->add_option("--data", f.data, "CSV corpus");
  cmd->add_option("--embeddings", f.embeddings, "word2vec-style text embeddings");
  cmd->add_option("--arch", f.arch, "bilstm | cnn | cnn-bilstm | bilstm-slmfcnn");
  cmd->add_option("--seed", f.seed, "random seed");
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_option("--jobs", f.jobs, "parallel grid-search trials");
  cmd->add_option("--set", f.sets, "override a config key, e.g. --set dropout_rate=0.6")->take_all();
}

ursa::RunConfig resolve(const CommonFlags& f) {
  ursa::RunConfig cfg = f.config.empty() ? ursa::RunConfig{} : ursa::load_run_config(f.config);
  for (const auto& s : f.sets) ursa::apply_override(cfg, s);
  if (!f.data.empty()) cfg.data.path = f.data;
  if (!f.embeddings.empty()) cfg.embeddings = f.embeddings;
  if (!f.arch.empty()) cfg.arch = ursa::parse_architecture(f.arch);
  if (f.seed) cfg.seed = *f.seed;
  if (!f.out.empty()) cfg.out = f.out;
  if (f.jobs) cfg.jobs = *f.jobs;
  if (!f.grid.empty()) cfg.grid = f.grid;
  if (!f.checkpoint.empty()) cfg.checkpoint = f.checkpoint;
  return cfg;
}

void print_summary(const nlohmann::ordered_json& m) {
  std::cout << m.at("arch").get<std::string>() << " on " << m.at("dataset").get<std::string>() << " ("
            << m.at("split").get<std::string>() << "): accuracy " << ursa::format_double(m.at("accuracy").get<double>())
            << ", f1 " << ursa::format_double(m.at("f1").get<double>()) << ", auc "
            << ursa::format_double(m.at("auc").get<double>()) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Urdu document sentiment classification"};
  app.require_subcommand(1);

  CommonFlags flags;
  auto* preprocess = app.add_subcommand("preprocess", "clean a corpus and write vocabulary and statistics");
  auto* train = app.add_subcommand("train", "fit a model and evaluate it on a held-out split");
  auto* evaluate = app.add_subcommand("evaluate", "score a corpus with a saved checkpoint");
  auto* crossval = app.add_subcommand("crossval", "stratified k-fold cross-validation");
  auto* gridsearch = app.add_subcommand("gridsearch", "exhaustive hyperparameter search under cross-validation");
  auto* report = app.add_subcommand("report", "compare metrics files and export ROC points");
  for (auto* c : {preprocess, train, evaluate, crossval, gridsearch, report}) add_common(c, flags);
  gridsearch->add_option("--grid", flags.grid, "JSON object of candidate lists");
  evaluate->add_option("--checkpoint", flags.checkpoint, "model.ckpt.json from train");
  std::vector<std::string> metrics_files;
  report->add_option("metrics", metrics_files, "metrics.json files")->required();

  auto* synth = app.add_subcommand("synth", "write a synthetic separable corpus");
  std::size_t synth_n = 600;
  std::uint64_t synth_seed = 42;
  std::string synth_out;
  synth->add_option("-n,--documents", synth_n, "document count (even)");
  synth->add_option("--seed", synth_seed, "random seed");
  synth->add_option("--out", synth_out, "output CSV path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (synth->parsed()) {
      ursa::cmd_synth(synth_n, synth_seed, synth_out);
      std::cout << "wrote " << synth_n << " documents to " << synth_out << '\n';
      return 0;
    }
    ursa::RunConfig cfg = resolve(flags);
    if (preprocess->parsed()) {
      const auto r = ursa::cmd_preprocess(cfg);
      std::cout << r.stats.at("documents").get<std::size_t>() << " documents, vocabulary "
                << r.stats.at("vocab_size").get<std::size_t>() << ", written to " << cfg.out << '\n';
    } else if (train->parsed()) {
      print_summary(ursa::cmd_train(cfg).metrics);
    } else if (evaluate->parsed()) {
      print_summary(ursa::cmd_evaluate(cfg));
    } else if (crossval->parsed()) {
      print_summary(ursa::cmd_crossval(cfg).metrics);
    } else if (gridsearch->parsed()) {
      const auto r = ursa::cmd_gridsearch(cfg);
      const auto& best = r.search.rows[r.search.best];
      std::cout << r.search.rows.size() << " combinations; best #" << best.index << ' ' << best.assignment.dump()
                << " mean accuracy " << ursa::format_double(best.cv.mean.accuracy) << '\n';
    } else if (report->parsed()) {
      cfg.inputs = metrics_files;
      std::cout << ursa::report_table(ursa::cmd_report(cfg));
    }
  } catch (const ursa::UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
