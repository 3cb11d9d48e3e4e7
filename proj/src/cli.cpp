#include "bae/cli.hpp"

#include "bae/analysis.hpp"
#include "bae/config.hpp"
#include "bae/io_util.hpp"
#include "bae/similarity.hpp"
#include "bae/topk.hpp"
#include "bae/verify.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <iostream>
#include <map>
#include <sstream>

namespace bae {

namespace {

namespace fs = std::filesystem;

// Flag name -> config key, shared by train and sweep. Values are kept as
// strings and layered over the config file, so both go through one parser.
const std::vector<std::pair<std::string, std::string>> kTrainFlags = {
    {"--variant", "variant"},   {"--d-in", "d_in"},           {"--d-lat", "d_lat"},
    {"--d-mix", "d_mix"},       {"--k", "k"},                 {"--alpha", "alpha"},
    {"--lr", "lr"},             {"--steps", "steps"},         {"--warmup-frac", "warmup_frac"},
    {"--alpha-warmup", "alpha_warmup"}, {"--ns-iters", "ns_iters"}, {"--seed", "seed"},
    {"--data", "data"},         {"--kind", "kind"},           {"--data-seed", "data_seed"},
    {"--n-samples", "n_samples"}, {"--noise", "noise"},       {"--sparsity", "sparsity"},
    {"--n-features", "n_features"}, {"--subspace", "subspace"}, {"--batch-size", "batch_size"},
    {"--log-every", "log_every"}, {"--block-size", "block_size"}, {"--holdout-frac", "holdout_frac"},
    {"--checkpoint", "checkpoint"}, {"--metrics", "metrics"}};

struct TrainArgs {
  std::string config_path;
  std::map<std::string, std::string> flags;  // keyed by config key
};

void add_train_flags(CLI::App* cmd, TrainArgs& args) {
  cmd->add_option("--config", args.config_path, "flat key = value config file; flags override it")
      ->check(CLI::ExistingFile);
  for (const auto& [flag, key] : kTrainFlags) {
    cmd->add_option(flag, args.flags[key], "config key '" + key + "'");
  }
}

ConfigFile merged_config(CLI::App* cmd, const TrainArgs& args) {
  ConfigFile file = args.config_path.empty() ? ConfigFile{} : ConfigFile::load(args.config_path);
  for (const auto& [flag, key] : kTrainFlags) {
    if (cmd->count(flag) > 0) file.set(key, args.flags.at(key));
  }
  return file;
}

void require_data(const ConfigFile& file) {
  if (!file.has("data") && !file.has("kind")) {
    throw ConfigError("missing --data (activation dump) or --kind (synthetic data)");
  }
}

std::string report_line(const LossBreakdown& l) {
  return "error=" + io::fmt(l.error) + " density=" + io::fmt(l.density) + " total=" + io::fmt(l.total);
}

int cmd_train(CLI::App* cmd, const TrainArgs& args) {
  const ConfigFile file = merged_config(cmd, args);
  require_data(file);
  if (!file.has("checkpoint")) throw ConfigError("missing --checkpoint (output path)");
  const TrainConfig config = to_train_config(file);
  config.validate();

  TrainReport report;
  if (config.variant == Variant::topk) {
    report = train_topk(config).report;
  } else {
    report = train(config).report;
  }
  if (file.has("metrics")) io::atomic_write_text(file.values().at("metrics"), metrics_csv(report));
  std::cout << "held-out " << report_line(report.final_eval) << '\n';
  if (report.dropped_rows > 0) std::cout << "dropped " << report.dropped_rows << " zero-norm rows\n";
  return kExitOk;
}

int cmd_sweep(CLI::App* cmd, const TrainArgs& args, const std::string& alphas, const std::string& out) {
  ConfigFile file = merged_config(cmd, args);
  require_data(file);
  const std::vector<double> list = parse_number_list(alphas);
  TrainConfig config = to_train_config(file);
  config.checkpoint.clear();
  if (config.variant == Variant::topk) throw VariantError("sweep applies to bilinear variants only");
  config.validate();
  const std::vector<ParetoRow> rows = pareto_sweep(config, list);
  const std::string csv = pareto_csv(rows);
  if (out.empty()) {
    std::cout << csv;
  } else {
    io::atomic_write_text(out, csv);
  }
  return kExitOk;
}

int cmd_gen_data(const std::string& kind, std::size_t d_in, std::size_t n, std::uint64_t seed, const std::string& out,
                 double noise, double sparsity, std::size_t n_features, const std::string& subspace) {
  SyntheticSpec spec;
  spec.kind = parse_synthetic_kind(kind);
  spec.d_in = d_in;
  spec.seed = seed;
  spec.noise = noise;
  spec.sparsity = sparsity;
  spec.n_features = n_features;
  if (!subspace.empty()) {
    for (double v : parse_number_list(subspace)) spec.subspace.push_back(static_cast<std::size_t>(v));
  }
  spec.validate();
  if (n < 1) throw ConfigError("--n must be >= 1");
  const SyntheticData data = generate(spec, n);
  write_dump(out, data.raw);

  nlohmann::ordered_json truth;
  truth["kind"] = to_string(spec.kind);
  truth["seed"] = seed;
  std::vector<std::vector<double>> dirs;
  for (Eigen::Index r = 0; r < data.truth.directions.rows(); ++r) {
    const VectorD row = data.truth.directions.row(r).transpose();
    dirs.emplace_back(row.data(), row.data() + row.size());
  }
  truth["directions"] = dirs;
  truth["subspace"] = data.truth.subspace;
  io::atomic_write_text(out + ".truth.json", truth.dump(2) + "\n");
  std::cout << "wrote " << data.raw.rows() << " rows of d_in " << d_in << " to " << out << '\n';
  return kExitOk;
}

struct AnalyzeArgs {
  std::string model, data, what, out;
  std::size_t bins = 50;
  std::size_t latent = 0;
  bool log_scale = false;
  std::size_t candidates = 8;
  double top_fraction = kDefaultTopFraction;
  std::size_t batch_size = 4096;
};

std::string density_csv(const DensityHistogram& h) {
  std::ostringstream out;
  out << "latent,density\n";
  for (Eigen::Index j = 0; j < h.densities.size(); ++j) out << j << ',' << io::fmt(h.densities(j)) << '\n';
  return out.str();
}

std::string candidates_csv(const BilinearModel& model, const std::vector<std::size_t>& rows) {
  const VectorD scores = cluster_scores(model);
  std::ostringstream out;
  out << "rank,row,score\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out << i << ',' << rows[i] << ',' << io::fmt(scores(static_cast<Eigen::Index>(rows[i]))) << '\n';
  }
  return out.str();
}

int cmd_analyze(const AnalyzeArgs& a) {
  const BilinearModel model = load_checkpoint(a.model);
  const auto batches = load_dump(a.data, a.batch_size, model.d_in());
  fs::create_directories(a.out);
  const fs::path dir(a.out);
  if (a.what == "density") {
    const DensityHistogram h = density_histogram(model, batches, a.bins);
    io::atomic_write_text(dir / "density.csv", density_csv(h));
    io::atomic_write_text(dir / "density_hist.csv", histogram_csv(h.histogram));
    std::cout << "dense fraction " << io::fmt(h.dense_fraction) << '\n';
  } else if (a.what == "manifold") {
    const auto rows = rank_candidates(model, a.candidates);
    io::atomic_write_text(dir / "candidates.csv", candidates_csv(model, rows));
    if (!rows.empty()) {
      const ManifoldExport m = export_manifold(model, build_composite(model, rows.front()), batches, a.top_fraction);
      io::atomic_write_text(dir / "manifold.json", manifold_json(m));
      io::atomic_write_text(dir / "manifold.csv", manifold_csv(m));
    }
  } else if (a.what == "prefix") {
    const VectorD curve = prefix_curve(model, batches);
    std::optional<GreedyOrder> greedy;
    if (model.d_lat() <= kMaxGreedyLatents) greedy = greedy_reorder(model, batches);
    std::ostringstream out;
    out << "k,prefix_error" << (greedy ? ",greedy_latent,greedy_error" : "") << '\n';
    for (Eigen::Index k = 0; k < curve.size(); ++k) {
      out << k + 1 << ',' << io::fmt(curve(k));
      if (greedy) out << ',' << greedy->permutation[static_cast<std::size_t>(k)] << ',' << io::fmt(greedy->curve(k));
      out << '\n';
    }
    io::atomic_write_text(dir / "prefix.csv", out.str());
  } else if (a.what == "activation-hist") {
    const ActivationHistogram h = activation_histogram(model, batches, a.latent, a.bins, a.log_scale);
    io::atomic_write_text(dir / "activation_hist.csv", histogram_csv(h.histogram));
    std::ostringstream q;
    q << "quantile,value\n";
    for (const auto& [p, v] : h.quantiles) q << io::fmt(p) << ',' << io::fmt(v) << '\n';
    io::atomic_write_text(dir / "activation_quantiles.csv", q.str());
  }
  return kExitOk;
}

int cmd_export_manifold(const AnalyzeArgs& a, std::optional<std::size_t> row) {
  const BilinearModel model = load_checkpoint(a.model);
  const auto batches = load_dump(a.data, a.batch_size, model.d_in());
  std::size_t seed_row = 0;
  if (row) {
    seed_row = *row;
  } else {
    const auto rows = rank_candidates(model, 1);
    if (rows.empty()) throw std::runtime_error("model has no manifold candidates");
    seed_row = rows.front();
  }
  const ManifoldExport m = export_manifold(model, build_composite(model, seed_row), batches, a.top_fraction);
  const bool csv = fs::path(a.out).extension() == ".csv";
  io::atomic_write_text(a.out, csv ? manifold_csv(m) : manifold_json(m));
  std::cout << "exported " << m.points.rows() << " points for row " << seed_row << '\n';
  return kExitOk;
}

int cmd_similarity(const std::string& a, const std::string& b, const std::string& metric, const std::string& out) {
  const BilinearModel ma = load_checkpoint(a);
  const BilinearModel mb = load_checkpoint(b);
  if (metric == "frobenius") {
    std::cout << io::fmt(frobenius_similarity(ma, mb)) << '\n';
  } else {
    const PermutationSimilarity p = permutation_similarity(ma, mb);
    std::cout << io::fmt(p.value) << '\n';
    if (!out.empty()) io::atomic_write_text(out, permutation_csv(p));
  }
  return kExitOk;
}

int cmd_verify(std::uint64_t seed, std::size_t draws) {
  bool ok = true;
  for (const CheckResult& r : run_verify(seed, draws)) {
    std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.detail << '\n';
    ok = ok && r.passed;
  }
  return ok ? kExitOk : kExitFailure;
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"Bilinear autoencoders: training, analysis and similarity"};
  app.require_subcommand(1);

  std::string gd_kind = "superposed_sparse", gd_out, gd_subspace;
  std::size_t gd_d_in = 16, gd_n = 16384, gd_features = 24;
  std::uint64_t gd_seed = 0;
  double gd_noise = 0.01, gd_sparsity = 0.05;
  auto* gen = app.add_subcommand("gen-data", "write a synthetic activation dump");
  gen->add_option("--kind", gd_kind, "superposed_sparse|circle_manifold|sphere_manifold|clustered_directions|gaussian_noise");
  gen->add_option("--d-in", gd_d_in, "input dimension");
  gen->add_option("--n", gd_n, "number of rows");
  gen->add_option("--seed", gd_seed, "generator seed");
  gen->add_option("--noise", gd_noise, "isotropic noise std");
  gen->add_option("--sparsity", gd_sparsity, "fraction of planted features active per row");
  gen->add_option("--n-features", gd_features, "planted directions or cluster centres");
  gen->add_option("--subspace", gd_subspace, "comma-separated coordinates of a planted manifold");
  gen->add_option("--out", gd_out, "dump path (a .truth.json sidecar is written next to it)")->required();

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "train a bilinear or TopK autoencoder");
  add_train_flags(train_cmd, train_args);

  TrainArgs sweep_args;
  std::string alphas, sweep_out;
  auto* sweep = app.add_subcommand("sweep", "train once per alpha and write an alpha,error,density table");
  add_train_flags(sweep, sweep_args);
  sweep->add_option("--alphas", alphas, "comma-separated alpha values")->required();
  sweep->add_option("--out", sweep_out, "CSV path (stdout when omitted)");

  AnalyzeArgs an;
  auto* analyze = app.add_subcommand("analyze", "weight-based analysis of a checkpoint");
  analyze->add_option("--model", an.model, "checkpoint")->required()->check(CLI::ExistingFile);
  analyze->add_option("--data", an.data, "activation dump")->required()->check(CLI::ExistingFile);
  analyze->add_option("--what", an.what, "density|manifold|prefix|activation-hist")
      ->required()
      ->check(CLI::IsMember({"density", "manifold", "prefix", "activation-hist"}));
  analyze->add_option("--out", an.out, "output directory")->required();
  analyze->add_option("--bins", an.bins, "histogram bins")->check(CLI::PositiveNumber);
  analyze->add_option("--latent", an.latent, "latent for activation-hist");
  analyze->add_flag("--log", an.log_scale, "log-spaced activation bins");
  analyze->add_option("--candidates", an.candidates, "manifold candidates to rank");
  analyze->add_option("--top-fraction", an.top_fraction, "fraction of strongest inputs exported");

  AnalyzeArgs ex;
  std::optional<std::size_t> ex_row;
  auto* export_cmd = app.add_subcommand("export-manifold", "project inputs onto a composite latent's 3D eigenbasis");
  export_cmd->add_option("--model", ex.model, "checkpoint")->required()->check(CLI::ExistingFile);
  export_cmd->add_option("--data", ex.data, "activation dump")->required()->check(CLI::ExistingFile);
  export_cmd->add_option("--row", ex_row, "interaction row to seed the composite (default: top candidate)");
  export_cmd->add_option("--top-fraction", ex.top_fraction, "fraction of strongest inputs exported");
  export_cmd->add_option("--out", ex.out, "output path; .csv for CSV, JSON otherwise")->required();

  std::string sim_a, sim_b, sim_metric = "frobenius", sim_out;
  auto* sim = app.add_subcommand("similarity", "compare two checkpoints");
  sim->add_option("--a", sim_a, "first checkpoint")->required()->check(CLI::ExistingFile);
  sim->add_option("--b", sim_b, "second checkpoint")->required()->check(CLI::ExistingFile);
  sim->add_option("--metric", sim_metric, "frobenius|permutation")->check(CLI::IsMember({"frobenius", "permutation"}));
  sim->add_option("--out", sim_out, "permutation CSV path");

  std::uint64_t verify_seed = 0;
  std::size_t verify_draws = 100;
  auto* verify = app.add_subcommand("verify", "check kernel-trick computations against brute-force references");
  verify->add_option("--seed", verify_seed, "random seed");
  verify->add_option("--draws", verify_draws, "random draws per property")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    if (app.get_subcommands().empty()) std::cerr << app.help();
    return kExitInvalid;
  }

  try {
    if (*gen) {
      return cmd_gen_data(gd_kind, gd_d_in, gd_n, gd_seed, gd_out, gd_noise, gd_sparsity, gd_features, gd_subspace);
    }
    if (*train_cmd) return cmd_train(train_cmd, train_args);
    if (*sweep) return cmd_sweep(sweep, sweep_args, alphas, sweep_out);
    if (*analyze) return cmd_analyze(an);
    if (*export_cmd) return cmd_export_manifold(ex, ex_row);
    if (*sim) return cmd_similarity(sim_a, sim_b, sim_metric, sim_out);
    if (*verify) return cmd_verify(verify_seed, verify_draws);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const DumpError& e) {
    // A dump that contradicts --d-in is a flag problem, not a failed run.
    const bool invalid = e.kind() == DumpError::Kind::dim_mismatch;
    std::cerr << (invalid ? "error: " : "failed: ") << e.what() << '\n';
    return invalid ? kExitInvalid : kExitFailure;
  } catch (const std::exception& e) {
    std::cerr << "failed: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitInvalid;
}

}  // namespace bae
