// Command-line front end: synth, gbc, augment, train, ablate, sweep,
// noise-eval, lcc-eval, bench. Every run writes manifest.json into its
// output directory.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "scgnn/scgnn.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace scgnn;

namespace {

constexpr const char *kVersion = "0.1.0";

int exit_code(ErrorKind k) {
  switch (k) {
  case ErrorKind::Validation:
    return 2;
  case ErrorKind::Data:
    return 3;
  case ErrorKind::Runtime:
    return 4;
  }
  return 4;
}

std::string hex64(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// FNV-1a of every regular file under p, keyed by relative path.
json hash_input(const fs::path &p) {
  json out = json::object();
  if (fs::is_regular_file(p)) {
    out[p.filename().string()] = hex64(hash_file(p));
    return out;
  }
  if (!fs::is_directory(p))
    return out;
  std::vector<fs::path> files;
  for (const auto &e : fs::recursive_directory_iterator(p))
    if (e.is_regular_file() && e.path().filename() != "manifest.json")
      files.push_back(e.path());
  std::sort(files.begin(), files.end());
  for (const auto &f : files)
    out[fs::relative(f, p).generic_string()] = hex64(hash_file(f));
  return out;
}

class Manifest {
public:
  Manifest(const CLI::App &sub, std::uint64_t seed) {
    j_["subcommand"] = sub.get_name();
    j_["tool_version"] = kVersion;
    j_["seed"] = seed;
    json opts = json::object();
    for (const CLI::Option *o : sub.get_options()) {
      const auto name = o->get_single_name();
      if (name.empty() || name == "help" || name == "config")
        continue;
      if (o->count() > 0) {
        const auto &r = o->results();
        opts[name] = r.size() == 1 ? json(r.front()) : json(r);
      } else {
        opts[name] = o->get_default_str();
      }
    }
    j_["options"] = opts;
    j_["inputs"] = json::object();
    j_["outputs"] = json::array();
  }

  void input(const std::string &role, const fs::path &p) {
    j_["inputs"][role] = {{"path", p.string()}, {"hashes", hash_input(p)}};
  }
  void output(const fs::path &p) { j_["outputs"].push_back(p.string()); }
  json &resolved() { return j_["resolved_config"]; }

  void write(const fs::path &dir) {
    detail::ensure_dir(dir);
    const auto path = dir / "manifest.json";
    output(path);
    detail::open_out(path) << j_.dump(2) << '\n';
  }

private:
  json j_;
};

// ---------------------------------------------------------------------------
// shared option groups

struct GbcFlags {
  double purity = 0.8;
  std::string size_limit = "sqrt";
  std::string radius = "mean";
  std::string denominator = "labeled";
  int kmeans_iters = 50;
  double kmeans_tol = 1e-4;

  void add(CLI::App *app) {
    app->add_option("--purity", purity, "Purity threshold t in (0,1]");
    app->add_option("--size-limit", size_limit,
                    "Ball size limit: 'sqrt' or a positive integer");
    app->add_option("--radius", radius, "Ball radius: mean or max")
        ->check(CLI::IsMember({"mean", "max"}));
    app->add_option("--purity-denominator", denominator,
                    "Purity over labeled members or all members")
        ->check(CLI::IsMember({"labeled", "all"}));
    app->add_option("--kmeans-iters", kmeans_iters, "k-means iteration cap");
    app->add_option("--kmeans-tol", kmeans_tol, "k-means center-shift tolerance");
  }

  GBCConfig config(std::uint64_t seed) const {
    GBCConfig c;
    c.purity_threshold = purity;
    if (size_limit != "sqrt") {
      std::size_t pos = 0;
      long long v = 0;
      try {
        v = std::stoll(size_limit, &pos);
      } catch (const std::exception &) {
        pos = 0;
      }
      if (pos != size_limit.size() || v < 1)
        throw SpecError("--size-limit must be 'sqrt' or a positive integer");
      c.size_limit_mode = SizeLimitMode::Fixed;
      c.fixed_size_limit = static_cast<std::size_t>(v);
    }
    c.radius_mode =
        radius == "max" ? RadiusMode::MaxDistance : RadiusMode::MeanDistance;
    c.purity_denominator = denominator == "all" ? PurityDenominator::AllMembers
                                                : PurityDenominator::LabeledOnly;
    c.kmeans_max_iters = kmeans_iters;
    c.kmeans_tol = kmeans_tol;
    c.seed = seed + seed_offset::kGbc;
    validate(c);
    return c;
  }
};

struct BridgeFlags {
  std::string mode = "full";
  int k = 5;

  void add(CLI::App *app) {
    app->add_option("--bridge", mode, "Bridging edges: full or random_k")
        ->check(CLI::IsMember({"full", "random_k"}));
    app->add_option("--bridge-k", k, "Partners per anchor for random_k");
  }
  BridgeMode get() const {
    return mode == "full" ? BridgeMode::full() : BridgeMode::random_k(k);
  }
};

struct TrainFlags {
  TrainConfig cfg;
  BackboneSpec spec;
  std::string backbone = "gcn";
  std::vector<std::string> ablate;
  std::string fusion_input = "logits";
  std::string pseudo_source = "lcc";

  void add(CLI::App *app, bool with_loss_weights = true) {
    if (with_loss_weights) {
      app->add_option("--beta", cfg.beta, "Anchor loss weight");
      app->add_option("--gamma", cfg.gamma, "Pseudo-label loss weight");
    }
    app->add_option("--epochs", cfg.epochs, "Training epochs");
    app->add_option("--lr", cfg.lr, "Adam learning rate");
    app->add_option("--weight-decay", cfg.weight_decay, "L2 weight decay");
    app->add_option("--lcc-start", cfg.lcc_start_epoch,
                    "First epoch that generates pseudo labels");
    app->add_option("--lcc-every", cfg.lcc_refresh_every,
                    "Pseudo-label refresh interval in epochs");
    app->add_option("--fusion-hidden", cfg.fusion_hidden,
                    "Hidden width of the fusion scorer");
    app->add_option("--fusion-input", fusion_input,
                    "Fusion scorer input: logits or probabilities")
        ->check(CLI::IsMember({"logits", "probabilities"}));
    app->add_option("--pseudo-source", pseudo_source,
                    "Pseudo labels from lcc, gbc or model")
        ->check(CLI::IsMember({"lcc", "gbc", "model"}));
    app->add_option("--backbone", backbone, "Backbone: gcn or mlp")
        ->check(CLI::IsMember({"gcn", "mlp"}));
    app->add_option("--hidden", spec.hidden, "Backbone hidden width");
    app->add_option("--dropout", spec.dropout, "Dropout rate");
    if (with_loss_weights)
      app->add_option("--ablate", ablate,
                      "Ablations: no_lcc, no_augment, no_parallel")
          ->delimiter(',')
          ->check(CLI::IsMember({"no_lcc", "no_augment", "no_parallel"}));
  }

  void resolve(std::uint64_t seed) {
    cfg.seed = seed;
    spec.kind = backbone == "mlp" ? BackboneKind::MLP : BackboneKind::GCN;
    cfg.fusion_on_logits = fusion_input == "logits";
    cfg.pseudo_source = pseudo_source == "gbc"     ? PseudoSource::Gbc
                        : pseudo_source == "model" ? PseudoSource::Model
                                                   : PseudoSource::Lcc;
    for (const auto &a : ablate) {
      if (a == "no_lcc")
        cfg.ablation.no_lcc = true;
      else if (a == "no_augment")
        cfg.ablation.no_augment = true;
      else if (a == "no_parallel")
        cfg.ablation.no_parallel = true;
    }
    validate(cfg);
    validate(spec);
  }
};

std::set<NodeId> train_nodes(const GraphBundle &b) {
  std::set<NodeId> s;
  for (std::size_t i = 0; i < b.num_nodes(); ++i)
    if (b.splits[i] == Split::Train)
      s.insert(static_cast<NodeId>(i));
  return s;
}

// Loads --augment when given, otherwise derives the augment graph from the
// granular-ball model.
std::optional<AugmentGraph> obtain_augment(const GraphBundle &bundle,
                                           const GBModel *gb,
                                           const std::string &aug_dir,
                                           const BridgeFlags &bridge,
                                           std::uint64_t seed, Manifest &m) {
  if (!aug_dir.empty()) {
    m.input("augment", aug_dir);
    auto g = load_augment(aug_dir);
    if (!(g.base == bundle))
      throw ConfigError("augment graph was not built from this bundle");
    return g;
  }
  if (gb == nullptr)
    return std::nullopt;
  auto anchors = build_anchors(*gb, bundle);
  return build_augment(*gb, bundle, anchors, bridge.get(),
                       seed + seed_offset::kBridge);
}

void print_csv_row(std::ostream &os, const std::vector<std::string> &cells) {
  for (std::size_t i = 0; i < cells.size(); ++i)
    os << (i ? "," : "") << cells[i];
  os << '\n';
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

double mean(const std::vector<double> &v) {
  return v.empty() ? 0.0
                   : std::accumulate(v.begin(), v.end(), 0.0) /
                         static_cast<double>(v.size());
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Granular-ball structure and supervision enhancement for GNNs"};
  app.set_version_flag("--version", kVersion);
  app.set_config("--config", "", "key=value config file; [subcommand] sections");
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  app.fallthrough(); // lets --config follow the subcommand

  std::uint64_t seed = 0;
  std::string out_dir;

  // synth ------------------------------------------------------------------
  auto *synth = app.add_subcommand("synth", "Generate a synthetic bundle");
  SyntheticSpec sspec;
  std::string preset = "none";
  synth->add_option("--out", out_dir, "Output bundle directory")->required();
  synth->add_option("--preset", preset,
                    "Start from a named spec (uplift); flags still override")
      ->check(CLI::IsMember({"none", "uplift"}));
  synth->add_option("--n", sspec.n, "Nodes");
  synth->add_option("--d", sspec.d, "Feature dimension");
  synth->add_option("--c", sspec.c, "Classes");
  synth->add_option("--spread", sspec.cluster_spread, "Blob standard deviation");
  synth->add_option("--center-scale", sspec.center_scale,
                    "Distance of class centers from the origin");
  synth->add_option("--homophily", sspec.homophily, "Same-class edge fraction");
  synth->add_option("--avg-degree", sspec.avg_degree, "Average degree");
  synth->add_option("--label-rate", sspec.label_rate, "Train fraction per class");
  synth->add_option("--val-rate", sspec.val_rate, "Validation fraction");
  synth->add_option("--seed", seed, "Random seed");

  // gbc --------------------------------------------------------------------
  auto *gbc = app.add_subcommand("gbc", "Build granular balls over a bundle");
  std::string bundle_dir;
  GbcFlags gflags;
  gbc->add_option("bundle", bundle_dir, "Bundle directory")->required();
  gbc->add_option("--out", out_dir, "Output directory")->required();
  gbc->add_option("--seed", seed, "Random seed");
  gflags.add(gbc);

  // augment ----------------------------------------------------------------
  auto *augment = app.add_subcommand("augment", "Build the augmented graph");
  std::string gbmodel_path, aug_dir;
  BridgeFlags bflags;
  augment->add_option("bundle", bundle_dir, "Bundle directory")->required();
  augment->add_option("--gbmodel", gbmodel_path, "gbmodel.json")->required();
  augment->add_option("--out", out_dir, "Output directory")->required();
  augment->add_option("--seed", seed, "Random seed");
  bflags.add(augment);

  // train ------------------------------------------------------------------
  auto *train_cmd = app.add_subcommand("train", "Train SCGNN or a plain backbone");
  TrainFlags tflags;
  bool plain = false;
  train_cmd->add_option("bundle", bundle_dir, "Bundle directory")->required();
  train_cmd->add_option("--gbmodel", gbmodel_path, "gbmodel.json");
  train_cmd->add_option("--augment", aug_dir,
                        "Augment directory; derived from --gbmodel if omitted");
  train_cmd->add_option("--out", out_dir, "Output directory")->required();
  train_cmd->add_option("--seed", seed, "Random seed");
  train_cmd->add_flag("--plain", plain, "Train the plain backbone only");
  tflags.add(train_cmd);
  bflags.add(train_cmd);

  // ablate -----------------------------------------------------------------
  auto *ablate = app.add_subcommand("ablate", "Full model against its ablations");
  int runs = 1;
  ablate->add_option("bundle", bundle_dir, "Bundle directory")->required();
  ablate->add_option("--gbmodel", gbmodel_path, "gbmodel.json")->required();
  ablate->add_option("--augment", aug_dir, "Augment directory");
  ablate->add_option("--out", out_dir, "Output directory")->required();
  ablate->add_option("--seed", seed, "First training seed");
  ablate->add_option("--runs", runs, "Training seeds seed..seed+runs-1");
  TrainFlags aflags;
  aflags.add(ablate, false);
  ablate->add_option("--beta", aflags.cfg.beta, "Anchor loss weight");
  ablate->add_option("--gamma", aflags.cfg.gamma, "Pseudo-label loss weight");
  bflags.add(ablate);

  // sweep ------------------------------------------------------------------
  auto *sweep = app.add_subcommand("sweep", "Accuracy over a beta x gamma grid");
  std::vector<double> betas{0.0, 0.25, 0.5, 0.75, 1.0};
  std::vector<double> gammas{0.0, 0.25, 0.5, 0.75, 1.0};
  TrainFlags swflags;
  sweep->add_option("bundle", bundle_dir, "Bundle directory")->required();
  sweep->add_option("--gbmodel", gbmodel_path, "gbmodel.json")->required();
  sweep->add_option("--augment", aug_dir, "Augment directory");
  sweep->add_option("--out", out_dir, "Output directory")->required();
  sweep->add_option("--seed", seed, "First training seed");
  sweep->add_option("--runs", runs, "Training seeds per cell");
  sweep->add_option("--betas", betas, "Beta values")->delimiter(',');
  sweep->add_option("--gammas", gammas, "Gamma values")->delimiter(',');
  swflags.add(sweep, false);
  bflags.add(sweep);

  // noise-eval -------------------------------------------------------------
  auto *noise = app.add_subcommand(
      "noise-eval", "Accuracy and noise of the pseudo, ball and model label sets");
  std::string report_path;
  noise->add_option("bundle", bundle_dir, "Bundle directory")->required();
  noise->add_option("--gbmodel", gbmodel_path, "gbmodel.json")->required();
  noise->add_option("--report", report_path,
                    "report.json from train (its prediction is P)")
      ->required();
  noise->add_option("--out", out_dir, "Output directory")->required();

  // lcc-eval ---------------------------------------------------------------
  auto *lcc_eval = app.add_subcommand(
      "lcc-eval", "Closed-form and Monte-Carlo noise of the consistent set");
  std::vector<double> r1s{0.05, 0.1, 0.2, 0.3, 0.4, 0.5};
  std::vector<double> r2s{0.05, 0.1, 0.2, 0.3, 0.4, 0.5};
  std::vector<int> cs{7};
  long trials = 100000;
  lcc_eval->add_option("--r1", r1s, "Noise rates of the first predictor")
      ->delimiter(',');
  lcc_eval->add_option("--r2", r2s, "Noise rates of the second predictor")
      ->delimiter(',');
  lcc_eval->add_option("--c", cs, "Class counts")->delimiter(',');
  lcc_eval->add_option("--trials", trials, "Monte-Carlo trials per cell");
  lcc_eval->add_option("--seed", seed, "Random seed");
  lcc_eval->add_option("--out", out_dir, "Output directory")->required();

  // bench ------------------------------------------------------------------
  auto *bench = app.add_subcommand("bench", "GBC vs brute-force kNN scaling");
  BenchSpec bspec;
  bench->add_option("--sizes", bspec.sizes, "Node counts")->delimiter(',');
  bench->add_option("--d", bspec.d, "Feature dimension");
  bench->add_option("--c", bspec.c, "Classes");
  bench->add_option("--k", bspec.k_for_knn, "Neighbours for the kNN graph");
  bench->add_option("--repeats", bspec.repeats, "Timed runs per size");
  bench->add_option("--min-sample", bspec.min_sample_s,
                    "Minimum seconds per timed sample; short calls are looped "
                    "and averaged");
  bench->add_option("--budget", bspec.time_budget_s,
                    "Per-run time budget in seconds");
  bench->add_option("--seed", seed, "Random seed");
  bench->add_option("--out", out_dir, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp &e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp &e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion &e) {
    return app.exit(e);
  } catch (const CLI::ParseError &e) {
    app.exit(e);
    return 2;
  }

  try {
    const fs::path out(out_dir);

    if (synth->parsed()) {
      if (preset == "uplift") {
        // Preset values apply unless the flag was given explicitly.
        auto p = uplift_benchmark(seed);
        auto keep = [&](const char *flag, auto &field, auto value) {
          if (synth->count(flag) == 0)
            field = value;
        };
        keep("--n", sspec.n, p.n);
        keep("--d", sspec.d, p.d);
        keep("--c", sspec.c, p.c);
        keep("--spread", sspec.cluster_spread, p.cluster_spread);
        keep("--center-scale", sspec.center_scale, p.center_scale);
        keep("--homophily", sspec.homophily, p.homophily);
        keep("--avg-degree", sspec.avg_degree, p.avg_degree);
        keep("--label-rate", sspec.label_rate, p.label_rate);
      }
      sspec.seed = seed;
      Manifest m(*synth, seed);
      auto b = generate_synthetic(sspec);
      save_bundle(b, out);
      m.resolved() = {{"n", sspec.n},
                      {"d", sspec.d},
                      {"c", sspec.c},
                      {"cluster_spread", sspec.cluster_spread},
                      {"center_scale", sspec.center_scale},
                      {"homophily", sspec.homophily},
                      {"avg_degree", sspec.avg_degree},
                      {"label_rate", sspec.label_rate},
                      {"val_rate", sspec.val_rate},
                      {"seed", sspec.seed}};
      m.output(out);
      m.write(out);
      std::cout << "nodes,edges,homophily\n"
                << b.num_nodes() << ',' << b.edges.size() << ','
                << fmt(edge_homophily(b)) << '\n';
      return 0;
    }

    if (gbc->parsed()) {
      const auto cfg = gflags.config(seed);
      Manifest m(*gbc, seed);
      m.input("bundle", bundle_dir);
      auto b = load_bundle(bundle_dir);
      auto model = build(b, cfg);
      detail::ensure_dir(out);
      save_gbmodel(model, out / "gbmodel.json");
      const auto dc = domain_counts(model);
      std::ostringstream row;
      row << "n,balls,definite,uncertain,chaos,size_limit\n"
          << b.num_nodes() << ',' << model.balls.size() << ',' << dc[0] << ','
          << dc[1] << ',' << dc[2] << ',' << model.size_limit << '\n';
      detail::open_out(out / "gbc_stats.csv") << row.str();
      std::cout << row.str();
      m.resolved() = to_json(cfg);
      m.output(out / "gbmodel.json");
      m.output(out / "gbc_stats.csv");
      m.write(out);
      return 0;
    }

    if (augment->parsed()) {
      Manifest m(*augment, seed);
      m.input("bundle", bundle_dir);
      m.input("gbmodel", gbmodel_path);
      auto b = load_bundle(bundle_dir);
      auto model = load_gbmodel(gbmodel_path);
      auto anchors = build_anchors(model, b);
      auto g = build_augment(model, b, anchors, bflags.get(),
                             seed + seed_offset::kBridge);
      save_augment(g, out);
      m.resolved() = {{"bridge_mode", bflags.mode},
                      {"bridge_k", bflags.k},
                      {"bridge_seed", seed + seed_offset::kBridge}};
      m.output(out);
      m.write(out);
      std::cout << "anchors,projection_edges,bridging_edges\n"
                << g.anchors.size() << ',' << g.projection_edges.size() << ','
                << g.bridging_edges.size() << '\n';
      return 0;
    }

    if (train_cmd->parsed()) {
      tflags.resolve(seed);
      Manifest m(*train_cmd, seed);
      m.input("bundle", bundle_dir);
      auto b = load_bundle(bundle_dir);
      TrainReport r;
      if (plain) {
        r = train_backbone(b, tflags.cfg, tflags.spec);
      } else {
        std::optional<GBModel> gb;
        if (!gbmodel_path.empty()) {
          m.input("gbmodel", gbmodel_path);
          gb = load_gbmodel(gbmodel_path);
        }
        auto aug = obtain_augment(b, gb ? &*gb : nullptr, aug_dir, bflags,
                                  gb ? gb->config.seed : seed, m);
        r = train(b, gb ? &*gb : nullptr, aug ? &*aug : nullptr, tflags.cfg,
                  tflags.spec);
      }
      write_report(r, out / "report.json");
      m.resolved() = r.config;
      m.output(out / "report.json");
      m.output(out / "report.csv");
      m.write(out);
      std::cout << "best_epoch,best_val_acc,test_acc\n"
                << r.best_epoch << ',' << fmt(r.best_val_acc) << ','
                << fmt(r.test_acc) << '\n';
      return 0;
    }

    if (ablate->parsed()) {
      if (runs < 1)
        throw ConfigError("--runs must be >= 1");
      aflags.resolve(seed);
      Manifest m(*ablate, seed);
      m.input("bundle", bundle_dir);
      m.input("gbmodel", gbmodel_path);
      auto b = load_bundle(bundle_dir);
      auto gb = load_gbmodel(gbmodel_path);
      auto aug = obtain_augment(b, &gb, aug_dir, bflags, gb.config.seed, m);

      struct Variant {
        const char *name;
        AblationFlags flags;
        bool plain;
      };
      const std::vector<Variant> variants{
          {"vanilla", {}, true},
          {"full", {}, false},
          {"no_lcc", {true, false, false}, false},
          {"no_augment", {false, true, false}, false},
          {"no_parallel", {false, false, true}, false},
      };
      detail::ensure_dir(out);
      auto runs_csv = detail::open_out(out / "ablate_runs.csv");
      runs_csv << "variant,seed,best_epoch,best_val_acc,test_acc\n";
      std::ostringstream summary;
      summary << "variant,runs,mean_test_acc\n";
      for (const auto &v : variants) {
        std::vector<double> accs;
        for (int s = 0; s < runs; ++s) {
          TrainConfig cfg = aflags.cfg;
          cfg.seed = seed + static_cast<std::uint64_t>(s);
          cfg.ablation = v.flags;
          auto r = v.plain ? train_backbone(b, cfg, aflags.spec)
                           : train(b, &gb, &*aug, cfg, aflags.spec);
          accs.push_back(r.test_acc);
          runs_csv << v.name << ',' << cfg.seed << ',' << r.best_epoch << ','
                   << fmt(r.best_val_acc) << ',' << fmt(r.test_acc) << '\n';
        }
        summary << v.name << ',' << runs << ',' << fmt(mean(accs)) << '\n';
      }
      detail::open_out(out / "ablate.csv") << summary.str();
      std::cout << summary.str();
      m.resolved() = to_json(aflags.cfg, aflags.spec);
      m.output(out / "ablate_runs.csv");
      m.output(out / "ablate.csv");
      m.write(out);
      return 0;
    }

    if (sweep->parsed()) {
      if (runs < 1)
        throw ConfigError("--runs must be >= 1");
      if (betas.empty() || gammas.empty())
        throw ConfigError("--betas and --gammas must be non-empty");
      swflags.resolve(seed);
      Manifest m(*sweep, seed);
      m.input("bundle", bundle_dir);
      m.input("gbmodel", gbmodel_path);
      auto b = load_bundle(bundle_dir);
      auto gb = load_gbmodel(gbmodel_path);
      auto aug = obtain_augment(b, &gb, aug_dir, bflags, gb.config.seed, m);

      auto run_cell = [&](double beta, double gamma, bool baseline) {
        std::vector<double> accs;
        for (int s = 0; s < runs; ++s) {
          TrainConfig cfg = swflags.cfg;
          cfg.beta = beta;
          cfg.gamma = gamma;
          cfg.seed = seed + static_cast<std::uint64_t>(s);
          cfg.ablation.no_lcc = baseline;
          accs.push_back(train(b, &gb, &*aug, cfg, swflags.spec).test_acc);
        }
        return mean(accs);
      };
      std::ostringstream csv;
      csv << "beta,gamma,mean_test_acc,runs,kind\n";
      // Baseline: both enhancement losses off and no pseudo labels drawn.
      csv << fmt(0.0) << ',' << fmt(0.0) << ',' << fmt(run_cell(0, 0, true))
          << ',' << runs << ",baseline\n";
      for (double beta : betas)
        for (double gamma : gammas)
          csv << fmt(beta) << ',' << fmt(gamma) << ','
              << fmt(run_cell(beta, gamma, false)) << ',' << runs << ",grid\n";
      detail::ensure_dir(out);
      detail::open_out(out / "sweep.csv") << csv.str();
      std::cout << csv.str();
      m.resolved() = to_json(swflags.cfg, swflags.spec);
      m.resolved()["betas"] = betas;
      m.resolved()["gammas"] = gammas;
      m.output(out / "sweep.csv");
      m.write(out);
      return 0;
    }

    if (noise->parsed()) {
      Manifest m(*noise, 0);
      m.input("bundle", bundle_dir);
      m.input("gbmodel", gbmodel_path);
      m.input("report", report_path);
      auto b = load_bundle(bundle_dir);
      auto gb = load_gbmodel(gbmodel_path);
      if (gb.num_nodes() != b.num_nodes())
        throw ConfigError("granular-ball model does not match the bundle");
      json rep;
      try {
        auto in = detail::open_in(report_path);
        rep = json::parse(in);
      } catch (const json::exception &e) {
        throw SchemaError("report: " + std::string(e.what()));
      }
      std::vector<ClassId> pred;
      try {
        pred = rep.at("prediction").get<std::vector<ClassId>>();
      } catch (const json::exception &e) {
        throw SchemaError("report: " + std::string(e.what()));
      }
      if (pred.size() != b.num_nodes())
        throw SchemaError("report prediction length does not match the bundle");

      // Evaluation universe: non-train nodes with a ground-truth label.
      const auto exclude = train_nodes(b);
      auto eligible = [&](NodeId i) {
        return !exclude.count(i) && b.labels[i] != kUnlabeled;
      };
      LabelSet p, p_gbc;
      p.universe = p_gbc.universe = b.num_nodes();
      for (NodeId i = 0; i < b.num_nodes(); ++i)
        if (eligible(i))
          p.entries.emplace(i, pred[i]);
      for (const auto &[i, l] : predict(gb).entries)
        if (eligible(i))
          p_gbc.entries.emplace(i, l);
      auto lr = lcc(p, p_gbc, exclude);
      const auto s_lcc = measure_noise(lr.retained, b.labels);
      const auto s_gbc = measure_noise(p_gbc, b.labels);
      const auto s_p = measure_noise(p, b.labels);
      auto acc = [](const NoiseStats &s) {
        return s.covered == 0 ? 0.0 : 1.0 - s.conditional_noise;
      };
      std::ostringstream csv;
      csv << "acc_lcc,acc_gbc,acc_p,noise_lcc,noise_gbc,noise_p,"
             "cond_noise_lcc,cond_noise_gbc,cond_noise_p,"
             "coverage_lcc,coverage_gbc,coverage_p,lcc_empty\n";
      print_csv_row(csv, {fmt(acc(s_lcc)), fmt(acc(s_gbc)), fmt(acc(s_p)),
                          fmt(s_lcc.coverage_noise), fmt(s_gbc.coverage_noise),
                          fmt(s_p.coverage_noise), fmt(s_lcc.conditional_noise),
                          fmt(s_gbc.conditional_noise),
                          fmt(s_p.conditional_noise), fmt(s_lcc.coverage),
                          fmt(s_gbc.coverage), fmt(s_p.coverage),
                          s_lcc.covered == 0 ? "1" : "0"});
      detail::ensure_dir(out);
      detail::open_out(out / "noise.csv") << csv.str();
      std::cout << csv.str();
      m.output(out / "noise.csv");
      m.write(out);
      return 0;
    }

    if (lcc_eval->parsed()) {
      Manifest m(*lcc_eval, seed);
      std::ostringstream csv;
      csv << "r1,r2,c,closed_form,mc_estimate,mc_stderr\n";
      std::uint64_t cell = 0;
      for (int c : cs)
        for (double r1 : r1s)
          for (double r2 : r2s) {
            NoiseParams p{r1, r2, c};
            validate(p);
            const auto closed = r3_closed_form(p);
            const auto mc = r3_monte_carlo(p, trials, seed + cell++);
            csv << fmt(r1) << ',' << fmt(r2) << ',' << c << ','
                << hexfloat(closed) << ',' << hexfloat(mc.estimate) << ','
                << hexfloat(mc.std_error) << '\n';
          }
      detail::ensure_dir(out);
      detail::open_out(out / "lcc_eval.csv") << csv.str();
      std::cout << csv.str();
      m.output(out / "lcc_eval.csv");
      m.write(out);
      return 0;
    }

    if (bench->parsed()) {
      bspec.seed = seed;
      validate(bspec);
      Manifest m(*bench, seed);
      auto r = run_bench(bspec);
      write_bench(r, out);
      for (const auto &[name, s] : r.methods)
        std::cout << name << " slope "
                  << (s.slope ? fmt(*s.slope) : std::string("n/a")) << '\n';
      m.output(out / "bench.csv");
      m.output(out / "slopes.json");
      m.write(out);
      return 0;
    }
  } catch (const Error &e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << '\n';
    return 4;
  }
  return 0;
}
