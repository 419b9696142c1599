// lsp: command-line front end for graphs, partitions, models, indexes and evaluation.

#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "lsp/baselines.hpp"
#include "lsp/core.hpp"
#include "lsp/eval.hpp"
#include "lsp/gp.hpp"
#include "lsp/index.hpp"
#include "lsp/knn.hpp"
#include "lsp/learn.hpp"
#include "lsp/spectral.hpp"

namespace {

using namespace lsp;

enum Exit : int { kOk = 0, kOther = 1, kUsage = 2, kMissing = 3, kFormatExit = 4 };

int exit_for(ErrorKind k) {
  switch (k) {
    case ErrorKind::kInvalidArgument: return kUsage;
    case ErrorKind::kMissingInput: return kMissing;
    case ErrorKind::kFormat: return kFormatExit;
    default: return kOther;
  }
}

const char* kind_tag(ErrorKind k) {
  switch (k) {
    case ErrorKind::kInvalidArgument: return "usage";
    case ErrorKind::kMissingInput: return "missing-input";
    case ErrorKind::kFormat: return "format";
    case ErrorKind::kInvariant: return "invariant";
    case ErrorKind::kRuntime: return "runtime";
  }
  return "error";
}

void report_error(const char* tag, std::string msg) {
  for (auto& c : msg) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  std::cerr << "error: " << tag << ": " << msg << "\n";
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

// Flags named on the command line win; remaining config keys are appended as
// --key=value so the parser validates them like any other flag.
std::vector<std::string> merge_config(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  std::string path;
  std::set<std::string> given;
  for (std::size_t i = 0; i < args.size(); ++i) {
    const auto& a = args[i];
    if (a.rfind("--", 0) != 0) continue;
    const auto eq = a.find('=');
    const auto name = a.substr(2, eq == std::string::npos ? std::string::npos : eq - 2);
    given.insert(name);
    if (name == "config") {
      if (eq != std::string::npos) path = a.substr(eq + 1);
      else if (i + 1 < args.size()) path = args[i + 1];
    }
  }
  if (path.empty()) return args;
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kMissingInput, "cannot open config file " + path);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      fail(ErrorKind::kFormat, path + ":" + std::to_string(lineno) + ": expected key=value");
    }
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    if (key.empty() || key == "config") {
      fail(ErrorKind::kFormat, path + ":" + std::to_string(lineno) + ": bad key");
    }
    if (!given.count(key)) args.push_back("--" + key + "=" + value);
  }
  return args;
}

void echo_config(const CLI::App& sub) {
  std::cerr << "# " << sub.get_name() << "\n";
  for (const auto* opt : sub.get_options()) {
    const auto name = opt->get_single_name();
    if (name == "help" || name == "help-all" || name == "config") continue;
    std::string value;
    if (opt->get_expected_min() == 0) {
      value = opt->count() > 0 ? "true" : "false";
    } else if (opt->count() > 0) {
      for (const auto& r : opt->results()) value += (value.empty() ? "" : ",") + r;
    } else {
      value = opt->get_default_str();
    }
    std::cerr << "#   " << name << "=" << value << "\n";
  }
}

struct DataArgs {
  std::string path;
  std::string format = "auto";
  bool normalize = false;

  PointSet load() const {
    PointFormat f;
    if (format == "auto") {
      f = std::filesystem::path(path).extension() == ".fvecs" ? PointFormat::kFvecs
                                                              : PointFormat::kRawF32;
    } else {
      f = parse_point_format(format);
    }
    auto ps = load_points(path, f);
    return normalize ? normalize_rows(ps) : ps;
  }
};

void add_data(CLI::App* sub, DataArgs& d, const std::string& flag = "--data",
              bool with_normalize = true) {
  sub->add_option(flag, d.path, "Point file (fvecs or PHV1 raw)")->required();
  if (flag == "--data") {
    sub->add_option("--format", d.format, "auto, fvecs or raw")->capture_default_str();
    if (with_normalize) {
      sub->add_flag("--normalize", d.normalize, "Scale rows to unit norm (cosine)");
    }
  }
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

std::uint32_t to_u32(const std::string& s, const char* what) {
  std::size_t used = 0;
  unsigned long v = 0;
  try {
    v = std::stoul(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size() || v > UINT32_MAX) {
    fail(ErrorKind::kInvalidArgument, std::string("bad ") + what + " '" + s + "'");
  }
  return std::uint32_t(v);
}

struct MlpFlags {
  std::optional<std::uint32_t> blocks, hidden, epochs, batch, decay_every;
  std::optional<double> dropout, lr, decay;

  void add(CLI::App* sub) {
    sub->add_option("--blocks", blocks, "Hidden blocks b (level default if unset)");
    sub->add_option("--hidden", hidden, "Hidden width s (level default if unset)");
    sub->add_option("--dropout", dropout, "Dropout rate");
    sub->add_option("--epochs", epochs, "Training epochs");
    sub->add_option("--lr", lr, "Initial learning rate");
    sub->add_option("--decay", decay, "Learning-rate factor per decay step");
    sub->add_option("--decay-every", decay_every, "Epochs between decay steps");
    sub->add_option("--batch-size", batch, "Minibatch size");
  }
  MlpConfig apply(MlpConfig c) const {
    if (blocks) c.blocks = *blocks;
    if (hidden) c.hidden = *hidden;
    if (dropout) c.dropout = *dropout;
    if (epochs) c.epochs = *epochs;
    if (lr) c.learning_rate = *lr;
    if (decay) c.decay = *decay;
    if (decay_every) c.decay_every = *decay_every;
    if (batch) c.batch_size = *batch;
    return c;
  }
};

struct Options {
  std::string config;
  std::uint64_t seed = 42;
  unsigned workers = default_workers();
  DataArgs data, queries;
  std::string out, graph_path, partition_path, index_path, gt_path;
  std::size_t k = 10;
  std::size_t partition_k = 0;
  std::string bins = "16";
  std::string eta = "0.05";
  std::size_t max_iters = kDefaultRefineIters;
  std::string model = "mlp";
  std::uint32_t soft_labels = 1;
  std::size_t kmeans_iters = kDefaultKMeansIters;
  std::string probes = "1";
  bool report = false;
  bool time = false;
  bool exclude_self = false;
  std::string method = "kmeans";
  std::uint32_t depth = 4;
  std::uint32_t bits = 4;
  std::uint32_t repetitions = 0;
  MlpFlags mlp;
};

void common(CLI::App* sub, Options& o) {
  sub->add_option("--config", o.config, "key=value file; flags given here take precedence");
  sub->add_option("--seed", o.seed, "Random seed")->capture_default_str();
  sub->add_option("--workers", o.workers, "Worker threads")->capture_default_str();
}

void print_cut(const KnnGraph& g, const Partition& p) {
  const auto cs = cut_stats(g, p);
  std::cerr << "cut_weight=" << cs.cut_weight << " cut_fraction=" << cs.cut_fraction_directed
            << " cap=" << p.cap();
  std::size_t lo = SIZE_MAX, hi = 0, empty = 0;
  for (auto s : cs.bin_sizes) {
    lo = std::min<std::size_t>(lo, s);
    hi = std::max<std::size_t>(hi, s);
    empty += s == 0;
  }
  std::cerr << " bin_min=" << lo << " bin_max=" << hi << "\n";
  if (empty) std::cerr << "warning: " << empty << " empty bins\n";
}

int run_build_graph(const Options& o) {
  const auto ps = o.data.load();
  const auto g = build_knn_graph(ps, o.k, o.workers);
  save_graph(o.out, g);
  std::cerr << "wrote " << o.out << " (n=" << g.size() << ", k=" << g.k() << ")\n";
  return kOk;
}

int run_ground_truth(const Options& o) {
  const auto ps = o.data.load();
  auto qs = o.queries.load();
  if (o.data.normalize) qs = normalize_rows(qs);
  const auto gt = brute_force_knn(ps, qs, o.k, o.exclude_self, o.workers);
  save_ivecs(o.out, gt);
  std::cerr << "wrote " << o.out << " (" << gt.queries() << " queries, k=" << gt.k << ")\n";
  return kOk;
}

int run_partition(const Options& o) {
  auto g = load_graph(o.graph_path);
  if (o.partition_k != 0) {
    require(o.partition_k <= g.k(), "graph has k=" + std::to_string(g.k()) +
                                        ", cannot use k=" + std::to_string(o.partition_k));
    g = g.truncated(o.partition_k);
  }
  PartitionOptions opt;
  opt.m = to_u32(o.bins, "bin count");
  opt.eta = Eta::parse(o.eta);
  opt.seed = o.seed;
  opt.max_refine_iters = o.max_iters;
  const auto part = partition_graph(g.undirected(), opt);
  print_cut(g, part);
  save_partition(o.out, part);
  return kOk;
}

int run_train(const Options& o) {
  const auto ps = o.data.load();
  const auto part = load_partition(o.partition_path);
  require(part.labels.size() == ps.size(), "partition covers " +
                                               std::to_string(part.labels.size()) +
                                               " points but the data has " +
                                               std::to_string(ps.size()));
  SoftLabelSet labels = SoftLabelSet::one_hot(part);
  if (o.soft_labels > 1) {
    require(!o.graph_path.empty(), "soft labels need --graph");
    const auto g = load_graph(o.graph_path);
    require(g.size() == ps.size(), "graph does not match the data");
    labels = make_soft_labels(g, part, o.soft_labels);
  }
  const auto kind = parse_classifier_kind(o.model);
  MlpConfig cfg = kind == ClassifierKind::kMlp ? MlpConfig::top_level() : MlpConfig{};
  if (kind == ClassifierKind::kSoftmaxRegression) cfg.blocks = 0;
  cfg = o.mlp.apply(cfg);
  cfg.seed = o.seed;
  TrainReport rep;
  const auto model = train(ps, labels, kind, cfg, &rep);
  for (std::size_t e = 0; e < rep.epoch_loss.size(); ++e) {
    std::cerr << "epoch " << e + 1 << " loss=" << rep.epoch_loss[e] << "\n";
  }
  save_classifier(o.out, model);
  return kOk;
}

IndexConfig index_config(const Options& o) {
  IndexConfig cfg;
  cfg.k = o.k;
  cfg.eta = Eta::parse(o.eta);
  cfg.seed = o.seed;
  cfg.soft_labels = o.soft_labels;
  cfg.max_refine_iters = o.max_iters;
  cfg.kmeans_iters = o.kmeans_iters;
  cfg.workers = o.workers;
  const auto bins = split_list(o.bins);
  auto models = split_list(o.model);
  if (models.size() == 1) models.resize(bins.size(), models.front());
  if (models.size() != bins.size()) {
    fail(ErrorKind::kInvalidArgument, "--model lists " + std::to_string(models.size()) +
                                          " entries for " + std::to_string(bins.size()) +
                                          " levels");
  }
  cfg.levels.clear();
  for (std::size_t i = 0; i < bins.size(); ++i) {
    cfg.levels.push_back({to_u32(bins[i], "bin count"), parse_level_model(models[i])});
    MlpConfig m = i == 0 ? MlpConfig::top_level() : MlpConfig::second_level();
    if (cfg.levels.back().model == LevelModel::kRegression) m.blocks = 0;
    cfg.mlp.push_back(o.mlp.apply(m));
  }
  return cfg;
}

int run_build_index(const Options& o) {
  const auto ps = o.data.load();
  const auto cfg = index_config(o);
  IndexFile f;
  f.method = "neural-lsh";
  f.router = build_index(ps, cfg);
  const auto& t = std::get<PartitionTree>(f.router);
  for (const auto& w : t.warnings) std::cerr << "warning: " << w << "\n";
  std::cerr << "leaves=" << t.leaf_count() << "\n";
  save_index(o.out, f);
  return kOk;
}

int run_query(const Options& o) {
  const auto f = load_index(o.index_path);
  const auto* t = std::get_if<PartitionTree>(&f.router);
  require(t != nullptr, "query needs an index built by build-index");
  const auto ps = o.data.load();
  auto qs = o.queries.load();
  if (o.data.normalize) qs = normalize_rows(qs);
  const auto probes = ProbeSetting::parse(o.probes);
  std::cout << "query,rank,index,distance\n";
  for (std::size_t q = 0; q < qs.size(); ++q) {
    const auto ans = answer_knn(*t, ps, qs.row(q), o.k, probes.per_level);
    if (ans.short_result) {
      std::cerr << "warning: query " << q << " has only " << ans.ids.size() << " candidates\n";
    }
    for (std::size_t r = 0; r < ans.ids.size(); ++r) {
      std::cout << q << ',' << r << ',' << ans.ids[r] << ','
                << std::sqrt(distance_sq(qs.row(q), ps.row(ans.ids[r]))) << '\n';
    }
  }
  return kOk;
}

int run_eval(const Options& o) {
  const auto f = load_index(o.index_path);
  const auto router = make_router(f);
  auto qs = o.queries.load();
  if (o.queries.normalize) qs = normalize_rows(qs);
  const auto gt = load_ivecs(o.gt_path);
  SweepOptions opt;
  opt.k = o.k;
  opt.workers = o.workers;
  opt.measure_time = o.time;
  auto records = sweep(*router, qs, gt, parse_probe_list(o.probes), opt);
  if (o.report) records = report_view(records);
  write_csv(std::cout, records);
  return kOk;
}

int run_baseline(const Options& o) {
  const auto ps = o.data.load();
  IndexFile f;
  f.method = o.method;
  if (o.method == "kmeans") {
    f.router = kmeans_fit(ps, to_u32(o.bins, "bin count"), o.seed, o.kmeans_iters);
  } else if (o.method == "lsh") {
    f.router = fit_lsh(ps, o.bits, o.seed);
  } else {
    SplitRule rule;
    if (o.method == "pca-tree") rule = SplitRule::kPca;
    else if (o.method == "rp-tree") rule = SplitRule::kRandomProjection;
    else if (o.method == "2means-tree") rule = SplitRule::kTwoMeans;
    else if (o.method == "reg-tree") rule = SplitRule::kRegression;
    else fail(ErrorKind::kInvalidArgument, "unknown baseline method '" + o.method + "'");
    const std::uint32_t reps =
        o.repetitions != 0 ? o.repetitions : (rule == SplitRule::kRandomProjection ? 30 : 1);
    RegressionSplitConfig reg;
    reg.k = o.k;
    reg.eta = Eta::parse(o.eta);
    reg.max_refine_iters = o.max_iters;
    std::vector<HyperplaneTree> trees;
    for (std::uint32_t r = 0; r < reps; ++r) {
      trees.push_back(build_hyperplane_tree(ps, o.depth, rule, o.seed + r, reg));
    }
    f.router = std::move(trees);
  }
  save_index(o.out, f);
  return kOk;
}

int run_spectral(const Options& o) {
  const auto ps = o.data.load();
  const auto g = o.graph_path.empty() ? build_knn_graph(ps, o.k, o.workers)
                                      : load_graph(o.graph_path);
  const auto res = verify_theorem(ps, g);
  char buf[256];
  std::snprintf(buf, sizeof buf, "%zu,%.9g,%.9g,%.9g,%zu,%zu", res.coordinate,
                res.hyperplane_offset(), res.lhs, res.bound, res.part1.size(),
                res.part2.size());
  std::cout << buf << "\n";
  return kOk;
}

int run(int argc, char** argv) {
  Options o;
  CLI::App app{"Learned space partitions for nearest-neighbor search"};
  app.require_subcommand(1, 1);
  app.set_help_all_flag("--help-all");

  auto* bg = app.add_subcommand("build-graph", "Exact k-NN graph (PHG1)");
  add_data(bg, o.data);
  bg->add_option("--k", o.k, "Neighbors per point")->capture_default_str();
  bg->add_option("--out", o.out, "Output graph")->required();
  common(bg, o);

  auto* gtc = app.add_subcommand("ground-truth", "Brute-force neighbors of a query set (ivecs)");
  add_data(gtc, o.data);
  gtc->add_option("--queries", o.queries.path, "Query file")->required();
  gtc->add_option("--k", o.k, "Neighbors per query")->capture_default_str();
  gtc->add_flag("--exclude-self", o.exclude_self, "Queries are the dataset; skip self matches");
  gtc->add_option("--out", o.out, "Output ivecs")->required();
  common(gtc, o);

  auto* pt = app.add_subcommand("partition", "Balanced partition of a k-NN graph (PHP1)");
  pt->add_option("--graph", o.graph_path, "Input graph")->required();
  pt->add_option("--k", o.partition_k, "Use the first k neighbors (0 = all)")
      ->capture_default_str();
  pt->add_option("--bins", o.bins, "Number of bins m")->capture_default_str();
  pt->add_option("--eta", o.eta, "Balance slack, decimal or fraction")->capture_default_str();
  pt->add_option("--max-iters", o.max_iters, "Local search cap per level")->capture_default_str();
  pt->add_option("--out", o.out, "Output partition")->required();
  common(pt, o);

  auto* tr = app.add_subcommand("train", "Fit a classifier to a partition (PHM1)");
  add_data(tr, o.data);
  tr->add_option("--partition", o.partition_path, "Input partition")->required();
  tr->add_option("--graph", o.graph_path, "Graph for soft labels");
  tr->add_option("--model", o.model, "mlp or regression")->capture_default_str();
  tr->add_option("--soft-labels", o.soft_labels, "Soft-label size S")->capture_default_str();
  o.mlp.add(tr);
  tr->add_option("--out", o.out, "Output model")->required();
  common(tr, o);

  auto* bi = app.add_subcommand("build-index", "Hierarchical learned index (PHI1)");
  add_data(bi, o.data);
  bi->add_option("--k", o.k, "k-NN graph degree")->capture_default_str();
  bi->add_option("--bins", o.bins, "Bins per level, e.g. 16,16")->capture_default_str();
  bi->add_option("--model", o.model, "Per level: mlp, regression or kmeans")
      ->capture_default_str();
  bi->add_option("--eta", o.eta, "Balance slack")->capture_default_str();
  bi->add_option("--soft-labels", o.soft_labels, "Soft-label size S")->capture_default_str();
  bi->add_option("--max-iters", o.max_iters, "Local search cap per level")->capture_default_str();
  bi->add_option("--kmeans-iters", o.kmeans_iters, "Lloyd iterations")->capture_default_str();
  o.mlp.add(bi);
  bi->add_option("--out", o.out, "Output index")->required();
  common(bi, o);

  auto* qu = app.add_subcommand("query", "k nearest neighbors through the index (CSV)");
  qu->add_option("--index", o.index_path, "Index file")->required();
  add_data(qu, o.data);
  qu->add_option("--queries", o.queries.path, "Query file")->required();
  qu->add_option("--k", o.k, "Neighbors to return")->capture_default_str();
  qu->add_option("--probes", o.probes, "Probes per level, e.g. 2x2")->capture_default_str();
  common(qu, o);

  auto* ev = app.add_subcommand("eval", "Accuracy versus candidates sweep (CSV)");
  ev->add_option("--index", o.index_path, "Index file")->required();
  ev->add_option("--queries", o.queries.path, "Query file")->required();
  ev->add_flag("--normalize", o.queries.normalize, "Scale queries to unit norm");
  ev->add_option("--gt", o.gt_path, "Ground truth ivecs")->required();
  ev->add_option("--k", o.k, "Accuracy at k")->capture_default_str();
  ev->add_option("--probes", o.probes, "Settings, e.g. 1,2,4,8 or 1x1,2x2")
      ->capture_default_str();
  ev->add_flag("--report", o.report, "Keep rows with accuracy >= 0.75");
  ev->add_flag("--time", o.time, "Measure wall-clock per query");
  common(ev, o);

  auto* bl = app.add_subcommand("baseline", "Build a comparison index (PHI1)");
  bl->add_option("--method", o.method, "kmeans, pca-tree, rp-tree, 2means-tree, reg-tree, lsh")
      ->capture_default_str();
  add_data(bl, o.data);
  bl->add_option("--bins", o.bins, "k-means clusters")->capture_default_str();
  bl->add_option("--kmeans-iters", o.kmeans_iters, "Lloyd iterations")->capture_default_str();
  bl->add_option("--depth", o.depth, "Tree depth")->capture_default_str();
  bl->add_option("--repetitions", o.repetitions, "Independent trees (0: 30 for rp-tree, else 1)")->capture_default_str();
  bl->add_option("--bits", o.bits, "LSH bits")->capture_default_str();
  bl->add_option("--k", o.k, "reg-tree graph degree")->capture_default_str();
  bl->add_option("--eta", o.eta, "reg-tree balance slack")->capture_default_str();
  bl->add_option("--max-iters", o.max_iters, "reg-tree local search cap")->capture_default_str();
  bl->add_option("--out", o.out, "Output index")->required();
  common(bl, o);

  auto* sc = app.add_subcommand("spectral-check", "Certified axis-aligned sparse cut (CSV row)");
  add_data(sc, o.data);
  sc->add_option("--k", o.k, "k-NN graph degree")->capture_default_str();
  sc->add_option("--graph", o.graph_path, "Precomputed graph");
  common(sc, o);

  std::vector<std::string> args;
  try {
    args = merge_config(argc, argv);
  } catch (const Error& e) {
    report_error(kind_tag(e.kind()), e.what());
    return exit_for(e.kind());
  }
  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    report_error("usage", e.what());
    return kUsage;
  }

  CLI::App* sub = app.get_subcommands().front();
  echo_config(*sub);
  const std::string name = sub->get_name();
  try {
    if (o.workers == 0) fail(ErrorKind::kInvalidArgument, "--workers must be positive");
    if (name == "build-graph") return run_build_graph(o);
    if (name == "ground-truth") return run_ground_truth(o);
    if (name == "partition") return run_partition(o);
    if (name == "train") return run_train(o);
    if (name == "build-index") return run_build_index(o);
    if (name == "query") return run_query(o);
    if (name == "eval") return run_eval(o);
    if (name == "baseline") return run_baseline(o);
    if (name == "spectral-check") return run_spectral(o);
  } catch (const Error& e) {
    report_error(kind_tag(e.kind()), e.what());
    return exit_for(e.kind());
  } catch (const std::exception& e) {
    report_error("runtime", e.what());
    return kOther;
  }
  return kOther;
}

}  // namespace

int main(int argc, char** argv) { return run(argc, argv); }
