#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "waml/config.hpp"
#include "waml/gradcheck.hpp"
#include "waml/pipeline.hpp"

namespace fs = std::filesystem;
using namespace waml;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitData = 2;
constexpr int kExitNumerical = 3;

struct ConfigArgs {
  std::string config_file;
  std::vector<std::string> sets;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_file, "flat key = value config file");
    cmd->add_option("--set", sets, "override a single config key, e.g. --set train.seed=7")
        ->take_all();
  }

  RunConfig build() const {
    RunConfig cfg;
    if (!config_file.empty()) cfg.load_file(config_file);
    for (const std::string& kv : sets) {
      size_t eq = kv.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
      cfg.apply_line(kv, "--set");
    }
    return cfg;
  }
};

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot open '" + path + "' for writing");
  os << text;
}

ContentTable load_content(const RunConfig& cfg, const std::string& content_path,
                          const std::string& texts_path) {
  switch (cfg.features.content_source) {
    case ContentSource::PrecomputedFile:
      if (content_path.empty()) {
        throw ConfigError("features.content_source=file requires --content");
      }
      return ContentTable::load(content_path);
    case ContentSource::TextStub: {
      if (texts_path.empty()) {
        throw ConfigError("features.content_source=stub requires --texts");
      }
      return ContentTable::from_texts(load_text_file(texts_path), cfg.features.dim,
                                      cfg.features.hash_seed);
    }
    case ContentSource::Zeros: return ContentTable(cfg.features.dim);
  }
  throw ConfigError("bad content source");
}

std::vector<IndexPair> load_truth_pairs(const std::string& path, const HeteroGraph& g) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open truth file '" + path + "'");
  std::vector<IndexPair> out;
  std::string line;
  size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    size_t tab = line.find('\t');
    if (tab == std::string::npos) {
      throw DataError(path + ":" + std::to_string(lineno) + ": expected seller<TAB>product");
    }
    auto s = g.find(NodeType::Seller, line.substr(0, tab));
    auto p = g.find(NodeType::Product, line.substr(tab + 1));
    if (!s || !p) {
      throw DataError(path + ":" + std::to_string(lineno) + ": pair names a node missing from the graph");
    }
    out.push_back({static_cast<uint32_t>(*s), static_cast<uint32_t>(*p)});
  }
  return out;
}

int cmd_gen_synth(const ConfigArgs& args, const std::string& out_dir) {
  RunConfig cfg = args.build();
  cfg.synth.dim = cfg.features.dim;
  SynthDataset data = generate_synthetic(cfg.synth);
  save_dataset(out_dir, data, cfg.echo());
  std::cout << "wrote dataset to " << out_dir << " (" << data.nodes.size() << " nodes, "
            << data.edges.size() << " edges, " << data.candidates.size() << " candidates, "
            << data.truth.size() << " truth pairs)\n";
  return kExitOk;
}

int cmd_reduce(const ConfigArgs& args, const std::string& edges_path, const std::string& nodes_path,
               const std::string& candidates_path, int64_t threshold, const std::string& out_path,
               const std::string& report_path) {
  RunConfig cfg = args.build();
  if (threshold > 0) cfg.reduce.cooccurrence_threshold = threshold;
  cfg.reduce.candidate_set = load_candidate_file(candidates_path);

  auto nodes = load_node_file(nodes_path);
  auto edges = load_edge_file(edges_path);
  auto [graph, report] = reduce_pipeline(nodes, edges, cfg.reduce);

  graph.save(out_path, cfg.echo());
  if (!report_path.empty()) report.save(report_path, cfg.echo());
  std::cout << "reduced to " << graph.node_count() << " nodes / " << graph.undirected_edge_count()
            << " edges (training products: " << report.counts.at("training_products") << ")\n";
  return kExitOk;
}

int cmd_train(const ConfigArgs& args, const std::string& graph_path, const std::string& content_path,
              const std::string& texts_path, const std::string& out_path, const std::string& log_path) {
  RunConfig cfg = args.build();
  cfg.validate();
  HeteroGraph g = HeteroGraph::load(graph_path);
  ContentTable content = load_content(cfg, content_path, texts_path);
  Tensor<float> h0 = init_h0<float>(g, cfg.features, content);

  EdgeSplit split =
      split_edges(g.edge_set(EdgeType::SellerProduct), cfg.train.split_ratios, cfg.train.seed);
  ModelParams<float> params = init_model<float>(cfg.features.dim, cfg.waml, cfg.head, cfg.train.seed);
  TrainResult<float> result = train(g, h0, params, cfg.waml, cfg.head, cfg.train, split, cfg.eval);

  save_checkpoint(out_path, result.best_params, cfg.echo());
  if (!log_path.empty()) write_text_file(log_path, result.log_text());

  EmbeddingTable table = encode_all(g, h0, result.best_params, cfg.waml, cfg.head);
  double test_recall = split.test.empty()
                           ? 0.0
                           : evaluate_retrieval(g, table, split.test, cfg.eval, split.train).recall;
  std::cout << "trained " << result.log.size() << " epochs; best validation recall@"
            << cfg.train.val_k << " = " << result.best_val_recall << " (epoch "
            << result.best_epoch << "); test recall@" << cfg.eval.k << " = " << test_recall << "\n";
  return kExitOk;
}

// Rebuilds model/features from the checkpoint's embedded config echo; the
// command-line config only adjusts evaluation settings.
RunConfig checkpoint_config(const std::string& checkpoint_path, const ConfigArgs& args,
                            int64_t k_override) {
  RunConfig cfg = RunConfig::from_echo(checkpoint_config_echo(checkpoint_path));
  RunConfig cli = args.build();
  cfg.eval = cli.eval;
  if (k_override > 0) cfg.eval.k = k_override;
  return cfg;
}

int cmd_evaluate(const ConfigArgs& args, const std::string& graph_path,
                 const std::string& checkpoint_path, const std::string& content_path,
                 const std::string& texts_path, const std::string& truth_path,
                 const std::string& report_path, int64_t k_override) {
  RunConfig cfg = checkpoint_config(checkpoint_path, args, k_override);
  HeteroGraph g = HeteroGraph::load(graph_path);
  ContentTable content = load_content(cfg, content_path, texts_path);
  Tensor<float> h0 = init_h0<float>(g, cfg.features, content);
  ModelParams<float> params = init_model<float>(cfg.features.dim, cfg.waml, cfg.head, cfg.train.seed);
  load_checkpoint_into(checkpoint_path, params);

  EdgeSplit split =
      split_edges(g.edge_set(EdgeType::SellerProduct), cfg.train.split_ratios, cfg.train.seed);
  std::vector<IndexPair> held_out =
      truth_path.empty() ? split.test : load_truth_pairs(truth_path, g);
  // With an external truth file every graph edge counts as seen.
  const std::vector<IndexPair>& seen =
      truth_path.empty() ? split.train : g.edge_set(EdgeType::SellerProduct);

  EmbeddingTable table = encode_all(g, h0, params, cfg.waml, cfg.head);
  EvalReport report = evaluate_retrieval(g, table, held_out, cfg.eval, seen);
  report.save(report_path, cfg.echo());
  std::cout << "recall@" << report.k << " = " << report.recall << " over "
            << report.sellers_evaluated << " sellers\n";
  return kExitOk;
}

int cmd_embed(const ConfigArgs& args, const std::string& graph_path,
              const std::string& checkpoint_path, const std::string& content_path,
              const std::string& texts_path, const std::string& out_path) {
  RunConfig cfg = checkpoint_config(checkpoint_path, args, 0);
  HeteroGraph g = HeteroGraph::load(graph_path);
  ContentTable content = load_content(cfg, content_path, texts_path);
  Tensor<float> h0 = init_h0<float>(g, cfg.features, content);
  ModelParams<float> params = init_model<float>(cfg.features.dim, cfg.waml, cfg.head, cfg.train.seed);
  load_checkpoint_into(checkpoint_path, params);
  export_embeddings(out_path, g, encode_all(g, h0, params, cfg.waml, cfg.head));
  std::cout << "wrote " << g.node_count() << " embeddings to " << out_path << "\n";
  return kExitOk;
}

int cmd_grad_check() {
  GradCheckReport fixed = composite_gradient_check(false);
  std::cout << "composite (fixed alpha):     max rel err " << fixed.max_rel_err << " over "
            << fixed.entries_checked << " entries (worst: " << fixed.worst_param << ")\n";
  GradCheckReport trainable = composite_gradient_check(true);
  std::cout << "composite (trainable alpha): max rel err " << trainable.max_rel_err << " over "
            << trainable.entries_checked << " entries (worst: " << trainable.worst_param << ")\n";
  if (!fixed.passed() || !trainable.passed()) {
    throw NumericalError("gradient check failed (tolerance 1e-4)");
  }
  std::cout << "gradient check passed\n";
  return kExitOk;
}

int cmd_ablate(const ConfigArgs& args, const std::string& out_path, int64_t seeds) {
  RunConfig base = args.build();
  base.synth.dim = base.features.dim;
  auto ladder = ablation_ladder();

  std::ostringstream table;
  table << "# row\tseed\trecall_truth\trecall_test\toracle\tepochs\n";
  std::map<std::string, double> mean_truth;
  for (int64_t s = 0; s < seeds; ++s) {
    RunConfig cfg = base;
    cfg.synth.seed = base.synth.seed + static_cast<uint64_t>(s);
    cfg.train.seed = base.train.seed + static_cast<uint64_t>(s);
    SynthDataset data = generate_synthetic(cfg.synth);
    for (const AblationRow& row : ladder) {
      row.apply(cfg);
      ExperimentResult r = run_synthetic_experiment(data, cfg);
      table << row.name << '\t' << cfg.synth.seed << '\t' << r.truth_recall << '\t'
            << r.test_recall << '\t' << r.oracle << '\t' << r.epochs_run << '\n';
      mean_truth[row.name] += r.truth_recall / static_cast<double>(seeds);
      std::cout << "[seed " << cfg.synth.seed << "] " << row.name << ": recall@"
                << cfg.eval.k << " = " << r.truth_recall << "\n";
    }
  }
  table << "#\n# mean over " << seeds << " seed(s):\n";
  for (const AblationRow& row : ladder) {
    table << "# " << row.name << "\t" << mean_truth[row.name] << "\n";
  }
  write_text_file(out_path, table.str());
  std::cout << "wrote ablation table to " << out_path << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"WAML: reduced product graph + weighted message averaging recommender"};
  app.require_subcommand(1);

  ConfigArgs gen_args, red_args, train_args, eval_args, embed_args, ablate_args;

  auto* gen = app.add_subcommand("gen-synth", "generate a synthetic benchmark dataset");
  std::string gen_out = "data";
  gen->add_option("--out-dir", gen_out, "output directory");
  gen_args.attach(gen);

  auto* red = app.add_subcommand("reduce", "reduce raw node/edge lists to the training graph");
  std::string red_edges, red_nodes, red_cands, red_out, red_report;
  int64_t red_threshold = 0;
  red->add_option("--edges", red_edges, "edge list file")->required();
  red->add_option("--nodes", red_nodes, "node list file")->required();
  red->add_option("--candidates", red_cands, "candidate product file")->required();
  red->add_option("--threshold", red_threshold, "co-occurrence threshold");
  red->add_option("--out", red_out, "output graph snapshot")->required();
  red->add_option("--report", red_report, "reduction report (json)");
  red_args.attach(red);

  auto* tr = app.add_subcommand("train", "train embeddings on a graph snapshot");
  std::string tr_graph, tr_content, tr_texts, tr_out, tr_log;
  tr->add_option("--graph", tr_graph, "graph snapshot")->required();
  tr->add_option("--content", tr_content, "precomputed content vectors (WAMLEMB1)");
  tr->add_option("--texts", tr_texts, "product text file for the hashing stub");
  tr->add_option("--out", tr_out, "output checkpoint")->required();
  tr->add_option("--log", tr_log, "per-epoch training log");
  train_args.attach(tr);

  auto* ev = app.add_subcommand("evaluate", "recall@k retrieval evaluation");
  std::string ev_graph, ev_ckpt, ev_content, ev_texts, ev_truth, ev_report;
  int64_t ev_k = 0;
  ev->add_option("--graph", ev_graph, "graph snapshot")->required();
  ev->add_option("--checkpoint", ev_ckpt, "trained checkpoint")->required();
  ev->add_option("--content", ev_content, "precomputed content vectors");
  ev->add_option("--texts", ev_texts, "product text file for the hashing stub");
  ev->add_option("--truth", ev_truth, "relevance pairs (seller<TAB>product); default: test split");
  ev->add_option("--report", ev_report, "output report")->required();
  ev->add_option("--k", ev_k, "override eval.k");
  eval_args.attach(ev);

  auto* em = app.add_subcommand("embed", "export final embeddings (WAMLEMB1)");
  std::string em_graph, em_ckpt, em_content, em_texts, em_out;
  em->add_option("--graph", em_graph, "graph snapshot")->required();
  em->add_option("--checkpoint", em_ckpt, "trained checkpoint")->required();
  em->add_option("--content", em_content, "precomputed content vectors");
  em->add_option("--texts", em_texts, "product text file for the hashing stub");
  em->add_option("--out", em_out, "output embedding file")->required();
  embed_args.attach(em);

  auto* gc = app.add_subcommand("grad-check", "finite-difference check of the full composite");

  auto* ab = app.add_subcommand("ablate", "run the ablation ladder on synthetic data");
  std::string ab_out = "ablation.tsv";
  int64_t ab_seeds = 1;
  ab->add_option("--out", ab_out, "output table");
  ab->add_option("--seeds", ab_seeds, "number of seeds")->check(CLI::PositiveNumber);
  ablate_args.attach(ab);

  try {
    app.parse(argc, argv);
    if (gen->parsed()) return cmd_gen_synth(gen_args, gen_out);
    if (red->parsed()) {
      return cmd_reduce(red_args, red_edges, red_nodes, red_cands, red_threshold, red_out, red_report);
    }
    if (tr->parsed()) return cmd_train(train_args, tr_graph, tr_content, tr_texts, tr_out, tr_log);
    if (ev->parsed()) {
      return cmd_evaluate(eval_args, ev_graph, ev_ckpt, ev_content, ev_texts, ev_truth, ev_report, ev_k);
    }
    if (em->parsed()) return cmd_embed(embed_args, em_graph, em_ckpt, em_content, em_texts, em_out);
    if (gc->parsed()) return cmd_grad_check();
    if (ab->parsed()) return cmd_ablate(ablate_args, ab_out, ab_seeds);
    return kExitConfig;
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  }
}
