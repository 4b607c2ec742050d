// geeer: command-line pipeline for graph-embedding entity reranking.
//
//   vocab    corpus -> vocabulary (+ missing-entity report)
//   train    corpus + vocabulary -> embeddings (+ per-epoch stats)
//   rerank   run + annotations + embeddings -> reranked run
//   tune     cross-validated lambda tuning -> lambda report + cross-validated run
//   eval     run + qrels -> NDCG report
//   compare  two runs + qrels -> mean NDCG, paired t-test
//   analyze  embeddings + qrels -> coherence, DB/Silhouette, projection export
//   gains    two runs + qrels -> per-query NDCG deltas
//
// Exit codes: 0 success, 1 runtime/IO failure, 2 usage/validation failure.

#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "geeer/geeer.hpp"

namespace {

using namespace geeer;

void emit(const std::string& path, const std::string& content) {
  if (path.empty() || path == "-")
    std::cout << content;
  else
    text::write_file_atomic(path, content);
}

std::vector<std::size_t> parse_cutoffs(const std::string& s) {
  std::vector<std::size_t> out;
  for (auto part : text::split(s, ',')) {
    std::size_t k = 0;
    if (!text::parse_int(part, k) || k < 1) throw ValidationError("bad cutoff '" + std::string(part) + "'");
    out.push_back(k);
  }
  if (out.empty()) throw ValidationError("no cutoffs given");
  return out;
}

Gain parse_gain(const std::string& s) {
  if (s == "linear") return Gain::linear;
  if (s == "exponential") return Gain::exponential;
  throw ValidationError("gain must be 'linear' or 'exponential'");
}

struct VocabArgs {
  std::string corpus, out, assessed, report;
  std::uint64_t min_word_count = 0, min_entity_count = 0;
  bool disambiguation = true;
};

int run_vocab(const VocabArgs& a) {
  const auto corpus = parse_corpus(std::filesystem::path(a.corpus));
  VocabConfig cfg;
  cfg.min_word_count = a.min_word_count;
  cfg.min_entity_count = a.min_entity_count;
  cfg.include_disambiguation = a.disambiguation;
  cfg.disambiguation_ids = corpus.disambiguation_ids;
  const auto vocab = build_vocabulary(corpus, cfg);
  save_vocabulary(vocab, a.out);
  std::cerr << "vocabulary: " << vocab.word_count() << " words, " << vocab.entity_count() << " entities\n";
  if (!a.assessed.empty()) {
    const auto qrels = parse_qrels(std::filesystem::path(a.assessed));
    const auto report = coverage_report(vocab, qrels.assessed_entities(), corpus);
    emit(a.report, render_report(report));
  }
  return 0;
}

struct TrainArgs {
  std::string corpus, vocab, out, stats;
  std::string neighborhood = "symmetric";
  TrainingConfig cfg;
};

int run_train(TrainArgs& a) {
  if (a.neighborhood == "incoming")
    a.cfg.neighborhood = Neighborhood::incoming;
  else if (a.neighborhood != "symmetric")
    throw ValidationError("--neighborhood must be 'symmetric' or 'incoming'");
  a.cfg.validate();
  const auto corpus = parse_corpus(std::filesystem::path(a.corpus));
  const auto vocab = load_vocabulary(std::filesystem::path(a.vocab));
  for (const auto& e : vocab.entities())
    if (!corpus.has_entity(e.key)) throw ValidationError("vocabulary entity " + e.key + " does not occur in the corpus");
  auto [model, stats] = train<float>(corpus, vocab, a.cfg);
  save_embeddings(model, vocab, a.out);
  if (!a.stats.empty()) emit(a.stats, render_stats(stats));
  const auto& last = stats.epochs.back();
  std::cerr << "trained " << a.cfg.epochs << " epochs; final probe loss " << last.loss_total << " (word "
            << last.loss_w << ", link " << last.loss_e << ", anchor " << last.loss_a << ")\n";
  return 0;
}

EmbeddingStore load_store(const std::string& embeddings, const std::string& corpus_for_aliases) {
  auto store = load_embeddings(std::filesystem::path(embeddings));
  if (!corpus_for_aliases.empty()) store.set_aliases(parse_corpus(std::filesystem::path(corpus_for_aliases)).alias_map);
  return store;
}

struct RerankArgs {
  std::string run, annotations, embeddings, out, aliases;
  RerankConfig cfg;
};

int run_rerank(const RerankArgs& a) {
  a.cfg.validate();
  const auto run = parse_run(std::filesystem::path(a.run));
  const auto ann = parse_annotations(std::filesystem::path(a.annotations));
  const auto store = load_store(a.embeddings, a.aliases);
  emit(a.out, render_run(rerank_run(run, ann, store, a.cfg)));
  return 0;
}

struct TuneArgs {
  std::string run, annotations, embeddings, qrels, folds, out_run, report, aliases;
  std::size_t num_folds = 5;
  std::uint64_t fold_seed = 1;
  TuneConfig cfg;
};

int run_tune(const TuneArgs& a) {
  const auto run = parse_run(std::filesystem::path(a.run));
  const auto ann = parse_annotations(std::filesystem::path(a.annotations));
  const auto qrels = parse_qrels(std::filesystem::path(a.qrels));
  const auto store = load_store(a.embeddings, a.aliases);
  const auto folds = a.folds.empty() ? make_folds(qrels.query_ids(), a.num_folds, a.fold_seed)
                                     : parse_folds(std::filesystem::path(a.folds));
  const auto result = tune_lambda(run, ann, qrels, store, folds, a.cfg);
  emit(a.report, render_tune_report(result));
  if (!a.out_run.empty()) save_run(result.cross_validated_run, a.out_run);
  const auto base = evaluate_run(run, qrels, {a.cfg.cutoff}, a.cfg.gain);
  const auto cv = evaluate_run(result.cross_validated_run, qrels, {a.cfg.cutoff}, a.cfg.gain);
  std::cerr << "ndcg_cut_" << a.cfg.cutoff << ": baseline " << text::format_f(base.mean[0], 6) << ", cross-validated "
            << text::format_f(cv.mean[0], 6) << '\n';
  return 0;
}

struct EvalArgs {
  std::string run, run_b, qrels, out, cutoffs = "10,100", gain = "linear";
  double alpha = 0.05;
};

int run_eval(const EvalArgs& a) {
  const auto run = parse_run(std::filesystem::path(a.run));
  const auto qrels = parse_qrels(std::filesystem::path(a.qrels));
  emit(a.out, render_evaluation(evaluate_run(run, qrels, parse_cutoffs(a.cutoffs), parse_gain(a.gain))));
  return 0;
}

int run_compare(const EvalArgs& a) {
  const auto ra = parse_run(std::filesystem::path(a.run));
  const auto rb = parse_run(std::filesystem::path(a.run_b));
  const auto qrels = parse_qrels(std::filesystem::path(a.qrels));
  const auto cutoffs = parse_cutoffs(a.cutoffs);
  const auto gain = parse_gain(a.gain);
  const auto ea = evaluate_run(ra, qrels, cutoffs, gain);
  const auto eb = evaluate_run(rb, qrels, cutoffs, gain);
  std::string out = "measure\tmean_a\tmean_b\tt\tp\tsignificant\n";
  for (std::size_t c = 0; c < cutoffs.size(); ++c) {
    const auto t = paired_t_test(eb.scores_at(c), ea.scores_at(c));
    out += "ndcg_cut_" + std::to_string(cutoffs[c]) + '\t' + text::format_f(ea.mean[c], 6) + '\t' +
           text::format_f(eb.mean[c], 6) + '\t' + text::format_g(t.t, 6) + '\t' + text::format_g(t.p, 6) + '\t' +
           (t.p < a.alpha ? "*" : "-") + '\n';
  }
  emit(a.out, out);
  return 0;
}

struct AnalyzeArgs {
  std::string embeddings, qrels, coherence_out, summary_out, projection_out, aliases, metric = "euclidean";
  CoherenceConfig cfg;
};

int run_analyze(const AnalyzeArgs& a) {
  a.cfg.validate();
  if (a.metric != "euclidean" && a.metric != "cosine") throw ValidationError("--metric must be euclidean or cosine");
  const auto metric = a.metric == "cosine" ? Distance::cosine : Distance::euclidean;
  const auto store = load_store(a.embeddings, a.aliases);
  const auto qrels = parse_qrels(std::filesystem::path(a.qrels));
  const auto rows = per_query_coherence(qrels, store, a.cfg);
  emit(a.coherence_out, render_coherence(rows));

  const auto clusters = filter_clusters(relevant_clusters(qrels, store), std::max<std::size_t>(a.cfg.min_cluster_size, 1));
  double mean_co = 0.0;
  for (const auto& r : rows) mean_co += r.coherence;
  if (!rows.empty()) mean_co /= static_cast<double>(rows.size());
  std::string summary = "clusters\t" + std::to_string(clusters.size()) + '\n';
  summary += "mean_coherence@" + text::format_g(a.cfg.tau, 3) + '\t' + (rows.empty() ? "NA" : text::format_f(mean_co, 6)) + '\n';
  if (clusters.size() >= 2) {
    summary += "davies_bouldin\t" + text::format_f(davies_bouldin(clusters, metric), 6) + '\n';
    summary += "silhouette\t" + text::format_f(silhouette(clusters, metric), 6) + '\n';
  } else {
    summary += "davies_bouldin\tNA\nsilhouette\tNA\n";
  }
  if (!a.summary_out.empty()) emit(a.summary_out, summary);
  else std::cerr << summary;
  if (!a.projection_out.empty()) export_projection(clusters, a.projection_out);
  return 0;
}

struct GainsArgs {
  std::string run_a, run_b, qrels, out;
  std::size_t cutoff = 10;
};

int run_gains(const GainsArgs& a) {
  const auto ra = parse_run(std::filesystem::path(a.run_a));
  const auto rb = parse_run(std::filesystem::path(a.run_b));
  const auto qrels = parse_qrels(std::filesystem::path(a.qrels));
  emit(a.out, render_gains(query_gain_report(ra, rb, qrels, a.cutoff), a.cutoff));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Graph-embedding entity reranking toolkit"};
  app.require_subcommand(1);

  VocabArgs va;
  auto* vocab = app.add_subcommand("vocab", "Build the joint word/entity vocabulary");
  vocab->add_option("--corpus", va.corpus, "Corpus file (line-record format)")->required();
  vocab->add_option("--out", va.out, "Vocabulary output file")->required();
  vocab->add_option("--min-word-count", va.min_word_count, "Minimum corpus frequency of a word")->capture_default_str();
  vocab->add_option("--min-entity-count", va.min_entity_count, "Minimum incoming link count of an entity")->capture_default_str();
  vocab->add_option("--disambiguation", va.disambiguation, "Keep disambiguation pages (true|false)")->capture_default_str();
  vocab->add_option("--assessed", va.assessed, "Qrels file whose entities are checked for coverage");
  vocab->add_option("--report", va.report, "Missing-entity report output (default stdout)");

  TrainArgs ta;
  auto* train_cmd = app.add_subcommand("train", "Train joint word/entity embeddings");
  train_cmd->add_option("--corpus", ta.corpus, "Corpus file")->required();
  train_cmd->add_option("--vocab", ta.vocab, "Vocabulary file from 'vocab'")->required();
  train_cmd->add_option("--out", ta.out, "Embedding output file")->required();
  train_cmd->add_option("--stats", ta.stats, "Per-epoch statistics TSV");
  train_cmd->add_option("--dim", ta.cfg.dimension, "Embedding dimension")->capture_default_str();
  train_cmd->add_option("--window", ta.cfg.window, "Context window size c")->capture_default_str();
  train_cmd->add_option("--negatives", ta.cfg.negatives, "Negative samples per pair")->capture_default_str();
  train_cmd->add_option("--epochs", ta.cfg.epochs, "Training epochs")->capture_default_str();
  train_cmd->add_option("--lr", ta.cfg.learning_rate, "Initial learning rate")->capture_default_str();
  train_cmd->add_option("--min-lr", ta.cfg.min_lr, "Final learning rate")->capture_default_str();
  train_cmd->add_option("--link-graph", ta.cfg.use_link_graph, "Train the link-graph component (true|false)")->capture_default_str();
  train_cmd->add_option("--neighborhood", ta.neighborhood, "Link context: symmetric|incoming")->capture_default_str();
  train_cmd->add_option("--seed", ta.cfg.seed, "Random seed")->capture_default_str();
  train_cmd->add_option("--subsample", ta.cfg.subsample_threshold, "Word subsampling threshold (0 disables)")->capture_default_str();
  train_cmd->add_option("--workers", ta.cfg.parallel_workers, "Training threads (1 = deterministic)")->capture_default_str();
  train_cmd->add_option("--probe-pairs", ta.cfg.probe_pairs, "Probe pairs per component for exact losses")->capture_default_str();

  RerankArgs ra;
  auto* rerank_cmd = app.add_subcommand("rerank", "Rerank a first-stage run by embedding similarity");
  rerank_cmd->add_option("--run", ra.run, "First-stage TREC run")->required();
  rerank_cmd->add_option("--annotations", ra.annotations, "Query entity annotations TSV")->required();
  rerank_cmd->add_option("--embeddings", ra.embeddings, "Embedding file")->required();
  rerank_cmd->add_option("--out", ra.out, "Output run (default stdout)");
  rerank_cmd->add_option("--lambda", ra.cfg.lambda, "Interpolation weight in [0,1]")->required();
  rerank_cmd->add_option("--top-k", ra.cfg.top_k, "Candidates reranked per query")->capture_default_str();
  rerank_cmd->add_option("--normalize-base", ra.cfg.normalize_base, "Min-max normalize base scores (true|false)")->capture_default_str();
  rerank_cmd->add_option("--missing-score", ra.cfg.missing_embedding_score, "Similarity used when an embedding is missing")->capture_default_str();
  rerank_cmd->add_option("--aliases", ra.aliases, "Corpus whose ALIAS records resolve entity ids");

  TuneArgs tu;
  auto* tune_cmd = app.add_subcommand("tune", "Tune lambda by cross-validated coordinate ascent");
  tune_cmd->add_option("--run", tu.run, "First-stage TREC run")->required();
  tune_cmd->add_option("--annotations", tu.annotations, "Query entity annotations TSV")->required();
  tune_cmd->add_option("--embeddings", tu.embeddings, "Embedding file")->required();
  tune_cmd->add_option("--qrels", tu.qrels, "Qrels file")->required();
  tune_cmd->add_option("--folds", tu.folds, "Fold file (qid<TAB>fold); generated when absent");
  tune_cmd->add_option("--num-folds", tu.num_folds, "Folds to generate when no fold file is given")->capture_default_str();
  tune_cmd->add_option("--fold-seed", tu.fold_seed, "Seed for generated folds")->capture_default_str();
  tune_cmd->add_option("--restarts", tu.cfg.restarts, "Random restarts per fold")->capture_default_str();
  tune_cmd->add_option("--cutoff", tu.cfg.cutoff, "NDCG cutoff optimized")->capture_default_str();
  tune_cmd->add_option("--seed", tu.cfg.seed, "Seed for random starting points")->capture_default_str();
  tune_cmd->add_option("--top-k", tu.cfg.rerank.top_k, "Candidates reranked per query")->capture_default_str();
  tune_cmd->add_option("--normalize-base", tu.cfg.rerank.normalize_base, "Min-max normalize base scores (true|false)")->capture_default_str();
  tune_cmd->add_option("--out-run", tu.out_run, "Cross-validated run output");
  tune_cmd->add_option("--report", tu.report, "Lambda report output (default stdout)");
  tune_cmd->add_option("--aliases", tu.aliases, "Corpus whose ALIAS records resolve entity ids");

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a run with NDCG");
  eval_cmd->add_option("--run", ev.run, "TREC run")->required();
  eval_cmd->add_option("--qrels", ev.qrels, "Qrels file")->required();
  eval_cmd->add_option("--cutoffs", ev.cutoffs, "Comma-separated NDCG cutoffs")->capture_default_str();
  eval_cmd->add_option("--gain", ev.gain, "linear|exponential")->capture_default_str();
  eval_cmd->add_option("--out", ev.out, "Report output (default stdout)");

  EvalArgs cmp;
  auto* cmp_cmd = app.add_subcommand("compare", "Compare two runs with a paired t-test");
  cmp_cmd->add_option("--run-a", cmp.run, "Reference run")->required();
  cmp_cmd->add_option("--run-b", cmp.run_b, "Compared run")->required();
  cmp_cmd->add_option("--qrels", cmp.qrels, "Qrels file")->required();
  cmp_cmd->add_option("--cutoffs", cmp.cutoffs, "Comma-separated NDCG cutoffs")->capture_default_str();
  cmp_cmd->add_option("--gain", cmp.gain, "linear|exponential")->capture_default_str();
  cmp_cmd->add_option("--alpha", cmp.alpha, "Significance level")->capture_default_str();
  cmp_cmd->add_option("--out", cmp.out, "Report output (default stdout)");

  AnalyzeArgs an;
  auto* an_cmd = app.add_subcommand("analyze", "Cluster-hypothesis analysis of entity embeddings");
  an_cmd->add_option("--embeddings", an.embeddings, "Embedding file")->required();
  an_cmd->add_option("--qrels", an.qrels, "Qrels file")->required();
  an_cmd->add_option("--tau", an.cfg.tau, "Coherence similarity threshold")->capture_default_str();
  an_cmd->add_option("--min-cluster-size", an.cfg.min_cluster_size, "Minimum relevant entities per query")->capture_default_str();
  an_cmd->add_option("--coherence-out", an.coherence_out, "Per-query coherence TSV (default stdout)");
  an_cmd->add_option("--summary-out", an.summary_out, "Davies-Bouldin/Silhouette summary (default stderr)");
  an_cmd->add_option("--projection-out", an.projection_out, "Projection-ready TSV export");
  an_cmd->add_option("--metric", an.metric, "Distance for Davies-Bouldin/Silhouette: euclidean|cosine")->capture_default_str();
  an_cmd->add_option("--aliases", an.aliases, "Corpus whose ALIAS records resolve entity ids");

  GainsArgs ga;
  auto* gains_cmd = app.add_subcommand("gains", "Per-query NDCG gains of run B over run A");
  gains_cmd->add_option("--run-a", ga.run_a, "Reference run")->required();
  gains_cmd->add_option("--run-b", ga.run_b, "Compared run")->required();
  gains_cmd->add_option("--qrels", ga.qrels, "Qrels file")->required();
  gains_cmd->add_option("--cutoff", ga.cutoff, "NDCG cutoff")->capture_default_str();
  gains_cmd->add_option("--out", ga.out, "Report output (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*vocab) return run_vocab(va);
    if (*train_cmd) return run_train(ta);
    if (*rerank_cmd) return run_rerank(ra);
    if (*tune_cmd) return run_tune(tu);
    if (*eval_cmd) return run_eval(ev);
    if (*cmp_cmd) return run_compare(cmp);
    if (*an_cmd) return run_analyze(an);
    if (*gains_cmd) return run_gains(ga);
  } catch (const geeer::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const geeer::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
