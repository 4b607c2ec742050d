#pragma once

// Joint word/entity skip-gram training with negative sampling.
//
// Three pair streams feed one pair of matrices: word-word windows, entity-entity
// link-graph neighborhoods and entity-word anchor contexts. Final embeddings are the
// rows of the target matrix. The exact full-softmax loss and its analytic gradient are
// provided for verification on small vocabularies.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <exception>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "geeer/corpus.hpp"
#include "geeer/error.hpp"
#include "geeer/vector_ops.hpp"

namespace geeer {

enum class Component : std::uint8_t { word, link, anchor };

inline const char* to_string(Component c) {
  switch (c) {
    case Component::word: return "word";
    case Component::link: return "link";
    case Component::anchor: return "anchor";
  }
  return "?";
}

struct TrainingPair {
  std::size_t center = 0;
  std::size_t context = 0;
  Component component = Component::word;

  friend bool operator==(const TrainingPair&, const TrainingPair&) = default;
};

/// Which namespace a pair's context (the predicted item) belongs to.
enum class Namespace : std::uint8_t { words, entities };

inline Namespace context_namespace(Component c) {
  return c == Component::link ? Namespace::entities : Namespace::words;
}

/// How the link-graph context of an entity is formed.
enum class Neighborhood : std::uint8_t {
  symmetric,  // incoming and outgoing neighbors
  incoming,   // incoming neighbors only
};

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

template <std::floating_point Real>
class EmbeddingModel {
 public:
  using value_type = Real;

  EmbeddingModel() = default;
  EmbeddingModel(std::size_t word_count, std::size_t entity_count, std::size_t dimension,
                 std::uint64_t vocab_fingerprint = 0)
      : words_(word_count),
        entities_(entity_count),
        dim_(dimension),
        fingerprint_(vocab_fingerprint),
        target_((word_count + entity_count) * dimension, Real(0)),
        context_((word_count + entity_count) * dimension, Real(0)) {
    if (dimension < 1) throw ValidationError("embedding dimension must be >= 1");
  }

  static EmbeddingModel for_vocabulary(const Vocabulary& vocab, std::size_t dimension) {
    return EmbeddingModel(vocab.word_count(), vocab.entity_count(), dimension, vocab.fingerprint());
  }

  std::size_t rows() const { return words_ + entities_; }
  std::size_t dimension() const { return dim_; }
  std::size_t word_count() const { return words_; }
  std::size_t entity_count() const { return entities_; }
  std::uint64_t vocab_fingerprint() const { return fingerprint_; }

  /// Global index range [first, last) of a namespace.
  std::pair<std::size_t, std::size_t> range(Namespace ns) const {
    return ns == Namespace::words ? std::pair{std::size_t{0}, words_} : std::pair{words_, words_ + entities_};
  }

  std::span<Real> target(std::size_t row) { return {target_.data() + row * dim_, dim_}; }
  std::span<const Real> target(std::size_t row) const { return {target_.data() + row * dim_, dim_}; }
  std::span<Real> context(std::size_t row) { return {context_.data() + row * dim_, dim_}; }
  std::span<const Real> context(std::size_t row) const { return {context_.data() + row * dim_, dim_}; }

  std::vector<Real>& target_data() { return target_; }
  const std::vector<Real>& target_data() const { return target_; }
  std::vector<Real>& context_data() { return context_; }
  const std::vector<Real>& context_data() const { return context_; }

  /// Target entries ~ U(-0.5/d, 0.5/d); context entries = 0.
  void initialize(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const double half = 0.5 / static_cast<double>(dim_);
    for (auto& x : target_) {
      const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
      x = static_cast<Real>((2.0 * u - 1.0) * half);
    }
    std::fill(context_.begin(), context_.end(), Real(0));
  }

  bool all_finite() const {
    auto finite = [](Real x) { return std::isfinite(x); };
    return std::all_of(target_.begin(), target_.end(), finite) &&
           std::all_of(context_.begin(), context_.end(), finite);
  }

  friend bool operator==(const EmbeddingModel&, const EmbeddingModel&) = default;

 private:
  std::size_t words_ = 0;
  std::size_t entities_ = 0;
  std::size_t dim_ = 1;
  std::uint64_t fingerprint_ = 0;
  std::vector<Real> target_;
  std::vector<Real> context_;
};

// ---------------------------------------------------------------------------
// Pair streams
// ---------------------------------------------------------------------------

/// Maps tokens to word indices, dropping out-of-vocabulary tokens.
inline std::vector<std::size_t> word_ids(const Document& doc, const Vocabulary& vocab) {
  std::vector<std::size_t> ids;
  ids.reserve(doc.tokens.size());
  for (const auto& tok : doc.tokens)
    if (auto i = vocab.word_index(tok)) ids.push_back(*i);
  return ids;
}

/// Skip-gram window over an already-filtered id sequence.
inline void append_window_pairs(std::span<const std::size_t> ids, std::size_t window,
                                std::vector<TrainingPair>& out) {
  const std::size_t n = ids.size();
  for (std::size_t t = 0; t < n; ++t) {
    const std::size_t lo = t >= window ? t - window : 0;
    const std::size_t hi = std::min(n - 1, t + window);
    for (std::size_t j = lo; j <= hi; ++j)
      if (j != t) out.push_back({ids[t], ids[j], Component::word});
  }
}

inline std::vector<TrainingPair> word_pairs(const Document& doc, std::size_t window, const Vocabulary& vocab) {
  std::vector<TrainingPair> out;
  const auto ids = word_ids(doc, vocab);
  append_window_pairs(ids, window, out);
  return out;
}

/// Up to `window` in-vocabulary words on each side of every in-vocabulary anchor.
inline std::vector<TrainingPair> anchor_pairs(const Document& doc, std::size_t window, const Vocabulary& vocab) {
  std::vector<TrainingPair> out;
  const auto& toks = doc.tokens;
  for (const auto& a : doc.anchors) {
    auto e = vocab.entity_index(a.target);
    if (!e) continue;
    std::size_t taken = 0;
    for (std::size_t i = a.start; i > 0 && taken < window; --i)
      if (auto w = vocab.word_index(toks[i - 1])) {
        out.push_back({*e, *w, Component::anchor});
        ++taken;
      }
    taken = 0;
    for (std::size_t i = a.end(); i < toks.size() && taken < window; ++i)
      if (auto w = vocab.word_index(toks[i])) {
        out.push_back({*e, *w, Component::anchor});
        ++taken;
      }
  }
  return out;
}

/// Link-graph neighbor lists per in-vocabulary entity (global indices), in entity index order.
inline std::vector<std::pair<std::size_t, std::vector<std::size_t>>> link_neighbors(
    const KnowledgeGraphCorpus& corpus, const Vocabulary& vocab, Neighborhood mode = Neighborhood::symmetric) {
  std::map<EntityId, std::set<EntityId>> outgoing;
  if (mode == Neighborhood::symmetric) outgoing = corpus.outgoing();
  std::vector<std::pair<std::size_t, std::vector<std::size_t>>> out;
  for (std::size_t k = 0; k < vocab.entity_count(); ++k) {
    const auto& id = vocab.entities()[k].key;
    const std::size_t self = vocab.word_count() + k;
    std::set<std::size_t> nbrs;
    auto collect = [&](const std::map<EntityId, std::set<EntityId>>& adj) {
      auto it = adj.find(id);
      if (it == adj.end()) return;
      for (const auto& other : it->second)
        if (auto j = vocab.entity_index(other); j && *j != self) nbrs.insert(*j);
    };
    collect(corpus.link_graph);
    if (mode == Neighborhood::symmetric) collect(outgoing);
    if (!nbrs.empty()) out.emplace_back(self, std::vector<std::size_t>(nbrs.begin(), nbrs.end()));
  }
  return out;
}

inline std::vector<TrainingPair> link_pairs(const KnowledgeGraphCorpus& corpus, const Vocabulary& vocab,
                                            Neighborhood mode = Neighborhood::symmetric) {
  std::vector<TrainingPair> out;
  for (const auto& [e, nbrs] : link_neighbors(corpus, vocab, mode))
    for (auto o : nbrs) out.push_back({e, o, Component::link});
  return out;
}

// ---------------------------------------------------------------------------
// Exact objective (verification oracle)
// ---------------------------------------------------------------------------

struct ComponentLoss {
  double word = 0.0;
  double link = 0.0;
  double anchor = 0.0;
  double total() const { return word + link + anchor; }
};

namespace detail {

template <std::floating_point Real>
void check_pair(const EmbeddingModel<Real>& model, const TrainingPair& p) {
  const auto [lo, hi] = model.range(context_namespace(p.component));
  const bool center_ok = p.component == Component::word ? p.center < model.word_count()
                                                         : p.center >= model.word_count() && p.center < model.rows();
  if (!center_ok || p.context < lo || p.context >= hi)
    throw ValidationError(std::string("invalid ") + to_string(p.component) + " pair (" + std::to_string(p.center) +
                          ", " + std::to_string(p.context) + ")");
}

/// Logits of one center row against every context row of a namespace, plus the
/// log-partition (max-subtracted).
template <std::floating_point Real>
double log_partition(const EmbeddingModel<Real>& model, std::size_t center, Namespace ns,
                     std::vector<double>& logits) {
  const auto [lo, hi] = model.range(ns);
  logits.resize(hi - lo);
  const auto v = model.target(center);
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t i = lo; i < hi; ++i) {
    logits[i - lo] = dot(v, model.context(i));
    if (std::isnan(logits[i - lo])) throw NumericError("NaN in model");
    mx = std::max(mx, logits[i - lo]);
  }
  double s = 0.0;
  for (double z : logits) s += std::exp(z - mx);
  return mx + std::log(s);
}

}  // namespace detail

/// Negative summed log-softmax over the pairs, per component. Word and anchor pairs
/// normalize over the word namespace, link pairs over the entity namespace.
template <std::floating_point Real>
ComponentLoss exact_component_loss(const EmbeddingModel<Real>& model, std::span<const TrainingPair> pairs) {
  ComponentLoss loss;
  std::vector<double> logits;
  for (const auto& p : pairs) {
    detail::check_pair(model, p);
    const auto ns = context_namespace(p.component);
    const double lz = detail::log_partition(model, p.center, ns, logits);
    const double nll = lz - logits[p.context - model.range(ns).first];
    switch (p.component) {
      case Component::word: loss.word += nll; break;
      case Component::link: loss.link += nll; break;
      case Component::anchor: loss.anchor += nll; break;
    }
  }
  return loss;
}

template <std::floating_point Real>
double exact_loss(const EmbeddingModel<Real>& model, std::span<const TrainingPair> pairs) {
  return exact_component_loss(model, pairs).total();
}

/// Dense gradient of exact_loss with respect to both matrices (row-major, same layout
/// as the model).
struct ModelGradient {
  std::size_t dimension = 0;
  std::vector<double> target;
  std::vector<double> context;

  std::span<const double> target_row(std::size_t r) const { return {target.data() + r * dimension, dimension}; }
  std::span<const double> context_row(std::size_t r) const { return {context.data() + r * dimension, dimension}; }
};

template <std::floating_point Real>
ModelGradient exact_gradient(const EmbeddingModel<Real>& model, std::span<const TrainingPair> pairs) {
  const std::size_t d = model.dimension();
  ModelGradient g{d, std::vector<double>(model.rows() * d, 0.0), std::vector<double>(model.rows() * d, 0.0)};
  std::vector<double> logits;
  for (const auto& p : pairs) {
    detail::check_pair(model, p);
    const auto ns = context_namespace(p.component);
    const auto [lo, hi] = model.range(ns);
    const double lz = detail::log_partition(model, p.center, ns, logits);
    const auto v = model.target(p.center);
    double* gv = g.target.data() + p.center * d;
    for (std::size_t i = lo; i < hi; ++i) {
      // d(-log p_ctx)/dz_i = p_i - [i == ctx]
      const double coef = std::exp(logits[i - lo] - lz) - (i == p.context ? 1.0 : 0.0);
      const auto u = model.context(i);
      double* gu = g.context.data() + i * d;
      for (std::size_t k = 0; k < d; ++k) {
        gv[k] += coef * static_cast<double>(u[k]);
        gu[k] += coef * static_cast<double>(v[k]);
      }
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// Negative sampling
// ---------------------------------------------------------------------------

inline double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// splitmix64 finalizer; derives independent stream seeds from (seed, tags...).
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

template <typename... Tags>
std::uint64_t derive_seed(std::uint64_t seed, Tags... tags) {
  std::uint64_t h = mix_seed(seed);
  ((h = mix_seed(h ^ static_cast<std::uint64_t>(tags))), ...);
  return h;
}

/// Unigram^0.75 noise over each namespace separately. Items with zero count are given
/// weight 1 so that every vocabulary member can be drawn.
class NoiseSampler {
 public:
  NoiseSampler() = default;
  explicit NoiseSampler(const Vocabulary& vocab, double power = 0.75) : words_(vocab.word_count()) {
    build(vocab.words(), word_cdf_, power);
    build(vocab.entities(), entity_cdf_, power);
  }

  std::size_t size(Namespace ns) const {
    return ns == Namespace::words ? word_cdf_.size() : entity_cdf_.size();
  }

  /// Draws a global index from the namespace.
  std::size_t sample(Namespace ns, std::mt19937_64& rng) const {
    const auto& cdf = ns == Namespace::words ? word_cdf_ : entity_cdf_;
    const double u = uniform01(rng) * cdf.back();
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    std::size_t i = static_cast<std::size_t>(std::min<std::ptrdiff_t>(it - cdf.begin(), cdf.size() - 1));
    return ns == Namespace::words ? i : words_ + i;
  }

 private:
  static void build(const std::vector<Vocabulary::Entry>& entries, std::vector<double>& cdf, double power) {
    cdf.reserve(entries.size());
    double acc = 0.0;
    for (const auto& e : entries) {
      acc += std::pow(static_cast<double>(std::max<std::uint64_t>(e.count, 1)), power);
      cdf.push_back(acc);
    }
  }

  std::size_t words_ = 0;
  std::vector<double> word_cdf_;
  std::vector<double> entity_cdf_;
};

// ---------------------------------------------------------------------------
// SGD step
// ---------------------------------------------------------------------------

/// Direct memory access, for exclusive-writer training.
struct PlainAccess {
  template <typename T>
  static T load(const T& x) { return x; }
  template <typename T>
  static void store(T& x, T v) { x = v; }
};

/// Relaxed atomic access, for lock-free shared updates from several workers.
struct RelaxedAccess {
  template <typename T>
  static T load(const T& x) { return std::atomic_ref<T>(const_cast<T&>(x)).load(std::memory_order_relaxed); }
  template <typename T>
  static void store(T& x, T v) { std::atomic_ref<T>(x).store(v, std::memory_order_relaxed); }
};

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// One skip-gram negative-sampling update for `pair`: a positive term on
/// (target[center], context[context]) and `negatives` noise terms drawn from the
/// context's namespace (a draw equal to the true context is redrawn). The target row
/// receives the accumulated gradient after all context rows are updated.
template <typename Access = PlainAccess, std::floating_point Real>
void sgd_step(EmbeddingModel<Real>& model, const TrainingPair& pair, std::size_t negatives, double lr,
              std::mt19937_64& rng, const NoiseSampler& sampler, std::vector<Real>& scratch) {
  const std::size_t d = model.dimension();
  scratch.assign(d, Real(0));
  auto v = model.target(pair.center);
  const auto ns = context_namespace(pair.component);

  auto update = [&](std::size_t ctx, double label) {
    auto u = model.context(ctx);
    double f = 0.0;
    for (std::size_t k = 0; k < d; ++k)
      f += static_cast<double>(Access::load(v[k])) * static_cast<double>(Access::load(u[k]));
    const Real g = static_cast<Real>((label - sigmoid(f)) * lr);
    bool finite = true;
    for (std::size_t k = 0; k < d; ++k) {
      const Real uk = Access::load(u[k]);
      scratch[k] += g * uk;
      const Real nu = uk + g * Access::load(v[k]);
      finite = finite && std::isfinite(nu);
      Access::store(u[k], nu);
    }
    if (!finite)
      throw NumericError(std::string("non-finite update on ") + to_string(pair.component) + " pair (" +
                         std::to_string(pair.center) + ", " + std::to_string(pair.context) + ")");
  };

  update(pair.context, 1.0);
  if (sampler.size(ns) > 1) {
    for (std::size_t n = 0; n < negatives; ++n) {
      std::size_t neg;
      do neg = sampler.sample(ns, rng);
      while (neg == pair.context);
      update(neg, 0.0);
    }
  }
  bool finite = true;
  for (std::size_t k = 0; k < d; ++k) {
    const Real nv = Access::load(v[k]) + scratch[k];
    finite = finite && std::isfinite(nv);
    Access::store(v[k], nv);
  }
  if (!finite)
    throw NumericError(std::string("non-finite update on ") + to_string(pair.component) + " pair (" +
                       std::to_string(pair.center) + ", " + std::to_string(pair.context) + ")");
}

template <typename Access = PlainAccess, std::floating_point Real>
void sgd_step(EmbeddingModel<Real>& model, const TrainingPair& pair, std::size_t negatives, double lr,
              std::mt19937_64& rng, const NoiseSampler& sampler) {
  std::vector<Real> scratch;
  sgd_step<Access>(model, pair, negatives, lr, rng, sampler, scratch);
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

struct TrainingConfig {
  std::size_t dimension = 100;
  std::size_t window = 5;
  std::size_t negatives = 5;
  std::size_t epochs = 5;
  double learning_rate = 0.025;
  double min_lr = 0.0001;
  bool use_link_graph = true;
  Neighborhood neighborhood = Neighborhood::symmetric;
  std::uint64_t seed = 1;
  /// Frequent-word subsampling threshold t (discard prob 1 - sqrt(t/f)); 0 disables.
  double subsample_threshold = 1e-4;
  std::size_t parallel_workers = 1;
  /// Pairs per component in the fixed probe sample used for per-epoch exact losses; 0 disables.
  std::size_t probe_pairs = 128;

  void validate() const {
    if (dimension < 1) throw ValidationError("dimension must be >= 1");
    if (window < 1) throw ValidationError("window must be >= 1");
    if (negatives < 1) throw ValidationError("negatives must be >= 1");
    if (!(learning_rate > 0.0)) throw ValidationError("learning rate must be positive");
    if (!(min_lr > 0.0)) throw ValidationError("min_lr must be positive");
    if (min_lr > learning_rate) throw ValidationError("min_lr must not exceed learning_rate");
    if (subsample_threshold < 0.0) throw ValidationError("subsample threshold must be >= 0");
    if (parallel_workers < 1) throw ValidationError("parallel_workers must be >= 1");
  }
};

struct EpochStats {
  std::size_t epoch = 0;  // 0 = before training
  double loss_w = 0.0;
  double loss_e = 0.0;
  double loss_a = 0.0;
  double loss_total = 0.0;
  std::uint64_t pairs_w = 0;
  std::uint64_t pairs_e = 0;
  std::uint64_t pairs_a = 0;
  double seconds = 0.0;
};

struct TrainingStats {
  std::vector<EpochStats> epochs;

  std::uint64_t total_pairs(Component c) const {
    std::uint64_t n = 0;
    for (const auto& e : epochs) n += c == Component::word ? e.pairs_w : c == Component::link ? e.pairs_e : e.pairs_a;
    return n;
  }
};

inline std::string render_stats(const TrainingStats& stats) {
  std::string out = "epoch\tloss_w\tloss_e\tloss_a\tloss_total\tpairs_w\tpairs_e\tpairs_a\tseconds\n";
  for (const auto& e : stats.epochs) {
    out += std::to_string(e.epoch) + '\t' + text::format_g(e.loss_w, 8) + '\t' + text::format_g(e.loss_e, 8) +
           '\t' + text::format_g(e.loss_a, 8) + '\t' + text::format_g(e.loss_total, 8) + '\t' +
           std::to_string(e.pairs_w) + '\t' + std::to_string(e.pairs_e) + '\t' + std::to_string(e.pairs_a) +
           '\t' + text::format_f(e.seconds, 3) + '\n';
  }
  return out;
}

namespace detail {

/// Per-corpus training plan built once: in-vocabulary word ids and anchor pairs per
/// document, link pairs per entity, and word discard probabilities.
struct TrainingPlan {
  std::vector<std::vector<std::size_t>> doc_words;
  std::vector<std::vector<TrainingPair>> doc_anchor_pairs;
  std::vector<std::vector<TrainingPair>> entity_link_pairs;
  std::vector<double> discard_prob;  // per word index
  std::uint64_t pairs_per_epoch = 0;
  std::vector<TrainingPair> probe;

  /// Work units: [0, docs) documents, [docs, docs + groups) link groups.
  std::size_t units() const { return doc_words.size() + entity_link_pairs.size(); }
};

inline std::uint64_t window_pair_count(std::size_t n, std::size_t window) {
  std::uint64_t c = 0;
  for (std::size_t t = 0; t < n; ++t) c += std::min(t, window) + std::min(n - 1 - t, window);
  return c;
}

inline TrainingPlan make_plan(const KnowledgeGraphCorpus& corpus, const Vocabulary& vocab,
                              const TrainingConfig& cfg) {
  TrainingPlan plan;
  for (const auto& doc : corpus.documents) {
    plan.doc_words.push_back(word_ids(doc, vocab));
    plan.doc_anchor_pairs.push_back(anchor_pairs(doc, cfg.window, vocab));
    plan.pairs_per_epoch += window_pair_count(plan.doc_words.back().size(), cfg.window) +
                            plan.doc_anchor_pairs.back().size();
  }
  if (cfg.use_link_graph) {
    for (const auto& [e, nbrs] : link_neighbors(corpus, vocab, cfg.neighborhood)) {
      std::vector<TrainingPair> group;
      for (auto o : nbrs) group.push_back({e, o, Component::link});
      plan.pairs_per_epoch += group.size();
      plan.entity_link_pairs.push_back(std::move(group));
    }
  }

  std::uint64_t total_words = 0;
  for (const auto& w : vocab.words()) total_words += w.count;
  plan.discard_prob.assign(vocab.word_count(), 0.0);
  if (cfg.subsample_threshold > 0.0 && total_words > 0) {
    for (std::size_t i = 0; i < vocab.word_count(); ++i) {
      const double f = static_cast<double>(vocab.words()[i].count) / static_cast<double>(total_words);
      if (f > 0.0) plan.discard_prob[i] = std::max(0.0, 1.0 - std::sqrt(cfg.subsample_threshold / f));
    }
  }

  if (cfg.probe_pairs > 0) {
    // Reservoir sample per component with a dedicated stream.
    std::mt19937_64 rng(derive_seed(cfg.seed, 0x70726f6265ULL));
    auto sample_into = [&](auto&& for_each_pair) {
      std::vector<TrainingPair> reservoir;
      std::uint64_t seen = 0;
      for_each_pair([&](const TrainingPair& p) {
        ++seen;
        if (reservoir.size() < cfg.probe_pairs) {
          reservoir.push_back(p);
        } else {
          const auto j = static_cast<std::uint64_t>(uniform01(rng) * static_cast<double>(seen));
          if (j < cfg.probe_pairs) reservoir[j] = p;
        }
      });
      plan.probe.insert(plan.probe.end(), reservoir.begin(), reservoir.end());
    };
    sample_into([&](auto&& visit) {
      std::vector<TrainingPair> tmp;
      for (const auto& ids : plan.doc_words) {
        tmp.clear();
        append_window_pairs(ids, cfg.window, tmp);
        for (const auto& p : tmp) visit(p);
      }
    });
    sample_into([&](auto&& visit) {
      for (const auto& g : plan.entity_link_pairs)
        for (const auto& p : g) visit(p);
    });
    sample_into([&](auto&& visit) {
      for (const auto& g : plan.doc_anchor_pairs)
        for (const auto& p : g) visit(p);
    });
  }
  return plan;
}

template <std::floating_point Real>
void record_probe(const EmbeddingModel<Real>& model, const TrainingPlan& plan, EpochStats& row) {
  const auto loss = exact_component_loss(model, std::span<const TrainingPair>(plan.probe));
  row.loss_w = loss.word;
  row.loss_e = loss.link;
  row.loss_a = loss.anchor;
  row.loss_total = loss.total();
}

struct WorkerCounts {
  std::uint64_t word = 0, link = 0, anchor = 0;
};

template <typename Access, std::floating_point Real>
void run_units(EmbeddingModel<Real>& model, const TrainingPlan& plan, const TrainingConfig& cfg,
               const NoiseSampler& sampler, std::span<const std::size_t> units, std::size_t epoch,
               std::size_t worker, std::atomic<std::uint64_t>& progress, std::uint64_t total_scheduled,
               WorkerCounts& counts) {
  std::mt19937_64 neg_rng(derive_seed(cfg.seed, 0x6e6567ULL, epoch, worker));
  std::vector<Real> scratch;
  std::vector<std::size_t> kept;
  std::vector<TrainingPair> pairs;
  const std::size_t docs = plan.doc_words.size();

  auto current_lr = [&] {
    const double frac = total_scheduled
                            ? std::min(1.0, static_cast<double>(progress.load(std::memory_order_relaxed)) /
                                                static_cast<double>(total_scheduled))
                            : 1.0;
    return cfg.learning_rate - (cfg.learning_rate - cfg.min_lr) * frac;
  };

  for (const std::size_t unit : units) {
    const double lr = current_lr();
    std::uint64_t scheduled = 0;
    if (unit < docs) {
      const auto& ids = plan.doc_words[unit];
      scheduled = window_pair_count(ids.size(), cfg.window) + plan.doc_anchor_pairs[unit].size();
      // Subsampling draws depend only on (seed, epoch, document) so the word stream is
      // identical whether or not link pairs are interleaved.
      kept.clear();
      if (cfg.subsample_threshold > 0.0) {
        std::mt19937_64 sub_rng(derive_seed(cfg.seed, 0x737562ULL, epoch, unit));
        for (auto id : ids)
          if (uniform01(sub_rng) >= plan.discard_prob[id]) kept.push_back(id);
      } else {
        kept = ids;
      }
      pairs.clear();
      append_window_pairs(kept, cfg.window, pairs);
      for (const auto& p : pairs) sgd_step<Access>(model, p, cfg.negatives, lr, neg_rng, sampler, scratch);
      counts.word += pairs.size();
      for (const auto& p : plan.doc_anchor_pairs[unit])
        sgd_step<Access>(model, p, cfg.negatives, lr, neg_rng, sampler, scratch);
      counts.anchor += plan.doc_anchor_pairs[unit].size();
    } else {
      const auto& group = plan.entity_link_pairs[unit - docs];
      scheduled = group.size();
      for (const auto& p : group) sgd_step<Access>(model, p, cfg.negatives, lr, neg_rng, sampler, scratch);
      counts.link += group.size();
    }
    progress.fetch_add(scheduled, std::memory_order_relaxed);
  }
}

}  // namespace detail

/// Trains `model` in place. With one worker and a fixed seed the result is
/// bit-reproducible; with several workers rows are updated lock-free and the result is
/// nondeterministic.
template <std::floating_point Real>
TrainingStats train_into(EmbeddingModel<Real>& model, const KnowledgeGraphCorpus& corpus, const Vocabulary& vocab,
                         const TrainingConfig& cfg) {
  cfg.validate();
  if (vocab.empty()) throw ValidationError("cannot train on an empty vocabulary");
  if (model.dimension() != cfg.dimension)
    throw ValidationError("model dimension " + std::to_string(model.dimension()) + " does not match config " +
                          std::to_string(cfg.dimension));
  if (model.word_count() != vocab.word_count() || model.entity_count() != vocab.entity_count())
    throw ValidationError("model shape does not match vocabulary");

  const auto plan = detail::make_plan(corpus, vocab, cfg);
  const NoiseSampler sampler(vocab);
  const std::uint64_t total_scheduled = plan.pairs_per_epoch * cfg.epochs;
  std::atomic<std::uint64_t> progress{0};

  TrainingStats stats;
  stats.epochs.emplace_back();
  detail::record_probe(model, plan, stats.epochs.back());

  std::vector<std::size_t> order(plan.units());
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 order_rng(derive_seed(cfg.seed, 0x6f7264ULL, epoch));
    for (std::size_t i = order.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(uniform01(order_rng) * static_cast<double>(i));
      std::swap(order[i - 1], order[std::min(j, i - 1)]);
    }

    EpochStats row;
    row.epoch = epoch;
    const std::size_t workers = std::min(cfg.parallel_workers, std::max<std::size_t>(order.size(), 1));
    std::vector<detail::WorkerCounts> counts(workers);
    if (workers == 1) {
      detail::run_units<PlainAccess>(model, plan, cfg, sampler, order, epoch, 0, progress, total_scheduled,
                                     counts[0]);
    } else {
      std::vector<std::exception_ptr> errors(workers);
      std::vector<std::thread> threads;
      const std::size_t chunk = (order.size() + workers - 1) / workers;
      for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t lo = std::min(order.size(), w * chunk), hi = std::min(order.size(), lo + chunk);
        threads.emplace_back([&, w, lo, hi] {
          try {
            detail::run_units<RelaxedAccess>(model, plan, cfg, sampler,
                                             std::span<const std::size_t>(order).subspan(lo, hi - lo), epoch, w,
                                             progress, total_scheduled, counts[w]);
          } catch (...) {
            errors[w] = std::current_exception();
          }
        });
      }
      for (auto& t : threads) t.join();
      for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    }
    for (const auto& c : counts) {
      row.pairs_w += c.word;
      row.pairs_e += c.link;
      row.pairs_a += c.anchor;
    }
    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    detail::record_probe(model, plan, row);
    stats.epochs.push_back(row);
  }
  return stats;
}

template <std::floating_point Real>
std::pair<EmbeddingModel<Real>, TrainingStats> train(const KnowledgeGraphCorpus& corpus, const Vocabulary& vocab,
                                                     const TrainingConfig& cfg) {
  cfg.validate();
  if (vocab.empty()) throw ValidationError("cannot train on an empty vocabulary");
  auto model = EmbeddingModel<Real>::for_vocabulary(vocab, cfg.dimension);
  model.initialize(derive_seed(cfg.seed, 0x696e6974ULL));
  auto stats = train_into(model, corpus, vocab, cfg);
  return {std::move(model), std::move(stats)};
}

// ---------------------------------------------------------------------------
// Lookup
// ---------------------------------------------------------------------------

inline constexpr std::string_view kEntityPrefix = "ENTITY/";

/// Row of the target matrix for a word, or for an `ENTITY/`-prefixed entity id.
template <std::floating_point Real>
std::optional<std::span<const Real>> embedding_of(const EmbeddingModel<Real>& model, std::string_view id,
                                                  const Vocabulary& vocab) {
  std::optional<std::size_t> row;
  if (id.starts_with(kEntityPrefix))
    row = vocab.entity_index(id.substr(kEntityPrefix.size()));
  else
    row = vocab.word_index(id);
  if (!row) return std::nullopt;
  return model.target(*row);
}

/// Entity lookup through the corpus alias map.
template <std::floating_point Real>
std::optional<std::span<const Real>> entity_embedding(const EmbeddingModel<Real>& model, std::string_view entity,
                                                      const Vocabulary& vocab,
                                                      const KnowledgeGraphCorpus* corpus = nullptr) {
  const EntityId id = corpus ? resolve_entity_id(entity, *corpus) : EntityId(entity);
  auto row = vocab.entity_index(id);
  if (!row) return std::nullopt;
  return model.target(*row);
}

}  // namespace geeer
