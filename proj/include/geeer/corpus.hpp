#pragma once

// Knowledge-graph corpus ingestion, joint word/entity vocabulary, alias resolution
// and the missing-entity coverage report.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "geeer/error.hpp"
#include "geeer/text_io.hpp"

namespace geeer {

using EntityId = std::string;

struct Anchor {
  EntityId target;
  std::size_t start = 0;
  std::size_t length = 1;

  std::size_t end() const { return start + length; }
};

struct Document {
  std::optional<EntityId> doc_entity;
  std::vector<std::string> tokens;
  std::vector<Anchor> anchors;  // sorted by start, non-overlapping
};

/// Parsed corpus. All entity ids stored here are already canonical (alias-resolved).
struct KnowledgeGraphCorpus {
  std::vector<Document> documents;
  /// target -> set of sources linking to it (incoming-link neighborhood).
  std::map<EntityId, std::set<EntityId>> link_graph;
  /// redirect source -> canonical target; targets are never sources.
  std::map<EntityId, EntityId> alias_map;
  std::set<EntityId> disambiguation_ids;
  /// Every canonical entity mentioned by a DOC, ANCHOR, LINK or DISAMBIG record.
  std::set<EntityId> entities;
  /// Incoming anchor occurrences plus distinct declared LINK edges, per entity.
  std::map<EntityId, std::uint64_t> entity_link_counts;

  bool has_entity(std::string_view id) const { return entities.count(EntityId(id)) != 0; }

  /// Outgoing neighbors, derived from link_graph.
  std::map<EntityId, std::set<EntityId>> outgoing() const {
    std::map<EntityId, std::set<EntityId>> out;
    for (const auto& [dst, sources] : link_graph)
      for (const auto& src : sources) out[src].insert(dst);
    return out;
  }
};

/// Returns alias_map[id] if present, else id.
inline EntityId resolve_entity_id(std::string_view id, const std::map<EntityId, EntityId>& alias_map) {
  auto it = alias_map.find(EntityId(id));
  return it == alias_map.end() ? EntityId(id) : it->second;
}

inline EntityId resolve_entity_id(std::string_view id, const KnowledgeGraphCorpus& corpus) {
  return resolve_entity_id(id, corpus.alias_map);
}

namespace detail {

inline void check_entity_id(std::string_view id, std::size_t line) {
  if (id.empty()) throw ParseError("empty entity id", line);
  if (text::has_whitespace(id)) throw ParseError("entity id contains whitespace: '" + std::string(id) + "'", line);
}

/// Collapses redirect chains so every target is canonical. Throws on cycles.
inline std::map<EntityId, EntityId> close_aliases(const std::map<EntityId, EntityId>& raw) {
  std::map<EntityId, EntityId> closed;
  for (const auto& [from, first] : raw) {
    std::vector<EntityId> path{from};
    std::set<EntityId> seen{from};
    EntityId cur = first;
    while (true) {
      if (seen.count(cur)) {
        std::string cycle;
        auto pos = std::find(path.begin(), path.end(), cur);
        for (auto it = pos; it != path.end(); ++it) cycle += *it + " -> ";
        cycle += cur;
        throw ValidationError("redirect cycle in alias records: " + cycle);
      }
      auto it = raw.find(cur);
      if (it == raw.end()) break;
      path.push_back(cur);
      seen.insert(cur);
      cur = it->second;
    }
    closed.emplace(from, cur);
  }
  return closed;
}

}  // namespace detail

/// Reads the line-record corpus format:
///
///   DOC<TAB><doc_entity|-><TAB><space-separated tokens>
///   ANCHOR<TAB><target><TAB><start><TAB><length>     (attaches to the preceding DOC)
///   LINK<TAB><src><TAB><dst>
///   ALIAS<TAB><from><TAB><to>
///   DISAMBIG<TAB><id>
///
/// Lines starting with '#' and blank lines are ignored. Aliases are applied after the
/// whole input is read, so records may reference redirect sources in any order.
inline KnowledgeGraphCorpus parse_corpus(std::istream& in) {
  struct RawLink {
    EntityId src, dst;
  };
  std::vector<Document> docs;
  std::vector<std::size_t> doc_lines;
  std::vector<RawLink> links;
  std::map<EntityId, EntityId> raw_aliases;
  std::set<EntityId> disambig;

  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view view = text::strip_cr(line);
    if (view.empty() || view.front() == '#') continue;
    auto fields = text::split(view, '\t');
    const auto kind = fields[0];
    auto need = [&](std::size_t n) {
      if (fields.size() != n)
        throw ParseError(std::string(kind) + " record expects " + std::to_string(n) + " fields, got " +
                             std::to_string(fields.size()),
                         lineno);
    };
    if (kind == "DOC") {
      need(3);
      Document doc;
      if (fields[1] != "-") {
        detail::check_entity_id(fields[1], lineno);
        doc.doc_entity = EntityId(fields[1]);
      }
      for (auto tok : text::split_ws(fields[2])) doc.tokens.emplace_back(tok);
      docs.push_back(std::move(doc));
      doc_lines.push_back(lineno);
    } else if (kind == "ANCHOR") {
      need(4);
      if (docs.empty()) throw ParseError("ANCHOR record before any DOC record", lineno);
      detail::check_entity_id(fields[1], lineno);
      Anchor a;
      a.target = EntityId(fields[1]);
      if (!text::parse_int(fields[2], a.start) || !text::parse_int(fields[3], a.length))
        throw ParseError("ANCHOR start/length must be non-negative integers", lineno);
      if (a.length < 1) throw ParseError("ANCHOR length must be >= 1", lineno);
      if (a.end() > docs.back().tokens.size())
        throw ParseError("ANCHOR span [" + std::to_string(a.start) + ", " + std::to_string(a.end()) +
                             ") exceeds document length " + std::to_string(docs.back().tokens.size()),
                         lineno);
      docs.back().anchors.push_back(std::move(a));
    } else if (kind == "LINK") {
      need(3);
      detail::check_entity_id(fields[1], lineno);
      detail::check_entity_id(fields[2], lineno);
      links.push_back({EntityId(fields[1]), EntityId(fields[2])});
    } else if (kind == "ALIAS") {
      need(3);
      detail::check_entity_id(fields[1], lineno);
      detail::check_entity_id(fields[2], lineno);
      auto [it, inserted] = raw_aliases.emplace(EntityId(fields[1]), EntityId(fields[2]));
      if (!inserted && it->second != fields[2])
        throw ParseError("conflicting ALIAS targets for '" + it->first + "'", lineno);
    } else if (kind == "DISAMBIG") {
      need(2);
      detail::check_entity_id(fields[1], lineno);
      disambig.emplace(fields[1]);
    } else {
      throw ParseError("unknown record type '" + std::string(kind) + "'", lineno);
    }
  }

  KnowledgeGraphCorpus corpus;
  corpus.alias_map = detail::close_aliases(raw_aliases);
  auto canon = [&](const EntityId& id) { return resolve_entity_id(id, corpus.alias_map); };

  for (std::size_t i = 0; i < docs.size(); ++i) {
    auto& doc = docs[i];
    std::sort(doc.anchors.begin(), doc.anchors.end(),
              [](const Anchor& a, const Anchor& b) { return a.start < b.start; });
    for (std::size_t j = 1; j < doc.anchors.size(); ++j) {
      if (doc.anchors[j].start < doc.anchors[j - 1].end())
        throw ValidationError("overlapping anchors in document " + std::to_string(i) + " (line " +
                              std::to_string(doc_lines[i]) + ", entity " + doc.doc_entity.value_or("-") +
                              ")");
    }
    if (doc.doc_entity) {
      doc.doc_entity = canon(*doc.doc_entity);
      corpus.entities.insert(*doc.doc_entity);
    }
    for (auto& a : doc.anchors) {
      a.target = canon(a.target);
      corpus.entities.insert(a.target);
      ++corpus.entity_link_counts[a.target];
      if (doc.doc_entity && *doc.doc_entity != a.target) corpus.link_graph[a.target].insert(*doc.doc_entity);
    }
  }
  std::set<std::pair<EntityId, EntityId>> declared;
  for (const auto& l : links) {
    auto src = canon(l.src), dst = canon(l.dst);
    corpus.entities.insert(src);
    corpus.entities.insert(dst);
    if (src == dst) continue;
    if (declared.emplace(src, dst).second) ++corpus.entity_link_counts[dst];
    corpus.link_graph[dst].insert(src);
  }
  for (const auto& d : disambig) {
    auto id = canon(d);
    corpus.disambiguation_ids.insert(id);
    corpus.entities.insert(id);
  }
  corpus.documents = std::move(docs);
  return corpus;
}

inline KnowledgeGraphCorpus parse_corpus(const std::filesystem::path& path) {
  auto in = text::open_input(path);
  return parse_corpus(in);
}

inline KnowledgeGraphCorpus parse_corpus_string(std::string_view content) {
  std::istringstream in{std::string(content)};
  return parse_corpus(in);
}

// ---------------------------------------------------------------------------
// Vocabulary
// ---------------------------------------------------------------------------

struct VocabConfig {
  std::uint64_t min_word_count = 0;
  std::uint64_t min_entity_count = 0;
  bool include_disambiguation = true;
  /// Required when include_disambiguation is false (may be empty).
  std::optional<std::set<EntityId>> disambiguation_ids;

  void validate() const {
    if (!include_disambiguation && !disambiguation_ids)
      throw ValidationError("disambiguation_ids must be provided when disambiguation pages are excluded");
  }
};

/// Joint vocabulary. Words occupy the global index range [0, word_count()), entities
/// [word_count(), size()); both are ordered by frequency desc, then lexicographically.
class Vocabulary {
 public:
  struct Entry {
    std::string key;
    std::uint64_t count = 0;
  };

  Vocabulary() = default;
  Vocabulary(std::vector<Entry> words, std::vector<Entry> entities, VocabConfig config)
      : words_(std::move(words)), entities_(std::move(entities)), config_(std::move(config)) {
    for (std::size_t i = 0; i < words_.size(); ++i)
      if (!word_index_.emplace(words_[i].key, i).second)
        throw ValidationError("duplicate word in vocabulary: " + words_[i].key);
    for (std::size_t i = 0; i < entities_.size(); ++i)
      if (!entity_index_.emplace(entities_[i].key, words_.size() + i).second)
        throw ValidationError("duplicate entity in vocabulary: " + entities_[i].key);
  }

  std::size_t word_count() const { return words_.size(); }
  std::size_t entity_count() const { return entities_.size(); }
  std::size_t size() const { return words_.size() + entities_.size(); }
  bool empty() const { return size() == 0; }

  const std::vector<Entry>& words() const { return words_; }
  const std::vector<Entry>& entities() const { return entities_; }
  const VocabConfig& config() const { return config_; }

  std::optional<std::size_t> word_index(std::string_view w) const {
    auto it = word_index_.find(std::string(w));
    if (it == word_index_.end()) return std::nullopt;
    return it->second;
  }
  std::optional<std::size_t> entity_index(std::string_view e) const {
    auto it = entity_index_.find(std::string(e));
    if (it == entity_index_.end()) return std::nullopt;
    return it->second;
  }

  bool is_entity(std::size_t index) const { return index >= words_.size(); }
  const std::string& key(std::size_t index) const {
    return is_entity(index) ? entities_.at(index - words_.size()).key : words_.at(index).key;
  }
  std::uint64_t count(std::size_t index) const {
    return is_entity(index) ? entities_.at(index - words_.size()).count : words_.at(index).count;
  }

  /// FNV-1a over the ordered entries; identifies the layout an embedding model was built for.
  std::uint64_t fingerprint() const {
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&h](std::string_view s) {
      for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
      }
      h ^= 0xff;
      h *= 1099511628211ULL;
    };
    for (const auto& w : words_) mix(w.key);
    mix("\x01");
    for (const auto& e : entities_) mix(e.key);
    return h;
  }

 private:
  std::vector<Entry> words_;
  std::vector<Entry> entities_;
  VocabConfig config_;
  std::unordered_map<std::string, std::size_t> word_index_;
  std::unordered_map<std::string, std::size_t> entity_index_;
};

namespace detail {
inline void sort_entries(std::vector<Vocabulary::Entry>& v) {
  std::sort(v.begin(), v.end(), [](const Vocabulary::Entry& a, const Vocabulary::Entry& b) {
    if (a.count != b.count) return a.count > b.count;
    return a.key < b.key;
  });
}
}  // namespace detail

inline Vocabulary build_vocabulary(const KnowledgeGraphCorpus& corpus, const VocabConfig& config) {
  config.validate();
  std::map<std::string, std::uint64_t> word_freq;
  for (const auto& doc : corpus.documents)
    for (const auto& tok : doc.tokens) ++word_freq[tok];

  std::vector<Vocabulary::Entry> words;
  for (const auto& [w, n] : word_freq)
    if (n >= config.min_word_count) words.push_back({w, n});

  std::vector<Vocabulary::Entry> entities;
  for (const auto& e : corpus.entities) {
    auto it = corpus.entity_link_counts.find(e);
    std::uint64_t n = it == corpus.entity_link_counts.end() ? 0 : it->second;
    if (n < config.min_entity_count) continue;
    if (!config.include_disambiguation && config.disambiguation_ids->count(e)) continue;
    entities.push_back({e, n});
  }
  detail::sort_entries(words);
  detail::sort_entries(entities);
  return Vocabulary(std::move(words), std::move(entities), config);
}

/// Text form: a config comment line, then one `WORD|ENTITY<TAB>key<TAB>count` line per
/// entry in index order.
inline std::string render_vocabulary(const Vocabulary& vocab) {
  std::ostringstream out;
  const auto& c = vocab.config();
  out << "#vocab\tmin_word_count=" << c.min_word_count << "\tmin_entity_count=" << c.min_entity_count
      << "\tdisambiguation=" << (c.include_disambiguation ? "true" : "false") << '\n';
  for (const auto& w : vocab.words()) out << "WORD\t" << w.key << '\t' << w.count << '\n';
  for (const auto& e : vocab.entities()) out << "ENTITY\t" << e.key << '\t' << e.count << '\n';
  return out.str();
}

inline void save_vocabulary(const Vocabulary& vocab, const std::filesystem::path& path) {
  text::write_file_atomic(path, render_vocabulary(vocab));
}

inline Vocabulary load_vocabulary(std::istream& in) {
  std::vector<Vocabulary::Entry> words, entities;
  VocabConfig config;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view view = text::strip_cr(line);
    if (view.empty()) continue;
    auto fields = text::split(view, '\t');
    if (fields[0] == "#vocab") {
      for (std::size_t i = 1; i < fields.size(); ++i) {
        auto kv = text::split(fields[i], '=');
        if (kv.size() != 2) throw ParseError("bad vocabulary header field", lineno);
        if (kv[0] == "min_word_count" && !text::parse_int(kv[1], config.min_word_count))
          throw ParseError("bad min_word_count", lineno);
        if (kv[0] == "min_entity_count" && !text::parse_int(kv[1], config.min_entity_count))
          throw ParseError("bad min_entity_count", lineno);
        if (kv[0] == "disambiguation") config.include_disambiguation = kv[1] == "true";
      }
      continue;
    }
    if (view.front() == '#') continue;
    if (fields.size() != 3) throw ParseError("vocabulary line expects 3 fields", lineno);
    Vocabulary::Entry e{std::string(fields[1]), 0};
    if (!text::parse_int(fields[2], e.count)) throw ParseError("bad count", lineno);
    if (fields[0] == "WORD") {
      if (!entities.empty()) throw ParseError("WORD entry after ENTITY entries", lineno);
      words.push_back(std::move(e));
    } else if (fields[0] == "ENTITY") {
      entities.push_back(std::move(e));
    } else {
      throw ParseError("unknown vocabulary entry kind", lineno);
    }
  }
  if (!config.include_disambiguation) config.disambiguation_ids.emplace();
  return Vocabulary(std::move(words), std::move(entities), std::move(config));
}

inline Vocabulary load_vocabulary(const std::filesystem::path& path) {
  auto in = text::open_input(path);
  return load_vocabulary(in);
}

// ---------------------------------------------------------------------------
// Coverage
// ---------------------------------------------------------------------------

struct MissingEntityReport {
  std::vector<EntityId> covered;
  std::vector<EntityId> no_emb;   // resolvable to a corpus entity, filtered from the vocabulary
  std::vector<EntityId> no_page;  // not resolvable to any corpus entity

  std::size_t total() const { return covered.size() + no_emb.size() + no_page.size(); }
};

inline MissingEntityReport coverage_report(const Vocabulary& vocab, const std::set<EntityId>& assessed,
                                           const KnowledgeGraphCorpus& corpus) {
  MissingEntityReport report;
  for (const auto& id : assessed) {
    auto canonical = resolve_entity_id(id, corpus);
    if (vocab.entity_index(canonical))
      report.covered.push_back(id);
    else if (corpus.has_entity(canonical))
      report.no_emb.push_back(id);
    else
      report.no_page.push_back(id);
  }
  return report;
}

inline std::string render_report(const MissingEntityReport& r) {
  std::ostringstream out;
  for (const auto& id : r.covered) out << "covered\t" << id << '\n';
  for (const auto& id : r.no_emb) out << "no_emb\t" << id << '\n';
  for (const auto& id : r.no_page) out << "no_page\t" << id << '\n';
  out << "TOTAL\t" << r.covered.size() << '\t' << r.no_emb.size() << '\t' << r.no_page.size() << '\n';
  return out.str();
}

}  // namespace geeer
