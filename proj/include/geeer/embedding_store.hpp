#pragma once

// Read-only embedding table keyed by word or entity id, and the text embedding file:
//
//   <count> <dimension>
//   <id> <v_1> ... <v_d>
//
// Values use 6 significant digits; entity ids carry the ENTITY/ prefix.

#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "geeer/corpus.hpp"
#include "geeer/embedding.hpp"
#include "geeer/error.hpp"
#include "geeer/text_io.hpp"

namespace geeer {

class EmbeddingStore {
 public:
  EmbeddingStore() = default;
  explicit EmbeddingStore(std::size_t dimension) : dim_(dimension) {
    if (dimension < 1) throw ValidationError("embedding dimension must be >= 1");
  }

  /// Copies the target rows of a trained model.
  template <std::floating_point Real>
  static EmbeddingStore from_model(const EmbeddingModel<Real>& model, const Vocabulary& vocab) {
    if (model.vocab_fingerprint() != 0 && model.vocab_fingerprint() != vocab.fingerprint())
      throw ValidationError("model was not trained on this vocabulary");
    EmbeddingStore store(model.dimension());
    for (std::size_t i = 0; i < vocab.size(); ++i) {
      const auto row = model.target(i);
      std::vector<double> v(row.begin(), row.end());
      if (vocab.is_entity(i))
        store.add_entity(vocab.key(i), v);
      else
        store.add_word(vocab.key(i), v);
    }
    return store;
  }

  std::size_t dimension() const { return dim_; }
  std::size_t size() const { return ids_.size(); }

  void add_word(std::string_view word, std::span<const double> v) { add(std::string(word), v); }
  void add_entity(std::string_view entity, std::span<const double> v) {
    add(std::string(kEntityPrefix) + std::string(entity), v);
  }

  /// Lookup by file id (words plain, entities ENTITY/-prefixed).
  std::optional<std::span<const double>> find(std::string_view id) const {
    auto it = index_.find(std::string(id));
    if (it == index_.end()) return std::nullopt;
    return row(it->second);
  }

  std::optional<std::span<const double>> word(std::string_view w) const { return find(w); }

  /// Entity lookup, resolving through the alias map first when one is attached.
  std::optional<std::span<const double>> entity(std::string_view e) const {
    const EntityId id = aliases_ ? resolve_entity_id(e, *aliases_) : EntityId(e);
    return find(std::string(kEntityPrefix) + id);
  }

  void set_aliases(std::map<EntityId, EntityId> aliases) { aliases_ = std::move(aliases); }

  const std::string& id(std::size_t i) const { return ids_.at(i); }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * dim_, dim_}; }

 private:
  void add(std::string id, std::span<const double> v) {
    if (v.size() != dim_)
      throw ValidationError("vector for '" + id + "' has dimension " + std::to_string(v.size()) + ", expected " +
                            std::to_string(dim_));
    if (!index_.emplace(id, ids_.size()).second) throw ValidationError("duplicate embedding id '" + id + "'");
    ids_.push_back(std::move(id));
    data_.insert(data_.end(), v.begin(), v.end());
  }

  std::size_t dim_ = 1;
  std::vector<std::string> ids_;
  std::vector<double> data_;
  std::unordered_map<std::string, std::size_t> index_;
  std::optional<std::map<EntityId, EntityId>> aliases_;
};

namespace detail {
inline void append_row(std::string& out, std::string_view id, auto values) {
  out += id;
  for (auto x : values) {
    out += ' ';
    out += text::format_g(static_cast<double>(x), 6);
  }
  out += '\n';
}
}  // namespace detail

inline std::string render_embeddings(const EmbeddingStore& store) {
  std::string out = std::to_string(store.size()) + ' ' + std::to_string(store.dimension()) + '\n';
  for (std::size_t i = 0; i < store.size(); ++i) detail::append_row(out, store.id(i), store.row(i));
  return out;
}

template <std::floating_point Real>
std::string render_embeddings(const EmbeddingModel<Real>& model, const Vocabulary& vocab) {
  std::string out = std::to_string(vocab.size()) + ' ' + std::to_string(model.dimension()) + '\n';
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    const std::string id = vocab.is_entity(i) ? std::string(kEntityPrefix) + vocab.key(i) : vocab.key(i);
    detail::append_row(out, id, model.target(i));
  }
  return out;
}

template <std::floating_point Real>
void save_embeddings(const EmbeddingModel<Real>& model, const Vocabulary& vocab, const std::filesystem::path& path) {
  text::write_file_atomic(path, render_embeddings(model, vocab));
}

inline void save_embeddings(const EmbeddingStore& store, const std::filesystem::path& path) {
  text::write_file_atomic(path, render_embeddings(store));
}

inline EmbeddingStore load_embeddings(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("missing embedding header", 1);
  auto header = text::split_ws(text::strip_cr(line));
  std::size_t count = 0, dim = 0;
  if (header.size() != 2 || !text::parse_int(header[0], count) || !text::parse_int(header[1], dim) || dim < 1)
    throw ParseError("embedding header must be '<count> <dimension>'", 1);
  EmbeddingStore store(dim);
  std::vector<double> v(dim);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    auto view = text::strip_cr(line);
    if (view.empty()) continue;
    auto fields = text::split(view, ' ');
    if (fields.size() != dim + 1)
      throw ParseError("expected id and " + std::to_string(dim) + " values, got " +
                           std::to_string(fields.size()) + " fields",
                       lineno);
    for (std::size_t k = 0; k < dim; ++k)
      if (!text::parse_double(fields[k + 1], v[k]))
        throw ParseError("non-numeric value '" + std::string(fields[k + 1]) + "'", lineno);
    if (store.find(fields[0])) throw ParseError("duplicate id '" + std::string(fields[0]) + "'", lineno);
    if (fields[0].starts_with(kEntityPrefix))
      store.add_entity(fields[0].substr(kEntityPrefix.size()), v);
    else
      store.add_word(fields[0], v);
  }
  if (store.size() != count)
    throw ParseError("header declares " + std::to_string(count) + " rows, file has " + std::to_string(store.size()));
  return store;
}

inline EmbeddingStore load_embeddings(const std::filesystem::path& path) {
  auto in = text::open_input(path);
  return load_embeddings(in);
}

inline EmbeddingStore load_embeddings_string(std::string_view content) {
  std::istringstream in{std::string(content)};
  return load_embeddings(in);
}

}  // namespace geeer
