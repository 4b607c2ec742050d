#pragma once

// Synthetic knowledge-graph corpora for training tests: entities split into
// communities with dense intra-community links and community-flavoured text.

#include <algorithm>
#include <random>
#include <string>
#include <vector>

#include "geeer/geeer.hpp"

namespace synthetic {

struct CommunityCorpusShape {
  std::size_t communities = 2;
  std::size_t entities_per_community = 30;
  std::size_t documents = 200;
  std::size_t tokens_per_document = 10;
  std::size_t community_words = 15;  // topical words per community
  std::size_t shared_words = 60;     // background words shared by all communities
  double topical_fraction = 0.3;     // chance a token is topical
  double intra_link_probability = 0.5;
  double cross_link_probability = 0.01;
  std::size_t anchors_per_document = 1;
  std::uint64_t seed = 1;
};

inline std::string entity_name(std::size_t community, std::size_t i) {
  return "C" + std::to_string(community) + "_E" + std::to_string(i);
}

inline std::size_t community_of(const std::string& entity) { return static_cast<std::size_t>(std::stoul(entity.substr(1))); }

/// Renders a corpus in the line-record format.
inline std::string community_corpus(const CommunityCorpusShape& shape) {
  std::mt19937_64 rng(shape.seed);
  auto uniform = [&] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
  auto pick = [&](std::size_t n) { return static_cast<std::size_t>(rng() % n); };
  std::string out = "# synthetic community corpus\n";

  for (std::size_t c = 0; c < shape.communities; ++c)
    for (std::size_t i = 0; i < shape.entities_per_community; ++i)
      for (std::size_t c2 = 0; c2 < shape.communities; ++c2)
        for (std::size_t j = 0; j < shape.entities_per_community; ++j) {
          if (c == c2 && i == j) continue;
          const double p = c == c2 ? shape.intra_link_probability : shape.cross_link_probability;
          if (uniform() < p) out += "LINK\t" + entity_name(c, i) + '\t' + entity_name(c2, j) + '\n';
        }

  for (std::size_t d = 0; d < shape.documents; ++d) {
    const std::size_t c = d % shape.communities;
    const std::size_t e = pick(shape.entities_per_community);
    std::vector<std::string> tokens;
    for (std::size_t t = 0; t < shape.tokens_per_document; ++t) {
      if (uniform() < shape.topical_fraction)
        tokens.push_back("t" + std::to_string(c) + "_" + std::to_string(pick(shape.community_words)));
      else
        tokens.push_back("s" + std::to_string(pick(shape.shared_words)));
    }
    std::vector<std::pair<std::size_t, std::string>> anchors;
    for (std::size_t a = 0; a < shape.anchors_per_document && tokens.size() > 2; ++a) {
      const std::size_t pos = 1 + pick(tokens.size() - 2);
      if (std::any_of(anchors.begin(), anchors.end(), [&](const auto& x) { return x.first == pos; })) continue;
      const std::size_t target = pick(shape.entities_per_community);
      tokens[pos] = "m" + std::to_string(c) + "_" + std::to_string(target);
      anchors.emplace_back(pos, entity_name(c, target));
    }
    out += "DOC\t" + entity_name(c, e) + '\t';
    for (std::size_t t = 0; t < tokens.size(); ++t) out += (t ? " " : "") + tokens[t];
    out += '\n';
    for (const auto& [pos, target] : anchors) out += "ANCHOR\t" + target + '\t' + std::to_string(pos) + "\t1\n";
  }
  return out;
}

/// Qrels where each community forms one query's relevant set.
inline geeer::Qrels community_qrels(const CommunityCorpusShape& shape) {
  geeer::Qrels q;
  for (std::size_t c = 0; c < shape.communities; ++c)
    for (std::size_t i = 0; i < shape.entities_per_community; ++i)
      q.set("community" + std::to_string(c), entity_name(c, i), 1);
  return q;
}

}  // namespace synthetic
