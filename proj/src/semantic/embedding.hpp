// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "pose_io/manifest.hpp"

namespace mgc {

inline constexpr int kWordEmbeddingDim = 300;

/// token -> dense vector map (GloVe-style text format).
class EmbeddingTable {
 public:
  explicit EmbeddingTable(int dim = kWordEmbeddingDim) : dim_(dim) {}

  int dim() const { return dim_; }
  std::size_t size() const { return index_.size(); }

  /// Throws Validation on dimension mismatch, non-finite entries or a
  /// duplicate token.
  void insert(std::string token, std::span<const float> vec);
  /// nullptr if absent.
  const float* find(std::string_view token) const;

 private:
  int dim_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<float> storage_;
};

/// One token per line followed by `dim` space-separated numbers. Blank lines
/// are skipped. Errors name the 1-based line number.
EmbeddingTable load_embedding_table(const std::filesystem::path& path,
                                    int dim = kWordEmbeddingDim);
EmbeddingTable parse_embedding_table(std::string_view text, int dim = kWordEmbeddingDim);

/// Lower-cased label tokens split on whitespace, '-' and '_'.
std::vector<std::string> label_tokens(std::string_view text);

struct LabelEmbedding {
  std::vector<float> vector;
  std::vector<std::string> missing_tokens;
  bool fell_back_to_zero = false;
};

/// Mean of the in-table token vectors; zero vector when none is found.
/// Missing tokens are reported instead of raising.
LabelEmbedding embed_label(std::string_view text, const EmbeddingTable& table);

/// N x dim, row-major, row i = embed_label(vocab[i]).
struct LabelEmbeddingMatrix {
  int rows = 0;
  int dim = 0;
  std::vector<float> values;
  std::vector<std::string> warnings;

  std::span<const float> row(int i) const {
    return {values.data() + static_cast<std::size_t>(i) * dim, static_cast<std::size_t>(dim)};
  }
};

LabelEmbeddingMatrix build_label_matrix(const LabelVocabulary& vocab, const EmbeddingTable& table);

/// Deterministic pseudo-word-vectors: every token gets a vector seeded from
/// its own hash, so tables are reproducible without pretrained downloads.
std::vector<float> synthetic_token_vector(std::string_view token, int dim, std::uint64_t seed);
EmbeddingTable synthetic_embedding_table(std::span<const std::string> tokens, int dim,
                                         std::uint64_t seed);
/// Writes a table in the text format read by load_embedding_table, tokens in
/// the order given.
void write_embedding_table(const EmbeddingTable& table, std::span<const std::string> tokens,
                           const std::filesystem::path& path);

}  // namespace mgc
