// SPDX-License-Identifier: Apache-2.0
#include "semantic/embedding.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "common/error.hpp"
#include "common/hash.hpp"
#include "common/rng.hpp"

namespace mgc {

void EmbeddingTable::insert(std::string token, std::span<const float> vec) {
  require(static_cast<int>(vec.size()) == dim_, ErrorKind::Validation,
          "embedding '" + token + "': expected " + std::to_string(dim_) + " values, got " +
              std::to_string(vec.size()));
  for (float v : vec) {
    require(std::isfinite(v), ErrorKind::Validation, "embedding '" + token + "': non-finite value");
  }
  const auto slot = index_.size();
  auto [it, inserted] = index_.emplace(std::move(token), slot);
  require(inserted, ErrorKind::Validation, "duplicate token '" + it->first + "'");
  storage_.insert(storage_.end(), vec.begin(), vec.end());
}

const float* EmbeddingTable::find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return nullptr;
  return storage_.data() + it->second * static_cast<std::size_t>(dim_);
}

EmbeddingTable parse_embedding_table(std::string_view text, int dim) {
  require(dim >= 1, ErrorKind::InvalidArgument, "embedding dim must be >= 1");
  EmbeddingTable table(dim);
  std::vector<float> vec;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    auto line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;

    const auto where = "embeddings line " + std::to_string(line_no) + ": ";
    std::size_t p = line.find_first_not_of(" \t");
    std::size_t q = line.find_first_of(" \t", p);
    std::string token(line.substr(p, q == std::string_view::npos ? line.size() - p : q - p));
    vec.clear();
    p = q;
    while (p != std::string_view::npos) {
      p = line.find_first_not_of(" \t", p);
      if (p == std::string_view::npos) break;
      q = line.find_first_of(" \t", p);
      const auto field = line.substr(p, q == std::string_view::npos ? line.size() - p : q - p);
      float v = 0.0f;
      const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
      require(ec == std::errc() && ptr == field.data() + field.size(), ErrorKind::Parse,
              where + "bad number '" + std::string(field) + "'");
      vec.push_back(v);
      p = q;
    }
    require(static_cast<int>(vec.size()) == dim, ErrorKind::Validation,
            where + "expected " + std::to_string(dim) + " values, got " +
                std::to_string(vec.size()));
    try {
      table.insert(std::move(token), vec);
    } catch (const Error& e) {
      fail(e.kind(), where + e.what());
    }
  }
  return table;
}

EmbeddingTable load_embedding_table(const std::filesystem::path& path, int dim) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot open embeddings " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_embedding_table(ss.str(), dim);
}

std::vector<std::string> label_tokens(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    const auto uc = static_cast<unsigned char>(ch);
    if (std::isspace(uc) || ch == '-' || ch == '_') {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(static_cast<char>(std::tolower(uc)));
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

LabelEmbedding embed_label(std::string_view text, const EmbeddingTable& table) {
  LabelEmbedding out;
  const auto dim = static_cast<std::size_t>(table.dim());
  std::vector<double> acc(dim, 0.0);
  int hits = 0;
  for (const auto& tok : label_tokens(text)) {
    const float* v = table.find(tok);
    if (!v) {
      out.missing_tokens.push_back(tok);
      continue;
    }
    for (std::size_t d = 0; d < dim; ++d) acc[d] += v[d];
    ++hits;
  }
  out.vector.assign(dim, 0.0f);
  if (hits == 0) {
    out.fell_back_to_zero = true;
    return out;
  }
  for (std::size_t d = 0; d < dim; ++d) out.vector[d] = static_cast<float>(acc[d] / hits);
  return out;
}

LabelEmbeddingMatrix build_label_matrix(const LabelVocabulary& vocab, const EmbeddingTable& table) {
  require(vocab.size() >= 1, ErrorKind::InvalidArgument, "build_label_matrix: empty vocab");
  LabelEmbeddingMatrix m;
  m.rows = vocab.size();
  m.dim = table.dim();
  m.values.reserve(static_cast<std::size_t>(m.rows) * m.dim);
  for (int i = 0; i < m.rows; ++i) {
    const auto& text = vocab.id_to_text[i];
    auto e = embed_label(text, table);
    if (e.fell_back_to_zero) {
      m.warnings.push_back("label " + std::to_string(i) + " '" + text +
                           "': no token in embedding table, using zero vector");
    } else if (!e.missing_tokens.empty()) {
      std::string miss;
      for (const auto& t : e.missing_tokens) miss += (miss.empty() ? "" : ", ") + t;
      m.warnings.push_back("label " + std::to_string(i) + " '" + text +
                           "': skipped tokens not in table: " + miss);
    }
    m.values.insert(m.values.end(), e.vector.begin(), e.vector.end());
  }
  return m;
}

std::vector<float> synthetic_token_vector(std::string_view token, int dim, std::uint64_t seed) {
  Rng rng(derive_seed(seed, {fnv1a(token)}));
  std::vector<float> v(static_cast<std::size_t>(dim));
  // Scale roughly matches pretrained GloVe components.
  for (auto& x : v) x = static_cast<float>(std::round(0.4 * rng.normal() * 1e5) / 1e5);
  return v;
}

EmbeddingTable synthetic_embedding_table(std::span<const std::string> tokens, int dim,
                                         std::uint64_t seed) {
  EmbeddingTable t(dim);
  for (const auto& tok : tokens) {
    if (t.find(tok)) continue;
    t.insert(tok, synthetic_token_vector(tok, dim, seed));
  }
  return t;
}

void write_embedding_table(const EmbeddingTable& table, std::span<const std::string> tokens,
                           const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot write " + path.string());
  char buf[64];
  for (const auto& tok : tokens) {
    const float* v = table.find(tok);
    require(v != nullptr, ErrorKind::InvalidArgument, "token '" + tok + "' not in table");
    out << tok;
    for (int d = 0; d < table.dim(); ++d) {
      const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v[d]);
      out << ' ' << std::string_view(buf, static_cast<std::size_t>(ptr - buf));
    }
    out << '\n';
  }
  require(static_cast<bool>(out), ErrorKind::Io, "write failed: " + path.string());
}

}  // namespace mgc
