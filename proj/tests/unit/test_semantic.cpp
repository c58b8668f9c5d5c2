// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "common/rng.hpp"
#include "semantic/embedding.hpp"
#include "unit/helpers.hpp"

using namespace mgc;
using testutil::error_kind_of;
using testutil::error_message_of;

namespace {

std::string line(const std::string& tok, int dim, float base) {
  std::string s = tok;
  for (int i = 0; i < dim; ++i) s += " " + std::to_string(base + 0.5f * static_cast<float>(i));
  return s + "\n";
}

EmbeddingTable toy3() {
  return parse_embedding_table("touching 1 2 3\nhead 3 0 -1\nfolding 0.5 0.5 0.5\n", 3);
}

}  // namespace

TEST_CASE("3-line file parses into 3 tokens") {
  const auto text = line("alpha", 300, 0.0f) + line("beta", 300, 1.0f) + line("gamma", 300, 2.0f);
  const auto t = parse_embedding_table(text);
  CHECK(t.size() == 3);
  CHECK(t.dim() == 300);
  REQUIRE(t.find("beta") != nullptr);
  CHECK(t.find("beta")[2] == 2.0f);
  CHECK(t.find("delta") == nullptr);
}

TEST_CASE("a 299-number line is a dimension error at that line") {
  const auto text = line("alpha", 300, 0.0f) + line("beta", 299, 1.0f);
  const auto msg = error_message_of([&] { parse_embedding_table(text); });
  CHECK(msg.find("line 2") != std::string::npos);
  CHECK(msg.find("299") != std::string::npos);
  CHECK(error_kind_of([&] { parse_embedding_table(text); }) == ErrorKind::Validation);
}

TEST_CASE("empty file gives an empty table") {
  const auto t = parse_embedding_table("");
  CHECK(t.size() == 0);
  CHECK(t.find("anything") == nullptr);
  const auto e = embed_label("touching head", t);
  CHECK(e.fell_back_to_zero);
}

TEST_CASE("table parse errors") {
  CHECK(error_kind_of([] { parse_embedding_table("tok 1 2 x\n", 3); }) == ErrorKind::Parse);
  CHECK(error_message_of([] { parse_embedding_table("a 1 2 3\na 4 5 6\n", 3); })
            .find("duplicate") != std::string::npos);
  CHECK(error_kind_of([] { parse_embedding_table("a 1 nan 3\n", 3); }) == ErrorKind::Validation);
  CHECK(parse_embedding_table("\n  \na 1 2 3\r\n\n", 3).size() == 1);
  const auto dir = testutil::scratch("semantic_missing");
  CHECK(error_kind_of([&] { load_embedding_table(dir / "nope.txt"); }) == ErrorKind::Io);
}

TEST_CASE("label tokenisation") {
  CHECK(label_tokens("Touching  head") == std::vector<std::string>{"touching", "head"});
  CHECK(label_tokens("non-MG") == std::vector<std::string>{"non", "mg"});
  CHECK(label_tokens("a_b c") == std::vector<std::string>{"a", "b", "c"});
  CHECK(label_tokens("  ").empty());
}

TEST_CASE("embed_label") {
  const auto t = toy3();
  SUBCASE("single token returns that vector exactly") {
    const auto e = embed_label("head", t);
    CHECK(e.vector == std::vector<float>{3, 0, -1});
    CHECK(e.missing_tokens.empty());
    CHECK(!e.fell_back_to_zero);
  }
  SUBCASE("two tokens average elementwise") {
    const auto e = embed_label("touching head", t);
    CHECK(e.vector == std::vector<float>{2, 1, 1});
  }
  SUBCASE("missing tokens are skipped and reported") {
    const auto e = embed_label("touching nose", t);
    CHECK(e.vector == std::vector<float>{1, 2, 3});
    CHECK(e.missing_tokens == std::vector<std::string>{"nose"});
  }
  SUBCASE("no known token falls back to zero") {
    const auto e = embed_label("xyz abc", t);
    CHECK(e.vector == std::vector<float>{0, 0, 0});
    CHECK(e.fell_back_to_zero);
  }
  SUBCASE("deterministic and order independent") {
    const auto a = embed_label("touching head", t);
    const auto b = embed_label("head touching", t);
    CHECK(a.vector == b.vector);
    CHECK(embed_label("touching head", t).vector == a.vector);
  }
}

TEST_CASE("label matrix") {
  std::vector<std::string> tokens{"touching", "head", "folding", "arms", "rubbing", "hands"};
  const auto table = synthetic_embedding_table(tokens, kWordEmbeddingDim, 3);
  LabelVocabulary vocab{{"touching head", "folding arms", "rubbing hands", "head"}};

  SUBCASE("full coverage") {
    const auto m = build_label_matrix(vocab, table);
    CHECK(m.rows == 4);
    CHECK(m.dim == 300);
    CHECK(m.values.size() == 4u * 300);
    CHECK(m.warnings.empty());
    const float* head = table.find("head");
    CHECK(std::equal(m.row(3).begin(), m.row(3).end(), head));
  }
  SUBCASE("one unknown label") {
    vocab.id_to_text[2] = "zzz";
    const auto m = build_label_matrix(vocab, table);
    REQUIRE(m.warnings.size() == 1);
    CHECK(m.warnings[0].find("zzz") != std::string::npos);
    CHECK(std::all_of(m.row(2).begin(), m.row(2).end(), [](float v) { return v == 0.0f; }));
  }
  SUBCASE("permuting the vocab permutes rows") {
    const auto m = build_label_matrix(vocab, table);
    std::vector<int> perm{2, 0, 3, 1};
    LabelVocabulary pv;
    for (int i : perm) pv.id_to_text.push_back(vocab.id_to_text[i]);
    const auto pm = build_label_matrix(pv, table);
    for (int r = 0; r < 4; ++r) {
      CHECK(std::equal(pm.row(r).begin(), pm.row(r).end(), m.row(perm[r]).begin()));
    }
  }
}

TEST_CASE("synthetic table round trips through the text format") {
  std::vector<std::string> tokens{"touching", "head", "non", "mg"};
  const auto table = synthetic_embedding_table(tokens, kWordEmbeddingDim, 42);
  const auto dir = testutil::scratch("semantic_io");
  write_embedding_table(table, tokens, dir / "e.txt");
  const auto back = load_embedding_table(dir / "e.txt");
  CHECK(back.size() == 4);
  for (const auto& tok : tokens) {
    CHECK(std::equal(table.find(tok), table.find(tok) + 300, back.find(tok)));
  }
  CHECK(synthetic_token_vector("head", 300, 42) ==
        std::vector<float>(table.find("head"), table.find("head") + 300));
  CHECK(synthetic_token_vector("head", 300, 42) != synthetic_token_vector("head", 300, 43));
}

TEST_CASE("table insert checks") {
  EmbeddingTable t(3);
  const std::vector<float> ok{1, 2, 3};
  t.insert("a", ok);
  CHECK(error_kind_of([&] { t.insert("a", ok); }) == ErrorKind::Validation);
  const std::vector<float> short_vec{1, 2};
  CHECK(error_kind_of([&] { t.insert("b", short_vec); }) == ErrorKind::Validation);
}
