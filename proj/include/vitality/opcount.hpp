#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace vitality::opcount {

struct AttentionDims {
  std::uint64_t n = 1;       // tokens
  std::uint64_t d = 1;       // per-head feature dim
  std::uint64_t h = 1;       // heads
  std::uint64_t layers = 1;

  void validate() const;
  friend bool operator==(const AttentionDims&, const AttentionDims&) = default;
};

struct OpCounts {
  std::uint64_t mul = 0;
  std::uint64_t add = 0;
  std::uint64_t div = 0;
  std::uint64_t exp = 0;

  OpCounts& operator+=(const OpCounts& o);
  friend bool operator==(const OpCounts&, const OpCounts&) = default;
};

// One stage of a (possibly hierarchical) ViT. `vanilla_tokens` lets the
// softmax baseline be counted at a different token count than the Taylor
// path, e.g. with and without a class token.
struct Stage {
  AttentionDims dims;
  std::optional<std::uint64_t> vanilla_tokens;
  std::uint64_t mlp_ratio = 4;

  AttentionDims vanilla_dims() const;
  friend bool operator==(const Stage&, const Stage&) = default;
};

struct StagedModel {
  std::string name;
  std::string provenance;
  std::vector<Stage> stages;

  void validate() const;
};

// mul = 2 n^2 d, add = 2 n^2 d + n^2, div = exp = n^2, each times h * layers.
OpCounts count_vanilla(const AttentionDims& dims);

// mul = 2 n d^2 + n d, add = 2 n d^2 + 7 n d, div = n d + d, exp = 0,
// each times h * layers.
OpCounts count_taylor(const AttentionDims& dims);

struct Ratios {
  double r_mul = 0.0;
  double r_add = 0.0;
  double r_div = 0.0;
};

// Closed forms of vanilla/Taylor count ratios for a single head.
Ratios ratio_formulas(std::uint64_t n, std::uint64_t d);

struct ModelRow {
  std::string name;
  OpCounts taylor;
  OpCounts vanilla;
  Ratios ratios;  // vanilla / taylor of the summed counts
};

std::vector<ModelRow> model_table(const std::vector<StagedModel>& models);

// 178831872 -> "178.8"
std::string format_millions(std::uint64_t count);
// 3.0698 -> "(3.1×)"
std::string format_ratio(double ratio);

std::string render_table_text(const std::vector<ModelRow>& rows);
std::string render_table_csv(const std::vector<ModelRow>& rows);

}  // namespace vitality::opcount
