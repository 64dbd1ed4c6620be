#pragma once

#include <cstdint>
#include <filesystem>

#include "ersft/embedding_model.hpp"
#include "ersft/tabular_policy.hpp"
#include "json.hpp"

namespace ersft {

struct PolicyShape {
  int n_contexts = 1;
  int n_actions = 2;
  int dim = 8;
  ContextEncoding encoding = ContextEncoding::kLearnedTable;
  double init_scale = 0.1;
};

/// Embedding-softmax policy: pi(.|s) = softmax(item_embeddings x(s) + item_bias).
class ParametricPolicy {
 public:
  ParametricPolicy() = default;
  ParametricPolicy(const PolicyShape& shape, std::uint64_t seed);

  const EmbeddingModel& model() const { return model_; }
  EmbeddingModel& model() { return model_; }

  int n_contexts() const { return model_.n_contexts(); }
  int n_actions() const { return model_.n_actions(); }
  bool tabular() const { return model_.tabular(); }

  Vector logits(const Context& c) const { return model_.scores(c); }
  Vector log_probs(const Context& c) const;
  Vector probs(const Context& c) const;

  /// Full probability table over context ids (tabular encodings only).
  TabularPolicy table() const;

  std::size_t parameter_count() const { return model_.parameter_count(); }

  bool operator==(const ParametricPolicy& o) const { return model_ == o.model_; }

 private:
  EmbeddingModel model_;
};

/// Checkpoint: JSON manifest plus a binary file holding, per tensor, an
/// 8-byte little-endian element count followed by little-endian doubles in
/// row-major order. Tensor order: item_embeddings, item_bias, context_table.
void save_checkpoint(const ParametricPolicy& policy, const std::filesystem::path& manifest,
                     const std::filesystem::path& params, const nlohmann::json& metadata);
ParametricPolicy load_checkpoint(const std::filesystem::path& manifest,
                                 const std::filesystem::path& params);

}  // namespace ersft
