#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ersft/bandit.hpp"
#include "ersft/linalg.hpp"

namespace ersft {

/// How a context becomes a d-dimensional feature vector.
enum class ContextEncoding {
  kLearnedTable,  // trainable |S| x d table
  kOneHotTable,   // frozen identity features, d >= |S|; full capacity
  kHistoryMean,   // mean of the embeddings of previously seen items
};

std::string encoding_name(ContextEncoding e);
ContextEncoding parse_encoding(const std::string& name);

struct ModelGradient {
  Matrix item_embeddings;
  Vector item_bias;
  Matrix context_table;
  double global_bias = 0.0;

  void scale(double c);
};

/// Bilinear item-scoring model: score(s, a) = <item_embeddings[a], x(s)> + item_bias[a].
/// Shared by the softmax policy and the scalar reward model.
class EmbeddingModel {
 public:
  EmbeddingModel() = default;
  EmbeddingModel(int n_contexts, int n_actions, int dim, ContextEncoding encoding,
                 std::uint64_t seed, double init_scale = 0.1);

  int n_contexts() const { return n_contexts_; }
  int n_actions() const { return static_cast<int>(item_embeddings_.rows()); }
  int dim() const { return static_cast<int>(item_embeddings_.cols()); }
  ContextEncoding encoding() const { return encoding_; }
  bool tabular() const { return encoding_ != ContextEncoding::kHistoryMean; }

  Vector encode(const Context& c) const;
  Vector scores(const Context& c) const;
  Vector scores_from_features(const Vector& x) const;
  double score(const Vector& x, int action) const;

  ModelGradient zero_gradient() const;
  /// Back-propagates d(loss)/d(scores) for one context with encoded features x.
  void accumulate(const Context& c, const Vector& x, const Vector& grad_scores,
                  ModelGradient& g) const;
  /// Same, for a gradient on a single action's score.
  void accumulate(const Context& c, const Vector& x, int action, double grad_score,
                  ModelGradient& g) const;
  void apply(const ModelGradient& g, double learning_rate);

  std::size_t parameter_count() const;
  std::vector<double> flatten() const;
  void assign(const std::vector<double>& flat);

  const Matrix& item_embeddings() const { return item_embeddings_; }
  const Vector& item_bias() const { return item_bias_; }
  const Matrix& context_table() const { return context_table_; }
  Matrix& mutable_item_embeddings() { return item_embeddings_; }
  Vector& mutable_item_bias() { return item_bias_; }
  Matrix& mutable_context_table() { return context_table_; }

  bool operator==(const EmbeddingModel& o) const;

 private:
  void back_to_context(const Context& c, const Vector& grad_x, ModelGradient& g) const;

  int n_contexts_ = 0;
  ContextEncoding encoding_ = ContextEncoding::kLearnedTable;
  Matrix item_embeddings_;
  Vector item_bias_;
  Matrix context_table_;
};

}  // namespace ersft
