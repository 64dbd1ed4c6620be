#include "ersft/embedding_model.hpp"

#include "ersft/error.hpp"
#include "ersft/random.hpp"

namespace ersft {

std::string encoding_name(ContextEncoding e) {
  switch (e) {
    case ContextEncoding::kLearnedTable: return "learned_table";
    case ContextEncoding::kOneHotTable: return "one_hot";
    case ContextEncoding::kHistoryMean: return "history_mean";
  }
  return "learned_table";
}

ContextEncoding parse_encoding(const std::string& name) {
  if (name == "learned_table") return ContextEncoding::kLearnedTable;
  if (name == "one_hot") return ContextEncoding::kOneHotTable;
  if (name == "history_mean") return ContextEncoding::kHistoryMean;
  throw ParameterError("unknown context encoding: " + name);
}

void ModelGradient::scale(double c) {
  item_embeddings *= c;
  item_bias *= c;
  context_table *= c;
  global_bias *= c;
}

EmbeddingModel::EmbeddingModel(int n_contexts, int n_actions, int dim, ContextEncoding encoding,
                               std::uint64_t seed, double init_scale)
    : n_contexts_(n_contexts), encoding_(encoding) {
  if (n_actions < 1 || dim < 1 || n_contexts < 1) throw ParameterError("model sizes must be >= 1");
  if (encoding == ContextEncoding::kOneHotTable && dim < n_contexts) {
    throw ParameterError("one-hot context encoding needs dim >= n_contexts");
  }
  Rng rng = make_stream(seed, "init");
  item_embeddings_.resize(n_actions, dim);
  for (Eigen::Index i = 0; i < item_embeddings_.size(); ++i) {
    item_embeddings_.data()[i] = rng.normal(0.0, init_scale);
  }
  item_bias_ = Vector::Zero(n_actions);
  switch (encoding) {
    case ContextEncoding::kLearnedTable:
      context_table_.resize(n_contexts, dim);
      for (Eigen::Index i = 0; i < context_table_.size(); ++i) {
        context_table_.data()[i] = rng.normal(0.0, init_scale);
      }
      break;
    case ContextEncoding::kOneHotTable:
      context_table_ = Matrix::Identity(n_contexts, dim);
      break;
    case ContextEncoding::kHistoryMean:
      context_table_.resize(0, dim);
      break;
  }
}

Vector EmbeddingModel::encode(const Context& c) const {
  if (tabular()) {
    if (c.id < 0 || c.id >= n_contexts_) throw ParameterError("context id out of range");
    return context_table_.row(c.id).transpose();
  }
  Vector x = Vector::Zero(dim());
  if (c.history.empty()) return x;
  for (int item : c.history) x += item_embeddings_.row(item).transpose();
  return x / static_cast<double>(c.history.size());
}

Vector EmbeddingModel::scores_from_features(const Vector& x) const {
  return item_embeddings_ * x + item_bias_;
}

Vector EmbeddingModel::scores(const Context& c) const { return scores_from_features(encode(c)); }

double EmbeddingModel::score(const Vector& x, int action) const {
  return item_embeddings_.row(action).dot(x) + item_bias_[action];
}

ModelGradient EmbeddingModel::zero_gradient() const {
  return {Matrix::Zero(item_embeddings_.rows(), item_embeddings_.cols()),
          Vector::Zero(item_bias_.size()),
          Matrix::Zero(context_table_.rows(), context_table_.cols()), 0.0};
}

void EmbeddingModel::back_to_context(const Context& c, const Vector& grad_x,
                                     ModelGradient& g) const {
  switch (encoding_) {
    case ContextEncoding::kLearnedTable:
      g.context_table.row(c.id) += grad_x.transpose();
      break;
    case ContextEncoding::kOneHotTable:
      break;  // frozen
    case ContextEncoding::kHistoryMean: {
      if (c.history.empty()) break;
      const double inv = 1.0 / static_cast<double>(c.history.size());
      for (int item : c.history) g.item_embeddings.row(item) += inv * grad_x.transpose();
      break;
    }
  }
}

void EmbeddingModel::accumulate(const Context& c, const Vector& x, const Vector& grad_scores,
                                ModelGradient& g) const {
  g.item_embeddings.noalias() += grad_scores * x.transpose();
  g.item_bias += grad_scores;
  if (encoding_ != ContextEncoding::kOneHotTable) {
    back_to_context(c, item_embeddings_.transpose() * grad_scores, g);
  }
}

void EmbeddingModel::accumulate(const Context& c, const Vector& x, int action, double grad_score,
                                ModelGradient& g) const {
  g.item_embeddings.row(action) += grad_score * x.transpose();
  g.item_bias[action] += grad_score;
  if (encoding_ != ContextEncoding::kOneHotTable) {
    back_to_context(c, grad_score * item_embeddings_.row(action).transpose(), g);
  }
}

void EmbeddingModel::apply(const ModelGradient& g, double learning_rate) {
  item_embeddings_ -= learning_rate * g.item_embeddings;
  item_bias_ -= learning_rate * g.item_bias;
  if (encoding_ == ContextEncoding::kLearnedTable) context_table_ -= learning_rate * g.context_table;
}

std::size_t EmbeddingModel::parameter_count() const {
  return static_cast<std::size_t>(item_embeddings_.size() + item_bias_.size() +
                                  context_table_.size());
}

std::vector<double> EmbeddingModel::flatten() const {
  std::vector<double> flat;
  flat.reserve(parameter_count());
  flat.insert(flat.end(), item_embeddings_.data(), item_embeddings_.data() + item_embeddings_.size());
  flat.insert(flat.end(), item_bias_.data(), item_bias_.data() + item_bias_.size());
  flat.insert(flat.end(), context_table_.data(), context_table_.data() + context_table_.size());
  return flat;
}

void EmbeddingModel::assign(const std::vector<double>& flat) {
  if (flat.size() != parameter_count()) throw ParameterError("assign: parameter count mismatch");
  auto it = flat.begin();
  std::copy_n(it, item_embeddings_.size(), item_embeddings_.data());
  it += item_embeddings_.size();
  std::copy_n(it, item_bias_.size(), item_bias_.data());
  it += item_bias_.size();
  std::copy_n(it, context_table_.size(), context_table_.data());
}

bool EmbeddingModel::operator==(const EmbeddingModel& o) const {
  return n_contexts_ == o.n_contexts_ && encoding_ == o.encoding_ &&
         item_embeddings_ == o.item_embeddings_ && item_bias_ == o.item_bias_ &&
         context_table_ == o.context_table_;
}

}  // namespace ersft
