#include "ersft/policy.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "ersft/dataset_io.hpp"
#include "ersft/error.hpp"

namespace ersft {

ParametricPolicy::ParametricPolicy(const PolicyShape& shape, std::uint64_t seed)
    : model_(shape.n_contexts, shape.n_actions, shape.dim, shape.encoding, seed,
             shape.init_scale) {}

Vector ParametricPolicy::log_probs(const Context& c) const { return log_softmax(logits(c)); }

Vector ParametricPolicy::probs(const Context& c) const { return softmax(logits(c)); }

TabularPolicy ParametricPolicy::table() const {
  if (!tabular()) throw ParameterError("probability table needs a tabular context encoding");
  Matrix logits_all = model_.context_table() * model_.item_embeddings().transpose();
  logits_all.rowwise() += model_.item_bias().transpose();
  Matrix probs(logits_all.rows(), logits_all.cols());
  for (Eigen::Index s = 0; s < logits_all.rows(); ++s) {
    probs.row(s) = softmax(logits_all.row(s).transpose()).transpose();
  }
  return TabularPolicy(std::move(probs));
}

namespace {

void put_u64(std::ostream& out, std::uint64_t v) {
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(buf), 8);
}

std::uint64_t get_u64(std::istream& in) {
  unsigned char buf[8];
  if (!in.read(reinterpret_cast<char*>(buf), 8)) throw std::runtime_error("truncated checkpoint");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return v;
}

void put_tensor(std::ostream& out, const double* data, std::size_t n) {
  put_u64(out, n);
  for (std::size_t i = 0; i < n; ++i) put_u64(out, std::bit_cast<std::uint64_t>(data[i]));
}

void get_tensor(std::istream& in, double* data, std::size_t expected) {
  const auto n = get_u64(in);
  if (n != expected) throw std::runtime_error("checkpoint tensor size mismatch");
  for (std::size_t i = 0; i < n; ++i) data[i] = std::bit_cast<double>(get_u64(in));
}

}  // namespace

void save_checkpoint(const ParametricPolicy& policy, const std::filesystem::path& manifest,
                     const std::filesystem::path& params, const nlohmann::json& metadata) {
  const auto& m = policy.model();
  nlohmann::json j = metadata;
  j["n_contexts"] = m.n_contexts();
  j["n_actions"] = m.n_actions();
  j["dim"] = m.dim();
  j["encoding"] = encoding_name(m.encoding());
  j["tensors"] = {"item_embeddings", "item_bias", "context_table"};
  write_text(manifest, j.dump(2) + "\n");

  if (params.has_parent_path()) std::filesystem::create_directories(params.parent_path());
  std::ofstream out(params, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + params.string());
  put_tensor(out, m.item_embeddings().data(), static_cast<std::size_t>(m.item_embeddings().size()));
  put_tensor(out, m.item_bias().data(), static_cast<std::size_t>(m.item_bias().size()));
  put_tensor(out, m.context_table().data(), static_cast<std::size_t>(m.context_table().size()));
}

ParametricPolicy load_checkpoint(const std::filesystem::path& manifest,
                                 const std::filesystem::path& params) {
  const auto j = nlohmann::json::parse(read_text(manifest));
  PolicyShape shape;
  shape.n_contexts = j.at("n_contexts").get<int>();
  shape.n_actions = j.at("n_actions").get<int>();
  shape.dim = j.at("dim").get<int>();
  shape.encoding = parse_encoding(j.at("encoding").get<std::string>());
  ParametricPolicy policy(shape, 0);
  auto& m = policy.model();
  std::ifstream in(params, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + params.string());
  get_tensor(in, m.mutable_item_embeddings().data(),
             static_cast<std::size_t>(m.item_embeddings().size()));
  get_tensor(in, m.mutable_item_bias().data(), static_cast<std::size_t>(m.item_bias().size()));
  get_tensor(in, m.mutable_context_table().data(),
             static_cast<std::size_t>(m.context_table().size()));
  return policy;
}

}  // namespace ersft
