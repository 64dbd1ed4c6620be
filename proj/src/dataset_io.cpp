#include "ersft/dataset_io.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include "ersft/error.hpp"

namespace ersft {

namespace {

Json matrix_to_json(const Matrix& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    rows.push_back(std::vector<double>(m.row(i).data(), m.row(i).data() + m.cols()));
  }
  return rows;
}

Matrix matrix_from_json(const Json& j) {
  const auto n_rows = static_cast<Eigen::Index>(j.size());
  const auto n_cols = n_rows ? static_cast<Eigen::Index>(j.at(0).size()) : 0;
  Matrix m(n_rows, n_cols);
  for (Eigen::Index i = 0; i < n_rows; ++i) {
    if (static_cast<Eigen::Index>(j[i].size()) != n_cols) throw ParameterError("ragged matrix");
    for (Eigen::Index k = 0; k < n_cols; ++k) m(i, k) = j[i][k].get<double>();
  }
  return m;
}

}  // namespace

Json noise_to_json(const NoiseModel& noise) {
  Json j{{"kind", noise.kind_name()}, {"sigma", noise.sigma}};
  if (noise.kind == NoiseModel::Kind::kDiscreteRating) j["levels"] = noise.levels;
  return j;
}

NoiseModel noise_from_json(const Json& j) {
  NoiseModel n;
  n.kind = NoiseModel::parse_kind(j.value("kind", std::string("none")));
  n.sigma = j.value("sigma", 0.0);
  n.levels = j.value("levels", 0);
  n.validate();
  return n;
}

Json env_to_json(const SyntheticEnvironment& env) {
  return Json{{"n_contexts", env.catalog.n_contexts},
              {"n_actions", env.catalog.n_actions},
              {"r_max", env.r_max},
              {"noise", noise_to_json(env.noise)},
              {"context_dist", std::vector<double>(env.context_dist.data(),
                                                   env.context_dist.data() + env.context_dist.size())},
              {"true_reward", matrix_to_json(env.true_reward)},
              {"logging_policy", matrix_to_json(env.logging_policy.probs())}};
}

SyntheticEnvironment env_from_json(const Json& j) {
  SyntheticEnvironment env;
  env.catalog = {j.at("n_contexts").get<int>(), j.at("n_actions").get<int>()};
  env.r_max = j.at("r_max").get<double>();
  env.noise = noise_from_json(j.at("noise"));
  const auto d0 = j.at("context_dist").get<std::vector<double>>();
  env.context_dist = Eigen::Map<const Vector>(d0.data(), static_cast<Eigen::Index>(d0.size()));
  env.true_reward = matrix_from_json(j.at("true_reward"));
  env.logging_policy = TabularPolicy(matrix_from_json(j.at("logging_policy")));
  env.validate();
  return env;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << text;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_dataset(const OfflineDataset& ds, const std::filesystem::path& records,
                   const std::filesystem::path& manifest, std::uint64_t seed,
                   const NoiseModel& noise, const Json& extra) {
  std::ostringstream out;
  auto emit = [&](const LoggedInteraction& x, Json rec) {
    rec["s"] = x.context;
    rec["a"] = x.action;
    rec["r"] = x.observed_reward;
    if (x.position >= 0) rec["pos"] = x.position;
    out << rec.dump() << '\n';
  };
  if (ds.trajectory_mode()) {
    for (std::size_t j = 0; j < ds.trajectories.size(); ++j) {
      const auto& steps = ds.trajectories[j].steps;
      for (std::size_t t = 0; t < steps.size(); ++t) emit(steps[t], Json{{"traj", j}, {"t", t}});
    }
  } else {
    for (const auto& x : ds.interactions) emit(x, Json::object());
  }
  write_text(records, out.str());

  Json m = extra;
  m["n_contexts"] = ds.catalog.n_contexts;
  m["n_actions"] = ds.catalog.n_actions;
  m["n_records"] = ds.interactions.size();
  m["seed"] = seed;
  m["noise"] = noise_to_json(noise);
  m["trajectory_mode"] = ds.trajectory_mode();
  if (ds.sequence_mode()) m["sequences"] = ds.sequences;
  write_text(manifest, m.dump(2) + "\n");
}

OfflineDataset read_dataset(const std::filesystem::path& records,
                            const std::filesystem::path& manifest) {
  const Json m = Json::parse(read_text(manifest));
  OfflineDataset ds;
  ds.catalog = {m.at("n_contexts").get<int>(), m.at("n_actions").get<int>()};
  if (m.contains("sequences")) ds.sequences = m["sequences"].get<std::vector<std::vector<int>>>();

  std::ifstream in(records);
  if (!in) throw std::runtime_error("cannot open " + records.string());
  std::map<std::size_t, Trajectory> trajs;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    Json rec;
    try {
      rec = Json::parse(line);
    } catch (const Json::exception& e) {
      throw DataError(e.what(), line_no);
    }
    LoggedInteraction x{rec.at("s").get<int>(), rec.at("a").get<int>(), rec.at("r").get<double>(),
                        rec.value("pos", -1)};
    if (!ds.catalog.contains(x.context, x.action)) throw DataError("id outside catalog", line_no);
    ds.interactions.push_back(x);
    if (rec.contains("traj")) {
      auto& tau = trajs[rec["traj"].get<std::size_t>()];
      tau.steps.push_back(x);
      tau.ret += x.observed_reward;
    }
  }
  for (auto& [_, tau] : trajs) ds.trajectories.push_back(std::move(tau));
  ds.refresh_context_dist();
  ds.validate();
  return ds;
}

}  // namespace ersft
