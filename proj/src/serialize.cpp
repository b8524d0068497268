#include "taskcomm/serialize.hpp"

#include <fstream>
#include <stdexcept>

namespace taskcomm {

Json to_json(const Matrix& m) {
  Json j;
  j["rows"] = m.rows();
  j["cols"] = m.cols();
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      data.push_back(m(r, c));
    }
  }
  j["data"] = std::move(data);
  return j;
}

Json to_json(const Vector& v) {
  return Json(std::vector<double>(v.data(), v.data() + v.size()));
}

Matrix matrix_from_json(const Json& j) {
  const Eigen::Index rows = j.at("rows").get<Eigen::Index>();
  const Eigen::Index cols = j.at("cols").get<Eigen::Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(data.size()) != rows * cols) {
    throw std::invalid_argument("matrix_from_json: data/shape mismatch");
  }
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      m(r, c) = data[static_cast<std::size_t>(r * cols + c)];
    }
  }
  return m;
}

Vector vector_from_json(const Json& j) {
  const auto data = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(data.data(),
                                  static_cast<Eigen::Index>(data.size()));
}

Json to_json(const LinearGroundTruth& model) {
  Json j;
  j["dims"] = {{"users", model.dims.users},
               {"latent", model.dims.latent},
               {"task", model.dims.task},
               {"obs", model.dims.obs}};
  if (model.subspace_dim) {
    j["subspace_dim"] = *model.subspace_dim;
  } else {
    j["subspace_dim"] = nullptr;
  }
  j["mixing"] = to_json(model.mixing);
  Json maps = Json::array();
  for (const Matrix& k : model.task_maps) maps.push_back(to_json(k));
  j["task_maps"] = std::move(maps);
  j["seed"] = model.seed;
  return j;
}

LinearGroundTruth ground_truth_from_json(const Json& j) {
  LinearGroundTruth model;
  const Json& dims = j.at("dims");
  model.dims.users = dims.at("users").get<int>();
  model.dims.latent = dims.at("latent").get<int>();
  model.dims.task = dims.at("task").get<int>();
  model.dims.obs = dims.at("obs").get<int>();
  if (!j.at("subspace_dim").is_null()) {
    model.subspace_dim = j.at("subspace_dim").get<int>();
  }
  model.mixing = matrix_from_json(j.at("mixing"));
  for (const Json& k : j.at("task_maps")) {
    model.task_maps.push_back(matrix_from_json(k));
  }
  model.seed = j.at("seed").get<std::uint64_t>();
  return model;
}

Json to_json(const GaussianStats& stats) {
  Json j;
  Json cross = Json::array(), prior = Json::array(), gram = Json::array();
  for (const Matrix& m : stats.cross) cross.push_back(to_json(m));
  for (const Matrix& m : stats.prior) prior.push_back(to_json(m));
  for (const Matrix& m : stats.gram) gram.push_back(to_json(m));
  j["cross"] = std::move(cross);
  j["prior"] = std::move(prior);
  j["gram"] = std::move(gram);
  j["whitener"] = to_json(stats.whitener);
  j["mean_y"] = to_json(stats.mean_y);
  return j;
}

GaussianStats stats_from_json(const Json& j) {
  GaussianStats stats;
  for (const Json& m : j.at("cross")) stats.cross.push_back(matrix_from_json(m));
  for (const Json& m : j.at("prior")) stats.prior.push_back(matrix_from_json(m));
  for (const Json& m : j.at("gram")) stats.gram.push_back(matrix_from_json(m));
  stats.whitener = matrix_from_json(j.at("whitener"));
  stats.mean_y = vector_from_json(j.at("mean_y"));
  return stats;
}

Json to_json(const ChannelSet& channels) {
  Json j;
  j["gains"] = to_json(channels.gains);
  j["energy"] = channels.energy;
  return j;
}

ChannelSet channels_from_json(const Json& j) {
  ChannelSet channels;
  channels.gains = vector_from_json(j.at("gains"));
  channels.energy = j.at("energy").get<double>();
  return channels;
}

Json to_json(const Encoder& encoder) {
  Json j;
  j["basis"] = to_json(encoder.basis);
  j["energies"] = to_json(encoder.energies);
  j["importance"] = to_json(encoder.importance);
  j["active_dims"] = encoder.active_dims;
  j["multiplier"] = encoder.multiplier;
  return j;
}

Encoder encoder_from_json(const Json& j) {
  Encoder encoder;
  encoder.basis = matrix_from_json(j.at("basis"));
  encoder.energies = vector_from_json(j.at("energies"));
  encoder.importance = matrix_from_json(j.at("importance"));
  encoder.active_dims = j.at("active_dims").get<std::vector<int>>();
  encoder.multiplier = j.at("multiplier").get<double>();
  return encoder;
}

Json to_json(const ReferenceSolution& solution) {
  Json j;
  j["gram"] = to_json(solution.gram);
  j["encoder"] = to_json(solution.encoder);
  j["objective"] = solution.objective;
  j["history"] = solution.history;
  j["converged"] = solution.converged;
  j["iterations"] = solution.iterations;
  return j;
}

ReferenceSolution reference_solution_from_json(const Json& j) {
  ReferenceSolution solution;
  solution.gram = matrix_from_json(j.at("gram"));
  solution.encoder = matrix_from_json(j.at("encoder"));
  solution.objective = j.at("objective").get<double>();
  solution.history = j.at("history").get<std::vector<double>>();
  solution.converged = j.at("converged").get<bool>();
  solution.iterations = j.at("iterations").get<int>();
  return solution;
}

namespace {

Json layer_to_json(const LinearLayer& layer) {
  Json j;
  j["weight"] = to_json(layer.weight);
  j["bias"] = to_json(layer.bias);
  return j;
}

LinearLayer layer_from_json(const Json& j) {
  LinearLayer layer;
  layer.weight = matrix_from_json(j.at("weight"));
  layer.bias = vector_from_json(j.at("bias"));
  return layer;
}

}  // namespace

Json to_json(const MultiTaskNet& net) {
  Json j;
  j["dims"] = {{"input", net.dims.input},
               {"trunk_hidden", net.dims.trunk_hidden},
               {"feature", net.dims.feature},
               {"head_hidden", net.dims.head_hidden},
               {"output", net.dims.output},
               {"tasks", net.dims.tasks}};
  j["seed"] = net.seed;
  j["trunk1"] = layer_to_json(net.trunk1);
  j["trunk2"] = layer_to_json(net.trunk2);
  Json heads = Json::array();
  for (const auto& head : net.heads) {
    heads.push_back(
        Json{{"in", layer_to_json(head.in)}, {"out", layer_to_json(head.out)}});
  }
  j["heads"] = std::move(heads);
  return j;
}

MultiTaskNet net_from_json(const Json& j) {
  MultiTaskNet net;
  const Json& dims = j.at("dims");
  net.dims.input = dims.at("input").get<int>();
  net.dims.trunk_hidden = dims.at("trunk_hidden").get<int>();
  net.dims.feature = dims.at("feature").get<int>();
  net.dims.head_hidden = dims.at("head_hidden").get<int>();
  net.dims.output = dims.at("output").get<int>();
  net.dims.tasks = dims.at("tasks").get<int>();
  net.seed = j.at("seed").get<std::uint64_t>();
  net.trunk1 = layer_from_json(j.at("trunk1"));
  net.trunk2 = layer_from_json(j.at("trunk2"));
  for (const Json& head : j.at("heads")) {
    net.heads.push_back(
        {layer_from_json(head.at("in")), layer_from_json(head.at("out"))});
  }
  return net;
}

Json checkpoint_to_json(const MultiTaskNet& net, const FeatureStats& stats) {
  Json j;
  j["net"] = to_json(net);
  j["feature_stats"] = {{"mean", to_json(stats.mean)},
                        {"cov", to_json(stats.cov)},
                        {"whitener", to_json(stats.whitener)},
                        {"sqrt_cov", to_json(stats.sqrt_cov)}};
  return j;
}

std::pair<MultiTaskNet, FeatureStats> checkpoint_from_json(const Json& j) {
  MultiTaskNet net = net_from_json(j.at("net"));
  FeatureStats stats;
  const Json& fs = j.at("feature_stats");
  stats.mean = vector_from_json(fs.at("mean"));
  stats.cov = matrix_from_json(fs.at("cov"));
  stats.whitener = matrix_from_json(fs.at("whitener"));
  stats.sqrt_cov = matrix_from_json(fs.at("sqrt_cov"));
  return {std::move(net), std::move(stats)};
}

void save_json(const std::string& path, const Json& j) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("save_json: cannot open " + path);
  }
  out << j.dump(2) << '\n';
}

Json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("load_json: cannot open " + path);
  }
  return Json::parse(in);
}

}  // namespace taskcomm
