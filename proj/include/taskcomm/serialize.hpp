#pragma once

#include <string>

#include <json.hpp>

#include "taskcomm/design.hpp"
#include "taskcomm/model.hpp"
#include "taskcomm/neural.hpp"
#include "taskcomm/refopt.hpp"

namespace taskcomm {

using Json = nlohmann::json;

// Matrices are stored row-major with explicit shape fields.
Json to_json(const Matrix& m);
Json to_json(const Vector& v);
Matrix matrix_from_json(const Json& j);
Vector vector_from_json(const Json& j);

Json to_json(const LinearGroundTruth& model);
LinearGroundTruth ground_truth_from_json(const Json& j);

Json to_json(const GaussianStats& stats);
GaussianStats stats_from_json(const Json& j);

Json to_json(const ChannelSet& channels);
ChannelSet channels_from_json(const Json& j);

Json to_json(const Encoder& encoder);
Encoder encoder_from_json(const Json& j);

Json to_json(const ReferenceSolution& solution);
ReferenceSolution reference_solution_from_json(const Json& j);

// Checkpoint bundles the trained network with its feature statistics.
Json to_json(const MultiTaskNet& net);
MultiTaskNet net_from_json(const Json& j);
Json checkpoint_to_json(const MultiTaskNet& net, const FeatureStats& stats);
std::pair<MultiTaskNet, FeatureStats> checkpoint_from_json(const Json& j);

void save_json(const std::string& path, const Json& j);
Json load_json(const std::string& path);

}  // namespace taskcomm
