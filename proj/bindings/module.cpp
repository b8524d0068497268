#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "taskcomm/channel_eval.hpp"
#include "taskcomm/design.hpp"
#include "taskcomm/harness.hpp"
#include "taskcomm/model.hpp"
#include "taskcomm/neural.hpp"
#include "taskcomm/refopt.hpp"
#include "taskcomm/serialize.hpp"

namespace py = pybind11;
using namespace taskcomm;

namespace {

ChannelSet make_channels(const Vector& gains, double energy) {
  ChannelSet channels;
  channels.gains = gains;
  channels.energy = energy;
  validate_channels(channels);
  return channels;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Analog encoder design for multi-user, multi-task estimation "
            "over a scalar broadcast channel";

  py::class_<ModelDims>(m, "ModelDims")
      .def(py::init([](int users, int latent, int task, int obs) {
             return ModelDims{users, latent, task, obs};
           }),
           py::arg("users"), py::arg("latent"), py::arg("task"),
           py::arg("obs"))
      .def_readwrite("users", &ModelDims::users)
      .def_readwrite("latent", &ModelDims::latent)
      .def_readwrite("task", &ModelDims::task)
      .def_readwrite("obs", &ModelDims::obs);

  py::class_<LinearGroundTruth>(m, "LinearGroundTruth")
      .def_readonly("dims", &LinearGroundTruth::dims)
      .def_readonly("mixing", &LinearGroundTruth::mixing)
      .def_readonly("task_maps", &LinearGroundTruth::task_maps)
      .def_readonly("seed", &LinearGroundTruth::seed)
      .def_property_readonly("subspace_dim", [](const LinearGroundTruth& m) {
        return m.subspace_dim;
      });

  py::class_<GaussianStats>(m, "GaussianStats")
      .def_readonly("cross", &GaussianStats::cross)
      .def_readonly("prior", &GaussianStats::prior)
      .def_readonly("gram", &GaussianStats::gram)
      .def_readonly("whitener", &GaussianStats::whitener)
      .def_readonly("mean_y", &GaussianStats::mean_y)
      .def("noiseless_mse", &GaussianStats::noiseless_mse, py::arg("user"));

  py::class_<ChannelSet>(m, "ChannelSet")
      .def(py::init(&make_channels), py::arg("gains"), py::arg("energy"))
      .def_readwrite("gains", &ChannelSet::gains)
      .def_readwrite("energy", &ChannelSet::energy);

  py::class_<SampleBatch>(m, "SampleBatch")
      .def_readonly("y", &SampleBatch::y)
      .def_readonly("x", &SampleBatch::x)
      .def_readonly("seed", &SampleBatch::seed);

  py::enum_<WeightMode>(m, "WeightMode")
      .value("UNIT", WeightMode::kUnit)
      .value("HIGH_SNR", WeightMode::kHighSnr)
      .value("LOW_SNR", WeightMode::kLowSnr)
      .value("BLENDED", WeightMode::kBlended)
      .value("AUTO", WeightMode::kAuto);

  py::enum_<BasisMethod>(m, "BasisMethod")
      .value("SVD", BasisMethod::kSvd)
      .value("GRAM_SCHMIDT", BasisMethod::kGramSchmidt)
      .value("NATURAL", BasisMethod::kNatural);

  py::class_<TaskWeights>(m, "TaskWeights")
      .def_readonly("values", &TaskWeights::values)
      .def_readonly("mode", &TaskWeights::mode)
      .def_readonly("zero_energy_fallback", &TaskWeights::zero_energy_fallback);

  py::class_<Encoder>(m, "Encoder")
      .def_readonly("basis", &Encoder::basis)
      .def_readonly("energies", &Encoder::energies)
      .def_readonly("importance", &Encoder::importance)
      .def_readonly("active_dims", &Encoder::active_dims)
      .def_readonly("multiplier", &Encoder::multiplier)
      .def("matrix", &Encoder::matrix)
      .def("active_matrix", &Encoder::active_matrix)
      .def("total_energy", &Encoder::total_energy);

  py::class_<WaterFill>(m, "WaterFill")
      .def_readonly("beta", &WaterFill::beta)
      .def_readonly("degenerate", &WaterFill::degenerate);

  py::class_<EnergyAllocation>(m, "EnergyAllocation")
      .def_readonly("energies", &EnergyAllocation::energies)
      .def_readonly("beta", &EnergyAllocation::beta);

  py::class_<ReferenceSolution>(m, "ReferenceSolution")
      .def_readonly("gram", &ReferenceSolution::gram)
      .def_readonly("encoder", &ReferenceSolution::encoder)
      .def_readonly("objective", &ReferenceSolution::objective)
      .def_readonly("history", &ReferenceSolution::history)
      .def_readonly("converged", &ReferenceSolution::converged)
      .def_readonly("iterations", &ReferenceSolution::iterations);

  py::enum_<EvalMode>(m, "EvalMode")
      .value("ANALYTIC", EvalMode::kAnalytic)
      .value("MONTE_CARLO", EvalMode::kMonteCarlo);

  py::class_<EvalReport>(m, "EvalReport")
      .def_readonly("method", &EvalReport::method)
      .def_readonly("energy", &EvalReport::energy)
      .def_readonly("mode", &EvalReport::mode)
      .def_readonly("per_user_mse", &EvalReport::per_user_mse)
      .def_readonly("sum_mse", &EvalReport::sum_mse)
      .def_readonly("mse_floor", &EvalReport::mse_floor)
      .def_readonly("trials", &EvalReport::trials)
      .def_readonly("std_error", &EvalReport::std_error)
      .def_readonly("sum_std_error", &EvalReport::sum_std_error)
      .def("excess", &EvalReport::excess, py::arg("user"));

  py::class_<Decoder>(m, "Decoder")
      .def_readonly("map", &Decoder::map)
      .def_readonly("user", &Decoder::user);

  py::enum_<TdmSplit>(m, "TdmSplit")
      .value("EQUAL", TdmSplit::kEqual)
      .value("OPTIMIZED", TdmSplit::kOptimized);

  py::class_<TdmBaseline>(m, "TdmBaseline")
      .def_readonly("report", &TdmBaseline::report)
      .def_readonly("user_encoders", &TdmBaseline::user_encoders)
      .def_readonly("user_energy", &TdmBaseline::user_energy);

  // model
  m.def("synth_linear_model", &synth_linear_model, py::arg("dims"),
        py::arg("subspace_dim") = std::nullopt, py::arg("seed") = 0);
  m.def("stats_from_ground_truth", &stats_from_ground_truth, py::arg("model"));
  m.def("stats_from_moments", &stats_from_moments, py::arg("cross"),
        py::arg("prior"), py::arg("sigma_y"));
  m.def("sample_batch", &sample_batch, py::arg("model"), py::arg("count"),
        py::arg("seed") = 0);
  m.def("random_channels", &random_channels, py::arg("users"),
        py::arg("energy"), py::arg("seed") = 0);

  // design
  m.def("water_fill_beta", &water_fill_beta, py::arg("eigenvalues"),
        py::arg("gain"), py::arg("energy"));
  m.def("water_fill_energies", &water_fill_energies, py::arg("eigenvalues"),
        py::arg("gain"), py::arg("beta"));
  m.def("single_user_encoder", &single_user_encoder, py::arg("task_gram"),
        py::arg("gain"), py::arg("energy"));
  m.def("task_weights", &task_weights, py::arg("channels"), py::arg("mode"));
  m.def("shared_basis", &shared_basis, py::arg("stats"), py::arg("weights"),
        py::arg("method"));
  m.def("importance_table", &importance_table, py::arg("basis"),
        py::arg("grams"));
  m.def("allocate_energy", &allocate_energy, py::arg("importance"),
        py::arg("channels"));
  m.def("multiuser_encoder", &multiuser_encoder, py::arg("stats"),
        py::arg("channels"), py::arg("weight_mode") = WeightMode::kAuto,
        py::arg("basis_method") = BasisMethod::kSvd);
  m.def("encoder_objective", &encoder_objective, py::arg("encoder"),
        py::arg("stats"), py::arg("channels"));
  m.def("excess_sum_mse", &excess_sum_mse, py::arg("encoder"),
        py::arg("grams"), py::arg("gains"));
  m.def("stationarity_residual", &stationarity_residual, py::arg("encoder"),
        py::arg("stats"), py::arg("channels"));

  // refopt
  m.def(
      "objective_and_gradient",
      [](const Matrix& r, const GaussianStats& stats,
         const ChannelSet& channels) {
        return objective_and_gradient(r, stats, channels);
      },
      py::arg("r"), py::arg("stats"), py::arg("channels"));
  m.def("project_psd_trace", &project_psd_trace, py::arg("s"),
        py::arg("energy"));
  m.def("factor_encoder", &factor_encoder, py::arg("r"));
  m.def(
      "solve_reference",
      [](const GaussianStats& stats, const ChannelSet& channels, int max_iter,
         double tol) {
        SolveOptions opts;
        opts.max_iter = max_iter;
        opts.tol = tol;
        return solve_reference(stats, channels, opts);
      },
      py::arg("stats"), py::arg("channels"), py::arg("max_iter") = 20000,
      py::arg("tol") = 1e-10);

  // channel_eval
  m.def("mmse_decoder", &mmse_decoder, py::arg("stats"), py::arg("encoder"),
        py::arg("gain"), py::arg("user"));
  m.def("analytic_mse", &analytic_mse, py::arg("stats"), py::arg("encoder"),
        py::arg("channels"), py::arg("method") = std::string("analytic"));
  m.def("simulate", &simulate, py::arg("model"), py::arg("encoder"),
        py::arg("channels"), py::arg("trials"), py::arg("seed") = 0,
        py::arg("method") = std::string("monte-carlo"));
  m.def("tdm_baseline", &tdm_baseline, py::arg("stats"), py::arg("channels"),
        py::arg("split") = TdmSplit::kEqual);
  m.def("direct_broadcast", &direct_broadcast, py::arg("stats"),
        py::arg("channels"));
  m.def(
      "energy_sweep_csv",
      [](const LinearGroundTruth& model, const GaussianStats& stats,
         const ChannelSet& gains_template, const std::vector<double>& energies,
         const std::vector<std::string>& methods, WeightMode weight_mode,
         long mc_trials, std::uint64_t seed) {
        SweepOptions opts;
        opts.weight_mode = weight_mode;
        opts.mc_trials = mc_trials;
        opts.seed = seed;
        std::ostringstream out;
        write_sweep_csv(out, energy_sweep(model, stats, gains_template,
                                          energies, methods, opts));
        return out.str();
      },
      py::arg("model"), py::arg("stats"), py::arg("channels"),
      py::arg("energies"), py::arg("methods"),
      py::arg("weight_mode") = WeightMode::kAuto,
      py::arg("mc_trials") = 0, py::arg("seed") = 0);

  // neural
  py::class_<NetDims>(m, "NetDims")
      .def(py::init<>())
      .def_readwrite("input", &NetDims::input)
      .def_readwrite("trunk_hidden", &NetDims::trunk_hidden)
      .def_readwrite("feature", &NetDims::feature)
      .def_readwrite("head_hidden", &NetDims::head_hidden)
      .def_readwrite("output", &NetDims::output)
      .def_readwrite("tasks", &NetDims::tasks);

  py::class_<MultiTaskNet>(m, "MultiTaskNet")
      .def_readonly("dims", &MultiTaskNet::dims)
      .def_readonly("seed", &MultiTaskNet::seed)
      .def("features", &MultiTaskNet::features, py::arg("y"))
      .def("forward", &MultiTaskNet::forward, py::arg("y"));

  py::class_<NonlinearDataset>(m, "NonlinearDataset")
      .def_readonly("y", &NonlinearDataset::y)
      .def_readonly("x", &NonlinearDataset::x)
      .def_readonly("z", &NonlinearDataset::z)
      .def_readonly("seed", &NonlinearDataset::seed)
      .def("count", &NonlinearDataset::count);

  py::class_<TrainOptions>(m, "TrainOptions")
      .def(py::init<>())
      .def_readwrite("epochs", &TrainOptions::epochs)
      .def_readwrite("batch", &TrainOptions::batch)
      .def_readwrite("learn_rate", &TrainOptions::learn_rate)
      .def_readwrite("seed", &TrainOptions::seed);

  py::class_<TrainLog>(m, "TrainLog")
      .def_readonly("epoch_loss", &TrainLog::epoch_loss);

  py::class_<FeatureStats>(m, "FeatureStats")
      .def_readonly("mean", &FeatureStats::mean)
      .def_readonly("cov", &FeatureStats::cov)
      .def_readonly("whitener", &FeatureStats::whitener)
      .def_readonly("sqrt_cov", &FeatureStats::sqrt_cov);

  m.def("make_net", &make_net, py::arg("dims") = NetDims{},
        py::arg("seed") = 0);
  m.def("nonlinear_targets", &nonlinear_targets, py::arg("z"));
  m.def("synth_nonlinear_dataset", &synth_nonlinear_dataset, py::arg("count"),
        py::arg("seed") = 0);
  m.def("split_dataset", &split_dataset, py::arg("data"),
        py::arg("head_count"));
  m.def("train", &train, py::arg("net"), py::arg("data"), py::arg("options"));
  m.def("network_test_mse", &network_test_mse, py::arg("net"), py::arg("data"));
  m.def("feature_stats", &feature_stats, py::arg("net"), py::arg("data"));
  m.def("linearize_heads", &linearize_heads, py::arg("net"));
  m.def("feature_encoder", &feature_encoder, py::arg("head_maps"),
        py::arg("stats"), py::arg("channels"));
  m.def("end_to_end_eval", &end_to_end_eval, py::arg("net"),
        py::arg("encoder"), py::arg("stats"), py::arg("channels"),
        py::arg("testset"), py::arg("noise_draws"), py::arg("seed") = 0,
        py::arg("method") = std::string("proposed"));

  // harness hooks for scripting
  m.def(
      "run_validation", [](std::uint64_t seed) {
        py::list out;
        for (const ValidationCheck& check : run_validation_suite(seed)) {
          out.append(py::make_tuple(check.name, check.passed, check.detail));
        }
        return out;
      },
      py::arg("seed") = 7);
}
