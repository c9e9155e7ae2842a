#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "fedbargain/harness.hpp"

namespace py = pybind11;
using namespace fedbargain;

namespace {

void register_cost(py::module_& m) {
  py::class_<UeProfile>(m, "UeProfile")
      .def(py::init<>())
      .def_readwrite("id", &UeProfile::id)
      .def_readwrite("cpu_freq", &UeProfile::cpu_freq)
      .def_readwrite("eff_capacitance", &UeProfile::eff_capacitance)
      .def_readwrite("cycles_per_sample", &UeProfile::cycles_per_sample)
      .def_readwrite("data_size", &UeProfile::data_size)
      .def_readwrite("comm_time_norm", &UeProfile::comm_time_norm)
      .def_readwrite("weight_energy", &UeProfile::weight_energy)
      .def_readwrite("weight_time", &UeProfile::weight_time)
      .def_readwrite("cost_sensitivity", &UeProfile::cost_sensitivity)
      .def("validate", &UeProfile::validate);

  py::class_<AccuracyLaw>(m, "AccuracyLaw")
      .def(py::init<>())
      .def_readwrite("nu", &AccuracyLaw::nu)
      .def_readwrite("a", &AccuracyLaw::a)
      .def_readwrite("theta_min", &AccuracyLaw::theta_min)
      .def_readwrite("theta_max", &AccuracyLaw::theta_max);

  m.def("local_iter_time", &local_iter_time);
  m.def("local_iter_energy", &local_iter_energy);
  m.def("local_iterations", &local_iterations, py::arg("theta"), py::arg("law"));
  m.def("global_rounds", &global_rounds, py::arg("theta"), py::arg("law"));
  m.def("per_round_cost", &per_round_cost);
  m.def("session_cost", &session_cost);
}

void register_game(py::module_& m) {
  py::class_<GameConfig>(m, "GameConfig")
      .def(py::init<>())
      .def_readwrite("law", &GameConfig::law)
      .def_readwrite("reward_min", &GameConfig::reward_min)
      .def_readwrite("reward_max", &GameConfig::reward_max)
      .def_readwrite("beta", &GameConfig::beta)
      .def_readwrite("kappa_acc", &GameConfig::kappa_acc)
      .def_readwrite("follower_tol", &GameConfig::follower_tol)
      .def_readwrite("leader_grid", &GameConfig::leader_grid)
      .def_readwrite("max_interaction_rounds", &GameConfig::max_interaction_rounds);

  py::class_<BestResponse>(m, "BestResponse")
      .def_readonly("theta", &BestResponse::theta)
      .def_readonly("utility", &BestResponse::utility)
      .def_readonly("used_fallback", &BestResponse::used_fallback);

  py::class_<TraceEntry>(m, "TraceEntry")
      .def_readonly("round", &TraceEntry::round)
      .def_readonly("reward", &TraceEntry::reward)
      .def_readonly("thetas", &TraceEntry::thetas)
      .def_readonly("leader_utility", &TraceEntry::leader_utility);

  py::class_<StackelbergOutcome>(m, "StackelbergOutcome")
      .def_readonly("reward_star", &StackelbergOutcome::reward_star)
      .def_readonly("theta_star", &StackelbergOutcome::theta_star)
      .def_readonly("leader_utility", &StackelbergOutcome::leader_utility)
      .def_readonly("payments", &StackelbergOutcome::payments)
      .def_readonly("trace", &StackelbergOutcome::trace)
      .def_readonly("converged", &StackelbergOutcome::converged);

  m.def("ue_utility", &ue_utility, py::arg("profile"), py::arg("theta"), py::arg("reward"), py::arg("law"));
  m.def("best_response", &best_response, py::arg("profile"), py::arg("reward"), py::arg("config"));
  m.def(
      "nash_lower_level",
      [](const std::vector<UeProfile>& ues, double r, const GameConfig& cfg, unsigned workers) {
        return nash_lower_level(ues, r, cfg, workers);
      },
      py::arg("profiles"), py::arg("reward"), py::arg("config"), py::arg("workers") = 1);
  m.def(
      "bs_utility",
      [](const std::vector<UeProfile>& ues, double r, const std::vector<double>& thetas,
         const GameConfig& cfg) { return bs_utility(ues, r, thetas, cfg); },
      py::arg("profiles"), py::arg("reward"), py::arg("thetas"), py::arg("config"));
  m.def(
      "leader_optimize",
      [](const std::vector<UeProfile>& ues, const GameConfig& cfg, unsigned workers) {
        py::gil_scoped_release release;
        return leader_optimize(ues, cfg, workers);
      },
      py::arg("profiles"), py::arg("config"), py::arg("workers") = 1);
  m.def(
      "interaction_loop",
      [](const std::vector<UeProfile>& ues, const GameConfig& cfg, unsigned workers) {
        py::gil_scoped_release release;
        return interaction_loop(ues, cfg, workers);
      },
      py::arg("profiles"), py::arg("config"), py::arg("workers") = 1);
}

void register_data_fl(py::module_& m) {
  py::class_<Dataset>(m, "Dataset")
      .def(py::init<>())
      .def_readwrite("features", &Dataset::features)
      .def_readwrite("labels", &Dataset::labels)
      .def_readwrite("num_classes", &Dataset::num_classes)
      .def("__len__", &Dataset::size);

  py::enum_<PartitionMode>(m, "PartitionMode")
      .value("IID", PartitionMode::Iid)
      .value("DIRICHLET", PartitionMode::Dirichlet);

  py::class_<PartitionSpec>(m, "PartitionSpec")
      .def(py::init<>())
      .def_readwrite("mode", &PartitionSpec::mode)
      .def_readwrite("alpha", &PartitionSpec::alpha)
      .def_readwrite("num_clients", &PartitionSpec::num_clients)
      .def_readwrite("seed", &PartitionSpec::seed);

  m.def("gen_synthetic", &gen_synthetic, py::arg("num_classes"), py::arg("dim"), py::arg("num_samples"),
        py::arg("separation"), py::arg("seed"));
  m.def("partition_indices", &partition_indices);
  m.def("partition", &partition);
  m.def("load_idx", &load_idx, py::arg("images"), py::arg("labels"));

  py::register_exception<IdxError>(m, "IdxError", PyExc_ValueError);

  py::class_<LossGrad>(m, "LossGrad")
      .def_readonly("loss", &LossGrad::loss)
      .def_readonly("grad", &LossGrad::grad);
  m.def("loss_and_grad", &loss_and_grad, py::arg("weights"), py::arg("shard"), py::arg("l2"));
  m.def("accuracy", &accuracy);
  m.def("zero_weights", &zero_weights);

  py::class_<SolverConfig>(m, "SolverConfig")
      .def(py::init<>())
      .def_readwrite("l2_reg", &SolverConfig::l2_reg)
      .def_readwrite("max_local_iters", &SolverConfig::max_local_iters);

  py::class_<LocalResult>(m, "LocalResult")
      .def_readonly("weights", &LocalResult::weights)
      .def_readonly("iterations", &LocalResult::iterations)
      .def_readonly("ratio", &LocalResult::ratio)
      .def_readonly("hit_cap", &LocalResult::hit_cap);
  m.def(
      "local_solve",
      [](const ModelWeights& start, const Dataset& shard, double theta, const SolverConfig& cfg,
         std::optional<double> mu) {
        std::optional<Proximal> prox;
        if (mu) prox = Proximal{*mu, start};
        return local_solve(start, shard, theta, cfg, prox);
      },
      py::arg("start"), py::arg("shard"), py::arg("theta"), py::arg("config") = SolverConfig{},
      py::arg("mu") = py::none());

  py::class_<AggregatorKind>(m, "AggregatorKind")
      .def_static("fed_avg", &AggregatorKind::fed_avg)
      .def_static("fed_prox", &AggregatorKind::fed_prox, py::arg("mu"))
      .def_static("fair_weighted", &AggregatorKind::fair_weighted, py::arg("q"));

  py::class_<RoundRecord>(m, "RoundRecord")
      .def_readonly("round", &RoundRecord::round)
      .def_readonly("local_iters", &RoundRecord::local_iters)
      .def_readonly("ratios", &RoundRecord::ratios)
      .def_readonly("global_loss", &RoundRecord::global_loss)
      .def_readonly("global_accuracy", &RoundRecord::global_accuracy)
      .def_readonly("grad_norm", &RoundRecord::grad_norm)
      .def_readonly("sim_time", &RoundRecord::sim_time);

  py::class_<TrainResult>(m, "TrainResult")
      .def_readonly("weights", &TrainResult::weights)
      .def_readonly("rounds", &TrainResult::rounds)
      .def_readonly("converged", &TrainResult::converged)
      .def_readonly("aborted", &TrainResult::aborted)
      .def_readonly("diagnostic", &TrainResult::diagnostic);

  m.def(
      "train_federated",
      [](const std::vector<Dataset>& shards, const std::vector<double>& thetas,
         const AggregatorKind& kind, const SolverConfig& solver, double eps_global,
         std::size_t max_rounds, unsigned workers) {
        TrainConfig cfg;
        cfg.aggregator = kind;
        cfg.solver = solver;
        cfg.eps_global = eps_global;
        cfg.max_rounds = max_rounds;
        cfg.workers = workers;
        py::gil_scoped_release release;
        return train_federated(shards, thetas, cfg);
      },
      py::arg("shards"), py::arg("thetas"), py::arg("aggregator") = AggregatorKind::fed_avg(),
      py::arg("solver") = SolverConfig{}, py::arg("eps_global") = 1e-2, py::arg("max_rounds") = 500,
      py::arg("workers") = 1);
}

void register_harness(py::module_& m) {
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

  py::class_<ScenarioConfig>(m, "ScenarioConfig")
      .def_readwrite("ues", &ScenarioConfig::ues)
      .def_readwrite("game", &ScenarioConfig::game)
      .def_readwrite("seed", &ScenarioConfig::seed)
      .def_readwrite("output_dir", &ScenarioConfig::output_dir)
      .def_readwrite("reward_grid", &ScenarioConfig::reward_grid)
      .def("validate", &ScenarioConfig::validate)
      .def("hash", [](const ScenarioConfig& c) { return config_hash(c); });

  py::class_<SweepResult>(m, "SweepResult")
      .def_readonly("columns", &SweepResult::columns)
      .def_readonly("rows", &SweepResult::rows);

  py::class_<LeaderCurve>(m, "LeaderCurve")
      .def_readonly("curve", &LeaderCurve::curve)
      .def_readonly("argmax", &LeaderCurve::argmax)
      .def_readonly("equilibrium", &LeaderCurve::equilibrium);

  m.def("default_scenario", &default_scenario);
  m.def("parse_config", [](const std::string& text) { return parse_config(text); });
  m.def("load_config", &load_config);
  m.def("sweep_reward", &sweep_reward, py::arg("config"), py::arg("workers") = 1,
        py::call_guard<py::gil_scoped_release>());
  m.def("sweep_commtime", &sweep_commtime, py::arg("config"), py::arg("ue_id") = py::none(),
        py::arg("workers") = 1, py::call_guard<py::gil_scoped_release>());
  m.def("leader_curve", &leader_curve, py::arg("config"), py::arg("workers") = 1,
        py::call_guard<py::gil_scoped_release>());
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Stackelberg incentive game and federated training simulator";
  m.attr("__version__") = kVersion;
  register_cost(m);
  register_game(m);
  register_data_fl(m);
  register_harness(m);
}
