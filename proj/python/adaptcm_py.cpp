#include "adaptcm/config.hpp"
#include "adaptcm/controller.hpp"
#include "adaptcm/cstr.hpp"
#include "adaptcm/geodesic.hpp"
#include "adaptcm/mhe.hpp"
#include "adaptcm/network.hpp"
#include "adaptcm/scenario.hpp"
#include "adaptcm/trainer.hpp"

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

namespace py = pybind11;
using namespace adaptcm;

namespace {

py::dict trajectory_to_dict(const TrajectoryLog& log) {
  const auto n = static_cast<Eigen::Index>(log.rows.size());
  Eigen::MatrixXd x(n, 2), x_star(n, 2), r_hat(n, 2);
  Eigen::VectorXd t(n), u(n), u_star(n), d(n);
  std::vector<unsigned> flags;
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto& row = log.rows[static_cast<std::size_t>(k)];
    t[k] = row.t;
    x.row(k) = row.x.transpose();
    x_star.row(k) = row.x_star.transpose();
    r_hat.row(k) = row.r_hat.transpose();
    u[k] = row.u[0];
    u_star[k] = row.u_star[0];
    d[k] = row.d_geo;
    flags.push_back(row.flags);
  }
  py::dict out;
  out["t"] = t;
  out["x"] = x;
  out["x_star"] = x_star;
  out["u"] = u;
  out["u_star"] = u_star;
  out["r_hat"] = r_hat;
  out["d_geo"] = d;
  out["flags"] = flags;
  out["rate"] = log.rate;
  return out;
}

}  // namespace

PYBIND11_MODULE(_adaptcm, m) {
  m.doc() = "Adaptive contraction-metric control: plant, learned metric, geodesics, estimator";

  py::class_<Box>(m, "Box")
      .def(py::init<Vec, Vec>(), py::arg("lower"), py::arg("upper"))
      .def_readonly("lower", &Box::lower)
      .def_readonly("upper", &Box::upper)
      .def("contains", &Box::contains, py::arg("z"), py::arg("tol") = 0.0)
      .def("clip", &Box::clip);

  py::class_<CstrParams>(m, "CstrParams")
      .def(py::init(&CstrParams::defaults))
      .def_readwrite("alpha", &CstrParams::alpha)
      .def_readwrite("zeta", &CstrParams::zeta)
      .def_readwrite("time_step", &CstrParams::time_step)
      .def_readwrite("state_box", &CstrParams::state_box)
      .def_readwrite("input_box", &CstrParams::input_box)
      .def_readwrite("param_box", &CstrParams::param_box);

  py::class_<UncertainModel>(m, "UncertainModel")
      .def("step", &UncertainModel::step, py::arg("r"), py::arg("x"), py::arg("u"))
      .def("jacobians",
           [](const UncertainModel& self, const Vec& r, const Vec& x, const Vec& u) {
             auto j = self.jacobians(r, x, u);
             return py::make_tuple(j.A, j.B);
           })
      .def("param_jacobian", &UncertainModel::param_jacobian)
      .def("equilibrium", &UncertainModel::equilibrium, py::arg("r"), py::arg("setpoint"))
      .def_property_readonly("state_box", &UncertainModel::state_box)
      .def_property_readonly("input_box", &UncertainModel::input_box)
      .def_property_readonly("param_box", &UncertainModel::param_box);

  py::class_<CstrModel, UncertainModel>(m, "CstrModel")
      .def(py::init<CstrParams>(), py::arg("params") = CstrParams::defaults())
      .def("arrhenius", &CstrModel::arrhenius);

  py::class_<NetworkWeights>(m, "NetworkWeights")
      .def_static("load", [](const std::string& path) { return load_weights(path); }, py::arg("path"))
      .def("save", [](const NetworkWeights& w, const std::string& path) { save_weights(w, path); })
      .def("num_parameters", &NetworkWeights::num_parameters)
      .def("flatten", &NetworkWeights::flatten)
      .def("evaluate", [](const NetworkWeights& w, const Vec& x, const Vec& r) {
        auto e = evaluate(w, x, r);
        return py::make_tuple(e.M, e.K);
      });

  py::class_<TrainerConfig>(m, "TrainerConfig")
      .def(py::init<>())
      .def_readwrite("beta", &TrainerConfig::beta)
      .def_readwrite("beta_relaxed", &TrainerConfig::beta_relaxed)
      .def_readwrite("eps_metric", &TrainerConfig::eps_metric)
      .def_readwrite("eps_omega", &TrainerConfig::eps_omega)
      .def_readwrite("learning_rate", &TrainerConfig::learning_rate)
      .def_readwrite("max_iterations", &TrainerConfig::max_iterations)
      .def_readwrite("loss_tolerance", &TrainerConfig::loss_tolerance)
      .def_readwrite("hidden", &TrainerConfig::hidden)
      .def_readwrite("state_counts", &TrainerConfig::state_counts)
      .def_readwrite("input_counts", &TrainerConfig::input_counts)
      .def_readwrite("param_counts", &TrainerConfig::param_counts)
      .def_readwrite("seed", &TrainerConfig::seed);

  m.def(
      "train",
      [](const UncertainModel& model, const TrainerConfig& cfg) {
        TrainResult res = [&] {
          py::gil_scoped_release release;
          return train(model, cfg);
        }();
        return py::make_tuple(res.weights, res.loss_history, res.converged);
      },
      py::arg("model"), py::arg("config"), "Returns (weights, loss_history, converged).");

  m.def(
      "verify",
      [](const NetworkWeights& w, const UncertainModel& model, const TrainerConfig& cfg) {
        const auto rep = verify(w, model, cfg, VerifyMesh::refined(cfg));
        py::dict out;
        out["pass_fraction"] = rep.pass_fraction;
        out["pass_fraction_relaxed"] = rep.pass_fraction_relaxed;
        out["metric_eig_min"] = rep.metric_eig_min;
        out["metric_eig_max"] = rep.metric_eig_max;
        out["cells"] = rep.cells.size();
        return out;
      },
      py::arg("weights"), py::arg("model"), py::arg("config"));

  m.def(
      "generate_reference",
      [](const UncertainModel& model, const Vec& r_hat, const Vec& setpoint) {
        const auto ref = generate_reference(model, r_hat, setpoint);
        return py::make_tuple(ref.x_star, ref.u_star);
      },
      py::arg("model"), py::arg("r_hat"), py::arg("setpoint"), "Returns (x_star, u_star).");

  m.def(
      "metric_distance",
      [](const Mat& metric, const Vec& x, const Vec& x_star, int segments) {
        GeodesicOptions opts;
        opts.segments = segments;
        return distance(FunctionMetric::constant(metric), x, x_star, opts);
      },
      py::arg("metric"), py::arg("x"), py::arg("x_star"), py::arg("segments") = 20,
      "Distance under a constant metric.");

  m.def(
      "distance",
      [](const NetworkWeights& w, const Vec& x, const Vec& x_star, const Vec& r_hat, int segments) {
        GeodesicOptions opts;
        opts.segments = segments;
        return distance(w, x, x_star, r_hat, opts);
      },
      py::arg("weights"), py::arg("x"), py::arg("x_star"), py::arg("r_hat"), py::arg("segments") = 20);

  m.def(
      "control",
      [](const NetworkWeights& w, const UncertainModel& model, const Vec& x, const Vec& r_hat,
         const Vec& setpoint) {
        const auto ref = generate_reference(model, r_hat, setpoint);
        const auto res = control(w, model.input_box(), x, ref);
        return py::make_tuple(res.u, res.saturated);
      },
      py::arg("weights"), py::arg("model"), py::arg("x"), py::arg("r_hat"), py::arg("setpoint"),
      "Returns (u, saturated).");

  m.def(
      "estimate",
      [](const UncertainModel& model, const std::vector<Vec>& states, const std::vector<Vec>& inputs,
         const Vec& r_prev) {
        if (states.size() != inputs.size() || states.size() < 2) {
          throw std::invalid_argument("estimate: need matching states and inputs, at least two");
        }
        EstimationWindow window(static_cast<int>(states.size()) - 1);
        for (std::size_t i = 0; i < states.size(); ++i) window.push(states[i], inputs[i]);
        const auto est = estimate(model, window, r_prev);
        py::dict out;
        out["r_hat"] = est.r_hat;
        out["residual"] = est.residual;
        out["excited"] = est.excited;
        out["held"] = est.held;
        out["iterations"] = est.iterations;
        return out;
      },
      py::arg("model"), py::arg("states"), py::arg("inputs"), py::arg("r_prev"));

  m.def(
      "simulate",
      [](const std::string& config_path, const std::vector<std::string>& overrides,
         const std::string& weights_path) {
        Config cfg = Config::load(config_path);
        for (const auto& o : overrides) cfg.apply_override(o);
        const auto s = ScenarioConfig::from_config(cfg);
        const auto w = load_weights(weights_path.empty() ? s.weights_path : weights_path);
        const auto log = run(s, w);
        std::ostringstream csv;
        write_trajectory_csv(csv, log);
        py::dict out = trajectory_to_dict(log);
        out["csv"] = csv.str();
        return out;
      },
      py::arg("config"), py::arg("overrides") = std::vector<std::string>{},
      py::arg("weights") = std::string{});

  m.attr("__all__") = py::make_tuple("Box", "CstrParams", "UncertainModel", "CstrModel",
                                     "NetworkWeights", "TrainerConfig", "train", "verify",
                                     "generate_reference", "metric_distance", "distance", "control",
                                     "estimate", "simulate");
}
