#include <reflev/analytics.hpp>
#include <reflev/commands.hpp>
#include <reflev/config.hpp>
#include <reflev/errors.hpp>
#include <reflev/estimation.hpp>
#include <reflev/levy_model.hpp>
#include <reflev/periodic_barrier.hpp>
#include <reflev/reflection_sim.hpp>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

namespace py = pybind11;
using namespace reflev;

namespace {

template <class T>
std::string repr_of(const char* name, const T& fields) {
    std::ostringstream s;
    s << name << "(" << fields << ")";
    return s.str();
}

}  // namespace

PYBIND11_MODULE(_reflev, m) {
    m.doc() = "Doubly reflected Levy processes with a periodic lower barrier";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
    py::register_exception<NoRootError>(m, "NoRootError", PyExc_RuntimeError);
    py::register_exception<InsufficientDataError>(m, "InsufficientDataError", PyExc_RuntimeError);
    py::register_exception<OverflowError>(m, "SimulationOverflowError", PyExc_RuntimeError);

    py::class_<ExpPositive>(m, "ExpPositive")
        .def(py::init([](double v) { return ExpPositive{v}; }), py::arg("rate"))
        .def_readwrite("rate", &ExpPositive::rate);
    py::class_<ExpNegative>(m, "ExpNegative")
        .def(py::init([](double v) { return ExpNegative{v}; }), py::arg("rate"))
        .def_readwrite("rate", &ExpNegative::rate);
    py::class_<TwoSidedExp>(m, "TwoSidedExp")
        .def(py::init([](double p, double up, double down) { return TwoSidedExp{p, up, down}; }),
             py::arg("p_up"), py::arg("rate_up"), py::arg("rate_down"))
        .def_readwrite("p_up", &TwoSidedExp::p_up)
        .def_readwrite("rate_up", &TwoSidedExp::rate_up)
        .def_readwrite("rate_down", &TwoSidedExp::rate_down);
    py::class_<PointMass>(m, "PointMass")
        .def(py::init([](double v) { return PointMass{v}; }), py::arg("size"))
        .def_readwrite("size", &PointMass::size);

    py::class_<LevyModel>(m, "LevyModel")
        .def(py::init([](double drift, double sigma, double intensity, JumpLaw jump) {
                 LevyModel model{drift, sigma, intensity, jump};
                 model.validate();
                 return model;
             }),
             py::arg("drift") = 0.0, py::arg("sigma") = 0.0, py::arg("intensity") = 0.0,
             py::arg("jump") = JumpLaw{ExpPositive{1.0}})
        .def_static(
            "mm1",
            [](double lambda, double mu) {
                LevyModel model{-1.0, 0.0, lambda, ExpPositive{mu}};
                model.validate();
                return model;
            },
            py::arg("lam"), py::arg("mu"), "Workload input of an M/M/1 queue with unit service speed.")
        .def_readwrite("drift", &LevyModel::drift)
        .def_readwrite("sigma", &LevyModel::sigma)
        .def_readwrite("intensity", &LevyModel::intensity)
        .def_readwrite("jump", &LevyModel::jump)
        .def("__repr__", [](const LevyModel& lm) {
            std::ostringstream s;
            s << "drift=" << lm.drift << ", sigma=" << lm.sigma << ", intensity=" << lm.intensity;
            return repr_of("LevyModel", s.str());
        });

    m.def("kappa", &kappa, py::arg("model"), py::arg("alpha"));
    m.def("kappa_derivative", &kappa_derivative, py::arg("model"), py::arg("alpha"));
    m.def("mean_x1", &mean_x1, py::arg("model"));
    m.def("lundberg_root", &lundberg_root, py::arg("model"));
    m.def("tilt", &tilt, py::arg("model"), py::arg("gamma"));
    m.def(
        "exponent_domain",
        [](const LevyModel& model) {
            const auto d = exponent_domain(model);
            return py::make_tuple(d.lo, d.hi);
        },
        py::arg("model"));

    py::class_<BarrierPiece>(m, "BarrierPiece")
        .def(py::init([](double t0, double t1, double level, double slope) {
                 return BarrierPiece{t0, t1, level, slope};
             }),
             py::arg("t_begin"), py::arg("t_end"), py::arg("level"), py::arg("slope"))
        .def_readonly("t_begin", &BarrierPiece::t_begin)
        .def_readonly("t_end", &BarrierPiece::t_end)
        .def_readonly("level", &BarrierPiece::level)
        .def_readonly("slope", &BarrierPiece::slope);

    py::class_<PeriodicBarrier>(m, "PeriodicBarrier")
        .def(py::init<std::vector<BarrierPiece>>(), py::arg("pieces"))
        .def_static("sawtooth", &PeriodicBarrier::sawtooth, py::arg("amplitude"))
        .def_static("three_ramp", &PeriodicBarrier::three_ramp)
        .def_static("zero", &PeriodicBarrier::zero, py::arg("period") = 1.0)
        .def_property_readonly("pieces", &PeriodicBarrier::pieces)
        .def_property_readonly("period", &PeriodicBarrier::period)
        .def_property_readonly("amplitude", &PeriodicBarrier::amplitude)
        .def("value", &PeriodicBarrier::value, py::arg("t"))
        .def("phase_weights", &PeriodicBarrier::phase_weights, py::arg("z"))
        .def("mean_level", &PeriodicBarrier::mean_level)
        .def("exp_moment", &PeriodicBarrier::exp_moment, py::arg("gamma"))
        .def("invariant_cdf", [](const PeriodicBarrier& b, double y) { return b.invariant_measure().cdf(y); })
        .def("invariant_density",
             [](const PeriodicBarrier& b, double y) { return b.invariant_measure().density(y); });

    py::enum_<Scheme>(m, "Scheme").value("EVENT", Scheme::kEvent).value("GRID", Scheme::kGrid);
    py::enum_<Mutation>(m, "Mutation")
        .value("NONE", Mutation::kNone)
        .value("REVERSED_CLAMP", Mutation::kReversedClamp);

    py::class_<SimConfig>(m, "SimConfig")
        .def(py::init([](double buffer, double horizon, std::uint64_t seed, Scheme scheme, double grid_step) {
                 SimConfig c;
                 c.buffer = buffer;
                 c.horizon = horizon;
                 c.seed = seed;
                 c.scheme = scheme;
                 c.grid_step = grid_step;
                 return c;
             }),
             py::arg("buffer"), py::arg("horizon"), py::arg("seed") = 1, py::arg("scheme") = Scheme::kEvent,
             py::arg("grid_step") = 1e-3)
        .def_readwrite("buffer", &SimConfig::buffer)
        .def_readwrite("horizon", &SimConfig::horizon)
        .def_readwrite("burn_in", &SimConfig::burn_in)
        .def_readwrite("grid_step", &SimConfig::grid_step)
        .def_readwrite("scheme", &SimConfig::scheme)
        .def_readwrite("seed", &SimConfig::seed)
        .def_readwrite("batches", &SimConfig::batches)
        .def_readwrite("v_bins", &SimConfig::v_bins)
        .def_readwrite("a_bins", &SimConfig::a_bins)
        .def_readwrite("record_histogram", &SimConfig::record_histogram)
        .def_readwrite("initial_level", &SimConfig::initial_level)
        .def_readwrite("mutation", &SimConfig::mutation);

    py::class_<RegulatorRate>(m, "RegulatorRate")
        .def_readonly("rate", &RegulatorRate::rate)
        .def_readonly("half_width", &RegulatorRate::half_width)
        .def_readonly("standard_error", &RegulatorRate::standard_error)
        .def_readonly("continuous", &RegulatorRate::continuous)
        .def_readonly("jump", &RegulatorRate::jump);

    py::class_<LossRateReport>(m, "LossRateReport")
        .def_readonly("buffer", &LossRateReport::buffer)
        .def_readonly("loss", &LossRateReport::loss)
        .def_readonly("lower", &LossRateReport::lower)
        .def_readonly("effective_horizon", &LossRateReport::effective_horizon)
        .def_readonly("replicas", &LossRateReport::replicas)
        .def_readonly("batch_count", &LossRateReport::batch_count)
        .def_readonly("seed", &LossRateReport::seed)
        .def_readonly("warnings", &LossRateReport::warnings);

    m.def("estimate_loss_rates", &estimate_loss_rates, py::arg("model"), py::arg("barrier"), py::arg("config"),
          py::arg("replicas") = 1, py::arg("workers") = 1, py::call_guard<py::gil_scoped_release>());
    m.def("constant_barrier_reference", &constant_barrier_reference, py::arg("model"), py::arg("buffer"),
          py::arg("config"), py::arg("replicas") = 1, py::arg("workers") = 1,
          py::call_guard<py::gil_scoped_release>());

    py::class_<ZeroMeanTest>(m, "ZeroMeanTest")
        .def_readonly("alpha", &ZeroMeanTest::alpha)
        .def_readonly("mean", &ZeroMeanTest::mean)
        .def_readonly("standard_error", &ZeroMeanTest::standard_error)
        .def_readonly("replicas", &ZeroMeanTest::replicas)
        .def_readonly("passed", &ZeroMeanTest::pass);
    m.def("martingale_zero_mean", &martingale_zero_mean, py::arg("model"), py::arg("barrier"), py::arg("config"),
          py::arg("alpha"), py::arg("replicas"), py::arg("workers") = 1, py::call_guard<py::gil_scoped_release>());

    m.def("phase_sample_ks", &phase_sample_ks, py::arg("barrier"), py::arg("t"), py::arg("n"), py::arg("seed"));

    py::class_<MM1SawConstant>(m, "MM1SawConstant")
        .def_readonly("gamma", &MM1SawConstant::gamma)
        .def_readonly("printed", &MM1SawConstant::printed)
        .def_readonly("assembled", &MM1SawConstant::assembled);
    m.def("mm1_saw_constant", &mm1_saw_constant, py::arg("lam"), py::arg("mu"), py::arg("amplitude"));

    py::class_<AsymptoticsReport>(m, "AsymptoticsReport")
        .def_readonly("gamma", &AsymptoticsReport::gamma)
        .def_readonly("fixed_intercept", &AsymptoticsReport::fixed_intercept)
        .def_readonly("free_slope", &AsymptoticsReport::free_slope)
        .def_readonly("free_intercept", &AsymptoticsReport::free_intercept)
        .def_readonly("c_gamma", &AsymptoticsReport::c_gamma)
        .def_readonly("closed_form", &AsymptoticsReport::closed_form)
        .def_readonly("log_residuals", &AsymptoticsReport::log_residuals);
    m.def(
        "fit_asymptote",
        [](const std::vector<std::tuple<double, double, double>>& rows, double gamma) {
            std::vector<LossPoint> pts;
            for (const auto& [k, rate, hw] : rows) pts.push_back({k, rate, hw});
            return fit_asymptote(pts, gamma);
        },
        py::arg("rows"), py::arg("gamma"), "rows: (K, loss rate, CI half-width) triples");

    py::class_<RunConfig>(m, "RunConfig")
        .def_readonly("model", &RunConfig::model)
        .def_readonly("barrier", &RunConfig::barrier)
        .def_readonly("sim", &RunConfig::sim)
        .def_readonly("buffers", &RunConfig::buffers)
        .def_readonly("replicas", &RunConfig::replicas)
        .def_readonly("warnings", &RunConfig::warnings);
    m.def("parse_config", &parse_config, py::arg("text"), py::arg("overrides") = std::vector<std::string>{});
    m.def(
        "simulate_config",
        [](const RunConfig& cfg, double buffer) { return run_simulation(cfg, buffer).report; },
        py::arg("config"), py::arg("buffer"), py::call_guard<py::gil_scoped_release>());
}
