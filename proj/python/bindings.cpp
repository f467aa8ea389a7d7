#include <pybind11/eigen.h>
#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "disccal/baselines.hpp"
#include "disccal/calibrate.hpp"
#include "disccal/domain.hpp"
#include "disccal/errors.hpp"
#include "disccal/metrics.hpp"
#include "disccal/oracle.hpp"
#include "disccal/sampling.hpp"
#include "disccal/surrogate.hpp"

namespace py = pybind11;
using namespace disccal;

namespace {

ParamVector to_params(const std::vector<double>& v) {
    if (v.size() != kParamCount) throw ShapeError("expected 13 parameter values");
    ParamVector p{};
    std::copy(v.begin(), v.end(), p.begin());
    return p;
}

py::dict report_dict(const TrainReport& r) {
    py::dict d;
    d["epochs_run"] = r.epochs_run;
    d["best_epoch"] = r.best_epoch;
    d["best_val_loss"] = r.best_val_loss;
    d["train_curve"] = r.train_curve;
    d["val_curve"] = r.val_curve;
    d["wall_time_s"] = r.wall_time_s;
    return d;
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "C++ core of disc_calib";

    static py::exception<Error> error(m, "Error");
    py::register_exception<BoundsViolation>(m, "BoundsViolation", error.ptr());
    py::register_exception<ParseError>(m, "ParseError", error.ptr());
    py::register_exception<ShapeError>(m, "ShapeError", error.ptr());
    py::register_exception<FrozenRequired>(m, "FrozenRequired", error.ptr());
    py::register_exception<EmptyDataset>(m, "EmptyDataset", error.ptr());
    py::register_exception<GridMismatch>(m, "GridMismatch", error.ptr());
    py::register_exception<DegenerateVariance>(m, "DegenerateVariance", error.ptr());
    py::register_exception<DatasetMissing>(m, "DatasetMissing", error.ptr());

    py::enum_<LoadCase>(m, "LoadCase")
        .value("AXIAL_ROTATION", LoadCase::AxialRotation)
        .value("EXTENSION", LoadCase::Extension)
        .value("FLEXION", LoadCase::Flexion)
        .value("LATERAL_BENDING", LoadCase::LateralBending);

    py::enum_<LossKind>(m, "LossKind").value("L1", LossKind::L1).value("L2", LossKind::L2);

    py::enum_<ConstraintMode>(m, "ConstraintMode")
        .value("PROJECTION", ConstraintMode::Projection)
        .value("PENALTY", ConstraintMode::PenaltyLoss)
        .value("NONE", ConstraintMode::None);

    py::class_<MaterialBounds>(m, "MaterialBounds")
        .def_static("defaults", &MaterialBounds::defaults)
        .def_static("load", &MaterialBounds::load, py::arg("path"))
        .def_property_readonly("names", [](const MaterialBounds& b) { return std::vector<std::string>(b.names.begin(), b.names.end()); })
        .def_property_readonly("lower", [](const MaterialBounds& b) { return std::vector<double>(b.lower.begin(), b.lower.end()); })
        .def_property_readonly("upper", [](const MaterialBounds& b) { return std::vector<double>(b.upper.begin(), b.upper.end()); });

    m.def(
        "normalize",
        [](const std::vector<double>& physical, const MaterialBounds& bounds) {
            const auto c = normalize(MaterialConfig{to_params(physical), Space::Physical}, bounds);
            return std::vector<double>(c.values.begin(), c.values.end());
        },
        py::arg("physical"), py::arg("bounds") = MaterialBounds::defaults());
    m.def(
        "denormalize",
        [](const std::vector<double>& normalized, const MaterialBounds& bounds) {
            const auto r = denormalize(MaterialConfig{to_params(normalized), Space::Normalized}, bounds);
            return py::make_tuple(std::vector<double>(r.config.values.begin(), r.config.values.end()), r.out_of_range);
        },
        py::arg("normalized"), py::arg("bounds") = MaterialBounds::defaults(),
        "Returns (physical values, out_of_range flag).");

    py::class_<LoadGrid>(m, "LoadGrid")
        .def(py::init<std::vector<LoadCase>, std::vector<double>>(), py::arg("load_cases"), py::arg("moments"))
        .def_static("standard", &LoadGrid::standard)
        .def_property_readonly("load_cases", &LoadGrid::load_cases)
        .def_property_readonly("moments", &LoadGrid::moments)
        .def_property_readonly("cell_count", &LoadGrid::cell_count)
        .def(py::self == py::self);

    py::class_<RomTable>(m, "RomTable")
        .def(py::init<LoadGrid, std::vector<double>>(), py::arg("grid"), py::arg("values"))
        .def_readonly("grid", &RomTable::grid)
        .def_readonly("values", &RomTable::values)
        .def_static("load_csv", &RomTable::load_csv, py::arg("path"))
        .def_static("parse_csv", &RomTable::parse_csv, py::arg("text"))
        .def("to_csv", &RomTable::to_csv);

    m.def("lhs_unit", [](std::size_t n, std::size_t d, std::uint64_t seed) { return lhs_unit(SamplePlan{n, d, seed}); },
          py::arg("n"), py::arg("d") = kParamCount, py::arg("seed") = 0);
    m.def("uniform_unit", &uniform_unit, py::arg("n"), py::arg("d") = kParamCount, py::arg("seed") = 0);

    m.def(
        "oracle_rom",
        [](const std::vector<double>& p, LoadCase c, double moment) { return oracle_rom(to_params(p), c, moment); },
        py::arg("normalized"), py::arg("load_case"), py::arg("moment"));
    m.def(
        "oracle_table",
        [](const std::vector<double>& p, const LoadGrid& grid) { return oracle_table(to_params(p), grid); },
        py::arg("normalized"), py::arg("grid") = LoadGrid::standard());

    py::class_<Dataset>(m, "Dataset")
        .def_property_readonly("config_count", &Dataset::config_count)
        .def_property_readonly("record_count", [](const Dataset& d) { return d.records.size(); })
        .def("to_csv", &dataset_to_csv);
    m.def("generate_dataset", &generate_dataset, py::arg("n_configs"), py::arg("grid") = LoadGrid::standard(),
          py::arg("seed") = 0);
    m.def("save_dataset", &save_dataset, py::arg("dataset"), py::arg("path"));
    m.def("load_dataset", &load_dataset, py::arg("path"));

    py::class_<NetConfig>(m, "NetConfig")
        .def(py::init<>())
        .def_static("preset", &NetConfig::preset, py::arg("name"))
        .def_readwrite("layer_widths", &NetConfig::layer_widths)
        .def_readwrite("dropout_p", &NetConfig::dropout_p)
        .def_readwrite("weight_decay", &NetConfig::weight_decay)
        .def_readwrite("learning_rate", &NetConfig::learning_rate)
        .def_readwrite("batch_size", &NetConfig::batch_size)
        .def_readwrite("max_epochs", &NetConfig::max_epochs)
        .def_readwrite("early_stopping_patience", &NetConfig::early_stopping_patience)
        .def_readwrite("loss", &NetConfig::loss)
        .def_readwrite("seed", &NetConfig::seed);

    py::class_<SurrogateNet>(m, "SurrogateNet")
        .def_static("load", &SurrogateNet::load, py::arg("path"))
        .def_static("from_json", &SurrogateNet::from_json, py::arg("text"))
        .def("save", &SurrogateNet::save, py::arg("path"))
        .def("to_json", &SurrogateNet::to_json)
        .def_property_readonly("frozen", &SurrogateNet::frozen)
        .def("forward", &SurrogateNet::forward, py::arg("batch"))
        .def("input_gradient", py::overload_cast<const Eigen::MatrixXd&>(&SurrogateNet::input_gradient, py::const_),
             py::arg("batch"))
        .def(
            "predict_table",
            [](const SurrogateNet& net, const std::vector<double>& p, const LoadGrid& grid) {
                return net.predict_table(MaterialConfig{to_params(p), Space::Normalized}, grid);
            },
            py::arg("normalized"), py::arg("grid") = LoadGrid::standard());

    m.def(
        "train_surrogate",
        [](const Dataset& ds, const NetConfig& cfg, double val_fraction) {
            py::gil_scoped_release release;
            auto [net, report] = train_surrogate(ds, cfg, val_fraction);
            py::gil_scoped_acquire acquire;
            return py::make_tuple(std::move(net), report_dict(report));
        },
        py::arg("dataset"), py::arg("config") = NetConfig{}, py::arg("val_fraction") = 0.1,
        "Returns (frozen SurrogateNet, training report dict).");

    py::class_<PgdConfig>(m, "PgdConfig")
        .def(py::init<>())
        .def_readwrite("eta", &PgdConfig::eta)
        .def_readwrite("steps", &PgdConfig::steps)
        .def_readwrite("restarts", &PgdConfig::restarts)
        .def_readwrite("loss", &PgdConfig::loss)
        .def_readwrite("constraint", &PgdConfig::constraint)
        .def_readwrite("penalty_weight", &PgdConfig::penalty_weight)
        .def_readwrite("seed", &PgdConfig::seed);

    py::class_<CalibrationResult>(m, "CalibrationResult")
        .def_readonly("method", &CalibrationResult::method)
        .def_property_readonly("calibrated",
                               [](const CalibrationResult& r) {
                                   return std::vector<double>(r.calibrated.values.begin(), r.calibrated.values.end());
                               })
        .def_readonly("per_load_case_r2", &CalibrationResult::per_load_case_r2)
        .def_readonly("r2_mean", &CalibrationResult::r2_mean)
        .def_readonly("mae_deg", &CalibrationResult::mae_deg)
        .def_readonly("sum_exceeding", &CalibrationResult::sum_exceeding)
        .def_readonly("restarts_run", &CalibrationResult::restarts_run)
        .def_readonly("best_restart_index", &CalibrationResult::best_restart_index)
        .def_readonly("generations_run", &CalibrationResult::generations_run)
        .def_readonly("wall_time_s", &CalibrationResult::wall_time_s)
        .def_readonly("loss_curve", &CalibrationResult::loss_curve)
        .def_readonly("predicted", &CalibrationResult::predicted);

    m.def("project", &project, py::arg("x"));
    m.def(
        "sum_exceeding", [](const std::vector<double>& v) { return sum_exceeding(v); }, py::arg("values"));
    m.def(
        "calibrate",
        [](const SurrogateNet& net, const RomTable& targets, const PgdConfig& cfg) {
            py::gil_scoped_release release;
            return calibrate(net, targets, cfg);
        },
        py::arg("net"), py::arg("targets"), py::arg("config") = PgdConfig{});
    m.def("result_to_json", &result_to_json, py::arg("result"), py::arg("bounds") = MaterialBounds::defaults(),
          py::arg("include_timing") = false);

    py::class_<GaConfig>(m, "GaConfig")
        .def(py::init<>())
        .def_readwrite("max_generations", &GaConfig::max_generations)
        .def_readwrite("r2_stop", &GaConfig::r2_stop)
        .def_readwrite("seed", &GaConfig::seed);
    m.def(
        "ga_calibrate",
        [](const SurrogateNet& net, const RomTable& targets, const GaConfig& cfg) {
            py::gil_scoped_release release;
            return ga_calibrate(net, targets, cfg);
        },
        py::arg("net"), py::arg("targets"), py::arg("config") = GaConfig{});

    py::class_<InverseNetConfig>(m, "InverseNetConfig")
        .def(py::init<>())
        .def_readwrite("layer_widths", &InverseNetConfig::layer_widths)
        .def_readwrite("learning_rate", &InverseNetConfig::learning_rate)
        .def_readwrite("batch_size", &InverseNetConfig::batch_size)
        .def_readwrite("max_epochs", &InverseNetConfig::max_epochs)
        .def_readwrite("patience", &InverseNetConfig::patience)
        .def_readwrite("train_set_size", &InverseNetConfig::train_set_size)
        .def_readwrite("seed", &InverseNetConfig::seed);
    py::class_<InverseNet>(m, "InverseNet")
        .def_static("load", &InverseNet::load, py::arg("path"))
        .def("save", &InverseNet::save, py::arg("path"))
        .def("predict", py::overload_cast<const Eigen::MatrixXd&>(&InverseNet::predict, py::const_), py::arg("rom"));
    m.def(
        "train_inverse",
        [](const SurrogateNet& net, const InverseNetConfig& cfg) {
            py::gil_scoped_release release;
            auto [inv, report] = train_inverse(net, cfg);
            py::gil_scoped_acquire acquire;
            return py::make_tuple(std::move(inv), report_dict(report));
        },
        py::arg("net"), py::arg("config") = InverseNetConfig{});
    m.def("inverse_calibrate", &inverse_calibrate, py::arg("inverse"), py::arg("net"), py::arg("targets"));

    m.def("mae", &mae, py::arg("y"), py::arg("yhat"));
    m.def("r2_per_case", &r2_per_case, py::arg("y"), py::arg("yhat"));
    m.def("r2_mean", &r2_mean, py::arg("y"), py::arg("yhat"));
}
