#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "nsdeform/deformation.hpp"
#include "nsdeform/gp.hpp"
#include "nsdeform/kriging.hpp"
#include "nsdeform/pipeline.hpp"
#include "nsdeform/registration.hpp"
#include "nsdeform/scoring.hpp"
#include "nsdeform/variogram.hpp"

namespace py = pybind11;
using namespace nsdeform;

namespace {

Partition make_partition(const std::vector<std::array<double, 4>>& boxes) {
  std::vector<Box> out;
  for (const auto& b : boxes) out.push_back(Box{b[0], b[1], b[2], b[3]});
  return Partition(std::move(out));
}

}  // namespace

PYBIND11_MODULE(_nsdeform, m) {
  m.doc() = "Nonstationary spatial modelling by variogram alignment and space deformation";

  py::register_exception<Error>(m, "Error");
  py::register_exception<ConfigError>(m, "ConfigError");
  py::register_exception<IoError>(m, "IoError");
  py::register_exception<NumericalError>(m, "NumericalError");
  py::register_exception<ParameterError>(m, "ParameterError", PyExc_ValueError);
  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);

  py::class_<VariogramModel>(m, "VariogramModel")
      .def(py::init([](double sigma2, double alpha, double nu, double nugget) {
             VariogramModel v{sigma2, alpha, nu, nugget};
             v.validate();
             return v;
           }),
           py::arg("sigma2") = 1.0, py::arg("alpha") = 1.0, py::arg("nu") = 0.5, py::arg("nugget") = 0.0)
      .def_readwrite("sigma2", &VariogramModel::sigma2)
      .def_readwrite("alpha", &VariogramModel::alpha)
      .def_readwrite("nu", &VariogramModel::nu)
      .def_readwrite("nugget", &VariogramModel::nugget)
      .def("correlation", &VariogramModel::correlation)
      .def("covariance", [](const VariogramModel& v, double h) { return matern_covariance(h, v); })
      .def("semivariance", [](const VariogramModel& v, double h) { return matern_semivariance(h, v); })
      .def("__repr__", [](const VariogramModel& v) {
        return "VariogramModel(sigma2=" + std::to_string(v.sigma2) + ", alpha=" + std::to_string(v.alpha) +
               ", nu=" + std::to_string(v.nu) + ", nugget=" + std::to_string(v.nugget) + ")";
      });

  py::class_<FitResult>(m, "FitResult")
      .def_readonly("model", &FitResult::model)
      .def_readonly("loglik", &FitResult::loglik)
      .def_readonly("evaluations", &FitResult::evaluations)
      .def_readonly("converged", &FitResult::converged);

  m.def(
      "fit_matern_mle",
      [](const Eigen::MatrixXd& coords, const Eigen::VectorXd& values, std::optional<double> fix_nu, bool with_nugget,
         int n_starts, std::uint64_t seed) {
        FitOptions o;
        o.fix_nu = fix_nu;
        o.with_nugget = with_nugget;
        o.n_starts = n_starts;
        o.seed = seed;
        return fit_matern_mle(coords, values, o);
      },
      py::arg("coords"), py::arg("values"), py::arg("fix_nu") = py::none(), py::arg("with_nugget") = false,
      py::arg("n_starts") = 5, py::arg("seed") = 0x5EED);
  m.def("gaussian_loglik", &gaussian_loglik, py::arg("coords"), py::arg("values"), py::arg("model"));
  m.def(
      "determine_ht", [](const std::vector<VariogramModel>& models, double rel_tol) { return determine_ht(models, rel_tol); },
      py::arg("models"), py::arg("rel_tol") = 0.05);

  m.def(
      "dp_align",
      [](const std::vector<double>& target, const std::vector<double>& moving, int max_step) {
        DpOptions o;
        o.max_step = max_step;
        const DpResult r = dp_align(to_srvf(target), to_srvf(moving), o);
        return py::make_tuple(r.warp, r.cost);
      },
      py::arg("target"), py::arg("moving"), py::arg("max_step") = 12,
      "Aligns two curves sampled on a common uniform grid of [0, 1]; returns (gamma, cost) with moving o gamma ~ target.");

  py::class_<WarpingFunction>(m, "WarpingFunction")
      .def(py::init<std::vector<double>, std::vector<double>, double>(), py::arg("knots"), py::arg("warped"),
           py::arg("bandwidth") = 0.0)
      .def_static("identity", &WarpingFunction::identity, py::arg("h_t"), py::arg("m") = 512)
      .def("__call__", &WarpingFunction::operator())
      .def_property_readonly("h_t", &WarpingFunction::horizon)
      .def_property_readonly("knots", &WarpingFunction::knots)
      .def_property_readonly("values", &WarpingFunction::warped);

  m.def(
      "register_variograms",
      [](const std::vector<VariogramModel>& models, double h_t, std::size_t m_grid) {
        std::vector<SampledFunction> fs;
        for (const auto& v : models) fs.push_back(sample_on_grid(v, h_t, m_grid));
        return register_set(fs).warps;
      },
      py::arg("models"), py::arg("h_t"), py::arg("m") = 512,
      "Registers fitted regional variograms on [0, h_t]; returns one warp per model.");

  m.def(
      "warped_distance_matrix",
      [](const Eigen::MatrixXd& sites, const std::vector<std::array<double, 4>>& boxes,
         const std::vector<WarpingFunction>& warps) {
        return warped_distance_matrix(sites, make_partition(boxes), warps).values;
      },
      py::arg("sites"), py::arg("boxes"), py::arg("warps"),
      "Boxes are (xmin, xmax, ymin, ymax) tuples tiling the domain, one warp per box.");

  m.def(
      "cmds",
      [](const Eigen::MatrixXd& distances, int d) {
        const DeformedEmbedding e = Cmds(distances).embed(d);
        return py::make_tuple(e.coords, embedding_nmse(distances, e.coords));
      },
      py::arg("distances"), py::arg("d"), "Classical MDS coordinates and NMSE for a distance matrix.");
  m.def(
      "nmse_curve",
      [](const Eigen::MatrixXd& distances, int psi_max, double epsilon) {
        const DimensionSelection s = select_dimension(Cmds(distances), distances, psi_max, epsilon);
        return py::make_tuple(s.psi, s.nmse);
      },
      py::arg("distances"), py::arg("psi_max") = 10, py::arg("epsilon") = 1e-3);

  m.def(
      "simulate",
      [](const Eigen::MatrixXd& sites, const std::vector<std::array<double, 4>>& boxes,
         const std::vector<double>& kernels, double nu, std::uint64_t seed) {
        std::vector<Eigen::Matrix2d> k;
        for (double v : kernels) k.push_back(Eigen::Matrix2d::Identity() * v);
        const KernelField field(make_partition(boxes), k, std::vector<double>(k.size(), 1.0), nu);
        return Eigen::VectorXd(simulate(sites, field, seed).values);
      },
      py::arg("sites"), py::arg("boxes"), py::arg("kernels"), py::arg("nu"), py::arg("seed"),
      "Unit-variance nonstationary Matern field with isotropic kernel ell^2 I per box.");
  m.def(
      "regular_grid", [](double xmin, double xmax, double ymin, double ymax, int nx, int ny) {
        return Eigen::MatrixXd(regular_grid(Box{xmin, xmax, ymin, ymax}, nx, ny));
      },
      py::arg("xmin"), py::arg("xmax"), py::arg("ymin"), py::arg("ymax"), py::arg("nx"), py::arg("ny"));

  m.def(
      "krige",
      [](const Eigen::MatrixXd& train, const Eigen::VectorXd& values, const Eigen::MatrixXd& test,
         const VariogramModel& model) {
        const KrigingOutput out = krige(train, values, test, model);
        Eigen::VectorXd mean(test.rows()), sd(test.rows());
        for (const auto& p : out.predictions) {
          mean[p.site] = p.mean;
          sd[p.site] = p.sd;
        }
        return py::make_tuple(mean, sd);
      },
      py::arg("train"), py::arg("values"), py::arg("test"), py::arg("model"),
      "Simple kriging of zero-mean data; returns (mean, sd) arrays.");

  m.def("crps_gaussian", &crps_gaussian, py::arg("mean"), py::arg("sd"), py::arg("truth"));
  m.def("logs_gaussian", &logs_gaussian, py::arg("mean"), py::arg("sd"), py::arg("truth"));
  m.def(
      "score",
      [](const std::vector<double>& means, const std::vector<double>& sds, const std::vector<double>& truths) {
        const ScoreReport r = score_predictions("model", means, sds, truths);
        return py::dict(py::arg("mspe") = r.mspe, py::arg("mae") = r.mae, py::arg("crps") = r.crps,
                        py::arg("logs") = r.logs, py::arg("n_test") = r.n_test);
      },
      py::arg("means"), py::arg("sds"), py::arg("truths"));

  m.def(
      "run",
      [](const std::filesystem::path& config, std::optional<std::filesystem::path> out,
         std::optional<std::uint64_t> seed) {
        RunConfig c = load_config(config);
        if (seed) c.seed = seed;
        PipelineOptions o;
        o.output_dir = out ? *out : c.output_dir;
        const PipelineResult r = [&] {
          py::gil_scoped_release release;
          return run_pipeline(c, o);
        }();
        py::dict d;
        d["h_t"] = r.h_t;
        d["psi"] = r.selection.psi;
        d["nmse"] = r.selection.nmse;
        d["output_dir"] = o.output_dir->string();
        auto scores = [](const ScoreReport& s) {
          return py::dict(py::arg("mspe") = s.mspe, py::arg("mae") = s.mae, py::arg("crps") = s.crps,
                          py::arg("logs") = s.logs, py::arg("n_test") = s.n_test);
        };
        if (r.completed >= Stage::Score && r.sites.n_test > 0) {
          d["nonstationary"] = scores(r.nonstationary.scores);
          d["stationary"] = scores(r.stationary.scores);
        }
        return d;
      },
      py::arg("config"), py::arg("out") = py::none(), py::arg("seed") = py::none(),
      "Runs the full pipeline from a JSON config and writes all artifacts.");
}
