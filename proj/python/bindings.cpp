#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "fewshot/classifiers.hpp"
#include "fewshot/cli.hpp"
#include "fewshot/errors.hpp"
#include "fewshot/evaluator.hpp"
#include "fewshot/preprocessing.hpp"
#include "fewshot/sampler.hpp"
#include "fewshot/synthetic.hpp"

namespace py = pybind11;
using namespace fewshot;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

// classes: sequence of (class_id, array of shape (n_images, n_views, dim)).
FeatureBank bank_from_arrays(const std::string& source_id, const std::vector<std::pair<std::uint32_t, FloatArray>>& classes) {
  if (classes.empty()) throw Error(ErrorCode::EmptyList, "a bank needs at least one class");
  std::uint32_t dim = 0, n_views = 0;
  std::vector<ClassFeatures> out;
  for (const auto& [id, arr] : classes) {
    if (arr.ndim() != 3) throw Error(ErrorCode::DimensionMismatch, "class arrays must be (n_images, n_views, dim)");
    const auto views = static_cast<std::uint32_t>(arr.shape(1));
    const auto d = static_cast<std::uint32_t>(arr.shape(2));
    if (out.empty()) {
      n_views = views;
      dim = d;
    } else if (views != n_views || d != dim) {
      throw Error(ErrorCode::DimensionMismatch, "class arrays disagree on n_views or dim");
    }
    out.push_back({id, static_cast<std::uint32_t>(arr.shape(0)), std::vector<float>(arr.data(), arr.data() + arr.size())});
  }
  return FeatureBank(source_id, dim, n_views, std::move(out));
}

FloatArray class_array(const FeatureBank& bank, std::size_t position) {
  const auto& cls = bank.class_at(position);
  FloatArray arr({static_cast<py::ssize_t>(cls.n_images), static_cast<py::ssize_t>(bank.n_views()),
                  static_cast<py::ssize_t>(bank.dim())});
  std::copy(cls.values.begin(), cls.values.end(), arr.mutable_data());
  return arr;
}

py::dict violation_dict(const Violation& v) {
  py::dict d;
  d["kind"] = v.kind;
  d["message"] = v.message;
  d["class_position"] = v.class_position;
  d["image"] = v.image;
  d["view"] = v.view;
  d["coordinate"] = v.coordinate;
  return d;
}

py::dict summary_dict(const EvalSummary& s) {
  py::dict d;
  d["mean"] = s.mean_accuracy;
  d["interval"] = s.half_interval;
  d["runs"] = s.n_runs;
  d["seconds"] = s.wall_time_seconds;
  d["per_run"] = s.per_run_accuracies;
  return d;
}

BankSet bank_set(const std::vector<const FeatureBank*>& features, const std::vector<const FeatureBank*>& base,
                 const std::vector<Matrix>& support_means) {
  return {features, base, support_means};
}

Task make_task(const std::vector<Matrix>& support, const Matrix& query) {
  Task t;
  t.support = support;
  t.query = query;
  return t;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Few-shot classification evaluation engine.";

  static py::exception<Error> error(m, "FewshotError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object instance = py::reinterpret_borrow<py::object>(error)(e.what());
      instance.attr("code") = to_string(e.code());
      PyErr_SetObject(error.ptr(), instance.ptr());
    }
  });

  py::class_<FeatureBank>(m, "FeatureBank")
      .def(py::init(&bank_from_arrays), py::arg("source_id"), py::arg("classes"),
           "classes: list of (class_id, float array of shape (n_images, n_views, dim))")
      .def_property_readonly("source_id", &FeatureBank::source_id)
      .def_property_readonly("dim", &FeatureBank::dim)
      .def_property_readonly("n_views", &FeatureBank::n_views)
      .def_property_readonly("n_classes", &FeatureBank::n_classes)
      .def_property_readonly("class_ids",
                             [](const FeatureBank& b) {
                               std::vector<std::uint32_t> ids;
                               for (const auto& c : b.classes()) ids.push_back(c.class_id);
                               return ids;
                             })
      .def("n_images", &FeatureBank::n_images, py::arg("position"))
      .def("class_array", &class_array, py::arg("position"))
      .def("same_contents", &same_contents);

  m.def("load_feature_bank", &load_feature_bank, py::arg("path"));
  m.def("write_feature_bank", &write_feature_bank, py::arg("bank"), py::arg("path"));
  m.def(
      "validate_bank",
      [](const FeatureBank& b) {
        py::list out;
        for (const auto& v : validate_bank(b)) out.append(violation_dict(v));
        return out;
      },
      py::arg("bank"));

  py::class_<SyntheticSpec>(m, "SyntheticSpec")
      .def(py::init<>())
      .def_readwrite("n_classes", &SyntheticSpec::n_classes)
      .def_readwrite("dim", &SyntheticSpec::dim)
      .def_readwrite("images_per_class", &SyntheticSpec::images_per_class)
      .def_readwrite("n_views", &SyntheticSpec::n_views)
      .def_readwrite("separation", &SyntheticSpec::separation)
      .def_readwrite("sigma", &SyntheticSpec::sigma)
      .def_readwrite("view_noise", &SyntheticSpec::view_noise)
      .def_readwrite("pin_supports_to_means", &SyntheticSpec::pin_supports_to_means)
      .def_readwrite("seed", &SyntheticSpec::seed)
      .def_readwrite("first_class_id", &SyntheticSpec::first_class_id);
  m.def("generate_bank", &generate_bank, py::arg("spec"));
  m.def("class_means", &class_means, py::arg("spec"));
  m.def("oracle_accuracy", &oracle_accuracy, py::arg("spec"), py::arg("views_averaged") = 0);

  py::enum_<Mode>(m, "Mode").value("Inductive", Mode::Inductive).value("Transductive", Mode::Transductive);

  py::class_<ImbalanceSpec>(m, "ImbalanceSpec")
      .def(py::init<>())
      .def(py::init([](std::uint32_t q_total, double a) { return ImbalanceSpec{q_total, a}; }), py::arg("q_total"),
           py::arg("dirichlet_a"))
      .def_readwrite("q_total", &ImbalanceSpec::q_total)
      .def_readwrite("dirichlet_a", &ImbalanceSpec::dirichlet_a);

  py::class_<PipelineConfig>(m, "PipelineConfig")
      .def(py::init<>())
      .def_readwrite("mode", &PipelineConfig::mode)
      .def_readwrite("use_AS", &PipelineConfig::use_AS)
      .def_readwrite("use_E", &PipelineConfig::use_E)
      .def_readwrite("use_C", &PipelineConfig::use_C)
      .def_readwrite("use_H", &PipelineConfig::use_H)
      .def_readwrite("n", &PipelineConfig::n)
      .def_readwrite("k", &PipelineConfig::k)
      .def_readwrite("q", &PipelineConfig::q)
      .def_readwrite("imbalance", &PipelineConfig::imbalance)
      .def_readwrite("beta", &PipelineConfig::beta)
      .def_readwrite("max_iters", &PipelineConfig::max_iters)
      .def_readwrite("shift_tol", &PipelineConfig::shift_tol)
      .def_readwrite("views", &PipelineConfig::views)
      .def_readwrite("n_runs", &PipelineConfig::n_runs)
      .def_readwrite("global_seed", &PipelineConfig::global_seed)
      .def_readwrite("threads", &PipelineConfig::threads)
      .def_readwrite("keep_per_run", &PipelineConfig::keep_per_run)
      .def("to_json", [](const PipelineConfig& c) { return config_to_json(c).dump(); });
  m.def("method_name", &method_name, py::arg("config"));

  m.def(
      "evaluate",
      [](const std::vector<const FeatureBank*>& features, const PipelineConfig& config,
         const std::vector<const FeatureBank*>& base, const std::vector<Matrix>& support_means) {
        EvalSummary s;
        {
          py::gil_scoped_release release;
          s = evaluate(bank_set(features, base, support_means), config);
        }
        return summary_dict(s);
      },
      py::arg("features"), py::arg("config"), py::arg("base") = std::vector<const FeatureBank*>{},
      py::arg("support_means") = std::vector<Matrix>{});
  m.def(
      "sweep",
      [](const std::vector<const FeatureBank*>& features, const std::string& param, const std::vector<double>& values,
         const PipelineConfig& config, const std::vector<const FeatureBank*>& base) {
        std::vector<SweepRow> rows;
        {
          py::gil_scoped_release release;
          rows = sweep(bank_set(features, base, {}), parse_sweep_param(param), values, config);
        }
        py::list out;
        for (const auto& r : rows) {
          py::dict d = summary_dict(r.summary);
          d["value"] = r.value;
          out.append(d);
        }
        return out;
      },
      py::arg("features"), py::arg("param"), py::arg("values"), py::arg("config"),
      py::arg("base") = std::vector<const FeatureBank*>{});

  m.def(
      "sample_task",
      [](const FeatureBank& bank, std::uint32_t n, std::uint32_t k, std::uint32_t q, std::uint64_t seed) {
        const Task t = sample_task(bank, n, k, q, seed);
        return py::make_tuple(t.support, t.query, t.query_labels);
      },
      py::arg("bank"), py::arg("n"), py::arg("k"), py::arg("q"), py::arg("seed"),
      "Returns (support matrices, query matrix, query labels).");

  m.def(
      "ncm_barycenters", [](const std::vector<Matrix>& support) { return ncm_barycenters(support).centers; },
      py::arg("support"));
  m.def(
      "ncm_predict", [](const Matrix& queries, const Matrix& centers) { return ncm_predict(queries, {centers, 0}); },
      py::arg("queries"), py::arg("centers"));
  m.def(
      "soft_weights",
      [](const FeatureVector& z, const Matrix& centers, double beta) { return soft_weights(z, {centers, 0}, beta); },
      py::arg("z"), py::arg("centers"), py::arg("beta") = 5.0);
  m.def(
      "soft_kmeans",
      [](const std::vector<Matrix>& support, const Matrix& query, double beta, std::uint32_t max_iters,
         double shift_tol) {
        const auto r = soft_kmeans(make_task(support, query), {beta, max_iters, shift_tol});
        return py::make_tuple(r.centers.centers, r.predictions, r.centers.iteration);
      },
      py::arg("support"), py::arg("query"), py::arg("beta") = 5.0, py::arg("max_iters") = 30,
      py::arg("shift_tol") = 1e-6, "Returns (centers, predictions, iterations).");

  m.def(
      "average_views",
      [](const Matrix& views) {
        std::vector<FeatureVector> v;
        for (Eigen::Index r = 0; r < views.rows(); ++r) v.emplace_back(views.row(r).transpose());
        return average_views(v);
      },
      py::arg("views"), "Mean of the rows of a (n_views, dim) array.");
  m.def(
      "concat_features", [](const std::vector<FeatureVector>& parts) { return concat_features(parts); },
      py::arg("parts"));
  m.def(
      "center", [](const FeatureVector& z, const FeatureVector& mean) { return center(z, {mean, MeanSource::BaseDataset}); },
      py::arg("z"), py::arg("mean"));
  m.def("project_hypersphere", &project_hypersphere, py::arg("z"));

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::vector<std::string> all = {"fewshot"};
        all.insert(all.end(), args.begin(), args.end());
        std::vector<const char*> argv;
        for (const auto& a : all) argv.push_back(a.c_str());
        std::ostringstream out, err;
        int code;
        {
          py::gil_scoped_release release;
          code = parse_and_dispatch(static_cast<int>(argv.size()), argv.data(), out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs the command-line tool in-process; returns (exit_code, stdout, stderr).");
}
