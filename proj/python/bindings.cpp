#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cstring>
#include <sstream>
#include <string>
#include <vector>

#include "resynth/attribution.hpp"
#include "resynth/dataset.hpp"
#include "resynth/eval.hpp"
#include "resynth/features.hpp"
#include "resynth/image.hpp"
#include "resynth/metrics.hpp"
#include "resynth/perturb.hpp"
#include "resynth/simulator.hpp"

namespace py = pybind11;
using namespace resynth;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;
using ByteArray = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

std::vector<float> to_vector(const FloatArray& a) {
  if (a.ndim() != 1) throw DimensionError("expected a 1-d array");
  return {a.data(), a.data() + a.size()};
}

FloatArray to_array(const FeatureVector& v) {
  FloatArray out(static_cast<py::ssize_t>(v.dim()));
  std::memcpy(out.mutable_data(), v.values().data(), v.dim() * sizeof(float));
  return out;
}

DistanceKind make_kind(const std::string& name, const std::optional<py::array_t<double>>& precision) {
  if (name != "mahalanobis") return DistanceKind::parse(name);
  if (!precision) throw ConfigError("mahalanobis needs a precision matrix");
  const auto p = py::array_t<double, py::array::c_style | py::array::forcecast>::ensure(*precision);
  std::vector<double> values(p.data(), p.data() + p.size());
  if (p.ndim() == 1) return DistanceKind::mahalanobis(PrecisionMatrix::diagonal(std::move(values)));
  if (p.ndim() == 2 && p.shape(0) == p.shape(1))
    return DistanceKind::mahalanobis(PrecisionMatrix::full(static_cast<std::size_t>(p.shape(0)), std::move(values)));
  throw DimensionError("precision must be a vector or a square matrix");
}

Image to_image(const ByteArray& a) {
  if (a.ndim() != 3 || a.shape(2) != 3) throw DimensionError("expected an (h, w, 3) uint8 array");
  Image img(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)));
  std::memcpy(img.rgb.data(), a.data(), img.rgb.size());
  return img;
}

ByteArray to_array(const Image& img) {
  ByteArray out({static_cast<py::ssize_t>(img.height), static_cast<py::ssize_t>(img.width), py::ssize_t{3}});
  std::memcpy(out.mutable_data(), img.rgb.data(), img.rgb.size());
  return out;
}

py::dict result_dict(const AttributionResult& r) {
  py::dict d;
  d["image"] = r.image;
  d["predicted"] = r.predicted;
  d["truth"] = r.truth ? py::object(py::str(*r.truth)) : py::object(py::none());
  d["distances"] = r.distances;
  d["distance_kind"] = r.distance_kind;
  d["missing_sources"] = r.missing_sources;
  return d;
}

std::optional<Split> split_arg(const std::string& split) {
  if (split == "all") return std::nullopt;
  return parse_split(split);
}

std::vector<MethodKind> methods_arg(const std::vector<std::string>& names) {
  std::vector<MethodKind> out;
  for (const auto& n : names) out.push_back(parse_method(n));
  return out;
}

void fill_task(TaskOptions& o, const std::vector<std::string>& methods, const std::vector<std::uint64_t>& seeds,
               const std::string& distance, std::size_t jobs) {
  if (!methods.empty()) o.methods = methods_arg(methods);
  if (!seeds.empty()) o.seeds = seeds;
  o.distance = DistanceKind::parse(distance);
  o.jobs = jobs;
}

std::string report_text(const ExperimentReport& r) { return to_json(r).dump(); }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Training-free source attribution by resynthesis";

  auto base = py::register_exception<Error>(m, "Error");
  py::register_exception<FormatError>(m, "FormatError", base);
  py::register_exception<DimensionError>(m, "DimensionError", base);
  py::register_exception<NonFiniteError>(m, "NonFiniteError", base);
  py::register_exception<LookupError>(m, "LookupError", base);
  py::register_exception<SplitArityError>(m, "SplitArityError", base);
  py::register_exception<LeakageError>(m, "LeakageError", base);
  py::register_exception<SingularityError>(m, "SingularityError", base);
  py::register_exception<ConfigError>(m, "ConfigError", base);
  py::register_exception<OperatorError>(m, "OperatorError", base);
  py::register_exception<TrainingError>(m, "TrainingError", base);
  py::register_exception<ManifestError>(m, "ManifestError", base);

  m.def(
      "distance",
      [](const FloatArray& x, const FloatArray& y, const std::string& kind,
         const std::optional<py::array_t<double>>& precision) {
        const auto a = to_vector(x), b = to_vector(y);
        return distance(make_kind(kind, precision), a, b);
      },
      py::arg("x"), py::arg("y"), py::arg("kind") = "euclidean", py::arg("precision") = py::none());

  m.def(
      "attribute",
      [](const FloatArray& original, const std::map<std::string, FloatArray>& panel, const std::string& kind,
         const std::optional<py::array_t<double>>& precision) {
        std::map<std::string, FeatureVector> p;
        for (const auto& [source, v] : panel) p.emplace(source, FeatureVector(to_vector(v)));
        return result_dict(attribute(FeatureVector(to_vector(original)), p, make_kind(kind, precision)));
      },
      py::arg("original"), py::arg("panel"), py::arg("kind") = "euclidean", py::arg("precision") = py::none());

  py::class_<FeatureStore>(m, "FeatureStore")
      .def(py::init<std::size_t>(), py::arg("dim") = kDefaultFeatureDim)
      .def_property_readonly("dim", &FeatureStore::dim)
      .def("__len__", &FeatureStore::size)
      .def("__contains__", [](const FeatureStore& s, const std::string& id) { return s.contains(id); })
      .def("__getitem__", [](const FeatureStore& s, const std::string& id) { return to_array(s.at(id)); })
      .def("insert", [](FeatureStore& s, std::string id, const FloatArray& v) {
        s.insert(std::move(id), FeatureVector(to_vector(v)));
      })
      .def("ids", [](const FeatureStore& s) {
        std::vector<std::string> out;
        for (const auto& [id, v] : s.entries()) out.push_back(id);
        return out;
      })
      .def("save", [](const FeatureStore& s, const std::filesystem::path& p) { save_store(s, p); })
      .def_static("load", [](const std::filesystem::path& p) { return load_store(p); })
      .def("__eq__", [](const FeatureStore& a, const FeatureStore& b) { return a == b; });

  py::class_<Manifest>(m, "Manifest")
      .def_static("load", [](const std::filesystem::path& p) { return load_manifest(p); })
      .def("save", [](const Manifest& mf, const std::filesystem::path& p) { save_manifest(mf, p); })
      .def("sources", [](const Manifest& mf) {
        std::vector<std::string> out;
        for (const auto& s : mf.sources()) out.push_back(s.name);
        return out;
      })
      .def("characters", &Manifest::characters)
      .def("count", [](const Manifest& mf, const std::string& kind, const std::string& split) {
        const ImageKind k = kind == "original" ? ImageKind::original : ImageKind::resynthesis;
        if (kind != "original" && kind != "resynthesis") throw ConfigError("unknown image kind: " + kind);
        const auto s = split_arg(split);
        return s ? mf.count(k, *s) : mf.count(k);
      }, py::arg("kind"), py::arg("split") = "all")
      .def("is_extended", &Manifest::is_extended)
      .def("panel_sources", &Manifest::panel_sources)
      .def("__eq__", [](const Manifest& a, const Manifest& b) { return a == b; });

  m.def("validate_manifest", [](const Manifest& mf) {
    const ValidationReport r = validate_manifest(mf);
    py::dict d;
    d["valid"] = r.valid();
    d["originals"] = r.originals;
    d["resyntheses"] = r.resyntheses;
    d["prompts"] = r.prompts;
    d["characters"] = r.characters;
    std::vector<std::string> messages;
    for (const auto& v : r.violations) messages.push_back(v.message());
    d["violations"] = messages;
    return d;
  });

  m.def(
      "simulate",
      [](const std::string& config_json, std::size_t jobs) {
        SimulatorConfig cfg = SimulatorConfig::from_json(nlohmann::json::parse(config_json));
        auto data = generate_synthetic_dataset(cfg, jobs);
        return py::make_tuple(std::move(data.manifest), std::move(data.store));
      },
      py::arg("config_json") = "{}", py::arg("jobs") = 1);

  m.def("default_simulator_config", [] { return SimulatorConfig{}.to_json().dump(); });

  m.def(
      "attribute_dataset",
      [](const Manifest& mf, const FeatureStore& store, const std::string& kind, const std::string& split,
         const std::vector<std::string>& sources, std::size_t jobs) {
        AttributeOptions o;
        o.split = split_arg(split);
        o.sources = sources;
        o.jobs = jobs;
        DatasetAttribution r;
        {
          py::gil_scoped_release release;
          r = attribute_dataset(mf, store, DistanceKind::parse(kind), o);
        }
        py::dict d;
        d["accuracy"] = r.accuracy();
        d["coverage"] = r.coverage();
        d["targets"] = r.targets;
        py::list results;
        for (const auto& x : r.results) results.append(result_dict(x));
        d["results"] = results;
        py::list errors;
        for (const auto& e : r.errors) errors.append(py::make_tuple(e.image, e.message));
        d["errors"] = errors;
        return d;
      },
      py::arg("manifest"), py::arg("store"), py::arg("kind") = "euclidean", py::arg("split") = "test",
      py::arg("sources") = std::vector<std::string>{}, py::arg("jobs") = 1);

  m.def(
      "run_plain",
      [](const Manifest& mf, const FeatureStore& store, const std::vector<std::string>& methods,
         const std::vector<std::uint64_t>& seeds, const std::string& distance, std::size_t jobs) {
        TaskOptions o;
        fill_task(o, methods, seeds, distance, jobs);
        py::gil_scoped_release release;
        return report_text(run_plain(mf, store, o));
      },
      py::arg("manifest"), py::arg("store"), py::arg("methods") = std::vector<std::string>{},
      py::arg("seeds") = std::vector<std::uint64_t>{}, py::arg("distance") = "euclidean", py::arg("jobs") = 1);

  m.def(
      "run_few_shot",
      [](const Manifest& mf, const FeatureStore& store, const std::vector<std::size_t>& shots,
         const std::vector<std::size_t>& classes, const std::vector<std::string>& methods,
         const std::vector<std::uint64_t>& seeds, const std::string& distance, std::size_t jobs) {
        FewShotOptions o;
        fill_task(o, methods, seeds, distance, jobs);
        if (!shots.empty()) o.shots = shots;
        if (!classes.empty()) o.classes = classes;
        py::gil_scoped_release release;
        return report_text(run_few_shot(mf, store, o));
      },
      py::arg("manifest"), py::arg("store"), py::arg("shots") = std::vector<std::size_t>{},
      py::arg("classes") = std::vector<std::size_t>{}, py::arg("methods") = std::vector<std::string>{},
      py::arg("seeds") = std::vector<std::uint64_t>{}, py::arg("distance") = "euclidean", py::arg("jobs") = 1);

  m.def("report_csv", [](const std::string& report_json) {
    std::ostringstream out;
    write_csv(report_from_json(nlohmann::ordered_json::parse(report_json)), out);
    return out.str();
  });

  m.def("operators", [] {
    std::vector<std::string> out;
    for (Operator op : kOperators) out.emplace_back(to_string(op));
    return out;
  });

  m.def(
      "sample_params",
      [](const std::string& op, const std::string& image, std::uint64_t seed) {
        return sample_params(PerturbSpec::defaults(parse_operator(op), seed), image).value;
      },
      py::arg("op"), py::arg("image"), py::arg("seed") = 0);

  m.def(
      "perturb",
      [](const ByteArray& pixels, const std::string& op, const std::string& image, std::uint64_t seed) {
        const PerturbDraw draw = sample_params(PerturbSpec::defaults(parse_operator(op), seed), image);
        return py::make_tuple(to_array(apply(to_image(pixels), draw)), draw.value);
      },
      py::arg("pixels"), py::arg("op"), py::arg("image"), py::arg("seed") = 0);
}
