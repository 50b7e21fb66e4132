// Copyright 2026 The SiA Authors
// SPDX-License-Identifier: Apache-2.0

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>

#include "sia/checkpoint.hpp"
#include "sia/data.hpp"
#include "sia/errors.hpp"
#include "sia/eval.hpp"
#include "sia/geometry.hpp"
#include "sia/harness.hpp"
#include "sia/manifest_io.hpp"
#include "sia/matching.hpp"
#include "sia/model.hpp"
#include "sia/synthetic.hpp"
#include "sia/weaksup.hpp"

namespace py = pybind11;

namespace {

using Box4 = std::array<double, 4>;

sia::BoxXYXY to_box(const Box4& b) { return {b[0], b[1], b[2], b[3]}; }
Box4 from_box(const sia::BoxXYXY& b) { return {b.x1, b.y1, b.x2, b.y2}; }

sia::Clip clip_from_array(const py::array_t<float, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 4 || a.shape(3) != 3) throw sia::ArgumentError("clip array must have shape (T, H, W, 3)");
  sia::Clip clip(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)), static_cast<int>(a.shape(2)));
  clip.keyframe_index = sia::middle_frame(clip.frames);
  std::memcpy(clip.pixels.data(), a.data(), clip.pixels.size() * sizeof(float));
  return clip;
}

py::array_t<float> clip_to_array(const sia::Clip& clip) {
  py::array_t<float> a({clip.frames, clip.height, clip.width, 3});
  std::memcpy(a.mutable_data(), clip.pixels.data(), clip.pixels.size() * sizeof(float));
  return a;
}

py::object json_to_py(const nlohmann::ordered_json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

nlohmann::json py_to_json(const py::object& o) {
  return nlohmann::json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "SiA core bindings";

  // Translators run in reverse registration order, so the base goes first.
  const auto base = py::register_exception<sia::Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<sia::ValidationError>(m, "ValidationError", base.ptr());
  py::register_exception<sia::ParseError>(m, "ParseError", base.ptr());
  py::register_exception<sia::ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<sia::ArgumentError>(m, "ArgumentError", base.ptr());
  py::register_exception<sia::IoError>(m, "IoError", base.ptr());
  py::register_exception<sia::LookupError>(m, "LookupError", base.ptr());
  py::register_exception<sia::ContractError>(m, "ContractError", base.ptr());
  py::register_exception<sia::DivergenceError>(m, "DivergenceError", base.ptr());

  m.def("iou", [](const Box4& a, const Box4& b) { return sia::iou(to_box(a), to_box(b)); });
  m.def("giou", [](const Box4& a, const Box4& b) { return sia::giou(to_box(a), to_box(b)); });

  m.def(
      "hungarian",
      [](const Eigen::MatrixXd& cost) {
        sia::CostMatrix c(static_cast<std::size_t>(cost.rows()), static_cast<std::size_t>(cost.cols()));
        for (Eigen::Index i = 0; i < cost.rows(); ++i) {
          for (Eigen::Index j = 0; j < cost.cols(); ++j) c(i, j) = cost(i, j);
        }
        const sia::Assignment a = sia::hungarian(c);
        return py::make_tuple(a.pairs, a.total_cost);
      },
      py::arg("cost"), "Returns ([(prediction, gt)], total cost).");

  m.def(
      "average_precision",
      [](const std::vector<std::tuple<std::string, Box4, double>>& dets,
         const std::vector<std::tuple<std::string, Box4>>& gts, double iou_threshold) {
        std::vector<sia::ScoredBox> d;
        for (const auto& [clip, box, score] : dets) d.push_back({clip, to_box(box), score});
        std::vector<sia::GroundTruthBox> g;
        for (const auto& [clip, box] : gts) g.push_back({clip, to_box(box)});
        return sia::average_precision(d, g, iou_threshold);
      },
      py::arg("detections"), py::arg("ground_truth"), py::arg("iou_threshold") = sia::kDefaultIouThreshold);

  py::class_<sia::KeyframeAnnotation>(m, "KeyframeAnnotation")
      .def(py::init<>())
      .def_readwrite("clip_id", &sia::KeyframeAnnotation::clip_id)
      .def_property(
          "boxes",
          [](const sia::KeyframeAnnotation& a) {
            std::vector<Box4> out;
            for (const auto& b : a.boxes) out.push_back(from_box(b));
            return out;
          },
          [](sia::KeyframeAnnotation& a, const std::vector<Box4>& boxes) {
            a.boxes.clear();
            for (const auto& b : boxes) a.boxes.push_back(to_box(b));
          })
      .def_readwrite("action_sets", &sia::KeyframeAnnotation::action_sets)
      .def_readwrite("global_action", &sia::KeyframeAnnotation::global_action)
      .def("__eq__", [](const sia::KeyframeAnnotation& a, const sia::KeyframeAnnotation& b) { return a == b; });

  m.def("parse_ava_csv", [](const std::string& text) { return sia::parse_ava_csv(std::string_view(text)); });
  m.def("serialize_ava_csv", &sia::serialize_ava_csv);

  m.def("nws_expand", [](const sia::KeyframeAnnotation& ann) { return sia::nws_expand(ann).expanded(); },
        "Per-box label sets after appending the global action.");

  m.def(
      "generate_synthetic",
      [](std::uint64_t seed, int n_clips, const py::object& config) {
        const sia::SynthConfig cfg = config.is_none() ? sia::SynthConfig{} : sia::SynthConfig::from_json(py_to_json(config));
        const sia::SyntheticDataset ds = sia::generate_synthetic(seed, n_clips, cfg);
        py::list clips;
        for (const auto& c : ds.clips) clips.append(clip_to_array(c));
        py::dict out;
        out["vocabulary"] = json_to_py(ds.vocab.to_json());
        out["manifest"] = json_to_py(sia::manifest_to_json(ds.manifest));
        out["clips"] = clips;
        out["performer"] = ds.performer;
        return out;
      },
      py::arg("seed"), py::arg("n_clips"), py::arg("config") = py::none());

  py::class_<sia::SiaModel>(m, "Model")
      .def(py::init([](const py::object& config) {
             return sia::SiaModel(config.is_none() ? sia::ModelConfig::toy()
                                                   : sia::ModelConfig::from_json(py_to_json(config)));
           }),
           py::arg("config") = py::none())
      .def_property_readonly("config", [](const sia::SiaModel& model) { return json_to_py(model.config().to_json()); })
      .def("encode_text", &sia::SiaModel::encode_text)
      .def("encode_text_base", &sia::SiaModel::encode_text_base)
      .def("encode_video",
           [](const sia::SiaModel& model, const py::array_t<float, py::array::c_style | py::array::forcecast>& a) {
             py::list out;
             for (const auto& t : model.encode_video(clip_from_array(a))) {
               out.append(py::make_tuple(Box4{t.box.cx, t.box.cy, t.box.w, t.box.h}, t.p_act, t.embedding));
             }
             return out;
           },
           "List of ((cx, cy, w, h), p_act, embedding).")
      .def_property_readonly("num_parameters",
                             [](const sia::SiaModel& model) { return model.parameters().scalar_count(); });

  m.def("load_model", [](const std::string& path) { return sia::load_model(path); });
  m.def("train", [](const std::string& config_path) { sia::train(sia::RunConfig::load(config_path)); },
        py::arg("config_path"), py::call_guard<py::gil_scoped_release>());
}
