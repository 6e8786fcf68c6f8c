#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <algorithm>

#include "ffasynth/error.hpp"
#include "ffasynth/filters.hpp"
#include "ffasynth/metrics.hpp"
#include "ffasynth/saliency.hpp"
#include "ffasynth/trainer.hpp"

namespace py = pybind11;
using namespace ffasynth;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

// (H, W) or (H, W, C) float32 in, Image out
Image to_image(const FloatArray& a) {
  if (a.ndim() != 2 && a.ndim() != 3) throw ParameterError("expected an (H, W) or (H, W, C) array");
  const int h = static_cast<int>(a.shape(0));
  const int w = static_cast<int>(a.shape(1));
  const int c = a.ndim() == 3 ? static_cast<int>(a.shape(2)) : 1;
  return Image(w, h, c, std::vector<float>(a.data(), a.data() + a.size()));
}

FloatArray to_array(const Image& img) {
  std::vector<py::ssize_t> shape{img.height(), img.width()};
  if (img.channels() != 1) shape.push_back(img.channels());
  FloatArray out(shape);
  std::copy(img.data().begin(), img.data().end(), out.mutable_data());
  return out;
}

SaliencyConfig saliency_config(double a, int median_kernel, int gaussian_kernel, double gaussian_sigma) {
  SaliencyConfig c;
  c.a = a;
  c.median_kernel = median_kernel;
  c.gaussian_kernel = gaussian_kernel;
  c.gaussian_sigma = gaussian_sigma;
  return c;
}

DiscriminatorConfig preset(const std::string& name) {
  if (name == "patchgan") return DiscriminatorConfig::patch_gan();
  if (name == "imagegan") return DiscriminatorConfig::image_gan();
  throw ParameterError("unknown discriminator preset '" + name + "'");
}

}  // namespace

PYBIND11_MODULE(_ffasynth, m) {
  m.doc() = "Fundus to angiography translation: filters, saliency, metrics, phantoms and inference";

  py::register_exception<ParameterError>(m, "ParameterError", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", PyExc_OSError);
  py::register_exception<NumericFault>(m, "NumericFault", PyExc_ArithmeticError);

  m.def("load_png", [](const std::filesystem::path& p) { return to_array(load_png(p)); }, py::arg("path"));
  m.def("save_png", [](const FloatArray& a, const std::filesystem::path& p) { save_png(to_image(a), p); },
        py::arg("image"), py::arg("path"));

  m.def("median_filter", [](const FloatArray& a, int k) { return to_array(median_filter(to_image(a), k)); },
        py::arg("image"), py::arg("k"));
  m.def("gaussian_filter",
        [](const FloatArray& a, int k, double sigma) { return to_array(gaussian_filter(to_image(a), k, sigma)); },
        py::arg("image"), py::arg("k"), py::arg("sigma"));

  m.def(
      "compute_saliency",
      [](const FloatArray& a, double contrast, int median_kernel, int gaussian_kernel, double gaussian_sigma) {
        SaliencyMap s = compute_saliency(to_image(a), saliency_config(contrast, median_kernel, gaussian_kernel, gaussian_sigma));
        FloatArray out({s.height, s.width});
        std::copy(s.data.begin(), s.data.end(), out.mutable_data());
        return out;
      },
      py::arg("image"), py::arg("a") = 1.0, py::arg("median_kernel") = 51, py::arg("gaussian_kernel") = 7,
      py::arg("gaussian_sigma") = 1.5);

  m.def("mse", [](const FloatArray& x, const FloatArray& y) { return mse(to_image(x), to_image(y)); },
        py::arg("x"), py::arg("y"));
  m.def("psnr", [](const FloatArray& x, const FloatArray& y) { return psnr(to_image(x), to_image(y)); },
        py::arg("x"), py::arg("y"));
  m.def(
      "ssim",
      [](const FloatArray& x, const FloatArray& y, const std::string& mode) {
        SSIMParams p;
        p.mode = ssim_mode_from_string(mode);
        return ssim(to_image(x), to_image(y), p);
      },
      py::arg("x"), py::arg("y"), py::arg("mode") = "global");

  m.def(
      "synth_phantoms",
      [](int n, int size, std::uint64_t seed) {
        py::list out;
        for (const auto& p : synth_phantom_pairs(n, size, seed))
          out.append(py::make_tuple(p.source_id, to_array(p.structure), to_array(p.angiography)));
        return out;
      },
      py::arg("n"), py::arg("size"), py::arg("seed"));

  m.def(
      "lr_schedule",
      [](int epoch, int epochs, int decay_start, double lr) {
        TrainConfig t;
        t.epochs = epochs;
        t.decay_start_epoch = decay_start;
        t.lr0 = lr;
        return lr_schedule(epoch, t);
      },
      py::arg("epoch"), py::arg("epochs") = 200, py::arg("decay_start") = 100, py::arg("lr") = 2e-4);

  m.def("receptive_field", [](const std::string& name) { return receptive_field(preset(name)); },
        py::arg("preset") = "patchgan");
  m.def("score_map_size", [](int h, int w, const std::string& name) { return score_map_size(preset(name), h, w); },
        py::arg("height"), py::arg("width"), py::arg("preset") = "patchgan");

  m.def(
      "translate",
      [](const std::filesystem::path& ckpt, const FloatArray& structure) {
        Image img = to_image(structure);
        Image out;
        {
          py::gil_scoped_release unlock;
          out = translate(ckpt, img);
        }
        return to_array(out);
      },
      py::arg("checkpoint"), py::arg("structure"));
}
