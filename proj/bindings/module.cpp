#include "mtaa/data.hpp"
#include "mtaa/image.hpp"
#include "mtaa/metrics.hpp"
#include "mtaa/moo.hpp"
#include "mtaa/score_dist.hpp"

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace mtaa;

namespace {

Image image_from_array(const py::array_t<std::uint8_t, py::array::c_style>& arr) {
  if (arr.ndim() != 3 || arr.shape(2) != 3) {
    throw InvalidInput("expected an uint8 array of shape (height, width, 3)");
  }
  Image img(static_cast<int>(arr.shape(0)), static_cast<int>(arr.shape(1)));
  std::memcpy(img.pixels.data(), arr.data(), img.pixels.size());
  return img;
}

py::array_t<std::uint8_t> image_to_array(const Image& img) {
  py::array_t<std::uint8_t> arr({img.height, img.width, 3});
  std::memcpy(arr.mutable_data(), img.pixels.data(), img.pixels.size());
  return arr;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Multi-task aesthetic score distribution toolkit";
  m.attr("__version__") = MTAA_VERSION;
  m.attr("NUM_LEVELS") = kNumLevels;
  m.attr("NUM_TASKS") = kNumTasks;

  py::register_exception<InvalidInput>(m, "InvalidInputError", PyExc_ValueError);
  py::register_exception<NumericFailure>(m, "NumericFailureError", PyExc_ArithmeticError);

  // score distributions and the EMD loss
  m.def(
      "cdf", [](const Vec& probs) { return cdf(ScoreDistribution(probs)); }, py::arg("probs"),
      "Prefix sums of a 5-level probability vector.");
  m.def(
      "emd_loss",
      [](const Vec& y, const Vec& yhat, double r) {
        return emd_loss(ScoreDistribution(y), ScoreDistribution(yhat), EmdConfig{r});
      },
      py::arg("y"), py::arg("yhat"), py::arg("r") = 2.0,
      "r-norm Earth Mover's Distance between two 5-level distributions.");
  m.def(
      "emd_grad_logits",
      [](const Vec& y, const Vec& logits, double r) {
        return emd_grad_logits(ScoreDistribution(y), logits, EmdConfig{r});
      },
      py::arg("y"), py::arg("logits"), py::arg("r") = 2.0,
      "Gradient of emd_loss(y, softmax(logits)) with respect to the logits.");
  m.def(
      "mean_score", [](const Vec& probs) { return mean_score(ScoreDistribution(probs)); },
      py::arg("probs"), "Expected level in [1, 5].");
  m.def("softmax", &softmax, py::arg("logits"));

  // min-norm solvers
  py::class_<SolverReport>(m, "SolverReport")
      .def_property_readonly("delta", [](const SolverReport& r) { return r.delta.delta; })
      .def_readonly("combined_norm", &SolverReport::combined_norm)
      .def_readonly("iterations", &SolverReport::iterations)
      .def_readonly("converged", &SolverReport::converged)
      .def("__repr__", [](const SolverReport& r) {
        std::string s = "SolverReport(delta=[";
        for (int i = 0; i < r.delta.delta.size(); ++i) {
          s += (i ? ", " : "") + std::to_string(r.delta.delta[i]);
        }
        return s + "], combined_norm=" + std::to_string(r.combined_norm) +
               ", converged=" + (r.converged ? std::string("True") : std::string("False")) + ")";
      });

  m.def(
      "min_norm_2", [](const Vec& g1, const Vec& g2) { return min_norm_2(g1, g2).delta; },
      py::arg("g1"), py::arg("g2"),
      "Weights (gamma, 1-gamma) of the min-norm point on the segment between two gradients.");
  m.def(
      "frank_wolfe_min_norm",
      [](const std::vector<Vec>& grads, int max_iter, double tol) {
        GradientSet set;
        set.grads = grads;
        return frank_wolfe_min_norm(set, max_iter, tol);
      },
      py::arg("grads"), py::arg("max_iter") = kSolverMaxIter, py::arg("tol") = kSolverTol,
      "Min-norm point of the gradient convex hull over the task simplex.");

  // evaluation measures
  m.def("pcc", &pcc, py::arg("a"), py::arg("b"), "Pearson correlation coefficient.");
  m.def("scc", &scc, py::arg("a"), py::arg("b"),
        "Spearman rank correlation (average ranks for ties).");
  m.def("rmse", &rmse, py::arg("a"), py::arg("b"), "Root mean squared error.");

  // preprocessing
  m.def(
      "pad_and_rescale",
      [](const py::array_t<std::uint8_t, py::array::c_style>& arr) {
        return image_to_array(pad_and_rescale(image_from_array(arr)));
      },
      py::arg("image"),
      "Letterbox an RGB image onto the 454 x 984 canvas, preserving aspect ratio.");
  m.def(
      "multi_patch",
      [](const py::array_t<std::uint8_t, py::array::c_style>& arr, int n_local, int patch_h,
         int patch_w, bool with_global, int n_global, std::uint64_t seed) {
        MultiPatchOptions opts;
        opts.n_local = n_local;
        opts.patch_height = patch_h;
        opts.patch_width = patch_w;
        opts.with_global = with_global;
        opts.n_global = n_global;
        std::vector<py::array_t<std::uint8_t>> out;
        for (const Image& patch : multi_patch(image_from_array(arr), opts, seed)) {
          out.push_back(image_to_array(patch));
        }
        return out;
      },
      py::arg("image"), py::arg("n_local") = 4, py::arg("patch_h") = 227,
      py::arg("patch_w") = 492, py::arg("with_global") = false, py::arg("n_global") = 2,
      py::arg("seed") = 0, "Seeded random local crops plus optional rescaled global patches.");

  // synthetic data
  m.def(
      "synth_scores",
      [](int n, int feature_dim, double noise, std::uint64_t seed) {
        SynthProfile profile;
        profile.feature_dim = feature_dim;
        const SynthDataset data = synth_generate(n, profile, noise, seed);
        Mat scores(n, 4);
        for (int i = 0; i < n; ++i) {
          for (int t = 0; t < 4; ++t) scores(i, t) = mean_score(data.records[i].targets[t]);
        }
        return py::make_tuple(data.features, scores);
      },
      py::arg("n"), py::arg("feature_dim") = 8, py::arg("noise") = 0.05, py::arg("seed") = 0,
      "Features and per-dimension mean scores of a synthetic dataset.");
}
