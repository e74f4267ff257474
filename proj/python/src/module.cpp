#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "sdfgen/pipeline.hpp"
#include "sdfgen/sdf_kernel.hpp"
#include "sdfgen/spectral.hpp"
#include "sdfgen/surface.hpp"
#include "sdfgen/synth.hpp"

namespace py = pybind11;
using namespace sdfgen;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;
using Index = py::array_t<std::int64_t, py::array::c_style | py::array::forcecast>;

// Grids cross the boundary as [z, y, x] arrays on the canonical lattice.
Array to_array(const SdfGrid& g) {
  Array a({g.dims[2], g.dims[1], g.dims[0]});
  std::copy(g.values.begin(), g.values.end(), a.mutable_data());
  return a;
}

SdfGrid to_grid(const Array& a) {
  if (a.ndim() != 3 || a.shape(0) != a.shape(1) || a.shape(1) != a.shape(2) || a.shape(0) < 2) {
    throw py::value_error("expected a cubic [n, n, n] array with n >= 2");
  }
  SdfGrid g = SdfGrid::canonical(std::size_t(a.shape(0)));
  std::copy(a.data(), a.data() + a.size(), g.values.begin());
  return g;
}

TriMesh to_mesh(const Array& v, const Index& f) {
  if (v.ndim() != 2 || v.shape(1) != 3 || f.ndim() != 2 || f.shape(1) != 3) {
    throw py::value_error("expected vertices [N, 3] and triangles [M, 3]");
  }
  TriMesh m;
  for (py::ssize_t i = 0; i < v.shape(0); ++i) m.vertices.push_back({v.at(i, 0), v.at(i, 1), v.at(i, 2)});
  for (py::ssize_t i = 0; i < f.shape(0); ++i) {
    Triangle t;
    for (int k = 0; k < 3; ++k) {
      const auto idx = f.at(i, k);
      if (idx < 0 || idx >= v.shape(0)) throw py::index_error("triangle index out of range");
      t[k] = std::uint32_t(idx);
    }
    m.triangles.push_back(t);
  }
  m.validate();
  return m;
}

py::tuple from_mesh(const TriMesh& m) {
  Array v({m.vertices.size(), std::size_t(3)});
  Index f({m.triangles.size(), std::size_t(3)});
  auto vv = v.mutable_unchecked<2>();
  auto ff = f.mutable_unchecked<2>();
  for (std::size_t i = 0; i < m.vertices.size(); ++i) {
    vv(i, 0) = m.vertices[i].x;
    vv(i, 1) = m.vertices[i].y;
    vv(i, 2) = m.vertices[i].z;
  }
  for (std::size_t i = 0; i < m.triangles.size(); ++i)
    for (int k = 0; k < 3; ++k) ff(i, k) = m.triangles[i][k];
  return py::make_tuple(v, f);
}

py::dict from_generation(const Generation& g) {
  py::dict d;
  d["low"] = to_array(g.low);
  d["high"] = to_array(g.high);
  d["composed"] = to_array(g.composed);
  d["field"] = to_array(g.field);
  auto [v, f] = from_mesh(g.mesh).cast<std::pair<py::object, py::object>>();
  d["vertices"] = v;
  d["triangles"] = f;
  return d;
}

GenerateOptions make_options(std::optional<std::string> symmetry, int smoothing_iterations) {
  GenerateOptions o;
  if (symmetry) o.symmetry = axis_from_string(*symmetry);
  o.surface.smoothing_iterations = smoothing_iterations;
  return o;
}

}  // namespace

PYBIND11_MODULE(_sdfgen, m) {
  m.doc() = "Signed distance fields from meshes and a two-stage generative model over them";
  m.attr("__version__") = SDFGEN_VERSION;
  py::register_exception<Error>(m, "SdfgenError", PyExc_RuntimeError);

  m.def("load_mesh", [](const std::filesystem::path& p) { return from_mesh(load_mesh(p).mesh); }, py::arg("path"),
        "Read an OBJ or STL file into (vertices, triangles).");
  m.def(
      "normalize_mesh",
      [](const Array& v, const Index& f) {
        const TriMesh n = normalize_mesh(to_mesh(v, f));
        const auto [nv, nf] = from_mesh(n).cast<std::pair<py::object, py::object>>();
        const Vec3 c = n.normalization->center;
        return py::make_tuple(nv, nf, py::make_tuple(c.x, c.y, c.z), n.normalization->scale);
      },
      py::arg("vertices"), py::arg("triangles"),
      "Fit a mesh into the canonical cube; returns (vertices, triangles, center, scale).");
  m.def(
      "mesh_to_sdf",
      [](const Array& v, const Index& f, std::size_t resolution, double threshold, unsigned threads) {
        const TriMesh mesh = to_mesh(v, f);
        SdfOptions o;
        o.threshold = threshold;
        o.threads = threads;
        py::gil_scoped_release release;
        SdfGrid g = mesh_to_sdf(mesh, resolution, o);
        py::gil_scoped_acquire acquire;
        return to_array(g);
      },
      py::arg("vertices"), py::arg("triangles"), py::arg("resolution"), py::arg("threshold") = 0.5,
      py::arg("threads") = 0u, "Signed distance (positive inside) on the canonical n^3 lattice, indexed [z, y, x].");
  m.def(
      "winding_number",
      [](const Array& v, const Index& f, std::array<double, 3> p) {
        return winding_number(to_mesh(v, f), {p[0], p[1], p[2]});
      },
      py::arg("vertices"), py::arg("triangles"), py::arg("point"));
  m.def("read_sdf", [](const std::filesystem::path& p) { return to_array(read_sdf(p)); }, py::arg("path"));
  m.def("write_sdf", [](const std::filesystem::path& p, const Array& a) { write_sdf(to_grid(a), p); },
        py::arg("path"), py::arg("grid"));
  m.def(
      "split_bands",
      [](const Array& a, int cutoff) {
        const Bands b = split_bands(to_grid(a), FilterSpec{cutoff});
        return py::make_tuple(to_array(b.low), to_array(b.high));
      },
      py::arg("grid"), py::arg("cutoff"), "Complementary (low, high) frequency bands.");
  m.def("low_pass", [](const Array& a, int cutoff) { return to_array(low_pass(to_grid(a), FilterSpec{cutoff})); },
        py::arg("grid"), py::arg("cutoff"));
  m.def("marching_cubes", [](const Array& a, double iso) { return from_mesh(marching_cubes(to_grid(a), iso)); },
        py::arg("grid"), py::arg("iso") = 0.0);
  m.def(
      "extract_surface",
      [](const Array& a, double iso, int iterations, double lambda) {
        return from_mesh(extract_surface(to_grid(a), IsoSurfaceConfig{iso, iterations, lambda}));
      },
      py::arg("grid"), py::arg("iso") = 0.0, py::arg("smoothing_iterations") = 5, py::arg("smoothing_lambda") = 0.5);
  m.def(
      "mesh_stats",
      [](const Array& v, const Index& f) {
        const TriMesh mesh = to_mesh(v, f);
        py::dict d;
        d["area"] = surface_area(mesh);
        d["euler"] = euler_characteristic(mesh);
        d["closed_manifold"] = is_closed_manifold(mesh);
        return d;
      },
      py::arg("vertices"), py::arg("triangles"));
  m.def(
      "eikonal_residual",
      [](const Array& a) {
        const auto e = eikonal_residual(to_grid(a));
        py::dict d;
        d["mean"] = e.mean;
        d["median"] = e.median;
        d["p95"] = e.p95;
        d["max"] = e.max;
        d["evaluated"] = e.evaluated;
        d["excluded"] = e.excluded;
        return d;
      },
      py::arg("grid"));
  m.def("make_icosphere", [](double r, int subdiv) { return from_mesh(make_icosphere(r, subdiv)); },
        py::arg("radius"), py::arg("subdivisions"));
  m.def(
      "synth_dataset",
      [](const std::filesystem::path& out, const std::string& family, std::size_t count, std::uint64_t seed,
         std::size_t resolution) {
        SynthSpec s;
        s.family = synth_family_from_string(family);
        s.count = count;
        s.seed = seed;
        s.resolution = resolution;
        return synth_dataset(s, out).size();
      },
      py::arg("out_dir"), py::arg("family") = "chairs", py::arg("count") = 20, py::arg("seed") = 0,
      py::arg("resolution") = 16, "Write a synthetic dataset; returns the number of shapes.");

  py::class_<ShapeGenerator>(m, "ShapeGenerator")
      .def(py::init([](const std::filesystem::path& lfg, const std::filesystem::path& hfg, std::optional<int> cutoff) {
             return ShapeGenerator::load(lfg, hfg, cutoff);
           }),
           py::arg("lfg"), py::arg("hfg"), py::arg("cutoff") = py::none())
      .def_property_readonly("latent_dim", &ShapeGenerator::latent_dim)
      .def_property_readonly("resolution", &ShapeGenerator::resolution)
      .def_property_readonly("cutoff", &ShapeGenerator::cutoff)
      .def_property_readonly("tau", &ShapeGenerator::tau)
      .def(
          "generate",
          [](ShapeGenerator& g, std::uint64_t seed, std::optional<std::string> symmetry, int smoothing) {
            return from_generation(g.run_seed(seed, make_options(symmetry, smoothing)));
          },
          py::arg("seed"), py::arg("symmetry") = py::none(), py::arg("smoothing_iterations") = 5)
      .def(
          "interpolate",
          [](ShapeGenerator& g, std::uint64_t a, std::uint64_t b, std::size_t steps, std::optional<std::string> symmetry,
             int smoothing) {
            py::list out;
            for (const auto& gen : g.interpolate(a, b, steps, make_options(symmetry, smoothing)))
              out.append(from_generation(gen));
            return out;
          },
          py::arg("seed_a"), py::arg("seed_b"), py::arg("steps") = 9, py::arg("symmetry") = py::none(),
          py::arg("smoothing_iterations") = 5);

  m.def(
      "train_lfg",
      [](const std::filesystem::path& dataset, const std::filesystem::path& checkpoint, std::size_t steps,
         std::size_t batch, std::uint64_t seed, std::optional<std::filesystem::path> log) {
        gan::TrainSchedule s;
        s.total_steps = steps;
        s.batch_size = batch;
        s.seed = seed;
        std::vector<SdfGrid> data;
        for (const auto& g : load_dataset(dataset)) data.push_back(truncate_field(g, gan::kDefaultTau));
        gan::LfgConfig c = gan::LfgConfig::desk();
        c.base_resolution = data.at(0).dims[0] >> c.n_upconv_layers;
        py::gil_scoped_release release;
        const auto r = gan::train_lfg(data, c, s, gan::kDefaultTau, checkpoint, log.value_or(""));
        std::size_t skipped = 0;
        for (const auto& mtr : r.metrics) skipped += mtr.d_skipped;
        return skipped;
      },
      py::arg("dataset"), py::arg("checkpoint"), py::arg("steps") = 500, py::arg("batch") = 8, py::arg("seed") = 0,
      py::arg("log") = py::none(), "Train the desk-size LFG; returns the number of skipped discriminator steps.");
  m.def(
      "train_hfg",
      [](const std::filesystem::path& dataset, const std::filesystem::path& checkpoint, std::size_t steps,
         std::size_t batch, std::uint64_t seed, int cutoff, std::optional<std::filesystem::path> log) {
        gan::TrainSchedule s;
        s.total_steps = steps;
        s.batch_size = batch;
        s.seed = seed;
        std::vector<SdfGrid> data;
        for (const auto& g : load_dataset(dataset)) data.push_back(truncate_field(g, gan::kDefaultTau));
        const auto pairs = make_hfg_pairs(data, cutoff);
        gan::HfgConfig c;
        c.resolution = data.at(0).dims[0];
        py::gil_scoped_release release;
        const auto r = gan::train_hfg(pairs.low, pairs.high, c, s, gan::kDefaultTau, cutoff, checkpoint, log.value_or(""));
        return r.metrics.empty() ? 0.0 : r.metrics.back().l1.value_or(0.0);
      },
      py::arg("dataset"), py::arg("checkpoint"), py::arg("steps") = 1000, py::arg("batch") = 8, py::arg("seed") = 0,
      py::arg("cutoff") = 2, py::arg("log") = py::none(), "Train the HFG; returns the last batch L1.");
}
