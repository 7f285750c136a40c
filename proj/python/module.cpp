#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <algorithm>
#include <cstring>
#include <memory>

#include "hsplat/metrics.hpp"
#include "hsplat/protocol.hpp"
#include "hsplat/render.hpp"
#include "hsplat/scene_io.hpp"

namespace py = pybind11;
using namespace hsplat;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

py::array_t<float> image_to_array(const Image& img) {
    py::array_t<float> out({img.height, img.width, 3});
    std::memcpy(out.mutable_data(), img.rgb.data(), img.rgb.size() * sizeof(float));
    return out;
}

Image array_to_image(const FloatArray& a) {
    if (a.ndim() != 3 || a.shape(2) != 3) {
        throw Error(ErrorCode::invalid_input, "expected an HxWx3 float array");
    }
    Image img(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)));
    std::memcpy(img.rgb.data(), a.data(), img.rgb.size() * sizeof(float));
    return img;
}

py::dict stats_dict(const FrameStats& s, std::uint64_t inversions) {
    py::dict d;
    d["generate_ms"] = s.generate_ms;
    d["preprocess_ms"] = s.preprocess_ms;
    d["sort_ms"] = s.sort_ms;
    d["draw_ms"] = s.draw_ms;
    d["total_ms"] = s.total_ms;
    d["splats_in"] = s.splats_in;
    d["splats_visible"] = s.splats_visible;
    d["inversions"] = inversions;
    return d;
}

py::array_t<std::uint32_t> to_array(const std::vector<std::uint32_t>& v) {
    py::array_t<std::uint32_t> out(std::vector<py::ssize_t>{static_cast<py::ssize_t>(v.size())});
    std::copy(v.begin(), v.end(), out.mutable_data());
    return out;
}

std::span<const std::uint32_t> as_span(const py::array_t<std::uint32_t, py::array::c_style | py::array::forcecast>& a) {
    return {a.data(), static_cast<std::size_t>(a.size())};
}

nlohmann::json parse_text(const std::string& text) {
    try {
        return nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::parse, e.what());
    }
}

}  // namespace

PYBIND11_MODULE(_hsplat, m) {
    m.doc() = "Hybrid Gaussian splat renderer";

    static py::handle error_type = py::exception<Error>(m, "HsplatError", PyExc_RuntimeError).release();
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) {
                std::rethrow_exception(p);
            }
        } catch (const Error& e) {
            py::object exc = py::reinterpret_borrow<py::object>(error_type)(e.what());
            exc.attr("code") = std::string(error_code_token(e.code()));
            PyErr_SetObject(error_type.ptr(), exc.ptr());
        }
    });

    py::class_<Camera>(m, "Camera")
        .def_static(
            "orbit",
            [](float yaw, float pitch, float radius, std::array<float, 3> target, float fovy, int width, int height,
               float near_plane, float far_plane) {
                auto c = Camera::orbit(yaw, pitch, radius, Vec3f(target[0], target[1], target[2]), fovy,
                                       {width, height}, near_plane, far_plane);
                c.validate();
                return c;
            },
            py::arg("yaw"), py::arg("pitch"), py::arg("radius"), py::arg("target") = std::array<float, 3>{0, 0, 0},
            py::arg("fovy") = 0.87266f, py::arg("width") = 256, py::arg("height") = 256, py::arg("near") = 0.1f,
            py::arg("far") = 100.0f)
        .def_static(
            "look_at",
            [](std::array<float, 3> eye, std::array<float, 3> target, std::array<float, 3> up, float fovy, int width,
               int height, float near_plane, float far_plane) {
                auto c = Camera::look_at(Vec3f(eye[0], eye[1], eye[2]), Vec3f(target[0], target[1], target[2]),
                                         Vec3f(up[0], up[1], up[2]), fovy, {width, height}, near_plane, far_plane);
                c.validate();
                return c;
            },
            py::arg("eye"), py::arg("target") = std::array<float, 3>{0, 0, 0},
            py::arg("up") = std::array<float, 3>{0, 1, 0}, py::arg("fovy") = 0.87266f, py::arg("width") = 256,
            py::arg("height") = 256, py::arg("near") = 0.1f, py::arg("far") = 100.0f)
        .def_static(
            "from_json", [](const std::string& text) { return parse_camera(parse_text(text)); },
            py::arg("text"))
        .def_property_readonly("width", [](const Camera& c) { return c.viewport.width; })
        .def_property_readonly("height", [](const Camera& c) { return c.viewport.height; })
        .def_property_readonly("position", [](const Camera& c) {
            const Vec3f p = c.position();
            return std::array<float, 3>{p.x(), p.y(), p.z()};
        });

    py::class_<Scene, std::shared_ptr<Scene>>(m, "Scene")
        .def_static(
            "load", [](const std::filesystem::path& p) { return std::make_shared<Scene>(load_scene(p)); },
            py::arg("path"))
        .def_static(
            "from_json",
            [](const std::string& text, const std::filesystem::path& base_dir) {
                return std::make_shared<Scene>(parse_scene(parse_text(text), base_dir));
            },
            py::arg("text"), py::arg("base_dir") = std::filesystem::path{})
        .def_property_readonly("gaussians", &Scene::max_gaussians)
        .def_property_readonly("joints", &scene_joint_count)
        .def_property_readonly("has_mesh", [](const Scene& s) { return s.mesh.has_value(); })
        .def_property_readonly("models", [](const Scene& s) {
            py::list out;
            for (const auto& mi : s.models) {
                py::dict d;
                d["id"] = mi.model_id;
                d["name"] = mi.name;
                d["count"] = mi.max_count();
                d["degree"] = mi.degree();
                d["requires_pose"] = mi.requires_pose();
                out.append(d);
            }
            return out;
        });

    py::class_<Renderer>(m, "Renderer")
        .def(py::init([](const std::string& strategy) { return Renderer(SortStrategy::parse(strategy)); }),
             py::arg("strategy") = "global")
        .def_property(
            "strategy", [](const Renderer& r) { return r.strategy().token(); },
            [](Renderer& r, const std::string& t) { r.set_strategy(SortStrategy::parse(t)); })
        .def(
            "render",
            [](Renderer& r, const Scene& scene, const Camera& cam, float time) {
                FrameResult f;
                {
                    py::gil_scoped_release release;
                    f = r.render(scene, cam, make_inputs(scene, cam, time));
                }
                return py::make_tuple(image_to_array(f.image), stats_dict(f.stats, f.inversions));
            },
            py::arg("scene"), py::arg("camera"), py::arg("time") = 0.0f);

    m.def(
        "render",
        [](const Scene& scene, const Camera& cam, const std::string& strategy, float time) {
            FrameResult f;
            const auto s = SortStrategy::parse(strategy);
            {
                py::gil_scoped_release release;
                f = render_frame(scene, cam, make_inputs(scene, cam, time), s);
            }
            return py::make_tuple(image_to_array(f.image), stats_dict(f.stats, f.inversions));
        },
        py::arg("scene"), py::arg("camera"), py::arg("strategy") = "global", py::arg("time") = 0.0f,
        "Render one frame; returns (HxWx3 float32 image, stats dict).");

    m.def(
        "to_rgba8",
        [](const FloatArray& a) {
            const Rgba8Image q = to_rgba8(array_to_image(a));
            py::array_t<std::uint8_t> out({q.height, q.width, 4});
            std::memcpy(out.mutable_data(), q.pixels.data(), q.pixels.size());
            return out;
        },
        py::arg("image"));
    m.def(
        "write_png", [](const std::filesystem::path& p, const FloatArray& a) { write_png(p, array_to_image(a)); },
        py::arg("path"), py::arg("image"));
    m.def(
        "psnr", [](const FloatArray& a, const FloatArray& b) { return psnr(array_to_image(a), array_to_image(b)); },
        py::arg("a"), py::arg("b"));
    m.def(
        "ssim", [](const FloatArray& a, const FloatArray& b) { return ssim(array_to_image(a), array_to_image(b)); },
        py::arg("a"), py::arg("b"));

    m.def(
        "radix_sort",
        [](const py::array_t<std::uint32_t, py::array::c_style | py::array::forcecast>& keys) {
            return to_array(radix_sort(as_span(keys)));
        },
        py::arg("keys"));
    m.def(
        "local_sort",
        [](const py::array_t<std::uint32_t, py::array::c_style | py::array::forcecast>& keys, std::size_t size) {
            return to_array(local_sort(as_span(keys), size));
        },
        py::arg("keys"), py::arg("partition_size"));
    m.def(
        "count_inversions",
        [](const py::array_t<std::uint32_t, py::array::c_style | py::array::forcecast>& perm,
           const py::array_t<std::uint32_t, py::array::c_style | py::array::forcecast>& keys) {
            return count_inversions(as_span(perm), as_span(keys));
        },
        py::arg("perm"), py::arg("keys"));
    m.def("encode_depth_key", &encode_depth_key, py::arg("z"));

    m.def(
        "inspect_ply",
        [](const std::filesystem::path& p) {
            const auto sources = load_splat_ply(p);
            py::dict d;
            d["count"] = sources.size();
            d["degree"] = sources.empty() ? 0 : sources.front().degree;
            if (!sources.empty()) {
                Vec3f lo = sources.front().position, hi = lo;
                for (const auto& g : sources) {
                    lo = lo.cwiseMin(g.position);
                    hi = hi.cwiseMax(g.position);
                }
                d["bounds"] = py::make_tuple(std::array<float, 3>{lo.x(), lo.y(), lo.z()},
                                             std::array<float, 3>{hi.x(), hi.y(), hi.z()});
            } else {
                d["bounds"] = py::none();
            }
            return d;
        },
        py::arg("path"));

    m.def(
        "benchmark",
        [](const Scene& scene, const std::filesystem::path& trajectory, const std::string& strategy, int warmup) {
            const auto frames = load_trajectory(trajectory, scene);
            const auto s = SortStrategy::parse(strategy);
            BenchmarkReport report;
            {
                py::gil_scoped_release release;
                report = run_benchmark(scene, frames, s, warmup);
            }
            return report_csv(report);
        },
        py::arg("scene"), py::arg("trajectory"), py::arg("strategy") = "global", py::arg("warmup") = 1,
        "Run a trajectory and return the per-frame CSV report.");
}
