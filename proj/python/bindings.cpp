#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "icp/bigimage.hpp"
#include "icp/dispatch.hpp"
#include "icp/engine.hpp"
#include "icp/error.hpp"
#include "icp/features.hpp"
#include "icp/pimage.hpp"
#include "icp/synth.hpp"

namespace py = pybind11;
using namespace icp;

namespace {

std::vector<std::uint8_t> to_vec(const py::bytes& b) {
    const std::string_view s = b;
    return {s.begin(), s.end()};
}

py::bytes to_bytes(std::span<const std::uint8_t> v) { return {reinterpret_cast<const char*>(v.data()), v.size()}; }

py::array_t<std::uint8_t> matrix_array(const PixelMatrix& m) {
    std::vector<py::ssize_t> shape = {m.height, m.width};
    if (m.mode == ColorMode::RGB) shape.push_back(3);
    py::array_t<std::uint8_t> out(shape);
    std::memcpy(out.mutable_data(), m.data.data(), m.data.size());
    return out;
}

PixelMatrix matrix_from_array(py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast> a) {
    if (a.ndim() != 2 && !(a.ndim() == 3 && a.shape(2) == 3)) {
        throw Error(ErrorCode::InvalidArgument, "expected an (h, w) or (h, w, 3) uint8 array");
    }
    PixelMatrix m;
    m.height = static_cast<std::uint32_t>(a.shape(0));
    m.width = static_cast<std::uint32_t>(a.shape(1));
    m.mode = a.ndim() == 3 ? ColorMode::RGB : ColorMode::Grey;
    m.data.assign(a.data(), a.data() + a.size());
    validate_matrix(m);
    return m;
}

py::array_t<float> descriptor_array(const DescriptorSet& d) {
    py::array_t<float> out({static_cast<py::ssize_t>(d.size()), static_cast<py::ssize_t>(d.dim)});
    std::memcpy(out.mutable_data(), d.values.data(), d.values.size() * sizeof(float));
    return out;
}

std::vector<std::string> names(const std::vector<IndexEntry>& entries) {
    std::vector<std::string> out;
    for (const auto& e : entries) out.push_back(e.filename);
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Packed image storage, partitioned feature jobs and dispatch matching";

    static py::handle error_type;
    error_type = PyErr_NewException("icp._core.IcpError", PyExc_RuntimeError, nullptr);
    m.attr("IcpError") = py::handle(error_type);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            py::object exc = py::reinterpret_steal<py::object>(
                PyObject_CallFunction(error_type.ptr(), "s", e.what()));
            exc.attr("code") = std::string(to_string(e.code()));
            PyErr_SetObject(error_type.ptr(), exc.ptr());
        }
    });

    py::enum_<ColorMode>(m, "ColorMode").value("GREY", ColorMode::Grey).value("RGB", ColorMode::RGB);
    py::enum_<Algorithm>(m, "Algorithm").value("HARRIS", Algorithm::Harris).value("SIFT", Algorithm::Sift);

    py::class_<PixelMatrix>(m, "PixelMatrix")
        .def(py::init(&matrix_from_array), py::arg("array"))
        .def_readonly("width", &PixelMatrix::width)
        .def_readonly("height", &PixelMatrix::height)
        .def_readonly("mode", &PixelMatrix::mode)
        .def("to_numpy", &matrix_array)
        .def("__eq__", [](const PixelMatrix& a, const PixelMatrix& b) { return a == b; });

    py::class_<PImage>(m, "PImage")
        .def(py::init([](std::string filename, const PixelMatrix& matrix) {
                 validate_filename(filename);
                 validate_matrix(matrix);
                 return PImage{std::move(filename), matrix};
             }),
             py::arg("filename"), py::arg("matrix"))
        .def_readonly("filename", &PImage::filename)
        .def_readonly("matrix", &PImage::matrix)
        .def("__eq__", [](const PImage& a, const PImage& b) { return a == b; })
        .def("__repr__", [](const PImage& p) {
            return "<PImage " + p.filename + " " + std::to_string(p.matrix.width) + "x" +
                   std::to_string(p.matrix.height) + (p.matrix.mode == ColorMode::RGB ? " rgb>" : " grey>");
        });

    py::class_<Keypoint>(m, "Keypoint")
        .def_readonly("x", &Keypoint::x)
        .def_readonly("y", &Keypoint::y)
        .def_readonly("scale", &Keypoint::scale)
        .def_readonly("orientation", &Keypoint::orientation)
        .def_readonly("response", &Keypoint::response);

    py::class_<IndexEntry>(m, "IndexEntry")
        .def_readonly("id", &IndexEntry::id)
        .def_readonly("start_offset", &IndexEntry::start_offset)
        .def_readonly("record_length", &IndexEntry::record_length)
        .def_readonly("filename", &IndexEntry::filename);

    m.def("decode_pnm", [](const py::bytes& b, std::string filename) { return decode_pnm(to_vec(b), std::move(filename)); },
          py::arg("data"), py::arg("filename"));
    m.def("encode_pnm", [](const PixelMatrix& mat) { return to_bytes(encode_pnm(mat)); });
    m.def("encode_record", [](const PImage& img) { return to_bytes(encode_record(img)); });
    m.def("decode_record", [](const py::bytes& b) { return decode_record(to_vec(b)); });
    m.def("to_grey", py::overload_cast<const PImage&>(&to_grey));
    m.def("grey_value", &grey_value, py::arg("r"), py::arg("g"), py::arg("b"));
    m.def("filename_id", &filename_id);

    py::class_<BigImage>(m, "BigImage")
        .def(py::init<std::uint64_t>(), py::arg("threshold") = kUnlimitedThreshold)
        .def_static("load",
                    [](const std::filesystem::path& path) {
                        const auto p = resolve_store(path);
                        return BigImage::load(p.data, p.index);
                    },
                    py::arg("path"))
        .def("save",
             [](const BigImage& s, const std::filesystem::path& path) {
                 const auto p = resolve_store(path);
                 s.save(p.data, p.index);
             },
             py::arg("path"))
        .def("append", [](BigImage& s, const PImage& img) { return s.append(img); }, py::arg("image"))
        .def("lookup", &BigImage::lookup, py::arg("filename"))
        .def("__contains__", [](const BigImage& s, std::string_view n) { return s.find(n) != nullptr; })
        .def("__len__", &BigImage::size)
        .def("verify", &BigImage::verify)
        .def_property_readonly("entries", &BigImage::entries)
        .def_property_readonly("filenames", [](const BigImage& s) { return names(s.entries()); })
        .def_property_readonly("data_size", &BigImage::data_size);

    m.def("pack_directory",
          [](const std::filesystem::path& dir, const std::filesystem::path& out, std::string name, std::uint64_t threshold) {
              const auto r = pack_directory(dir, out, name, threshold);
              py::list stores, errors;
              for (const auto& s : r.stores) {
                  stores.append(py::dict(py::arg("data") = s.paths.data, py::arg("index") = s.paths.index,
                                         py::arg("entries") = s.entries, py::arg("data_bytes") = s.data_bytes));
              }
              for (const auto& e : r.errors) errors.append(py::make_tuple(e.file, e.message));
              return py::dict(py::arg("stores") = stores, py::arg("errors") = errors);
          },
          py::arg("dir"), py::arg("out_dir"), py::arg("name") = "store", py::arg("threshold") = kUnlimitedThreshold);

    m.def("partition",
          [](const BigImage& store, std::uint64_t blocksize) {
              const auto plan = partition(store, blocksize);
              py::list groups;
              for (const auto& g : plan.groups) groups.append(names(g.members));
              return py::make_tuple(plan.num_map_task, groups);
          },
          py::arg("store"), py::arg("blocksize"),
          "Returns (num_map_task, [filenames of group 1, group 2, ...]).");

    m.def("run_job",
          [](const BigImage& store, std::uint64_t blocksize, const std::string& algorithm, const std::string& alpha,
             std::size_t workers) {
              JobResult job;
              {
                  py::gil_scoped_release release;
                  job = run_job(store, blocksize, parse_algorithm(algorithm), AlphaSelection::parse(alpha), workers);
              }
              py::dict stats(py::arg("wall_seconds") = job.stats.wall_seconds, py::arg("images") = job.stats.images,
                             py::arg("groups") = job.stats.groups, py::arg("num_map_task") = job.stats.num_map_task,
                             py::arg("workers") = job.stats.workers, py::arg("keypoints") = job.stats.keypoints,
                             py::arg("digest") = output_digest(job.output));
              return py::make_tuple(features_csv(job.output), to_bytes(descriptor_bytes(job.output)), stats);
          },
          py::arg("store"), py::arg("blocksize"), py::arg("algorithm") = "harris", py::arg("alpha") = "all",
          py::arg("workers") = 1, "Returns (feature CSV text, descriptor bytes, stats dict).");

    m.def("harris",
          [](const PixelMatrix& grey) {
              py::gil_scoped_release release;
              return harris(grey);
          },
          py::arg("grey"));
    m.def("sift",
          [](const PixelMatrix& grey) {
              SiftResult r;
              {
                  py::gil_scoped_release release;
                  r = sift_extract(grey);
              }
              return py::make_tuple(r.keypoints, descriptor_array(r.descriptors));
          },
          py::arg("grey"), "Returns (keypoints, float32 array of shape (n, 128)).");

    m.def("match_params",
          [](std::string_view filename, std::string_view extension, std::string_view config) -> std::optional<std::string> {
              const auto a = dicp::match_params(filename, extension, dicp::parse_match_config(config));
              if (!a) return std::nullopt;
              return std::string(to_string(*a));
          },
          py::arg("filename"), py::arg("extension"), py::arg("config"),
          "Algorithm name of the first matching rule, or None.");

    m.def("value_noise",
          [](std::uint32_t w, std::uint32_t h, std::uint64_t seed) { return synth::value_noise(w, h, seed); },
          py::arg("width"), py::arg("height"), py::arg("seed"));
    m.def("white_square", &synth::white_square, py::arg("width"), py::arg("height"), py::arg("x0"), py::arg("y0"),
          py::arg("side"));
}
