#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "histsem/checkpoint.hpp"
#include "histsem/cli.hpp"
#include "histsem/corpus.hpp"
#include "histsem/encoder.hpp"
#include "histsem/error.hpp"
#include "histsem/stats.hpp"
#include "histsem/training.hpp"
#include "histsem/usage.hpp"

namespace py = pybind11;
using namespace histsem;

namespace {

SimilarityMatrix matrix_from_rows(const std::vector<std::vector<std::optional<double>>>& rows, std::string source) {
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < rows.size(); ++i) ids.push_back(std::to_string(i));
  SimilarityMatrix m("", ids, std::move(source));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows.size()) throw InputError("matrix must be square");
    for (std::size_t j = i + 1; j < rows.size(); ++j) {
      if (rows[i][j]) m.set(i, j, *rows[i][j]);
    }
  }
  return m;
}

}  // namespace

PYBIND11_MODULE(_histsem, m) {
  m.doc() = "Diachronic semantic change toolkit";
  m.attr("__version__") = "0.1.0";

  py::register_exception<MismatchError>(m, "MismatchError", PyExc_ValueError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);
  py::register_exception<InputError>(m, "InputError", PyExc_ValueError);

  m.def("normalize_text", [](const std::string& s) { return normalize_text(s); });
  m.def("rejoin_contractions", [](const std::string& s) { return rejoin_contractions(s); });
  m.def("tokenize", [](const std::string& s) { return tokenize(s); });
  m.def(
      "split_sentences",
      [](const std::string& text, int year) {
        std::vector<std::vector<std::string>> out;
        for (auto& s : prepare_document(RawDocument{"doc", year, std::nullopt, text})) out.push_back(s.tokens);
        return out;
      },
      py::arg("text"), py::arg("year") = 1910);

  m.def("cosine_similarity",
        [](const std::vector<double>& u, const std::vector<double>& v) { return cosine_similarity(u, v); });
  m.def("spearman", [](const std::vector<double>& x, const std::vector<double>& y) { return spearman(x, y); });
  m.def("average_ranks", [](const std::vector<double>& x) { return average_ranks(x); });

  m.def(
      "mantel_test",
      [](const std::vector<std::vector<std::optional<double>>>& a,
         const std::vector<std::vector<std::optional<double>>>& b, std::size_t permutations, std::uint64_t seed,
         const std::string& mode, bool two_sided) {
        MantelOptions o;
        o.permutations = permutations;
        o.seed = seed;
        o.tail = two_sided ? MantelTail::kTwoSided : MantelTail::kGreater;
        if (mode == "auto") {
          o.mode = MantelMode::kAuto;
        } else if (mode == "sampled") {
          o.mode = MantelMode::kSampled;
        } else if (mode == "exhaustive") {
          o.mode = MantelMode::kExhaustive;
        } else {
          throw InputError("mode must be auto, sampled or exhaustive");
        }
        const MantelResult r = mantel_test(matrix_from_rows(a, "a"), matrix_from_rows(b, "b"), o);
        py::dict d;
        d["rho"] = r.rho;
        d["p_value"] = r.p_value;
        d["permutations"] = r.permutations;
        d["observed_cells"] = r.observed_cells;
        d["exhaustive"] = r.exhaustive;
        return d;
      },
      py::arg("a"), py::arg("b"), py::arg("permutations") = 999, py::arg("seed") = 0, py::arg("mode") = "auto",
      py::arg("two_sided") = false);

  m.def(
      "pca_project",
      [](const Eigen::MatrixXd& x, std::size_t d) {
        const Projection p = pca_project(x, d);
        return py::make_tuple(p.coordinates, p.explained_variance, p.basis);
      },
      py::arg("vectors"), py::arg("d") = 2);

  m.def("cluster_distances", [](const Eigen::MatrixXd& points, const std::vector<std::string>& labels) {
    const ClusterDistances cd = cluster_distances(points, labels);
    return py::make_tuple(cd.intra, cd.inter);
  });

  m.def("embedding_shift", [](const std::map<std::pair<std::string, std::string>, double>& old_sims,
                              const std::map<std::pair<std::string, std::string>, double>& new_sims) {
    PairSimilarities o, n;
    for (const auto& [k, v] : old_sims) o[make_pair_key(k.first, k.second)] = v;
    for (const auto& [k, v] : new_sims) n[make_pair_key(k.first, k.second)] = v;
    const ShiftReport r = embedding_shift(o, n);
    py::dict d;
    d["shifts"] = r.shifts;
    d["average"] = r.average;
    d["max_increase"] = r.max_increase;
    d["max_decrease"] = r.max_decrease;
    return d;
  });

  py::class_<Checkpoint>(m, "Checkpoint")
      .def_static("load", &Checkpoint::load)
      .def("save", &Checkpoint::save)
      .def_property_readonly("digest", &Checkpoint::digest)
      .def_property_readonly("kind", [](const Checkpoint& c) { return std::string(to_string(c.kind())); })
      .def_property_readonly("config", [](const Checkpoint& c) { return c.config().to_json().dump(); })
      .def_property_readonly("provenance", [](const Checkpoint& c) {
        std::vector<std::string> out;
        for (const auto& p : c.provenance()) out.push_back(p.to_json().dump());
        return out;
      });

  m.def(
      "mock_checkpoint",
      [](std::size_t hidden, std::size_t layers, std::uint64_t seed) {
        EncoderConfig c = EncoderConfig::toy();
        c.hidden_dim = hidden;
        c.num_layers = layers;
        c.seed = seed;
        return make_mock_checkpoint(c);
      },
      py::arg("hidden") = 64, py::arg("layers") = 4, py::arg("seed") = 0);
  m.def(
      "toy_checkpoint",
      [](std::size_t hidden, std::size_t layers, std::uint64_t seed) {
        EncoderConfig c = EncoderConfig::toy();
        c.hidden_dim = hidden;
        c.num_layers = layers;
        c.seed = seed;
        return init_toy_checkpoint(c);
      },
      py::arg("hidden") = 64, py::arg("layers") = 4, py::arg("seed") = 0);

  m.def(
      "encode",
      [](const Checkpoint& ckpt, const std::vector<std::string>& tokens) {
        const HiddenStates s = make_encoder(ckpt)->encode(tokens);
        std::vector<std::pair<std::size_t, std::size_t>> spans;
        for (const auto& t : s.token_spans) spans.emplace_back(t.begin, t.end);
        return py::make_tuple(s.layers, spans);
      },
      py::arg("checkpoint"), py::arg("tokens"));
  m.def(
      "usage_embedding",
      [](const Checkpoint& ckpt, const std::vector<std::string>& tokens, std::size_t focus, std::size_t last_k) {
        return Eigen::VectorXd(extract_usage_embedding(make_encoder(ckpt)->encode(tokens), focus, last_k));
      },
      py::arg("checkpoint"), py::arg("tokens"), py::arg("focus_index"), py::arg("last_k") = 4);

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        const int code = run_cli(args, out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      "Runs the command line in-process; returns (exit_code, stdout, stderr).");
}
