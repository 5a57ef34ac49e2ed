#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "vlmfair/cli.hpp"
#include "vlmfair/error.hpp"
#include "vlmfair/eval.hpp"
#include "vlmfair/hash.hpp"
#include "vlmfair/io.hpp"
#include "vlmfair/metrics.hpp"
#include "vlmfair/prototypes.hpp"
#include "vlmfair/solver.hpp"

namespace py = pybind11;
using namespace vlmfair;

namespace {

py::dict result_dict(const DebiasResult& r) {
  py::dict d;
  d["id"] = r.id;
  d["u_star"] = r.u_star;
  d["alpha_star"] = r.alpha_star;
  d["norm_parallel"] = r.norm_parallel;
  d["norm_orthogonal"] = r.norm_orthogonal;
  d["leakage"] = r.leakage;
  d["self_utility_loss"] = r.self_utility_loss;
  d["degenerate"] = std::string(to_string(r.degenerate));
  d["cross_bound_term"] = r.cross_bound_term;
  return d;
}

std::vector<GroupPrototype> prototypes_from(const std::vector<std::pair<std::string, Vector>>& xs) {
  std::vector<GroupPrototype> out;
  for (const auto& [g, v] : xs) out.push_back({g, v});
  return out;
}

std::vector<RetrievalOutcome> outcomes_from(const std::vector<std::vector<std::string>>& rankings,
                                            const std::vector<std::string>& relevant,
                                            const std::map<std::string, std::string>& groups) {
  auto cands = std::make_shared<CandidateGroups>(groups.begin(), groups.end());
  std::vector<RetrievalOutcome> out;
  for (std::size_t i = 0; i < rankings.size(); ++i) {
    out.push_back({"q" + std::to_string(i), rankings[i], i < relevant.size() ? relevant[i] : "", cands});
  }
  return out;
}

std::vector<ClassifiedSample> samples_from(const std::vector<std::tuple<std::string, std::string, std::string>>& xs) {
  std::vector<ClassifiedSample> out;
  for (const auto& [t, p, g] : xs) out.push_back({t, p, g});
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Pareto-optimal debiasing of vision-language embeddings";

  auto error = py::register_exception<Error>(m, "VlmfairError", PyExc_ValueError);
  (void)error;

  m.attr("DEFAULT_EPS_DEG") = kDefaultDegeneracyEpsilon;
  m.attr("DEFAULT_RANK_TOLERANCE") = kDefaultRankTolerance;

  py::class_<AttributeSubspace>(m, "AttributeSubspace")
      .def_property_readonly("basis", &AttributeSubspace::basis)
      .def_property_readonly("rank", &AttributeSubspace::rank)
      .def_property_readonly("dim", &AttributeSubspace::dim)
      .def_property_readonly("source_groups", &AttributeSubspace::source_groups)
      .def_property_readonly("reference_group", &AttributeSubspace::reference_group)
      .def("project_parallel", &AttributeSubspace::project_parallel)
      .def("project_orthogonal", &AttributeSubspace::project_orthogonal)
      .def("decompose", [](const AttributeSubspace& s, const Vector& e) {
        const auto d = decompose(e, s);
        return py::make_tuple(d.parallel, d.orthogonal, d.norm_parallel, d.norm_orthogonal);
      });

  m.def("build_subspace",
        [](const std::vector<std::pair<std::string, Vector>>& prototypes, const std::string& reference,
           double rank_tolerance) { return build_subspace(prototypes_from(prototypes), reference, rank_tolerance); },
        py::arg("prototypes"), py::arg("reference") = "", py::arg("rank_tolerance") = kDefaultRankTolerance,
        "prototypes: list of (group, unit vector) pairs");
  m.def("subspace_from_basis", &AttributeSubspace::from_basis, py::arg("basis"), py::arg("source_groups"),
        py::arg("reference_group"));
  m.def("load_subspace", &io::load_subspace);
  m.def("save_subspace", &io::save_subspace);

  m.def("spherical_mean", &spherical_mean, py::arg("anchor"), py::arg("variants"));

  m.def("closed_form_alpha", &closed_form_alpha, py::arg("norm_parallel"), py::arg("norm_orthogonal"),
        py::arg("eps_deg") = kDefaultDegeneracyEpsilon);
  m.def("oracle_alpha", &oracle_alpha, py::arg("norm_parallel"), py::arg("norm_orthogonal"),
        py::arg("grid_points") = 4096, py::arg("eps_deg") = kDefaultDegeneracyEpsilon);
  m.def("pareto_point", [](double q, double p, double alpha) {
    const auto pt = pareto_point(q, p, alpha);
    py::dict d;
    d["alpha"] = pt.alpha;
    d["leakage"] = pt.leakage;
    d["self_utility_loss"] = pt.self_utility_loss;
    d["normalized_leakage"] = pt.normalized_leakage;
    d["normalized_loss"] = pt.normalized_loss;
    return d;
  });
  m.def("debias",
        [](const Vector& e, const AttributeSubspace& s, double eps_deg) {
          return result_dict(debias(Embedding{"", e, Modality::kImage, {}}, s, {eps_deg}));
        },
        py::arg("e"), py::arg("subspace"), py::arg("eps_deg") = kDefaultDegeneracyEpsilon);
  m.def("full_projection", [](const Vector& e, const AttributeSubspace& s) {
    return result_dict(debias_extreme(Embedding{"", e, Modality::kImage, {}}, s, ExtremeMode::kFullProjection));
  });
  m.def("debias_rows",
        [](const Matrix& rows, const AttributeSubspace& s, double eps_deg, int threads) {
          std::vector<Embedding> embs;
          for (Eigen::Index i = 0; i < rows.rows(); ++i) {
            embs.push_back({std::to_string(i), rows.row(i).transpose(), Modality::kImage, {}});
          }
          std::vector<DebiasResult> results;
          {
            py::gil_scoped_release release;
            results = debias_batch(embs, s, {eps_deg}, threads);
          }
          Matrix out(rows.rows(), rows.cols());
          Vector alphas(rows.rows());
          for (Eigen::Index i = 0; i < rows.rows(); ++i) {
            out.row(i) = results[i].u_star.transpose();
            alphas[i] = results[i].alpha_star;
          }
          return py::make_tuple(out, alphas);
        },
        py::arg("rows"), py::arg("subspace"), py::arg("eps_deg") = kDefaultDegeneracyEpsilon,
        py::arg("threads") = 1, "Debias each row of a matrix of unit embeddings; returns (U, alpha).");
  m.def("self_utility_cross_bound", &self_utility_cross_bound);

  m.def("eo_violations",
        [](const std::vector<std::tuple<std::string, std::string, std::string>>& samples,
           const std::vector<std::string>& classes, const std::vector<std::string>& groups) {
          const auto eo = eo_violations(samples_from(samples), classes, groups);
          return py::make_tuple(eo.delta_avg, eo.delta_max);
        },
        py::arg("samples"), py::arg("classes"), py::arg("groups"),
        "samples: list of (true_class, predicted_class, group); returns (delta_avg, delta_max)");
  m.def("max_skew",
        [](const std::vector<std::vector<std::string>>& rankings, const std::map<std::string, std::string>& groups_of,
           int M, const std::vector<std::string>& groups) {
          return max_skew(outcomes_from(rankings, {}, groups_of), M, groups);
        },
        py::arg("rankings"), py::arg("candidate_groups"), py::arg("M"), py::arg("groups"));
  m.def("recall_at_k",
        [](const std::vector<std::vector<std::string>>& rankings, const std::vector<std::string>& relevant, int K) {
          return recall_at_k(outcomes_from(rankings, relevant, {}), K);
        },
        py::arg("rankings"), py::arg("relevant"), py::arg("K"));
  m.def("statistical_parity",
        [](const std::map<std::string, long long>& counts, const std::vector<std::string>& groups) {
          GroupCounts c{"", {counts.begin(), counts.end()}, 0};
          for (const auto& [g, n] : counts) c.total += n;
          return statistical_parity(c, groups);
        },
        py::arg("counts"), py::arg("groups"));
  m.def("f1_scores",
        [](const std::vector<std::tuple<std::string, std::string, std::string>>& samples,
           const std::vector<std::string>& classes) {
          const auto r = f1_scores(samples_from(samples), classes);
          return py::make_tuple(r.macro_f1, r.per_class, r.undefined);
        });

  m.def("sha256_hex", [](const std::string& s) { return sha256_hex(s); });

  m.def("load_embeddings", [](const std::filesystem::path& path) {
    py::list out;
    for (const auto& e : io::load_embeddings(path)) {
      py::dict d;
      d["id"] = e.id;
      d["modality"] = std::string(to_string(e.modality));
      d["labels"] = std::map<std::string, std::string>(e.labels.begin(), e.labels.end());
      d["vector"] = e.vector;
      out.append(d);
    }
    return out;
  });

  m.def("run_cli", [](std::vector<std::string> args) {
    args.insert(args.begin(), "vlmfair");
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    return py::make_tuple(code, out.str(), err.str());
  }, "Run the command-line tool in-process; returns (exit_code, stdout, stderr).");
}
