#include "vlmfair/cli.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <numbers>
#include <ostream>
#include <set>
#include <sstream>

#include "vlmfair/error.hpp"
#include "vlmfair/eval.hpp"
#include "vlmfair/io.hpp"
#include "vlmfair/prototypes.hpp"
#include "vlmfair/random.hpp"
#include "vlmfair/solver.hpp"

namespace vlmfair {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr double kOracleTolerance = 1e-9;

struct GlobalOptions {
  std::uint64_t seed = 0;
  std::string mode;
  double eps_deg = kDefaultDegeneracyEpsilon;
  double rank_tol = kDefaultRankTolerance;
  int threads = 1;
  std::string out;
};

std::string fixed5(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.5f", v);
  return buf;
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Timestamps and the invoking command live next to the payload, never in it.
void write_sidecar(const fs::path& payload, const std::vector<std::string>& args) {
  fs::path meta = payload;
  meta += ".meta.json";
  io::save_json(meta, {{"created_utc", utc_now()}, {"command", args}});
}

fs::path require_out(const GlobalOptions& g) {
  if (g.out.empty()) throw CLI::RequiredError("--out");
  return g.out;
}

DebiasMode mode_or(const GlobalOptions& g, DebiasMode fallback) {
  return g.mode.empty() ? fallback : parse_debias_mode(g.mode);
}

std::vector<int> parse_k_list(const std::string& s) {
  std::vector<int> ks;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const int k = std::stoi(item, &used);
      if (used != item.size() || k < 1) throw std::invalid_argument(item);
      ks.push_back(k);
    } catch (const std::exception&) {
      throw CLI::ValidationError("--K", "expected a comma-separated list of positive integers");
    }
  }
  return ks;
}

std::map<std::string, std::string> class_prompt_map(const std::vector<Embedding>& prompts) {
  std::map<std::string, std::string> out;
  for (const auto& p : prompts) {
    auto cls = p.label(kClassLabel);
    if (!cls) continue;
    if (!out.emplace(*cls, p.id).second) {
      throw Error(ErrorCode::kDuplicateId, "two prompts for class '" + *cls + "'");
    }
  }
  if (out.empty()) throw Error(ErrorCode::kMissingLabels, "no prompt carries a 'class' label");
  return out;
}

Workspace make_workspace(const GlobalOptions& g, DebiasMode mode, const std::string& subspace_path) {
  Workspace ws;
  ws.debias_mode = mode;
  ws.solver.eps_deg = g.eps_deg;
  ws.threads = g.threads;
  if (!subspace_path.empty()) {
    ws.subspace = io::load_subspace(subspace_path);
  } else if (mode != DebiasMode::kNone) {
    throw Error(ErrorCode::kInvalidArgument, "--subspace is required unless --mode none");
  }
  return ws;
}

struct OracleSummary {
  std::size_t trials = 0;
  double max_alpha_dev = 0.0;
  double max_equalization_dev = 0.0;
};

OracleSummary oracle_fuzz(std::size_t trials, int grid, std::uint64_t seed, double eps_deg) {
  Rng rng(seed);
  OracleSummary s;
  while (s.trials < trials) {
    const double theta = rng.uniform(0.0, std::numbers::pi / 2);
    const double q = std::cos(theta), p = std::sin(theta);
    if (!(q > eps_deg && q < 1.0 - eps_deg && p > eps_deg && p < 1.0 - eps_deg)) continue;
    const double closed = closed_form_alpha(q, p, eps_deg);
    const double oracle = oracle_alpha(q, p, grid, eps_deg);
    const ParetoPoint pt = pareto_point(q, p, closed);
    s.max_alpha_dev = std::max(s.max_alpha_dev, std::abs(closed - oracle));
    s.max_equalization_dev =
        std::max(s.max_equalization_dev, std::abs(pt.normalized_leakage - pt.normalized_loss));
    ++s.trials;
  }
  return s;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Pareto-optimal debiasing of vision-language embeddings", "vlmfair"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions g;
  app.add_option("--seed", g.seed, "random seed");
  app.add_option("--mode", g.mode, "debias arm")
      ->check(CLI::IsMember({"none", "text_only", "image_only", "both", "full_projection_both"}));
  app.add_option("--eps-deg", g.eps_deg, "degeneracy threshold on component norms")
      ->check(CLI::PositiveNumber);
  app.add_option("--rank-tol", g.rank_tol, "relative singular value cutoff")
      ->check(CLI::Range(0.0, 1.0));
  app.add_option("--threads", g.threads, "worker threads")->check(CLI::Range(1, 1024));
  app.add_option("--out", g.out, "output file (directory for synth generate)");

  std::function<void()> action;

  // prototypes build
  auto* prototypes = app.add_subcommand("prototypes", "group prototype construction");
  prototypes->require_subcommand(1);
  std::string variants_path, embeddings_path;
  auto* proto_build = prototypes->add_subcommand("build", "spherical-mean prototypes from variant sets");
  proto_build->add_option("--variants", variants_path, "variant-set JSON")->required();
  proto_build->add_option("--embeddings", embeddings_path, "embeddings keyed by SHA-256 of text")
      ->required();
  proto_build->callback([&] {
    action = [&] {
      const auto out_path = require_out(g);
      const auto spec = io::load_variant_spec(variants_path);
      const auto sets = resolve_variant_sets(spec, io::load_embeddings(embeddings_path));
      io::save_prototypes(out_path, build_prototypes(sets));
      write_sidecar(out_path, args);
    };
  });

  // subspace build
  auto* subspace = app.add_subcommand("subspace", "attribute subspace");
  subspace->require_subcommand(1);
  std::string prototypes_path, reference;
  auto* sub_build = subspace->add_subcommand("build", "orthonormal basis of prototype differences");
  sub_build->add_option("--prototypes", prototypes_path, "prototype file")->required();
  sub_build->add_option("--reference", reference, "reference group (default: first)");
  sub_build->callback([&] {
    action = [&] {
      const auto out_path = require_out(g);
      io::save_subspace(out_path,
                        build_subspace(io::load_prototypes(prototypes_path), reference, g.rank_tol));
      write_sidecar(out_path, args);
    };
  });

  // debias run
  auto* debias_cmd = app.add_subcommand("debias", "debias embeddings");
  debias_cmd->require_subcommand(1);
  std::string subspace_path, results_path, dtype = "f64", format = "jsonl";
  auto* debias_run = debias_cmd->add_subcommand("run", "apply the debias arm to an embedding file");
  debias_run->add_option("--embeddings", embeddings_path, "input embeddings")->required();
  debias_run->add_option("--subspace", subspace_path, "subspace JSON")->required();
  debias_run->add_option("--results", results_path, "per-record result JSONL");
  debias_run->add_option("--dtype", dtype, "output dtype")->check(CLI::IsMember({"f32", "f64"}));
  debias_run->add_option("--format", format, "output container")
      ->check(CLI::IsMember({"jsonl", "embf"}));
  debias_run->callback([&] {
    action = [&] {
      const auto out_path = require_out(g);
      const Workspace ws = make_workspace(g, mode_or(g, DebiasMode::kBoth), subspace_path);
      const auto input = io::load_embeddings(embeddings_path);
      std::vector<Embedding> by_side[2];
      std::vector<std::size_t> index_of[2];
      for (std::size_t i = 0; i < input.size(); ++i) {
        const int side = input[i].modality == Modality::kImage ? 0 : 1;
        by_side[side].push_back(input[i]);
        index_of[side].push_back(i);
      }
      std::vector<DebiasResult> results(input.size());
      for (int side = 0; side < 2; ++side) {
        auto r = apply_debias(ws, by_side[side], side == 0 ? Modality::kImage : Modality::kText);
        for (std::size_t j = 0; j < r.size(); ++j) results[index_of[side][j]] = std::move(r[j]);
      }
      std::vector<Embedding> debiased = input;
      for (std::size_t i = 0; i < input.size(); ++i) debiased[i].vector = results[i].u_star;
      io::save_embeddings(out_path, debiased, io::parse_dtype(dtype),
                          format == "embf" ? io::Container::kEmbf : io::Container::kJsonl);
      write_sidecar(out_path, args);
      if (!results_path.empty()) {
        io::save_debias_results(results_path, results);
        write_sidecar(results_path, args);
      }
    };
  });

  // eval classify / retrieve, report
  auto* eval = app.add_subcommand("eval", "downstream evaluation");
  eval->require_subcommand(1);
  std::string images_path, prompts_path, queries_path, k_list = "5,10";
  int M = 0;
  auto run_eval = [&](bool classify, bool retrieve_task) {
    const auto out_path = require_out(g);
    Workspace ws = make_workspace(g, mode_or(g, DebiasMode::kBoth), subspace_path);
    ws.image_embeddings = io::load_embeddings(images_path);
    std::vector<Embedding> queries;
    if (classify) {
      ws.text_embeddings = io::load_embeddings(prompts_path);
      ws.class_prompts = class_prompt_map(ws.text_embeddings);
    }
    if (retrieve_task) queries = io::load_embeddings(queries_path);
    MetricSpec metrics;
    metrics.classify = classify;
    metrics.retrieve = retrieve_task;
    metrics.M = M;
    metrics.recall_k = parse_k_list(k_list);
    const EvalReport report = run_report(ws, queries, metrics);
    json j = report.to_json();
    j["config"]["threads"] = g.threads;
    io::save_json(out_path, j);
    write_sidecar(out_path, args);
    if (!report.bounds.passed) {
      throw Error(ErrorCode::kInvariantViolation, "cross-utility bound violated on " +
                                                      std::to_string(report.bounds.self_utility_violations +
                                                                     report.bounds.reported_violations) +
                                                      " pairs (report written)");
    }
  };
  auto* classify_cmd = eval->add_subcommand("classify", "zero-shot classification");
  classify_cmd->add_option("--images", images_path, "labeled image embeddings")->required();
  classify_cmd->add_option("--prompts", prompts_path, "class prompt embeddings")->required();
  classify_cmd->add_option("--subspace", subspace_path, "subspace JSON");
  classify_cmd->callback([&] { action = [&] { run_eval(true, false); }; });

  auto* retrieve_cmd = eval->add_subcommand("retrieve", "text-to-image retrieval");
  retrieve_cmd->add_option("--images", images_path, "candidate image embeddings")->required();
  retrieve_cmd->add_option("--queries", queries_path, "query text embeddings")->required();
  retrieve_cmd->add_option("--subspace", subspace_path, "subspace JSON");
  retrieve_cmd->add_option("--M", M, "MaxSkew depth (0: min(1000, pool))")->check(CLI::NonNegativeNumber);
  retrieve_cmd->add_option("--K", k_list, "Recall@K cutoffs, comma separated");
  retrieve_cmd->callback([&] { action = [&] { run_eval(false, true); }; });

  auto* report_cmd = app.add_subcommand("report", "classification and retrieval in one report");
  report_cmd->add_option("--images", images_path, "image embeddings")->required();
  report_cmd->add_option("--prompts", prompts_path, "class prompt embeddings");
  report_cmd->add_option("--queries", queries_path, "query text embeddings");
  report_cmd->add_option("--subspace", subspace_path, "subspace JSON");
  report_cmd->add_option("--M", M, "MaxSkew depth")->check(CLI::NonNegativeNumber);
  report_cmd->add_option("--K", k_list, "Recall@K cutoffs");
  report_cmd->callback([&] {
    action = [&] { run_eval(!prompts_path.empty(), !queries_path.empty()); };
  });

  // metric sp
  auto* metric = app.add_subcommand("metric", "standalone metrics");
  metric->require_subcommand(1);
  std::string counts_path, groups_list;
  auto* sp = metric->add_subcommand("sp", "statistical parity from group counts CSV");
  sp->add_option("--counts", counts_path, "CSV prompt_id,group,count")->required();
  sp->add_option("--groups", groups_list, "declared groups, comma separated");
  sp->callback([&] {
    action = [&] {
      const auto counts = io::load_group_counts(counts_path);
      std::vector<std::string> groups;
      if (groups_list.empty()) {
        std::set<std::string> seen;
        for (const auto& c : counts) {
          for (const auto& [grp, n] : c.counts) seen.insert(grp);
        }
        groups.assign(seen.begin(), seen.end());
      } else {
        std::stringstream ss(groups_list);
        for (std::string item; std::getline(ss, item, ',');) groups.push_back(item);
      }
      json per_prompt = json::object();
      double sum = 0.0;
      for (const auto& c : counts) {
        const double v = statistical_parity(c, groups);
        per_prompt[c.prompt_id] = v;
        sum += v;
        out << c.prompt_id << '\t' << fixed5(v) << '\n';
      }
      const double mean = counts.empty() ? 0.0 : sum / static_cast<double>(counts.size());
      if (counts.size() > 1) out << "mean\t" << fixed5(mean) << '\n';
      if (!g.out.empty()) {
        io::save_json(g.out, {{"groups", groups}, {"sp", per_prompt}, {"mean_sp", mean}});
        write_sidecar(g.out, args);
      }
    };
  });

  // synth generate
  auto* synth = app.add_subcommand("synth", "synthetic biased data");
  synth->require_subcommand(1);
  SynthSpec spec;
  auto* synth_gen = synth->add_subcommand("generate", "write a synthetic workspace into --out DIR");
  synth_gen->add_option("--d", spec.d, "dimension");
  synth_gen->add_option("--groups", spec.n_groups, "number of groups");
  synth_gen->add_option("--classes", spec.n_classes, "number of classes");
  synth_gen->add_option("--per-cell", spec.samples_per_cell, "images per (class, group)");
  synth_gen->add_option("--leakage", spec.leakage_strength, "planted leakage strength in [0,1)");
  synth_gen->add_option("--noise", spec.noise_sigma, "isotropic noise sigma");
  synth_gen->callback([&] {
    action = [&] {
      const fs::path dir = require_out(g);
      spec.seed = g.seed;
      const SynthData data = generate_synthetic(spec);
      std::error_code ec;
      fs::create_directories(dir, ec);
      if (ec) throw Error(ErrorCode::kIo, "cannot create '" + dir.string() + "'");
      std::vector<Embedding> queries = data.prompts;
      queries.insert(queries.end(), data.captions.begin(), data.captions.end());
      io::save_embeddings(dir / "images.jsonl", data.images);
      io::save_embeddings(dir / "prompts.jsonl", data.prompts);
      io::save_embeddings(dir / "queries.jsonl", queries);
      io::save_prototypes(dir / "prototypes.jsonl", data.prototypes);
      io::save_subspace(dir / "subspace.json", build_subspace(data.prototypes, {}, g.rank_tol));
      io::save_json(dir / "spec.json", {{"d", spec.d},
                                        {"n_groups", spec.n_groups},
                                        {"n_classes", spec.n_classes},
                                        {"samples_per_cell", spec.samples_per_cell},
                                        {"leakage_strength", spec.leakage_strength},
                                        {"noise_sigma", spec.noise_sigma},
                                        {"seed", spec.seed}});
      write_sidecar(dir / "spec.json", args);
    };
  });

  // oracle check
  auto* oracle = app.add_subcommand("oracle", "closed form versus numeric oracle");
  oracle->require_subcommand(1);
  std::size_t trials = 10000;
  int grid = 4096;
  auto* check = oracle->add_subcommand("check", "fuzz closed-form alpha against the oracle");
  check->add_option("--trials", trials, "random (||e_par||, ||e_perp||) pairs")
      ->check(CLI::PositiveNumber);
  check->add_option("--grid", grid, "oracle grid points")->check(CLI::Range(1000, 100000000));
  check->callback([&] {
    action = [&] {
      const OracleSummary s = oracle_fuzz(trials, grid, g.seed, g.eps_deg);
      char line[160];
      std::snprintf(line, sizeof line, "trials %zu  max |dalpha| = %.3e  max |L~ - V~| = %.3e\n",
                    s.trials, s.max_alpha_dev, s.max_equalization_dev);
      out << line;
      if (!g.out.empty()) {
        io::save_json(g.out, {{"trials", s.trials},
                              {"seed", g.seed},
                              {"grid", grid},
                              {"max_alpha_deviation", s.max_alpha_dev},
                              {"max_equalization_deviation", s.max_equalization_dev}});
        write_sidecar(g.out, args);
      }
      if (s.max_alpha_dev > kOracleTolerance || s.max_equalization_dev > kOracleTolerance) {
        throw Error(ErrorCode::kInvariantViolation, "closed form disagrees with the oracle");
      }
    };
  });

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
    if (action) action();
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return e.code() == ErrorCode::kInvariantViolation ? kExitInvariantViolation : kExitDataError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitDataError;
  }
  return kExitOk;
}

}  // namespace vlmfair
