// Acceptance gate. Each criterion prints exactly one PASS/FAIL line; the exit
// status is nonzero if any selected criterion fails.
//
//   vlmfair_acceptance            run all criteria
//   vlmfair_acceptance NAME...    run the named criteria
//   vlmfair_acceptance --list

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numbers>
#include <string>
#include <vector>

#include <unistd.h>

#include "oracles.hpp"
#include "vlmfair/error.hpp"
#include "vlmfair/eval.hpp"
#include "vlmfair/io.hpp"
#include "vlmfair/metrics.hpp"
#include "vlmfair/solver.hpp"

namespace vlmfair {
namespace {

namespace fs = std::filesystem;
using testing::make_embedding;
using testing::random_prototypes;
using testing::random_unit;

// Synthetic regression fixtures, calibrated once at seed 0 and frozen.
// Observed at calibration: EO_avg 0.892 -> 0.128, MaxSkew 0.638 -> 0.177,
// full projection MaxSkew 0.001.
constexpr std::uint64_t kSynthSeed = 0;
constexpr double kBaselineEoFloor = 0.1;
constexpr double kEoReductionMargin = 0.5;
constexpr double kSkewReductionMargin = 0.3;
constexpr double kFairnessMargin = 0.25;

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(const char* f, auto... xs) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, xs...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::pair<double, double> random_pair(Rng& rng) {
  for (;;) {
    const double t = rng.uniform(0.0, std::numbers::pi / 2);
    const double q = std::cos(t), p = std::sin(t);
    if (q > kDefaultDegeneracyEpsilon && q < 1 - kDefaultDegeneracyEpsilon &&
        p > kDefaultDegeneracyEpsilon && p < 1 - kDefaultDegeneracyEpsilon) {
      return {q, p};
    }
  }
}

Outcome closed_form_correctness() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(20240601);
  double max_dev = 0, max_eq = 0, max_indep = 0;
  for (int i = 0; i < 10000; ++i) {
    const auto [q, p] = random_pair(rng);
    const double a = closed_form_alpha(q, p);
    const auto pt = pareto_point(q, p, a);
    max_dev = std::max(max_dev, std::abs(a - oracle_alpha(q, p)));
    max_eq = std::max(max_eq, std::abs(pt.normalized_leakage - pt.normalized_loss));
    max_indep = std::max(max_indep, std::abs(a - static_cast<double>(testing::bisect_alpha(q, p))));
  }
  const double secs = seconds_since(t0);
  const bool pass = max_dev <= 1e-9 && max_eq <= 1e-9 && max_indep <= 1e-9 && secs < 5.0;
  return {pass, fmt("10000 pairs: max|alpha-oracle| %.2e, max|L~-V~| %.2e, max|alpha-ref| %.2e, %.2fs "
                    "(limits 1e-9, 1e-9, 1e-9, 5s)",
                    max_dev, max_eq, max_indep, secs)};
}

Outcome worked_instance() {
  Matrix basis = Matrix::Zero(3, 1);
  basis(0, 0) = 1;
  const auto s = AttributeSubspace::from_basis(basis, {"g1", "g2"}, "g1");
  Vector e(3);
  e << 0.6, 0.8, 0.0;
  const auto r = debias(make_embedding("e", e), s);
  const double a = r.alpha_star;
  const double v_formula = 1 - a * 0.6 - std::sqrt(1 - a * a) * 0.8;
  const double sim = r.u_star.dot(e);
  const bool pass = std::abs(a - 0.23916) <= 1e-4 && std::abs(v_formula - 0.2 * a / 0.6) <= 1e-9 &&
                    std::abs(r.self_utility_loss - 0.2 * a / 0.6) <= 1e-9 &&
                    std::abs(sim - (1 - v_formula)) <= 1e-9;
  return {pass, fmt("alpha* %.10f (0.23916 +- 1e-4), V %.12f vs 0.2a/0.6 %.12f, <u*,e> %.12f vs 1-V %.12f",
                    a, v_formula, 0.2 * a / 0.6, sim, 1 - v_formula)};
}

Outcome pareto_dominance() {
  Rng rng(7);
  int dominated = 0;
  for (int t = 0; t < 1000; ++t) {
    const auto [q, p] = random_pair(rng);
    const auto star = pareto_point(q, p, closed_form_alpha(q, p));
    for (int i = 0; i <= 10000; ++i) {
      const auto pt = pareto_point(q, p, q * i / 10000.0);
      if (pt.leakage <= star.leakage && pt.self_utility_loss <= star.self_utility_loss &&
          (pt.leakage < star.leakage || pt.self_utility_loss < star.self_utility_loss)) {
        ++dominated;
        break;
      }
    }
  }
  return {dominated == 0, fmt("1000 instances x 10001 grid points: %d dominated optima", dominated)};
}

Outcome cross_utility_bounds() {
  Rng rng(11);
  double min_slack = INFINITY;
  for (int d : {8, 512}) {
    for (int t = 0; t < 10000; ++t) {
      const Vector ui = random_unit(rng, d), ei = random_unit(rng, d);
      const Vector ut = random_unit(rng, d), et = random_unit(rng, d);
      const double bound = self_utility_cross_bound(1 - ui.dot(ei), 1 - ut.dot(et));
      min_slack = std::min(min_slack, bound - std::abs(ui.dot(ut) - ei.dot(et)));
    }
  }
  int tight_above_loose = 0, tight_violated = 0;
  for (int t = 0; t < 10000; ++t) {
    const int d = t % 2 ? 512 : 8;
    const auto s = build_subspace(random_prototypes(rng, d, 3));
    const Vector ei = random_unit(rng, d), et = random_unit(rng, d);
    const auto i = debias(make_embedding("i", ei), s);
    const auto x = debias(make_embedding("t", et, Modality::kText), s);
    const double tight = cross_utility_bound(i, x);
    if (tight > self_utility_cross_bound(i.self_utility_loss, x.self_utility_loss) + 1e-12) {
      ++tight_above_loose;
    }
    if (std::abs(i.u_star.dot(x.u_star) - ei.dot(et)) > tight + 1e-9) ++tight_violated;
  }
  const bool pass = min_slack >= -1e-9 && tight_above_loose == 0 && tight_violated == 0;
  return {pass, fmt("random quadruples d in {8,512}: min slack %.3e (>= -1e-9); debiased pairs: "
                    "%d tight>loose, %d tight-bound violations",
                    min_slack, tight_above_loose, tight_violated)};
}

Outcome degenerate_paths() {
  Rng rng(13);
  int checked = 0, changed = 0;
  for (int t = 0; t < 500; ++t) {
    const int d = 4 + static_cast<int>(rng.next() % 60);
    const auto s = build_subspace(random_prototypes(rng, d, 2 + static_cast<int>(rng.next() % 3)));
    const Vector a = normalized(s.project_parallel(random_unit(rng, d)));
    const Vector b = normalized(s.project_orthogonal(random_unit(rng, d)));
    for (double small : {0.0, 1e-9, 5e-7, 1e-6 * 0.999}) {
      for (bool fair : {true, false}) {
        Vector e = fair ? Vector(small * a + std::sqrt(1 - small * small) * b)
                        : Vector(std::sqrt(1 - small * small) * a + small * b);
        const auto dec = decompose(e, s);
        const double tiny = fair ? dec.norm_parallel : dec.norm_orthogonal;
        if (tiny > kDefaultDegeneracyEpsilon || !is_unit(e)) continue;
        const auto r = debias(make_embedding("e", e), s);
        ++checked;
        const bool same = r.u_star.size() == e.size() &&
                          std::memcmp(r.u_star.data(), e.data(), sizeof(double) * e.size()) == 0;
        if (!same || r.degenerate == Degeneracy::kNone) ++changed;
      }
    }
  }
  return {checked > 0 && changed == 0,
          fmt("%d degenerate inputs: %d not returned bit-identical with a degenerate flag", checked, changed)};
}

Outcome projector_suite() {
  Rng rng(17);
  double idem = 0, comp = 0, pyth = 0, basis_inv = 0, ref_inv = 0;
  for (int t = 0; t < 1000; ++t) {
    const int d = 3 + static_cast<int>(rng.next() % 40);
    const int n = 2 + static_cast<int>(rng.next() % std::min(d, 6));
    auto protos = random_prototypes(rng, d, n);
    const auto s = build_subspace(protos);
    Vector v(d);
    for (int i = 0; i < d; ++i) v[i] = rng.normal();
    const Vector par = s.project_parallel(v), orth = s.project_orthogonal(v);
    idem = std::max({idem, (s.project_parallel(par) - par).norm(), (s.project_orthogonal(orth) - orth).norm()});
    comp = std::max({comp, (par + orth - v).norm(), s.project_parallel(orth).norm(),
                     s.project_orthogonal(par).norm()});
    pyth = std::max(pyth, std::abs(par.squaredNorm() + orth.squaredNorm() - v.squaredNorm()) /
                              std::max(1.0, v.squaredNorm()));
    // Same span, different basis: permute the prototypes.
    std::vector<GroupPrototype> permuted(protos.rbegin(), protos.rend());
    const auto s2 = build_subspace(permuted, protos[0].group);
    basis_inv = std::max(basis_inv, (s2.project_parallel(v) - par).norm());
    const auto s3 = build_subspace(protos, protos[n - 1].group);
    ref_inv = std::max(ref_inv, (s3.project_parallel(v) - par).norm());
  }
  const bool pass = idem <= 1e-8 && comp <= 1e-8 && pyth <= 1e-8 && basis_inv <= 1e-8 && ref_inv <= 1e-8;
  return {pass, fmt("1000 instances each: idempotence %.1e, complementarity %.1e, Pythagoras %.1e, "
                    "basis %.1e, reference %.1e (limit 1e-8)",
                    idem, comp, pyth, basis_inv, ref_inv)};
}

Outcome metric_goldens() {
  auto cell = [](std::vector<ClassifiedSample>& out, const char* cls, const char* g, int n, int hits) {
    for (int i = 0; i < n; ++i) out.push_back({cls, i < hits ? cls : "other", g});
  };
  std::vector<ClassifiedSample> two;
  cell(two, "A", "m", 10, 10);
  cell(two, "A", "f", 10, 5);
  cell(two, "B", "m", 5, 4);
  cell(two, "B", "f", 5, 4);
  const auto eo2 = eo_violations(two, {"A", "B"}, {"m", "f"});

  std::vector<ClassifiedSample> three;
  cell(three, "A", "g1", 2, 2);
  cell(three, "A", "g2", 2, 1);
  cell(three, "A", "g3", 2, 1);
  const auto eo3 = eo_violations(three, {"A"}, {"g1", "g2", "g3"});

  auto cands = std::make_shared<CandidateGroups>(CandidateGroups{{"a", "male"}, {"b", "male"},
                                                                 {"c", "female"}, {"d", "female"}});
  const double skew = max_skew({{"q", {"a", "b", "c", "d"}, "", cands}}, 2, {"male", "female"});
  const double sp = statistical_parity({"t", {{"m", 100}, {"f", 0}}, 100}, {"m", "f"});
  std::vector<std::string> ranked;
  for (int i = 0; i < 12; ++i) ranked.push_back("c" + std::to_string(i));
  const double recall =
      recall_at_k({{"q1", ranked, "c0", nullptr}, {"q2", ranked, "c5", nullptr}, {"q3", ranked, "c10", nullptr}},
                  10);

  std::vector<std::string> failed;
  if (std::abs(eo2.delta_avg - 0.25) > 1e-12 || std::abs(eo2.delta_max - 0.5) > 1e-12) failed.push_back("EO");
  if (std::abs(eo3.delta_avg - 0.5) > 1e-12) failed.push_back("3-group EO avg");
  if (std::abs(eo3.delta_max - 0.1667) > 1e-4) failed.push_back("3-group EO max");
  // The quoted 0.6931 and 0.70711 are roundings of ln 2 and sqrt(1/2): match
  // the rounding as printed and the exact value to 1e-6.
  if (fmt("%.4f", skew) != "0.6931" || std::abs(skew - std::log(2.0)) > 1e-6) failed.push_back("MaxSkew");
  if (fmt("%.5f", sp) != "0.70711" || std::abs(sp - std::sqrt(0.5)) > 1e-6) failed.push_back("SP");
  if (recall != 2.0 / 3.0) failed.push_back("Recall");
  std::string which;
  for (const auto& f : failed) which += (which.empty() ? "" : ", ") + f;
  return {failed.empty(),
          fmt("EO (%.4f, %.4f) want (0.25, 0.5); 3-group EO (%.4f, %.4f) want (0.5, 0.1667 +- 1e-4); "
              "MaxSkew %.7f; SP %.7f; Recall %.6f%s%s",
              eo2.delta_avg, eo2.delta_max, eo3.delta_avg, eo3.delta_max, skew, sp, recall,
              failed.empty() ? "" : "; mismatched: ", which.c_str())};
}

Outcome synthetic_end_to_end() {
  const auto t0 = std::chrono::steady_clock::now();
  SynthSpec spec;
  spec.seed = kSynthSeed;
  const auto data = generate_synthetic(spec);
  std::vector<Embedding> queries = data.prompts;
  queries.insert(queries.end(), data.captions.begin(), data.captions.end());
  MetricSpec metrics;
  metrics.classify = metrics.retrieve = true;

  auto run = [&](DebiasMode mode) {
    Workspace ws;
    ws.image_embeddings = data.images;
    ws.text_embeddings = data.prompts;
    for (const auto& p : data.prompts) ws.class_prompts[*p.label(kClassLabel)] = p.id;
    ws.subspace = build_subspace(data.prototypes);
    ws.debias_mode = mode;
    ws.threads = 4;
    return run_report(ws, queries, metrics);
  };
  const auto none = run(DebiasMode::kNone);
  const auto both = run(DebiasMode::kBoth);
  const auto full = run(DebiasMode::kFullProjectionBoth);
  const double secs = seconds_since(t0);

  const double eo_none = none.classification->eo.delta_avg, eo_both = both.classification->eo.delta_avg;
  const double sk_none = *none.retrieval->max_skew, sk_both = *both.retrieval->max_skew,
               sk_full = *full.retrieval->max_skew;
  bool recall_ok = true;
  std::string recalls;
  for (const auto& [k, r] : both.retrieval->recall) {
    const double rf = full.retrieval->recall.at(k);
    recall_ok = recall_ok && r >= rf;
    recalls += fmt(" R@%d %.3f>=%.3f", k, r, rf);
  }
  const bool pass = eo_none > kBaselineEoFloor && eo_none - eo_both >= kEoReductionMargin &&
                    sk_none - sk_both >= kSkewReductionMargin && recall_ok &&
                    sk_both - sk_full <= kFairnessMargin && both.bounds.passed && secs < 60.0;
  return {pass, fmt("EO_avg %.3f->%.3f (drop >= %.2f), MaxSkew@%d %.3f->%.3f (drop >= %.2f), "
                    "full-projection MaxSkew %.3f (gap <= %.2f),%s, bounds %s, %.1fs",
                    eo_none, eo_both, kEoReductionMargin, both.retrieval->M, sk_none, sk_both,
                    kSkewReductionMargin, sk_full, kFairnessMargin, recalls.c_str(),
                    both.bounds.passed ? "ok" : "violated", secs)};
}

// Runs every subcommand of the real executable twice into separate
// directories and compares the payload files byte for byte.
Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / ("vlmfair_accept_" + std::to_string(::getpid()));
  fs::remove_all(root);
  const std::string exe = VLMFAIR_CLI_PATH, data = VLMFAIR_TEST_DATA_DIR;
  std::vector<std::string> commands = {
      "synth generate --d 24 --groups 3 --classes 3 --per-cell 40 --seed 5 --out {w}/synth",
      "prototypes build --variants " + data + "/variants_d512.json --embeddings " + data +
          "/embeddings_d512.jsonl --out {w}/protos.jsonl",
      "subspace build --prototypes {w}/synth/prototypes.jsonl --reference group_1 --out {w}/sub.json",
      "debias run --embeddings {w}/synth/queries.jsonl --subspace {w}/sub.json --results {w}/res.jsonl "
      "--threads 4 --out {w}/deb.jsonl",
      "debias run --mode full_projection_both --embeddings {w}/synth/images.jsonl --subspace "
      "{w}/sub.json --dtype f32 --format embf --out {w}/deb.embf",
      "eval classify --images {w}/synth/images.jsonl --prompts {w}/synth/prompts.jsonl --subspace "
      "{w}/sub.json --threads 3 --out {w}/cls.json",
      "eval retrieve --mode image_only --images {w}/synth/images.jsonl --queries {w}/synth/queries.jsonl "
      "--subspace {w}/sub.json --M 100 --K 1,5,10 --out {w}/ret.json",
      "report --mode text_only --images {w}/synth/images.jsonl --prompts {w}/synth/prompts.jsonl "
      "--queries {w}/synth/queries.jsonl --subspace {w}/sub.json --out {w}/rep.json",
      "metric sp --counts {w}/counts.csv --groups m,f,x --out {w}/sp.json",
      "oracle check --trials 2000 --seed 9 --out {w}/oracle.json",
  };
  for (const char* tag : {"a", "b"}) {
    const fs::path w = root / tag;
    fs::create_directories(w);
    io::write_file_atomic(w / "counts.csv", "prompt_id,group,count\np1,m,100\np1,f,0\np2,m,3\np2,f,4\np2,x,5\n");
    for (std::size_t i = 0; i < commands.size(); ++i) {
      std::string cmd = commands[i];
      for (std::size_t pos; (pos = cmd.find("{w}")) != std::string::npos;) cmd.replace(pos, 3, w.string());
      const std::string full = exe + " " + cmd + " > " + (w / ("stdout" + std::to_string(i))).string() + " 2>&1";
      if (std::system(full.c_str()) != 0) {
        fs::remove_all(root);
        return {false, "command failed: " + cmd};
      }
    }
  }
  std::size_t files = 0;
  std::vector<std::string> differing;
  for (const auto& entry : fs::recursive_directory_iterator(root / "a")) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    if (name.ends_with(".meta.json")) continue;
    const fs::path rel = fs::relative(entry.path(), root / "a");
    ++files;
    if (!fs::exists(root / "b" / rel) || io::read_file(entry.path()) != io::read_file(root / "b" / rel)) {
      differing.push_back(rel.string());
    }
  }
  fs::remove_all(root);
  std::string which;
  for (const auto& f : differing) which += " " + f;
  return {differing.empty() && files > 0,
          fmt("%zu commands x2: %zu payload files compared, %zu differ%s", commands.size(), files,
              differing.size(), which.c_str())};
}

struct Criterion {
  const char* name;
  Outcome (*run)();
};

const Criterion kCriteria[] = {
    {"closed_form_correctness", closed_form_correctness},
    {"worked_instance", worked_instance},
    {"pareto_dominance", pareto_dominance},
    {"cross_utility_bounds", cross_utility_bounds},
    {"degenerate_paths", degenerate_paths},
    {"projector_suite", projector_suite},
    {"metric_goldens", metric_goldens},
    {"synthetic_end_to_end", synthetic_end_to_end},
    {"cli_determinism", determinism},
};

}  // namespace
}  // namespace vlmfair

int main(int argc, char** argv) {
  using vlmfair::kCriteria;
  std::vector<std::string> selected(argv + 1, argv + argc);
  if (selected.size() == 1 && selected[0] == "--list") {
    for (const auto& c : kCriteria) std::cout << c.name << '\n';
    return 0;
  }
  int failures = 0, ran = 0;
  for (const auto& c : kCriteria) {
    if (!selected.empty() && std::find(selected.begin(), selected.end(), c.name) == selected.end()) continue;
    ++ran;
    vlmfair::Outcome o{false, ""};
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::cout << (o.pass ? "PASS " : "FAIL ") << c.name << ": " << o.detail << std::endl;
    failures += o.pass ? 0 : 1;
  }
  if (ran == 0 || ran != static_cast<int>(selected.empty() ? ran : selected.size())) {
    std::cerr << "unknown criterion name\n";
    return 2;
  }
  return failures == 0 ? 0 : 1;
}
