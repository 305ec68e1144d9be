#include "bnncert/cli.hpp"

#include <omp.h>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>

#include <CLI11.hpp>

#include "bnncert/certifier.hpp"
#include "bnncert/estimate.hpp"
#include "bnncert/io.hpp"

namespace bnncert {

namespace {

using nlohmann::json;

struct CertifyArgs {
  std::string model;
  std::string property;
  std::string method = "ibp";
  std::size_t samples = 100;
  double margin = 1.0;
  std::uint64_t seed = 0;
  std::string semantics = "stddev";
  std::size_t fragment_budget = 32;
  std::string anchors = "lower";
  std::string out;
  bool timing = false;
};

struct EstimateArgs {
  std::string model;
  std::string property;
  std::size_t samples = 500;
  std::uint64_t seed = 0;
  std::size_t refine_budget = 256;
  std::string out;
};

struct SweepArgs {
  std::string model;
  std::string property;
  std::vector<std::size_t> samples{100, 300, 1000};
  std::vector<double> margins{1.0};
  std::vector<std::string> methods{"ibp", "lbp"};
  std::uint64_t seed = 0;
  std::string semantics = "stddev";
  std::size_t fragment_budget = 32;
  std::string anchors = "lower";
  std::string out;
};

struct MeasureArgs {
  std::string model;
  std::string boxes;
  std::size_t mc_samples = 0;
  std::uint64_t seed = 0;
  std::string out;
};

void emit(const std::string& text, const std::string& path, std::ostream& out) {
  if (path.empty()) {
    out << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write '" + path + "'");
  f << text;
}

CertifyConfig make_config(const std::string& method, std::size_t samples, double margin, std::uint64_t seed,
                          const std::string& semantics, std::size_t budget, const std::string& anchors) {
  CertifyConfig cfg;
  cfg.method = check_method_from_string(method);
  cfg.n_samples = samples;
  cfg.weight_margin = margin;
  cfg.seed = seed;
  cfg.margin_semantics = margin_semantics_from_string(semantics);
  cfg.fragment_budget = budget;
  cfg.lbp.anchors = anchor_selection_from_string(anchors);
  cfg.validate();
  return cfg;
}

// Runs a single-box certification directly and a multi-box one through the
// union bound.
UnionCertificationResult certify_region(const BnnModel& model, const Property& prop, const CertifyConfig& cfg) {
  if (prop.region.boxes().size() == 1) {
    UnionCertificationResult r;
    r.per_region.push_back(certify(model, prop.region, prop.spec, cfg));
    r.p_lower = r.per_region.front().p_lower;
    r.wall_time = r.per_region.front().wall_time;
    return r;
  }
  return certify_union(model, prop.region, prop.spec, cfg);
}

int run_certify(const CertifyArgs& a, std::ostream& out, std::ostream& err) {
  const BnnModel model = load_model(a.model);
  const Property prop = load_property(a.property, &model);
  const CertifyConfig cfg =
      make_config(a.method, a.samples, a.margin, a.seed, a.semantics, a.fragment_budget, a.anchors);
  const auto result = certify_region(model, prop, cfg);

  json report = {{"report_version", kReportVersion},
                 {"command", "certify"},
                 {"model", a.model},
                 {"property", a.property},
                 {"config", config_to_json(cfg)},
                 {"p_lower", result.p_lower},
                 {"regions", json::array()}};
  for (const auto& r : result.per_region) report["regions"].push_back(result_to_json(r, a.timing));
  if (a.timing) report["wall_time"] = result.wall_time;
  emit(report.dump(2) + "\n", a.out, out);
  err << "p_lower " << format_double(result.p_lower) << " (" << format_double(result.wall_time) << " s)\n";
  return kExitOk;
}

json estimate_json(const McEstimate& e) {
  return {{"value", e.value}, {"n", e.n}, {"standard_error", e.standard_error}};
}

int run_estimate(const EstimateArgs& a, std::ostream& out) {
  const BnnModel model = load_model(a.model);
  const Property prop = load_property(a.property, &model);
  const auto psafe = mc_estimate_psafe(model, prop.region, prop.spec, a.samples, a.seed, {a.refine_budget});
  const auto x = prop.region.boxes().front().center();
  const auto pointwise = mc_pointwise_robustness(model, x, prop.spec, a.samples, a.seed);
  const auto mean = mc_mean_output(model, x, std::max<std::size_t>(2, a.samples), a.seed);

  const json report = {{"report_version", kReportVersion},
                       {"command", "estimate"},
                       {"model", a.model},
                       {"property", a.property},
                       {"samples", a.samples},
                       {"seed", a.seed},
                       {"refine_budget", a.refine_budget},
                       {"psafe", estimate_json(psafe)},
                       {"pointwise", {{"x", x}, {"estimate", estimate_json(pointwise)}}},
                       {"mean_output", {{"x", x}, {"mean", mean.mean}, {"standard_error", mean.standard_error}}}};
  emit(report.dump(2) + "\n", a.out, out);
  return kExitOk;
}

int run_sweep(const SweepArgs& a, std::ostream& out) {
  const BnnModel model = load_model(a.model);
  const Property prop = load_property(a.property, &model);
  std::ostringstream csv;
  csv << kSweepHeader << "\n";
  for (const auto& method : a.methods) {
    for (double gamma : a.margins) {
      for (std::size_t n : a.samples) {
        const CertifyConfig cfg = make_config(method, n, gamma, a.seed, a.semantics, a.fragment_budget, a.anchors);
        const auto r = certify_region(model, prop, cfg);
        std::size_t accepted = 0;
        std::size_t rejected = 0;
        for (const auto& p : r.per_region) {
          accepted += p.accepted;
          rejected += p.rejected;
        }
        csv << sweep_csv_line({cfg.method, n, gamma, a.seed, r.p_lower, accepted, rejected, r.wall_time}) << "\n";
      }
    }
  }
  emit(csv.str(), a.out, out);
  return kExitOk;
}

int run_measure(const MeasureArgs& a, std::ostream& out) {
  const BnnModel model = load_model(a.model);
  const auto boxes = load_weight_boxes(a.boxes);
  std::vector<WeightSample> samples;
  for (std::size_t i = 0; i < a.mc_samples; ++i) samples.push_back(sample_weights(model, a.seed, i));

  json report = {{"report_version", kReportVersion}, {"command", "measure"}, {"model", a.model}, {"boxes", json::array()}};
  double total = 0.0;
  for (const auto& b : boxes) {
    if (b.dim() != model.parameter_count())
      throw ShapeError("weight box has " + std::to_string(b.dim()) + " dimensions but the model has " +
                       std::to_string(model.parameter_count()) + " parameters");
    const double m = gaussian_box_mass(model, b);
    total += m;
    json entry = {{"mass", m}};
    if (!samples.empty()) entry["mc"] = estimate_json(mc_box_mass(samples, SafeWeightSet{{b}}));
    report["boxes"].push_back(entry);
  }
  report["total"] = total;
  emit(report.dump(2) + "\n", a.out, out);
  return kExitOk;
}

void apply_thread_count(int requested) {
  if (requested <= 0) {
    if (const char* env = std::getenv("BNNCERT_THREADS")) requested = std::atoi(env);
  }
  if (requested > 0) omp_set_num_threads(requested);
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Certified lower bounds on the probabilistic safety of Bayesian neural networks", "bnncert"};
  app.require_subcommand(1);
  app.fallthrough();
  int threads = 0;
  app.add_option("--threads", threads, "Worker threads (default: BNNCERT_THREADS or the OpenMP default)");

  const auto methods = CLI::IsMember({"ibp", "lbp"});
  const auto semantics = CLI::IsMember({"stddev", "variance"});
  const auto anchor_choices = CLI::IsMember({"lower", "per-term"});

  CertifyArgs ca;
  auto* certify_cmd = app.add_subcommand("certify", "Lower-bound the safety probability of a property");
  certify_cmd->add_option("--model", ca.model, "Model JSON")->required()->check(CLI::ExistingFile);
  certify_cmd->add_option("--property", ca.property, "Property JSON")->required()->check(CLI::ExistingFile);
  certify_cmd->add_option("--method", ca.method, "Rectangle check")->check(methods);
  certify_cmd->add_option("--samples", ca.samples, "Number of posterior samples N")->check(CLI::PositiveNumber);
  certify_cmd->add_option("--margin", ca.margin, "Weight margin gamma")->check(CLI::NonNegativeNumber);
  certify_cmd->add_option("--seed", ca.seed, "Seed of the sample stream");
  certify_cmd->add_option("--margin-semantics", ca.semantics, "Scale margins by stddev or variance")->check(semantics);
  certify_cmd->add_option("--fragment-budget", ca.fragment_budget, "Pieces kept per accepted rectangle")
      ->check(CLI::PositiveNumber);
  certify_cmd->add_option("--anchors", ca.anchors, "McCormick anchor choice in LBP")->check(anchor_choices);
  certify_cmd->add_option("--out", ca.out, "Report path (default stdout)");
  certify_cmd->add_flag("--timing", ca.timing, "Include wall-clock times in the report");

  EstimateArgs ea;
  auto* estimate_cmd = app.add_subcommand("estimate", "Monte Carlo reference estimates");
  estimate_cmd->add_option("--model", ea.model, "Model JSON")->required()->check(CLI::ExistingFile);
  estimate_cmd->add_option("--property", ea.property, "Property JSON")->required()->check(CLI::ExistingFile);
  estimate_cmd->add_option("--samples", ea.samples, "Number of posterior samples")->check(CLI::PositiveNumber);
  estimate_cmd->add_option("--seed", ea.seed, "Seed of the sample stream");
  estimate_cmd->add_option("--refine-budget", ea.refine_budget, "Input sub-boxes examined per sampled network")
      ->check(CLI::PositiveNumber);
  estimate_cmd->add_option("--out", ea.out, "Report path (default stdout)");

  SweepArgs sa;
  auto* sweep_cmd = app.add_subcommand("sweep", "Grid over N, gamma and method, as CSV");
  sweep_cmd->add_option("--model", sa.model, "Model JSON")->required()->check(CLI::ExistingFile);
  sweep_cmd->add_option("--property", sa.property, "Property JSON")->required()->check(CLI::ExistingFile);
  sweep_cmd->add_option("--samples", sa.samples, "Values of N")->delimiter(',')->check(CLI::PositiveNumber);
  sweep_cmd->add_option("--margins", sa.margins, "Values of gamma")->delimiter(',')->check(CLI::NonNegativeNumber);
  sweep_cmd->add_option("--methods", sa.methods, "Checks to run")->delimiter(',')->check(methods);
  sweep_cmd->add_option("--seed", sa.seed, "Seed of the sample stream");
  sweep_cmd->add_option("--margin-semantics", sa.semantics, "Scale margins by stddev or variance")->check(semantics);
  sweep_cmd->add_option("--fragment-budget", sa.fragment_budget, "Pieces kept per accepted rectangle")
      ->check(CLI::PositiveNumber);
  sweep_cmd->add_option("--anchors", sa.anchors, "McCormick anchor choice in LBP")->check(anchor_choices);
  sweep_cmd->add_option("--out", sa.out, "CSV path (default stdout)");

  MeasureArgs ma;
  auto* measure_cmd = app.add_subcommand("measure", "Gaussian mass of weight boxes");
  measure_cmd->add_option("--model", ma.model, "Model JSON")->required()->check(CLI::ExistingFile);
  measure_cmd->add_option("--boxes", ma.boxes, "Weight boxes JSON")->required()->check(CLI::ExistingFile);
  measure_cmd->add_option("--mc-samples", ma.mc_samples, "Also estimate each mass from this many samples");
  measure_cmd->add_option("--seed", ma.seed, "Seed for the Monte Carlo check");
  measure_cmd->add_option("--out", ma.out, "Report path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    err << "run with --help for usage\n";
    return kExitUsage;
  }

  try {
    apply_thread_count(threads);
    if (*certify_cmd) return run_certify(ca, out, err);
    if (*estimate_cmd) return run_estimate(ea, out);
    if (*sweep_cmd) return run_sweep(sa, out);
    if (*measure_cmd) return run_measure(ma, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace bnncert
